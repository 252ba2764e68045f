//! Packet traces: parsing, chunking into empirical source distributions,
//! a synthetic trace generator, and the nearest-traffic-pattern benchmark.
//!
//! Trace CSV: one packet per line, `timestamp_us,src_key`, optionally
//! preceded by that header. Blank lines are skipped.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{l1, CategoricalSampler, DiscreteDistribution, DistributionSet};
use crate::io::write_atomically;
use crate::rng::{derive_seed, rng_for};
use crate::scheffe::OnDemandPairs;
use crate::tournament::{self, Mode, QuerySamples, TournamentConfig};
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "timestamp_us,src_key";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub timestamp_us: u64,
    pub src_key: String,
}

pub fn parse_trace(path: &Path) -> Result<Vec<Packet>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || (i == 0 && t == TRACE_HEADER) {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg,
        };
        let (ts, key) = t
            .split_once(',')
            .ok_or_else(|| err(format!("expected `timestamp_us,src_key`, got `{t}`")))?;
        let key = key.trim();
        if key.is_empty() || key.contains(',') {
            return Err(err(format!("bad source key `{key}`")));
        }
        let timestamp_us = ts.trim().parse().map_err(|e| err(format!("bad timestamp `{ts}`: {e}")))?;
        out.push(Packet {
            timestamp_us,
            src_key: key.to_string(),
        });
    }
    Ok(out)
}

pub fn write_trace(path: &Path, packets: &[Packet]) -> Result<()> {
    write_atomically(path, |w| {
        writeln!(w, "{TRACE_HEADER}")?;
        for p in packets {
            writeln!(w, "{},{}", p.timestamp_us, p.src_key)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chunking {
    /// Consecutive runs of `m` packets; the last chunk may be shorter.
    ByCount(usize),
    /// Windows of `ms` milliseconds measured from the earliest timestamp.
    ByTime { ms: u64 },
}

impl std::str::FromStr for Chunking {
    type Err = Error;

    /// `count=N` or `time=MS`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("chunking must be `count=N` or `time=MS`, got `{s}`"));
        let (kind, val) = s.split_once('=').ok_or_else(bad)?;
        let v: u64 = val.parse().map_err(|_| bad())?;
        if v == 0 {
            return Err(bad());
        }
        match kind {
            "count" => Ok(Chunking::ByCount(v as usize)),
            "time" => Ok(Chunking::ByTime { ms: v }),
            _ => Err(bad()),
        }
    }
}

/// Source keys in order of first appearance; position is the domain index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    keys: Vec<String>,
    index: HashMap<String, usize>,
}

impl Dictionary {
    pub fn from_packets(packets: &[Packet]) -> Self {
        let mut d = Self::default();
        for p in packets {
            d.insert(&p.src_key);
        }
        d
    }

    pub fn insert(&mut self, key: &str) -> usize {
        if let Some(&i) = self.index.get(key) {
            return i;
        }
        self.keys.push(key.to_string());
        self.index.insert(key.to_string(), self.keys.len() - 1);
        self.keys.len() - 1
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.index.get(key).copied()
    }

    pub fn keys(&self) -> &[String] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// One key per line.
    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomically(path, |w| {
            for k in &self.keys {
                writeln!(w, "{k}")?;
            }
            Ok(())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut d = Self::default();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if d.index.contains_key(&line) {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: format!("duplicate key `{line}`"),
                });
            }
            d.insert(&line);
        }
        Ok(d)
    }
}

/// Per-chunk empirical distributions over one dictionary built from the
/// whole trace. Chunks without packets are dropped.
pub fn chunk_to_distributions(packets: &[Packet], chunking: Chunking) -> Result<(DistributionSet, Dictionary)> {
    let dict = Dictionary::from_packets(packets);
    if dict.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ids: Vec<usize> = packets.iter().map(|p| dict.get(&p.src_key).expect("key in dictionary")).collect();
    let chunks: Vec<Vec<usize>> = match chunking {
        Chunking::ByCount(0) | Chunking::ByTime { ms: 0 } => {
            return Err(Error::InvalidParameter("chunk size must be positive".into()));
        }
        Chunking::ByCount(m) => ids.chunks(m).map(<[usize]>::to_vec).collect(),
        Chunking::ByTime { ms } => {
            let t0 = packets.iter().map(|p| p.timestamp_us).min().expect("non-empty trace");
            let width = ms.saturating_mul(1000);
            let n_windows = packets.iter().map(|p| (p.timestamp_us - t0) / width).max().unwrap_or(0) + 1;
            let mut windows = vec![Vec::new(); n_windows as usize];
            for (p, &id) in packets.iter().zip(&ids) {
                windows[((p.timestamp_us - t0) / width) as usize].push(id);
            }
            let empty = windows.iter().filter(|w| w.is_empty()).count();
            if empty > 0 {
                log::warn!("dropping {empty} empty time windows");
            }
            windows.into_iter().filter(|w| !w.is_empty()).collect()
        }
    };
    let n = dict.len();
    let dists = chunks
        .par_iter()
        .map(|c| {
            let mut counts = vec![0.0; n];
            for &i in c {
                counts[i] += 1.0;
            }
            DiscreteDistribution::from_weights(&counts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((DistributionSet::new(dists)?, dict))
}

/// Synthetic trace whose source distribution drifts between chunks.
///
/// Key `i` gets log-weight `-ln(rank_i)` under a random rank permutation
/// (a Zipf law), and every chunk adds `drift * N(0, 1)` to each log-weight,
/// so nearby chunks have similar distributions. Chunk `c` spans 170 ms.
pub fn gen_synthetic_trace(
    n_keys: usize,
    chunks: usize,
    packets_per_chunk: usize,
    drift: f64,
    seed: u64,
) -> Result<Vec<Packet>> {
    if n_keys == 0 || packets_per_chunk == 0 {
        return Err(Error::InvalidParameter("need at least one key and one packet per chunk".into()));
    }
    if !(drift >= 0.0) || !drift.is_finite() {
        return Err(Error::InvalidParameter(format!("drift must be non-negative, got {drift}")));
    }
    let keys: Vec<String> = (0..n_keys)
        .map(|i| format!("10.{}.{}.{}", (i >> 16) & 0xff, (i >> 8) & 0xff, i & 0xff))
        .collect();
    let mut rng = rng_for(seed, 0);
    let mut ranks: Vec<usize> = (1..=n_keys).collect();
    ranks.shuffle(&mut rng);
    let mut logw: Vec<f64> = ranks.iter().map(|&r| -(r as f64).ln()).collect();

    const CHUNK_US: u64 = 170_000;
    let t0: u64 = 1_700_000_000_000_000;
    let mut out = Vec::with_capacity(chunks * packets_per_chunk);
    for c in 0..chunks {
        if c > 0 && drift > 0.0 {
            for w in &mut logw {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w += drift * z;
            }
        }
        let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logw.iter().map(|w| (w - top).exp()).collect();
        let sampler = CategoricalSampler::new(&DiscreteDistribution::from_weights(&weights)?);
        let mut crng = rng_for(derive_seed(seed, &[c as u64]), 1);
        for j in 0..packets_per_chunk {
            out.push(Packet {
                timestamp_us: t0 + c as u64 * CHUNK_US + j as u64 * CHUNK_US / packets_per_chunk as u64,
                src_key: keys[sampler.draw(&mut crng)].clone(),
            });
        }
    }
    Ok(out)
}

/// One tournament setting of the network benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetSetting {
    pub samples: usize,
    pub fast_const: usize,
    pub n_all_pairs: usize,
}

/// One row of the network CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRow {
    pub query_id: usize,
    pub trial: usize,
    pub mode: String,
    pub samples: usize,
    pub fastconst: usize,
    pub nallpairs: usize,
    pub tv_answer: f64,
    pub tv_true_nn: f64,
    pub tv_mean: f64,
    pub ops: u64,
}

/// For each query chunk, draws `samples` packets with replacement from its
/// empirical distribution and runs base and fast tournaments over the
/// dataset chunks; reports total variation distances to the answer, to the
/// exact nearest chunk, and averaged over the dataset.
pub fn nn_eval(
    dataset: &DistributionSet,
    queries: &DistributionSet,
    setting: NetSetting,
    trials: usize,
    seed: u64,
) -> Result<Vec<NetRow>> {
    if queries.domain_size() != dataset.domain_size() {
        return Err(Error::DimensionMismatch {
            left: queries.domain_size(),
            right: dataset.domain_size(),
        });
    }
    if trials == 0 || setting.samples == 0 || setting.fast_const == 0 {
        return Err(Error::InvalidParameter("trials, samples and fastconst must be positive".into()));
    }
    let pairs = OnDemandPairs::new(dataset);
    let rows: Vec<Vec<NetRow>> = (0..queries.len())
        .into_par_iter()
        .map(|qi| {
            let q = queries[qi].probs();
            let tvs: Vec<f64> = dataset.iter().map(|v| 0.5 * l1(v.probs(), q)).collect();
            let tv_true_nn = tvs.iter().copied().fold(f64::INFINITY, f64::min);
            let tv_mean = tvs.iter().sum::<f64>() / tvs.len() as f64;
            let sampler = CategoricalSampler::new(&queries[qi]);
            let mut out = Vec::with_capacity(2 * trials);
            for t in 0..trials {
                let mut rng = rng_for(derive_seed(seed, &[qi as u64, t as u64]), 0);
                let draws = sampler.draws(setting.samples, &mut rng);
                for mode in [Mode::Base, Mode::Fast] {
                    let mut cfg = TournamentConfig::experimental(
                        setting.fast_const,
                        setting.n_all_pairs,
                        derive_seed(seed, &[qi as u64, t as u64, 1]),
                    );
                    if mode == Mode::Base {
                        cfg.schedule = tournament::Schedule::FullSample(setting.samples);
                    }
                    let r = tournament::run(mode, &pairs, QuerySamples::shared(&draws), &cfg)?;
                    out.push(NetRow {
                        query_id: qi,
                        trial: t,
                        mode: mode.as_str().to_string(),
                        samples: setting.samples,
                        fastconst: if mode == Mode::Fast { setting.fast_const } else { 0 },
                        nallpairs: setting.n_all_pairs,
                        tv_answer: tvs[r.winner],
                        tv_true_nn,
                        tv_mean,
                        ops: r.ops.scheffe_ops,
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

pub fn write_net_csv(path: &Path, rows: &[NetRow]) -> Result<()> {
    write_atomically(path, |w| crate::synth::write_csv(w, rows))
}

/// Splits a chunk set into the first `n_dataset` chunks and the next
/// `n_queries`.
pub fn split_dataset(all: &DistributionSet, n_dataset: usize, n_queries: usize) -> Result<(DistributionSet, DistributionSet)> {
    if n_dataset == 0 || n_queries == 0 || n_dataset + n_queries > all.len() {
        return Err(Error::InvalidParameter(format!(
            "need {} chunks ({n_dataset} + {n_queries}), have {}",
            n_dataset + n_queries,
            all.len()
        )));
    }
    let v = all.as_slice();
    Ok((
        DistributionSet::new(v[..n_dataset].to_vec())?,
        DistributionSet::new(v[n_dataset..n_dataset + n_queries].to_vec())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pk(ts: u64, k: &str) -> Packet {
        Packet {
            timestamp_us: ts,
            src_key: k.into(),
        }
    }

    #[test]
    fn parse_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "timestamp_us,src_key\n1700000000123456,10.1.2.3\n\n5,b\n").unwrap();
        let p = parse_trace(&path).unwrap();
        assert_eq!(p, vec![pk(1700000000123456, "10.1.2.3"), pk(5, "b")]);
        std::fs::write(&path, "").unwrap();
        assert!(parse_trace(&path).unwrap().is_empty());
        std::fs::write(&path, "1,a\nxx,b\n").unwrap();
        assert!(matches!(parse_trace(&path), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn counting_chunk() {
        let (vs, dict) = chunk_to_distributions(&[pk(0, "a"), pk(1, "a"), pk(2, "b")], Chunking::ByCount(10)).unwrap();
        assert_eq!(dict.keys(), &["a".to_string(), "b".to_string()]);
        assert_eq!(vs.len(), 1);
        assert!((vs[0][0] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn time_chunks_drop_empty_windows() {
        let pkts = [pk(0, "a"), pk(500, "b"), pk(5_000, "a")];
        let (vs, _) = chunk_to_distributions(&pkts, Chunking::ByTime { ms: 1 }).unwrap();
        assert_eq!(vs.len(), 2);
    }

    #[test]
    fn chunking_spec() {
        assert_eq!("count=100000".parse::<Chunking>().unwrap(), Chunking::ByCount(100000));
        assert_eq!("time=170".parse::<Chunking>().unwrap(), Chunking::ByTime { ms: 170 });
        assert!("count=0".parse::<Chunking>().is_err());
        assert!("bytes=3".parse::<Chunking>().is_err());
    }

    #[test]
    fn synthetic_trace_is_reproducible() {
        let a = gen_synthetic_trace(50, 3, 20, 0.1, 5).unwrap();
        assert_eq!(a, gen_synthetic_trace(50, 3, 20, 0.1, 5).unwrap());
        assert_eq!(a.len(), 60);
        assert!(a[0].src_key.starts_with("10.0.0."));
    }
}
