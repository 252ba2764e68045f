//! Synthetic datasets and the accuracy-versus-operations grid benchmark.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{random_subset, sample_fixed, DiscreteDistribution, DistributionSet};
use crate::io::write_atomically;
use crate::rng::{derive_seed, rng_for};
use crate::scheffe::OnDemandPairs;
use crate::tournament::{self, Mode, PoolRate, QuerySamples, Schedule, TournamentConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    HalfUniform,
    Zipfian,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::HalfUniform => "halfuniform",
            Family::Zipfian => "zipfian",
        }
    }

    pub fn generate(self, n: usize, k: usize, seed: u64) -> Result<DistributionSet> {
        match self {
            Family::HalfUniform => gen_half_uniform(n, k, seed),
            Family::Zipfian => gen_zipfian(n, k, seed),
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halfuniform" => Ok(Family::HalfUniform),
            "zipfian" => Ok(Family::Zipfian),
            _ => Err(Error::InvalidParameter(format!("unknown family `{s}`"))),
        }
    }
}

/// `k` distributions, each uniform over a random `n/2`-subset.
pub fn gen_half_uniform(n: usize, k: usize, seed: u64) -> Result<DistributionSet> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n must be even and at least 2, got {n}")));
    }
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng_for(seed, 0);
    let mass = 2.0 / n as f64;
    let dists = (0..k)
        .map(|_| {
            let mut v = vec![0.0; n];
            for i in random_subset(n, n / 2, &mut rng) {
                v[i] = mass;
            }
            DiscreteDistribution::new(v)
        })
        .collect::<Result<_>>()?;
    DistributionSet::new(dists)
}

/// `k` independent random permutations of the Zipf law `p(i) ∝ 1/i`.
pub fn gen_zipfian(n: usize, k: usize, seed: u64) -> Result<DistributionSet> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let h: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
    let base: Vec<f64> = (1..=n).map(|i| 1.0 / (i as f64 * h)).collect();
    let mut rng = rng_for(seed, 0);
    let dists = (0..k)
        .map(|_| {
            let mut v = base.clone();
            v.shuffle(&mut rng);
            DiscreteDistribution::new(v)
        })
        .collect::<Result<_>>()?;
    DistributionSet::new(dists)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub samples: Vec<usize>,
    pub fast_consts: Vec<usize>,
    pub n_all_pairs: Vec<usize>,
    /// Independent query sets; one CSV `trial` each.
    pub query_sets: usize,
    pub queries_per_set: usize,
}

impl GridSpec {
    /// The grid used for the half-uniform and Zipfian experiments.
    pub fn standard(samples: Vec<usize>) -> Self {
        Self {
            samples,
            fast_consts: vec![5, 10, 15, 20],
            n_all_pairs: vec![0, 10, 20, 30],
            query_sets: 5,
            queries_per_set: 20,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.samples.is_empty() || self.fast_consts.is_empty() || self.n_all_pairs.is_empty() {
            return Err(Error::InvalidParameter("grid lists must be non-empty".into()));
        }
        if self.samples.contains(&0) || self.fast_consts.contains(&0) {
            return Err(Error::InvalidParameter("samples and fastconst values must be positive".into()));
        }
        if self.query_sets == 0 || self.queries_per_set == 0 {
            return Err(Error::InvalidParameter("need at least one query".into()));
        }
        Ok(())
    }
}

/// One row of the grid CSV. `ops` is the mean Scheffe-operation count per
/// query; `fastconst` is 0 for base mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub family: String,
    pub n: usize,
    pub k: usize,
    pub samples: usize,
    pub fastconst: usize,
    pub nallpairs: usize,
    pub mode: String,
    pub trial: usize,
    pub accuracy: f64,
    pub ops: f64,
}

fn config(mode: Mode, fast_const: usize, s: usize, n_all_pairs: usize, seed: u64) -> TournamentConfig {
    let mut cfg = TournamentConfig::experimental(fast_const.max(1), n_all_pairs, seed);
    if mode == Mode::Base {
        cfg.schedule = Schedule::FullSample(s);
    }
    cfg.pool_rate = PoolRate::Fixed(n_all_pairs);
    cfg
}

/// Runs base and fast tournaments at every grid point on queries drawn from
/// random dataset members, and reports accuracy (fraction of queries that
/// return their source) per query set.
pub fn run_grid(vs: &DistributionSet, family: &str, spec: &GridSpec, seed: u64) -> Result<Vec<GridRow>> {
    spec.validate()?;
    let pairs = OnDemandPairs::new(vs);
    let k = vs.len();
    // (set, query) -> label
    let queries: Vec<(usize, usize, usize)> = (0..spec.query_sets)
        .flat_map(|t| (0..spec.queries_per_set).map(move |q| (t, q)))
        .map(|(t, q)| {
            let mut rng = rng_for(derive_seed(seed, &[t as u64, q as u64]), 0);
            (t, q, rng.random_range(0..k))
        })
        .collect();

    let mut points: Vec<(usize, usize, usize, Mode)> = Vec::new();
    for &s in &spec.samples {
        for &nap in &spec.n_all_pairs {
            points.push((s, 0, nap, Mode::Base));
            for &fc in &spec.fast_consts {
                points.push((s, fc, nap, Mode::Fast));
            }
        }
    }

    // outcome[q][point] = (correct, ops)
    let outcome: Vec<Vec<(bool, u64)>> = queries
        .par_iter()
        .map(|&(t, q, label)| {
            let mut by_s = Vec::with_capacity(spec.samples.len());
            for &s in &spec.samples {
                let sseed = derive_seed(seed, &[t as u64, q as u64, s as u64, 1]);
                by_s.push((s, sample_fixed(&vs[label], s, sseed)));
            }
            points
                .iter()
                .map(|&(s, fc, nap, mode)| {
                    let draws = &by_s.iter().find(|(x, _)| *x == s).expect("sample size in grid").1;
                    let tseed = derive_seed(seed, &[t as u64, q as u64, s as u64, 2]);
                    let cfg = config(mode, fc, s, nap, tseed);
                    let r = tournament::run(mode, &pairs, QuerySamples::shared(draws), &cfg)?;
                    Ok((r.winner == label, r.ops.scheffe_ops))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len() * spec.query_sets);
    for (pi, &(s, fc, nap, mode)) in points.iter().enumerate() {
        for t in 0..spec.query_sets {
            let mut hits = 0usize;
            let mut ops = 0u64;
            let mut m = 0usize;
            for (qi, &(qt, _, _)) in queries.iter().enumerate() {
                if qt == t {
                    let (ok, o) = outcome[qi][pi];
                    hits += usize::from(ok);
                    ops += o;
                    m += 1;
                }
            }
            rows.push(GridRow {
                family: family.to_string(),
                n: vs.domain_size(),
                k,
                samples: s,
                fastconst: fc,
                nallpairs: nap,
                mode: mode.as_str().to_string(),
                trial: t,
                accuracy: hits as f64 / m as f64,
                ops: ops as f64 / m as f64,
            });
        }
    }
    Ok(rows)
}

/// Grid point averaged over query sets.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub mode: String,
    pub samples: usize,
    pub fastconst: usize,
    pub nallpairs: usize,
    pub accuracy: f64,
    pub accuracy_sd: f64,
    pub ops: f64,
}

pub fn summarize(rows: &[GridRow]) -> Vec<GridPoint> {
    let mut out: Vec<GridPoint> = Vec::new();
    let mut groups: Vec<(&str, usize, usize, usize, Vec<&GridRow>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|g| g.0 == r.mode && g.1 == r.samples && g.2 == r.fastconst && g.3 == r.nallpairs)
        {
            Some(g) => g.4.push(r),
            None => groups.push((&r.mode, r.samples, r.fastconst, r.nallpairs, vec![r])),
        }
    }
    for (mode, samples, fastconst, nallpairs, rs) in groups {
        let m = rs.len() as f64;
        let acc = rs.iter().map(|r| r.accuracy).sum::<f64>() / m;
        let var = rs.iter().map(|r| (r.accuracy - acc).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        out.push(GridPoint {
            mode: mode.to_string(),
            samples,
            fastconst,
            nallpairs,
            accuracy: acc,
            accuracy_sd: var.sqrt(),
            ops: rs.iter().map(|r| r.ops).sum::<f64>() / m,
        });
    }
    out
}

/// Indices of the points not dominated by another point, where a point
/// dominates when it has no more ops and no less accuracy, and is strictly
/// better in one of the two. Sorted by ops.
pub fn pareto_envelope(points: &[(f64, f64)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len())
        .filter(|&i| {
            let (oi, ai) = points[i];
            !points
                .iter()
                .any(|&(o, a)| o <= oi && a >= ai && (o < oi || a > ai))
        })
        .collect();
    idx.sort_by(|&a, &b| points[a].0.total_cmp(&points[b].0).then(a.cmp(&b)));
    idx
}

/// Mean accuracy over every grid configuration at one sample count.
pub fn overall_accuracy(rows: &[GridRow], samples: usize) -> Option<f64> {
    let at: Vec<f64> = rows.iter().filter(|r| r.samples == samples).map(|r| r.accuracy).collect();
    (!at.is_empty()).then(|| at.iter().sum::<f64>() / at.len() as f64)
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    write_atomically(path, |w| write_csv(w, rows))
}

pub(crate) fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
