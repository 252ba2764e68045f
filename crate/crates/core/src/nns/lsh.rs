//! Gaussian p-stable LSH for ℓ2.
//!
//! Each hash is `floor((a . x + b) / w)` with `a ~ N(0, I)` and
//! `b ~ U[0, w)`. Hashes are arranged in `M` groups of `r/2` functions and a
//! table is a pair of groups, so `M(M-1)/2` tables of `r` functions each cost
//! only `M * r/2` evaluations. A point lands in the same bucket as the query
//! in some table exactly when at least two of its group keys match, which is
//! how queries are answered: one sorted key array per group, hit counts per
//! point, and an exact re-rank of every point with two or more hits.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::argmin_by;
use crate::dist::{l2_squared, RestrictedVector};
use crate::rng::{rng_for, splitmix64};
use crate::scheffe::OpCounter;
use crate::{Error, Result};

/// Per-query failure probability the table count is sized for.
pub const DEFAULT_FAILURE: f64 = 0.05;

const MAX_GROUPS: usize = 1 << 12;

/// Probability that one hash with bucket width `w` collides for two points
/// at distance `d`, as a function of `u = w / d`.
pub fn collision_probability(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if !u.is_finite() {
        return 1.0;
    }
    // 2 Phi(-u) = erfc(u / sqrt 2)
    let tail = erfc(u / std::f64::consts::SQRT_2);
    let p = 1.0 - tail - 2.0 / ((2.0 * std::f64::consts::PI).sqrt() * u) * (1.0 - (-u * u / 2.0).exp());
    p.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LshParams {
    /// Distance at which a near neighbor must be found.
    pub radius: f64,
    /// Approximation factor.
    pub c: f64,
    /// Bucket width.
    pub w: f64,
    /// Hash functions per group (half of a table's `r`).
    pub half_width: usize,
    /// Number of groups `M`.
    pub groups: usize,
}

impl LshParams {
    /// `w = 4 radius`, `r = ceil(ln k / ln(1 / p(w / (c radius))))` rounded up
    /// to even, and the fewest groups `M` whose table pairs find a point at
    /// distance `radius` with probability at least `1 - failure`.
    pub fn new(radius: f64, c: f64, k: usize, failure: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!("LSH radius must be positive, got {radius}")));
        }
        if !(c > 1.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("LSH approximation must exceed 1, got {c}")));
        }
        if !(failure > 0.0 && failure < 1.0) {
            return Err(Error::InvalidParameter(format!("failure probability must be in (0, 1), got {failure}")));
        }
        let w = 4.0 * radius;
        let p1 = collision_probability(4.0);
        let p2 = collision_probability(4.0 / c);
        let ln_k = (k.max(2) as f64).ln();
        let r = ((ln_k / -p2.ln()).ceil() as usize).max(2);
        let half_width = r.div_ceil(2);
        let q = p1.powi(half_width as i32);

        let miss = |m: usize| {
            let m = m as f64;
            (1.0 - q).powf(m) + m * q * (1.0 - q).powf(m - 1.0)
        };
        let mut groups = 2;
        while groups < MAX_GROUPS && miss(groups) > failure {
            groups += 1;
        }
        Ok(Self {
            radius,
            c,
            w,
            half_width,
            groups,
        })
    }

    /// `r`, the number of hash functions that make up one table key.
    pub fn hashes_per_table(&self) -> usize {
        2 * self.half_width
    }

    /// `L`, the number of (virtual) tables.
    pub fn tables(&self) -> usize {
        self.groups * (self.groups - 1) / 2
    }

    /// Probability that a point at distance `radius` is missed by every table.
    pub fn miss_probability(&self) -> f64 {
        let q = collision_probability(4.0).powi(self.half_width as i32);
        let m = self.groups as f64;
        (1.0 - q).powf(m) + m * q * (1.0 - q).powf(m - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LshAnswer {
    /// Identifier of the returned vector.
    pub id: usize,
    /// Position of the returned vector in the index.
    pub position: usize,
    pub distance: f64,
    /// Exact distance evaluations spent on this query.
    pub candidates: usize,
    /// No table produced a candidate and every stored vector was scanned.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct L2LshIndex {
    params: LshParams,
    seed: u64,
    dim: usize,
    ids: Vec<usize>,
    /// Row-major stored vectors.
    rows: Vec<f64>,
    /// Row-major projection vectors, `groups * half_width` rows of `dim`.
    proj: Vec<f64>,
    offsets: Vec<f64>,
    /// Per group: `(key, position)` sorted by key.
    keys: Vec<Vec<(u32, u32)>>,
}

impl L2LshIndex {
    /// Indexes vectors restricted to a common support; ids are positions.
    pub fn build(vecs: &[RestrictedVector], params: LshParams, seed: u64) -> Result<Self> {
        let first = vecs.first().ok_or(Error::EmptyDataset)?;
        let support = first.support();
        let mut rows = Vec::with_capacity(vecs.len() * support.len());
        for v in vecs {
            if v.len() != first.len() {
                return Err(Error::DimensionMismatch {
                    left: v.len(),
                    right: first.len(),
                });
            }
            if v.support() != support {
                return Err(Error::InvalidParameter("restricted vectors have different supports".into()));
            }
            rows.extend(v.compact());
        }
        Self::from_rows((0..vecs.len()).collect(), rows, support.len(), params, seed)
    }

    /// `rows` holds `ids.len()` vectors of length `dim`, row-major.
    pub fn from_rows(ids: Vec<usize>, rows: Vec<f64>, dim: usize, params: LshParams, seed: u64) -> Result<Self> {
        if ids.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != ids.len() * dim {
            return Err(Error::DimensionMismatch {
                left: rows.len(),
                right: ids.len() * dim,
            });
        }
        if ids.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter("too many vectors for one LSH index".into()));
        }
        let n_hashes = params.groups * params.half_width;
        let mut rng = rng_for(seed, 0);
        let proj: Vec<f64> = (0..n_hashes * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let offsets: Vec<f64> = (0..n_hashes).map(|_| rng.random::<f64>() * params.w).collect();

        let mut index = Self {
            params,
            seed,
            dim,
            ids,
            rows,
            proj,
            offsets,
            keys: Vec::new(),
        };
        let per_point: Vec<Vec<u32>> = if dim == 0 {
            vec![vec![0; params.groups]; index.ids.len()]
        } else {
            index.rows.par_chunks(dim).map(|x| index.group_keys(x)).collect()
        };
        index.keys = (0..params.groups)
            .map(|g| {
                let mut col: Vec<(u32, u32)> =
                    per_point.iter().enumerate().map(|(pos, ks)| (ks[g], pos as u32)).collect();
                col.sort_unstable();
                col
            })
            .collect();
        Ok(index)
    }

    fn group_keys(&self, x: &[f64]) -> Vec<u32> {
        let h = self.params.half_width;
        (0..self.params.groups)
            .map(|g| {
                let mut acc = splitmix64(g as u64);
                for f in g * h..(g + 1) * h {
                    let a = &self.proj[f * self.dim..(f + 1) * self.dim];
                    let dot: f64 = a.iter().zip(x).map(|(a, x)| a * x).sum();
                    let bucket = ((dot + self.offsets[f]) / self.params.w).floor() as i64;
                    acc = splitmix64(acc ^ bucket as u64);
                }
                acc as u32
            })
            .collect()
    }

    pub fn params(&self) -> &LshParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    fn row(&self, pos: usize) -> &[f64] {
        &self.rows[pos * self.dim..(pos + 1) * self.dim]
    }

    /// Stored vectors sharing a bucket with `q` in at least one table.
    pub fn candidates(&self, q: &[f64]) -> Result<Vec<usize>> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: q.len(),
                right: self.dim,
            });
        }
        let qk = if self.dim == 0 {
            vec![0; self.params.groups]
        } else {
            self.group_keys(q)
        };
        let mut hits = vec![0u8; self.ids.len()];
        let mut out = Vec::new();
        for (g, col) in self.keys.iter().enumerate() {
            let key = qk[g];
            let start = col.partition_point(|&(k, _)| k < key);
            for &(k, pos) in &col[start..] {
                if k != key {
                    break;
                }
                let h = &mut hits[pos as usize];
                *h = h.saturating_add(1);
                if *h == 2 {
                    out.push(pos as usize);
                }
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Nearest stored vector among the candidates, or among all vectors when
    /// no table produced one. Every exact distance evaluation is counted.
    pub fn query(&self, q: &[f64], counter: &mut OpCounter) -> Result<LshAnswer> {
        let cands = self.candidates(q)?;
        if cands.is_empty() {
            let mut ans = self.exact_query(q, counter)?;
            ans.fallback = true;
            return Ok(ans);
        }
        let (position, d2) = argmin_by(cands.iter().copied(), |p| l2_squared(self.row(p), q)).expect("candidates are non-empty");
        counter.add_candidates(cands.len() as u64);
        Ok(LshAnswer {
            id: self.ids[position],
            position,
            distance: d2.sqrt(),
            candidates: cands.len(),
            fallback: false,
        })
    }

    /// Exact ℓ2 nearest neighbor by scanning every stored vector.
    pub fn exact_query(&self, q: &[f64], counter: &mut OpCounter) -> Result<LshAnswer> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                left: q.len(),
                right: self.dim,
            });
        }
        let (position, d2) = argmin_by(0..self.ids.len(), |p| l2_squared(self.row(p), q)).expect("index is non-empty");
        counter.add_candidates(self.ids.len() as u64);
        Ok(LshAnswer {
            id: self.ids[position],
            position,
            distance: d2.sqrt(),
            candidates: self.ids.len(),
            fallback: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn collision_probability_shape() {
        assert_abs_diff_eq!(collision_probability(4.0), 0.80052, epsilon = 1e-4);
        assert!(collision_probability(1.0) < collision_probability(2.0));
        assert_eq!(collision_probability(0.0), 0.0);
        assert_eq!(collision_probability(f64::INFINITY), 1.0);
    }

    #[test]
    fn params_meet_failure_target() {
        let p = LshParams::new(0.1, 1.2, 4096, 0.05).unwrap();
        assert_eq!(p.hashes_per_table() % 2, 0);
        assert!(p.miss_probability() <= 0.05);
        assert!(p.groups >= 2);
        assert!(LshParams::new(0.1, 1.0, 10, 0.05).is_err());
        assert!(LshParams::new(0.0, 2.0, 10, 0.05).is_err());
    }

    #[test]
    fn stored_vector_finds_itself() {
        let rows: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let params = LshParams::new(0.2, 1.5, 10, 0.05).unwrap();
        let idx = L2LshIndex::from_rows((100..110).collect(), rows.clone(), 4, params, 9).unwrap();
        for p in 0..10 {
            let mut c = OpCounter::new();
            let a = idx.query(&rows[p * 4..(p + 1) * 4], &mut c).unwrap();
            assert_eq!(a.distance, 0.0);
            assert_eq!(a.id, 100 + p);
            assert!(!a.fallback);
            assert_eq!(c.nns_candidate_evals, a.candidates as u64);
        }
    }

    #[test]
    fn far_query_falls_back_to_scan() {
        let rows = vec![0.0, 0.0, 1.0, 1.0];
        let params = LshParams::new(1e-3, 2.0, 2, 0.05).unwrap();
        let idx = L2LshIndex::from_rows(vec![0, 1], rows, 2, params, 1).unwrap();
        let mut c = OpCounter::new();
        let a = idx.query(&[50.0, 50.0], &mut c).unwrap();
        assert!(a.fallback);
        assert_eq!(a.id, 1);
        assert_eq!(c.nns_candidate_evals, 2);
    }

    #[test]
    fn build_is_deterministic() {
        let rows: Vec<f64> = (0..60).map(|i| (i as f64).sin()).collect();
        let params = LshParams::new(0.5, 1.3, 20, 0.05).unwrap();
        let a = L2LshIndex::from_rows((0..20).collect(), rows.clone(), 3, params, 4).unwrap();
        let b = L2LshIndex::from_rows((0..20).collect(), rows, 3, params, 4).unwrap();
        assert_eq!(a.keys, b.keys);
    }
}
