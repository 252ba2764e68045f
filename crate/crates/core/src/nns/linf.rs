use rand::seq::index::sample;

use super::argmin_by;
use crate::dist::{linf, DistributionSet};
use crate::rng::rng_for;
use crate::scheffe::OpCounter;
use crate::{Error, Result};

/// How many best-scoring candidates each coordinate-sampling repetition
/// forwards to the exact re-check.
const SHORTLIST: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinfBackend {
    /// Exact ℓ∞ distance to every dataset member.
    ExactScan,
    /// Estimate ℓ∞ on `m` coordinates sampled without replacement, `reps`
    /// times, then re-check the shortlisted candidates exactly.
    CoordinateSample { m: usize, reps: usize },
}

impl LinfBackend {
    /// `m = ceil(4 sqrt(n) ln k)`, three repetitions.
    pub fn coordinate_sample_default(n: usize, k: usize) -> Self {
        let m = (4.0 * (n as f64).sqrt() * (k.max(2) as f64).ln()).ceil() as usize;
        LinfBackend::CoordinateSample { m: m.max(1), reps: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct LinfIndex {
    backend: LinfBackend,
    seed: u64,
    approx_c: f64,
}

impl LinfIndex {
    pub fn build(vs: &DistributionSet, backend: LinfBackend, seed: u64) -> Result<Self> {
        if vs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let approx_c = match backend {
            LinfBackend::ExactScan => 1.0,
            LinfBackend::CoordinateSample { m, reps } => {
                if m == 0 || reps == 0 {
                    return Err(Error::InvalidParameter(
                        "coordinate sampling needs m >= 1 and reps >= 1".into(),
                    ));
                }
                3.0
            }
        };
        Ok(Self {
            backend,
            seed,
            approx_c,
        })
    }

    pub fn backend(&self) -> LinfBackend {
        self.backend
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Nominal approximation factor (1 for the exact scan).
    pub fn approx_c(&self) -> f64 {
        self.approx_c
    }

    /// `vs` must be the dataset the index was built on.
    pub fn query(&self, vs: &DistributionSet, q: &[f64], counter: &mut OpCounter) -> Result<usize> {
        if q.len() != vs.domain_size() {
            return Err(Error::DimensionMismatch {
                left: q.len(),
                right: vs.domain_size(),
            });
        }
        match self.backend {
            LinfBackend::ExactScan => {
                counter.add_candidates(vs.len() as u64);
                Ok(exact_argmin(vs, q, 0..vs.len()).0)
            }
            LinfBackend::CoordinateSample { m, reps } => Ok(self.sampled(vs, q, m, reps, counter)),
        }
    }

    fn sampled(&self, vs: &DistributionSet, q: &[f64], m: usize, reps: usize, counter: &mut OpCounter) -> usize {
        let n = vs.domain_size();
        let m = m.min(n);
        if m == n {
            counter.add_candidates(vs.len() as u64);
            return exact_argmin(vs, q, 0..vs.len()).0;
        }
        // Coordinates are fixed per index so repeated queries are comparable.
        let mut rng = rng_for(self.seed, 0);
        let mut shortlist: Vec<usize> = Vec::with_capacity(reps * SHORTLIST);
        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(vs.len());
        for _ in 0..reps {
            let coords = sample(&mut rng, n, m).into_vec();
            scored.clear();
            for (i, v) in vs.iter().enumerate() {
                let v = v.probs();
                let d = coords.iter().fold(0.0f64, |acc, &c| acc.max((v[c] - q[c]).abs()));
                scored.push((d, i));
            }
            counter.add_candidates(vs.len() as u64);
            let take = SHORTLIST.min(scored.len());
            scored.select_nth_unstable_by(take - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            shortlist.extend(scored[..take].iter().map(|&(_, i)| i));
        }
        shortlist.sort_unstable();
        shortlist.dedup();
        counter.add_candidates(shortlist.len() as u64);
        exact_argmin(vs, q, shortlist).0
    }
}

fn exact_argmin(vs: &DistributionSet, q: &[f64], ids: impl IntoIterator<Item = usize>) -> (usize, f64) {
    argmin_by(ids, |i| linf(vs[i].probs(), q)).expect("non-empty candidate list")
}
