//! Sublinear-time hypothesis selection in the proper case.
//!
//! Preprocessing groups every distribution `v_j` with all distributions
//! within an ℓ∞ radius of it, splits the domain into heavy and light
//! coordinates by thresholding `v_j` at `gamma`, and indexes the group's
//! light restrictions for ℓ2 search. A query estimates `p` from half of a
//! Poissonized sample, finds an ℓ∞ neighbor `v_inf`, and searches the group
//! of `v_inf` on the light coordinates of an estimate built from the other
//! half.

mod persist;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::dist::{linf, split_halves, DiscreteDistribution, DistributionSet, RestrictedVector, SampleCounts};
use crate::nns::{L2LshIndex, LinfBackend, LinfIndex, LshParams, DEFAULT_FAILURE};
use crate::rng::derive_seed;
use crate::scheffe::OpCounter;
use crate::{Error, Result};

pub use persist::{load_index, save_index, INDEX_MAGIC, INDEX_VERSION};

#[derive(Debug, Clone, PartialEq)]
pub struct SublinearConfig {
    pub epsilon: f64,
    /// Heavy/light threshold on the group leader.
    pub gamma: f64,
    /// Poisson parameter of the whole query sample.
    pub s: usize,
    /// Constant in front of the group radius.
    pub radius_const: f64,
    /// Approximation allowed to the ℓ∞ stage.
    pub c_inf: f64,
    pub linf_backend: LinfBackend,
    /// Per-query miss probability the ℓ2 tables are sized for.
    pub lsh_failure: f64,
    pub seed: u64,
}

impl SublinearConfig {
    /// `gamma = n^(-5/12)`, `s = ceil(n / (eps^2 (ln k)^(1/4)))`,
    /// `radius_const = 4`, `c_inf = max(4 ln n max(ln ln n, 1), 2)`.
    pub fn defaults(n: usize, k: usize, epsilon: f64) -> Result<Self> {
        if n == 0 || k == 0 {
            return Err(Error::EmptyDataset);
        }
        let nf = n as f64;
        let ln_k = (k as f64).ln().max(1.0);
        let s = (nf / (epsilon * epsilon * ln_k.powf(0.25))).ceil() as usize;
        let cfg = Self {
            epsilon,
            gamma: nf.powf(-5.0 / 12.0),
            s: s.max(2),
            radius_const: 4.0,
            c_inf: (4.0 * nf.ln() * log_log(nf)).max(2.0),
            linf_backend: LinfBackend::ExactScan,
            lsh_failure: DEFAULT_FAILURE,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if self.s < 2 {
            return bad(format!("s must be at least 2, got {}", self.s));
        }
        if !(self.radius_const > 0.0) || !self.radius_const.is_finite() {
            return bad(format!("radius constant must be positive, got {}", self.radius_const));
        }
        if !(self.c_inf >= 1.0) {
            return bad(format!("c_inf must be at least 1, got {}", self.c_inf));
        }
        if !(self.lsh_failure > 0.0 && self.lsh_failure < 1.0) {
            return bad(format!("LSH failure probability must be in (0, 1), got {}", self.lsh_failure));
        }
        Ok(())
    }

    /// `radius_const (ln n)^2 max(ln ln n, 1) / sqrt(n)`.
    pub fn radius(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.radius_const * nf.ln().powi(2) * log_log(nf) / nf.sqrt()
    }

    /// `1 + s eps^2 / (32 n)`.
    pub fn l2_approximation(&self, n: usize) -> f64 {
        1.0 + self.s as f64 * self.epsilon * self.epsilon / (32.0 * n as f64)
    }
}

fn log_log(n: f64) -> f64 {
    if n <= 1.0 {
        1.0
    } else {
        n.ln().ln().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavyLightPartition {
    pub heavy: Vec<usize>,
    pub light: Vec<usize>,
    pub gamma: f64,
}

/// Coordinates where `q1` has mass at least `gamma` are heavy, the rest light.
pub fn heavy_light(q1: &DiscreteDistribution, gamma: f64) -> Result<HeavyLightPartition> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidParameter(format!("gamma must be in (0, 1), got {gamma}")));
    }
    let (heavy, light) = (0..q1.len()).partition(|&i| q1[i] >= gamma);
    Ok(HeavyLightPartition { heavy, light, gamma })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub leader: usize,
    /// Sorted; contains the leader.
    pub members: Vec<usize>,
    pub partition: HeavyLightPartition,
    /// Distance scale the ℓ2 index is tuned for.
    pub l2_radius: f64,
    /// Slot in the shared ℓ2 index list; `None` when the group is a
    /// singleton or has no light coordinates.
    pub l2_slot: Option<usize>,
}

/// Summary of a preprocessing run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildStats {
    pub groups: usize,
    pub singleton_groups: usize,
    pub l2_indexes: usize,
    pub mean_group_size: usize,
}

#[derive(Debug, Clone)]
pub struct PreprocessedIndex {
    vs: DistributionSet,
    cfg: SublinearConfig,
    radius: f64,
    linf: LinfIndex,
    groups: Vec<Group>,
    l2: Vec<L2LshIndex>,
}

/// Outcome of one [`PreprocessedIndex::select`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryReport {
    pub answer: usize,
    /// The ℓ∞ neighbor whose group was searched.
    pub linf_answer: usize,
    pub group_size: usize,
    pub light_size: usize,
    pub linf_evals: u64,
    pub l2_evals: u64,
    /// The ℓ2 stage found no candidate and scanned the whole group.
    pub fallback: bool,
    /// The group was returned without an ℓ2 query.
    pub direct: bool,
}

impl PreprocessedIndex {
    pub fn build(vs: DistributionSet, cfg: SublinearConfig) -> Result<Self> {
        cfg.validate()?;
        let radius = cfg.radius(vs.domain_size());
        let linf_index = LinfIndex::build(&vs, cfg.linf_backend, derive_seed(cfg.seed, &[0]))?;
        let groups: Vec<(Vec<usize>, HeavyLightPartition)> = (0..vs.len())
            .into_par_iter()
            .map(|j| {
                let lead = vs[j].probs();
                let members = (0..vs.len()).filter(|&i| linf(lead, vs[i].probs()) <= radius).collect();
                heavy_light(&vs[j], cfg.gamma).map(|p| (members, p))
            })
            .collect::<Result<_>>()?;
        Self::assemble(vs, cfg, linf_index, groups)
    }

    /// Builds the ℓ2 indexes for precomputed groups, sharing one index among
    /// groups with identical members, light sets and radii.
    fn assemble(
        vs: DistributionSet,
        cfg: SublinearConfig,
        linf: LinfIndex,
        raw: Vec<(Vec<usize>, HeavyLightPartition)>,
    ) -> Result<Self> {
        let n = vs.domain_size();
        let radius = cfg.radius(n);
        let half_s = cfg.s as f64 / 2.0;
        let c = cfg.l2_approximation(n);
        let mut slots: HashMap<(Vec<usize>, Vec<usize>, u64), usize> = HashMap::new();
        let mut jobs: Vec<usize> = Vec::new();
        let mut groups = Vec::with_capacity(raw.len());
        for (leader, (members, partition)) in raw.into_iter().enumerate() {
            if !members.contains(&leader) {
                return Err(Error::Format(format!("group {leader} does not contain its leader")));
            }
            let light_mass: f64 = partition.light.iter().map(|&i| vs[leader][i]).sum();
            // Expected ℓ2 noise of an estimate from s/2 samples, plus the
            // proper-case slack eps / (2 sqrt n).
            let l2_radius = (light_mass / half_s).sqrt() + cfg.epsilon / (2.0 * (n as f64).sqrt());
            let l2_slot = if members.len() < 2 || partition.light.is_empty() {
                None
            } else {
                let key = (members.clone(), partition.light.clone(), l2_radius.to_bits());
                let next = slots.len();
                let slot = *slots.entry(key).or_insert(next);
                if slot == next {
                    jobs.push(leader);
                }
                Some(slot)
            };
            groups.push(Group {
                leader,
                members,
                partition,
                l2_radius,
                l2_slot,
            });
        }
        let l2 = jobs
            .par_iter()
            .map(|&j| {
                let g = &groups[j];
                let light = &g.partition.light;
                let mut rows = Vec::with_capacity(g.members.len() * light.len());
                for &m in &g.members {
                    rows.extend(light.iter().map(|&i| vs[m][i]));
                }
                let params = LshParams::new(g.l2_radius, c, g.members.len(), cfg.lsh_failure)?;
                L2LshIndex::from_rows(g.members.clone(), rows, light.len(), params, derive_seed(cfg.seed, &[1, j as u64]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vs,
            cfg,
            radius,
            linf,
            groups,
            l2,
        })
    }

    pub fn dataset(&self) -> &DistributionSet {
        &self.vs
    }

    pub fn config(&self) -> &SublinearConfig {
        &self.cfg
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn group(&self, leader: usize) -> Option<&Group> {
        self.groups.get(leader)
    }

    pub fn l2_index(&self, slot: usize) -> Option<&L2LshIndex> {
        self.l2.get(slot)
    }

    pub fn stats(&self) -> BuildStats {
        let total: usize = self.groups.iter().map(|g| g.members.len()).sum();
        BuildStats {
            groups: self.groups.len(),
            singleton_groups: self.groups.iter().filter(|g| g.members.len() == 1).count(),
            l2_indexes: self.l2.len(),
            mean_group_size: total / self.groups.len().max(1),
        }
    }

    /// Runs the two-stage selection on a pair of independent sample halves.
    pub fn select(&self, first: &SampleCounts, second: &SampleCounts, counter: &mut OpCounter) -> Result<QueryReport> {
        let n = self.vs.domain_size();
        for half in [first, second] {
            if half.len() != n {
                return Err(Error::DimensionMismatch { left: half.len(), right: n });
            }
        }
        let mut c_inf = OpCounter::new();
        let linf_answer = self.linf.query(&self.vs, &first.empirical(), &mut c_inf)?;
        let group = &self.groups[linf_answer];
        let mut report = QueryReport {
            answer: group.leader,
            linf_answer,
            group_size: group.members.len(),
            light_size: group.partition.light.len(),
            linf_evals: c_inf.nns_candidate_evals,
            l2_evals: 0,
            fallback: false,
            direct: true,
        };
        *counter += c_inf;
        let Some(slot) = group.l2_slot else {
            return Ok(report);
        };
        let scale = second.nominal_s();
        let q: Vec<f64> = group
            .partition
            .light
            .iter()
            .map(|&i| second.counts()[i] as f64 / scale)
            .collect();
        let mut c_l2 = OpCounter::new();
        let ans = self.l2[slot].query(&q, &mut c_l2)?;
        *counter += c_l2;
        report.answer = ans.id;
        report.l2_evals = c_l2.nns_candidate_evals;
        report.fallback = ans.fallback;
        report.direct = false;
        Ok(report)
    }

    /// Draws `Pois(s)` samples from `p`, split into two halves, and selects.
    pub fn select_from(&self, p: &DiscreteDistribution, seed: u64, counter: &mut OpCounter) -> Result<QueryReport> {
        self.select_with_samples(p, self.cfg.s as u64, seed, counter)
    }

    /// As [`select_from`](Self::select_from) with Poisson parameter `s`
    /// instead of the configured one.
    pub fn select_with_samples(
        &self,
        p: &DiscreteDistribution,
        s: u64,
        seed: u64,
        counter: &mut OpCounter,
    ) -> Result<QueryReport> {
        let (a, b) = split_halves(p, s, seed)?;
        self.select(&a, &b, counter)
    }
}

/// `sum_{i in L} (counts(i) - s v_L(i))^2`, where `L` is the support of `v_l`.
pub fn light_statistic(counts: &SampleCounts, v_l: &RestrictedVector, s: f64) -> Result<f64> {
    if counts.len() != v_l.len() {
        return Err(Error::DimensionMismatch {
            left: counts.len(),
            right: v_l.len(),
        });
    }
    let v = v_l.values();
    Ok(v_l
        .support()
        .iter()
        .map(|&i| {
            let d = counts.counts()[i] as f64 - s * v[i];
            d * d
        })
        .sum())
}

/// Exact moments of the light statistic for independent
/// `counts(i) ~ Pois(s p(i))`, and the variance bound they are checked
/// against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightMoments {
    /// `s T + s^2 ||p_L - v_L||^2` with `T = sum_L p`.
    pub mean: f64,
    pub variance: f64,
    /// `4 s^3 ||p_L|| ||p_L - v_L||^2 + 6 s^2 ||p_L||^2 + s T`.
    pub variance_bound: f64,
}

pub fn light_moments(p: &[f64], v: &[f64], light: &[usize], s: f64) -> Result<LightMoments> {
    if p.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: v.len(),
        });
    }
    let (mut t, mut diff2, mut p2, mut var) = (0.0, 0.0, 0.0, 0.0);
    for &i in light {
        let (pi, vi) = (p[i], v[i]);
        let lam = s * pi;
        let d = lam - s * vi;
        t += pi;
        diff2 += (pi - vi) * (pi - vi);
        p2 += pi * pi;
        // Var[(X - a)^2] for X ~ Pois(lam), a = s v_i, written with
        // d = lam - a and the Poisson central moments lam, lam, 3lam^2 + lam.
        var += 4.0 * d * d * lam + 4.0 * d * lam + 2.0 * lam * lam + lam;
    }
    Ok(LightMoments {
        mean: s * t + s * s * diff2,
        variance: var,
        variance_bound: 4.0 * s.powi(3) * p2.sqrt() * diff2 + 6.0 * s * s * p2 + s * t,
    })
}

/// Per-coordinate variance bound
/// `4 s p(i) (s p(i) - s v(i))^2 + 6 (s p(i))^2 + s p(i)`.
pub fn coordinate_variance_bound(p_i: f64, v_i: f64, s: f64) -> f64 {
    let lam = s * p_i;
    let d = lam - s * v_i;
    4.0 * lam * d * d + 6.0 * lam * lam + lam
}
