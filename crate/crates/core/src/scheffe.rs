//! The Scheffe test between two known distributions, with exact operation
//! accounting.
//!
//! For hypotheses `v_i`, `v_j` the Scheffe set is `S = {c : v_i(c) > v_j(c)}`.
//! Given samples from an unknown `p`, the test computes the fraction `mu_S`
//! of samples landing in `S` and keeps `v_i` when `|v_i(S) - mu_S| <=
//! |v_j(S) - mu_S|`. Each membership check of one sample against one pair's
//! set is one Scheffe operation.

use std::ops::AddAssign;

use crate::dist::DistributionSet;
use crate::{Error, Result};

/// Running cost counters. Both fields only ever grow.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpCounter {
    pub scheffe_ops: u64,
    pub nns_candidate_evals: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_scheffe(&mut self, ops: u64) {
        self.scheffe_ops += ops;
    }

    pub fn add_candidates(&mut self, evals: u64) {
        self.nns_candidate_evals += evals;
    }

    /// Folds a per-worker counter into this one.
    pub fn merge(&mut self, other: &OpCounter) {
        *self += *other;
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: Self) {
        self.scheffe_ops += rhs.scheffe_ops;
        self.nns_candidate_evals += rhs.nns_candidate_evals;
    }
}

/// A precomputed Scheffe set and its masses under both hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheffePair {
    pub i: usize,
    pub j: usize,
    scheffe_set: Vec<usize>,
    in_set: Vec<bool>,
    pub mass_i: f64,
    pub mass_j: f64,
}

impl ScheffePair {
    /// `S = {c : v_i(c) > v_j(c)}`; coordinates where the two agree are
    /// excluded.
    pub fn build(vs: &DistributionSet, i: usize, j: usize) -> Result<Self> {
        vs.check_index(i)?;
        vs.check_index(j)?;
        if i == j {
            return Err(Error::InvalidParameter(format!(
                "a Scheffe pair needs two distinct hypotheses, got ({i}, {j})"
            )));
        }
        let (a, b) = (vs[i].probs(), vs[j].probs());
        let in_set: Vec<bool> = a.iter().zip(b).map(|(x, y)| x > y).collect();
        let scheffe_set = (0..a.len()).filter(|&c| in_set[c]).collect();
        let (mass_i, mass_j) = scheffe_masses(a, b);
        Ok(Self {
            i,
            j,
            scheffe_set,
            in_set,
            mass_i,
            mass_j,
        })
    }

    pub fn scheffe_set(&self) -> &[usize] {
        &self.scheffe_set
    }

    pub fn contains(&self, c: usize) -> bool {
        self.in_set.get(c).copied().unwrap_or(false)
    }
}

/// `(v_i(S), v_j(S))` for `S = {c : a(c) > b(c)}`.
///
/// Eight interleaved accumulators over coordinate blocks; every caller goes
/// through this one routine so that masses agree bit for bit.
pub(crate) fn scheffe_masses(a: &[f64], b: &[f64]) -> (f64, f64) {
    const LANES: usize = 8;
    let mut sa = [0.0f64; LANES];
    let mut sb = [0.0f64; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (xa, xb) in ca.zip(cb) {
        for l in 0..LANES {
            let m = if xa[l] > xb[l] { 1.0 } else { 0.0 };
            sa[l] += m * xa[l];
            sb[l] += m * xb[l];
        }
    }
    for (l, (x, y)) in ra.iter().zip(rb).enumerate() {
        if x > y {
            sa[l] += x;
            sb[l] += y;
        }
    }
    (sa.iter().sum(), sb.iter().sum())
}

/// The decision rule: keep the first hypothesis when it is at least as close
/// to the observed frequency. Zero samples is a tie.
pub(crate) fn first_wins(mass_i: f64, mass_j: f64, hits: usize, m: usize) -> bool {
    if m == 0 {
        return true;
    }
    let mu = hits as f64 / m as f64;
    (mass_i - mu).abs() <= (mass_j - mu).abs()
}

/// Runs the test on `samples` and returns the winning distribution index.
/// Adds exactly `samples.len()` Scheffe operations to `counter`.
pub fn scheffe_test(pair: &ScheffePair, samples: &[usize], counter: &mut OpCounter) -> Result<usize> {
    let n = pair.in_set.len();
    if let Some(&x) = samples.iter().find(|&&x| x >= n) {
        return Err(Error::IndexOutOfRange { index: x, size: n });
    }
    let hits = samples.iter().filter(|&&x| pair.in_set[x]).count();
    counter.add_scheffe(samples.len() as u64);
    Ok(if first_wins(pair.mass_i, pair.mass_j, hits, samples.len()) {
        pair.i
    } else {
        pair.j
    })
}

/// `ceil(10 ln(1/delta) / epsilon^2)`.
pub fn scheffe_sample_size(delta: f64, epsilon: f64) -> Result<usize> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0, 1), got {delta}")));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(ceil_count(10.0 * (1.0 / delta).ln() / (epsilon * epsilon)))
}

/// Rounds a positive sample-size expression up, absorbing float noise just
/// above an integer (e.g. `10 * ln(e) = 10.000000000000002`).
pub(crate) fn ceil_count(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Scheffe-set masses for ordered hypothesis pairs, as consumed by the
/// tournaments. Membership of a sampled element `x` in the pair's set is
/// `v_i(x) > v_j(x)`, answered in O(1) from the distributions themselves.
pub trait PairSource: Sync {
    fn distributions(&self) -> &DistributionSet;

    /// `(v_i(S), v_j(S))` with `S = {c : v_i(c) > v_j(c)}`.
    fn masses(&self, i: usize, j: usize) -> (f64, f64);

    fn in_set(&self, i: usize, j: usize, x: usize) -> bool {
        let vs = self.distributions();
        vs[i][x] > vs[j][x]
    }
}

/// Computes each pair's masses when a test needs them (O(n) per test).
#[derive(Debug, Clone, Copy)]
pub struct OnDemandPairs<'a> {
    vs: &'a DistributionSet,
}

impl<'a> OnDemandPairs<'a> {
    pub fn new(vs: &'a DistributionSet) -> Self {
        Self { vs }
    }
}

impl PairSource for OnDemandPairs<'_> {
    fn distributions(&self) -> &DistributionSet {
        self.vs
    }

    fn masses(&self, i: usize, j: usize) -> (f64, f64) {
        scheffe_masses(self.vs[i].probs(), self.vs[j].probs())
    }
}

/// All ordered pairs' masses, computed up front in `O(k^2 n)` time and
/// stored in `O(k^2)` space.
#[derive(Debug, Clone)]
pub struct PrecomputedPairs<'a> {
    vs: &'a DistributionSet,
    masses: Vec<(f64, f64)>,
}

impl<'a> PrecomputedPairs<'a> {
    pub fn new(vs: &'a DistributionSet) -> Self {
        let k = vs.len();
        let mut masses = vec![(0.0, 0.0); k * k];
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    masses[i * k + j] = scheffe_masses(vs[i].probs(), vs[j].probs());
                }
            }
        }
        Self { vs, masses }
    }
}

impl PairSource for PrecomputedPairs<'_> {
    fn distributions(&self) -> &DistributionSet {
        self.vs
    }

    fn masses(&self, i: usize, j: usize) -> (f64, f64) {
        self.masses[i * self.vs.len() + j]
    }
}

/// Scheffe test between `i` and `j` through a [`PairSource`].
pub fn pair_test<P: PairSource + ?Sized>(
    src: &P,
    i: usize,
    j: usize,
    samples: &[usize],
    counter: &mut OpCounter,
) -> usize {
    let hits = samples.iter().filter(|&&x| src.in_set(i, j, x)).count();
    counter.add_scheffe(samples.len() as u64);
    let (mi, mj) = src.masses(i, j);
    if first_wins(mi, mj, hits, samples.len()) {
        i
    } else {
        j
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DiscreteDistribution;
    use approx::assert_abs_diff_eq;

    fn set(rows: &[&[f64]]) -> DistributionSet {
        DistributionSet::new(
            rows.iter()
                .map(|r| DiscreteDistribution::new(r.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn build_pair_example() {
        let vs = set(&[&[0.7, 0.2, 0.1], &[0.1, 0.2, 0.7]]);
        let pair = ScheffePair::build(&vs, 0, 1).unwrap();
        assert_eq!(pair.scheffe_set(), &[0]);
        assert_abs_diff_eq!(pair.mass_i, 0.7);
        assert_abs_diff_eq!(pair.mass_j, 0.1);
    }

    #[test]
    fn equal_hypotheses_have_empty_set() {
        let vs = set(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let pair = ScheffePair::build(&vs, 0, 1).unwrap();
        assert!(pair.scheffe_set().is_empty());
        assert_eq!((pair.mass_i, pair.mass_j), (0.0, 0.0));
        let mut c = OpCounter::new();
        assert_eq!(scheffe_test(&pair, &[0, 1, 1], &mut c).unwrap(), 0);
    }

    #[test]
    fn bad_indices_rejected() {
        let vs = set(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert!(ScheffePair::build(&vs, 0, 0).is_err());
        assert!(ScheffePair::build(&vs, 0, 2).is_err());
    }

    #[test]
    fn hand_evaluated_test() {
        let vs = set(&[&[0.7, 0.2, 0.1], &[0.1, 0.2, 0.7]]);
        let pair = ScheffePair::build(&vs, 0, 1).unwrap();
        let mut c = OpCounter::new();
        // elements 1,1,3,1,2 in 1-based terms: mu_S = 3/5
        let winner = scheffe_test(&pair, &[0, 0, 2, 0, 1], &mut c).unwrap();
        assert_eq!(winner, 0);
        assert_eq!(c.scheffe_ops, 5);
        // mostly element 3: mu_S = 1/5, closer to mass_j = 0.1
        assert_eq!(scheffe_test(&pair, &[2, 2, 2, 0, 2], &mut c).unwrap(), 1);
        assert_eq!(c.scheffe_ops, 10);
    }

    #[test]
    fn empty_sample_is_a_tie() {
        let vs = set(&[&[0.7, 0.3], &[0.1, 0.9]]);
        let pair = ScheffePair::build(&vs, 1, 0).unwrap();
        let mut c = OpCounter::new();
        assert_eq!(scheffe_test(&pair, &[], &mut c).unwrap(), 1);
        assert_eq!(c.scheffe_ops, 0);
        assert!(scheffe_test(&pair, &[5], &mut c).is_err());
    }

    #[test]
    fn sample_size_examples() {
        assert_eq!(scheffe_sample_size(0.25 / 16.0, 0.5).unwrap(), 167);
        assert_eq!(scheffe_sample_size(1.0 / std::f64::consts::E, 1.0).unwrap(), 10);
        assert!(scheffe_sample_size(0.0, 1.0).is_err());
        assert!(scheffe_sample_size(1.0, 1.0).is_err());
        assert!(scheffe_sample_size(0.5, 0.0).is_err());
        assert!(scheffe_sample_size(0.1, 0.2).unwrap() >= scheffe_sample_size(0.2, 0.2).unwrap());
        assert!(scheffe_sample_size(0.1, 0.2).unwrap() >= scheffe_sample_size(0.1, 0.3).unwrap());
    }

    #[test]
    fn pair_sources_agree_with_scheffe_pair() {
        let vs = set(&[
            &[0.1, 0.2, 0.3, 0.05, 0.05, 0.1, 0.1, 0.05, 0.05],
            &[0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.05, 0.1, 0.05],
            &[0.05, 0.05, 0.1, 0.3, 0.1, 0.1, 0.1, 0.1, 0.1],
        ]);
        let pre = PrecomputedPairs::new(&vs);
        let lazy = OnDemandPairs::new(&vs);
        let samples = [0, 3, 3, 8, 2, 6, 6, 1];
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let pair = ScheffePair::build(&vs, i, j).unwrap();
                assert_eq!(pre.masses(i, j), (pair.mass_i, pair.mass_j));
                assert_eq!(lazy.masses(i, j), (pair.mass_i, pair.mass_j));
                let (mut a, mut b) = (OpCounter::new(), OpCounter::new());
                assert_eq!(
                    scheffe_test(&pair, &samples, &mut a).unwrap(),
                    pair_test(&pre, i, j, &samples, &mut b)
                );
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn counters_merge() {
        let mut a = OpCounter { scheffe_ops: 3, nns_candidate_evals: 1 };
        a.merge(&OpCounter { scheffe_ops: 2, nns_candidate_evals: 5 });
        assert_eq!(a, OpCounter { scheffe_ops: 5, nns_candidate_evals: 6 });
    }
}
