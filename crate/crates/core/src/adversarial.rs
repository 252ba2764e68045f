//! Instances on which nearest-neighbor search over the empirical
//! distribution picks the wrong hypothesis.
//!
//! * Light instance: `p` uniform over `[n]`, each `q` uniform over a random
//!   half of the domain. With `s = n/2` samples the empirical distribution is
//!   usually closer in ℓ1 to some `q` than to `p`, although `||p - q||_1 = 1`.
//! * Heavy instance: `p` and `q` share a heavy first coordinate, and a
//!   slightly larger `q(0)` wins in ℓ2 whenever the heavy count runs high.

use std::collections::HashSet;

use rayon::prelude::*;

use crate::dist::{l1, l2_squared, linf, random_subset, split_halves, CategoricalSampler, DiscreteDistribution, DistributionSet, SampleCounts};
use crate::rng::{derive_seed, rng_for};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    L1,
    L2,
    Linf,
}

impl Metric {
    fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::L1 => l1(a, b),
            Metric::L2 => l2_squared(a, b),
            Metric::Linf => linf(a, b),
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" | "l1_empirical" => Ok(Metric::L1),
            "l2" | "l2_empirical" => Ok(Metric::L2),
            "linf" | "linf_empirical" => Ok(Metric::Linf),
            _ => Err(Error::InvalidParameter(format!("unknown metric `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Exactly `s` draws; `p_hat = counts / s`.
    Fixed,
    /// `Pois(s)` draws; `p_hat = counts / s`.
    Poissonized,
}

/// `ln C(n, m)`.
fn ln_binomial(n: usize, m: usize) -> f64 {
    let m = m.min(n - m);
    (0..m).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Uniform `p` and `k` distinct distributions `2/n` on random `n/2`-subsets.
pub fn light_adversarial(n: usize, k: usize, seed: u64) -> Result<(DiscreteDistribution, DistributionSet)> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n must be even and at least 2, got {n}")));
    }
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    if (k as f64).ln() > ln_binomial(n, n / 2) + 1e-9 {
        return Err(Error::InvalidParameter(format!("k = {k} exceeds C({n}, {})", n / 2)));
    }
    let mut rng = rng_for(seed, 0);
    let mut seen = HashSet::with_capacity(k);
    let mut qs = Vec::with_capacity(k);
    while qs.len() < k {
        let subset = random_subset(n, n / 2, &mut rng);
        if !seen.insert(subset.clone()) {
            continue;
        }
        let mut q = vec![0.0; n];
        for i in subset {
            q[i] = 2.0 / n as f64;
        }
        qs.push(DiscreteDistribution::new(q)?);
    }
    Ok((DiscreteDistribution::uniform(n)?, DistributionSet::new(qs)?))
}

/// The pair `(p, q)` for odd `n = 2 n0 + 1`:
/// `p = (1/2, 1/(2n0) x n0, 0 x n0)` and
/// `q = (1/2 + 1/sqrt s, 0 x n0, (1/2 - 1/sqrt s)/n0 x n0)`.
pub fn heavy_adversarial(n: usize, s: usize) -> Result<(DiscreteDistribution, DiscreteDistribution)> {
    if n < 3 || n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("n must be odd and at least 3, got {n}")));
    }
    if s < 4 {
        return Err(Error::InvalidParameter(format!("s must be at least 4, got {s}")));
    }
    let n0 = (n - 1) / 2;
    let bump = 1.0 / (s as f64).sqrt();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    p[0] = 0.5;
    q[0] = 0.5 + bump;
    for i in 1..=n0 {
        p[i] = 0.5 / n0 as f64;
        q[n0 + i] = (0.5 - bump) / n0 as f64;
    }
    Ok((DiscreteDistribution::new(p)?, DiscreteDistribution::new(q)?))
}

/// Empirical distribution from `s` samples of `p`.
pub fn empirical(p: &DiscreteDistribution, s: usize, sampling: Sampling, seed: u64) -> Result<Vec<f64>> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    let counts = match sampling {
        Sampling::Fixed => {
            let mut rng = rng_for(seed, 0);
            let draws = CategoricalSampler::new(p).draws(s, &mut rng);
            SampleCounts::from_draws(&draws, p.len(), s as f64)?
        }
        Sampling::Poissonized => {
            let (a, b) = split_halves(p, s as u64, seed)?;
            let merged = a.counts().iter().zip(b.counts()).map(|(x, y)| x + y).collect();
            SampleCounts::new(merged, s as f64)?
        }
    };
    Ok(counts.empirical())
}

/// Fraction of trials in which exact nearest-neighbor search under `metric`
/// on the empirical distribution keeps `p`, i.e.
/// `dist(p_hat, p) <= min_q dist(p_hat, q)`.
pub fn naive_success_rate(
    p: &DiscreteDistribution,
    others: &DistributionSet,
    metric: Metric,
    s: usize,
    sampling: Sampling,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if others.domain_size() != p.len() {
        return Err(Error::DimensionMismatch {
            left: p.len(),
            right: others.domain_size(),
        });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let wins = (0..trials)
        .into_par_iter()
        .map(|t| {
            let phat = empirical(p, s, sampling, derive_seed(seed, &[t as u64]))?;
            let own = metric.eval(&phat, p.probs());
            Ok(others.iter().all(|q| own <= metric.eval(&phat, q.probs())))
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&w| w)
        .count();
    Ok(wins as f64 / trials as f64)
}

/// `1 - naive_success_rate(..)`.
pub fn naive_failure_rate(
    p: &DiscreteDistribution,
    others: &DistributionSet,
    metric: Metric,
    s: usize,
    sampling: Sampling,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    naive_success_rate(p, others, metric, s, sampling, trials, seed).map(|r| 1.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::l1_distance;
    use approx::assert_abs_diff_eq;

    #[test]
    fn light_instance_shape() {
        let (p, qs) = light_adversarial(10, 20, 4).unwrap();
        assert_eq!(p.probs(), &[0.1; 10]);
        let mut supports = HashSet::new();
        for q in &qs {
            assert_abs_diff_eq!(l1_distance(&p, q).unwrap(), 1.0, epsilon = 1e-12);
            assert_eq!(q.support().len(), 5);
            assert!(supports.insert(q.support()));
        }
        assert!(light_adversarial(4, 7, 0).is_err());
        assert!(light_adversarial(4, 6, 0).is_ok());
        assert!(light_adversarial(5, 1, 0).is_err());
    }

    #[test]
    fn heavy_instance_values() {
        let (p, q) = heavy_adversarial(201, 100).unwrap();
        assert_abs_diff_eq!(q[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(q[200], 0.004, epsilon = 1e-15);
        assert_eq!(q[1], 0.0);
        assert_abs_diff_eq!(p[100], 0.005, epsilon = 1e-15);
        assert_eq!(p[101], 0.0);
        assert_abs_diff_eq!(l1_distance(&p, &q).unwrap(), 1.0, epsilon = 1e-12);
        assert!(heavy_adversarial(200, 100).is_err());
        assert!(heavy_adversarial(201, 3).is_err());
    }

    #[test]
    fn rates_are_reproducible() {
        let (p, q) = heavy_adversarial(21, 16).unwrap();
        let qs = DistributionSet::new(vec![q]).unwrap();
        let a = naive_failure_rate(&p, &qs, Metric::L2, 16, Sampling::Fixed, 200, 3).unwrap();
        let b = naive_failure_rate(&p, &qs, Metric::L2, 16, Sampling::Fixed, 200, 3).unwrap();
        assert_eq!(a, b);
    }
}
