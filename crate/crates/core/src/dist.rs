//! Discrete distributions over a finite domain `[n]`, sample counts, the
//! three distances used throughout the crate, and Poissonized sampling.
//!
//! Coordinates are 0-based: the domain `[n]` is `0..n`.

use std::ops::Index;

use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Poisson};

use crate::rng::{rng_for, Rng};
use crate::{Error, Result};

/// Absolute tolerance on `sum(probs) == 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A dense probability vector over `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates and wraps a probability vector. Inputs that are not
    /// normalized within [`NORMALIZATION_TOLERANCE`] are rejected, never
    /// silently renormalized.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, expected a finite non-negative value"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidDistribution("weights sum to zero".into()));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty domain".into()));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Domain size `n`.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    /// Total probability of `set`.
    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.probs[i]).sum()
    }

    /// Coordinates with positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.probs[i] > 0.0).collect()
    }
}

impl AsRef<[f64]> for DiscreteDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

impl Index<usize> for DiscreteDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// A vector `x_A`: equal to `x` on `A` and zero elsewhere. Unlike
/// [`DiscreteDistribution`] it carries no normalization invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedVector {
    values: Vec<f64>,
    support: Vec<usize>,
}

impl RestrictedVector {
    /// `support` is sorted and deduplicated; values outside it must be zero.
    pub fn new(values: Vec<f64>, support: Vec<usize>) -> Result<Self> {
        let support = normalize_index_set(support, values.len())?;
        let mut inside = vec![false; values.len()];
        for &i in &support {
            inside[i] = true;
        }
        if let Some(i) = (0..values.len()).find(|&i| !inside[i] && values[i] != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "coordinate {i} is outside the support but nonzero"
            )));
        }
        Ok(Self { values, support })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            support: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sorted index set `A`.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Values on the support, in support order.
    pub fn compact(&self) -> Vec<f64> {
        self.support.iter().map(|&i| self.values[i]).collect()
    }

    /// `l1` mass on the support.
    pub fn l1_norm(&self) -> f64 {
        self.support.iter().map(|&i| self.values[i].abs()).sum()
    }
}

impl AsRef<[f64]> for RestrictedVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Poissonized per-element counts drawn from an unknown distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCounts {
    counts: Vec<u64>,
    total: u64,
    nominal_s: f64,
}

impl SampleCounts {
    pub fn new(counts: Vec<u64>, nominal_s: f64) -> Result<Self> {
        if !(nominal_s > 0.0 && nominal_s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "nominal sample size must be positive, got {nominal_s}"
            )));
        }
        let total = counts.iter().sum();
        Ok(Self {
            counts,
            total,
            nominal_s,
        })
    }

    /// Tallies a list of sampled elements over a domain of size `n`.
    pub fn from_draws(draws: &[usize], n: usize, nominal_s: f64) -> Result<Self> {
        let mut counts = vec![0u64; n];
        for &x in draws {
            *counts.get_mut(x).ok_or(Error::IndexOutOfRange { index: x, size: n })? += 1;
        }
        Self::new(counts, nominal_s)
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Number of samples actually drawn, `s'`.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// The Poisson parameter `s`.
    pub fn nominal_s(&self) -> f64 {
        self.nominal_s
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `p_hat(i) = counts(i) / s`.
    pub fn empirical(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.nominal_s)
            .collect()
    }
}

/// `k >= 1` distributions sharing one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSet {
    dists: Vec<DiscreteDistribution>,
    ids: Option<Vec<String>>,
}

impl DistributionSet {
    pub fn new(dists: Vec<DiscreteDistribution>) -> Result<Self> {
        let first = dists.first().ok_or(Error::EmptyDataset)?;
        let n = first.len();
        if let Some(d) = dists.iter().find(|d| d.len() != n) {
            return Err(Error::DimensionMismatch {
                left: n,
                right: d.len(),
            });
        }
        Ok(Self { dists, ids: None })
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.dists.len() {
            return Err(Error::DimensionMismatch {
                left: self.dists.len(),
                right: ids.len(),
            });
        }
        self.ids = Some(ids);
        Ok(self)
    }

    /// Number of distributions `k`.
    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    /// Domain size `n`.
    pub fn domain_size(&self) -> usize {
        self.dists[0].len()
    }

    pub fn get(&self, i: usize) -> Option<&DiscreteDistribution> {
        self.dists.get(i)
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DiscreteDistribution> {
        self.dists.iter()
    }

    pub fn as_slice(&self) -> &[DiscreteDistribution] {
        &self.dists
    }

    pub fn into_vec(self) -> Vec<DiscreteDistribution> {
        self.dists
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                size: self.len(),
            })
        }
    }
}

impl Index<usize> for DistributionSet {
    type Output = DiscreteDistribution;

    fn index(&self, i: usize) -> &DiscreteDistribution {
        &self.dists[i]
    }
}

impl<'a> IntoIterator for &'a DistributionSet {
    type Item = &'a DiscreteDistribution;
    type IntoIter = std::slice::Iter<'a, DiscreteDistribution>;

    fn into_iter(self) -> Self::IntoIter {
        self.dists.iter()
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() == b.len() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        })
    }
}

/// `sum_i |a(i) - b(i)|`.
pub fn l1_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsRef<[f64]> + ?Sized,
    B: AsRef<[f64]> + ?Sized,
{
    let (a, b) = (a.as_ref(), b.as_ref());
    check_dims(a, b)?;
    Ok(l1(a, b))
}

pub fn l2_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsRef<[f64]> + ?Sized,
    B: AsRef<[f64]> + ?Sized,
{
    let (a, b) = (a.as_ref(), b.as_ref());
    check_dims(a, b)?;
    Ok(l2_squared(a, b).sqrt())
}

pub fn linf_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsRef<[f64]> + ?Sized,
    B: AsRef<[f64]> + ?Sized,
{
    let (a, b) = (a.as_ref(), b.as_ref());
    check_dims(a, b)?;
    Ok(linf(a, b))
}

/// Total variation distance, `l1 / 2`.
pub fn tv_distance<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: AsRef<[f64]> + ?Sized,
    B: AsRef<[f64]> + ?Sized,
{
    Ok(0.5 * l1_distance(a, b)?)
}

// Unchecked kernels for the hot loops. Callers guarantee equal lengths.

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

pub(crate) fn l2_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn normalize_index_set(mut set: Vec<usize>, n: usize) -> Result<Vec<usize>> {
    set.sort_unstable();
    set.dedup();
    if let Some(&last) = set.last() {
        if last >= n {
            return Err(Error::IndexOutOfRange {
                index: last,
                size: n,
            });
        }
    }
    Ok(set)
}

/// `x_A`: keeps `x` on `set`, zeroes everything else.
pub fn restrict<X: AsRef<[f64]> + ?Sized>(x: &X, set: &[usize]) -> Result<RestrictedVector> {
    let x = x.as_ref();
    let support = normalize_index_set(set.to_vec(), x.len())?;
    let mut values = vec![0.0; x.len()];
    for &i in &support {
        values[i] = x[i];
    }
    Ok(RestrictedVector { values, support })
}

/// Draws i.i.d. elements of `[n]` from a fixed distribution.
#[derive(Debug, Clone)]
pub struct CategoricalSampler {
    alias: WeightedAliasIndex<f64>,
    n: usize,
}

impl CategoricalSampler {
    pub fn new(p: &DiscreteDistribution) -> Self {
        // A validated distribution always has positive total weight.
        let alias = WeightedAliasIndex::new(p.probs().to_vec())
            .expect("validated distribution has positive mass");
        Self { alias, n: p.len() }
    }

    pub fn domain_size(&self) -> usize {
        self.n
    }

    pub fn draw(&self, rng: &mut Rng) -> usize {
        self.alias.sample(rng)
    }

    /// `m` i.i.d. draws, in order.
    pub fn draws(&self, m: usize, rng: &mut Rng) -> Vec<usize> {
        (0..m).map(|_| self.alias.sample(rng)).collect()
    }
}

/// One draw from `Pois(lambda)`; `lambda == 0` gives 0.
pub fn poisson_draw(lambda: f64, rng: &mut Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    let pois = Poisson::new(lambda).expect("positive finite lambda");
    pois.sample(rng) as u64
}

/// Exactly `s` i.i.d. draws from `p` (fixed-size multinomial sampling).
pub fn sample_fixed(p: &DiscreteDistribution, s: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, 0);
    CategoricalSampler::new(p).draws(s, &mut rng)
}

/// Draws `s' ~ Pois(s)` samples from `p` and tallies them. Each
/// `counts(i)` is then distributed as an independent `Pois(s * p(i))`.
pub fn sample_poissonized(p: &DiscreteDistribution, s: u64, seed: u64) -> Result<SampleCounts> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    let mut rng = rng_for(seed, 0);
    let sampler = CategoricalSampler::new(p);
    Ok(poissonized_counts(&sampler, s as f64, &mut rng))
}

pub(crate) fn poissonized_counts(sampler: &CategoricalSampler, s: f64, rng: &mut Rng) -> SampleCounts {
    let total = poisson_draw(s, rng);
    let mut counts = vec![0u64; sampler.domain_size()];
    for _ in 0..total {
        counts[sampler.draw(rng)] += 1;
    }
    SampleCounts {
        counts,
        total,
        nominal_s: s,
    }
}

/// Draws a Poissonized stream of expected length `s` and splits it into two
/// disjoint halves, each with Poisson parameter `s / 2`.
///
/// The stream is the concatenation of `Pois(s/2)` draws for the first half
/// and an independent `Pois(s/2)` for the second, so the whole stream has
/// `Pois(s)` length and each half's counts are exactly `Pois(s/2 * p(i))`.
pub fn split_halves(
    p: &DiscreteDistribution,
    s: u64,
    seed: u64,
) -> Result<(SampleCounts, SampleCounts)> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be at least 1".into()));
    }
    let mut rng = rng_for(seed, 0);
    let sampler = CategoricalSampler::new(p);
    let half = s as f64 / 2.0;
    let first = poissonized_counts(&sampler, half, &mut rng);
    let second = poissonized_counts(&sampler, half, &mut rng);
    Ok((first, second))
}

/// `P(|Y - lambda| >= t) <= 2 exp(-t^2 / (2 (lambda + t)))` for
/// `Y ~ Pois(lambda)`, clamped to 1.
pub fn poisson_tail_bound(lambda: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    Ok((2.0 * (-t * t / (2.0 * (lambda + t))).exp()).min(1.0))
}

/// Uniformly random `m`-subset of `0..n`, sorted.
pub(crate) fn random_subset(n: usize, m: usize, rng: &mut Rng) -> Vec<usize> {
    let mut idx = rand::seq::index::sample(rng, n, m).into_vec();
    idx.sort_unstable();
    idx
}
