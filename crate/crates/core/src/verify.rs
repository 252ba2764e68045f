//! Monte-Carlo checks of the statistical claims the selectors rely on,
//! runnable from the command line.

use rand::Rng as _;
use rayon::prelude::*;

use crate::dist::{l1, poisson_draw, poisson_tail_bound, poissonized_counts, restrict, CategoricalSampler, DiscreteDistribution, DistributionSet};
use crate::rng::{derive_seed, rng_for};
use crate::scheffe::{scheffe_sample_size, scheffe_test, OnDemandPairs, OpCounter, ScheffePair};
use crate::sublinear::{coordinate_variance_bound, heavy_light, light_moments, light_statistic};
use crate::synth::gen_half_uniform;
use crate::tournament::{self, Mode, PoolRate, QuerySamples, Schedule, TournamentConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Poisson tails, ℓ∞ concentration of the empirical distribution, heavy counts.
    AppendixB,
    /// Mean and variance of the light statistic.
    AppendixC,
    Scheffe,
    Ops,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "appendix-b" => Ok(Suite::AppendixB),
            "appendix-c" => Ok(Suite::AppendixC),
            "scheffe" => Ok(Suite::Scheffe),
            "ops" => Ok(Suite::Ops),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidParameter(format!("unknown suite `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// `trials` scales the Monte-Carlo effort of every check.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<Vec<Check>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    Ok(match suite {
        Suite::AppendixB => appendix_b(trials, seed)?,
        Suite::AppendixC => appendix_c(trials, seed)?,
        Suite::Scheffe => vec![scheffe_guarantee(trials, seed)?],
        Suite::Ops => vec![op_exactness(trials.min(1000), seed)?],
        Suite::All => {
            let mut v = appendix_b(trials, seed)?;
            v.extend(appendix_c(trials, seed)?);
            v.push(scheffe_guarantee(trials, seed)?);
            v.push(op_exactness(trials.min(1000), seed)?);
            v
        }
    })
}

fn random_distribution(n: usize, rng: &mut crate::rng::Rng) -> Result<DiscreteDistribution> {
    let w: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    DiscreteDistribution::from_weights(&w)
}

fn appendix_b(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    // Poisson tail bound against the empirical tail.
    let mut rng = rng_for(seed, 10);
    let mut worst = f64::NEG_INFINITY;
    let mut ok = true;
    for &lambda in &[0.5, 5.0, 50.0, 500.0] {
        let draws: Vec<u64> = (0..trials).map(|_| poisson_draw(lambda, &mut rng)).collect();
        for mult in [1.0, 2.0, 3.0] {
            let t = mult * lambda.sqrt().max(1.0);
            let hit = draws.iter().filter(|&&y| (y as f64 - lambda).abs() >= t).count() as f64 / trials as f64;
            let bound = poisson_tail_bound(lambda, t)?;
            let se = (bound * (1.0 - bound) / trials as f64).sqrt();
            ok &= hit <= bound + 3.0 * se;
            worst = worst.max(hit - bound);
        }
    }
    out.push(Check::new(
        "poisson tail bound",
        ok,
        format!("max(empirical - bound) = {worst:.5}"),
    ));

    // |p_hat(i) - p(i)| <= C max(sqrt(p(i) ln n / s), ln n / s) for all i.
    let n = 200;
    let s = 100.0;
    let c = 3.0;
    let p = random_distribution(n, &mut rng)?;
    let sampler = CategoricalSampler::new(&p);
    let reps = trials.min(20_000);
    let ln_n = (n as f64).ln();
    let holds = (0..reps)
        .into_par_iter()
        .filter(|&t| {
            let mut r = rng_for(derive_seed(seed, &[11, t as u64]), 0);
            let phat = poissonized_counts(&sampler, s, &mut r).empirical();
            (0..n).all(|i| (phat[i] - p[i]).abs() <= c * (p[i] * ln_n / s).sqrt().max(ln_n / s))
        })
        .count();
    let frac = holds as f64 / reps as f64;
    out.push(Check::new(
        "l-infinity concentration of the empirical distribution",
        frac >= 1.0 - 1.0 / n as f64,
        format!("all coordinates within {c} x max(sqrt(p ln n / s), ln n / s) in {frac:.4} of {reps} draws (n = {n}, s = {s})"),
    ));

    // |H| <= 1/gamma.
    let gamma = (n as f64).powf(-5.0 / 12.0);
    let mut max_heavy = 0;
    let mut ok = true;
    for _ in 0..100 {
        let q = random_distribution(n, &mut rng)?;
        let h = heavy_light(&q, gamma)?.heavy.len();
        max_heavy = max_heavy.max(h);
        ok &= h as f64 <= 1.0 / gamma;
    }
    out.push(Check::new(
        "heavy count at most 1/gamma",
        ok,
        format!("max |H| = {max_heavy}, 1/gamma = {:.2}", 1.0 / gamma),
    ));
    Ok(out)
}

fn appendix_c(trials: usize, seed: u64) -> Result<Vec<Check>> {
    let mut rng = rng_for(seed, 20);
    let mut out = Vec::new();
    for inst in 0..10 {
        let n = rng.random_range(20..60usize);
        let s = rng.random_range(50..400usize) as f64;
        let p = random_distribution(n, &mut rng)?;
        let v = random_distribution(n, &mut rng)?;
        let light = heavy_light(&v, (n as f64).powf(-5.0 / 12.0))?.light;
        let vl = restrict(&v, &light)?;
        let m = light_moments(p.probs(), v.probs(), &light, s)?;
        let sampler = CategoricalSampler::new(&p);
        let zs: Vec<f64> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let mut r = rng_for(derive_seed(seed, &[21, inst, t as u64]), 0);
                light_statistic(&poissonized_counts(&sampler, s, &mut r), &vl, s)
            })
            .collect::<Result<_>>()?;
        let (mean, var) = mean_var(&zs);
        let se = (var / trials as f64).sqrt();
        out.push(Check::new(
            format!("light statistic mean, instance {inst}"),
            (mean - m.mean).abs() <= 3.0 * se,
            format!("n = {n}, s = {s}, |L| = {}, mc = {mean:.3}, exact = {:.3}, se = {se:.3}", light.len(), m.mean),
        ));
        out.push(Check::new(
            format!("light statistic variance bound, instance {inst}"),
            var <= m.variance_bound,
            format!("mc var = {var:.1}, bound = {:.1}", m.variance_bound),
        ));

        // Per-coordinate variance bound on the coordinate with the largest bound.
        let i = *light
            .iter()
            .max_by(|&&a, &&b| {
                coordinate_variance_bound(p[a], v[a], s).total_cmp(&coordinate_variance_bound(p[b], v[b], s))
            })
            .unwrap_or(&0);
        if light.contains(&i) {
            let a = s * v[i];
            let xs: Vec<f64> = (0..trials)
                .map(|t| {
                    let mut r = rng_for(derive_seed(seed, &[22, inst, t as u64]), 0);
                    let d = poisson_draw(s * p[i], &mut r) as f64 - a;
                    d * d
                })
                .collect();
            let (cm, cv) = mean_var(&xs);
            let lam = s * p[i];
            let d = lam - a;
            let exact_mean = lam + d * d;
            let exact_var = 4.0 * d * d * lam + 4.0 * d * lam + 2.0 * lam * lam + lam;
            let cse = (cv / trials as f64).sqrt();
            // Standard error of the sample variance, from the fourth central moment.
            let m4 = xs.iter().map(|x| (x - cm).powi(4)).sum::<f64>() / trials as f64;
            let vse = ((m4 - cv * cv).max(0.0) / trials as f64).sqrt();
            let bound = coordinate_variance_bound(p[i], v[i], s);
            out.push(Check::new(
                format!("light coordinate moments, instance {inst}"),
                (cm - exact_mean).abs() <= 3.0 * cse && (cv - exact_var).abs() <= 3.0 * vse && exact_var <= bound,
                format!(
                    "coordinate {i}: mean {cm:.3} vs {exact_mean:.3}, var {cv:.2} vs {exact_var:.2} (se {vse:.2}), bound {bound:.2}"
                ),
            ));
        }
    }
    Ok(out)
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, var)
}

/// `||p - v_hat||_1 <= 3 min_j ||p - v_j||_1 + sqrt(10 ln(1/delta) / s)` for
/// random pairs and mixtures, `delta = 0.05`, `eps = 0.3`.
pub fn scheffe_guarantee(trials: usize, seed: u64) -> Result<Check> {
    let (delta, eps) = (0.05, 0.3);
    let s = scheffe_sample_size(delta, eps)?;
    let n = 20;
    let slack = (10.0 * (1.0 / delta).ln() / s as f64).sqrt();
    let holds = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(derive_seed(seed, &[30, t as u64]), 0);
            let a = random_distribution(n, &mut rng)?;
            let b = random_distribution(n, &mut rng)?;
            let lam: f64 = rng.random();
            let mix: Vec<f64> = a.probs().iter().zip(b.probs()).map(|(x, y)| lam * x + (1.0 - lam) * y).collect();
            let p = DiscreteDistribution::from_weights(&mix)?;
            let vs = DistributionSet::new(vec![a, b])?;
            let pair = ScheffePair::build(&vs, 0, 1)?;
            let draws = CategoricalSampler::new(&p).draws(s, &mut rng);
            let w = scheffe_test(&pair, &draws, &mut OpCounter::new())?;
            let best = l1(p.probs(), vs[0].probs()).min(l1(p.probs(), vs[1].probs()));
            Ok(l1(p.probs(), vs[w].probs()) <= 3.0 * best + slack)
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    let frac = holds as f64 / trials as f64;
    Ok(Check::new(
        "scheffe guarantee",
        frac >= 1.0 - delta,
        format!("bound held in {frac:.4} of {trials} trials (s = {s})"),
    ))
}

/// Measured Scheffe ops equal the closed-form prediction on random configs.
pub fn op_exactness(configs: usize, seed: u64) -> Result<Check> {
    let mut rng = rng_for(seed, 40);
    let mut mismatches = 0;
    for c in 0..configs {
        let k = rng.random_range(1..300usize);
        let s = rng.random_range(5..120usize);
        let mode = if rng.random::<bool>() { Mode::Base } else { Mode::Fast };
        let fc = rng.random_range(1..25usize);
        let nap = rng.random_range(0..12usize);
        let vs = gen_half_uniform(16, k, derive_seed(seed, &[41, c as u64]))?;
        let mut cfg = TournamentConfig::experimental(fc, nap, derive_seed(seed, &[42, c as u64]));
        cfg.pool_rate = PoolRate::Fixed(nap);
        if mode == Mode::Base {
            cfg.schedule = Schedule::FullSample(s);
        }
        let draws: Vec<usize> = (0..s).map(|_| rng.random_range(0..16)).collect();
        let r = tournament::run(mode, &OnDemandPairs::new(&vs), QuerySamples::shared(&draws), &cfg)?;
        if r.ops.scheffe_ops != tournament::predicted_ops(mode, &cfg, k, s)? {
            mismatches += 1;
        }
    }
    Ok(Check::new(
        "op accounting exactness",
        mismatches == 0,
        format!("{mismatches} mismatches over {configs} random configurations"),
    ))
}
