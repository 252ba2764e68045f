//! Knockout tournaments built from Scheffe tests.
//!
//! The base tournament tests every pair with the full sample at every level.
//! The fast tournament uses only the first `s_i` samples at level `i`, moves
//! a few random entrants per level into a candidate pool, and finishes with
//! an all-pairs round on the pool plus the last knockout survivor.
//!
//! Two parameterizations are first-class:
//! * theoretical: `s_i = ceil(10 ln(4^i / delta) / eps^2)`, `ceil(k^(1/3))`
//!   entrants pooled per level, and a fresh pool sample of
//!   `ceil(10 ln(C(|pool|, 2) / delta) / eps^2)` elements;
//! * experimental: `s_i = min(fast_const * i, s)` and `n_all_pairs` entrants
//!   pooled per level, with the pool round reusing the query sample.

use rand::seq::SliceRandom;

use crate::rng::rng_for;
use crate::scheffe::{ceil_count, pair_test, OpCounter, PairSource};
use crate::{Error, Result};

/// Per-level sample budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `ceil(10 ln(4^i / delta) / eps^2)` samples at level `i`.
    Theoretical,
    /// `min(c * i, s)` samples at level `i`.
    FastConst(usize),
    /// The same `s` samples at every level.
    FullSample(usize),
}

/// How many entrants are moved into the candidate pool per level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolRate {
    /// `ceil(k^(1/3))` per level; the pool round uses fresh samples.
    TheoreticalK13,
    /// A fixed number per level; the pool round reuses the query sample.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Base,
    Fast,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Base => "base",
            Mode::Fast => "fast",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(Mode::Base),
            "fast" => Ok(Mode::Fast),
            _ => Err(Error::InvalidParameter(format!("unknown mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TournamentConfig {
    pub epsilon: f64,
    pub delta: f64,
    pub schedule: Schedule,
    pub n_all_pairs: usize,
    pub rng_seed: u64,
    pub pool_rate: PoolRate,
}

impl TournamentConfig {
    pub fn theoretical(epsilon: f64, delta: f64, rng_seed: u64) -> Self {
        Self {
            epsilon,
            delta,
            schedule: Schedule::Theoretical,
            n_all_pairs: 0,
            rng_seed,
            pool_rate: PoolRate::TheoreticalK13,
        }
    }

    /// `fast_const * i` samples at level `i`, `n_all_pairs` pooled per level.
    pub fn experimental(fast_const: usize, n_all_pairs: usize, rng_seed: u64) -> Self {
        Self {
            epsilon: 0.5,
            delta: 0.25,
            schedule: Schedule::FastConst(fast_const),
            n_all_pairs,
            rng_seed,
            pool_rate: PoolRate::Fixed(n_all_pairs),
        }
    }

    pub fn with_seed(mut self, rng_seed: u64) -> Self {
        self.rng_seed = rng_seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        match self.schedule {
            Schedule::FastConst(0) => Err(Error::InvalidParameter("fastConst must be at least 1".into())),
            Schedule::FullSample(0) => Err(Error::InvalidParameter("full sample size must be at least 1".into())),
            _ => Ok(()),
        }
    }

    fn pool_per_level(&self, k: usize) -> usize {
        match self.pool_rate {
            PoolRate::TheoreticalK13 => ceil_cbrt(k),
            PoolRate::Fixed(m) => m,
        }
    }

    /// Samples used by each test at `level` (1-based) out of `available`.
    fn level_samples(&self, mode: Mode, level: usize, available: usize) -> Result<usize> {
        let needed = match (mode, self.schedule) {
            (Mode::Base, _) => available,
            (Mode::Fast, Schedule::Theoretical) => theoretical_level_samples(self.epsilon, self.delta, level),
            (Mode::Fast, Schedule::FastConst(c)) => (c * level).min(available),
            (Mode::Fast, Schedule::FullSample(s)) => s,
        };
        if needed > available {
            return Err(Error::SamplesExhausted { needed, available });
        }
        Ok(needed)
    }

    /// Sample size for the all-pairs round over a pool of `m`.
    fn pool_samples(&self, m: usize, available: usize) -> usize {
        if m < 2 {
            return 0;
        }
        match self.pool_rate {
            PoolRate::TheoreticalK13 => {
                let pairs = (m * (m - 1) / 2) as f64;
                ceil_count(10.0 * (pairs / self.delta).ln() / (self.epsilon * self.epsilon))
            }
            PoolRate::Fixed(_) => available,
        }
    }
}

/// `ceil(10 ln(4^level / delta) / eps^2)`.
pub fn theoretical_level_samples(epsilon: f64, delta: f64, level: usize) -> usize {
    let log_inv_delta_i = level as f64 * 4f64.ln() - delta.ln();
    ceil_count(10.0 * log_inv_delta_i / (epsilon * epsilon))
}

/// Smallest `c` with `c^3 >= k`.
fn ceil_cbrt(k: usize) -> usize {
    let mut c = (k as f64).cbrt().round() as usize;
    while c * c * c < k {
        c += 1;
    }
    while c > 1 && (c - 1) * (c - 1) * (c - 1) >= k {
        c -= 1;
    }
    c
}

/// Samples available to one tournament run.
#[derive(Debug, Clone, Copy)]
pub struct QuerySamples<'a> {
    /// Prefixes of this stream feed the knockout levels.
    pub knockout: &'a [usize],
    /// Feeds the all-pairs round; must be independent of `knockout` in the
    /// theoretical configuration.
    pub pool: &'a [usize],
}

impl<'a> QuerySamples<'a> {
    /// One sample reused for both phases.
    pub fn shared(samples: &'a [usize]) -> Self {
        Self {
            knockout: samples,
            pool: samples,
        }
    }
}

/// One Scheffe test played during the knockout phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Match {
    pub level: usize,
    pub first: usize,
    pub second: usize,
    pub winner: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelRecord {
    pub level: usize,
    /// `|V_i|` before pooling.
    pub entrants: usize,
    pub pooled: usize,
    pub pairs: usize,
    pub bye: bool,
    /// Samples per test at this level (0 when no test was played).
    pub sample_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TournamentResult {
    pub winner: usize,
    pub ops: OpCounter,
    pub levels: Vec<LevelRecord>,
    /// Final candidate pool, including the knockout survivor when the pool
    /// round was played.
    pub pool: Vec<usize>,
    pub matches: Vec<Match>,
    /// Samples used by the all-pairs round.
    pub pool_sample_size: usize,
}

/// Knockout tournament using the full sample at every level.
pub fn base_knockout<P: PairSource + ?Sized>(
    pairs: &P,
    samples: QuerySamples<'_>,
    cfg: &TournamentConfig,
) -> Result<TournamentResult> {
    run(Mode::Base, pairs, samples, cfg)
}

/// Knockout tournament with the per-level sample schedule and candidate pool.
pub fn fast_knockout<P: PairSource + ?Sized>(
    pairs: &P,
    samples: QuerySamples<'_>,
    cfg: &TournamentConfig,
) -> Result<TournamentResult> {
    run(Mode::Fast, pairs, samples, cfg)
}

pub fn run<P: PairSource + ?Sized>(
    mode: Mode,
    pairs: &P,
    samples: QuerySamples<'_>,
    cfg: &TournamentConfig,
) -> Result<TournamentResult> {
    cfg.validate()?;
    let k = pairs.distributions().len();
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    if mode == Mode::Fast && cfg.pool_rate == PoolRate::TheoreticalK13 {
        let floor = (k as f64).powf(-0.25);
        if cfg.delta < floor {
            log::warn!(
                "delta = {} is below k^(-1/4) = {floor:.4}; the 27x guarantee assumes delta >= k^(-1/4)",
                cfg.delta
            );
        }
    }

    let available = samples.knockout.len();
    let per_level = cfg.pool_per_level(k);
    let mut rng = rng_for(cfg.rng_seed, 0);
    let mut counter = OpCounter::new();
    let mut alive: Vec<usize> = (0..k).collect();
    let mut pool = Vec::new();
    let mut levels = Vec::new();
    let mut matches = Vec::new();
    let mut level = 0;

    while alive.len() > 1 {
        level += 1;
        let entrants = alive.len();
        alive.shuffle(&mut rng);
        let take = per_level.min(entrants);
        pool.extend(alive.drain(..take));

        let n_pairs = alive.len() / 2;
        let bye = alive.len() % 2 == 1;
        let sample_size = if n_pairs > 0 {
            cfg.level_samples(mode, level, available)?
        } else {
            0
        };
        let sample = &samples.knockout[..sample_size];

        let mut next = Vec::with_capacity(n_pairs + usize::from(bye));
        for pair in alive.chunks_exact(2) {
            let (first, second) = (pair[0], pair[1]);
            let winner = pair_test(pairs, first, second, sample, &mut counter);
            matches.push(Match {
                level,
                first,
                second,
                winner,
            });
            next.push(winner);
        }
        if bye {
            // The shuffle makes the unpaired tail element a uniform choice.
            next.push(*alive.last().expect("odd length is non-empty"));
        }
        levels.push(LevelRecord {
            level,
            entrants,
            pooled: take,
            pairs: n_pairs,
            bye,
            sample_size,
        });
        alive = next;
    }

    let survivor = alive.pop();
    if pool.is_empty() {
        let winner = survivor.expect("k >= 1 leaves a survivor when nothing is pooled");
        return Ok(TournamentResult {
            winner,
            ops: counter,
            levels,
            pool,
            matches,
            pool_sample_size: 0,
        });
    }
    pool.extend(survivor);

    let pool_sample_size = cfg.pool_samples(pool.len(), available);
    if pool_sample_size > samples.pool.len() {
        return Err(Error::SamplesExhausted {
            needed: pool_sample_size,
            available: samples.pool.len(),
        });
    }
    let winner = all_pairs(pairs, &pool, &samples.pool[..pool_sample_size], &mut counter);
    Ok(TournamentResult {
        winner,
        ops: counter,
        levels,
        pool,
        matches,
        pool_sample_size,
    })
}

/// Scheffe test on every pair of `pool`; most wins, ties to the lowest index.
fn all_pairs<P: PairSource + ?Sized>(
    pairs: &P,
    pool: &[usize],
    sample: &[usize],
    counter: &mut OpCounter,
) -> usize {
    let mut wins = vec![0usize; pool.len()];
    for a in 0..pool.len() {
        for b in a + 1..pool.len() {
            if pair_test(pairs, pool[a], pool[b], sample, counter) == pool[a] {
                wins[a] += 1;
            } else {
                wins[b] += 1;
            }
        }
    }
    let best = *wins.iter().max().expect("non-empty pool");
    (0..pool.len())
        .filter(|&a| wins[a] == best)
        .map(|a| pool[a])
        .min()
        .expect("some entrant has the most wins")
}

/// Exact Scheffe-operation count of a run over `k` hypotheses with a
/// knockout sample of length `s` (and, for the theoretical pool, a large
/// enough fresh pool sample). Independent of the seed.
pub fn predicted_ops(mode: Mode, cfg: &TournamentConfig, k: usize, s: usize) -> Result<u64> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::EmptyDataset);
    }
    let per_level = cfg.pool_per_level(k);
    let mut remaining = k;
    let mut pooled = 0usize;
    let mut ops = 0u64;
    let mut level = 0;
    while remaining > 1 {
        level += 1;
        let take = per_level.min(remaining);
        pooled += take;
        let rest = remaining - take;
        let n_pairs = rest / 2;
        if n_pairs > 0 {
            ops += (n_pairs * cfg.level_samples(mode, level, s)?) as u64;
        }
        remaining = n_pairs + rest % 2;
    }
    if pooled > 0 {
        let m = pooled + remaining;
        let round = (m * (m - 1) / 2) as u64;
        ops += round * cfg.pool_samples(m, s) as u64;
    }
    Ok(ops)
}

/// Knockout and pool sample lengths a theoretical fast run needs for `k`
/// hypotheses.
pub fn required_samples(cfg: &TournamentConfig, k: usize) -> Result<(usize, usize)> {
    cfg.validate()?;
    let per_level = cfg.pool_per_level(k);
    let mut remaining = k;
    let mut pooled = 0usize;
    let mut deepest = 0usize;
    let mut level = 0;
    while remaining > 1 {
        level += 1;
        let take = per_level.min(remaining);
        pooled += take;
        let rest = remaining - take;
        if rest >= 2 {
            deepest = match cfg.schedule {
                Schedule::Theoretical => theoretical_level_samples(cfg.epsilon, cfg.delta, level),
                Schedule::FastConst(c) => c * level,
                Schedule::FullSample(s) => s,
            }
            .max(deepest);
        }
        remaining = rest / 2 + rest % 2;
    }
    let m = if pooled > 0 { pooled + remaining } else { 0 };
    let pool = match cfg.pool_rate {
        PoolRate::TheoreticalK13 => cfg.pool_samples(m, deepest),
        PoolRate::Fixed(_) => 0,
    };
    Ok((deepest, pool))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DiscreteDistribution, DistributionSet};
    use crate::scheffe::OnDemandPairs;

    fn spread_set(k: usize, n: usize) -> DistributionSet {
        DistributionSet::new(
            (0..k)
                .map(|i| {
                    let w: Vec<f64> = (0..n).map(|c| 1.0 + ((c * 7 + i * 13) % 11) as f64).collect();
                    DiscreteDistribution::from_weights(&w).unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn no_pool(schedule: Schedule) -> TournamentConfig {
        TournamentConfig {
            epsilon: 0.5,
            delta: 0.25,
            schedule,
            n_all_pairs: 0,
            rng_seed: 1,
            pool_rate: PoolRate::Fixed(0),
        }
    }

    #[test]
    fn theoretical_schedule_values() {
        assert_eq!(theoretical_level_samples(0.5, 0.25, 1), 111);
        assert_eq!(theoretical_level_samples(0.5, 0.25, 2), 167);
        assert_eq!(theoretical_level_samples(0.5, 0.25, 3), 222);
    }

    #[test]
    fn cube_roots() {
        assert_eq!(ceil_cbrt(1), 1);
        assert_eq!(ceil_cbrt(8), 2);
        assert_eq!(ceil_cbrt(9), 3);
        assert_eq!(ceil_cbrt(64), 4);
        assert_eq!(ceil_cbrt(65), 5);
        assert_eq!(ceil_cbrt(8192), 21);
    }

    #[test]
    fn base_counts_every_test_at_full_sample() {
        let vs = spread_set(8, 6);
        let src = OnDemandPairs::new(&vs);
        let samples: Vec<usize> = (0..20).map(|i| i % 6).collect();
        let cfg = no_pool(Schedule::FullSample(20));
        let r = base_knockout(&src, QuerySamples::shared(&samples), &cfg).unwrap();
        assert_eq!(r.ops.scheffe_ops, 140);
        assert_eq!(r.matches.len(), 7);
        assert_eq!(predicted_ops(Mode::Base, &cfg, 8, 20).unwrap(), 140);
    }

    #[test]
    fn fast_const_level_sizes() {
        let cfg = no_pool(Schedule::FastConst(5));
        assert_eq!(predicted_ops(Mode::Fast, &cfg, 8, 20).unwrap(), 4 * 5 + 2 * 10 + 15);
        let vs = spread_set(8, 6);
        let samples: Vec<usize> = (0..40).map(|i| i % 6).collect();
        let r = fast_knockout(&OnDemandPairs::new(&vs), QuerySamples::shared(&samples), &cfg).unwrap();
        assert_eq!(r.ops.scheffe_ops, 55);
        let sizes: Vec<usize> = r.levels.iter().map(|l| l.sample_size).collect();
        assert_eq!(sizes, vec![5, 10, 15]);

        let cfg10 = no_pool(Schedule::FastConst(10));
        let r = fast_knockout(&OnDemandPairs::new(&vs), QuerySamples::shared(&samples), &cfg10).unwrap();
        assert_eq!(r.levels[2].sample_size, 30);
    }

    #[test]
    fn fast_const_is_capped_by_available_samples() {
        let cfg = no_pool(Schedule::FastConst(10));
        // k = 8: levels use min(10, 25), min(20, 25), min(30, 25)
        assert_eq!(predicted_ops(Mode::Fast, &cfg, 8, 25).unwrap(), 40 + 40 + 25);
    }

    #[test]
    fn single_hypothesis_wins_for_free() {
        let vs = spread_set(1, 4);
        let src = OnDemandPairs::new(&vs);
        for mode in [Mode::Base, Mode::Fast] {
            let r = run(mode, &src, QuerySamples::shared(&[0, 1]), &no_pool(Schedule::FastConst(3))).unwrap();
            assert_eq!(r.winner, 0);
            assert_eq!(r.ops.scheffe_ops, 0);
        }
    }

    #[test]
    fn two_hypotheses_play_one_test() {
        let vs = spread_set(2, 4);
        let src = OnDemandPairs::new(&vs);
        let samples = [0, 1, 2, 3, 3];
        let r = base_knockout(&src, QuerySamples::shared(&samples), &no_pool(Schedule::FullSample(5))).unwrap();
        assert_eq!(r.matches.len(), 1);
        let m = r.matches[0];
        let pair = crate::scheffe::ScheffePair::build(&vs, m.first, m.second).unwrap();
        let mut c = OpCounter::new();
        assert_eq!(crate::scheffe::scheffe_test(&pair, &samples, &mut c).unwrap(), r.winner);
        assert_eq!(c, r.ops);
    }

    #[test]
    fn theoretical_run_needs_enough_samples() {
        let vs = spread_set(8, 6);
        let src = OnDemandPairs::new(&vs);
        let cfg = TournamentConfig::theoretical(0.5, 0.25, 3);
        let short = vec![0usize; 100];
        assert!(matches!(
            fast_knockout(&src, QuerySamples::shared(&short), &cfg),
            Err(Error::SamplesExhausted { .. })
        ));
        let (ko, pool) = required_samples(&cfg, 8).unwrap();
        let a = vec![1usize; ko];
        let b = vec![2usize; pool];
        let r = fast_knockout(&src, QuerySamples { knockout: &a, pool: &b }, &cfg).unwrap();
        assert_eq!(r.ops.scheffe_ops, predicted_ops(Mode::Fast, &cfg, 8, ko).unwrap());
        assert_eq!(r.pool_sample_size, pool);
    }

    #[test]
    fn pool_round_picks_most_wins() {
        let vs = spread_set(6, 5);
        let src = OnDemandPairs::new(&vs);
        let samples: Vec<usize> = (0..30).map(|i| (i * 3) % 5).collect();
        let cfg = TournamentConfig::experimental(2, 2, 5);
        let r = fast_knockout(&src, QuerySamples::shared(&samples), &cfg).unwrap();
        assert!(r.pool.contains(&r.winner));
        assert_eq!(
            r.ops.scheffe_ops,
            predicted_ops(Mode::Fast, &cfg, 6, samples.len()).unwrap()
        );
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = TournamentConfig::theoretical(0.5, 1.5, 0);
        assert!(cfg.validate().is_err());
        cfg.delta = 0.5;
        cfg.epsilon = 0.0;
        assert!(cfg.validate().is_err());
        assert!(no_pool(Schedule::FastConst(0)).validate().is_err());
    }
}
