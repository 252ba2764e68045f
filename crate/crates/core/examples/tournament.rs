//! Base and fast knockout tournaments on one query, with the theoretical
//! sample schedule and with the experimental `fastConst` schedule.
//!
//! `cargo run --release --example tournament`

use densel::dist::{l1_distance, sample_fixed};
use densel::scheffe::OnDemandPairs;
use densel::synth::gen_half_uniform;
use densel::tournament::{self, Mode, QuerySamples, Schedule, TournamentConfig};

fn main() -> densel::Result<()> {
    let vs = gen_half_uniform(100, 64, 3)?;
    let pairs = OnDemandPairs::new(&vs);
    let label = 17;

    // Theoretical schedule: per-level sample sizes grow with the level and
    // the all-pairs pool gets its own fresh sample.
    let cfg = TournamentConfig::theoretical(0.1, 0.1, 9);
    let (ko_len, pool_len) = tournament::required_samples(&cfg, vs.len())?;
    for level in 1..=3 {
        println!("level {level}: {} samples per test", tournament::theoretical_level_samples(0.1, 0.1, level));
    }
    let knockout = sample_fixed(&vs[label], ko_len, 1);
    let pool = sample_fixed(&vs[label], pool_len, 2);
    let samples = QuerySamples { knockout: &knockout, pool: &pool };
    let r = tournament::run(Mode::Fast, &pairs, samples, &cfg)?;
    println!(
        "theoretical fast: winner {} (truth {label}, ℓ1 {:.3}), {} levels, pool {:?}, {} ops",
        r.winner,
        l1_distance(&vs[r.winner], &vs[label])?,
        r.levels.len(),
        r.pool,
        r.ops.scheffe_ops
    );

    // Experimental: one 60-sample query, fastConst = 10, 10 pooled per level.
    let draws = sample_fixed(&vs[label], 60, 3);
    for mode in [Mode::Base, Mode::Fast] {
        let mut cfg = TournamentConfig::experimental(10, 10, 4);
        if mode == Mode::Base {
            cfg.schedule = Schedule::FullSample(60);
        }
        let r = tournament::run(mode, &pairs, QuerySamples::shared(&draws), &cfg)?;
        let predicted = tournament::predicted_ops(mode, &cfg, vs.len(), draws.len())?;
        println!(
            "{:>4}: winner {}, {} ops (predicted {predicted}), {} matches",
            mode.as_str(),
            r.winner,
            r.ops.scheffe_ops,
            r.matches.len()
        );
    }
    Ok(())
}
