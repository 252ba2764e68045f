//! Instances where picking the hypothesis nearest to the empirical
//! distribution fails.
//!
//! `cargo run --release --example adversarial`

use densel::adversarial::{heavy_adversarial, light_adversarial, naive_failure_rate, naive_success_rate, Metric, Sampling};
use densel::DistributionSet;

fn main() -> densel::Result<()> {
    let (p, qs) = light_adversarial(100, 64, 1)?;
    let ok = naive_success_rate(&p, &qs, Metric::L1, 50, Sampling::Fixed, 500, 2)?;
    println!("light instance, ℓ1, s = n/2: nearest-empirical success rate {ok:.3}");

    let (p, q) = heavy_adversarial(201, 100)?;
    let q = DistributionSet::new(vec![q])?;
    for sampling in [Sampling::Fixed, Sampling::Poissonized] {
        let fail = naive_failure_rate(&p, &q, Metric::L2, 100, sampling, 10_000, 3)?;
        println!("heavy instance, ℓ2, s = 100, {sampling:?}: failure rate {fail:.4}");
    }
    Ok(())
}
