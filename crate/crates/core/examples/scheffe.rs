//! The Scheffe test between two hypotheses.
//!
//! `cargo run --release --example scheffe`

use densel::dist::{l1_distance, sample_fixed};
use densel::scheffe::{scheffe_sample_size, scheffe_test, ScheffePair};
use densel::{DiscreteDistribution, DistributionSet, OpCounter};

fn main() -> densel::Result<()> {
    let v1 = DiscreteDistribution::from_weights(&[4.0, 3.0, 2.0, 1.0, 0.0])?;
    let v2 = DiscreteDistribution::from_weights(&[1.0, 1.0, 2.0, 3.0, 3.0])?;
    let p = DiscreteDistribution::from_weights(&[3.0, 2.5, 2.0, 1.5, 1.0])?;
    let vs = DistributionSet::new(vec![v1, v2])?;

    let pair = ScheffePair::build(&vs, 0, 1)?;
    println!("Scheffe set {:?}", pair.scheffe_set());

    let s = scheffe_sample_size(0.05, 0.3)?;
    let draws = sample_fixed(&p, s, 42);
    let mut ops = OpCounter::new();
    let w = scheffe_test(&pair, &draws, &mut ops)?;
    println!(
        "{s} samples: winner v{} (ℓ1 to p: {:.3} vs {:.3}), {} ops",
        w + 1,
        l1_distance(&p, &vs[0])?,
        l1_distance(&p, &vs[1])?,
        ops.scheffe_ops
    );
    Ok(())
}
