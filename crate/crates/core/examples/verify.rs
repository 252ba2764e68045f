//! Monte-Carlo checks of the sampling bounds behind the sublinear selector.
//!
//! `cargo run --release --example verify -- [trials]`

use densel::sublinear::light_moments;
use densel::verify::{run_suite, Suite};

fn main() -> densel::Result<()> {
    let trials = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20_000);

    // Closed-form moments of the light statistic for one small instance.
    let p = [0.3, 0.2, 0.2, 0.15, 0.15];
    let v = [0.1, 0.3, 0.2, 0.2, 0.2];
    let m = light_moments(&p, &v, &[1, 2, 3, 4], 40.0)?;
    println!("light statistic: mean {:.2}, variance {:.1} <= bound {:.1}", m.mean, m.variance, m.variance_bound);

    for suite in [Suite::AppendixB, Suite::AppendixC, Suite::Scheffe, Suite::Ops] {
        for check in run_suite(suite, trials, 1)? {
            println!("{check}");
        }
    }
    Ok(())
}
