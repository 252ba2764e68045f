//! Accuracy-versus-operations grid for base and fast tournaments on
//! half-uniform data, written as CSV and summarized on stdout.
//!
//! `cargo run --release --example synth_grid -- [k] [n] [out.csv]`
//! Default is a reduced preset; `8192 500` gives the full-size experiment.

use std::path::PathBuf;
use std::time::Instant;

use densel::synth::{gen_half_uniform, overall_accuracy, run_grid, summarize, write_grid_csv, GridSpec};

fn main() -> densel::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let k = args.first().and_then(|a| a.parse().ok()).unwrap_or(1024);
    let n = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(250);
    let out = args.get(2).map(PathBuf::from);

    let samples = vec![20, 30, 40, 50, 60];
    let vs = gen_half_uniform(n, k, 7)?;
    let t0 = Instant::now();
    let rows = run_grid(&vs, "halfuniform", &GridSpec::standard(samples.clone()), 8)?;
    println!("{} rows in {:.1?}", rows.len(), t0.elapsed());
    if let Some(p) = &out {
        write_grid_csv(p, &rows)?;
        println!("wrote {}", p.display());
    }

    for s in &samples {
        println!("overall accuracy at {s} samples: {:.3}", overall_accuracy(&rows, *s).unwrap_or(f64::NAN));
    }
    // Cheapest configuration of each mode reaching 80% accuracy.
    let points = summarize(&rows);
    let cheapest = |mode: &str| {
        points
            .iter()
            .filter(|p| p.mode == mode && p.accuracy >= 0.8)
            .min_by(|a, b| a.ops.total_cmp(&b.ops))
    };
    let (base, fast) = (cheapest("base"), cheapest("fast"));
    for (name, p) in [("base", base), ("fast", fast)] {
        match p {
            Some(p) => println!(
                "{name}: {:.0} ops for accuracy {:.2} (samples {}, fastconst {}, nallpairs {})",
                p.ops, p.accuracy, p.samples, p.fastconst, p.nallpairs
            ),
            None => println!("{name}: no configuration reaches 0.80"),
        }
    }
    if let (Some(b), Some(f)) = (base, fast) {
        println!("op ratio at 0.80 accuracy: {:.2}", b.ops / f.ops);
    }
    Ok(())
}
