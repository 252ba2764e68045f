//! Nearest traffic pattern retrieval: synthesize a packet trace, chunk it
//! into per-chunk source distributions, and compare tournament answers with
//! the exact nearest chunk.
//!
//! `cargo run --release --example network -- [keys] [packets_per_chunk]`

use densel::tournament::{predicted_ops, Mode, Schedule, TournamentConfig};
use densel::trace::{chunk_to_distributions, gen_synthetic_trace, nn_eval, split_dataset, Chunking, NetSetting};

fn main() -> densel::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let keys = args.first().copied().unwrap_or(500);
    let ppc = args.get(1).copied().unwrap_or(2000);
    let (n_dataset, n_queries) = (2048, 100);

    let packets = gen_synthetic_trace(keys, n_dataset + n_queries, ppc, 0.05, 1)?;
    let (all, dict) = chunk_to_distributions(&packets, Chunking::ByCount(ppc))?;
    println!("{} packets, {} chunks over {} keys", packets.len(), all.len(), dict.len());
    let (dataset, queries) = split_dataset(&all, n_dataset, n_queries)?;

    let setting = NetSetting { samples: 100, fast_const: 10, n_all_pairs: 0 };
    let rows = nn_eval(&dataset, &queries, setting, 3, 2)?;
    for mode in ["base", "fast"] {
        let sel: Vec<_> = rows.iter().filter(|r| r.mode == mode).collect();
        let m = sel.len() as f64;
        println!(
            "{mode}: mean TV {:.4}, mean ops {:.0}",
            sel.iter().map(|r| r.tv_answer).sum::<f64>() / m,
            sel.iter().map(|r| r.ops as f64).sum::<f64>() / m
        );
    }
    let m = rows.len() as f64;
    println!(
        "true NN mean TV {:.4}, dataset mean TV {:.4}",
        rows.iter().map(|r| r.tv_true_nn).sum::<f64>() / m,
        rows.iter().map(|r| r.tv_mean).sum::<f64>() / m
    );

    let fast = TournamentConfig::experimental(10, 0, 0);
    let mut base = fast.clone();
    base.schedule = Schedule::FullSample(100);
    let ratio = predicted_ops(Mode::Base, &base, n_dataset, 100)? as f64 / predicted_ops(Mode::Fast, &fast, n_dataset, 100)? as f64;
    println!("predicted base/fast op ratio: {ratio:.3}");
    Ok(())
}
