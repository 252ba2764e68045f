//! Preprocess a half-uniform dataset, then select a hypothesis for queries
//! drawn from dataset members, using a sample budget sublinear in `n`.
//!
//! `cargo run --release --example sublinear -- [k] [n] [trials]`

use std::time::Instant;

use densel::dist::l1_distance;
use densel::rng::derive_seed;
use densel::sublinear::{PreprocessedIndex, SublinearConfig};
use densel::synth::gen_half_uniform;
use densel::OpCounter;

fn main() -> densel::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let k = args.first().copied().unwrap_or(1024);
    let n = args.get(1).copied().unwrap_or(512);
    let trials = args.get(2).copied().unwrap_or(100);
    let eps = 0.5;

    let vs = gen_half_uniform(n, k, 7)?;
    let cfg = SublinearConfig::defaults(n, k, eps)?.with_seed(11);
    println!("n = {n}, k = {k}, s = {}, gamma = {:.4}, radius = {:.4}", cfg.s, cfg.gamma, cfg.radius(n));

    let t0 = Instant::now();
    let idx = PreprocessedIndex::build(vs, cfg)?;
    let st = idx.stats();
    println!(
        "preprocessed in {:.1?}: {} groups, {} singletons, mean size {}, {} ℓ2 indexes",
        t0.elapsed(),
        st.groups,
        st.singleton_groups,
        st.mean_group_size,
        st.l2_indexes
    );

    let (mut ok, mut captured, mut l2_evals, mut fallbacks) = (0, 0, 0u64, 0);
    for t in 0..trials {
        let label = (derive_seed(5, &[t as u64]) % k as u64) as usize;
        let p = &idx.dataset()[label];
        let mut c = OpCounter::new();
        let r = idx.select_from(p, derive_seed(6, &[t as u64]), &mut c)?;
        ok += usize::from(l1_distance(p, &idx.dataset()[r.answer])? <= eps);
        captured += usize::from(idx.groups()[r.linf_answer].members.contains(&label));
        l2_evals += r.l2_evals;
        fallbacks += usize::from(r.fallback);
    }
    println!("within eps: {ok}/{trials}");
    println!("source in selected group: {captured}/{trials}");
    println!("mean ℓ2 candidate evaluations: {:.1} (k = {k})", l2_evals as f64 / trials as f64);
    println!("exact-scan fallbacks: {fallbacks}");
    Ok(())
}
