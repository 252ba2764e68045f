//! ℓ∞ and ℓ2 nearest-neighbor indexes against their exact-scan oracles.
//!
//! `cargo run --release --example nns`

use densel::dist::{linf_distance, sample_fixed, SampleCounts};
use densel::nns::{L2LshIndex, LinfBackend, LinfIndex, LshParams, DEFAULT_FAILURE};
use densel::rng::derive_seed;
use densel::synth::{gen_half_uniform, gen_zipfian};
use densel::{OpCounter, RestrictedVector};

/// Empirical distribution of `m` samples from dataset member `label`.
fn noisy(vs: &densel::DistributionSet, label: usize, m: usize, seed: u64) -> densel::Result<Vec<f64>> {
    let draws = sample_fixed(&vs[label], m, seed);
    Ok(SampleCounts::from_draws(&draws, vs.domain_size(), m as f64)?.empirical())
}

fn main() -> densel::Result<()> {
    // ℓ∞: coordinate sampling versus exact scan.
    let (n, k) = (500, 1024);
    let vs = gen_half_uniform(n, k, 1)?;
    let exact = LinfIndex::build(&vs, LinfBackend::ExactScan, 0)?;
    let backend = LinfBackend::coordinate_sample_default(n, k);
    let sampled = LinfIndex::build(&vs, backend, 2)?;
    let (mut worst, mut evals) = (1.0f64, 0u64);
    for t in 0..100u64 {
        let q = noisy(&vs, (t * 37 % k as u64) as usize, 400, derive_seed(3, &[t]))?;
        let e = exact.query(&vs, &q, &mut OpCounter::new())?;
        let mut c = OpCounter::new();
        let a = sampled.query(&vs, &q, &mut c)?;
        evals += c.nns_candidate_evals;
        let ratio = linf_distance(&vs[a], &q)? / linf_distance(&vs[e], &q)?;
        worst = worst.max(ratio);
    }
    println!("ℓ∞ {backend:?}: worst approximation {worst:.3}, mean evaluations {:.0}", evals as f64 / 100.0);

    // ℓ2 LSH on Zipfian data.
    let (n, k, m) = (250, 4096, 2000);
    let vs = gen_zipfian(n, k, 4)?;
    let vecs: Vec<RestrictedVector> = vs.iter().map(|v| RestrictedVector::new(v.probs().to_vec(), (0..n).collect())).collect::<densel::Result<_>>()?;
    let radius = (1.0 / m as f64).sqrt();
    let params = LshParams::new(radius, 1.2, k, DEFAULT_FAILURE)?;
    println!(
        "LSH radius {radius:.4}, w {:.4}, r {}, L {} (from {} groups)",
        params.w,
        params.hashes_per_table(),
        params.tables(),
        params.groups
    );
    let index = L2LshIndex::build(&vecs, params, 5)?;
    let queries = 500;
    let (mut agree, mut cands, mut fallbacks) = (0, 0usize, 0);
    for t in 0..queries as u64 {
        let label = (derive_seed(6, &[t]) % k as u64) as usize;
        let q = noisy(&vs, label, m, derive_seed(7, &[t]))?;
        let oracle = (0..k)
            .min_by(|&a, &b| {
                let da: f64 = vs[a].probs().iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum();
                let db: f64 = vs[b].probs().iter().zip(&q).map(|(x, y)| (x - y).powi(2)).sum();
                da.total_cmp(&db)
            })
            .unwrap();
        let ans = index.query(&q, &mut OpCounter::new())?;
        agree += usize::from(ans.id == oracle);
        cands += ans.candidates;
        fallbacks += usize::from(ans.fallback);
    }
    println!(
        "LSH agreement {agree}/{queries}, mean candidates {:.1} (k = {k}), fallbacks {fallbacks}",
        cands as f64 / queries as f64
    );
    Ok(())
}
