//! Nearest-neighbor indexes used by the sublinear selector.
//!
//! [`LinfIndex`] answers approximate ℓ∞ queries over a whole dataset.
//! [`L2LshIndex`] answers approximate ℓ2 queries over a set of vectors using
//! Gaussian p-stable hashing. Both count every exact distance evaluation in
//! an [`OpCounter`](crate::OpCounter).

mod linf;
mod lsh;

pub use linf::{LinfBackend, LinfIndex};
pub use lsh::{collision_probability, LshAnswer, L2LshIndex, LshParams, DEFAULT_FAILURE};

/// Index of the smallest `dist(i)` over `ids`, ties to the first.
pub(crate) fn argmin_by<F: FnMut(usize) -> f64>(ids: impl IntoIterator<Item = usize>, mut dist: F) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in ids {
        let d = dist(i);
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((i, d)),
        }
    }
    best
}
