//! Density estimation by selecting, from a fixed set of candidate
//! distributions, one that is close to an unknown distribution observed only
//! through samples.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod cli;
pub mod dist;
pub mod error;
pub mod io;
pub mod nns;
pub mod rng;
pub mod scheffe;
pub mod sublinear;
pub mod synth;
pub mod trace;
pub mod tournament;
pub mod verify;

pub use dist::{DiscreteDistribution, DistributionSet, RestrictedVector, SampleCounts};
pub use error::{Error, Result};
pub use scheffe::{OpCounter, PairSource};
