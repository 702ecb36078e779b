//! Constrained discounted continuous-time Markov decision processes.
//!
//! Finite models are solved through the linear program over occupation
//! measures; the real-line benchmark models come with closed-form solutions,
//! Lyapunov drift checks and a Monte Carlo simulator.
#![no_std]
// `!(a <= b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(feature = "std")]
extern crate std;

extern crate alloc;

pub mod benchmarks;
pub mod error;
pub mod instances;
pub mod lp;
pub mod lyapunov;
pub mod model;
pub mod occupation;
pub mod simulate;
pub mod structure;

pub use error::{Error, Result};
pub use lp::{solve_constrained, solve_unconstrained, ConstrainedSolution, UnconstrainedSolution};
pub use model::{ContinuousCtmdp1D, FiniteCtmdp, ValidationReport};
pub use occupation::{occupation_of_stationary, OccupationMeasure, StationaryPolicy};
