//! Streaming submodular b-matching.
//!
//! The primal-dual stack algorithm ([`streaming`]), its linear-weight
//! variant with an exact offline finish ([`mwbm`]), the preemptive matching
//! algorithm ([`preemptive`]), dual certificates and brute-force optima
//! ([`certificates`]), and reproducible instance families ([`generators`]).
//!
//! ```
//! use msbm_core::certificates::{build_dual, check_feasibility, SubsetMode};
//! use msbm_core::generators::{generate, GenSpec, RandomSpec};
//! use msbm_core::streaming::{run, AlgoParams};
//!
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let g = generate(GenSpec::Coverage(RandomSpec { seed: 7, ..Default::default() }))?;
//! let record = run(&g.instance, &g.oracle, AlgoParams::monotone(), true)?;
//! let cert = build_dual(&g.instance, &g.oracle, &record)?;
//! assert!(check_feasibility(&cert, &g.instance, &g.oracle, SubsetMode::Exhaustive)?.passes());
//! # Ok(())
//! # }
//! ```

pub mod certificates;
mod error;
pub mod generators;
pub mod instance;
pub mod mwbm;
pub mod oracle;
pub mod preemptive;
pub mod streaming;

pub use error::AlgoError;

/// Absolute tolerance for every floating-point comparison.
pub const TOL: f64 = 1e-9;
