//! Mode-collapse measurement between a target distribution `P` and a
//! generated distribution `Q`.
//!
//! The crate covers:
//!
//! - [`dist`]: finite and piecewise-uniform distributions, total variation,
//!   KL divergence, entropy and m-fold packing (product distributions).
//! - [`region`]: the mode-collapse region (equivalently the hypothesis-testing
//!   region) as a concave boundary, with area and TV read off its geometry.
//! - [`bounds`]: the minimum/maximum packed total variation at fixed
//!   unpacked TV `tau`, and packing sweeps.
//! - [`blackwell`]: maximum expected payoff, garbling factorization `C = BM`
//!   via a phase-1 simplex, and informativeness verdicts.
//! - [`veegan`]: the reconstructor objective on finite alphabets and its
//!   KL upper bound.
//! - [`eval`]: label-histogram ingestion, smoothed KL reports, seeded
//!   synthetic sampling and plot-ready CSV emission.
//!
//! Heavy inner loops run through [`par::Execution`]. With the `parallel`
//! feature (on by default) they use rayon; without it every path is
//! sequential. Both paths produce bit-identical results.

pub mod blackwell;
pub mod bounds;
pub mod dist;
pub mod error;
pub mod eval;
pub mod par;
pub mod region;
pub mod veegan;

pub use dist::{DiscreteDist, PackedDist, PiecewiseUniformDist, Segment};
pub use error::{Error, Result};
pub use par::Execution;
pub use region::RegionBoundary;
