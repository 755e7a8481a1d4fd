//! Exact orbit generation on the circle, box-counting and entropy
//! diagnostics for orbit closures, and a constructive solver for the
//! congruence `2^n + c n ≡ t (mod m)`.
//!
//! The crate is organized bottom-up:
//!
//! - [`circle`]: fixed-point points of `[0, 1)` with a valid-bit budget.
//! - [`orbit`]: rotation, polynomial, doubling, combined and αβ generators.
//! - [`stats`]: dyadic box counts, dimension regression, star discrepancy,
//!   partition entropy and the independence report.
//! - [`residue`]: multiplicative order, the gcd/order reduction chain,
//!   coverage enumeration and the witness solver.
//! - [`exec`]: sequential or rayon-backed execution of the batch kernels.

pub mod circle;
pub mod error;
pub mod exec;
pub mod orbit;
pub mod residue;
pub mod stats;

pub use circle::{add_mod1, double_mod1, materialize, top_bits, CirclePoint, ConstantSpec, DigitSource};
pub use error::{Error, Result};
pub use exec::Exec;
pub use orbit::{
    finite_differences, greedy_choice, Choice, DifferenceTable, OrbitFamily, OrbitGenerator,
    OrbitPoint, OrbitSpec, PolySpec, Strategy,
};
pub use residue::{
    brute_solve, cover_count, mult_order, reduction_chain, solve_residue, sweep, CoeffRule,
    Coverage, ReductionChain, ResidueParams, ResidueSolver, Solution, SweepReport,
};
pub use stats::{
    box_counts, empirical_entropy, estimate_dimension, independence_report, star_discrepancy,
    BoxCountProfile, CellSample, DepthRange, DimensionEstimate, EntropyProfile, IndependenceReport,
};
