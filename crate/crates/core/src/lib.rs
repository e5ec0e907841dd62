//! Numerical laboratory for the fractional Allen-Cahn equation with
//! s ∈ (0, 1/2): a box solver with exterior data, the weighted extension
//! to the upper half-space, monotone densities, β-numbers and packing
//! measures, and the good/bad-tree covering constructions.

// NaN-rejecting guards are written as negated comparisons on purpose, and
// index loops mirror the per-axis formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod energy;
pub mod experiments;
pub mod error;
pub mod extension;
pub mod fft;
pub mod geometry;
pub mod fraclap;
pub mod grid;
pub mod math;
pub mod quad;
pub mod solver;
pub mod strat;

pub use error::{Error, Result};
pub use extension::{calibrate_ds, extend, ExtensionField};
pub use geometry::{beta2, packing_measure, perimeter_2s, second_moment, Ball, BetaResult, DiscreteMeasure, Mask, Window};
pub use fraclap::{frac_laplacian_apply, FracOperator};
pub use grid::{Constant, ExteriorData, Field, FnExterior, Grid, HalfSpaceSign, RadialStep};
pub use math::{make_params, make_params_with_ds, plane_distance, AffinePlane, FractionalParams, Potential};
pub use solver::{solve_allen_cahn, solve_allen_cahn_traced, SolveTrace, SolverConfig};
