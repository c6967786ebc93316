//! Numerical thresholds and default parameters.

use std::f64::consts::PI;

/// Amplitudes below this are dropped from a field's support.
pub const PRUNE: f64 = 1e-15;
/// Largest asymmetry `|A − A^H|` that is symmetrized instead of rejected.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues of a Gram matrix may dip this far below zero.
pub const PSD_TOL: f64 = 1e-10;
/// Multipliers may dip this far below zero on the grid.
pub const NONNEGATIVE_TOL: f64 = 1e-12;

pub const DEFAULT_B: f64 = 0.6;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_TAU: f64 = PI / 4.0;
pub const DEFAULT_PLATEAU: f64 = 0.5;
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;
/// Number of times `τ` may be halved while looking for a contraction.
pub const MAX_TAU_HALVINGS: usize = 6;
