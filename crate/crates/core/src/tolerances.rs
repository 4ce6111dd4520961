//! Numerical tolerances. Every threshold used by the library lives here so
//! that a run can be reproduced from its configuration alone.
//!
//! Values are stored as `f64` and converted to the working scalar at the call
//! site. Fields documented as *relative* are multiplied by a problem scale
//! (usually `1 + max|entry|` of the matrix being tested).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative asymmetry accepted when constructing a symmetric operator.
    pub sym_tol: f64,
    /// Relative eigenvalue threshold separating zero from nonzero.
    pub pos_tol: f64,
    /// Relative least-squares residual accepted by range-inclusion tests;
    /// also the relative singular value cutoff.
    pub range_tol: f64,
    /// Relative slack on spectral interval endpoints.
    pub boundary_tol: f64,
    /// Relative equilibrium residual accepted for a steady state.
    pub eq_tol: f64,
    /// Rank cut for `BᵀB`, relative to `trace(BᵀB)/m`.
    pub pencil_tol: f64,
    /// Singular value cut for `ker[A B]`, relative to `σ_max`.
    pub ker_tol: f64,
    /// Relative threshold above which a form-inequality margin counts as positive.
    pub margin_tol: f64,
    /// Relative slack for the dissipation inequality checks.
    pub check_tol: f64,
    /// Absolute spectral abscissa threshold for exponential stability.
    pub stab_tol: f64,
    /// Target decay margin for synthesized output injections.
    pub stab_margin: f64,
    /// Lyapunov residual bound, multiplied by the state dimension.
    pub lyap_tol: f64,
    /// Relative convergence threshold for the dissipation integral.
    pub quad_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_tol: 1e-10,
            pos_tol: 1e-9,
            range_tol: 1e-8,
            boundary_tol: 1e-12,
            eq_tol: 1e-8,
            pencil_tol: 1e-10,
            ker_tol: 1e-10,
            margin_tol: 1e-9,
            check_tol: 1e-8,
            stab_tol: 1e-9,
            stab_margin: 0.1,
            lyap_tol: 1e-8,
            quad_tol: 1e-9,
        }
    }
}

impl Tolerances {
    /// Thresholds suited to `f32` arithmetic (roughly `√ε_f32` for
    /// residual-type tests).
    pub fn single_precision() -> Self {
        Self {
            sym_tol: 1e-5,
            pos_tol: 1e-4,
            range_tol: 1e-3,
            boundary_tol: 1e-6,
            eq_tol: 1e-4,
            pencil_tol: 1e-5,
            ker_tol: 1e-5,
            margin_tol: 1e-4,
            check_tol: 1e-3,
            stab_tol: 1e-5,
            stab_margin: 0.1,
            lyap_tol: 1e-3,
            quad_tol: 1e-5,
        }
    }
}
