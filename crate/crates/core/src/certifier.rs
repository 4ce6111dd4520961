//! Strict (pre-)dissipativity certificates with quadratic storage.
//!
//! For a symmetric `P` and a steady state `(x_e, u_e)` the problem is
//! strictly pre-dissipative with storage `V_{γP,w}` for some `γ > 0` iff
//!
//! * `(z + CᵀC x_e, v + KᵀK u_e) ∈ ran [Aᵀ; Bᵀ]` (algebraic condition), and
//! * `‖Cx‖² − 2η⟨Ax, Px⟩ ≥ m‖x‖²` for some `η, m > 0` (form inequality).
//!
//! [`certify_at`] follows the constructive direction: normalize `η = 1`,
//! pick `γ = ½·min(1, m c_K²/‖P‖²)`, take the dissipation rate
//! `α(t) = c t²` with `c = γ(m − γ‖P‖²/c_K²)` and the linear storage term
//! `w = w̃ − γP x_e`, where `w̃` solves the algebraic condition. The reduced
//! inequality
//!
//! ```text
//! 2⟨Ax + Bu, γPx⟩ ≤ ‖Cx‖² + ‖Ku‖² − c‖x‖²
//! ```
//!
//! is then verified exactly as positive semidefiniteness of one symmetric
//! block matrix.
//!
//! Conditioning: everything is dense and direct. Inputs with `‖A‖` beyond
//! roughly `1e12` lose the margins to rounding in `PA + AᵀP`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::ocp::{column_space, OcpError, OcpInstance, SteadyState};
use crate::scalar::Scalar;
use crate::spectral::{eig_sym, max_abs, null_space, range_inclusion_vec, SpectralError, SymmetricOperator};
use crate::steady_state::{solve_steady_state, SteadyStateError};
use crate::storage::QuadraticStorage;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("(x_e, u_e) is not a controlled equilibrium (residual {residual:e})")]
    NotSteadyState { residual: f64 },
    #[error("form inequality fails for every η tried (best margin {best_m:e} at η = {eta:e})")]
    FormInequalityFailed { best_m: f64, eta: f64 },
    #[error("algebraic condition fails: target not in ran[Aᵀ; Bᵀ] (residual {residual:e})")]
    AlgebraicConditionFailed { residual: f64 },
    #[error("compatibility ‖Ku‖ ≥ c_K‖Bu‖ with c_K > 0 fails (c_K = {c_k:e})")]
    CompatibilityFailed { c_k: f64 },
    #[error("internal verification failed: {what} ({value:e})")]
    InternalVerificationFailed { what: &'static str, value: f64 },
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Ocp(#[from] OcpError),
}

/// Margin of the form inequality for one `η`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormInequalityReport<T> {
    pub eta: T,
    /// `λ_min(CᵀC − η(PA + AᵀP))`; may be non-positive.
    pub m: T,
    pub holds: bool,
}

/// `λ_min(CᵀC − η(PA + AᵀP))`, the best `m` in
/// `‖Cx‖² − 2η⟨Ax,Px⟩ ≥ m‖x‖²`.
pub fn form_inequality_margin<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    p: &SymmetricOperator<T>,
    eta: T,
    tol: &Tolerances,
) -> Result<FormInequalityReport<T>, CertifyError> {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n || p.dim() != n {
        return Err(CertifyError::DimensionMismatch(format!(
            "A {}x{}, C {}x{}, P {}x{}",
            a.nrows(),
            a.ncols(),
            c.nrows(),
            c.ncols(),
            p.dim(),
            p.dim()
        )));
    }
    let ctc = c.transpose() * c;
    let pa = p.matrix() * a;
    let s = SymmetricOperator::symmetrize(&ctc - (&pa + pa.transpose()) * eta);
    let m = eig_sym(&s)?.min_eigenvalue();
    let margin_tol = T::lit(tol.margin_tol) * (T::one() + max_abs(&ctc) + max_abs(&pa));
    Ok(FormInequalityReport {
        eta,
        m,
        holds: m > margin_tol,
    })
}

/// Logarithmic grid `2⁻²⁰, 2⁻¹⁹, …, 2⁴`.
pub fn default_eta_grid<T: Scalar>() -> Vec<T> {
    (-20..=4).map(|k| T::lit(2f64.powi(k))).collect()
}

/// Maximizes `m(η)` over `eta_grid`, then refines by golden-section search
/// on the bracket around the best grid point.
///
/// `m(η)` is a minimum of functions affine in `η` and hence concave, so
/// the bracket around the best grid point contains the maximizer over the
/// grid's range.
pub fn best_eta<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    p: &SymmetricOperator<T>,
    eta_grid: &[T],
    tol: &Tolerances,
) -> Result<FormInequalityReport<T>, CertifyError> {
    assert!(!eta_grid.is_empty(), "best_eta: empty grid");
    let mut grid: Vec<T> = eta_grid.to_vec();
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    let reports = grid
        .iter()
        .map(|&eta| form_inequality_margin(a, c, p, eta, tol))
        .collect::<Result<Vec<_>, _>>()?;
    let (ib, best) = reports
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.m.partial_cmp(&y.1.m).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, r)| (i, *r))
        .expect("non-empty grid");
    if grid.len() < 2 {
        return Ok(best);
    }
    let mut lo = grid[ib.saturating_sub(1)];
    let mut hi = grid[(ib + 1).min(grid.len() - 1)];
    let ratio = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let mut best = best;
    let mut x1 = hi - (hi - lo) * ratio;
    let mut x2 = lo + (hi - lo) * ratio;
    let mut f1 = form_inequality_margin(a, c, p, x1, tol)?;
    let mut f2 = form_inequality_margin(a, c, p, x2, tol)?;
    for _ in 0..80 {
        if hi - lo <= T::lit(1e-12) * hi {
            break;
        }
        if f1.m >= f2.m {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - (hi - lo) * ratio;
            f1 = form_inequality_margin(a, c, p, x1, tol)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + (hi - lo) * ratio;
            f2 = form_inequality_margin(a, c, p, x2, tol)?;
        }
    }
    for r in [f1, f2] {
        if r.m > best.m {
            best = r;
        }
    }
    Ok(best)
}

/// Outcome of the algebraic condition test.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicCondition<T: Scalar> {
    pub holds: bool,
    /// Minimum-norm `w̃` with `Aᵀw̃ = z + CᵀC x_e`, `Bᵀw̃ = v + KᵀK u_e`.
    pub w_tilde: Option<DVector<T>>,
    pub residual: T,
    pub relative_residual: T,
}

/// `[Aᵀ; Bᵀ]`, the `(n+m) × n` adjoint of `[A B]`.
fn stacked_adjoint<T: Scalar>(ocp: &OcpInstance<T>) -> DMatrix<T> {
    ocp.stacked_dynamics().transpose()
}

pub fn algebraic_condition<T: Scalar>(
    ocp: &OcpInstance<T>,
    ss: &SteadyState<T>,
    tol: &Tolerances,
) -> AlgebraicCondition<T> {
    let (zx, vu) = ocp.shifted_linear_terms(ss);
    let target = SteadyState::new(zx, vu).stacked();
    let inc = range_inclusion_vec(&target, &stacked_adjoint(ocp), tol.range_tol);
    AlgebraicCondition {
        holds: inc.contained,
        w_tilde: inc.contained.then(|| inc.witness_vector()),
        residual: inc.residual,
        relative_residual: inc.relative_residual,
    }
}

/// Exact and sampled verification of the reduced dissipation inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedInequalityReport<T: Scalar> {
    /// Verdict of the exact eigenvalue test.
    pub holds: bool,
    /// `λ_min` of `[[CᵀC − PA − AᵀP − cI, −PB], [−BᵀP, KᵀK]]`.
    pub min_eigenvalue: T,
    pub tolerance: T,
    /// Largest sampled violation `max(0, −q(x,u)/‖(x,u)‖²)`.
    pub worst_violation: T,
    /// Sample attaining the smallest normalized value.
    pub witness: Option<(DVector<T>, DVector<T>)>,
    pub samples: usize,
}

/// Symmetric block matrix whose quadratic form is
/// `‖Cx‖² + ‖Ku‖² − 2⟨Ax+Bu, Px⟩ − c‖x‖²`.
pub fn reduced_block_matrix<T: Scalar>(
    ocp: &OcpInstance<T>,
    p: &SymmetricOperator<T>,
    alpha_c: T,
) -> SymmetricOperator<T> {
    let (n, m) = (ocp.n(), ocp.m());
    let pa = p.matrix() * ocp.a();
    let pb = p.matrix() * ocp.b();
    let top_left = ocp.c().transpose() * ocp.c() - &pa - pa.transpose() - DMatrix::identity(n, n) * alpha_c;
    let mut g = DMatrix::zeros(n + m, n + m);
    g.view_mut((0, 0), (n, n)).copy_from(&top_left);
    g.view_mut((0, n), (n, m)).copy_from(&(-&pb));
    g.view_mut((n, 0), (m, n)).copy_from(&(-pb.transpose()));
    g.view_mut((n, n), (m, m)).copy_from(&(ocp.k().transpose() * ocp.k()));
    SymmetricOperator::symmetrize(g)
}

fn reduced_form_value<T: Scalar>(
    ocp: &OcpInstance<T>,
    p: &SymmetricOperator<T>,
    alpha_c: T,
    x: &DVector<T>,
    u: &DVector<T>,
) -> T {
    let flow = ocp.a() * x + ocp.b() * u;
    (ocp.c() * x).norm_squared() + (ocp.k() * u).norm_squared()
        - T::two() * flow.dot(&(p.matrix() * x))
        - alpha_c * x.norm_squared()
}

pub fn reduced_inequality_check<T: Scalar>(
    ocp: &OcpInstance<T>,
    p: &SymmetricOperator<T>,
    alpha_c: T,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<ReducedInequalityReport<T>, CertifyError> {
    if p.dim() != ocp.n() {
        return Err(CertifyError::DimensionMismatch(format!(
            "P is {}x{}, expected {}",
            p.dim(),
            p.dim(),
            ocp.n()
        )));
    }
    let (n, m) = (ocp.n(), ocp.m());
    let g = reduced_block_matrix(ocp, p, alpha_c);
    let min_eigenvalue = eig_sym(&g)?.min_eigenvalue();
    let tolerance = T::lit(tol.check_tol) * (T::one() + g.max_abs());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii = [T::lit(0.1), T::one(), T::lit(10.0)];
    let mut lowest = T::max_value().unwrap();
    let mut witness = None;
    for i in 0..samples {
        let y = DVector::from_fn(n + m, |_, _| T::lit(StandardNormal.sample(&mut rng)));
        let norm = y.norm();
        if norm == T::zero() {
            continue;
        }
        let r = radii[i % radii.len()];
        let y = y * (r / norm);
        let x = y.rows(0, n).clone_owned();
        let u = y.rows(n, m).clone_owned();
        let value = reduced_form_value(ocp, p, alpha_c, &x, &u) / (r * r);
        if value < lowest {
            lowest = value;
            witness = Some((x, u));
        }
    }
    let worst_violation = if samples == 0 {
        T::zero()
    } else {
        (-lowest).max(T::zero())
    };
    Ok(ReducedInequalityReport {
        holds: min_eigenvalue >= -tolerance,
        min_eigenvalue,
        tolerance,
        worst_violation,
        witness,
        samples,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateKind {
    /// Storage function not bounded from below.
    StrictPreDissipative,
    /// Storage function bounded from below.
    StrictDissipative,
}

/// One line of the certificate checklist.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRecord {
    pub name: &'static str,
    pub passed: bool,
    /// Residual, margin or bound relevant to the condition.
    pub value: f64,
    pub detail: String,
}

impl ConditionRecord {
    fn new(name: &'static str, passed: bool, value: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            value,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipativityCertificate<T: Scalar> {
    pub kind: CertificateKind,
    pub ss: SteadyState<T>,
    /// Final storage `V_{γηP, w}`.
    pub storage: QuadraticStorage<T>,
    pub gamma: T,
    /// Scaling applied to the input `P` so that the form inequality holds
    /// with `η = 1`.
    pub eta: T,
    /// Form-inequality margin of `ηP` at `η = 1`.
    pub m: T,
    /// Dissipation rate `α(t) = alpha_c · t²`.
    pub alpha_c: T,
    /// Solution of the algebraic condition used for `w = w̃ − γηP x_e`.
    pub w_tilde: DVector<T>,
    /// `None` encodes `c_K = ∞`.
    pub c_k: Option<T>,
    /// Lower bound of the storage when it is bounded from below.
    pub lower_bound: Option<T>,
    pub diagnostics: Vec<ConditionRecord>,
}

impl<T: Scalar> DissipativityCertificate<T> {
    /// `α(s) = alpha_c · s²`.
    pub fn dissipation_rate(&self, s: T) -> T {
        self.alpha_c * s * s
    }

    /// `V′(x)(Ax+Bu) − (ℓ(x,u) − ℓ(x_e,u_e) − α(‖x − x_e‖))`, non-positive
    /// wherever the dissipation inequality holds.
    pub fn pointwise_gap(&self, ocp: &OcpInstance<T>, x: &DVector<T>, u: &DVector<T>) -> T {
        let flow = ocp.a() * x + ocp.b() * u;
        let lhs = self.storage.derivative_pairing(x, &flow);
        let supply = ocp.cost(x, u) - ocp.cost(&self.ss.x_e, &self.ss.u_e);
        lhs - (supply - self.dissipation_rate((x - &self.ss.x_e).norm()))
    }

    /// `(‖Aᵀw̃ − (z + CᵀC x_e)‖, ‖Bᵀw̃ − (v + KᵀK u_e)‖)`, computed from the
    /// final storage as `w̃ = w + γηP x_e`.
    pub fn algebraic_residuals(&self, ocp: &OcpInstance<T>) -> (T, T) {
        let wt = &self.storage.w + self.storage.p.matrix() * &self.ss.x_e;
        let (zx, vu) = ocp.shifted_linear_terms(&self.ss);
        (
            (ocp.a().transpose() * &wt - zx).norm(),
            (ocp.b().transpose() * &wt - vu).norm(),
        )
    }

    pub fn is_strictly_dissipative(&self) -> bool {
        self.kind == CertificateKind::StrictDissipative
    }
}

/// Configuration of the certification pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct CertifyOptions {
    pub tol: Tolerances,
    pub eta_grid: Vec<f64>,
    /// Random samples drawn by the reduced-inequality check.
    pub samples: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            eta_grid: default_eta_grid::<f64>(),
            samples: 300,
            seed: 42,
        }
    }
}

/// Certifies strict (pre-)dissipativity at a given steady state with a
/// storage of the form `V_{γP,w}`.
///
/// `η = 1` is tried first; only when the form inequality fails there is
/// `η` searched over `opts.eta_grid`, and `P` is rescaled to `ηP`.
pub fn certify_at<T: Scalar>(
    ocp: &OcpInstance<T>,
    ss: &SteadyState<T>,
    p: &SymmetricOperator<T>,
    opts: &CertifyOptions,
) -> Result<DissipativityCertificate<T>, CertifyError> {
    let tol = &opts.tol;
    if p.dim() != ocp.n() || ss.x_e.len() != ocp.n() || ss.u_e.len() != ocp.m() {
        return Err(CertifyError::DimensionMismatch(format!(
            "P {}x{}, x_e {}, u_e {} for n = {}, m = {}",
            p.dim(),
            p.dim(),
            ss.x_e.len(),
            ss.u_e.len(),
            ocp.n(),
            ocp.m()
        )));
    }
    let mut diagnostics = Vec::new();

    let eq_res = ocp.equilibrium_residual(ss)?;
    if !ocp.is_steady_state(ss, tol)? {
        return Err(CertifyError::NotSteadyState {
            residual: eq_res.as_f64(),
        });
    }
    diagnostics.push(ConditionRecord::new("steady-state", true, eq_res.as_f64(), "‖A x_e + B u_e‖"));

    // Form inequality, normalized to η = 1.
    let mut form = form_inequality_margin(ocp.a(), ocp.c(), p, T::one(), tol)?;
    if !form.holds {
        let grid: Vec<T> = opts.eta_grid.iter().map(|&e| T::lit(e)).collect();
        let best = best_eta(ocp.a(), ocp.c(), p, &grid, tol)?;
        if !best.holds {
            return Err(CertifyError::FormInequalityFailed {
                best_m: best.m.as_f64(),
                eta: best.eta.as_f64(),
            });
        }
        form = best;
    }
    let eta = form.eta;
    let m = form.m;
    let p_eta = p.scaled(eta);
    diagnostics.push(ConditionRecord::new(
        "form-inequality",
        true,
        m.as_f64(),
        format!("m = λ_min(CᵀC − η(PA + AᵀP)) at η = {:e}", eta.as_f64()),
    ));

    let alg = algebraic_condition(ocp, ss, tol);
    let Some(w_tilde) = alg.w_tilde.clone() else {
        return Err(CertifyError::AlgebraicConditionFailed {
            residual: alg.residual.as_f64(),
        });
    };
    diagnostics.push(ConditionRecord::new(
        "algebraic-condition",
        true,
        alg.residual.as_f64(),
        "‖[Aᵀ; Bᵀ] w̃ − (z + CᵀC x_e, v + KᵀK u_e)‖",
    ));

    let compat = ocp.compatibility_constant(tol)?;
    if !compat.holds {
        return Err(CertifyError::CompatibilityFailed {
            c_k: compat.c_k.map_or(f64::INFINITY, |c| c.as_f64()),
        });
    }
    diagnostics.push(ConditionRecord::new(
        "compatibility",
        true,
        compat.c_k.map_or(f64::INFINITY, |c| c.as_f64()),
        "c_K in ‖Ku‖ ≥ c_K‖Bu‖",
    ));

    let p_norm = eig_sym(&p_eta)?
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, &l| acc.max(l.abs()));
    let inv_ck2 = compat.inverse_square();
    let half = T::half();
    let gamma = if p_norm == T::zero() || inv_ck2 == T::zero() {
        half
    } else {
        half * T::one().min(m / (p_norm * p_norm * inv_ck2))
    };
    let alpha_c = gamma * (m - gamma * p_norm * p_norm * inv_ck2);
    if !(alpha_c > T::zero()) {
        return Err(CertifyError::InternalVerificationFailed {
            what: "dissipation constant is not positive",
            value: alpha_c.as_f64(),
        });
    }

    let p_final = p_eta.scaled(gamma);
    let reduced = reduced_inequality_check(ocp, &p_final, alpha_c, opts.samples, opts.seed, tol)?;
    if !reduced.holds {
        return Err(CertifyError::InternalVerificationFailed {
            what: "exact reduced inequality test",
            value: reduced.min_eigenvalue.as_f64(),
        });
    }
    diagnostics.push(ConditionRecord::new(
        "reduced-inequality",
        true,
        reduced.min_eigenvalue.as_f64(),
        format!(
            "λ_min of the reduced block matrix; worst sampled violation {:e}",
            reduced.worst_violation.as_f64()
        ),
    ));

    let mut w_tilde = w_tilde;
    let mut storage = QuadraticStorage::new(p_final.clone(), &w_tilde - p_final.matrix() * &ss.x_e);
    let mut bounded = storage.bounded_below(tol)?;
    if !bounded.bounded {
        if let Some(alt) = witness_in_storage_range(ocp, &p_final, &w_tilde, tol) {
            let candidate = QuadraticStorage::new(p_final.clone(), &alt - p_final.matrix() * &ss.x_e);
            let check = candidate.bounded_below(tol)?;
            if check.bounded {
                w_tilde = alt;
                storage = candidate;
                bounded = check;
            }
        }
    }
    diagnostics.push(ConditionRecord::new(
        "bounded-below",
        bounded.bounded,
        bounded.lower_bound.map_or(f64::NEG_INFINITY, |b| b.as_f64()),
        if bounded.routes_agree {
            "storage lower bound"
        } else {
            "storage lower bound (ran P and ran P^1/2 tests disagreed)"
        },
    ));

    Ok(DissipativityCertificate {
        kind: if bounded.bounded {
            CertificateKind::StrictDissipative
        } else {
            CertificateKind::StrictPreDissipative
        },
        ss: ss.clone(),
        storage,
        gamma,
        eta,
        m,
        alpha_c,
        w_tilde,
        c_k: compat.c_k,
        lower_bound: bounded.lower_bound,
        diagnostics,
    })
}

/// Searches the affine set of algebraic-condition solutions
/// `w̃ + ker[Aᵀ; Bᵀ]` for an element of `ran P`, which makes the storage
/// bounded from below when `P ⪰ 0`.
fn witness_in_storage_range<T: Scalar>(
    ocp: &OcpInstance<T>,
    p: &SymmetricOperator<T>,
    w_tilde: &DVector<T>,
    tol: &Tolerances,
) -> Option<DVector<T>> {
    let free = null_space(&stacked_adjoint(ocp), tol.ker_tol);
    if free.ncols() == 0 {
        return None;
    }
    let range = column_space(p.matrix(), tol.ker_tol);
    let n = ocp.n();
    let mut joint = DMatrix::zeros(n, range.ncols() + free.ncols());
    joint.view_mut((0, 0), (n, range.ncols())).copy_from(&range);
    joint.view_mut((0, range.ncols()), (n, free.ncols())).copy_from(&free);
    let inc = range_inclusion_vec(w_tilde, &joint, tol.range_tol);
    if !inc.contained {
        return None;
    }
    let coeffs = inc.witness_vector();
    let shift = &free * coeffs.rows(range.ncols(), free.ncols());
    Some(w_tilde - shift)
}

/// Certifies at the optimal steady state, which always satisfies the
/// algebraic condition when it exists.
pub fn certify_some<T: Scalar>(
    ocp: &OcpInstance<T>,
    p: &SymmetricOperator<T>,
    opts: &CertifyOptions,
) -> Result<DissipativityCertificate<T>, CertifyError> {
    let compat = ocp.compatibility_constant(&opts.tol)?;
    if !compat.holds {
        return Err(CertifyError::CompatibilityFailed {
            c_k: compat.c_k.map_or(f64::INFINITY, |c| c.as_f64()),
        });
    }
    let sol = solve_steady_state(ocp, &opts.tol)?;
    let alg = algebraic_condition(ocp, &sol.ss, &opts.tol);
    if !alg.holds {
        return Err(CertifyError::InternalVerificationFailed {
            what: "optimal steady state violates the algebraic condition",
            value: alg.relative_residual.as_f64(),
        });
    }
    certify_at(ocp, &sol.ss, p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m1(x: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, x)
    }
    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }
    fn s1(x: f64) -> SymmetricOperator<f64> {
        SymmetricOperator::from_diagonal(&[x])
    }
    fn scalar_example() -> OcpInstance<f64> {
        OcpInstance::new_deferred(m1(-1.0), m1(1.0), m1(1.0), m1(1.0), v1(-1.0), v1(0.0)).unwrap()
    }

    #[test]
    fn form_margin_examples() {
        let tol = Tolerances::default();
        let r = form_inequality_margin(&m1(-1.0), &m1(1.0), &s1(0.5), 1.0, &tol).unwrap();
        assert_abs_diff_eq!(r.m, 2.0, epsilon = 1e-14);
        assert!(r.holds);
        let r = form_inequality_margin(&m1(0.0), &m1(0.0), &s1(3.0), 1.0, &tol).unwrap();
        assert_eq!(r.m, 0.0);
        assert!(!r.holds);
        let r = form_inequality_margin(&m1(1.0), &m1(1.0), &s1(0.25), 1.0, &tol).unwrap();
        assert_abs_diff_eq!(r.m, 0.5, epsilon = 1e-14);
        assert!(r.holds);
    }

    #[test]
    fn best_eta_examples() {
        let tol = Tolerances::default();
        let grid = default_eta_grid::<f64>();
        // m(η) = η: maximal at the top of the grid.
        let r = best_eta(&m1(-1.0), &m1(0.0), &s1(0.5), &grid, &tol).unwrap();
        assert_abs_diff_eq!(r.eta, 16.0, epsilon = 1e-9);
        assert_abs_diff_eq!(r.m, 16.0, epsilon = 1e-9);
        // m(η) = 1 − η/2: maximal at the bottom.
        let r = best_eta(&m1(1.0), &m1(1.0), &s1(0.25), &grid, &tol).unwrap();
        assert!(r.eta <= 2f64.powi(-20) * (1.0 + 1e-9));
        assert!(r.m > 1.0 - 1e-6 && r.m < 1.0);
        let r = best_eta(&m1(1.0), &m1(0.0), &s1(0.0), &grid, &tol).unwrap();
        assert_eq!(r.m, 0.0);
        assert!(!r.holds);
    }

    #[test]
    fn best_eta_interior_maximum() {
        // 2×2 decoupled: m(η) = min(1 − η, 2η) peaks at η = 1/3 with m = 2/3.
        let tol = Tolerances::default();
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let p = SymmetricOperator::from_diagonal(&[0.5, 1.0]);
        let r = best_eta(&a, &c, &p, &default_eta_grid::<f64>(), &tol).unwrap();
        assert_abs_diff_eq!(r.eta, 1.0 / 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(r.m, 2.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn algebraic_condition_examples() {
        let tol = Tolerances::default();
        let ocp = scalar_example();
        let r = algebraic_condition(&ocp, &SteadyState::new(v1(0.5), v1(0.5)), &tol);
        assert!(r.holds);
        assert_abs_diff_eq!(r.w_tilde.unwrap()[0], 0.5, epsilon = 1e-14);

        let zero_lin = ocp.with_linear_terms(v1(0.0), v1(0.0)).unwrap();
        let r = algebraic_condition(&zero_lin, &SteadyState::origin(1, 1), &tol);
        assert!(r.holds);
        assert_eq!(r.w_tilde.unwrap()[0], 0.0);

        let dead = OcpInstance::new_deferred(m1(0.0), m1(0.0), m1(1.0), m1(1.0), v1(1.0), v1(0.0)).unwrap();
        let r = algebraic_condition(&dead, &SteadyState::origin(1, 1), &tol);
        assert!(!r.holds);
        assert_abs_diff_eq!(r.residual, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn reduced_inequality_examples() {
        let tol = Tolerances::default();
        let ocp = scalar_example();
        // Block matrix [[1.5 − c, −1/4], [−1/4, 1]] is PSD iff c ≤ 1.4375.
        let r = reduced_inequality_check(&ocp, &s1(0.25), 0.9375, 200, 1, &tol).unwrap();
        assert!(r.holds);
        assert_eq!(r.worst_violation, 0.0);
        assert!(reduced_inequality_check(&ocp, &s1(0.25), 1.43, 200, 1, &tol).unwrap().holds);
        let r = reduced_inequality_check(&ocp, &s1(0.25), 1.45, 2000, 1, &tol).unwrap();
        assert!(!r.holds);
        assert!(r.worst_violation > 0.0);

        // P = 0, C = I, K = I, c = 1: block diag(0, I), equality along x.
        let a = DMatrix::from_row_slice(2, 2, &[0.3, -2.0, 1.0, 0.7]);
        let ocp2 = OcpInstance::new_deferred(
            a,
            DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
            DMatrix::identity(2, 2),
            m1(1.0),
            DVector::zeros(2),
            v1(0.0),
        )
        .unwrap();
        let r = reduced_inequality_check(&ocp2, &SymmetricOperator::zeros(2), 1.0, 300, 2, &tol).unwrap();
        assert!(r.holds);
        assert_abs_diff_eq!(r.min_eigenvalue, 0.0, epsilon = 1e-14);
        assert!(r.worst_violation <= 1e-14);

        let r = reduced_inequality_check(&ocp, &s1(0.25), 1e6, 30, 3, &tol).unwrap();
        assert!(!r.holds);
    }

    #[test]
    fn worked_certificate() {
        let ocp = scalar_example();
        let ss = SteadyState::new(v1(0.5), v1(0.5));
        let cert = certify_at(&ocp, &ss, &s1(0.5), &CertifyOptions::default()).unwrap();
        assert_eq!(cert.eta, 1.0);
        assert_abs_diff_eq!(cert.m, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.gamma, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.alpha_c, 0.9375, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.w_tilde[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.storage.w[0], 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.storage.p.matrix()[(0, 0)], 0.25, epsilon = 1e-12);
        assert_eq!(cert.kind, CertificateKind::StrictDissipative);
        let (rx, ru) = cert.algebraic_residuals(&ocp);
        assert!(rx < 1e-12 && ru < 1e-12);
        assert!(cert.diagnostics.iter().all(|d| d.passed));
    }

    #[test]
    fn certificate_without_linear_terms() {
        let ocp = scalar_example().with_linear_terms(v1(0.0), v1(0.0)).unwrap();
        let cert = certify_at(&ocp, &SteadyState::origin(1, 1), &s1(0.5), &CertifyOptions::default()).unwrap();
        assert_eq!(cert.w_tilde[0], 0.0);
        assert_eq!(cert.storage.w[0], 0.0);
        assert!(cert.is_strictly_dissipative());
    }

    #[test]
    fn certify_failures() {
        let opts = CertifyOptions::default();
        let flat = OcpInstance::new_deferred(m1(0.0), m1(1.0), m1(0.0), m1(1.0), v1(0.0), v1(0.0)).unwrap();
        let r = certify_at(&flat, &SteadyState::origin(1, 1), &s1(1.0), &opts);
        assert!(matches!(r, Err(CertifyError::FormInequalityFailed { best_m, .. }) if best_m == 0.0));

        let ocp = scalar_example();
        let r = certify_at(&ocp, &SteadyState::new(v1(1.0), v1(0.5)), &s1(0.5), &opts);
        assert!(matches!(r, Err(CertifyError::NotSteadyState { .. })));

        // At the origin the target (−1, 0) is not a multiple of (−1, 1).
        let r = certify_at(&ocp, &SteadyState::origin(1, 1), &s1(0.5), &opts);
        assert!(matches!(r, Err(CertifyError::AlgebraicConditionFailed { .. })));
    }

    #[test]
    fn certify_some_finds_optimal_steady_state() {
        let cert = certify_some(&scalar_example(), &s1(0.5), &CertifyOptions::default()).unwrap();
        assert_abs_diff_eq!(cert.ss.x_e[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.ss.u_e[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(cert.alpha_c, 0.9375, epsilon = 1e-12);
    }

    #[test]
    fn eta_search_rescales_storage() {
        // Unstable scalar with P = 1: m(1) = 1 − 2 < 0, m(η) = 1 − 2η.
        let ocp = OcpInstance::new_deferred(m1(1.0), m1(1.0), m1(1.0), m1(1.0), v1(0.0), v1(0.0)).unwrap();
        let cert = certify_at(&ocp, &SteadyState::origin(1, 1), &s1(1.0), &CertifyOptions::default()).unwrap();
        assert!(cert.eta < 0.5);
        let f = form_inequality_margin(ocp.a(), ocp.c(), &cert.storage.p, 1.0, &Tolerances::default()).unwrap();
        assert!(f.m >= cert.alpha_c);
    }

    #[test]
    fn indefinite_storage_is_only_pre_dissipative() {
        // A = diag(-1, 1), C = I, P = diag(1/2, -1/2): form margin 2 on both modes.
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0]));
        let ocp = OcpInstance::new_deferred(
            a,
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::identity(2, 2),
            m1(1.0),
            DVector::zeros(2),
            v1(0.0),
        )
        .unwrap();
        let p = SymmetricOperator::from_diagonal(&[0.5, -0.5]);
        let cert = certify_at(&ocp, &SteadyState::origin(2, 1), &p, &CertifyOptions::default()).unwrap();
        assert_eq!(cert.kind, CertificateKind::StrictPreDissipative);
        assert!(cert.lower_bound.is_none());
    }

    #[test]
    fn alternative_witness_restores_boundedness() {
        // A = 0, B = (1, 1)ᵀ, v = 1: the solutions of Bᵀw̃ = 1 form a line.
        let ocp = OcpInstance::new_deferred(
            DMatrix::zeros(2, 2),
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DMatrix::identity(2, 2),
            m1(1.0),
            DVector::zeros(2),
            v1(1.0),
        )
        .unwrap();
        // Minimum-norm w̃ = (1/2, 1/2) ∉ ran diag(1, 0); (1, 0) also solves Bᵀw̃ = 1.
        let p = SymmetricOperator::from_diagonal(&[1.0, 0.0]);
        let tol = Tolerances::default();
        let w = witness_in_storage_range(&ocp, &p, &DVector::from_vec(vec![0.5, 0.5]), &tol).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.0, epsilon = 1e-12);
    }
}
