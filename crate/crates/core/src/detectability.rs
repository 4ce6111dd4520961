//! Exponential stability, detectability and storage synthesis.
//!
//! A detectable pair `(A, C)` admits a detector `F` with `A + FC` stable.
//! With `P` solving `(A+FC)ᵀP + P(A+FC) = −I` and `K_F = PF`, the
//! operator
//!
//! ```text
//! T(η) = CᵀC + η(CᵀK_Fᵀ + K_F C) + ηI
//! ```
//!
//! is exactly the form `x ↦ ‖Cx‖² − 2η⟨Ax, Px⟩`, so `λ_min(T(η)) > 0`
//! certifies the form inequality for `P`. Conversely a form inequality with
//! `ran Cᵀ ⊆ ran P` yields the detector `F = −½P⁺Cᵀ`.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;
use crate::spectral::{
    classify, eig_sym, max_abs, pinv_sym, range_inclusion, spectral_norm, PositivityClass, SpectralError,
    SymmetricOperator,
};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectabilityError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("A is not exponentially stable (spectral abscissa {abscissa:e})")]
    NotStable { abscissa: f64 },
    #[error("(A, C) is not detectable: mode {re:e} + {im:e}i is unobserved")]
    NotDetectable { re: f64, im: f64 },
    #[error("Lyapunov equation is singular: A and −A share an eigenvalue")]
    SingularLyapunov,
    #[error("Lyapunov solution is not positive definite (λ_min = {min_eig:e})")]
    NotPositive { min_eig: f64 },
    #[error("Riccati solve failed: {0}")]
    RiccatiFailed(&'static str),
    #[error("supplied detector does not stabilize A + FC (abscissa {abscissa:e})")]
    NotStabilizing { abscissa: f64 },
    #[error("η halving exhausted after {halvings} steps (λ_min(T) = {min_eig:e})")]
    BisectionExhausted { halvings: usize, min_eig: f64 },
    #[error("ran Cᵀ is not contained in ran P (relative residual {residual:e})")]
    RangeConditionFailed { residual: f64 },
    #[error("form inequality precondition fails: margin {margin:e} < m = {m:e}")]
    PreconditionFailed { margin: f64, m: f64 },
    #[error("P is not positive semidefinite (λ_min = {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("inequality 2⟨Ax,Px⟩ ≤ −c‖x‖² holds but A has spectral abscissa {abscissa:e}")]
    InconsistentStability { abscissa: f64 },
    #[error("internal verification failed: {what} ({value:e})")]
    InternalVerificationFailed { what: &'static str, value: f64 },
    #[error("eigenvalue computation did not converge")]
    ConvergenceFailure,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn require_square<T: Scalar>(a: &DMatrix<T>) -> Result<usize, DetectabilityError> {
    if a.nrows() != a.ncols() {
        return Err(DetectabilityError::DimensionMismatch(format!(
            "A is {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(a.nrows())
}

fn require_output<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<usize, DetectabilityError> {
    let n = require_square(a)?;
    if c.ncols() != n {
        return Err(DetectabilityError::DimensionMismatch(format!(
            "C has {} columns, A is {n}x{n}",
            c.ncols()
        )));
    }
    Ok(n)
}

fn real_schur<T: Scalar>(a: &DMatrix<T>) -> Result<Schur<T, nalgebra::Dyn>, DetectabilityError> {
    let n = a.nrows();
    Schur::try_new(a.clone(), T::eps(), 1000 * n.max(1)).ok_or(DetectabilityError::ConvergenceFailure)
}

/// Eigenvalues of a square real matrix.
pub fn eigenvalues<T: Scalar>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>, DetectabilityError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    Ok(real_schur(a)?.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part of the spectrum, `−∞` for the empty matrix.
pub fn spectral_abscissa<T: Scalar>(a: &DMatrix<T>) -> Result<T, DetectabilityError> {
    Ok(eigenvalues(a)?
        .iter()
        .fold(-T::max_value().unwrap(), |acc, l| acc.max(l.re)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport<T> {
    pub stable: bool,
    pub spectral_abscissa: T,
}

pub fn is_exponentially_stable<T: Scalar>(a: &DMatrix<T>, tol: &Tolerances) -> Result<StabilityReport<T>, DetectabilityError> {
    let abscissa = spectral_abscissa(a)?;
    Ok(StabilityReport {
        stable: abscissa < -T::lit(tol.stab_tol),
        spectral_abscissa: abscissa,
    })
}

/// Diagonal blocks of a quasi-triangular matrix: maximal runs joined by
/// non-zero subdiagonal entries.
fn diagonal_blocks<T: Scalar>(t: &DMatrix<T>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut start = 0;
    for i in 0..n {
        if i + 1 == n || t[(i + 1, i)] == T::zero() {
            blocks.push((start, i + 1 - start));
            start = i + 1;
        }
    }
    blocks
}

/// Solves `AᵀP + PA = −I` by reduction to real Schur form, without any
/// stability precondition. The solution is unique iff no two eigenvalues
/// of `A` sum to zero; it is positive definite iff `A` is stable.
pub fn lyapunov_solve_raw<T: Scalar>(a: &DMatrix<T>) -> Result<DMatrix<T>, DetectabilityError> {
    let n = require_square(a)?;
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (q, t) = real_schur(a)?.unpack();
    let blocks = diagonal_blocks(&t);
    // Tᵀ Y + Y T = −I, solved block by block in row-major order.
    let mut y = DMatrix::<T>::zeros(n, n);
    for &(ri, bi) in &blocks {
        for &(cj, bj) in &blocks {
            let mut rhs = DMatrix::<T>::zeros(bi, bj);
            if ri == cj {
                rhs.fill_with_identity();
                rhs = -rhs;
            }
            if ri > 0 {
                rhs -= t.view((0, ri), (ri, bi)).transpose() * y.view((0, cj), (ri, bj));
            }
            if cj > 0 {
                rhs -= y.view((ri, 0), (bi, cj)) * t.view((0, cj), (cj, bj));
            }
            let tii = t.view((ri, ri), (bi, bi));
            let tjj = t.view((cj, cj), (bj, bj));
            // Column-major vec: (I ⊗ T_iiᵀ + T_jjᵀ ⊗ I) vec(Y).
            let size = bi * bj;
            let mut kron = DMatrix::<T>::zeros(size, size);
            for col in 0..bj {
                for row in 0..bi {
                    let r = col * bi + row;
                    for k in 0..bi {
                        kron[(r, col * bi + k)] += tii[(k, row)];
                    }
                    for l in 0..bj {
                        kron[(r, l * bi + row)] += tjj[(l, col)];
                    }
                }
            }
            let vec_rhs = DVector::from_column_slice(rhs.as_slice());
            let sol = kron.lu().solve(&vec_rhs).ok_or(DetectabilityError::SingularLyapunov)?;
            if !sol.iter().all(|v| v.is_finite_value()) {
                return Err(DetectabilityError::SingularLyapunov);
            }
            y.view_mut((ri, cj), (bi, bj))
                .copy_from(&DMatrix::from_column_slice(bi, bj, sol.as_slice()));
        }
    }
    let p = &q * y * q.transpose();
    Ok((&p + p.transpose()) * T::half())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution<T: Scalar> {
    pub p: SymmetricOperator<T>,
    /// `‖AᵀP + PA + I‖_max`.
    pub residual: T,
}

pub fn lyapunov_residual<T: Scalar>(a: &DMatrix<T>, p: &DMatrix<T>) -> T {
    let n = a.nrows();
    max_abs(&(a.transpose() * p + p * a + DMatrix::identity(n, n)))
}

/// The unique `P ≻ 0` with `AᵀP + PA = −I` for stable `A`.
pub fn solve_lyapunov<T: Scalar>(a: &DMatrix<T>, tol: &Tolerances) -> Result<LyapunovSolution<T>, DetectabilityError> {
    let report = is_exponentially_stable(a, tol)?;
    if !report.stable {
        return Err(DetectabilityError::NotStable {
            abscissa: report.spectral_abscissa.as_f64(),
        });
    }
    let p = SymmetricOperator::symmetrize(lyapunov_solve_raw(a)?);
    let residual = lyapunov_residual(a, p.matrix());
    let n = a.nrows();
    let scale = T::one() + max_abs(a) * p.max_abs();
    if residual > T::lit(tol.lyap_tol * n.max(1) as f64) * scale {
        return Err(DetectabilityError::InternalVerificationFailed {
            what: "Lyapunov residual",
            value: residual.as_f64(),
        });
    }
    if let PositivityClass::StrictlyPositive { .. } = classify(&p, T::zero())? {
        Ok(LyapunovSolution { p, residual })
    } else {
        Err(DetectabilityError::NotPositive {
            min_eig: eig_sym(&p)?.min_eigenvalue().as_f64(),
        })
    }
}

/// Tolerance used for `λ_max(AᵀP + PA + cI) ≤ 0`.
fn inequality_slack<T: Scalar>(a: &DMatrix<T>, p: &SymmetricOperator<T>, c: T, tol: &Tolerances) -> T {
    T::lit(tol.lyap_tol) * (T::one() + max_abs(&(p.matrix() * a)) + c)
}

/// Whether `2⟨Ax, Px⟩ ≤ −c‖x‖²` for all `x`. When it holds, stability of
/// `A` is asserted; a stable verdict contradicting the inequality is
/// reported as [`DetectabilityError::InconsistentStability`].
pub fn stability_from_inequality<T: Scalar>(
    a: &DMatrix<T>,
    p: &SymmetricOperator<T>,
    c: T,
    tol: &Tolerances,
) -> Result<bool, DetectabilityError> {
    let n = require_square(a)?;
    if p.dim() != n {
        return Err(DetectabilityError::DimensionMismatch(format!(
            "P is {}x{}, A is {n}x{n}",
            p.dim(),
            p.dim()
        )));
    }
    let d = eig_sym(p)?;
    if d.min_eigenvalue() < -p.pos_tol(tol) {
        return Err(DetectabilityError::NotPsd {
            min_eig: d.min_eigenvalue().as_f64(),
        });
    }
    let pa = p.matrix() * a;
    let m = SymmetricOperator::symmetrize(&pa + pa.transpose() + DMatrix::identity(n, n) * c);
    let slack = inequality_slack(a, p, c, tol);
    if c <= T::two() * slack || eig_sym(&m)?.max_eigenvalue() > slack {
        return Ok(false);
    }
    let report = is_exponentially_stable(a, tol)?;
    if !report.stable {
        return Err(DetectabilityError::InconsistentStability {
            abscissa: report.spectral_abscissa.as_f64(),
        });
    }
    Ok(true)
}

/// Bound `−c / (2λ_max(P))` on the spectral abscissa implied by
/// `2⟨Ax, Px⟩ ≤ −c‖x‖²`.
pub fn inequality_abscissa_bound<T: Scalar>(p: &SymmetricOperator<T>, c: T) -> Result<T, DetectabilityError> {
    let lmax = eig_sym(p)?.max_eigenvalue();
    Ok(-c / (T::two() * lmax))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HautusReport<T: Scalar> {
    pub detectable: bool,
    /// Unobserved mode with the largest real part among those violating the
    /// test.
    pub worst_mode: Option<Complex<T>>,
    /// Every eigenvalue at which `[λI − A; C]` loses rank, stable or not.
    pub unobservable_modes: Vec<Complex<T>>,
}

fn complex_rank_deficient<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>, lambda: Complex<T>) -> bool {
    let n = a.nrows();
    let p = c.nrows();
    let mut stacked = DMatrix::<Complex<T>>::zeros(n + p, n);
    for i in 0..n {
        for j in 0..n {
            let diag = if i == j { lambda } else { Complex::new(T::zero(), T::zero()) };
            stacked[(i, j)] = diag - Complex::new(a[(i, j)], T::zero());
        }
    }
    for i in 0..p {
        for j in 0..n {
            stacked[(n + i, j)] = Complex::new(c[(i, j)], T::zero());
        }
    }
    let sv = stacked.svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |acc, &s| acc.max(s));
    let cutoff = T::lit(1e-10) * smax;
    sv.iter().filter(|&&s| s > cutoff).count() < n
}

/// Hautus test: `[λI − A; C]` has full column rank at every eigenvalue
/// with `Re λ ≥ −stab_tol`.
pub fn hautus_detectable<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>, tol: &Tolerances) -> Result<HautusReport<T>, DetectabilityError> {
    require_output(a, c)?;
    let unobservable_modes: Vec<_> = eigenvalues(a)?
        .into_iter()
        .filter(|&l| complex_rank_deficient(a, c, l))
        .collect();
    let worst_mode = unobservable_modes
        .iter()
        .copied()
        .filter(|l| l.re >= -T::lit(tol.stab_tol))
        .max_by(|x, y| x.re.partial_cmp(&y.re).unwrap_or(std::cmp::Ordering::Equal));
    Ok(HautusReport {
        detectable: worst_mode.is_none(),
        worst_mode,
        unobservable_modes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSynthesis<T: Scalar> {
    /// Output injection, `n × p`.
    pub f: DMatrix<T>,
    /// Spectral abscissa of `A + FC`.
    pub stabilized_spectrum_bound: T,
}

/// Matrix sign function by scaled Newton iteration.
fn matrix_sign<T: Scalar>(h: &DMatrix<T>) -> Option<DMatrix<T>> {
    let size = h.nrows();
    let mut z = h.clone();
    for _ in 0..100 {
        let lu = z.clone().lu();
        let log_det = lu
            .u()
            .diagonal()
            .iter()
            .fold(T::zero(), |acc, d| acc + d.abs().ln());
        let scale = (-log_det / T::lit(size as f64)).exp();
        let inv = lu.try_inverse()?;
        let next = (&z * scale + inv * (T::one() / scale)) * T::half();
        let change = (&next - &z).abs().column_sum().max();
        let size_z = next.abs().column_sum().max();
        z = next;
        if !z.iter().all(|v| v.is_finite_value()) {
            return None;
        }
        if change <= T::lit(1e-12) * size_z {
            return Some(z);
        }
    }
    None
}

/// Stabilizing solution of `A X + X Aᵀ − X CᵀC X + I = 0`.
fn filter_riccati<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let g = c.transpose() * c;
    let mut h = DMatrix::<T>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a.transpose());
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-DMatrix::<T>::identity(n, n)));
    h.view_mut((n, n), (n, n)).copy_from(&(-a));
    let w = matrix_sign(&h)?;
    let id = DMatrix::<T>::identity(n, n);
    let mut lhs = DMatrix::<T>::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(w.view((n, n), (n, n)) + &id));
    let mut rhs = DMatrix::<T>::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(w.view((0, 0), (n, n)) + &id));
    rhs.view_mut((n, 0), (n, n)).copy_from(&w.view((n, 0), (n, n)));
    let x = lhs.svd(true, true).solve(&(-rhs), T::eps()).ok()?;
    let x = (&x + x.transpose()) * T::half();
    x.iter().all(|v| v.is_finite_value()).then_some(x)
}

fn detector_with_shift<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>, shift: T) -> Option<DetectorSynthesis<T>> {
    let n = a.nrows();
    let shifted = a + DMatrix::identity(n, n) * shift;
    let x = filter_riccati(&shifted, c)?;
    let f = -(x * c.transpose());
    let abscissa = spectral_abscissa(&(a + &f * c)).ok()?;
    (abscissa < -shift * T::lit(0.5) && abscissa < T::zero()).then_some(DetectorSynthesis {
        f,
        stabilized_spectrum_bound: abscissa,
    })
}

/// Output injection `F` with `A + FC` stable, from the dual filter Riccati
/// equation of `A + σI`.
///
/// `σ = stab_margin`, reduced to half the decay rate of the slowest stable
/// unobserved mode when that mode is slower than `stab_margin`: no
/// injection can move it.
pub fn synthesize_detector<T: Scalar>(a: &DMatrix<T>, c: &DMatrix<T>, tol: &Tolerances) -> Result<DetectorSynthesis<T>, DetectabilityError> {
    let n = require_output(a, c)?;
    let hautus = hautus_detectable(a, c, tol)?;
    if let Some(mode) = hautus.worst_mode {
        return Err(DetectabilityError::NotDetectable {
            re: mode.re.as_f64(),
            im: mode.im.as_f64(),
        });
    }
    if n == 0 {
        return Ok(DetectorSynthesis {
            f: DMatrix::zeros(0, c.nrows()),
            stabilized_spectrum_bound: -T::max_value().unwrap(),
        });
    }
    let slowest = hautus
        .unobservable_modes
        .iter()
        .fold(T::max_value().unwrap(), |acc, l| acc.min(-l.re));
    let shift = T::lit(tol.stab_margin).min(slowest * T::half());
    if let Some(s) = detector_with_shift(a, c, shift) {
        return Ok(s);
    }
    log::debug!("shifted Riccati solve failed, retrying without shift");
    detector_with_shift(a, c, T::zero()).ok_or(DetectabilityError::RiccatiFailed("no stabilizing solution found"))
}

/// Wraps a user-supplied detector after checking that it stabilizes.
pub fn detector_from_injection<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    f: DMatrix<T>,
    tol: &Tolerances,
) -> Result<DetectorSynthesis<T>, DetectabilityError> {
    let n = require_output(a, c)?;
    if f.nrows() != n || f.ncols() != c.nrows() {
        return Err(DetectabilityError::DimensionMismatch(format!(
            "F is {}x{}, expected {n}x{}",
            f.nrows(),
            f.ncols(),
            c.nrows()
        )));
    }
    let report = is_exponentially_stable(&(a + &f * c), tol)?;
    if !report.stable {
        return Err(DetectabilityError::NotStabilizing {
            abscissa: report.spectral_abscissa.as_f64(),
        });
    }
    Ok(DetectorSynthesis {
        f,
        stabilized_spectrum_bound: report.spectral_abscissa,
    })
}

/// Blocks of `T` in the orthonormal basis `[Q₁ Q₂]` adapted to the split.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurBlocks<T: Scalar> {
    pub basis: DMatrix<T>,
    pub t11: DMatrix<T>,
    pub t12: DMatrix<T>,
    pub t22: DMatrix<T>,
    /// `T₂₂ − T₂₁T₁₁⁻¹T₁₂`.
    pub schur: DMatrix<T>,
}

impl<T: Scalar> SchurBlocks<T> {
    /// `[I 0; T₂₁T₁₁⁻¹ I] · [T₁₁ 0; 0 S] · [I T₁₁⁻¹T₁₂; 0 I]`, expressed in
    /// the adapted basis.
    pub fn factorized(&self) -> Option<DMatrix<T>> {
        let d1 = self.t11.nrows();
        let d2 = self.t22.nrows();
        let n = d1 + d2;
        let t11_inv = self.t11.clone().try_inverse()?;
        let mut lower = DMatrix::<T>::identity(n, n);
        lower.view_mut((d1, 0), (d2, d1)).copy_from(&(self.t12.transpose() * &t11_inv));
        let mut middle = DMatrix::<T>::zeros(n, n);
        middle.view_mut((0, 0), (d1, d1)).copy_from(&self.t11);
        middle.view_mut((d1, d1), (d2, d2)).copy_from(&self.schur);
        let mut upper = DMatrix::<T>::identity(n, n);
        upper.view_mut((0, d1), (d1, d2)).copy_from(&(t11_inv * &self.t12));
        Some(lower * middle * upper)
    }

    /// `[Q₁ Q₂]ᵀ T [Q₁ Q₂]`.
    pub fn adapted(&self, t: &DMatrix<T>) -> DMatrix<T> {
        self.basis.transpose() * t * &self.basis
    }
}

/// Cross-check of `T(η) ≻ 0` through the split `H₁ = ran E([0, ε])`,
/// `H₂ = ran E((ε, ∞))` of `CᵀC`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurCertificate<T: Scalar> {
    pub eps: T,
    pub eta: T,
    /// `1 − 2‖K_F‖√ε`.
    pub kappa: T,
    pub split_dims: (usize, usize),
    /// `λ_min(T₁₁)`, at least `η·κ`.
    pub t11_margin: T,
    /// `λ_min(S)`.
    pub schur_margin: T,
    /// Verdict of the certificate: `T₁₁ ≻ 0` and `S ≻ 0`.
    pub positive: bool,
    pub blocks: SchurBlocks<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectabilityStorage<T: Scalar> {
    pub p: SymmetricOperator<T>,
    pub eta: T,
    /// `λ_min(T(η))`, equal to the form-inequality margin of `(A, C, P, η)`.
    pub m: T,
    pub detector: DetectorSynthesis<T>,
    /// `K_F = PF`.
    pub k_f: DMatrix<T>,
    /// `T(η)` at the accepted `η`.
    pub t: SymmetricOperator<T>,
    pub halvings: usize,
    /// `None` when `K_F = 0` or one side of the split is trivial.
    pub schur: Option<SchurCertificate<T>>,
}

const MAX_HALVINGS: usize = 60;

fn t_operator<T: Scalar>(ctc: &DMatrix<T>, c: &DMatrix<T>, k_f: &DMatrix<T>, eta: T) -> SymmetricOperator<T> {
    let n = ctc.nrows();
    let kc = k_f * c;
    SymmetricOperator::symmetrize(ctc + (&kc + kc.transpose() + DMatrix::identity(n, n)) * eta)
}

fn schur_certificate<T: Scalar>(
    ctc: &SymmetricOperator<T>,
    t: &SymmetricOperator<T>,
    eps: T,
    eta: T,
    k_norm: T,
    tol: &Tolerances,
) -> Result<Option<SchurCertificate<T>>, DetectabilityError> {
    let d = eig_sym(ctc)?;
    let slack = T::lit(tol.boundary_tol) * (T::one() + ctc.max_abs());
    let q1 = d.basis_where(|l| l <= eps + slack);
    let q2 = d.basis_where(|l| l > eps + slack);
    let (d1, d2) = (q1.ncols(), q2.ncols());
    if d1 == 0 || d2 == 0 {
        return Ok(None);
    }
    let n = d1 + d2;
    let mut basis = DMatrix::zeros(n, n);
    basis.view_mut((0, 0), (n, d1)).copy_from(&q1);
    basis.view_mut((0, d1), (n, d2)).copy_from(&q2);
    let adapted = basis.transpose() * t.matrix() * &basis;
    let t11 = adapted.view((0, 0), (d1, d1)).clone_owned();
    let t12 = adapted.view((0, d1), (d1, d2)).clone_owned();
    let t22 = adapted.view((d1, d1), (d2, d2)).clone_owned();
    let t11_sym = SymmetricOperator::symmetrize(t11.clone());
    let t11_margin = eig_sym(&t11_sym)?.min_eigenvalue();
    let schur = match t11.clone().cholesky() {
        Some(ch) => &t22 - t12.transpose() * ch.solve(&t12),
        None => return Ok(None),
    };
    let schur_sym = SymmetricOperator::symmetrize(schur.clone());
    let schur_margin = eig_sym(&schur_sym)?.min_eigenvalue();
    let pos = t.pos_tol(tol);
    Ok(Some(SchurCertificate {
        eps,
        eta,
        kappa: T::one() - T::two() * k_norm * eps.sqrt(),
        split_dims: (d1, d2),
        t11_margin,
        schur_margin,
        positive: t11_margin > pos && schur_margin > pos,
        blocks: SchurBlocks {
            basis,
            t11,
            t12,
            t22,
            schur: schur_sym.into_matrix(),
        },
    }))
}

/// Builds `P ⪰ 0` and `η, m > 0` with `‖Cx‖² − 2η⟨Ax,Px⟩ ≥ m‖x‖²` for a
/// detectable pair, using a Riccati-based detector.
pub fn storage_from_detectability<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    tol: &Tolerances,
) -> Result<DetectabilityStorage<T>, DetectabilityError> {
    let detector = synthesize_detector(a, c, tol)?;
    storage_from_detector(a, c, detector, tol)
}

/// As [`storage_from_detectability`] with a given stabilizing detector.
pub fn storage_from_detector<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    detector: DetectorSynthesis<T>,
    tol: &Tolerances,
) -> Result<DetectabilityStorage<T>, DetectabilityError> {
    let n = require_output(a, c)?;
    let closed = a + &detector.f * c;
    let lyap = solve_lyapunov(&closed, tol)?;
    let p = lyap.p;
    let k_f = p.matrix() * &detector.f;
    let k_norm = if k_f.is_empty() { T::zero() } else { spectral_norm(&k_f) };
    let ctc = SymmetricOperator::gram(c);

    let mut eta = T::one();
    let mut halvings = 0;
    let t = loop {
        let t = t_operator(ctc.matrix(), c, &k_f, eta);
        let min_eig = eig_sym(&t)?.min_eigenvalue();
        if min_eig > t.pos_tol(tol) {
            break t;
        }
        if halvings == MAX_HALVINGS {
            return Err(DetectabilityError::BisectionExhausted {
                halvings,
                min_eig: min_eig.as_f64(),
            });
        }
        eta *= T::half();
        halvings += 1;
    };
    let m = eig_sym(&t)?.min_eigenvalue();

    let schur = if k_norm > T::zero() {
        let bound = T::one() / (T::lit(8.0) * k_norm * k_norm);
        let top = eig_sym(&ctc)?.max_eigenvalue();
        let eps = if top > T::zero() { bound.min(top * T::half()) } else { bound };
        schur_certificate(&ctc, &t, eps, eta, k_norm, tol)?
    } else {
        None
    };
    if let Some(cert) = &schur {
        if !cert.positive {
            return Err(DetectabilityError::InternalVerificationFailed {
                what: "Schur certificate disagrees with the eigenvalue verdict",
                value: cert.schur_margin.min(cert.t11_margin).as_f64(),
            });
        }
    }

    // T(η) is the form of the inequality for (A, C, P, η); check it directly.
    let pa = p.matrix() * a;
    let form = SymmetricOperator::symmetrize(ctc.matrix() - (&pa + pa.transpose()) * eta);
    let form_m = eig_sym(&form)?.min_eigenvalue();
    let scale = T::one() + ctc.max_abs() + max_abs(&pa);
    if form_m < m - T::lit(tol.lyap_tol * n.max(1) as f64) * scale {
        return Err(DetectabilityError::InternalVerificationFailed {
            what: "form-inequality margin below λ_min(T)",
            value: (form_m - m).as_f64(),
        });
    }

    Ok(DetectabilityStorage {
        p,
        eta,
        m,
        detector,
        k_f,
        t,
        halvings,
        schur,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageDetector<T: Scalar> {
    /// `F = −½P⁺Cᵀ`.
    pub f: DMatrix<T>,
    pub stable: bool,
    pub spectral_abscissa: T,
    /// `−m / (2λ_max(P))`.
    pub abscissa_bound: T,
}

/// Converse construction: a form inequality with margin `m` at `η = 1`
/// and `ran Cᵀ ⊆ ran P` give the detector `F = −½P⁺Cᵀ`, for which
/// `2⟨(A+FC)x, Px⟩ ≤ −m‖x‖²`.
pub fn detector_from_storage<T: Scalar>(
    a: &DMatrix<T>,
    c: &DMatrix<T>,
    p: &SymmetricOperator<T>,
    m: T,
    tol: &Tolerances,
) -> Result<StorageDetector<T>, DetectabilityError> {
    let n = require_output(a, c)?;
    if p.dim() != n {
        return Err(DetectabilityError::DimensionMismatch(format!(
            "P is {}x{}, A is {n}x{n}",
            p.dim(),
            p.dim()
        )));
    }
    let pos_tol = p.pos_tol(tol);
    let d = eig_sym(p)?;
    if d.min_eigenvalue() < -pos_tol {
        return Err(DetectabilityError::NotPsd {
            min_eig: d.min_eigenvalue().as_f64(),
        });
    }
    let ctc = c.transpose() * c;
    let pa = p.matrix() * a;
    let form = SymmetricOperator::symmetrize(&ctc - (&pa + pa.transpose()));
    let margin = eig_sym(&form)?.min_eigenvalue();
    let scale = T::one() + max_abs(&ctc) + max_abs(&pa);
    if margin < m - T::lit(tol.margin_tol) * scale {
        return Err(DetectabilityError::PreconditionFailed {
            margin: margin.as_f64(),
            m: m.as_f64(),
        });
    }
    let inc = range_inclusion(&c.transpose(), p.matrix(), tol.range_tol);
    if !inc.contained {
        return Err(DetectabilityError::RangeConditionFailed {
            residual: inc.relative_residual.as_f64(),
        });
    }
    let pinv = pinv_sym(p, pos_tol)?;
    let f = -(pinv.matrix() * c.transpose()) * T::half();
    let closed = a + &f * c;
    let report = is_exponentially_stable(&closed, tol)?;
    let abscissa_bound = -m / (T::two() * d.max_eigenvalue());
    let via_inequality = match stability_from_inequality(&closed, p, m, tol) {
        Ok(holds) => holds,
        Err(DetectabilityError::InconsistentStability { abscissa }) => {
            return Err(DetectabilityError::InternalVerificationFailed {
                what: "closed loop satisfies the inequality but is unstable",
                value: abscissa,
            })
        }
        Err(e) => return Err(e),
    };
    if via_inequality && !report.stable {
        return Err(DetectabilityError::InternalVerificationFailed {
            what: "closed loop satisfies the inequality but is unstable",
            value: report.spectral_abscissa.as_f64(),
        });
    }
    Ok(StorageDetector {
        f,
        stable: report.stable,
        spectral_abscissa: report.spectral_abscissa,
        abscissa_bound,
    })
}
