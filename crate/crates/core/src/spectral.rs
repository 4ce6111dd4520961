//! Dense symmetric linear algebra: eigendecomposition, square roots,
//! interval spectral projections, positivity classification and
//! range-inclusion tests.
//!
//! In finite dimensions the spectral measure `E(Δ)` of a symmetric matrix is
//! the orthogonal projection onto the eigenvectors whose eigenvalues lie in
//! `Δ`, and `ran M^{1/2} = ran M`. Range conditions therefore reduce to
//! least-squares residual tests.

use nalgebra::linalg::SymmetricEigen;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::tolerances::Tolerances;

/// Dense real matrix. Houses `A`, `B`, `C`, `K` and every derived operator.
pub type Operator<T> = DMatrix<T>;
/// Dense real column vector.
pub type Vector<T> = DVector<T>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not symmetric: asymmetry {asymmetry:e} exceeds {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },
    #[error("symmetric eigensolver did not converge")]
    ConvergenceFailure,
    #[error("matrix is not positive semidefinite (minimal eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("spectral self-check ({check}) failed")]
    CheckFailed { check: &'static str, vector: Vec<f64> },
}

/// Largest absolute entry, `‖M‖_max`.
pub fn max_abs<T: Scalar>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()))
}

pub(crate) fn all_finite<T: Scalar>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite_value())
}

/// Spectral norm (largest singular value).
pub fn spectral_norm<T: Scalar>(m: &DMatrix<T>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

/// Symmetric square matrix. Symmetrized on construction via `(M + Mᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricOperator<T: Scalar> {
    matrix: DMatrix<T>,
}

impl<T: Scalar> SymmetricOperator<T> {
    /// Validates that `m` is square, finite, and symmetric up to
    /// `sym_tol · max|entry|`, then symmetrizes it.
    pub fn new(m: DMatrix<T>, sym_tol: f64) -> Result<Self, SpectralError> {
        if m.nrows() != m.ncols() {
            return Err(SpectralError::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if !all_finite(&m) {
            return Err(SpectralError::NonFinite);
        }
        let asymmetry = max_abs(&(&m - m.transpose()));
        let tolerance = T::lit(sym_tol) * max_abs(&m);
        if asymmetry > tolerance {
            return Err(SpectralError::NotSymmetric {
                asymmetry: asymmetry.as_f64(),
                tolerance: tolerance.as_f64(),
            });
        }
        Ok(Self::symmetrize(m))
    }

    /// Forces symmetry without checking. Used for matrices that are
    /// symmetric by construction (`CᵀC`, `PA + AᵀP`, ...).
    ///
    /// Panics if `m` is not square.
    pub fn symmetrize(m: DMatrix<T>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetric operator must be square");
        let matrix = (&m + m.transpose()) * T::half();
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn from_diagonal(d: &[T]) -> Self {
        Self {
            matrix: DMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    /// `MᵀM`.
    pub fn gram(m: &DMatrix<T>) -> Self {
        Self::symmetrize(m.transpose() * m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    pub fn max_abs(&self) -> T {
        max_abs(&self.matrix)
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            matrix: &self.matrix * factor,
        }
    }

    /// Default positivity tolerance `pos_tol · (1 + ‖M‖_max)`.
    pub fn pos_tol(&self, tol: &Tolerances) -> T {
        T::lit(tol.pos_tol) * (T::one() + self.max_abs())
    }

    /// `⟨Mx, x⟩`.
    pub fn quadratic_form(&self, x: &DVector<T>) -> T {
        (&self.matrix * x).dot(x)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T: Scalar> {
    pub eigenvalues: DVector<T>,
    pub eigenvectors: DMatrix<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues.iter().copied().fold(T::max_value().unwrap(), T::min)
    }

    pub fn max_eigenvalue(&self) -> T {
        self.eigenvalues.iter().copied().fold(T::min_value().unwrap(), T::max)
    }

    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        &self.eigenvectors
            * DMatrix::from_diagonal(&self.eigenvalues)
            * self.eigenvectors.transpose()
    }

    /// `Q f(Λ) Qᵀ`.
    pub fn apply<F: Fn(T) -> T>(&self, f: F) -> SymmetricOperator<T> {
        let mapped = self.eigenvalues.map(f);
        SymmetricOperator::symmetrize(
            &self.eigenvectors * DMatrix::from_diagonal(&mapped) * self.eigenvectors.transpose(),
        )
    }

    /// Orthonormal columns spanning the eigenvectors whose eigenvalue
    /// satisfies `keep`.
    pub fn basis_where<F: Fn(T) -> bool>(&self, keep: F) -> DMatrix<T> {
        let cols: Vec<_> = self
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(_, &l)| keep(l))
            .map(|(i, _)| self.eigenvectors.column(i).clone_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(self.eigenvectors.nrows(), 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
pub fn eig_sym<T: Scalar>(m: &SymmetricOperator<T>) -> Result<SpectralDecomposition<T>, SpectralError> {
    let n = m.dim();
    if n == 0 {
        return Ok(SpectralDecomposition {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = SymmetricEigen::try_new(m.matrix().clone(), T::eps(), 1000 * n)
        .ok_or(SpectralError::ConvergenceFailure)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let cols: Vec<_> = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).clone_owned())
        .collect();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: DMatrix::from_columns(&cols),
    })
}

/// Strictness classification of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PositivityClass<T> {
    /// `⟨Mx,x⟩ ≥ margin‖x‖²` with `margin > pos_tol`.
    StrictlyPositive { margin: T },
    /// Minimal eigenvalue within `[-pos_tol, pos_tol]`.
    NonNegative,
    Indefinite { min_eig: T },
}

impl<T> PositivityClass<T> {
    pub fn is_psd(&self) -> bool {
        !matches!(self, PositivityClass::Indefinite { .. })
    }

    pub fn is_strictly_positive(&self) -> bool {
        matches!(self, PositivityClass::StrictlyPositive { .. })
    }
}

pub fn classify_decomposed<T: Scalar>(d: &SpectralDecomposition<T>, pos_tol: T) -> PositivityClass<T> {
    if d.eigenvalues.is_empty() {
        return PositivityClass::NonNegative;
    }
    let min_eig = d.min_eigenvalue();
    if min_eig > pos_tol {
        PositivityClass::StrictlyPositive { margin: min_eig }
    } else if min_eig >= -pos_tol {
        PositivityClass::NonNegative
    } else {
        PositivityClass::Indefinite { min_eig }
    }
}

pub fn classify<T: Scalar>(m: &SymmetricOperator<T>, pos_tol: T) -> Result<PositivityClass<T>, SpectralError> {
    Ok(classify_decomposed(&eig_sym(m)?, pos_tol))
}

/// Square root of a positive semidefinite matrix. Eigenvalues in
/// `[-pos_tol, 0)` are clamped to zero.
pub fn sqrt_psd<T: Scalar>(m: &SymmetricOperator<T>, pos_tol: T) -> Result<SymmetricOperator<T>, SpectralError> {
    let d = eig_sym(m)?;
    if let PositivityClass::Indefinite { min_eig } = classify_decomposed(&d, pos_tol) {
        return Err(SpectralError::NotPsd {
            min_eig: min_eig.as_f64(),
        });
    }
    Ok(d.apply(|l| l.max(T::zero()).sqrt()))
}

/// Moore–Penrose pseudo-inverse of a symmetric matrix, treating eigenvalues
/// with `|λ| ≤ cutoff` as zero.
pub fn pinv_sym<T: Scalar>(m: &SymmetricOperator<T>, cutoff: T) -> Result<SymmetricOperator<T>, SpectralError> {
    let d = eig_sym(m)?;
    Ok(d.apply(|l| if l.abs() > cutoff { T::one() / l } else { T::zero() }))
}

/// Closed real interval; a missing endpoint means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: Option<T>,
    pub hi: Option<T>,
}

impl<T: Scalar> Interval<T> {
    pub fn closed(lo: T, hi: T) -> Result<Self, SpectralError> {
        if !(lo <= hi) {
            return Err(SpectralError::InvalidInterval {
                lo: lo.as_f64(),
                hi: hi.as_f64(),
            });
        }
        Ok(Self {
            lo: Some(lo),
            hi: Some(hi),
        })
    }

    pub fn at_most(hi: T) -> Self {
        Self { lo: None, hi: Some(hi) }
    }

    pub fn at_least(lo: T) -> Self {
        Self { lo: Some(lo), hi: None }
    }

    pub fn everything() -> Self {
        Self { lo: None, hi: None }
    }

    /// Membership with slack `slack` on both endpoints.
    pub fn contains(&self, x: T, slack: T) -> bool {
        self.lo.is_none_or(|lo| x >= lo - slack) && self.hi.is_none_or(|hi| x <= hi + slack)
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(T::zero(), T::zero())
    }

    /// `Δ₁ ∩ Δ₂`, or `None` when empty.
    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = match (self.lo, other.lo) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        let hi = match (self.hi, other.hi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        match (lo, hi) {
            (Some(l), Some(h)) if l > h => None,
            _ => Some(Self { lo, hi }),
        }
    }
}

fn boundary_slack<T: Scalar>(d: &SpectralDecomposition<T>, boundary_tol: f64) -> T {
    let radius = d.eigenvalues.iter().fold(T::zero(), |a, &l| a.max(l.abs()));
    T::lit(boundary_tol) * (T::one() + radius)
}

/// Orthonormal basis of `ran E(Δ)`.
pub fn spectral_basis<T: Scalar>(
    d: &SpectralDecomposition<T>,
    interval: &Interval<T>,
    boundary_tol: f64,
) -> DMatrix<T> {
    let slack = boundary_slack(d, boundary_tol);
    d.basis_where(|l| interval.contains(l, slack))
}

/// `E(Δ)`: orthogonal projection onto the eigenvectors of `M` with
/// eigenvalue in `Δ`.
pub fn spectral_projection<T: Scalar>(
    m: &SymmetricOperator<T>,
    interval: &Interval<T>,
    boundary_tol: f64,
) -> Result<SymmetricOperator<T>, SpectralError> {
    let d = eig_sym(m)?;
    let v = spectral_basis(&d, interval, boundary_tol);
    Ok(SymmetricOperator::symmetrize(&v * v.transpose()))
}

/// Outcome of a least-squares range-membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeInclusion<T: Scalar> {
    pub contained: bool,
    /// Minimum-norm least-squares solution, one column per target column.
    pub witness: DMatrix<T>,
    /// Largest absolute residual `‖M s − t‖` over the target columns.
    pub residual: T,
    /// Largest residual relative to the norm of its target column.
    pub relative_residual: T,
}

impl<T: Scalar> RangeInclusion<T> {
    pub fn witness_vector(&self) -> DVector<T> {
        self.witness.column(0).clone_owned()
    }
}

/// Tests whether every column of `target` lies in `ran M`.
///
/// Solves `min ‖M s − t‖` by SVD with singular values below
/// `range_tol · σ_max` discarded; the witness is the minimum-norm solution.
pub fn range_inclusion<T: Scalar>(target: &DMatrix<T>, m: &DMatrix<T>, range_tol: f64) -> RangeInclusion<T> {
    assert_eq!(
        target.nrows(),
        m.nrows(),
        "range_inclusion: target and operator row counts differ"
    );
    let witness = if m.is_empty() || target.ncols() == 0 {
        DMatrix::zeros(m.ncols(), target.ncols())
    } else {
        let svd = m.clone().svd(true, true);
        let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
        if smax == T::zero() {
            DMatrix::zeros(m.ncols(), target.ncols())
        } else {
            let cutoff = T::lit(range_tol) * smax;
            svd.solve(target, cutoff)
                .expect("SVD computed with both singular vector sets")
        }
    };
    let resid = m * &witness - target;
    let mut residual = T::zero();
    let mut relative_residual = T::zero();
    for j in 0..target.ncols() {
        let r = resid.column(j).norm();
        let t = target.column(j).norm();
        residual = residual.max(r);
        let rel = if t > T::zero() { r / t } else { T::zero() };
        relative_residual = relative_residual.max(rel);
    }
    RangeInclusion {
        contained: relative_residual <= T::lit(range_tol),
        witness,
        residual,
        relative_residual,
    }
}

pub fn range_inclusion_vec<T: Scalar>(target: &DVector<T>, m: &DMatrix<T>, range_tol: f64) -> RangeInclusion<T> {
    let t = DMatrix::from_column_slice(target.len(), 1, target.as_slice());
    range_inclusion(&t, m, range_tol)
}

/// Orthonormal basis of `ker M` via SVD, discarding singular values below
/// `rel_tol · σ_max`. Rows are padded so the full right singular basis is
/// available for wide matrices.
pub fn null_space<T: Scalar>(m: &DMatrix<T>, rel_tol: f64) -> DMatrix<T> {
    let (r, c) = m.shape();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    let mut square = DMatrix::zeros(r.max(c), c);
    square.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = square.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
    let cutoff = T::lit(rel_tol) * smax;
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax == T::zero() || s <= cutoff)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(c, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Result of the finite-dimensional checks of the spectral measure facts
/// used by the detectability construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSelfCheck<T: Scalar> {
    /// `Some(worst relative residual)` when check (a) applied (`0 ∉ Δ`).
    pub range_check: Option<T>,
    /// Largest value of `⟨Mx,x⟩ − r‖x‖²` over the samples of check (b).
    pub form_check_worst: T,
    pub samples: usize,
}

/// Self-test of two spectral-measure facts:
///
/// (a) for a compact `Δ` with `0 ∉ Δ`, `ran E(Δ) ⊆ ran M`;
/// (b) `⟨Mx,x⟩ ≤ r‖x‖²` for `x ∈ ran E([-r, r])`.
pub fn spectral_self_check<T: Scalar>(
    m: &SymmetricOperator<T>,
    interval: &Interval<T>,
    r: T,
    samples: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<SpectralSelfCheck<T>, SpectralError> {
    let d = eig_sym(m)?;
    let compact = interval.lo.is_some() && interval.hi.is_some();
    let range_check = if compact && !interval.contains_zero() {
        let v = spectral_basis(&d, interval, tol.boundary_tol);
        let proj = &v * v.transpose();
        let inc = range_inclusion(&proj, m.matrix(), tol.range_tol);
        if !inc.contained {
            let worst = (0..proj.ncols())
                .max_by(|&i, &j| {
                    let ri = (m.matrix() * inc.witness.column(i) - proj.column(i)).norm();
                    let rj = (m.matrix() * inc.witness.column(j) - proj.column(j)).norm();
                    ri.partial_cmp(&rj).unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(0);
            return Err(SpectralError::CheckFailed {
                check: "range of spectral projection",
                vector: proj.column(worst).iter().map(|x| x.as_f64()).collect(),
            });
        }
        Some(inc.relative_residual)
    } else {
        None
    };

    let band = Interval::closed(-r, r)?;
    let v = spectral_basis(&d, &band, tol.boundary_tol);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = T::min_value().unwrap();
    let slack = T::lit(1e-10);
    let k = v.ncols();
    for _ in 0..samples {
        if k == 0 {
            break;
        }
        let coeffs = DVector::from_fn(k, |_, _| T::lit(StandardNormal.sample(&mut rng)));
        let x = &v * coeffs;
        let gap = m.quadratic_form(&x) - r * x.norm_squared();
        worst = worst.max(gap);
        if gap > slack * (T::one() + x.norm_squared()) {
            return Err(SpectralError::CheckFailed {
                check: "form bound on spectral band",
                vector: x.iter().map(|v| v.as_f64()).collect(),
            });
        }
    }
    Ok(SpectralSelfCheck {
        range_check,
        form_check_worst: worst,
        samples: if k == 0 { 0 } else { samples },
    })
}
