//! Problem data for the generalized linear-quadratic optimal control problem
//!
//! ```text
//! min ∫ ℓ(x,u) dt   s.t. ẋ = Ax + Bu,
//! ℓ(x,u) = ‖Cx‖² + ‖Ku‖² + 2⟨z,x⟩ + 2⟨v,u⟩
//! ```
//!
//! together with the shifted cost around a steady state and the coupling
//! constant `c_K` in `‖Ku‖ ≥ c_K‖Bu‖`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::spectral::{self, eig_sym, range_inclusion, SpectralError, SymmetricOperator};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OcpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{0} contains a non-finite entry")]
    NonFinite(&'static str),
    #[error("compatibility ‖Ku‖ ≥ c_K‖Bu‖ fails (c_K = {c_k:e}, ran Bᵀ ⊆ ran Kᵀ: {range_ok})")]
    Incompatible { c_k: f64, range_ok: bool },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// The sextuple `(A, B, C, K, z, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpInstance<T: Scalar> {
    a: DMatrix<T>,
    b: DMatrix<T>,
    c: DMatrix<T>,
    k: DMatrix<T>,
    z: DVector<T>,
    v: DVector<T>,
}

/// Controlled equilibrium `(x_e, u_e)` with `A x_e + B u_e = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<T: Scalar> {
    pub x_e: DVector<T>,
    pub u_e: DVector<T>,
}

impl<T: Scalar> SteadyState<T> {
    pub fn new(x_e: DVector<T>, u_e: DVector<T>) -> Self {
        Self { x_e, u_e }
    }

    pub fn origin(n: usize, m: usize) -> Self {
        Self {
            x_e: DVector::zeros(n),
            u_e: DVector::zeros(m),
        }
    }

    /// `(x_e, u_e)` stacked into one vector of length `n + m`.
    pub fn stacked(&self) -> DVector<T> {
        let n = self.x_e.len();
        DVector::from_fn(n + self.u_e.len(), |i, _| {
            if i < n {
                self.x_e[i]
            } else {
                self.u_e[i - n]
            }
        })
    }

    pub fn from_stacked(y: &DVector<T>, n: usize) -> Self {
        Self {
            x_e: y.rows(0, n).clone_owned(),
            u_e: y.rows(n, y.len() - n).clone_owned(),
        }
    }
}

/// `c_K = inf { ‖Ku‖/‖Bu‖ : Bu ≠ 0 }` and the verdict on the compatibility
/// condition. `c_k = None` encodes `c_K = +∞` (the case `B = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compatibility<T> {
    pub c_k: Option<T>,
    pub holds: bool,
}

impl<T: Scalar> Compatibility<T> {
    /// `1/c_K²`, zero when `c_K = ∞`.
    pub fn inverse_square(&self) -> T {
        match self.c_k {
            Some(c) => T::one() / (c * c),
            None => T::zero(),
        }
    }
}

fn check_finite<T: Scalar>(m: &DMatrix<T>, name: &'static str) -> Result<(), OcpError> {
    if spectral::all_finite(m) {
        Ok(())
    } else {
        Err(OcpError::NonFinite(name))
    }
}

fn mismatch(msg: String) -> OcpError {
    OcpError::DimensionMismatch(msg)
}

impl<T: Scalar> OcpInstance<T> {
    /// Builds an instance and verifies the compatibility condition.
    pub fn new(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        k: DMatrix<T>,
        z: DVector<T>,
        v: DVector<T>,
        tol: &Tolerances,
    ) -> Result<Self, OcpError> {
        let ocp = Self::new_deferred(a, b, c, k, z, v)?;
        let compat = ocp.compatibility_constant(tol)?;
        if !compat.holds {
            let range_ok = range_inclusion(&ocp.b.transpose(), &ocp.k.transpose(), tol.range_tol).contained;
            return Err(OcpError::Incompatible {
                c_k: compat.c_k.map_or(f64::INFINITY, |c| c.as_f64()),
                range_ok,
            });
        }
        Ok(ocp)
    }

    /// Builds an instance checking only shapes and finiteness. Used for
    /// deliberately pathological inputs.
    pub fn new_deferred(
        a: DMatrix<T>,
        b: DMatrix<T>,
        c: DMatrix<T>,
        k: DMatrix<T>,
        z: DVector<T>,
        v: DVector<T>,
    ) -> Result<Self, OcpError> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(mismatch(format!("A is {}x{}, expected square", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(mismatch(format!("B has {} rows, expected {n}", b.nrows())));
        }
        let m = b.ncols();
        if c.ncols() != n {
            return Err(mismatch(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if k.ncols() != m {
            return Err(mismatch(format!("K has {} columns, expected {m}", k.ncols())));
        }
        if z.len() != n {
            return Err(mismatch(format!("z has length {}, expected {n}", z.len())));
        }
        if v.len() != m {
            return Err(mismatch(format!("v has length {}, expected {m}", v.len())));
        }
        check_finite(&a, "A")?;
        check_finite(&b, "B")?;
        check_finite(&c, "C")?;
        check_finite(&k, "K")?;
        if !z.iter().chain(v.iter()).all(|x| x.is_finite_value()) {
            return Err(OcpError::NonFinite("linear cost terms"));
        }
        Ok(Self { a, b, c, k, z, v })
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }
    pub fn k(&self) -> &DMatrix<T> {
        &self.k
    }
    pub fn z(&self) -> &DVector<T> {
        &self.z
    }
    pub fn v(&self) -> &DVector<T> {
        &self.v
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    /// Input dimension.
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension of `C`.
    pub fn p(&self) -> usize {
        self.c.nrows()
    }
    /// Output dimension of `K`.
    pub fn q(&self) -> usize {
        self.k.nrows()
    }

    /// Same dynamics and quadratic terms, different linear terms.
    pub fn with_linear_terms(&self, z: DVector<T>, v: DVector<T>) -> Result<Self, OcpError> {
        Self::new_deferred(self.a.clone(), self.b.clone(), self.c.clone(), self.k.clone(), z, v)
    }

    fn check_xu(&self, x: &DVector<T>, u: &DVector<T>) -> Result<(), OcpError> {
        if x.len() != self.n() || u.len() != self.m() {
            return Err(mismatch(format!(
                "(x, u) has lengths ({}, {}), expected ({}, {})",
                x.len(),
                u.len(),
                self.n(),
                self.m()
            )));
        }
        Ok(())
    }

    /// `[A B]`, the `n × (n+m)` steady-state constraint matrix.
    pub fn stacked_dynamics(&self) -> DMatrix<T> {
        let (n, m) = (self.n(), self.m());
        let mut ab = DMatrix::zeros(n, n + m);
        ab.view_mut((0, 0), (n, n)).copy_from(&self.a);
        ab.view_mut((0, n), (n, m)).copy_from(&self.b);
        ab
    }

    /// `diag(CᵀC, KᵀK)`, the quadratic part of `ℓ` on `H × U`.
    pub fn block_cost(&self) -> SymmetricOperator<T> {
        let (n, m) = (self.n(), self.m());
        let mut q = DMatrix::zeros(n + m, n + m);
        q.view_mut((0, 0), (n, n)).copy_from(&(self.c.transpose() * &self.c));
        q.view_mut((n, n), (m, m)).copy_from(&(self.k.transpose() * &self.k));
        SymmetricOperator::symmetrize(q)
    }

    /// `(z, v)` stacked.
    pub fn stacked_linear(&self) -> DVector<T> {
        SteadyState::new(self.z.clone(), self.v.clone()).stacked()
    }

    pub(crate) fn cost(&self, x: &DVector<T>, u: &DVector<T>) -> T {
        (&self.c * x).norm_squared() + (&self.k * u).norm_squared() + T::two() * (self.z.dot(x) + self.v.dot(u))
    }

    /// `ℓ(x,u) = ‖Cx‖² + ‖Ku‖² + 2⟨z,x⟩ + 2⟨v,u⟩`.
    pub fn running_cost(&self, x: &DVector<T>, u: &DVector<T>) -> Result<T, OcpError> {
        self.check_xu(x, u)?;
        Ok(self.cost(x, u))
    }

    /// Linear terms of the shifted cost: `(z + CᵀC x_e, v + KᵀK u_e)`.
    pub fn shifted_linear_terms(&self, ss: &SteadyState<T>) -> (DVector<T>, DVector<T>) {
        let zx = &self.z + self.c.transpose() * (&self.c * &ss.x_e);
        let vu = &self.v + self.k.transpose() * (&self.k * &ss.u_e);
        (zx, vu)
    }

    /// `ℓ̃(x,u) = ‖Cx‖² + ‖Ku‖² + 2⟨z + CᵀC x_e, x⟩ + 2⟨v + KᵀK u_e, u⟩`,
    /// which equals `ℓ(x + x_e, u + u_e) − ℓ(x_e, u_e)`.
    pub fn rotated_cost(&self, ss: &SteadyState<T>, x: &DVector<T>, u: &DVector<T>) -> Result<T, OcpError> {
        self.check_xu(x, u)?;
        self.check_xu(&ss.x_e, &ss.u_e)?;
        let (zx, vu) = self.shifted_linear_terms(ss);
        Ok((&self.c * x).norm_squared() + (&self.k * u).norm_squared() + T::two() * (zx.dot(x) + vu.dot(u)))
    }

    /// `‖A x_e + B u_e‖`.
    pub fn equilibrium_residual(&self, ss: &SteadyState<T>) -> Result<T, OcpError> {
        self.check_xu(&ss.x_e, &ss.u_e)?;
        Ok((&self.a * &ss.x_e + &self.b * &ss.u_e).norm())
    }

    /// Whether `ss` is a controlled equilibrium up to
    /// `eq_tol · (1 + ‖x_e‖ + ‖u_e‖)`.
    pub fn is_steady_state(&self, ss: &SteadyState<T>, tol: &Tolerances) -> Result<bool, OcpError> {
        let r = self.equilibrium_residual(ss)?;
        Ok(r <= T::lit(tol.eq_tol) * (T::one() + ss.x_e.norm() + ss.u_e.norm()))
    }

    /// Computes `c_K` and decides `‖Ku‖ ≥ c_K‖Bu‖` with `c_K > 0`.
    ///
    /// Inputs are split as `u = u_r + u_0` with `u_0 ∈ ker B`. Since `u_0`
    /// does not change `Bu` but may lower `‖Ku‖`, the infimum is taken over
    /// `K u_r` with the component in `K(ker B)` projected out, and then the
    /// symmetric pencil with `BᵀB` restricted to its range is solved.
    pub fn compatibility_constant(&self, tol: &Tolerances) -> Result<Compatibility<T>, OcpError> {
        let m = self.m();
        if m == 0 {
            return Ok(Compatibility { c_k: None, holds: true });
        }
        let btb = SymmetricOperator::gram(&self.b);
        let trace = btb.matrix().trace();
        if trace <= T::zero() {
            return Ok(Compatibility { c_k: None, holds: true });
        }
        let cut = T::lit(tol.pencil_tol) * trace / T::lit(m as f64);
        let d = eig_sym(&btb)?;
        let range_vecs = d.basis_where(|l| l > cut);
        let kernel_vecs = d.basis_where(|l| l <= cut);
        let lambdas: Vec<T> = d.eigenvalues.iter().copied().filter(|&l| l > cut).collect();

        let mut k_range = &self.k * &range_vecs;
        if kernel_vecs.ncols() > 0 && self.q() > 0 {
            let k_kernel = &self.k * &kernel_vecs;
            let basis = column_space(&k_kernel, tol.ker_tol);
            if basis.ncols() > 0 {
                k_range -= &basis * (basis.transpose() * &k_range);
            }
        }
        let scale = DMatrix::from_diagonal(&DVector::from_iterator(
            lambdas.len(),
            lambdas.iter().map(|&l| T::one() / l.sqrt()),
        ));
        let scaled = &k_range * scale;
        let pencil = SymmetricOperator::gram(&scaled);
        let mu = eig_sym(&pencil)?.min_eigenvalue().max(T::zero());
        let c_k = mu.sqrt();

        let positive = mu > T::lit(tol.pos_tol) * (T::one() + pencil.max_abs());
        let range_ok = range_inclusion(&self.b.transpose(), &self.k.transpose(), tol.range_tol).contained;
        Ok(Compatibility {
            c_k: Some(c_k),
            holds: positive && range_ok,
        })
    }
}

/// Orthonormal basis of `ran M` (left singular vectors above
/// `rel_tol · σ_max`).
pub(crate) fn column_space<T: Scalar>(m: &DMatrix<T>, rel_tol: f64) -> DMatrix<T> {
    if m.is_empty() {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested left singular vectors");
    let smax = svd.singular_values.iter().fold(T::zero(), |a, &s| a.max(s));
    let cols: Vec<_> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > T::zero() && s > T::lit(rel_tol) * smax)
        .map(|(i, _)| u.column(i).clone_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
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

    pub(crate) fn scalar_example() -> OcpInstance<f64> {
        OcpInstance::new(m1(-1.0), m1(1.0), m1(1.0), m1(1.0), v1(-1.0), v1(0.0), &Tolerances::default()).unwrap()
    }

    #[test]
    fn running_cost_examples() {
        let ocp = scalar_example();
        assert_eq!(ocp.running_cost(&v1(1.0), &v1(0.0)).unwrap(), -1.0);
        assert_eq!(ocp.running_cost(&v1(0.0), &v1(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(ocp.running_cost(&v1(0.5), &v1(0.5)).unwrap(), -0.5, epsilon = 1e-15);
        assert!(matches!(
            ocp.running_cost(&DVector::zeros(2), &v1(0.0)),
            Err(OcpError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rotated_cost_examples() {
        let ocp = scalar_example();
        let ss = SteadyState::new(v1(0.5), v1(0.5));
        assert_eq!(ocp.rotated_cost(&ss, &v1(0.0), &v1(0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(ocp.rotated_cost(&ss, &v1(0.5), &v1(-0.5)).unwrap(), -0.5, epsilon = 1e-15);
        let lhs = ocp.rotated_cost(&ss, &v1(0.3), &v1(-1.7)).unwrap();
        let rhs = ocp.running_cost(&v1(0.8), &v1(-1.2)).unwrap() - ocp.running_cost(&v1(0.5), &v1(0.5)).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-14);
    }

    #[test]
    fn compatibility_examples() {
        let tol = Tolerances::default();
        let c = scalar_example().compatibility_constant(&tol).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.c_k.unwrap(), 1.0, epsilon = 1e-14);

        let ocp = OcpInstance::new_deferred(
            DMatrix::zeros(2, 2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        let c = ocp.compatibility_constant(&tol).unwrap();
        assert!(c.holds);
        assert_abs_diff_eq!(c.c_k.unwrap(), 0.5, epsilon = 1e-14);

        let ocp = OcpInstance::new_deferred(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(2),
            DVector::zeros(2),
        )
        .unwrap();
        let c = ocp.compatibility_constant(&tol).unwrap();
        assert!(!c.holds);
        assert_abs_diff_eq!(c.c_k.unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn compatibility_accounts_for_kernel_of_b() {
        // u = (1, -1) gives Ku = 0 while Bu = 1.
        let ocp = OcpInstance::new_deferred(
            m1(0.0),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            m1(1.0),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            v1(0.0),
            DVector::zeros(2),
        )
        .unwrap();
        let c = ocp.compatibility_constant(&Tolerances::default()).unwrap();
        assert!(!c.holds);
        assert!(c.c_k.unwrap() < 1e-12);
    }

    #[test]
    fn zero_input_map_is_infinitely_compatible() {
        let ocp =
            OcpInstance::new_deferred(m1(1.0), m1(0.0), m1(1.0), m1(0.0), v1(0.0), v1(0.0)).unwrap();
        let c = ocp.compatibility_constant(&Tolerances::default()).unwrap();
        assert_eq!(c, Compatibility { c_k: None, holds: true });
        assert_eq!(c.inverse_square(), 0.0);
    }

    #[test]
    fn incompatible_instance_rejected_at_construction() {
        let r = OcpInstance::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::zeros(2),
            DVector::zeros(2),
            &Tolerances::default(),
        );
        assert!(matches!(r, Err(OcpError::Incompatible { range_ok: false, .. })));
    }

    #[test]
    fn shape_errors() {
        let r = OcpInstance::new_deferred(
            DMatrix::<f64>::zeros(2, 2),
            DMatrix::zeros(3, 1),
            DMatrix::zeros(1, 2),
            m1(1.0),
            DVector::zeros(2),
            v1(0.0),
        );
        assert!(matches!(r, Err(OcpError::DimensionMismatch(_))));
        let r = OcpInstance::new_deferred(m1(f64::NAN), m1(1.0), m1(1.0), m1(1.0), v1(0.0), v1(0.0));
        assert_eq!(r, Err(OcpError::NonFinite("A")));
    }

    #[test]
    fn equilibrium_residual_examples() {
        let ocp = scalar_example();
        assert_eq!(ocp.equilibrium_residual(&SteadyState::new(v1(0.5), v1(0.5))).unwrap(), 0.0);
        assert_eq!(ocp.equilibrium_residual(&SteadyState::origin(1, 1)).unwrap(), 0.0);
        assert_eq!(ocp.equilibrium_residual(&SteadyState::new(v1(1.0), v1(0.5))).unwrap(), 0.5);
    }
}
