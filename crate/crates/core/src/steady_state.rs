//! Optimal steady-state problem `min ℓ(x,u) s.t. Ax + Bu = 0`.
//!
//! The constraint set is parametrized by an orthonormal basis `B_k` of
//! `ker[A B]`. On it `ℓ(B_k s) = ⟨T s, s⟩ + 2⟨q, s⟩` with
//! `T = B_kᵀ diag(CᵀC, KᵀK) B_k` and `q = B_kᵀ (z, v)`; the minimizer is
//! `s* = −T⁻¹ q` whenever `T` is strictly positive. At the optimum the
//! projection of `(z + CᵀC x_e, v + KᵀK u_e)` onto `ker[A B]` vanishes.
//!
//! `ran[A B]` is always closed in finite dimensions, so that hypothesis is
//! not checked.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ocp::{OcpInstance, SteadyState};
use crate::scalar::Scalar;
use crate::spectral::{classify, null_space, pinv_sym, SpectralError, SymmetricOperator};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteadyStateError {
    #[error("reduced steady-state operator is not strictly positive (minimal eigenvalue {min_eig:e})")]
    NotCoercive { min_eig: f64 },
    #[error("ker[A B] is trivial; the only steady state is the origin")]
    EmptyKernel,
    #[error("stationarity residual {residual:e} exceeds tolerance {tolerance:e}")]
    StationarityViolated { residual: f64, tolerance: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Orthonormal basis of `ker[A B]`, an `(n+m) × k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBasis<T: Scalar> {
    pub basis: DMatrix<T>,
}

impl<T: Scalar> KernelBasis<T> {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Orthogonal projection of `y ∈ H × U` onto the kernel.
    pub fn project(&self, y: &DVector<T>) -> DVector<T> {
        &self.basis * (self.basis.transpose() * y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateSolution<T: Scalar> {
    pub ss: SteadyState<T>,
    pub kernel: KernelBasis<T>,
    pub t_reduced: SymmetricOperator<T>,
    pub q_reduced: DVector<T>,
    /// Kernel coordinates of the optimum, `y* = B_k s*`.
    pub coordinates: DVector<T>,
    pub optimal_cost: T,
    pub stationarity_residual: T,
}

/// Null space of `[A B]` with singular values below `ker_tol · σ_max`
/// treated as zero.
pub fn kernel_basis<T: Scalar>(ocp: &OcpInstance<T>, tol: &Tolerances) -> KernelBasis<T> {
    KernelBasis {
        basis: null_space(&ocp.stacked_dynamics(), tol.ker_tol),
    }
}

fn stationarity_with<T: Scalar>(ocp: &OcpInstance<T>, kernel: &KernelBasis<T>, ss: &SteadyState<T>) -> T {
    let (zx, vu) = ocp.shifted_linear_terms(ss);
    let g = SteadyState::new(zx, vu).stacked();
    kernel.project(&g).norm()
}

/// `‖P_{ker[A B]} (z + CᵀC x_e, v + KᵀK u_e)‖`.
pub fn stationarity_residual<T: Scalar>(ocp: &OcpInstance<T>, ss: &SteadyState<T>, tol: &Tolerances) -> T {
    stationarity_with(ocp, &kernel_basis(ocp, tol), ss)
}

fn scale_of<T: Scalar>(ocp: &OcpInstance<T>, ss: &SteadyState<T>) -> T {
    let q = ocp.block_cost().max_abs();
    T::one() + q * (ss.x_e.norm() + ss.u_e.norm()) + ocp.z().norm() + ocp.v().norm()
}

pub fn solve_steady_state<T: Scalar>(
    ocp: &OcpInstance<T>,
    tol: &Tolerances,
) -> Result<SteadyStateSolution<T>, SteadyStateError> {
    let kernel = kernel_basis(ocp, tol);
    if kernel.dim() == 0 {
        return Err(SteadyStateError::EmptyKernel);
    }
    let bk = &kernel.basis;
    let t_reduced = SymmetricOperator::symmetrize(bk.transpose() * ocp.block_cost().matrix() * bk);
    let q_reduced = bk.transpose() * ocp.stacked_linear();
    let class = classify(&t_reduced, t_reduced.pos_tol(tol))?;
    if !class.is_strictly_positive() {
        let min_eig = match class {
            crate::spectral::PositivityClass::Indefinite { min_eig } => min_eig.as_f64(),
            _ => 0.0,
        };
        return Err(SteadyStateError::NotCoercive { min_eig });
    }
    let t_inv = pinv_sym(&t_reduced, T::zero())?;
    let coordinates = -(t_inv.matrix() * &q_reduced);
    let y = bk * &coordinates;
    let ss = SteadyState::from_stacked(&y, ocp.n());
    let optimal_cost = ocp.cost(&ss.x_e, &ss.u_e);
    let stationarity_residual = stationarity_with(ocp, &kernel, &ss);
    let tolerance = T::lit(tol.eq_tol) * scale_of(ocp, &ss);
    if stationarity_residual > tolerance {
        return Err(SteadyStateError::StationarityViolated {
            residual: stationarity_residual.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(SteadyStateSolution {
        ss,
        kernel,
        t_reduced,
        q_reduced,
        coordinates,
        optimal_cost,
        stationarity_residual,
    })
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

    fn scalar(k: f64, z: f64) -> OcpInstance<f64> {
        OcpInstance::new_deferred(m1(-1.0), m1(1.0), m1(1.0), m1(k), v1(z), v1(0.0)).unwrap()
    }

    /// Cost along the kernel line x = u: ℓ(t, t) minimized on a grid.
    fn grid_min_on_diagonal(ocp: &OcpInstance<f64>) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for i in -40000..=40000 {
            let t = i as f64 * 5e-5;
            let c = ocp.running_cost(&v1(t), &v1(t)).unwrap();
            if c < best.0 {
                best = (c, t);
            }
        }
        best
    }

    #[test]
    fn kernel_examples() {
        let tol = Tolerances::default();
        let k = kernel_basis(&scalar(1.0, -1.0), &tol);
        assert_eq!(k.dim(), 1);
        assert_abs_diff_eq!(k.basis[(0, 0)], k.basis[(1, 0)], epsilon = 1e-14);
        assert_abs_diff_eq!(k.basis[(0, 0)].abs(), std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);

        let ocp = OcpInstance::new_deferred(
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::identity(2, 2),
            m1(1.0),
            DVector::zeros(2),
            v1(0.0),
        )
        .unwrap();
        let k = kernel_basis(&ocp, &tol);
        assert_eq!(k.dim(), 1);
        assert_abs_diff_eq!(k.basis[(2, 0)].abs(), 1.0, epsilon = 1e-14);

        let ocp = OcpInstance::new_deferred(m1(0.0), m1(0.0), m1(1.0), m1(1.0), v1(0.0), v1(0.0)).unwrap();
        assert_eq!(kernel_basis(&ocp, &tol).dim(), 2);
    }

    #[test]
    fn worked_example() {
        let ocp = scalar(1.0, -1.0);
        let sol = solve_steady_state(&ocp, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(sol.t_reduced.matrix()[(0, 0)], 1.0, epsilon = 1e-14);
        // q = B_kᵀ(z, v) with B_k = ±(1,1)/√2.
        let sign = sol.kernel.basis[(0, 0)].signum();
        assert_abs_diff_eq!(sign * sol.q_reduced[0], -std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.ss.x_e[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.ss.u_e[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.optimal_cost, -0.5, epsilon = 1e-14);
        let (grid_cost, grid_t) = grid_min_on_diagonal(&ocp);
        assert_abs_diff_eq!(sol.optimal_cost, grid_cost, epsilon = 1e-8);
        assert_abs_diff_eq!(grid_t, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn zero_linear_terms_give_origin() {
        let sol = solve_steady_state(&scalar(1.0, 0.0), &Tolerances::default()).unwrap();
        assert_eq!(sol.ss.x_e[0], 0.0);
        assert_eq!(sol.optimal_cost, 0.0);
    }

    #[test]
    fn heavier_input_cost() {
        let ocp = scalar(2.0, -1.0);
        let sol = solve_steady_state(&ocp, &Tolerances::default()).unwrap();
        assert_abs_diff_eq!(sol.t_reduced.matrix()[(0, 0)], 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.ss.x_e[0], 0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.ss.u_e[0], 0.2, epsilon = 1e-14);
        let (grid_cost, _) = grid_min_on_diagonal(&ocp);
        assert_abs_diff_eq!(sol.optimal_cost, grid_cost, epsilon = 1e-8);
    }

    #[test]
    fn stationarity_examples() {
        let ocp = scalar(1.0, -1.0);
        let tol = Tolerances::default();
        assert_abs_diff_eq!(
            stationarity_residual(&ocp, &SteadyState::new(v1(0.5), v1(0.5)), &tol),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            stationarity_residual(&ocp, &SteadyState::origin(1, 1), &tol),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-14
        );
        assert_eq!(stationarity_residual(&scalar(1.0, 0.0), &SteadyState::origin(1, 1), &tol), 0.0);
    }

    #[test]
    fn error_paths() {
        let tol = Tolerances::default();
        // B = 0, A invertible: ker[A B] = {0} × R, but with K = 0 the
        // reduced operator vanishes.
        let ocp = OcpInstance::new_deferred(m1(1.0), m1(0.0), m1(1.0), m1(0.0), v1(0.0), v1(0.0)).unwrap();
        assert!(matches!(
            solve_steady_state(&ocp, &tol),
            Err(SteadyStateError::NotCoercive { .. })
        ));
        let ocp = OcpInstance::new_deferred(
            m1(1.0),
            DMatrix::zeros(1, 0),
            m1(1.0),
            DMatrix::zeros(0, 0),
            v1(0.0),
            DVector::zeros(0),
        )
        .unwrap();
        assert_eq!(solve_steady_state(&ocp, &tol), Err(SteadyStateError::EmptyKernel));
    }

    #[test]
    fn invertible_a_with_zero_input_map_pins_state_to_origin() {
        let ocp = OcpInstance::new_deferred(m1(1.0), m1(0.0), m1(1.0), m1(1.0), v1(3.0), v1(-2.0)).unwrap();
        let sol = solve_steady_state(&ocp, &Tolerances::default()).unwrap();
        assert_eq!(sol.kernel.dim(), 1);
        assert_abs_diff_eq!(sol.ss.x_e[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sol.ss.u_e[0], 2.0, epsilon = 1e-14);
    }
}
