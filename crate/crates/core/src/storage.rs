//! Quadratic storage functions `V_{P,w}(x) = ⟨Px,x⟩ + 2⟨w,x⟩`.
//!
//! `V_{P,w}` is bounded from below iff `P ⪰ 0` and `w ∈ ran P^{1/2}`, and has
//! a minimizer iff `w ∈ ran P`, the minimizers being `P⁻¹{−w}`. In finite
//! dimensions the two range conditions coincide; both routes are computed
//! and compared.

use nalgebra::{DMatrix, DVector};

use crate::ocp::OcpInstance;
use crate::scalar::Scalar;
use crate::spectral::{
    classify_decomposed, eig_sym, range_inclusion_vec, PositivityClass, SpectralError,
    SymmetricOperator,
};
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticStorage<T: Scalar> {
    pub p: SymmetricOperator<T>,
    pub w: DVector<T>,
}

/// Verdict on boundedness from below.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedBelow<T: Scalar> {
    pub bounded: bool,
    /// `−‖v‖²` with `v` the minimum-norm solution of `P^{1/2} v = w`.
    pub lower_bound: Option<T>,
    pub witness_v: Option<DVector<T>>,
    /// Direction `d` with `V(t d) → −∞` as `t → ∞`, present when unbounded.
    pub descent_ray: Option<DVector<T>>,
    /// Whether the `ran P` route agreed with the `ran P^{1/2}` route.
    pub routes_agree: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizerSet<T: Scalar> {
    pub exists: bool,
    /// Minimum-norm solution of `Px = −w`.
    pub representative: Option<DVector<T>>,
    /// Orthonormal basis of `ker P`; the minimizers are
    /// `representative + span(kernel)`.
    pub kernel: DMatrix<T>,
}

impl<T: Scalar> QuadraticStorage<T> {
    pub fn new(p: SymmetricOperator<T>, w: DVector<T>) -> Self {
        assert_eq!(p.dim(), w.len(), "storage: P and w dimensions differ");
        Self { p, w }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn evaluate(&self, x: &DVector<T>) -> T {
        self.p.quadratic_form(x) + T::two() * self.w.dot(x)
    }

    /// `V′(x)h = 2⟨h, Px + w⟩`.
    pub fn derivative_pairing(&self, x: &DVector<T>, h: &DVector<T>) -> T {
        T::two() * h.dot(&(self.p.matrix() * x + &self.w))
    }

    pub fn bounded_below(&self, tol: &Tolerances) -> Result<BoundedBelow<T>, SpectralError> {
        let pos_tol = self.p.pos_tol(tol);
        let d = eig_sym(&self.p)?;
        if let PositivityClass::Indefinite { .. } = classify_decomposed(&d, pos_tol) {
            // Eigenvector of the most negative eigenvalue, oriented so that
            // the linear term does not help.
            let mut dir = d.eigenvectors.column(0).clone_owned();
            if self.w.dot(&dir) > T::zero() {
                dir = -dir;
            }
            return Ok(BoundedBelow {
                bounded: false,
                lower_bound: None,
                witness_v: None,
                descent_ray: Some(dir),
                routes_agree: true,
            });
        }
        // Eigenvalues at or below pos_tol belong to the kernel, as in the
        // descent-ray branch; their roots would otherwise survive the cutoff.
        let root = d.apply(|l| if l > pos_tol { l.sqrt() } else { T::zero() });
        let via_root = range_inclusion_vec(&self.w, root.matrix(), tol.range_tol);
        let via_p = range_inclusion_vec(&self.w, self.p.matrix(), tol.range_tol);
        let routes_agree = via_root.contained == via_p.contained;
        if via_root.contained {
            let v = via_root.witness_vector();
            Ok(BoundedBelow {
                bounded: true,
                lower_bound: Some(-v.norm_squared()),
                witness_v: Some(v),
                descent_ray: None,
                routes_agree,
            })
        } else {
            // Component of w in ker P: V(−t w₁) = −2t‖w₁‖² + O(t² · pos_tol).
            let kernel = d.basis_where(|l| l <= pos_tol);
            let w1 = &kernel * (kernel.transpose() * &self.w);
            let dir = if w1.norm() > T::zero() {
                -w1
            } else {
                // Range test failed without a numerical kernel component:
                // fall back to the least-squares residual direction.
                -(&self.w - self.p.matrix() * via_p.witness_vector())
            };
            Ok(BoundedBelow {
                bounded: false,
                lower_bound: None,
                witness_v: None,
                descent_ray: Some(dir),
                routes_agree,
            })
        }
    }

    pub fn minimizer_set(&self, tol: &Tolerances) -> Result<MinimizerSet<T>, SpectralError> {
        let pos_tol = self.p.pos_tol(tol);
        let d = eig_sym(&self.p)?;
        let kernel = d.basis_where(|l| l.abs() <= pos_tol);
        if !classify_decomposed(&d, pos_tol).is_psd() {
            return Ok(MinimizerSet {
                exists: false,
                representative: None,
                kernel,
            });
        }
        let inc = range_inclusion_vec(&(-&self.w), self.p.matrix(), tol.range_tol);
        Ok(MinimizerSet {
            exists: inc.contained,
            representative: inc.contained.then(|| inc.witness_vector()),
            kernel,
        })
    }
}

/// Whether `ℓ` is bounded below: `z ∈ ran Cᵀ` and `v ∈ ran Kᵀ`.
pub fn cost_bounded_below<T: Scalar>(ocp: &OcpInstance<T>, tol: &Tolerances) -> bool {
    range_inclusion_vec(ocp.z(), &ocp.c().transpose(), tol.range_tol).contained
        && range_inclusion_vec(ocp.v(), &ocp.k().transpose(), tol.range_tol).contained
}

/// The running cost viewed as a storage function on `H × U`:
/// `(diag(CᵀC, KᵀK), (z, v))`.
pub fn cost_as_storage<T: Scalar>(ocp: &OcpInstance<T>) -> QuadraticStorage<T> {
    QuadraticStorage::new(ocp.block_cost(), ocp.stacked_linear())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn storage(n: usize, p: &[f64], w: &[f64]) -> QuadraticStorage<f64> {
        QuadraticStorage::new(
            SymmetricOperator::new(DMatrix::from_row_slice(n, n, p), 1e-10).unwrap(),
            DVector::from_column_slice(w),
        )
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(storage(1, &[1.0], &[0.0]).evaluate(&DVector::from_vec(vec![2.0])), 4.0);
        let s = storage(2, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0]);
        assert_eq!(s.evaluate(&DVector::from_vec(vec![0.0, -1.0])), -2.0);
        assert_eq!(s.evaluate(&DVector::zeros(2)), 0.0);
    }

    #[test]
    fn derivative_examples() {
        let one = DVector::from_vec(vec![1.0]);
        assert_eq!(storage(1, &[1.0], &[0.0]).derivative_pairing(&one, &one), 2.0);
        assert_eq!(
            storage(1, &[0.0], &[3.0]).derivative_pairing(&DVector::from_vec(vec![-7.0]), &one),
            6.0
        );
    }

    #[test]
    fn bounded_below_examples() {
        let tol = Tolerances::default();
        let b = storage(1, &[1.0], &[1.0]).bounded_below(&tol).unwrap();
        assert!(b.bounded && b.routes_agree);
        assert_abs_diff_eq!(b.lower_bound.unwrap(), -1.0, epsilon = 1e-14);

        let s = storage(2, &[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0]);
        let b = s.bounded_below(&tol).unwrap();
        assert!(!b.bounded && b.routes_agree);
        let d = b.descent_ray.unwrap();
        assert!(s.evaluate(&(&d * 1e6)) < s.evaluate(&(&d * 1e3)));
        assert!(s.evaluate(&(&d * 1e3)) < 0.0);

        let s = storage(1, &[-1.0], &[0.0]);
        let b = s.bounded_below(&tol).unwrap();
        assert!(!b.bounded);
        assert!(s.evaluate(&(b.descent_ray.unwrap() * 1e3)) < -1e5);
    }

    #[test]
    fn minimizer_examples() {
        let tol = Tolerances::default();
        let s = storage(1, &[1.0], &[1.0]);
        let mset = s.minimizer_set(&tol).unwrap();
        let x = mset.representative.unwrap();
        assert_abs_diff_eq!(x[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.evaluate(&x), -1.0, epsilon = 1e-14);

        let mset = storage(1, &[0.0], &[0.0]).minimizer_set(&tol).unwrap();
        assert!(mset.exists);
        assert_eq!(mset.representative.unwrap()[0], 0.0);
        assert_eq!(mset.kernel.ncols(), 1);

        let mset = storage(2, &[1.0, 0.0, 0.0, 0.0], &[1.0, 0.0]).minimizer_set(&tol).unwrap();
        let x = mset.representative.unwrap();
        assert_abs_diff_eq!(x[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-14);
        assert_eq!(mset.kernel.ncols(), 1);
        assert_abs_diff_eq!(mset.kernel[(1, 0)].abs(), 1.0, epsilon = 1e-14);

        assert!(!storage(1, &[-1.0], &[0.0]).minimizer_set(&tol).unwrap().exists);
    }

    #[test]
    fn cost_bounded_below_examples() {
        let tol = Tolerances::default();
        let m1 = |x: f64| DMatrix::from_element(1, 1, x);
        let scalar = OcpInstance::new_deferred(
            m1(-1.0),
            m1(1.0),
            m1(1.0),
            m1(1.0),
            DVector::from_vec(vec![-1.0]),
            DVector::from_vec(vec![0.0]),
        )
        .unwrap();
        assert!(cost_bounded_below(&scalar, &tol));

        let ocp = OcpInstance::new_deferred(
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            m1(1.0),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![0.0]),
        )
        .unwrap();
        assert!(!cost_bounded_below(&ocp, &tol));
        assert!(!cost_as_storage(&ocp).bounded_below(&tol).unwrap().bounded);
        let zeroed = ocp.with_linear_terms(DVector::zeros(2), DVector::zeros(1)).unwrap();
        assert!(cost_bounded_below(&zeroed, &tol));
    }

    #[test]
    fn roundoff_eigenvalue_counts_as_kernel() {
        // P = diag(4, 1e-15) with w along the second axis: the tiny eigenvalue
        // is below pos_tol, so V(−t e₂) = −2t·w₂ + O(t²·1e-15) is unbounded.
        let tol = Tolerances::default();
        let b = storage(2, &[4.0, 0.0, 0.0, 1e-15], &[1.0, 0.5]).bounded_below(&tol).unwrap();
        assert!(!b.bounded);
        assert!(b.routes_agree);
        let d = b.descent_ray.unwrap();
        assert!(d[1] < 0.0 && d[0].abs() < 1e-12);
    }
}
