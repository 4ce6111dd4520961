//! Certificates of strict (pre-)dissipativity for linear-quadratic optimal
//! control problems
//!
//! ```text
//! ẋ = Ax + Bu,   ℓ(x, u) = ‖Cx‖² + ‖Ku‖² + 2⟨z, x⟩ + 2⟨v, u⟩
//! ```
//!
//! on finite-dimensional (for instance Galerkin-truncated) data. Storage
//! functions are quadratic, `V(x) = ⟨Px, x⟩ + 2⟨w, x⟩`.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar type for the common cases.

// `!(x > 0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certifier;
pub mod detectability;
pub mod generate;
pub mod ocp;
pub mod scalar;
pub mod spectral;
pub mod steady_state;
pub mod storage;
pub mod tolerances;
pub mod trajectory;

pub use certifier::{
    certify_at, certify_some, CertificateKind, CertifyError, CertifyOptions, DissipativityCertificate,
};
pub use detectability::{storage_from_detectability, DetectabilityError, DetectabilityStorage};
pub use ocp::{OcpError, OcpInstance, SteadyState};
pub use scalar::Scalar;
pub use spectral::SymmetricOperator;
pub use steady_state::{solve_steady_state, SteadyStateSolution};
pub use storage::QuadraticStorage;
pub use tolerances::Tolerances;
pub use trajectory::{simulate, ControlSignal, Trajectory};

pub type Ocp64 = OcpInstance<f64>;
pub type Ocp32 = OcpInstance<f32>;
pub type Symmetric64 = SymmetricOperator<f64>;
pub type Symmetric32 = SymmetricOperator<f32>;
pub type Certificate64 = DissipativityCertificate<f64>;
pub type Certificate32 = DissipativityCertificate<f32>;
pub type SteadyState64 = SteadyState<f64>;
pub type SteadyState32 = SteadyState<f32>;
