//! Numerical operator theory for finite Blaschke products on the unit circle.
//!
//! The crate computes the objects attached to a degree-`N` Blaschke product `b`:
//! its inverse branches, the transfer operator `ℒ`, the outer symbol `J`, the
//! master isometry `C_b = π(J^{1/2})Γ_b`, Cuntz families built from orthonormal
//! bases of the model space `H² ⊖ bH²`, and the Rochberg decomposition
//! `f = Σ v_i·(f_i∘b)`. Operators are rendered as truncated matrices in the
//! exponential basis together with per-column tail certificates, and the
//! [`verify`] module checks the operator identities on certified blocks.
//!
//! ```
//! use cuntz_core::{BlaschkeProduct, CircleGrid};
//! use num_complex::Complex64;
//!
//! let b = BlaschkeProduct::new(vec![Complex64::new(0.5, 0.0)]).unwrap();
//! assert!((b.eval(Complex64::new(1.0, 0.0)).unwrap() + 1.0).norm() < 1e-15);
//! let grid = CircleGrid::new(256).unwrap();
//! let j0 = cuntz_core::boundary::sample_j0(&b, grid).unwrap();
//! assert!((j0.mean().re - 1.0).abs() < 1e-12);
//! ```

pub mod blaschke;
pub mod boundary;
pub mod error;
pub mod model_space;
pub mod operators;
pub mod pullback;
pub mod rochberg;
pub mod transfer;
pub mod verify;

pub use blaschke::{BlaschkeProduct, BranchSystem};
pub use boundary::{BoundaryFunction, CircleGrid, FourierSeries, OuterFunction};
pub use error::{Error, Result};
pub use model_space::{BasisKind, ModelBasis};
pub use operators::{Space, TruncatedOperator};
pub use rochberg::Decomposition;
pub use transfer::{ModuleVector, TransferOperator, TransferOutput};
pub use verify::{Relation, VerificationReport, VerifyConfig};
