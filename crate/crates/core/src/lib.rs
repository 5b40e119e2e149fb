//! Numerical core for one-dimensional nonlocal diffusion with volume
//! constraints and for identifying the two-point diffusion parameter
//! `theta(x, y) = theta((x + y) / 2)` from a target state.
//!
//! The crate is `no_std` and only needs `alloc`. IO, file formats, the
//! experiment harness and the command line live in the `nlid` crate.
//!
//! Module map:
//!
//! * [`mesh`]: uniform partitions of `(a - eps, b + eps)`.
//! * [`kernel`]: truncated fractional and integrable kernels.
//! * [`quadrature`]: Gauss-Legendre and Gauss-Jacobi rules.
//! * [`theta`]: the finite-dimensional parameter space and its regularizer.
//! * [`pairs`]: element-pair quadrature for the double integrals.
//! * [`assembly`]: stiffness, load, energy norm, gradient pairing, error functionals.
//! * [`linalg`]: symmetric dense/banded storage and Cholesky.
//! * [`inverse`]: state, adjoint, objective and reduced gradient.
//! * [`optimizer`]: dense BFGS with a strong-Wolfe line search.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod assembly;
pub mod error;
pub mod field;
pub mod inverse;
pub mod kernel;
pub mod linalg;
pub mod mesh;
pub mod optimizer;
pub mod pairs;
pub mod quadrature;
pub mod theta;

mod math;

pub use assembly::{NonlocalOperator, NonlocalSystem, ReducedSystem, Region};
pub use error::{Error, Result};
pub use field::StateField;
pub use inverse::{IdentificationProblem, ObjectiveReport, ProblemData};
pub use kernel::{KernelFamily, KernelSpec};
pub use mesh::Mesh1D;
pub use optimizer::{BfgsConfig, OptRun, OptStatus};
pub use quadrature::QuadratureOrder;
pub use theta::{AdmissibleBox, MidpointFunction, ThetaBasis, ThetaField};
