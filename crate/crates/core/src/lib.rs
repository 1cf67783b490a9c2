//! Poisson kernels of elliptic operators
//!
//! ```text
//! L = (a(dy) + b(y)² dy) ∂xx + 2 b(y) ∂xy + ∂yy
//! ```
//!
//! on the half-plane or a strip, computed by solving the spectral ODE in `y`
//! for each Fourier frequency and inverting the transform, together with
//! numerical testers for the shape properties of the resulting kernels
//! (bell shape, total positivity, Rogers functions) and a Monte Carlo
//! sampler for the hitting distribution of the associated diffusion.

pub mod analysis;
pub mod closedform;
pub mod error;
pub mod factorization;
pub mod kernel;
pub mod montecarlo;
pub mod operators;
pub mod par;
pub mod quadrature;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use operators::{Atom, Height, Mesh, OperatorSpec, Profile};
pub use par::Execution;
