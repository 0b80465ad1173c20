//! Fully spectral discretization of the linear inhomogeneous BGK equation
//! with an even polynomial confinement potential.
//!
//! The perturbation `h(t, x, v)` is expanded on normalized Hermite
//! polynomials in velocity and on orthonormal polynomials for the weight
//! `e^-phi` in space. The resulting linear ODE system is advanced with
//! implicit Euler; diagnostics track the L2(M) norm, the discrete
//! conservation laws and fitted decay rates.

// `!(x > 0.0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod conjecture;
pub mod dd;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod orthopoly;
pub mod potential;
pub mod quadrature;
pub mod scheme;

pub use error::{Error, Result};
