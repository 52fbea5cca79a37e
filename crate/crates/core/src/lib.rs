//! The logarithmic Dirichlet Laplacian on concrete Ahlfors regular
//! metric-measure spaces.
//!
//! The operator is the generator of the Dirichlet form
//!
//! ```text
//! E(f, g) = 1/2 ∫∫ (f(x) - f(y)) (g(x) - g(y)) / d(x, y)^δ dμ(y) dμ(x)
//! ```
//!
//! on an Ahlfors δ-regular space. This crate builds three families of such
//! spaces (full shifts, compact intervals, the circle), discretizes the form
//! by Galerkin projection, and compares the resulting spectra against the
//! closed-form diagonalizations that are available for those families: Haar
//! wavelets on shifts, Legendre polynomials on intervals and Fourier modes on
//! the circle.
//!
//! Module map:
//!
//! * [`spaces`]: the metric-measure spaces, ball measures, Ahlfors checks.
//! * [`quadrature`]: annulus integrals and the truncated-kernel smoothing operator.
//! * [`form_engine`]: Galerkin assembly, the generalized eigensolver and the
//!   pointwise integral representation.
//! * [`closed_forms`]: exact spectra used as oracles.
//! * [`dini`]: moduli of continuity, Dini norms, commutators with multipliers.
//! * [`spectra`]: eigenvalue growth, singular values, heat traces.
//! * [`conformal`]: Möbius actions on the circle.
//! * [`cli`]: batch experiment runner.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod closed_forms;
pub mod conformal;
pub mod dini;
pub mod error;
pub mod form_engine;
pub mod quadrature;
pub mod spaces;
pub mod spectra;

pub use error::{Error, Result};
