//! Mild, strict and local solutions of stochastic evolution equations
//!
//! ```text
//! dX + AX dt = F(t, X) dt + G(t, X) dw_t,   X(0) = ξ
//! ```
//!
//! on E = (R^d, ℓ^p), with A a positive diagonal operator and w a scalar
//! Brownian motion. The crate solves these equations by the semigroup
//! (variation of constants) formulation and checks every quantitative
//! estimate of the theory against closed forms and Monte Carlo ensembles.

// `!(x > 0.0)` deliberately rejects NaN; quadrature loops read best indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod brownian;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod holder;
pub mod initial;
pub mod linear;
pub mod multiplicative;
pub mod profile;
pub mod rng;
pub mod scenario;
pub mod sectorial;
pub mod semilinear;
pub mod special;
pub mod state_space;
pub mod stats;
pub mod volterra;

pub use error::{Result, SpdeError};
