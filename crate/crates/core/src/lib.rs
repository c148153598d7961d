//! Truncated Wiener chaos calculus on `ℝ^d` with the standard Gaussian
//! measure, and local limit theorem experiments built on it.
//!
//! Densities are [`ChaosVector`]s: coefficient vectors in the multi-index
//! Hermite basis `H_α(w) = Π He_{α_i}(w_i)` of a [`GaussianSpace`] truncated
//! at total degree `K`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audit;
pub mod basis;
pub mod chaos;
pub mod error;
pub mod experiment;
pub mod limit;
pub mod llt;
pub mod measures;
pub mod output;
pub mod quadrature;
pub mod rng;
pub mod sde;
pub mod wick;

pub use basis::{GaussianSpace, MultiIndex};
pub use chaos::ChaosVector;
pub use error::{Error, Result};
pub use wick::TruncationPolicy;
