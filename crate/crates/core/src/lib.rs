//! Multiclass classification with a reject option.
//!
//! The crate provides the abstain(α) loss and Chow's rule ([`loss`]), the
//! convex surrogates CS, OVA and BEP with their threshold predictors
//! ([`surrogate`]), numerical checks of their excess-risk bounds
//! ([`calibration`]), kernel machinery ([`kernel`]), trainers ([`solver`])
//! and dataset utilities ([`data`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod calibration;
pub mod data;
mod error;
pub mod kernel;
pub mod loss;
mod par;
pub mod solver;
pub mod surrogate;

pub use error::{Error, Result};
pub use loss::{AbstainLoss, Prediction, SimplexVector};
pub use surrogate::{CodeMap, SurrogateKind, SurrogateSpec};
