//! Forecasting weekly crime counts over areal units with spatial panel
//! regressions and tree/neural ensembles, evaluated by rolling one-step
//! forecasts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod econ;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod linalg;
pub mod ml;
pub mod rng;
pub mod spatial;

pub use error::{Error, Result};
