#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub mod problems;
pub mod pinv;
pub mod spectral;
pub mod choice;
pub mod projection;
pub mod nonlinear;
pub mod statistics;
pub mod bayes;
pub mod experiment;
pub mod acceptance;
