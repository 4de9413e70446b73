// negated float comparisons are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod epiproject;
pub mod error;
pub mod io;
pub mod model;
pub mod nnls;
pub mod oracle;
pub mod polyproj;
pub mod problems;
pub mod rates;
pub mod reference;
pub mod solver;
pub mod suite;

pub use error::{Error, Result};
pub use model::*;
