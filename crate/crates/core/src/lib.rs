//! Lie-rank certificates, worst-case growth rates and time-reversal duality for
//! persistently excited linear systems `x' = (A + α(t) B K) x`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod control;
pub mod error;
pub mod lie;
pub mod matcore;
pub mod projective;
pub mod rates;
pub mod signals;
pub mod spinchk;

pub use error::{Error, Result};
pub use matcore::Matrix;
