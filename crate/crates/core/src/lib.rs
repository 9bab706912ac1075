//! Exponential tilts and I-projections of finite-alphabet laws, with exact
//! (method-of-types) and Monte Carlo checks of Gibbs conditioning.

pub mod error;
pub mod gibbs;
pub mod gsm;
pub mod oracle;
pub mod rng;
pub mod simplex;
pub mod tilt;

pub use error::{Error, Result};
