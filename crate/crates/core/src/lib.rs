//! Space-time SINR random graphs: point processes, counter-based marks,
//! SINR edges, delays, numerical oracles and Monte Carlo studies.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod delay;
pub mod error;
pub mod experiments;
pub mod marks;
pub mod oracle;
pub mod params;
pub mod pointproc;
pub mod sinr;
pub mod spatial;

pub use error::{Error, Result};
