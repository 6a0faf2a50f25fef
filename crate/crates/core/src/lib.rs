//! Wyner common information of discrete multi-view distributions.
//!
//! Two solvers are provided: a variational alternating-minimization solver
//! over per-view decoders ([`variational`]) and an ADMM splitting solver over
//! the encoder `P(Z | X1, X2)` ([`representation`]), plus a plain
//! projected-gradient baseline. [`data`] builds the circulant two-view
//! benchmark distributions and [`eval`] maps encoders onto the information
//! plane and scores them as unsupervised clusterings.

pub mod data;
pub(crate) mod descent;
pub mod error;
pub mod eval;
pub mod info;
pub mod model;
pub mod record;
pub mod representation;
pub mod variational;

pub use error::{Error, Result};
