//! Deformation quantization on Kähler charts.
//!
//! Two halves share this crate:
//!
//! * a symbolic engine over exact complex-rational jets ([`jets`], [`formal`],
//!   [`karabegov`], [`graphs`]) computing star-product coefficient tables of
//!   separation-of-variables type, their formal Berezin transforms, and
//!   graph-expansion products;
//! * a numerical Berezin-Toeplitz harness on the Riemann sphere ([`cp1`])
//!   with Toeplitz matrices, coherent states, symbols and asymptotic fits.

pub mod cp1;
pub mod error;
pub mod formal;
pub mod graphs;
pub mod jets;
pub mod karabegov;

pub use error::{Error, Result};
