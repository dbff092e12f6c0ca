//! Numerical workbench for dyadic models of the Bergman projection on the unit disc.
//!
//! The crate is organised bottom-up: [`dyadic`] holds the two shifted grids and their
//! Carleson boxes, [`field`] discretises the disc into a mesh compatible with both grids,
//! [`kernel`] evaluates the Bergman-type kernels, [`two_weight`] and [`bekolle`] work with
//! positive dyadic operators and weights, [`sarason`] handles analytic symbols and
//! Toeplitz products, and [`stegenga`] builds the Cantor-set counterexample.

pub mod bekolle;
pub mod dyadic;
pub mod error;
pub mod field;
pub mod kernel;
pub mod quadrature;
pub mod report;
pub mod sarason;
pub mod stegenga;
pub mod two_weight;

pub use error::{Error, Result};
pub use num_complex::Complex64;
