//! Thin-tube limit of magnetic Schrödinger dynamics on embedded surfaces.
pub mod cutoff;
pub mod error;
pub mod evolution;
pub mod fields;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod krylov;
pub mod operators;
pub use error::{Error, Result};
