//! Numerical laboratory for directional Hilbert transforms and maximal
//! operators over lacunary direction sets on periodic grids.

pub mod config;
pub mod decomposition;
pub mod directions;
pub mod error;
pub mod grid;
pub mod io;
pub mod normlab;
pub mod operators;
pub mod plot;
pub mod suite;
pub mod symbols;
pub mod weights;

pub use error::{Error, Result};
