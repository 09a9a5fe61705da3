//! Cahn–Hilliard equation with a logarithmic potential on evolving
//! triangulated surfaces: piecewise-linear evolving surface finite elements
//! with mass lumping, backward Euler in time and damped Newton solves.

pub mod assembly;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod io;
pub mod krylov;
pub mod lu;
pub mod mesh;
pub mod operators;
pub mod potential;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod study;
pub mod verify;

pub use error::{Error, Result};
