//! Augmented graphs of self-similar sets built from exact similitudes.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod graph;
pub mod hyperbolic;
pub mod intersect;
pub mod presets;
pub mod rational;
pub mod similitude;
pub mod symbolic;
