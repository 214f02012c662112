//! First-passage percolation on the giant cluster of supercritical
//! Bernoulli bond percolation, at desk scale: reproducible environments,
//! several passage-time models, exact shortest paths, directional
//! time-constant and asymptotic-shape estimation, flat-edge analysis,
//! coupling experiments, and figure rendering.
//!
//! The data-parallel inner loops (per-edge sampling, replica sweeps) run
//! on rayon when the default `parallel` feature is enabled and fall back
//! to sequential execution otherwise; results are identical either way.

pub mod asymptotics;
pub mod environment;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod flatedge;
pub mod lattice;
pub mod passage;
pub mod paths;
pub mod render;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
