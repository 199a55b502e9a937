//! Dynamic source analysis for gridded spatiotemporal fields.
//!
//! The crate extracts dynamically independent sources from nonlinearly mixed
//! observables, decomposes fields into coupled spatial and temporal structures
//! through a coevolution manifold, scores linear and nonlinear predictability
//! of a predictand from the sources, and simulates predictand distributions
//! with the fitted dynamic model.
//!
//! Entry points by task:
//!
//! - [`field`]: gridded field model, file formats, preprocessing
//! - [`numdiff`]: high-order time/space derivatives and state-space gradients
//! - [`interaction`]: dynamic interaction tensors and their structures
//! - [`infostats`]: negentropy, mutual information, interaction information
//! - [`extract`]: source extraction, physical disambiguation, retention cut-off
//! - [`spacetime`]: coevolution manifold, decomposition/composition operators
//! - [`predictability`]: normalized codependence maps with Monte-Carlo nulls
//! - [`dynsim`]: dynamic simulation of predictand distributions
//! - [`synthetic`]: ground-truth generators and brute-force oracles
//! - [`cli`]: batch pipeline commands behind the `dsa` binary
//!
//! The `examples/` directory holds one runnable example per capability; the
//! acceptance suite lives in `tests/acceptance.rs`.

pub mod cli;
pub mod config;
pub mod dynsim;
pub mod error;
pub mod extract;
pub mod field;
pub mod infostats;
pub mod integrate;
pub mod interaction;
pub mod linalg;
pub mod numdiff;
pub mod poly;
pub mod predictability;
pub mod rng;
pub mod spacetime;
pub mod synthetic;

pub use error::{Error, Result};
pub use field::{Grid, Partition, SpatioTemporalField, TimeAxis};
