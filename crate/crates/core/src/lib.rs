//! Weak supervision by turning heuristic labelers directly into losses.
//!
//! Pipeline: [`data`] builds feature vectors, [`labelers`] turns rules into a
//! vote matrix and smoothed gradients, [`losses`] aggregates per-labeler
//! losses (optionally with an input-gradient hinge penalty), [`nnet`] is the
//! classifier and [`train`] runs training, selection and sweeps.

pub mod data;
pub mod error;
pub mod labelers;
pub mod labelmodels;
pub mod losses;
pub mod nnet;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
