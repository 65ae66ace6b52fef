//! Bayesian density and probability-mass estimation from stratified survey
//! samples.
//!
//! The base model is a truncated stick-breaking Dirichlet-process mixture of
//! normals fit by blocked Gibbs sampling to the *selected* sample. Survey
//! weights enter through a per-sweep Dirichlet draw of population-level
//! mixture weights, `λ̃ ~ Dir(a + Σ_{i: s_i = h} w_i / c̃)`, which maps each
//! draw of the sample posterior to a draw of the population density. Count
//! data are handled with a rounded-kernel latent augmentation.
//!
//! The crate also carries the weighted kernel density baseline, three
//! regression competitors (model-based Horvitz–Thompson, polynomial
//! regression with stratum random effects, Gaussian-process regression on
//! log-weights) and a harness that runs the built-in simulation scenarios
//! end to end.
//!
//! Grid evaluation, posterior summarization, population generation and
//! method fan-out run on rayon when the `parallel` feature is enabled (the
//! default); see [`exec::Exec`].

// `!(x > 0.0)` is used on purpose so NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjust;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod counts;
pub mod dpmm;
pub mod error;
pub mod exec;
pub mod harness;
pub mod kde;
pub mod math;
pub mod proposed;
pub mod samplers;
pub mod summary;
pub mod survey_data;

pub use error::{Error, Result};
