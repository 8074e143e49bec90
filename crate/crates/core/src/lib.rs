//! Latent geometric Brownian motion model for predicting whether a user's
//! next social media post declares protest.
//!
//! A candidate user's status messages are projected into a shared latent
//! space and treated as observations of a geometric Brownian motion whose
//! drift is modulated by the messages that mention the user. Parameters are
//! fitted per user by regularized maximum likelihood, the next-post latent
//! vector is predicted from the fitted Gaussian transition, and a linear
//! discriminant classifies the stacked predictions.
//!
//! Modules follow the pipeline:
//!
//! - [`corpus`]: ingestion, tokenization, vocabularies, sparse count matrices,
//!   interaction network snapshots and per-user timelines.
//! - [`dynamics`]: latent projections and the GBM transition law.
//! - [`learner`]: likelihood, homogeneity regularizer, gradients and the
//!   per-user training loop.
//! - [`predictor`]: feature matrix, Fisher discriminant, metrics, experiments.
//! - [`sociolab`]: protest lexicon, tie scores and t-tests.
//! - [`synthgen`]: seeded synthetic corpora with planted ground truth.

pub mod corpus;
pub mod dynamics;
mod error;
pub mod exec;
pub mod learner;
pub mod predictor;
pub mod sociolab;
pub mod synthgen;

pub use error::{Error, Result};
pub use exec::Execution;
