//! Clickbait scoring for social-media posts.
//!
//! The crate covers the full pipeline: challenge-format ingestion
//! ([`data`]), text cleaning and indexing ([`text`]), lexicon cue features
//! ([`cues`]), a small reverse-mode autodiff engine ([`nn`]), late-fusion
//! CNN/LSTM regressors with self-training ([`model`]), a tf-idf + AdaBoost.R2
//! baseline ([`baseline`]), metrics ([`eval`]) and image-side analysis
//! ([`media`]).
//!
//! Data-parallel loops go through [`Exec`]; disable the default `parallel`
//! feature for a purely sequential build.

pub mod cues;
pub mod data;
pub mod error;
pub mod exec;
pub mod baseline;
pub mod eval;
pub mod media;
pub mod model;
pub mod nn;
pub mod synth;
pub mod text;

pub use error::{Error, Result};
pub use exec::Exec;
