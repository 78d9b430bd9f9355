//! Multilabel environmental sound classification.
//!
//! The pipeline runs from raw WAV segments to mixed multilabel corpora
//! ([`mixer`]), log-Mel and MFCC features ([`features`]), a small
//! convolutional network with handwritten backpropagation ([`model`]),
//! Adam training ([`trainer`]) and thresholded multilabel metrics
//! ([`metrics`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio_io;
pub mod cli;
pub mod error;
pub mod features;
pub mod metrics;
pub mod matrix;
pub mod mixer;
pub mod model;
pub mod pipeline;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use matrix::Matrix;
