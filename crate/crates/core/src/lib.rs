#![allow(clippy::needless_range_loop)]

//! Pathological voice classification toolkit.
//!
//! Sustained-vowel recordings are turned into MFCC + delta summary vectors,
//! reduced by random-forest importance thresholding and classified by a
//! one-vs-one RBF support vector machine. Hyperparameters are tuned with a
//! sequential-halving-and-classification (SHAC) cascade and scored by
//! stratified k-fold cross-validation.

pub mod cli;
pub mod config;
pub mod dsp;
pub mod error;
pub mod features;
pub mod pipeline;
pub mod shac;
pub mod svm;
pub mod synth;
pub mod tabular;

pub use error::{Error, ErrorCategory, Result};
