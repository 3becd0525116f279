//! Choosing the number of hidden states of a discrete HMM from the number of
//! critical points of motion-capture sequences.
//!
//! The pipeline resamples and normalizes each sensor row ([`preprocess`]),
//! counts its local extrema ([`critpoints`]), discretizes values with a
//! scalar k-means codebook ([`quantize`]), trains HMMs over a range of state
//! counts ([`hmm`]) and rates the critical-point predictor by where its AIC
//! falls between the sweep's best and worst ([`modelselect`]).
//!
//! The state sweep is the expensive part; it runs on rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise.

pub mod cli;
pub mod critpoints;
pub mod dataset;
pub mod error;
pub mod hmm;
pub mod modelselect;
pub mod par;
pub mod preprocess;
pub mod quantize;
pub mod seed;

pub use error::{Error, Result};
