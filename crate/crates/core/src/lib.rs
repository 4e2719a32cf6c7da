//! Simulation and locally adaptive estimation of evolutionary wavelet spectra
//! of locally stationary wavelet processes.

pub mod adaptive;
pub mod banded;
pub mod baseline;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod lsw;
pub mod montecarlo;
pub mod nuisance;
pub mod periodogram;
pub mod rng;
pub mod spec_file;
pub mod spectrum;
pub mod variance;
pub mod wavelet;

pub use error::{LswError, Result};
