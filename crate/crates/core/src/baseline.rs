//! Naive comparison estimator and error metrics.

use crate::error::{domain, Result};
use crate::nuisance::running_mean;
use crate::periodogram::PeriodogramGrid;
use crate::wavelet::Scale;

/// Running mean of the corrected periodogram over `[c - b, c + b]`, read at
/// `c = [z0 T]`.
pub fn running_mean_estimate(grid: &PeriodogramGrid, scale: Scale, z0s: &[f64], bandwidth: usize) -> Result<Vec<f64>> {
    grid.check_scale(scale)?;
    let t = grid.len();
    let means = running_mean(grid.corrected(scale), bandwidth);
    z0s.iter()
        .map(|&z| {
            if !(z > 0.0 && z < 1.0) {
                return Err(domain(format!("target point {z} is outside (0, 1)")));
            }
            Ok(means[((z * t as f64).floor() as usize).min(t - 1)])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorMetrics {
    pub mse: f64,
    pub mad: f64,
}

impl ErrorMetrics {
    /// Squared and absolute errors averaged over every row and point.
    pub fn pooled(rows: &[Vec<f64>], truth: &[f64]) -> Self {
        let mut sq = 0.0;
        let mut abs = 0.0;
        let mut n = 0usize;
        for row in rows {
            assert_eq!(row.len(), truth.len(), "estimate row and truth differ in length");
            for (e, t) in row.iter().zip(truth) {
                let d = e - t;
                sq += d * d;
                abs += d.abs();
                n += 1;
            }
        }
        if n == 0 {
            return Self::default();
        }
        Self { mse: sq / n as f64, mad: abs / n as f64 }
    }

    /// Strictly smaller on both metrics.
    pub fn beats(&self, other: &ErrorMetrics) -> bool {
        self.mse < other.mse && self.mad < other.mad
    }
}
