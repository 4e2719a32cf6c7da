//! Nuisance quantities estimated from a smoothed corrected periodogram `L*`:
//! the norm `sup_z sum_u |c(z, u)|`, the total variation of each scale and
//! the regularization constant `C^2` derived from the norm.

use crate::periodogram::PeriodogramGrid;
use crate::variance::DEFAULT_MT;
use crate::wavelet::{Family, Scale};

/// `C^2 = C2_FACTOR * cNorm^2` unless overridden.
pub const C2_FACTOR: f64 = 0.008;

#[derive(Debug, Clone, PartialEq)]
pub struct NuisanceEstimates {
    pub c_norm: f64,
    /// Indexed by scale index.
    pub tv: Vec<f64>,
    pub c2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuisanceConfig {
    /// Half-width of the running mean.
    pub bandwidth: usize,
    /// Largest lag in the norm; `None` uses `2 L_J`. The default is the
    /// plug-in truncation lag, beyond which the noisy lag terms dominate.
    pub u_max: Option<usize>,
    pub c2_factor: f64,
    /// Swings of `L*` smaller than this many extreme noise deviations
    /// `sqrt(2 ln(T / b))` sigma are ignored by the total variation.
    pub hysteresis: f64,
}

impl NuisanceConfig {
    pub fn for_len(t: usize) -> Self {
        Self { bandwidth: default_bandwidth(t), u_max: Some(DEFAULT_MT), c2_factor: C2_FACTOR, hysteresis: 2.0 }
    }
}

/// `round(sqrt(T) / 2)`, at least 1.
pub fn default_bandwidth(t: usize) -> usize {
    ((t as f64).sqrt() / 2.0).round().max(1.0) as usize
}

/// Running mean over `[k - b, k + b]` (clipped to the row), then clipped at 0.
pub fn smooth(row: &[f64], bandwidth: usize) -> Vec<f64> {
    running_mean(row, bandwidth).into_iter().map(|v| v.max(0.0)).collect()
}

/// Running mean over `[k - b, k + b]`, clipped to the row.
pub fn running_mean(row: &[f64], bandwidth: usize) -> Vec<f64> {
    let n = row.len();
    let mut p = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    p.push(0.0);
    for v in row {
        acc += v;
        p.push(acc);
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(bandwidth);
            let hi = (k + bandwidth + 1).min(n);
            (p[hi] - p[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Noise level of a running mean, from differences between non-overlapping
/// windows. The noise grows with the spectrum level, so the 90% quantile of
/// the absolute differences is used rather than their median; it is rescaled
/// to one deviation of a single value.
pub fn smoothed_noise_level(means: &[f64], bandwidth: usize) -> f64 {
    let lag = 2 * bandwidth + 1;
    if means.len() <= lag {
        return 0.0;
    }
    let mut d: Vec<f64> = (0..means.len() - lag).map(|k| (means[k + lag] - means[k]).abs()).collect();
    d.sort_by(f64::total_cmp);
    let q90 = d[(0.9 * (d.len() - 1) as f64).round() as usize];
    q90 / (1.6449 * std::f64::consts::SQRT_2)
}

/// `sqrt(2 ln m)` for the `m = T / b` roughly independent windows of a running
/// mean of half-width `b`: the typical overshoot of their largest deviation.
pub fn extreme_factor(t: usize, bandwidth: usize) -> f64 {
    (2.0 * (t as f64 / bandwidth.max(1) as f64).max(1.0).ln()).sqrt()
}

/// Total variation along alternating extrema, ignoring swings below
/// `threshold`.
pub fn extrema_variation(x: &[f64], threshold: f64) -> f64 {
    let Some(&first) = x.first() else { return 0.0 };
    let mut total = 0.0;
    // last confirmed extremum and the running extreme in the current direction
    let mut anchor = first;
    let mut extreme = first;
    let mut dir = 0i8;
    for &v in &x[1..] {
        match dir {
            0 => {
                if (v - anchor).abs() > threshold {
                    dir = if v > anchor { 1 } else { -1 };
                    extreme = v;
                }
            }
            1 => {
                if v > extreme {
                    extreme = v;
                } else if extreme - v > threshold {
                    total += extreme - anchor;
                    anchor = extreme;
                    extreme = v;
                    dir = -1;
                }
            }
            _ => {
                if v < extreme {
                    extreme = v;
                } else if v - extreme > threshold {
                    total += anchor - extreme;
                    anchor = extreme;
                    extreme = v;
                    dir = 1;
                }
            }
        }
    }
    // the last leg ends at the final value, not at its noisy running extreme
    if dir != 0 {
        total += (x[x.len() - 1] - anchor).abs();
    }
    total
}

pub fn estimate_nuisance(grid: &PeriodogramGrid, bandwidth: usize) -> NuisanceEstimates {
    estimate_nuisance_with(grid, &NuisanceConfig { bandwidth: bandwidth.max(1), ..NuisanceConfig::for_len(grid.len()) })
}

pub fn estimate_nuisance_with(grid: &PeriodogramGrid, cfg: &NuisanceConfig) -> NuisanceEstimates {
    let levels = grid.levels();
    let bandwidth = cfg.bandwidth.max(1);
    let means: Vec<Vec<f64>> = Scale::finest(levels).map(|j| running_mean(grid.corrected(j), bandwidth)).collect();
    let smoothed: Vec<Vec<f64>> = means.iter().map(|m| m.iter().map(|v| v.max(0.0)).collect()).collect();
    let u_max = cfg.u_max.unwrap_or(2 * Scale::from_index(levels - 1).support());
    let t = grid.len();
    let lags: Vec<Vec<f64>> = (0..=u_max as i64)
        .map(|u| {
            let w: Vec<f64> = Scale::finest(levels).map(|j| Family::Haar.autocorrelation(j, u)).collect();
            // unclipped: clipping each noisy coarse scale at zero biases the
            // sum upwards, while the linear combination itself is stable
            (0..t).map(|k| means.iter().zip(&w).map(|(row, w)| row[k] * w).sum()).collect()
        })
        .collect();
    // each lag is shrunk by the overshoot of the sup of its noise
    let lambda = extreme_factor(t, bandwidth);
    let shrink: Vec<f64> = lags.iter().map(|c| lambda * smoothed_noise_level(c, bandwidth)).collect();
    let mut c_norm: f64 = 0.0;
    for k in 0..t {
        let mut sum = 0.0;
        for (u, (c, s)) in lags.iter().zip(&shrink).enumerate() {
            let a = (c[k].abs() - s).max(0.0);
            sum += if u == 0 { a } else { 2.0 * a };
        }
        c_norm = c_norm.max(sum);
    }
    let tv = smoothed
        .iter()
        .zip(&means)
        .map(|(row, m)| {
            let scale = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            // the floor keeps rounding wiggles of a flat row out of the total
            let threshold = (cfg.hysteresis * lambda * smoothed_noise_level(m, bandwidth)).max(1e-12 * scale);
            extrema_variation(row, threshold)
        })
        .collect();
    // a vanishing series still needs a positive floor; its size is irrelevant
    // because every statistic is then pure regularization noise
    let c2 = if c_norm > 0.0 { cfg.c2_factor * c_norm * c_norm } else { f64::EPSILON };
    NuisanceEstimates { c_norm, tv, c2 }
}
