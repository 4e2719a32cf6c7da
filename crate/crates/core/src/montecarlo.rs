//! Monte Carlo study: simulate, estimate at one scale on a grid of target
//! points, and compare with the generating spectrum.

use std::time::Instant;

use rayon::prelude::*;

use crate::adaptive::{equispaced_points, estimate_spectrum, AdaptiveConfig, ExactOracle, VarianceMode};
use crate::baseline::{running_mean_estimate, ErrorMetrics};
use crate::error::{domain, Result};
use crate::lsw::{max_levels, simulate, MIN_LEN};
use crate::nuisance::default_bandwidth;
use crate::periodogram::PeriodogramGrid;
use crate::spectrum::SpectrumSpec;
use crate::wavelet::{gram_matrix, Scale};

/// Number of target points of the benchmark study.
pub const DEFAULT_POINTS: usize = 39;

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub t: usize,
    pub reps: usize,
    /// Replication `r` uses `seed + r` for the series and its noise.
    pub seed: u64,
    pub scale: Scale,
    pub points: usize,
    pub adaptive: AdaptiveConfig,
    /// Half-width of the running-mean baseline; `None` means the default
    /// smoothing bandwidth `round(sqrt(T) / 2)`.
    pub baseline_bandwidth: Option<usize>,
}

impl MonteCarloConfig {
    pub fn new(t: usize, reps: usize, seed: u64) -> Self {
        Self {
            t,
            reps,
            seed,
            scale: Scale::new(-1).expect("valid"),
            points: DEFAULT_POINTS,
            adaptive: AdaptiveConfig::default(),
            baseline_bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSummary {
    pub z0: f64,
    pub median: f64,
    pub q05: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub adaptive: ErrorMetrics,
    pub baseline: ErrorMetrics,
    pub baseline_bandwidth: usize,
    pub per_point: Vec<PointSummary>,
    /// Adaptive estimates, one row per replication.
    pub estimates: Vec<Vec<f64>>,
    pub truth: Vec<f64>,
    pub runtime_seconds: f64,
}

/// Median, averaging the middle pair for an even count. `sorted` must be
/// nonempty and ascending.
pub fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) }
}

/// Nearest-rank quantile: the order statistic at `round(p (n - 1))`.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    sorted[(p * (sorted.len() - 1) as f64).round() as usize]
}

pub fn summarize(z0s: &[f64], rows: &[Vec<f64>]) -> Vec<PointSummary> {
    z0s.iter()
        .enumerate()
        .map(|(i, &z0)| {
            let mut v: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            v.sort_by(f64::total_cmp);
            PointSummary { z0, median: median(&v), q05: quantile(&v, 0.05), q95: quantile(&v, 0.95) }
        })
        .collect()
}

/// Runs every replication on the current rayon pool; results are ordered by
/// replication index whatever the scheduling.
pub fn run(spec: &SpectrumSpec, cfg: &MonteCarloConfig) -> Result<MetricsReport> {
    let start = Instant::now();
    if cfg.reps < 2 {
        return Err(domain(format!("{} replications requested; at least 2 are needed", cfg.reps)));
    }
    if cfg.t < MIN_LEN {
        return Err(domain(format!("series length {} is below the minimum {MIN_LEN}", cfg.t)));
    }
    if cfg.points == 0 {
        return Err(domain("at least one target point is needed"));
    }
    cfg.adaptive.validate()?;
    let gram = gram_matrix(max_levels(cfg.t))?;
    if cfg.scale.index() >= gram.levels() {
        return Err(domain(format!("scale {} needs a longer series than T = {}", cfg.scale, cfg.t)));
    }
    let z0s = equispaced_points(cfg.points);
    let truth: Vec<f64> = z0s.iter().map(|&z| spec.value(cfg.scale, z)).collect();
    let oracle = match cfg.adaptive.variance {
        VarianceMode::Exact => Some(ExactOracle::new(spec, gram.levels(), cfg.t, &[cfg.scale])?),
        VarianceMode::Plugin => None,
    };
    let bandwidth = cfg.baseline_bandwidth.unwrap_or_else(|| default_bandwidth(cfg.t));

    let rows = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed.wrapping_add(r as u64);
            let x = simulate(spec, cfg.t, seed)?;
            let grid = PeriodogramGrid::new(&x.values, &gram)?;
            let adaptive = AdaptiveConfig { seed, ..cfg.adaptive };
            let est = estimate_spectrum(&grid, &[cfg.scale], &z0s, &adaptive, oracle.as_ref())?;
            let base = running_mean_estimate(&grid, cfg.scale, &z0s, bandwidth)?;
            Ok((est.values(cfg.scale), base))
        })
        .collect::<Result<Vec<_>>>()?;
    let (estimates, baselines): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.into_iter().unzip();

    Ok(MetricsReport {
        adaptive: ErrorMetrics::pooled(&estimates, &truth),
        baseline: ErrorMetrics::pooled(&baselines, &truth),
        baseline_bandwidth: bandwidth,
        per_point: summarize(&z0s, &estimates),
        estimates,
        truth,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}
