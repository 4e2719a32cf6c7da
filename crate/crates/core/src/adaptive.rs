//! Pointwise adaptive estimation: the largest interval around `z0` on which
//! the averaged estimator passes every pairwise homogeneity test.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, LswError, Result};
use crate::estimator::{AveragedEstimate, Averager, TimeInterval, VarianceSource};
use crate::lsw::covariance_band;
use crate::nuisance::{estimate_nuisance_with, NuisanceConfig};
use crate::periodogram::PeriodogramGrid;
use crate::spectrum::SpectrumSpec;
use crate::variance::{plugin_variances, scale_weights, IntervalVariance, PluginConfig, TraceEngine, DEFAULT_MT};
use crate::wavelet::Scale;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceMode {
    #[default]
    Plugin,
    /// Exact variances of a known spectrum; for tests and calibration.
    Exact,
}

/// Tuning of the adaptive procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveConfig {
    /// `k_T`; `None` means `log2 T`.
    pub kt: Option<f64>,
    /// Multiplier on `eta_j = 2^{-j/2} 5 (2 alpha + p)`.
    pub eta_scale: f64,
    pub alpha: f64,
    pub p: f64,
    /// Shortest tested interval, in observations.
    pub delta_points: usize,
    pub grid_ratio: f64,
    /// Regularization constant; `None` derives it from the nuisance estimates.
    pub c2: Option<f64>,
    pub mt: usize,
    pub window: usize,
    /// Bias correction of the plug-in variance.
    pub debias: bool,
    pub variance: VarianceMode,
    /// Stop at the first rejected candidate instead of scanning all of them.
    pub sequential: bool,
    /// Seed of the regularization noise.
    pub seed: u64,
    /// Running-mean half-width for the nuisance estimates; `None` means
    /// `round(sqrt(T) / 2)`.
    pub smooth_bandwidth: Option<usize>,
}

/// Default multiplier on the threshold constant. The constant itself is a
/// worst-case bound and almost never rejects at practical sample sizes.
pub const ETA_SCALE: f64 = 0.005;

/// Local window of the plug-in variance inside the procedure. Wider than
/// the plug-in default: short windows make `sigma_U` too noisy for the
/// many subinterval comparisons.
pub const ADAPTIVE_WINDOW: usize = 65;

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            kt: None,
            eta_scale: ETA_SCALE,
            alpha: 0.5,
            p: 2.0,
            delta_points: 16,
            grid_ratio: 1.4,
            c2: None,
            mt: DEFAULT_MT,
            window: ADAPTIVE_WINDOW,
            debias: true,
            variance: VarianceMode::Plugin,
            sequential: false,
            seed: 0,
            smooth_bandwidth: None,
        }
    }
}

impl AdaptiveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LswError::Config(m.to_string()));
        if self.kt.is_some_and(|k| !(k > 0.0 && k.is_finite())) {
            return bad("kt must be positive");
        }
        if !(self.eta_scale > 0.0 && self.eta_scale.is_finite()) || !(self.alpha >= 0.0) || !(self.p >= 0.0) || 2.0 * self.alpha + self.p <= 0.0 {
            return bad("eta must be positive");
        }
        if !(self.grid_ratio > 1.0 && self.grid_ratio.is_finite()) {
            return bad("grid ratio must exceed 1");
        }
        if self.delta_points == 0 {
            return bad("delta must be at least one point");
        }
        if self.c2.is_some_and(|c| !(c >= 0.0 && c.is_finite())) {
            return bad("c2 must be nonnegative");
        }
        if self.window == 0 {
            return bad("window must hold at least one point");
        }
        Ok(())
    }

    pub fn eta(&self, scale: Scale) -> f64 {
        self.eta_scale * (scale.level() as f64 / 2.0).exp2() * 5.0 * (2.0 * self.alpha + self.p)
    }

    pub fn plugin(&self) -> PluginConfig {
        PluginConfig { mt: self.mt, window: self.window, debias: self.debias }
    }

    pub fn kt(&self, t: usize) -> f64 {
        self.kt.unwrap_or((t as f64).log2())
    }
}

/// Candidate intervals around `[z0 T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrids {
    pub z0: f64,
    /// `[z0 T]`, clipped to `T - 1`.
    pub center: usize,
    /// Left endpoints, moving away from the centre.
    pub left: Vec<usize>,
    /// Right endpoints (exclusive), moving away from the centre.
    pub right: Vec<usize>,
    /// `Lambda`.
    pub lambda: Vec<TimeInterval>,
    min_len: usize,
    points: Vec<usize>,
}

impl CandidateGrids {
    /// Offsets of the left endpoints from the centre.
    pub fn left_offsets(&self) -> Vec<usize> {
        self.left.iter().map(|&p| self.center - p).collect()
    }

    /// `p(R)`: proper sub-intervals of `r` with endpoints on the grid and at
    /// least `delta` points.
    pub fn test_set(&self, r: &TimeInterval) -> Vec<TimeInterval> {
        let inside: Vec<usize> = self.points.iter().copied().filter(|&p| r.lo <= p && p <= r.hi).collect();
        let mut out = Vec::new();
        for (i, &a) in inside.iter().enumerate() {
            for &b in &inside[i + 1..] {
                let u = TimeInterval { lo: a, hi: b };
                if b - a >= self.min_len && u != *r {
                    out.push(u);
                }
            }
        }
        out
    }

    /// `|(hi - 1 - c) - (c - lo)|`.
    pub fn asymmetry(&self, r: &TimeInterval) -> usize {
        (r.hi - 1 - self.center).abs_diff(self.center - r.lo)
    }

    /// Preference order: longer first, then more symmetric, then smaller `lo`.
    fn rank(&self, r: &TimeInterval) -> (std::cmp::Reverse<usize>, usize, usize) {
        (std::cmp::Reverse(r.count()), self.asymmetry(r), r.lo)
    }
}

pub fn build_grids(z0: f64, t: usize, cfg: &AdaptiveConfig) -> Result<CandidateGrids> {
    if !(z0 > 0.0 && z0 < 1.0) {
        return Err(domain(format!("target point {z0} is outside (0, 1)")));
    }
    cfg.validate()?;
    let center = ((z0 * t as f64).floor() as usize).min(t - 1);
    let delta = cfg.delta_points;
    let mut offsets = vec![0usize];
    let mut i = 0;
    loop {
        let d = (delta as f64 * cfg.grid_ratio.powi(i)).ceil() as usize;
        if offsets.last() != Some(&d) {
            offsets.push(d);
        }
        if d >= t {
            break;
        }
        i += 1;
    }
    let mut left = Vec::new();
    for &d in &offsets {
        let p = center.saturating_sub(d);
        if left.last() != Some(&p) {
            left.push(p);
        }
        if p == 0 {
            break;
        }
    }
    let mut right = Vec::new();
    for &d in &offsets {
        let p = (center + 1 + d).min(t);
        if right.last() != Some(&p) {
            right.push(p);
        }
        if p == t {
            break;
        }
    }
    let lambda = if t < 4 * delta {
        vec![TimeInterval { lo: 0, hi: t }]
    } else {
        let mut l: Vec<TimeInterval> = left
            .iter()
            .flat_map(|&lo| right.iter().map(move |&hi| TimeInterval { lo, hi }))
            .filter(|r| r.count() >= delta)
            .collect();
        l.sort_by_key(|r| (r.count(), r.lo));
        l
    };
    let mut points: Vec<usize> = left.iter().chain(&right).copied().collect();
    points.sort_unstable();
    points.dedup();
    Ok(CandidateGrids { z0, center, left, right, lambda, min_len: delta, points })
}

/// One homogeneity test of `R` against `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestRecord {
    pub r: TimeInterval,
    pub u: TimeInterval,
    /// `|Q_R - Q_U|`.
    pub statistic: f64,
    /// `2 eta (sigma_R + sigma_U) k_T`.
    pub threshold: f64,
    pub rejected: bool,
}

pub fn homogeneity_reject(q_r: &AveragedEstimate, q_u: &AveragedEstimate, eta: f64, kt: f64) -> Result<TestRecord> {
    if !(q_r.sigma2 > 0.0 && q_u.sigma2 > 0.0) {
        return Err(LswError::Internal(format!(
            "nonpositive variance in homogeneity test ({} on {}, {} on {})",
            q_r.sigma2, q_r.interval, q_u.sigma2, q_u.interval
        )));
    }
    if q_r.scale != q_u.scale {
        return Err(LswError::Internal("homogeneity test across scales".into()));
    }
    let statistic = (q_r.q - q_u.q).abs();
    let threshold = 2.0 * eta * (q_r.sigma2.sqrt() + q_u.sigma2.sqrt()) * kt;
    Ok(TestRecord { r: q_r.interval, u: q_u.interval, statistic, threshold, rejected: statistic > threshold })
}

/// Result of the selection at one `(j, z0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveEstimate {
    pub scale: Scale,
    pub z0: f64,
    pub selected: TimeInterval,
    pub value: f64,
    pub sigma2: f64,
    /// Per tested candidate: the first rejecting test, or the closest call
    /// if none rejected.
    pub trace: Vec<TestRecord>,
}

/// Exact variance tables of a known spectrum, reusable across replications.
#[derive(Debug, Clone)]
pub struct ExactOracle {
    t: usize,
    engines: HashMap<Scale, Arc<TraceEngine>>,
}

impl ExactOracle {
    pub fn new(spec: &SpectrumSpec, grid_levels: usize, t: usize, scales: &[Scale]) -> Result<Self> {
        let gram = crate::wavelet::gram_matrix(grid_levels)?;
        let cov = covariance_band(spec, t)?;
        let mut engines = HashMap::new();
        for &s in scales {
            engines.insert(s, Arc::new(TraceEngine::new(&cov, &scale_weights(&gram, s)?, 0, t)?));
        }
        Ok(Self { t, engines })
    }
}

/// Everything needed to evaluate `Q_{j,R}` and its variance for one scale.
#[derive(Debug, Clone)]
pub struct ScaleContext {
    averager: Averager,
    variances: IntervalVariance,
    source: VarianceSource,
}

impl ScaleContext {
    pub fn new(grid: &PeriodogramGrid, scale: Scale, c2: f64, cfg: &AdaptiveConfig, oracle: Option<&ExactOracle>) -> Result<Self> {
        let t = grid.len();
        let averager = Averager::new(grid, scale, c2, cfg.seed)?;
        let (variances, source) = match cfg.variance {
            VarianceMode::Plugin => (plugin_variances(grid, scale, 0, t, &cfg.plugin(), c2, cfg.seed)?, VarianceSource::Plugin),
            VarianceMode::Exact => {
                let oracle = oracle.ok_or_else(|| LswError::Config("exact variances need the generating spectrum".into()))?;
                if oracle.t != t {
                    return Err(LswError::Config(format!("oracle built for T = {}, series has {t}", oracle.t)));
                }
                let engine = oracle
                    .engines
                    .get(&scale)
                    .ok_or_else(|| LswError::Config(format!("oracle has no tables for scale {scale}")))?;
                (IntervalVariance::new(scale, engine.clone(), c2), VarianceSource::ExactOracle)
            }
        };
        Ok(Self { averager, variances, source })
    }

    pub fn scale(&self) -> Scale {
        self.averager.scale()
    }

    pub fn estimate(&self, r: &TimeInterval) -> AveragedEstimate {
        AveragedEstimate {
            scale: self.scale(),
            interval: *r,
            q: self.averager.q(r),
            sigma2: self.variances.sigma2(r),
            source: self.source,
        }
    }

    /// Whether some `U` in `p(R)` rejects homogeneity on `r`.
    pub fn rejects(&self, grids: &CandidateGrids, r: &TimeInterval, cfg: &AdaptiveConfig) -> Result<bool> {
        let (eta, kt) = (cfg.eta(self.scale()), cfg.kt(self.averager.len()));
        let q_r = self.estimate(r);
        for u in grids.test_set(r) {
            if homogeneity_reject(&q_r, &self.estimate(&u), eta, kt)?.rejected {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// The adaptive estimate at `z0`.
    pub fn select(&self, z0: f64, cfg: &AdaptiveConfig) -> Result<AdaptiveEstimate> {
        let t = self.averager.len();
        let grids = build_grids(z0, t, cfg)?;
        if grids.lambda.is_empty() {
            return Err(LswError::Config(format!("no candidate interval around z0 = {z0} at T = {t}")));
        }
        let eta = cfg.eta(self.scale());
        let kt = cfg.kt(t);
        let mut memo: HashMap<TimeInterval, AveragedEstimate> = HashMap::new();
        let mut est = |r: &TimeInterval| *memo.entry(*r).or_insert_with(|| self.estimate(r));

        let mut order = grids.lambda.clone();
        order.sort_by_key(|r| (r.count(), grids.asymmetry(r), r.lo));
        let mut trace = Vec::new();
        let mut best: Option<TimeInterval> = None;
        for r in &order {
            let q_r = est(r);
            let mut decisive: Option<TestRecord> = None;
            for u in grids.test_set(r) {
                let rec = homogeneity_reject(&q_r, &est(&u), eta, kt)?;
                let closer = decisive.is_none_or(|d| rec.statistic * d.threshold > d.statistic * rec.threshold);
                if rec.rejected || closer {
                    decisive = Some(rec);
                }
                if rec.rejected {
                    break;
                }
            }
            let rejected = decisive.is_some_and(|d| d.rejected);
            trace.extend(decisive);
            if rejected {
                if cfg.sequential {
                    break;
                }
            } else if best.is_none_or(|b| grids.rank(r) < grids.rank(&b)) {
                best = Some(*r);
            }
        }
        // with every candidate rejected, fall back to the shortest one, which
        // the procedure assumes homogeneous
        let selected = best.unwrap_or(order[0]);
        let q = est(&selected);
        Ok(AdaptiveEstimate { scale: self.scale(), z0, selected, value: q.q, sigma2: q.sigma2, trace })
    }
}

/// `C^2` from the configuration or, failing that, from the nuisance estimates.
pub fn resolve_c2(grid: &PeriodogramGrid, cfg: &AdaptiveConfig) -> f64 {
    cfg.c2.unwrap_or_else(|| {
        let mut n = NuisanceConfig::for_len(grid.len());
        if let Some(b) = cfg.smooth_bandwidth {
            n.bandwidth = b;
        }
        n.u_max = Some(cfg.mt);
        estimate_nuisance_with(grid, &n).c2
    })
}

pub fn select_interval(grid: &PeriodogramGrid, scale: Scale, z0: f64, cfg: &AdaptiveConfig, oracle: Option<&ExactOracle>) -> Result<AdaptiveEstimate> {
    cfg.validate()?;
    let c2 = resolve_c2(grid, cfg);
    ScaleContext::new(grid, scale, c2, cfg, oracle)?.select(z0, cfg)
}

/// Adaptive estimates over a set of scales and target points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateGrid {
    pub c2: f64,
    /// Scale-major, in the order requested.
    pub rows: Vec<AdaptiveEstimate>,
}

impl EstimateGrid {
    pub fn values(&self, scale: Scale) -> Vec<f64> {
        self.rows.iter().filter(|r| r.scale == scale).map(|r| r.value).collect()
    }
}

pub fn estimate_spectrum(
    grid: &PeriodogramGrid,
    scales: &[Scale],
    z0s: &[f64],
    cfg: &AdaptiveConfig,
    oracle: Option<&ExactOracle>,
) -> Result<EstimateGrid> {
    cfg.validate()?;
    if let Some(z) = z0s.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
        return Err(domain(format!("target point {z} is outside (0, 1)")));
    }
    for &s in scales {
        grid.check_scale(s)?;
    }
    if z0s.is_empty() {
        return Ok(EstimateGrid::default());
    }
    let c2 = resolve_c2(grid, cfg);
    let mut rows = Vec::with_capacity(scales.len() * z0s.len());
    for &s in scales {
        let ctx = ScaleContext::new(grid, s, c2, cfg, oracle)?;
        for &z0 in z0s {
            rows.push(ctx.select(z0, cfg)?);
        }
    }
    Ok(EstimateGrid { c2, rows })
}

/// `z0 = i / (n + 1)` for `i = 1..=n`.
pub fn equispaced_points(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::gram_matrix;

    fn cfg(delta: usize, ratio: f64) -> AdaptiveConfig {
        AdaptiveConfig { delta_points: delta, grid_ratio: ratio, ..Default::default() }
    }

    #[test]
    fn grid_example() {
        let g = build_grids(0.5, 64, &cfg(8, 2.0)).unwrap();
        assert_eq!(g.center, 32);
        assert_eq!(g.left_offsets(), vec![0, 8, 16, 32]);
        assert_eq!(g.right, vec![33, 41, 49, 64]);
    }

    #[test]
    fn candidates_contain_the_centre() {
        for t in [64usize, 256, 1000, 1024] {
            for z0 in [0.01, 0.3, 0.5, 0.77, 0.99] {
                let g = build_grids(z0, t, &AdaptiveConfig::default()).unwrap();
                assert!(!g.lambda.is_empty());
                for r in &g.lambda {
                    assert!(r.contains(g.center), "{r} misses {}", g.center);
                    for u in g.test_set(r) {
                        assert!(u.is_within(r) && u != *r && u.count() >= 8);
                    }
                }
            }
        }
    }

    #[test]
    fn cardinality_is_polylogarithmic() {
        for t in [256usize, 1024] {
            let g = build_grids(0.5, t, &AdaptiveConfig::default()).unwrap();
            // every left/right pair except the single point [c, c + 1)
            assert_eq!(g.lambda.len(), g.left.len() * g.right.len() - 1);
            // each side holds at most log_rho(T / delta) + 3 points
            let side = (t as f64 / 8.0).ln() / 1.4f64.ln() + 3.0;
            assert!(g.left.len() as f64 <= side && g.right.len() as f64 <= side);
            assert!((g.lambda.len() as f64) <= side * side, "{}", g.lambda.len());
        }
    }

    #[test]
    fn short_series_has_a_single_candidate() {
        let g = build_grids(0.5, 20, &cfg(8, 1.4)).unwrap();
        assert_eq!(g.lambda, vec![TimeInterval { lo: 0, hi: 20 }]);
    }

    #[test]
    fn out_of_range_target_is_rejected() {
        assert!(build_grids(0.0, 100, &AdaptiveConfig::default()).is_err());
        assert!(build_grids(1.0, 100, &AdaptiveConfig::default()).is_err());
    }

    #[test]
    fn equal_estimates_never_reject() {
        let e = AveragedEstimate {
            scale: Scale::new(-1).unwrap(),
            interval: TimeInterval { lo: 0, hi: 10 },
            q: 0.3,
            sigma2: 1e-30,
            source: VarianceSource::Plugin,
        };
        assert!(!homogeneity_reject(&e, &e, 1.0, 1.0).unwrap().rejected);
        let bad = AveragedEstimate { sigma2: 0.0, ..e };
        assert!(matches!(homogeneity_reject(&e, &bad, 1.0, 1.0), Err(LswError::Internal(_))));
    }

    #[test]
    fn threshold_formula() {
        let s = Scale::new(-1).unwrap();
        let a = AveragedEstimate { scale: s, interval: TimeInterval { lo: 0, hi: 10 }, q: 1.0, sigma2: 4.0, source: VarianceSource::Plugin };
        let b = AveragedEstimate { interval: TimeInterval { lo: 0, hi: 5 }, q: 0.0, sigma2: 1.0, ..a };
        let rec = homogeneity_reject(&a, &b, 0.1, 2.0).unwrap();
        assert!((rec.threshold - 2.0 * 0.1 * 3.0 * 2.0).abs() < 1e-15);
        assert!(!rec.rejected);
        assert!(homogeneity_reject(&a, &b, 0.05, 2.0).unwrap().rejected);
        let c = AdaptiveConfig { eta_scale: 1.0, ..Default::default() };
        assert!((c.eta(Scale::new(-2).unwrap()) - 2.0 * 15.0).abs() < 1e-12);
    }

    #[test]
    fn empty_target_list_gives_empty_table() {
        let g = gram_matrix(5).unwrap();
        let p = PeriodogramGrid::new(&crate::rng::white_noise(1, 64), &g).unwrap();
        let e = estimate_spectrum(&p, &[Scale::new(-1).unwrap()], &[], &AdaptiveConfig::default(), None).unwrap();
        assert!(e.rows.is_empty());
    }

    #[test]
    fn exact_mode_without_spectrum_is_a_config_error() {
        let g = gram_matrix(5).unwrap();
        let p = PeriodogramGrid::new(&crate::rng::white_noise(1, 64), &g).unwrap();
        let c = AdaptiveConfig { variance: VarianceMode::Exact, ..Default::default() };
        assert!(matches!(select_interval(&p, Scale::new(-1).unwrap(), 0.5, &c, None), Err(LswError::Config(_))));
    }

    #[test]
    fn equispaced_points_exclude_endpoints() {
        let z = equispaced_points(39);
        assert_eq!(z.len(), 39);
        assert_eq!(z[0], 1.0 / 40.0);
        assert_eq!(z[38], 39.0 / 40.0);
    }
}
