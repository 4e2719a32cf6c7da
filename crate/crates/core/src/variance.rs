//! Variance of the averaged estimator, `sigma^2 = 2 tr((U Sigma)^2) + C^2 2^j / |RT|`.
//!
//! Writing `U = |RT|^{-1} sum_l a_l sum_{k in R} phi_{lk} phi_{lk}'` with
//! `phi_{lk}(t) = psi_{l,k-t}` and `a_l = A^{-1}_{jl}`,
//!
//! ```text
//! |RT|^2 tr((U Sigma)^2) = sum_{k,k' in R} H(k, k'),
//! H(k, k') = sum_{l,l'} a_l a_l' G(lk, l'k')^2,   G(lk, l'k') = phi_{lk}' Sigma phi_{l'k'}.
//! ```
//!
//! [`TraceEngine`] tabulates `h_v(k) = H(k, k + v)` for a banded `Sigma`
//! together with prefix sums over `k`, so that the trace for any interval
//! inside its range costs `O(min(|RT|, V))`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::banded::BandedSym;
use crate::error::{domain, LswError, Result};
use crate::estimator::{u_matrix, Averager, TimeInterval};
use crate::lsw::{covariance_band, covariance_matrix, MAX_DENSE};
use crate::periodogram::PeriodogramGrid;
use crate::spectrum::SpectrumSpec;
use crate::wavelet::{Family, GramMatrix, Run, Scale};

/// Defaults for the plug-in covariance: lags `|u| <= 2`, windows of 9
/// observations.
pub const DEFAULT_MT: usize = 2;
pub const DEFAULT_WINDOW: usize = 9;

/// Settings of the plug-in variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PluginConfig {
    pub mt: usize,
    pub window: usize,
    /// Remove the `O(1/window)` bias that the squared noise of the plug-in
    /// covariance adds to the trace. The factor is extrapolated from windows
    /// `w` and `2w` over the whole range, since on short intervals the
    /// extrapolation itself is too noisy.
    pub debias: bool,
}

impl Default for PluginConfig {
    fn default() -> Self {
        Self { mt: DEFAULT_MT, window: DEFAULT_WINDOW, debias: true }
    }
}

// Refuse tables beyond this many entries.
const MAX_TABLE: usize = 1 << 27;

/// Prefix tables of `h_v(k)` for `k, k + v` in `k_lo..k_hi`.
#[derive(Debug, Clone)]
pub struct TraceEngine {
    k_lo: usize,
    k_hi: usize,
    // prefix[v][i] = sum_{k < k_lo + i} h_v(k)
    prefix: Vec<Vec<f64>>,
}

impl TraceEngine {
    /// `weights[i]` multiplies scale `-(i + 1)`.
    pub fn new(cov: &BandedSym, weights: &[f64], k_lo: usize, k_hi: usize) -> Result<Self> {
        let t = cov.dim();
        if k_lo >= k_hi || k_hi > t {
            return Err(domain(format!("range [{k_lo}, {k_hi}) is empty or exceeds T = {t}")));
        }
        let bw = cov.bandwidth();
        let span = k_hi - k_lo;
        let runs: Vec<Vec<Run>> = (0..weights.len()).map(|i| Family::Haar.wavelet(Scale::from_index(i)).runs()).collect();
        let longest = Scale::from_index(weights.len() - 1).support();
        let vmax = (longest + bw - 1).min(span - 1);
        let entries: usize = (0..=vmax).map(|v| span - v).sum();
        if entries > MAX_TABLE {
            return Err(LswError::Resource(format!("variance table of {entries} entries exceeds {MAX_TABLE}")));
        }
        let mut h: Vec<Vec<f64>> = (0..=vmax).map(|v| vec![0.0; span - v]).collect();
        let rows = cov.row_prefix();
        let mut y = Vec::new();
        let mut ycum = Vec::new();

        for kp in k_lo..k_hi {
            for (lp, runs_p) in runs.iter().enumerate() {
                let wp = weights[lp];
                if wp == 0.0 {
                    continue;
                }
                let lp_len = Scale::from_index(lp).support() as i64;
                let kpi = kp as i64;
                // y = Sigma phi_{l'k'} on s in [y0, y1)
                let y0 = (kpi - lp_len + 1 - bw as i64).max(0);
                let y1 = (kpi + bw as i64 + 1).min(t as i64);
                y.clear();
                for s in y0..y1 {
                    let v: f64 = runs_p
                        .iter()
                        .map(|r| r.value * rows.range_sum(s as usize, kpi - r.end as i64 + 1, kpi - r.start as i64 + 1))
                        .sum();
                    y.push(v);
                }
                ycum.clear();
                ycum.push(0.0);
                let mut acc = 0.0;
                for v in &y {
                    acc += v;
                    ycum.push(acc);
                }
                let ysum = |a: i64, b: i64| {
                    let a = (a.max(y0) - y0) as usize;
                    let b = (b.min(y1) - y0).max(0) as usize;
                    if b > a { ycum[b] - ycum[a] } else { 0.0 }
                };
                let k_first = (kpi - lp_len + 1 - bw as i64).max(k_lo as i64) as usize;
                for (l, runs_l) in runs.iter().enumerate() {
                    let w = weights[l] * wp;
                    if w == 0.0 {
                        continue;
                    }
                    for k in k_first..=kp {
                        let ki = k as i64;
                        let g: f64 = runs_l
                            .iter()
                            .map(|r| r.value * ysum(ki - r.end as i64 + 1, ki - r.start as i64 + 1))
                            .sum();
                        h[kp - k][k - k_lo] += w * g * g;
                    }
                }
            }
        }

        let prefix = h
            .into_iter()
            .map(|row| {
                let mut p = Vec::with_capacity(row.len() + 1);
                let mut acc = 0.0;
                p.push(0.0);
                for v in row {
                    acc += v;
                    p.push(acc);
                }
                p
            })
            .collect();
        Ok(Self { k_lo, k_hi, prefix })
    }

    pub fn range(&self) -> (usize, usize) {
        (self.k_lo, self.k_hi)
    }

    /// `sum_{k,k' in R} H(k, k') = |RT|^2 tr((U Sigma)^2)`.
    pub fn pair_sum(&self, r: &TimeInterval) -> f64 {
        assert!(r.lo >= self.k_lo && r.hi <= self.k_hi, "interval {r} outside the engine range");
        let lo = r.lo - self.k_lo;
        let hi = r.hi - self.k_lo;
        let mut acc = self.prefix[0][hi] - self.prefix[0][lo];
        for v in 1..self.prefix.len().min(hi - lo) {
            let p = &self.prefix[v];
            acc += 2.0 * (p[hi - v] - p[lo]);
        }
        acc
    }

    /// `2 tr((U Sigma)^2)`, clamped at zero for indefinite plug-in matrices.
    pub fn quadratic_variance(&self, r: &TimeInterval) -> f64 {
        let n = r.count() as f64;
        (2.0 * self.pair_sum(r) / (n * n)).max(0.0)
    }
}

/// Variances of `Q_{j,R}` for every interval inside a fixed range.
#[derive(Debug, Clone)]
pub struct IntervalVariance {
    scale: Scale,
    engine: Arc<TraceEngine>,
    factor: f64,
    c2: f64,
}

impl IntervalVariance {
    pub fn new(scale: Scale, engine: Arc<TraceEngine>, c2: f64) -> Self {
        Self { scale, engine, factor: 1.0, c2 }
    }

    /// The quadratic part multiplied by `factor`.
    pub fn scaled(scale: Scale, engine: Arc<TraceEngine>, factor: f64, c2: f64) -> Self {
        Self { scale, engine, factor, c2 }
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    pub fn quadratic(&self, r: &TimeInterval) -> f64 {
        self.factor * self.engine.quadratic_variance(r)
    }

    pub fn sigma2(&self, r: &TimeInterval) -> f64 {
        self.quadratic(r) + self.c2 * self.scale.dyadic() / r.count() as f64
    }
}

/// Row `j` of `A^{-1}`, the weights of the corrected periodogram.
pub fn scale_weights(gram: &GramMatrix, scale: Scale) -> Result<Vec<f64>> {
    if scale.index() >= gram.levels() {
        return Err(domain(format!("scale {scale} is beyond the {} scales of the Gram matrix", gram.levels())));
    }
    Ok(gram.inv_row(scale))
}

/// Exact `sigma^2_{j,R;T}` of the spectrum `spec`.
pub fn exact_variance(spec: &SpectrumSpec, scale: Scale, r: &TimeInterval, t: usize, c2: f64, gram: &GramMatrix) -> Result<f64> {
    if t > MAX_DENSE {
        return Err(LswError::Resource(format!("exact variance needs T <= {MAX_DENSE}, got {t}")));
    }
    TimeInterval::new(r.lo, r.hi, t)?;
    let cov = covariance_band(spec, t)?;
    let engine = TraceEngine::new(&cov, &scale_weights(gram, scale)?, r.lo, r.hi)?;
    Ok(IntervalVariance::new(scale, Arc::new(engine), c2).sigma2(r))
}

/// `tr(U S U S)` by dense products; the oracle for [`TraceEngine`].
pub fn dense_trace(u: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let us = u * sigma;
    us.component_mul(&us.transpose()).sum()
}

/// `2 ||U' Sigma||_F^2 + C^2 2^j / |RT|`, the norm expression taken literally.
/// Differs from [`exact_variance`] unless `U` and `Sigma` commute suitably.
pub fn literal_norm_variance(spec: &SpectrumSpec, scale: Scale, r: &TimeInterval, t: usize, c2: f64, gram: &GramMatrix) -> Result<f64> {
    let u = u_matrix(scale, r, t, gram)?;
    let sigma = covariance_matrix(spec, t)?;
    let us = u.transpose() * sigma;
    Ok(2.0 * us.norm_squared() + c2 * scale.dyadic() / r.count() as f64)
}

fn window_at(s: usize, window: usize, t: usize) -> TimeInterval {
    let lo = s.saturating_sub(window / 2);
    let hi = (s + window - window / 2).min(t);
    TimeInterval { lo, hi }
}

/// `sigma~_{s,s+u} = sum_j Q_{j,R(s)} Psi_j(u)` for `|u| <= mt`, zero beyond,
/// with `R(s)` the window of `window` points centred at `s` and clipped to
/// `[0, T)`.
pub fn plugin_covariance(grid: &PeriodogramGrid, s: usize, u: i64, mt: usize, window: usize, c2: f64, seed: u64) -> Result<f64> {
    if window == 0 {
        return Err(domain("plug-in window must hold at least one point"));
    }
    if s >= grid.len() {
        return Err(domain(format!("time {s} is outside 0..{}", grid.len())));
    }
    if u.unsigned_abs() as usize > mt {
        return Ok(0.0);
    }
    let r = window_at(s, window, grid.len());
    let mut acc = 0.0;
    for j in Scale::finest(grid.levels()) {
        acc += Averager::new(grid, j, c2, seed)?.q(&r) * Family::Haar.autocorrelation(j, u);
    }
    Ok(acc)
}

/// The plug-in covariance band, symmetrized as
/// `(sigma~_{s,s+u} + sigma~_{s+u,s}) / 2`.
pub fn plugin_band(grid: &PeriodogramGrid, mt: usize, window: usize, c2: f64, seed: u64) -> Result<BandedSym> {
    if window == 0 {
        return Err(domain("plug-in window must hold at least one point"));
    }
    let t = grid.len();
    let averagers = Scale::finest(grid.levels())
        .map(|j| Averager::new(grid, j, c2, seed))
        .collect::<Result<Vec<_>>>()?;
    let q: Vec<Vec<f64>> = averagers
        .iter()
        .map(|a| (0..t).map(|s| a.q(&window_at(s, window, t))).collect())
        .collect();
    let mut out = BandedSym::zeros(t, mt);
    for u in 0..=out.bandwidth() {
        let psi: Vec<f64> = Scale::finest(grid.levels()).map(|j| Family::Haar.autocorrelation(j, u as i64)).collect();
        for (s, v) in out.diag_mut(u).iter_mut().enumerate() {
            let at = |p: usize| q.iter().zip(&psi).map(|(row, c)| row[p] * c).sum::<f64>();
            *v = 0.5 * (at(s) + at(s + u));
        }
    }
    Ok(out)
}

/// Plug-in variances for scale `j` over all intervals inside `k_lo..k_hi`.
#[allow(clippy::too_many_arguments)]
pub fn plugin_variances(
    grid: &PeriodogramGrid,
    scale: Scale,
    k_lo: usize,
    k_hi: usize,
    cfg: &PluginConfig,
    c2: f64,
    seed: u64,
) -> Result<IntervalVariance> {
    let weights = scale_weights(grid.gram(), scale)?;
    let engine = |w: usize, lo: usize, hi: usize| -> Result<TraceEngine> {
        TraceEngine::new(&plugin_band(grid, cfg.mt, w, c2, seed)?, &weights, lo, hi)
    };
    let main = engine(cfg.window, k_lo, k_hi)?;
    let factor = if cfg.debias { debias_factor(&engine(2 * cfg.window, k_lo, k_hi)?, &main) } else { 1.0 };
    Ok(IntervalVariance::scaled(scale, Arc::new(main), factor, c2))
}

/// Smallest correction applied; below it the plug-in is deemed unreliable
/// rather than biased.
pub const MIN_DEBIAS_FACTOR: f64 = 0.25;

/// With `T(w) = T + B / w`, `T = 2 T(2w) - T(w)`; returns `T / T(w)` over
/// the whole range of the engines, clamped to `[MIN_DEBIAS_FACTOR, 1]`.
pub fn debias_factor(wide: &TraceEngine, narrow: &TraceEngine) -> f64 {
    let (lo, hi) = narrow.range();
    let r = TimeInterval { lo, hi };
    let n = narrow.pair_sum(&r);
    if !(n > 0.0) {
        return 1.0;
    }
    ((2.0 * wide.pair_sum(&r) - n) / n).clamp(MIN_DEBIAS_FACTOR, 1.0)
}

/// `sigma~^2_{j,R;T} = 2 tr((U Sigma~)^2) + C^2 2^j / |RT|`, bias-corrected
/// when `cfg.debias` is set.
pub fn plugin_variance(grid: &PeriodogramGrid, scale: Scale, r: &TimeInterval, cfg: &PluginConfig, c2: f64, seed: u64) -> Result<f64> {
    TimeInterval::new(r.lo, r.hi, grid.len())?;
    Ok(plugin_variances(grid, scale, r.lo, r.hi, cfg, c2, seed)?.sigma2(r))
}
