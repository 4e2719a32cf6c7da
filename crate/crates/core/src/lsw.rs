//! Locally stationary wavelet processes with Gaussian innovations.
//!
//! A sample path is `X_t = sum_j sum_{k=0}^{T-1} w_{jk} psi_{j,k-t} xi_{jk}`
//! with `w_{jk} = sqrt(S_j(k/T))`. Both the simulator and the exact covariance
//! use prefix sums over the constant runs of each wavelet, so a path costs
//! `O(J T)` and a covariance band `O(J T L_J)`.

use nalgebra::DMatrix;

use crate::banded::BandedSym;
use crate::error::{domain, LswError, Result};
use crate::rng::{Domain, NormalStream};
use crate::spectrum::SpectrumSpec;
use crate::wavelet::{Family, Scale};

/// Smallest sample size accepted by the simulator and the estimators.
pub const MIN_LEN: usize = 16;

/// Largest `T` for which a dense `T x T` matrix is materialized.
pub const MAX_DENSE: usize = 4096;

/// `floor(log2 t)`.
pub fn max_levels(t: usize) -> usize {
    if t == 0 {
        0
    } else {
        (usize::BITS - 1 - t.leading_zeros()) as usize
    }
}

/// Scales actually used for a spectrum at sample size `t`.
pub fn simulation_levels(spec: &SpectrumSpec, t: usize) -> usize {
    spec.levels().min(max_levels(t))
}

fn check_len(t: usize) -> Result<()> {
    if t < MIN_LEN {
        return Err(domain(format!("sample size {t} is below the minimum {MIN_LEN}")));
    }
    Ok(())
}

/// A simulated or loaded series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSample {
    pub values: Vec<f64>,
    /// Seed of the innovations, if simulated.
    pub seed: Option<u64>,
    /// Generating spectrum, if simulated.
    pub spec: Option<SpectrumSpec>,
}

impl SeriesSample {
    /// Wraps observed data.
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("series contains non-finite values"));
        }
        Ok(Self { values, seed: None, spec: None })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `w^2_{jk} = S_j(k/T)` for `k in 0..T`, with its prefix sums.
fn weight_prefix(spec: &SpectrumSpec, scale: Scale, t: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(t + 1);
    let mut acc = 0.0;
    p.push(0.0);
    for k in 0..t {
        acc += spec.value(scale, k as f64 / t as f64);
        p.push(acc);
    }
    p
}

/// Simulates `T` values of the process with innovations drawn from `seed`.
pub fn simulate(spec: &SpectrumSpec, t: usize, seed: u64) -> Result<SeriesSample> {
    check_len(t)?;
    let mut x = vec![0.0; t];
    let mut xi = vec![0.0; t];
    let mut p = vec![0.0; t + 1];
    for scale in Scale::finest(simulation_levels(spec, t)) {
        if !spec.is_active(scale) {
            continue;
        }
        NormalStream::new(seed, Domain::Innovation, scale.level(), 0).fill(&mut xi);
        for k in 0..t {
            let w = spec.value(scale, k as f64 / t as f64).sqrt();
            p[k + 1] = p[k] + w * xi[k];
        }
        let runs = Family::Haar.wavelet(scale).runs();
        for (i, xt) in x.iter_mut().enumerate() {
            // k = i + m over the run m in start..end, truncated at T
            for r in &runs {
                let a = (i + r.start).min(t);
                let b = (i + r.end).min(t);
                *xt += r.value * (p[b] - p[a]);
            }
        }
    }
    Ok(SeriesSample { values: x, seed: Some(seed), spec: Some(spec.clone()) })
}

/// Exact covariance of `X_0..X_{T-1}` as a banded matrix (bandwidth `L_J - 1`).
pub fn covariance_band(spec: &SpectrumSpec, t: usize) -> Result<BandedSym> {
    check_len(t)?;
    let levels = simulation_levels(spec, t);
    let bw = Scale::from_index(levels - 1).support() - 1;
    let mut out = BandedSym::zeros(t, bw);
    for scale in Scale::finest(levels) {
        if !spec.is_active(scale) {
            continue;
        }
        let w = weight_prefix(spec, scale, t);
        let profiles = Family::Haar.wavelet(scale).lag_profiles();
        for (u, segs) in profiles.iter().enumerate().take(out.bandwidth() + 1) {
            for (s, v) in out.diag_mut(u).iter_mut().enumerate() {
                // k = s + m over m in segment, k < T
                for seg in segs {
                    let a = (s + seg.start).min(t);
                    let b = (s + seg.end).min(t);
                    *v += seg.product * (w[b] - w[a]);
                }
            }
        }
    }
    Ok(out)
}

/// Dense exact covariance `Sigma_T`; refuses `T > MAX_DENSE`.
pub fn covariance_matrix(spec: &SpectrumSpec, t: usize) -> Result<DMatrix<f64>> {
    if t > MAX_DENSE {
        return Err(LswError::Resource(format!("dense {t} x {t} covariance exceeds the bound T <= {MAX_DENSE}")));
    }
    Ok(covariance_band(spec, t)?.to_dense())
}

/// `c(z, tau) = sum_j S_j(z) Psi_j(tau)` over the declared scales.
pub fn local_autocovariance(spec: &SpectrumSpec, z: f64, tau: i64) -> Result<f64> {
    if !(z > 0.0 && z < 1.0) {
        return Err(domain(format!("rescaled time {z} is outside (0, 1)")));
    }
    Ok(Scale::finest(spec.levels())
        .map(|s| spec.value(s, z) * Family::Haar.autocorrelation(s, tau))
        .sum())
}
