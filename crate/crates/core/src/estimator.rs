//! Averaged regularized estimates `Q_{j,R}` over observed-time intervals.

use std::fmt;

use nalgebra::DMatrix;

use crate::banded::BandedSym;
use crate::error::{domain, LswError, Result};
use crate::lsw::MAX_DENSE;
use crate::periodogram::PeriodogramGrid;
use crate::rng::{Domain, NormalStream};
use crate::spectrum::SpectrumSpec;
use crate::wavelet::{Family, GramMatrix, Scale};

/// Half-open observed-time interval `[lo, hi)`, i.e. the rescaled interval
/// `[lo/T, hi/T)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeInterval {
    pub lo: usize,
    pub hi: usize,
}

impl TimeInterval {
    pub fn new(lo: usize, hi: usize, t: usize) -> Result<Self> {
        if lo >= hi || hi > t {
            return Err(domain(format!("interval [{lo}, {hi}) is empty or exceeds T = {t}")));
        }
        Ok(Self { lo, hi })
    }

    /// `|RT|`.
    pub fn count(&self) -> usize {
        self.hi - self.lo
    }

    pub fn contains(&self, k: usize) -> bool {
        self.lo <= k && k < self.hi
    }

    pub fn is_within(&self, other: &TimeInterval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn rescaled(&self, t: usize) -> (f64, f64) {
        (self.lo as f64 / t as f64, self.hi as f64 / t as f64)
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.lo, self.hi)
    }
}

/// Where a variance came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceSource {
    ExactOracle,
    Plugin,
}

impl fmt::Display for VarianceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceSource::ExactOracle => "exact",
            VarianceSource::Plugin => "plugin",
        })
    }
}

/// `Q_{j,R;T}` with its variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedEstimate {
    pub scale: Scale,
    pub interval: TimeInterval,
    pub q: f64,
    pub sigma2: f64,
    pub source: VarianceSource,
}

/// Interval averages of `L_{j,k} + z_{j,k}` for one scale, in `O(1)` per
/// interval after an `O(T)` set-up.
///
/// The noise `z_{j,k} ~ N(0, C^2 2^j)` is addressed by `(seed, j, k)`, so
/// nested intervals share their draws.
#[derive(Debug, Clone)]
pub struct Averager {
    scale: Scale,
    c2: f64,
    prefix: Vec<f64>,
}

impl Averager {
    pub fn new(grid: &PeriodogramGrid, scale: Scale, c2: f64, seed: u64) -> Result<Self> {
        grid.check_scale(scale)?;
        if !(c2 >= 0.0 && c2.is_finite()) {
            return Err(domain(format!("regularization constant {c2} must be finite and nonnegative")));
        }
        let row = grid.corrected(scale);
        let sd = (c2 * scale.dyadic()).sqrt();
        let mut noise = NormalStream::new(seed, Domain::Regularization, scale.level(), 0);
        let mut prefix = Vec::with_capacity(row.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for &l in row {
            let z = if c2 > 0.0 { sd * noise.next_normal() } else { 0.0 };
            acc += l + z;
            prefix.push(acc);
        }
        Ok(Self { scale, c2, prefix })
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `Q_{j,R;T}`.
    pub fn q(&self, r: &TimeInterval) -> f64 {
        (self.prefix[r.hi] - self.prefix[r.lo]) / r.count() as f64
    }

    /// Variance of the averaged noise, `C^2 2^j / |RT|`.
    pub fn noise_variance(&self, r: &TimeInterval) -> f64 {
        self.c2 * self.scale.dyadic() / r.count() as f64
    }
}

/// `Q_{j,R} = |R|^{-1} int_R S_j(z) dz` for the rescaled interval of `r`.
pub fn target_q(spec: &SpectrumSpec, scale: Scale, r: &TimeInterval, t: usize) -> f64 {
    let (a, b) = r.rescaled(t);
    spec.integral(scale, a, b) / (b - a)
}

/// `U_{j,R;T}` in banded form (bandwidth `L_J - 1`), where
/// `U_{st} = |RT|^{-1} sum_l A^{-1}_{jl} sum_{k in R} psi_{l,k-s} psi_{l,k-t}`.
pub fn u_band(scale: Scale, r: &TimeInterval, t: usize, gram: &GramMatrix) -> Result<BandedSym> {
    if scale.index() >= gram.levels() {
        return Err(domain(format!("scale {scale} is beyond the {} scales of the Gram matrix", gram.levels())));
    }
    TimeInterval::new(r.lo, r.hi, t)?;
    let levels = gram.levels();
    let bw = Scale::from_index(levels - 1).support() - 1;
    let mut out = BandedSym::zeros(t, bw);
    let n = r.count() as f64;
    for l in Scale::finest(levels) {
        let a = gram.inv_entry(scale, l) / n;
        let profiles = Family::Haar.wavelet(l).lag_profiles();
        for (u, segs) in profiles.iter().enumerate().take(out.bandwidth() + 1) {
            for (s, v) in out.diag_mut(u).iter_mut().enumerate() {
                // k = s + m must lie in [lo, hi)
                for seg in segs {
                    let m0 = (s + seg.start).max(r.lo);
                    let m1 = (s + seg.end).min(r.hi);
                    if m1 > m0 {
                        *v += a * seg.product * (m1 - m0) as f64;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Dense `U_{j,R;T}`; refuses `T > MAX_DENSE`.
pub fn u_matrix(scale: Scale, r: &TimeInterval, t: usize, gram: &GramMatrix) -> Result<DMatrix<f64>> {
    if t > MAX_DENSE {
        return Err(LswError::Resource(format!("dense {t} x {t} matrix exceeds the bound T <= {MAX_DENSE}")));
    }
    Ok(u_band(scale, r, t, gram)?.to_dense())
}

/// `x' M x` for a banded symmetric `M`.
pub fn quadratic_form(m: &BandedSym, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for u in 0..=m.bandwidth() {
        let d = m.diag(u);
        let w = if u == 0 { 1.0 } else { 2.0 };
        acc += w * d.iter().enumerate().map(|(s, v)| v * x[s] * x[s + u]).sum::<f64>();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::white_noise;
    use crate::wavelet::{gram_matrix, haar_wavelet};

    #[test]
    fn interval_validation() {
        assert!(TimeInterval::new(3, 3, 10).is_err());
        assert!(TimeInterval::new(3, 11, 10).is_err());
        let r = TimeInterval::new(2, 7, 10).unwrap();
        assert_eq!(r.count(), 5);
        assert!(r.contains(2) && !r.contains(7));
        assert!(TimeInterval { lo: 3, hi: 5 }.is_within(&r));
    }

    #[test]
    fn zero_series_without_noise_averages_to_zero() {
        let g = gram_matrix(4).unwrap();
        let p = PeriodogramGrid::new(&[0.0; 64], &g).unwrap();
        let a = Averager::new(&p, Scale::new(-2).unwrap(), 0.0, 1).unwrap();
        assert_eq!(a.q(&TimeInterval { lo: 0, hi: 64 }), 0.0);
    }

    #[test]
    fn noise_is_shared_across_nested_intervals() {
        let g = gram_matrix(4).unwrap();
        let p = PeriodogramGrid::new(&[0.0; 64], &g).unwrap();
        let a = Averager::new(&p, Scale::new(-1).unwrap(), 2.0, 5).unwrap();
        let whole = a.q(&TimeInterval { lo: 10, hi: 30 });
        let left = a.q(&TimeInterval { lo: 10, hi: 20 });
        let right = a.q(&TimeInterval { lo: 20, hi: 30 });
        assert!((whole - (left + right) / 2.0).abs() < 1e-14);
        assert!((a.noise_variance(&TimeInterval { lo: 0, hi: 8 }) - 2.0 * 0.5 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn target_q_examples() {
        let spec = SpectrumSpec::benchmark();
        let s1 = Scale::new(-1).unwrap();
        let t = 1000;
        assert!((target_q(&spec, s1, &TimeInterval { lo: 250, hi: 575 }, t) - 1.0).abs() < 1e-12);
        assert!((target_q(&spec, s1, &TimeInterval { lo: 300, hi: 400 }, t) - 1.0).abs() < 1e-12);
        assert_eq!(target_q(&spec, Scale::new(-2).unwrap(), &TimeInterval { lo: 0, hi: 1000 }, t), 0.0);
    }

    #[test]
    fn u_band_matches_direct_definition() {
        let g = gram_matrix(4).unwrap();
        let t = 40;
        let r = TimeInterval { lo: 11, hi: 29 };
        for j in Scale::finest(4) {
            let u = u_matrix(j, &r, t, &g).unwrap();
            for s in 0..t as i64 {
                for v in 0..t as i64 {
                    let mut want = 0.0;
                    for l in Scale::finest(4) {
                        let w = haar_wavelet(l);
                        let inner: f64 = (r.lo as i64..r.hi as i64).map(|k| w.shifted(k, s) * w.shifted(k, v)).sum();
                        want += g.inv_entry(j, l) * inner;
                    }
                    want /= r.count() as f64;
                    assert!((u[(s as usize, v as usize)] - want).abs() < 1e-12);
                }
            }
            assert_eq!(u, u.transpose());
        }
    }

    #[test]
    fn u_vanishes_beyond_band() {
        let g = gram_matrix(3).unwrap();
        let u = u_matrix(Scale::new(-1).unwrap(), &TimeInterval { lo: 5, hi: 30 }, 40, &g).unwrap();
        for s in 0..40usize {
            for v in 0..40usize {
                if s.abs_diff(v) >= 8 {
                    assert_eq!(u[(s, v)], 0.0);
                }
            }
        }
    }

    #[test]
    fn quadratic_form_is_the_average_corrected_periodogram() {
        let t = 128;
        let g = gram_matrix(5).unwrap();
        let x = white_noise(21, t);
        let p = PeriodogramGrid::new(&x, &g).unwrap();
        for j in Scale::finest(5) {
            let a = Averager::new(&p, j, 0.0, 0).unwrap();
            for r in [TimeInterval { lo: 0, hi: t }, TimeInterval { lo: 17, hi: 60 }] {
                let u = u_band(j, &r, t, &g).unwrap();
                assert!((quadratic_form(&u, &x) - a.q(&r)).abs() < 1e-10);
            }
        }
    }
}
