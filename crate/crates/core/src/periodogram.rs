//! Raw and corrected wavelet periodograms.
//!
//! `I_{jk} = (sum_t X_t psi_{j,k-t})^2` with the inner sum truncated to the
//! observed range, and `L_{j.} = sum_l (A^{-1})_{jl} I_{l.}`.

use crate::error::{domain, Result};
use crate::lsw::{max_levels, MIN_LEN};
use crate::wavelet::{Family, GramMatrix, Scale, WaveletVector};

/// Nondecimated coefficients `d_k = sum_t x_t psi_{k-t}`, `k in 0..T`.
pub fn wavelet_coefficients(x: &[f64], wavelet: &WaveletVector) -> Vec<f64> {
    let t = x.len() as i64;
    let mut p = Vec::with_capacity(x.len() + 1);
    p.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        p.push(acc);
    }
    // sum of x over [a, b), both clipped to [0, T)
    let range = |a: i64, b: i64| {
        let a = a.clamp(0, t) as usize;
        let b = b.clamp(0, t) as usize;
        if b > a { p[b] - p[a] } else { 0.0 }
    };
    let runs = wavelet.runs();
    (0..t)
        .map(|k| runs.iter().map(|r| r.value * range(k - r.end as i64 + 1, k - r.start as i64 + 1)).sum())
        .collect()
}

/// Raw periodogram rows for scales `-1..=-levels`.
pub fn raw_periodogram(x: &[f64], levels: usize) -> Result<Vec<Vec<f64>>> {
    if x.len() < MIN_LEN {
        return Err(domain(format!("series of length {} is below the minimum {MIN_LEN}", x.len())));
    }
    let cap = max_levels(x.len());
    if levels == 0 || levels > cap {
        return Err(domain(format!("{levels} scales requested; a series of length {} allows 1..={cap}", x.len())));
    }
    Ok(Scale::finest(levels)
        .map(|s| wavelet_coefficients(x, &Family::Haar.wavelet(s)).into_iter().map(|d| d * d).collect())
        .collect())
}

/// `A^{-1}` applied to the raw rows.
pub fn corrected_periodogram(raw: &[Vec<f64>], gram: &GramMatrix) -> Result<Vec<Vec<f64>>> {
    let levels = raw.len();
    if gram.levels() != levels {
        return Err(domain(format!("Gram matrix has {} scales, periodogram has {levels}", gram.levels())));
    }
    let t = raw.first().map_or(0, |r| r.len());
    Ok((0..levels)
        .map(|j| {
            let mut row = vec![0.0; t];
            for (l, raw_l) in raw.iter().enumerate() {
                let c = gram.a_inv[(j, l)];
                for (o, r) in row.iter_mut().zip(raw_l) {
                    *o += c * r;
                }
            }
            row
        })
        .collect())
}

/// Raw and corrected periodograms of one series, with the Gram matrix used.
#[derive(Debug, Clone)]
pub struct PeriodogramGrid {
    raw: Vec<Vec<f64>>,
    corrected: Vec<Vec<f64>>,
    gram: GramMatrix,
}

impl PeriodogramGrid {
    /// Uses as many scales as `gram` has.
    pub fn new(x: &[f64], gram: &GramMatrix) -> Result<Self> {
        let raw = raw_periodogram(x, gram.levels())?;
        Self::from_raw(raw, gram)
    }

    pub fn from_raw(raw: Vec<Vec<f64>>, gram: &GramMatrix) -> Result<Self> {
        let corrected = corrected_periodogram(&raw, gram)?;
        Ok(Self { raw, corrected, gram: gram.clone() })
    }

    /// Sample size `T`.
    pub fn len(&self) -> usize {
        self.raw[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn levels(&self) -> usize {
        self.raw.len()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn raw(&self, scale: Scale) -> &[f64] {
        &self.raw[scale.index()]
    }

    pub fn corrected(&self, scale: Scale) -> &[f64] {
        &self.corrected[scale.index()]
    }

    pub fn check_scale(&self, scale: Scale) -> Result<()> {
        if scale.index() >= self.levels() {
            return Err(domain(format!("scale {scale} is beyond the {} scales of the periodogram", self.levels())));
        }
        Ok(())
    }
}
