//! Discrete nondecimated wavelets, autocorrelation wavelets and the Gram
//! matrix of the autocorrelation system.
//!
//! Scales follow the negative numbering used throughout the crate: `j = -1`
//! is the finest scale and a wavelet at scale `j` has support `2^{-j}`.
//! Internally a scale is stored as its level `i = -j >= 1`, and tables are
//! indexed by `i - 1`; [`Scale`] is the only place where these conversions
//! happen.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, LswError, Result};

/// Deepest level accepted anywhere in the crate (support `2^30`).
pub const MAX_LEVEL: u32 = 30;

/// Tolerance on `|A A^{-1} - I|` accepted by [`GramMatrix::new`].
pub const INVERSE_TOLERANCE: f64 = 1e-8;

/// A wavelet scale `j <= -1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scale(u32);

impl Scale {
    /// Scale from the negative index `j`.
    pub fn new(j: i32) -> Result<Self> {
        if j >= 0 || j < -(MAX_LEVEL as i32) {
            return Err(domain(format!("scale j = {j} must satisfy -{MAX_LEVEL} <= j <= -1")));
        }
        Ok(Self((-j) as u32))
    }

    /// Scale from the positive level `i = -j`.
    pub fn from_level(level: u32) -> Result<Self> {
        if level == 0 || level > MAX_LEVEL {
            return Err(domain(format!("scale level {level} must lie in 1..={MAX_LEVEL}")));
        }
        Ok(Self(level))
    }

    /// Scale stored at zero-based table index `idx`.
    pub fn from_index(idx: usize) -> Self {
        assert!(idx < MAX_LEVEL as usize, "scale index {idx} out of range");
        Self(idx as u32 + 1)
    }

    /// The scales `-1, -2, ..., -levels`.
    pub fn finest(levels: usize) -> impl Iterator<Item = Scale> {
        (0..levels).map(Scale::from_index)
    }

    pub fn j(self) -> i32 {
        -(self.0 as i32)
    }

    pub fn level(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    /// Support length of `psi_{j0}`.
    pub fn support(self) -> usize {
        1usize << self.0
    }

    /// `2^j`.
    pub fn dyadic(self) -> f64 {
        (-(self.0 as f64)).exp2()
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.j())
    }
}

/// Mother wavelet family. Only Haar ships; it is the family for which the Gram
/// matrix is known to be invertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[non_exhaustive]
pub enum Family {
    #[default]
    Haar,
}

impl Family {
    pub fn wavelet(self, scale: Scale) -> WaveletVector {
        match self {
            Family::Haar => haar_wavelet(scale),
        }
    }

    /// `Psi_j(tau)` from the closed form of the family.
    pub fn autocorrelation(self, scale: Scale, tau: i64) -> f64 {
        match self {
            Family::Haar => {
                let l = scale.support() as f64;
                let t = tau.unsigned_abs() as f64;
                if t <= l / 2.0 {
                    1.0 - 3.0 * t / l
                } else if t < l {
                    t / l - 1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Entries of `psi_{j0}` at offsets `0..L_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletVector {
    pub scale: Scale,
    pub values: Vec<f64>,
}

/// A maximal block of equal consecutive wavelet entries, offsets `start..end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub start: usize,
    pub end: usize,
    pub value: f64,
}

/// A block of offsets `m in start..end` on which `psi(m) * psi(m - lag)` is
/// constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagSegment {
    pub start: usize,
    pub end: usize,
    pub product: f64,
}

impl WaveletVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `psi_{jk}(t) = psi_{j, k - t}`; zero off the support.
    pub fn shifted(&self, k: i64, t: i64) -> f64 {
        let m = k - t;
        if m < 0 || m as usize >= self.values.len() {
            0.0
        } else {
            self.values[m as usize]
        }
    }

    pub fn runs(&self) -> Vec<Run> {
        let mut runs: Vec<Run> = Vec::new();
        for (m, &v) in self.values.iter().enumerate() {
            match runs.last_mut() {
                Some(r) if r.value == v => r.end = m + 1,
                _ => runs.push(Run { start: m, end: m + 1, value: v }),
            }
        }
        runs
    }

    /// For every lag `u in 0..L`, the blocks of `m in u..L` on which
    /// `psi(m) psi(m - u)` is constant. Used to build banded wavelet Gram
    /// matrices with prefix sums instead of per-entry loops.
    pub fn lag_profiles(&self) -> Vec<Vec<LagSegment>> {
        let l = self.values.len();
        let bounds: Vec<usize> = self.runs().iter().map(|r| r.start).chain(std::iter::once(l)).collect();
        (0..l)
            .map(|u| {
                let mut cuts: Vec<usize> = bounds
                    .iter()
                    .flat_map(|&b| [b, b + u])
                    .filter(|&b| b >= u && b <= l)
                    .collect();
                cuts.push(u);
                cuts.sort_unstable();
                cuts.dedup();
                cuts.windows(2)
                    .map(|w| LagSegment {
                        start: w[0],
                        end: w[1],
                        product: self.values[w[0]] * self.values[w[0] - u],
                    })
                    .filter(|s| s.product != 0.0)
                    .collect()
            })
            .collect()
    }
}

/// The Haar wavelet `psi_{j0}`: `2^{j/2}` on the first half of its support and
/// `-2^{j/2}` on the second half.
pub fn haar_wavelet(scale: Scale) -> WaveletVector {
    let l = scale.support();
    let h = (scale.j() as f64 / 2.0).exp2();
    let values = (0..l).map(|m| if m < l / 2 { h } else { -h }).collect();
    WaveletVector { scale, values }
}

/// `Psi_j(tau) = sum_k psi_{jk}(0) psi_{jk}(tau)`, evaluated by discrete
/// autocorrelation of the wavelet vector.
pub fn autocorrelation_wavelet(wavelet: &WaveletVector, tau: i64) -> f64 {
    let l = wavelet.len() as i64;
    let t = tau.abs();
    if t >= l {
        return 0.0;
    }
    (t..l).map(|m| wavelet.values[m as usize] * wavelet.values[(m - t) as usize]).sum()
}

/// Cached tables of `Psi_j(tau)` for the scales `-1..=-J`.
///
/// Each table is two-sided, covering `tau in -(L_j - 1)..=(L_j - 1)`; outside
/// that range `Psi_j` vanishes.
#[derive(Debug, Clone)]
pub struct AutocorrSystem {
    family: Family,
    wavelets: Vec<WaveletVector>,
    tables: Vec<Vec<f64>>,
}

impl AutocorrSystem {
    pub fn new(family: Family, levels: usize) -> Result<Self> {
        if levels == 0 || levels > MAX_LEVEL as usize {
            return Err(domain(format!("scale count {levels} must lie in 1..={MAX_LEVEL}")));
        }
        let wavelets: Vec<_> = Scale::finest(levels).map(|s| family.wavelet(s)).collect();
        let tables = Scale::finest(levels)
            .map(|s| {
                let reach = s.support() as i64 - 1;
                (-reach..=reach).map(|tau| family.autocorrelation(s, tau)).collect()
            })
            .collect();
        Ok(Self { family, wavelets, tables })
    }

    pub fn haar(levels: usize) -> Result<Self> {
        Self::new(Family::Haar, levels)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn levels(&self) -> usize {
        self.tables.len()
    }

    pub fn wavelet(&self, scale: Scale) -> &WaveletVector {
        &self.wavelets[scale.index()]
    }

    pub fn wavelets(&self) -> &[WaveletVector] {
        &self.wavelets
    }

    /// Two-sided table for `scale`, entry `tau + L_j - 1`.
    pub fn table(&self, scale: Scale) -> &[f64] {
        &self.tables[scale.index()]
    }

    pub fn psi(&self, scale: Scale, tau: i64) -> f64 {
        let table = &self.tables[scale.index()];
        let reach = (table.len() / 2) as i64;
        if tau.abs() > reach {
            0.0
        } else {
            table[(tau + reach) as usize]
        }
    }

    /// Largest `|Psi_j(tau) - Psi_j(-tau)|` over all cached entries.
    pub fn symmetry_residual(&self) -> f64 {
        self.tables
            .iter()
            .flat_map(|t| {
                let n = t.len();
                (0..n / 2).map(move |i| (t[i] - t[n - 1 - i]).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Overwrites one cached entry. Only meant for fault-injection tests of the
    /// self-checks.
    #[doc(hidden)]
    pub fn corrupt_entry(&mut self, scale: Scale, tau: i64, value: f64) {
        let table = &mut self.tables[scale.index()];
        let reach = (table.len() / 2) as i64;
        table[(tau + reach) as usize] = value;
    }

    /// `<Psi_j, Psi_l> = sum_tau Psi_j(tau) Psi_l(tau)`.
    pub fn inner(&self, a: Scale, b: Scale) -> f64 {
        let (small, large) = if a.level() <= b.level() { (a, b) } else { (b, a) };
        let reach = small.support() as i64 - 1;
        (-reach..=reach).map(|tau| self.psi(small, tau) * self.psi(large, tau)).sum()
    }
}

/// The Gram matrix `A = (<Psi_j, Psi_l>)` of the first `J` scales with its
/// inverse. Row and column `i` correspond to scale `-(i + 1)`.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub a: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
    pub condition_number: f64,
    pub min_eigenvalue: f64,
    /// `max |A A^{-1} - I|`.
    pub inverse_residual: f64,
}

impl GramMatrix {
    pub fn new(system: &AutocorrSystem) -> Result<Self> {
        let n = system.levels();
        let a = DMatrix::from_fn(n, n, |r, c| system.inner(Scale::from_index(r), Scale::from_index(c)));
        let eig = SymmetricEigen::new(a.clone()).eigenvalues;
        let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let max_eigenvalue = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let condition_number = if min_eigenvalue > 0.0 { max_eigenvalue / min_eigenvalue } else { f64::INFINITY };
        if min_eigenvalue <= 0.0 {
            return Err(LswError::Numerical {
                message: format!("Gram matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e})"),
                condition_number,
            });
        }
        let a_inv = a.clone().lu().try_inverse().ok_or_else(|| LswError::Numerical {
            message: "Gram matrix is singular".into(),
            condition_number,
        })?;
        let inverse_residual = (&a * &a_inv - DMatrix::identity(n, n)).abs().max();
        if !(inverse_residual <= INVERSE_TOLERANCE) {
            return Err(LswError::Numerical {
                message: format!("inverse residual {inverse_residual:.3e} exceeds {INVERSE_TOLERANCE:.0e}"),
                condition_number,
            });
        }
        Ok(Self { a, a_inv, condition_number, min_eigenvalue, inverse_residual })
    }

    pub fn levels(&self) -> usize {
        self.a.nrows()
    }

    pub fn entry(&self, j: Scale, l: Scale) -> f64 {
        self.a[(j.index(), l.index())]
    }

    pub fn inv_entry(&self, j: Scale, l: Scale) -> f64 {
        self.a_inv[(j.index(), l.index())]
    }

    /// Row `j` of `A^{-1}`.
    pub fn inv_row(&self, j: Scale) -> Vec<f64> {
        self.a_inv.row(j.index()).iter().copied().collect()
    }
}

/// Gram matrix of the Haar autocorrelation system with `levels` scales.
pub fn gram_matrix(levels: usize) -> Result<GramMatrix> {
    GramMatrix::new(&AutocorrSystem::haar(levels)?)
}

/// `sum_{j=-J}^{-1} 2^j Psi_j(tau)`, the truncated left side of the
/// delta identity.
pub fn delta_partial_sum(system: &AutocorrSystem, tau: i64) -> f64 {
    Scale::finest(system.levels()).map(|s| s.dyadic() * system.psi(s, tau)).sum()
}

/// Largest residual of the truncated delta identity over `|tau| <= tau_max`.
pub fn check_delta_identity(system: &AutocorrSystem, tau_max: i64) -> f64 {
    (-tau_max..=tau_max)
        .map(|tau| {
            let target = if tau == 0 { 1.0 } else { 0.0 };
            (delta_partial_sum(system, tau) - target).abs()
        })
        .fold(0.0, f64::max)
}

/// Per-scale deviation `|sum_l A^{-1}_{jl} - 2^j|`.
pub fn check_inverse_rowsum(gram: &GramMatrix) -> Vec<f64> {
    (0..gram.levels())
        .map(|r| (gram.a_inv.row(r).sum() - Scale::from_index(r).dyadic()).abs())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_psi(scale: Scale, tau: i64) -> f64 {
        // sum over k of psi_{jk}(0) psi_{jk}(tau), k ranging over every shift
        // that touches either point
        let w = haar_wavelet(scale);
        let l = w.len() as i64;
        (-2 * l..2 * l).map(|k| w.shifted(k, 0) * w.shifted(k, tau)).sum()
    }

    #[test]
    fn scale_conversions() {
        let s = Scale::new(-3).unwrap();
        assert_eq!((s.j(), s.level(), s.index(), s.support()), (-3, 3, 2, 8));
        assert_eq!(Scale::from_index(2), s);
        assert!(Scale::new(0).is_err());
        assert!(Scale::new(1).is_err());
        assert!(Scale::from_level(0).is_err());
        assert_eq!(s.dyadic(), 0.125);
    }

    #[test]
    fn haar_finest_and_second() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(haar_wavelet(Scale::new(-1).unwrap()).values, vec![h, -h]);
        assert_eq!(haar_wavelet(Scale::new(-2).unwrap()).values, vec![0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn haar_unit_energy_zero_mean() {
        for level in 1..=14 {
            let w = haar_wavelet(Scale::from_level(level).unwrap());
            let energy: f64 = w.values.iter().map(|v| v * v).sum();
            let mean: f64 = w.values.iter().sum();
            assert!((energy - 1.0).abs() < 1e-12);
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn autocorrelation_examples() {
        let s1 = Scale::new(-1).unwrap();
        let s2 = Scale::new(-2).unwrap();
        let sys = AutocorrSystem::haar(2).unwrap();
        assert_eq!(sys.psi(s1, 0), 1.0);
        assert_eq!(sys.psi(s1, 1), -0.5);
        assert_eq!(sys.psi(s2, 2), -0.5);
        assert_eq!(sys.psi(s1, 5), 0.0);
        // the same values by brute force
        assert!((brute_psi(s1, 1) + 0.5).abs() < 1e-15);
        assert!((brute_psi(s2, 2) + 0.5).abs() < 1e-15);
        assert_eq!(autocorrelation_wavelet(&haar_wavelet(s1), 5), 0.0);
    }

    #[test]
    fn closed_form_tables_match_brute_force() {
        let sys = AutocorrSystem::haar(8).unwrap();
        for s in Scale::finest(8) {
            let w = haar_wavelet(s);
            let reach = 2 * s.support() as i64;
            for tau in -reach..=reach {
                let direct = autocorrelation_wavelet(&w, tau);
                assert!((sys.psi(s, tau) - direct).abs() < 1e-12, "{s} {tau}");
            }
        }
        for s in Scale::finest(4) {
            for tau in -20..=20 {
                assert!((sys.psi(s, tau) - brute_psi(s, tau)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn support_and_bounds() {
        let sys = AutocorrSystem::haar(10).unwrap();
        for s in Scale::finest(10) {
            let l = s.support() as i64;
            let nonzero = (-3 * l..=3 * l).filter(|&t| sys.psi(s, t) != 0.0).count() as i64;
            assert!(nonzero <= 2 * l - 1);
            assert!((sys.psi(s, 0) - 1.0).abs() < 1e-12);
            for t in -l..=l {
                assert!(sys.psi(s, t).abs() <= 1.0 + 1e-12);
            }
        }
        assert_eq!(sys.symmetry_residual(), 0.0);
    }

    #[test]
    fn runs_and_lag_profiles() {
        let w = haar_wavelet(Scale::new(-3).unwrap());
        assert_eq!(w.runs().len(), 2);
        let prof = w.lag_profiles();
        for (u, segs) in prof.iter().enumerate() {
            for m in u..w.len() {
                let expect = w.values[m] * w.values[m - u];
                let got = segs.iter().find(|s| s.start <= m && m < s.end).map_or(0.0, |s| s.product);
                assert_eq!(got, expect, "lag {u} offset {m}");
            }
        }
    }

    #[test]
    fn gram_small_cases() {
        let g1 = gram_matrix(1).unwrap();
        assert!((g1.a[(0, 0)] - 1.5).abs() < 1e-15);
        assert!((g1.a_inv[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        let g2 = gram_matrix(2).unwrap();
        assert!((g2.a[(0, 1)] - 0.75).abs() < 1e-15);
        assert_eq!(g2.a[(0, 1)], g2.a[(1, 0)]);
    }

    #[test]
    fn gram_bounds_and_positivity() {
        for levels in 1..=12 {
            let g = gram_matrix(levels).unwrap();
            assert!(g.min_eigenvalue > 0.0);
            assert!(g.inverse_residual <= INVERSE_TOLERANCE);
            for r in 0..levels {
                for c in 0..levels {
                    assert_eq!(g.a[(r, c)], g.a[(c, r)]);
                    let lr = Scale::from_index(r).support() as f64;
                    let lc = Scale::from_index(c).support() as f64;
                    assert!(g.a[(r, c)] <= (2.0 * lr - 1.0).min(2.0 * lc - 1.0));
                }
            }
        }
    }

    #[test]
    fn gram_is_deterministic() {
        let a = gram_matrix(9).unwrap();
        let b = gram_matrix(9).unwrap();
        assert_eq!(a.a, b.a);
        assert_eq!(a.a_inv, b.a_inv);
    }

    #[test]
    fn delta_identity_at_origin() {
        for levels in 1..=12 {
            let sys = AutocorrSystem::haar(levels).unwrap();
            let resid = (delta_partial_sum(&sys, 0) - 1.0).abs();
            assert_eq!(resid, (-(levels as f64)).exp2());
        }
        let sys1 = AutocorrSystem::haar(1).unwrap();
        assert_eq!(delta_partial_sum(&sys1, 2), 0.0);
        let sys10 = AutocorrSystem::haar(10).unwrap();
        assert!(check_delta_identity(&sys10, 32) <= 2f64.powi(-10) + 1e-15);
    }

    #[test]
    fn weighted_gram_rows_converge() {
        // sum_l 2^l A_{jl} -> Psi_j(0) = 1, residual bounded by 2^-J (2 L_j - 1)
        for levels in [4usize, 8, 12] {
            let sys = AutocorrSystem::haar(levels).unwrap();
            let g = GramMatrix::new(&sys).unwrap();
            for r in 0..levels {
                let s: f64 = (0..levels).map(|c| Scale::from_index(c).dyadic() * g.a[(r, c)]).sum();
                let bound = (-(levels as f64)).exp2() * (2.0 * Scale::from_index(r).support() as f64 - 1.0);
                assert!((s - 1.0).abs() <= bound + 1e-12, "J={levels} row {r}: {s}");
            }
        }
    }

    #[test]
    fn inverse_rowsum_j1_and_decay() {
        let dev = check_inverse_rowsum(&gram_matrix(1).unwrap());
        assert!((dev[0] - 1.0 / 6.0).abs() < 1e-15);
        let devs: Vec<f64> = [4usize, 6, 8, 10]
            .iter()
            .map(|&levels| check_inverse_rowsum(&gram_matrix(levels).unwrap())[0])
            .collect();
        for w in devs.windows(2) {
            assert!(w[1] < w[0], "{devs:?}");
        }
    }
}
