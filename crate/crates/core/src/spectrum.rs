//! Evolutionary wavelet spectra `S_j(z)` on rescaled time `z in (0, 1)`.
//!
//! A spectrum is declared per scale as a list of half-open pieces `[a, b)`,
//! each carrying a constant or a shifted squared sine, or as a table of values
//! on an equispaced grid. Scales without pieces are inactive.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::error::{domain, LswError, Result};
use crate::wavelet::{Scale, MAX_LEVEL};

/// Value of one piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expr {
    Const(f64),
    /// `amp * sin^2(omega * pi * z + phase) + offset`.
    Sin2 { amp: f64, omega: f64, phase: f64, offset: f64 },
}

impl Expr {
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Expr::Const(c) => c,
            Expr::Sin2 { amp, omega, phase, offset } => {
                let s = (omega * PI * z + phase).sin();
                amp * s * s + offset
            }
        }
    }

    /// `int_a^b expr(z) dz`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            Expr::Const(c) => c * (b - a),
            Expr::Sin2 { amp, omega, phase, offset } => {
                let rate = omega * PI;
                let sq = if rate == 0.0 {
                    phase.sin().powi(2) * (b - a)
                } else {
                    let anti = |z: f64| z / 2.0 - (2.0 * (rate * z + phase)).sin() / (4.0 * rate);
                    anti(b) - anti(a)
                };
                amp * sq + offset * (b - a)
            }
        }
    }

    /// Total variation of the expression over `[a, b]`.
    pub fn variation(&self, a: f64, b: f64) -> f64 {
        match *self {
            Expr::Const(_) => 0.0,
            Expr::Sin2 { amp, omega, phase, .. } => {
                let (t0, t1) = {
                    let x = omega * PI * a + phase;
                    let y = omega * PI * b + phase;
                    if x <= y { (x, y) } else { (y, x) }
                };
                amp * sin2_variation(t0, t1)
            }
        }
    }

    fn is_nonnegative(&self) -> bool {
        match *self {
            Expr::Const(c) => c >= 0.0,
            Expr::Sin2 { amp, offset, .. } => amp >= 0.0 && offset >= 0.0,
        }
    }
}

/// Variation of `sin^2` over `[t0, t1]`; the function is monotone between
/// consecutive multiples of `pi / 2`.
fn sin2_variation(t0: f64, t1: f64) -> f64 {
    let g = |t: f64| t.sin().powi(2);
    let mut total = 0.0;
    let mut prev = t0;
    let mut m = (t0 / FRAC_PI_2).floor() + 1.0;
    while m * FRAC_PI_2 < t1 {
        let cut = m * FRAC_PI_2;
        total += (g(cut) - g(prev)).abs();
        prev = cut;
        m += 1.0;
    }
    total + (g(t1) - g(prev)).abs()
}

/// `expr` on the half-open rescaled-time interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub expr: Expr,
}

/// Spectrum of a single scale.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleSpectrum {
    /// Non-overlapping pieces sorted by `lo`; zero elsewhere.
    Pieces(Vec<Piece>),
    /// Values on the cells `[i/n, (i+1)/n)`.
    Table(Vec<f64>),
}

impl ScaleSpectrum {
    pub fn value(&self, z: f64) -> f64 {
        match self {
            ScaleSpectrum::Pieces(pieces) => pieces
                .iter()
                .find(|p| p.lo <= z && z < p.hi)
                .map_or(0.0, |p| p.expr.eval(z)),
            ScaleSpectrum::Table(v) => {
                if !(0.0..1.0).contains(&z) || v.is_empty() {
                    0.0
                } else {
                    v[((z * v.len() as f64) as usize).min(v.len() - 1)]
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            ScaleSpectrum::Pieces(p) => p.iter().all(|p| p.expr == Expr::Const(0.0)),
            ScaleSpectrum::Table(v) => v.iter().all(|&x| x == 0.0),
        }
    }

    fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            ScaleSpectrum::Pieces(pieces) => pieces
                .iter()
                .map(|p| {
                    let lo = p.lo.max(a);
                    let hi = p.hi.min(b);
                    if hi > lo { p.expr.integral(lo, hi) } else { 0.0 }
                })
                .sum(),
            ScaleSpectrum::Table(v) => {
                let n = v.len() as f64;
                v.iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        let lo = (i as f64 / n).max(a);
                        let hi = ((i + 1) as f64 / n).min(b);
                        if hi > lo { x * (hi - lo) } else { 0.0 }
                    })
                    .sum()
            }
        }
    }
}

/// Total variation together with whether it is exact or a grid lower bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalVariation {
    pub value: f64,
    pub exact: bool,
}

/// A declared evolutionary wavelet spectrum over the scales `-1..=-levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    scales: Vec<ScaleSpectrum>,
}

impl SpectrumSpec {
    /// Builds a spectrum from per-scale definitions, index `i` being scale
    /// `-(i + 1)`. Pieces are sorted and validated.
    pub fn new(scales: Vec<ScaleSpectrum>) -> Result<Self> {
        if scales.is_empty() || scales.len() > MAX_LEVEL as usize {
            return Err(domain(format!("a spectrum needs between 1 and {MAX_LEVEL} scales")));
        }
        let mut scales = scales;
        for (i, s) in scales.iter_mut().enumerate() {
            let j = -(i as i32) - 1;
            match s {
                ScaleSpectrum::Pieces(pieces) => {
                    pieces.sort_by(|a, b| a.lo.total_cmp(&b.lo));
                    for p in pieces.iter() {
                        if !(0.0 <= p.lo && p.lo < p.hi && p.hi <= 1.0) {
                            return Err(domain(format!("scale {j}: piece [{}, {}) is not inside [0, 1]", p.lo, p.hi)));
                        }
                        if !p.expr.is_nonnegative() {
                            return Err(domain(format!("scale {j}: piece [{}, {}) can be negative", p.lo, p.hi)));
                        }
                    }
                    if let Some(w) = pieces.windows(2).find(|w| w[1].lo < w[0].hi) {
                        return Err(domain(format!("scale {j}: pieces starting at {} and {} overlap", w[0].lo, w[1].lo)));
                    }
                }
                ScaleSpectrum::Table(v) => {
                    if v.is_empty() || v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                        return Err(domain(format!("scale {j}: table must be non-empty, finite and nonnegative")));
                    }
                }
            }
        }
        Ok(Self { scales })
    }

    /// The all-zero spectrum.
    pub fn zero(levels: usize) -> Self {
        Self::new(vec![ScaleSpectrum::Pieces(Vec::new()); levels.max(1)]).expect("valid")
    }

    /// Time-constant spectrum `S_j(z) = values[i]`.
    pub fn constant(values: &[f64]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|&c| ScaleSpectrum::Pieces(vec![Piece { lo: 0.0, hi: 1.0, expr: Expr::Const(c) }]))
                .collect(),
        )
    }

    /// White noise truncated at `levels` scales: `S_j = 2^j`.
    pub fn white_noise(levels: usize) -> Self {
        let v: Vec<f64> = Scale::finest(levels).map(|s| s.dyadic()).collect();
        Self::constant(&v).expect("valid")
    }

    /// The four-scale piecewise benchmark spectrum shipped as `benchmark.spec`:
    /// a plateau and a squared-sine bump at scale -1, nothing at -2, and
    /// squared-sine segments at -3 and -4.
    pub fn benchmark() -> Self {
        let sin2 = |omega: f64| Expr::Sin2 { amp: 1.0, omega, phase: -PI / 4.0, offset: 0.5 };
        Self::new(vec![
            ScaleSpectrum::Pieces(vec![
                Piece { lo: 0.25, hi: 0.575, expr: Expr::Const(1.0) },
                Piece { lo: 0.75, hi: 1.0, expr: sin2(2.0) },
            ]),
            ScaleSpectrum::Pieces(Vec::new()),
            ScaleSpectrum::Pieces(vec![Piece { lo: 0.0, hi: 0.25, expr: sin2(1.0) }]),
            ScaleSpectrum::Pieces(vec![Piece { lo: 0.375, hi: 1.0, expr: sin2(5.0) }]),
        ])
        .expect("valid")
    }

    pub fn levels(&self) -> usize {
        self.scales.len()
    }

    pub fn scale(&self, scale: Scale) -> Option<&ScaleSpectrum> {
        self.scales.get(scale.index())
    }

    /// `S_j(z)` for any `z`; zero outside the declared pieces and beyond the
    /// declared scales.
    pub fn value(&self, scale: Scale, z: f64) -> f64 {
        self.scale(scale).map_or(0.0, |s| s.value(z))
    }

    /// `S_j(z)` with `z` required to lie in `(0, 1)`.
    pub fn evaluate(&self, scale: Scale, z: f64) -> Result<f64> {
        if !(z > 0.0 && z < 1.0) {
            return Err(domain(format!("rescaled time {z} is outside (0, 1)")));
        }
        Ok(self.value(scale, z))
    }

    pub fn is_active(&self, scale: Scale) -> bool {
        self.scale(scale).is_some_and(|s| !s.is_zero())
    }

    /// Total variation of `S_j` over `(0, 1)`.
    pub fn total_variation(&self, scale: Scale) -> TotalVariation {
        match self.scale(scale) {
            None => TotalVariation { value: 0.0, exact: true },
            Some(ScaleSpectrum::Table(v)) => TotalVariation {
                value: v.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
                exact: false,
            },
            Some(ScaleSpectrum::Pieces(pieces)) => {
                let mut tv = 0.0;
                for (i, p) in pieces.iter().enumerate() {
                    tv += p.expr.variation(p.lo, p.hi);
                    if p.lo > 0.0 {
                        let left = match i.checked_sub(1).map(|k| pieces[k]) {
                            Some(q) if q.hi == p.lo => q.expr.eval(p.lo),
                            _ => 0.0,
                        };
                        tv += (p.expr.eval(p.lo) - left).abs();
                    }
                    let followed = pieces.get(i + 1).is_some_and(|q| q.lo == p.hi);
                    if p.hi < 1.0 && !followed {
                        tv += p.expr.eval(p.hi).abs();
                    }
                }
                TotalVariation { value: tv, exact: true }
            }
        }
    }

    /// `int_a^b S_j(z) dz`.
    pub fn integral(&self, scale: Scale, a: f64, b: f64) -> f64 {
        self.scale(scale).map_or(0.0, |s| s.integral(a, b))
    }

    /// Largest value of `S_j` on a uniform grid of `points` points.
    pub fn grid_sup(&self, scale: Scale, points: usize) -> f64 {
        (0..points)
            .map(|i| self.value(scale, (i as f64 + 0.5) / points as f64))
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for SpectrumSpec {
    /// Writes the spectrum in the text format read by [`crate::spec_file`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "levels = {}", self.levels())?;
        for (i, s) in self.scales.iter().enumerate() {
            write!(f, "scale = {}", -(i as i32) - 1)?;
            match s {
                ScaleSpectrum::Pieces(pieces) => {
                    for p in pieces {
                        write!(f, "; piece = [{}, {}), ", p.lo, p.hi)?;
                        match p.expr {
                            Expr::Const(c) => write!(f, "const {c}")?,
                            Expr::Sin2 { amp, omega, phase, offset } => {
                                write!(f, "sin2 amp={amp} omega={omega} phase={phase} offset={offset}")?
                            }
                        }
                    }
                }
                ScaleSpectrum::Table(v) => {
                    let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    write!(f, "; table = {}", items.join(", "))?;
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for SpectrumSpec {
    type Err = LswError;

    fn from_str(s: &str) -> Result<Self> {
        crate::spec_file::parse(s)
    }
}
