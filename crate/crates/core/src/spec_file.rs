//! Plain-text spectrum files.
//!
//! One line per scale, statements separated by `;`:
//!
//! ```text
//! # comment
//! levels = 4
//! scale = -1; piece = [0.25, 0.575), const 1.0; piece = [0.75, 1.0), sin2 amp=1.0 omega=2 phase=-0.25pi offset=0.5
//! scale = -2
//! scale = -3; table = 0.1, 0.2, 0.4
//! ```
//!
//! `levels` is optional and defaults to the deepest declared scale. A `sin2`
//! piece evaluates `amp * sin^2(omega * pi * z + phase) + offset`; `phase`
//! accepts a trailing `pi`. Undeclared scales are inactive.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{LswError, Result};
use crate::spectrum::{Expr, Piece, ScaleSpectrum, SpectrumSpec};
use crate::wavelet::MAX_LEVEL;

struct Cursor<'a> {
    line: usize,
    col: usize,
    text: &'a str,
}

impl Cursor<'_> {
    fn err(&self, offset: usize, msg: impl Into<String>) -> LswError {
        LswError::Parse { line: self.line, column: self.col + offset, message: msg.into() }
    }
}

pub fn parse(src: &str) -> Result<SpectrumSpec> {
    let mut levels: Option<(usize, usize)> = None;
    let mut scales: BTreeMap<usize, ScaleSpectrum> = BTreeMap::new();

    for (lineno, raw) in src.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            continue;
        }
        let mut stmts = Vec::new();
        let mut start = 0;
        for part in line.split(';') {
            stmts.push(Cursor { line: lineno + 1, col: start + 1, text: part });
            start += part.len() + 1;
        }

        let (key, value, vcol) = split_kv(&stmts[0])?;
        match key {
            "levels" => {
                if stmts.len() > 1 {
                    return Err(stmts[1].err(0, "unexpected statement after `levels`"));
                }
                let n = parse_usize(&stmts[0], value, vcol)?;
                if n == 0 || n > MAX_LEVEL as usize {
                    return Err(stmts[0].err(vcol, format!("levels must lie in 1..={MAX_LEVEL}")));
                }
                levels = Some((n, lineno + 1));
            }
            "scale" => {
                let j: i64 = value.trim().parse().map_err(|_| stmts[0].err(vcol, format!("invalid scale `{}`", value.trim())))?;
                if j >= 0 || j < -(MAX_LEVEL as i64) {
                    return Err(stmts[0].err(vcol, format!("scale must lie in -{MAX_LEVEL}..=-1")));
                }
                let idx = (-j - 1) as usize;
                let mut pieces = Vec::new();
                let mut table = None;
                for st in &stmts[1..] {
                    let (k, v, c) = split_kv(st)?;
                    match k {
                        "piece" => pieces.push(parse_piece(st, v, c)?),
                        "table" => table = Some(parse_table(st, v, c)?),
                        other => return Err(st.err(0, format!("unknown key `{other}`"))),
                    }
                }
                let spec = match (table, pieces.is_empty()) {
                    (Some(_), false) => return Err(stmts[0].err(0, "a scale takes either pieces or a table")),
                    (Some(t), true) => ScaleSpectrum::Table(t),
                    (None, _) => ScaleSpectrum::Pieces(pieces),
                };
                if scales.insert(idx, spec).is_some() {
                    return Err(stmts[0].err(0, format!("scale {j} declared twice")));
                }
            }
            other => return Err(stmts[0].err(0, format!("unknown key `{other}`"))),
        }
    }

    let deepest = scales.keys().next_back().map_or(0, |i| i + 1);
    let n = match levels {
        Some((n, line)) if n < deepest => {
            return Err(LswError::Parse { line, column: 1, message: format!("levels = {n} but scale -{deepest} is declared") })
        }
        Some((n, _)) => n,
        None if deepest == 0 => {
            return Err(LswError::Parse { line: 1, column: 1, message: "no scales declared".into() })
        }
        None => deepest,
    };
    let mut per_scale = vec![ScaleSpectrum::Pieces(Vec::new()); n];
    for (i, s) in scales {
        per_scale[i] = s;
    }
    SpectrumSpec::new(per_scale).map_err(|e| LswError::Parse { line: 0, column: 0, message: e.to_string() })
}

pub fn read(path: &Path) -> Result<SpectrumSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| LswError::Parse { line: 0, column: 0, message: format!("{}: {e}", path.display()) })?;
    parse(&text)
}

/// `key = value`, returning the value and its column offset within the
/// statement.
fn split_kv<'a>(st: &Cursor<'a>) -> Result<(&'a str, &'a str, usize)> {
    let eq = st.text.find('=').ok_or_else(|| st.err(0, "expected `key = value`"))?;
    let key = st.text[..eq].trim();
    Ok((key, &st.text[eq + 1..], eq + 1))
}

fn parse_usize(st: &Cursor, v: &str, col: usize) -> Result<usize> {
    v.trim().parse().map_err(|_| st.err(col, format!("invalid integer `{}`", v.trim())))
}

fn parse_f64(st: &Cursor, v: &str, col: usize) -> Result<f64> {
    let t = v.trim();
    let x: f64 = t.parse().map_err(|_| st.err(col, format!("invalid number `{t}`")))?;
    if !x.is_finite() {
        return Err(st.err(col, format!("non-finite number `{t}`")));
    }
    Ok(x)
}

/// A number with an optional trailing `pi`, e.g. `-0.25pi`.
fn parse_angle(st: &Cursor, v: &str, col: usize) -> Result<f64> {
    let t = v.trim();
    match t.strip_suffix("pi") {
        Some("") => Ok(PI),
        Some("-") => Ok(-PI),
        Some(num) => Ok(parse_f64(st, num.trim_end_matches('*'), col)? * PI),
        None => parse_f64(st, t, col),
    }
}

fn parse_piece(st: &Cursor, v: &str, col: usize) -> Result<Piece> {
    let open = v.find('[').ok_or_else(|| st.err(col, "expected `[a, b)`"))?;
    let close = v.find(')').ok_or_else(|| st.err(col + open, "expected half-open interval `[a, b)`"))?;
    let inner = &v[open + 1..close];
    let comma = inner.find(',').ok_or_else(|| st.err(col + open, "expected `[a, b)`"))?;
    let lo = parse_f64(st, &inner[..comma], col + open + 1)?;
    let hi = parse_f64(st, &inner[comma + 1..], col + open + comma + 2)?;
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(st.err(col + open, format!("interval [{lo}, {hi}) must satisfy 0 <= a < b <= 1")));
    }

    let rest = &v[close + 1..];
    let rcol = col + close + 1;
    let rest = rest.trim_start().strip_prefix(',').ok_or_else(|| st.err(rcol, "expected `,` after the interval"))?;
    let mut words = rest.split_whitespace();
    let kind = words.next().ok_or_else(|| st.err(rcol, "missing expression"))?;
    let expr = match kind {
        "const" => {
            let c = words.next().ok_or_else(|| st.err(rcol, "`const` needs a value"))?;
            let c = parse_f64(st, c, rcol)?;
            if c < 0.0 {
                return Err(st.err(rcol, "spectrum values must be nonnegative"));
            }
            Expr::Const(c)
        }
        "sin2" => {
            let (mut amp, mut omega, mut phase, mut offset) = (1.0, 1.0, 0.0, 0.0);
            for w in words.by_ref() {
                let (k, val) = w.split_once('=').ok_or_else(|| st.err(rcol, format!("expected `key=value`, got `{w}`")))?;
                match k {
                    "amp" => amp = parse_f64(st, val, rcol)?,
                    "omega" => omega = parse_f64(st, val, rcol)?,
                    "phase" => phase = parse_angle(st, val, rcol)?,
                    "offset" => offset = parse_f64(st, val, rcol)?,
                    _ => return Err(st.err(rcol, format!("unknown sin2 parameter `{k}`"))),
                }
            }
            if amp < 0.0 || offset < 0.0 {
                return Err(st.err(rcol, "sin2 needs amp >= 0 and offset >= 0"));
            }
            Expr::Sin2 { amp, omega, phase, offset }
        }
        other => return Err(st.err(rcol, format!("unknown expression `{other}`"))),
    };
    if let Some(extra) = words.next() {
        return Err(st.err(rcol, format!("unexpected `{extra}`")));
    }
    Ok(Piece { lo, hi, expr })
}

fn parse_table(st: &Cursor, v: &str, col: usize) -> Result<Vec<f64>> {
    let vals = v
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(st, s, col))
        .collect::<Result<Vec<_>>>()?;
    if vals.is_empty() {
        return Err(st.err(col, "empty table"));
    }
    if vals.iter().any(|&x| x < 0.0) {
        return Err(st.err(col, "spectrum values must be nonnegative"));
    }
    Ok(vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavelet::Scale;
    use proptest::prelude::*;

    const BENCHMARK: &str = include_str!("../specs/benchmark.spec");

    #[test]
    fn shipped_benchmark_file_matches_builtin() {
        let parsed = parse(BENCHMARK).unwrap();
        let builtin = SpectrumSpec::benchmark();
        assert_eq!(parsed.levels(), 4);
        for s in Scale::finest(4) {
            for i in 0..2000 {
                let z = i as f64 / 2000.0;
                assert!((parsed.value(s, z) - builtin.value(s, z)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn example_line_parses() {
        let spec = parse(
            "scale = -1; piece = [0.25, 0.575), const 1.0; piece = [0.75, 1.0), sin2 amp=1.0 omega=2 phase=-0.25pi offset=0.5",
        )
        .unwrap();
        let s1 = Scale::new(-1).unwrap();
        assert_eq!(spec.value(s1, 0.3), 1.0);
        let z: f64 = 0.8;
        let expect = (2.0 * PI * z - PI / 4.0).sin().powi(2) + 0.5;
        assert!((spec.value(s1, z) - expect).abs() < 1e-15);
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse("levels = 2\nscale = -1; piece = [0.2, 0.1), const 1").unwrap_err();
        match err {
            LswError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 10, "column {column}");
            }
            e => panic!("unexpected {e}"),
        }
        assert!(matches!(parse("scale = -1; piece = [0.2, 0.5), cosine 1"), Err(LswError::Parse { line: 1, .. })));
        assert!(parse("scale = 1").is_err());
        assert!(parse("scale = -1\nscale = -1").is_err());
        assert!(parse("levels = 1\nscale = -2").is_err());
        assert!(parse("# nothing").is_err());
        assert!(parse("scale = -1; piece = [0.0, 0.5), const 1; piece = [0.4, 0.9), const 1").is_err());
    }

    #[test]
    fn tables_and_levels() {
        let spec = parse("levels = 5\nscale = -2; table = 0.5, 1.5 2.5").unwrap();
        assert_eq!(spec.levels(), 5);
        assert_eq!(spec.value(Scale::new(-2).unwrap(), 0.5), 1.5);
        assert!(!spec.is_active(Scale::new(-1).unwrap()));
    }

    fn arb_expr() -> impl Strategy<Value = Expr> {
        prop_oneof![
            (0.0..5.0f64).prop_map(Expr::Const),
            (0.0..3.0f64, -6.0..6.0f64, -4.0..4.0f64, 0.0..2.0f64)
                .prop_map(|(amp, omega, phase, offset)| Expr::Sin2 { amp, omega, phase, offset }),
        ]
    }

    fn arb_scale() -> impl Strategy<Value = ScaleSpectrum> {
        prop_oneof![
            prop::collection::vec((0.0..1.0f64, arb_expr()), 0..4).prop_map(|cuts| {
                let mut bounds: Vec<f64> = cuts.iter().map(|c| c.0).collect();
                bounds.push(1.0);
                bounds.sort_by(f64::total_cmp);
                bounds.dedup();
                let pieces = bounds
                    .windows(2)
                    .zip(cuts.iter().map(|c| c.1))
                    .map(|(w, expr)| Piece { lo: w[0], hi: w[1], expr })
                    .collect();
                ScaleSpectrum::Pieces(pieces)
            }),
            prop::collection::vec(0.0..4.0f64, 1..20).prop_map(ScaleSpectrum::Table),
        ]
    }

    proptest! {
        #[test]
        fn display_then_parse_is_identity(scales in prop::collection::vec(arb_scale(), 1..6)) {
            let spec = SpectrumSpec::new(scales).unwrap();
            let text = spec.to_string();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
