//! Symmetric banded matrices stored by diagonals.

use nalgebra::DMatrix;

/// Symmetric `n x n` matrix with `M_{st} = 0` for `|s - t| > bandwidth`.
///
/// Diagonal `u` holds `M_{s, s+u}` for `s in 0..n-u`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSym {
    n: usize,
    diags: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bw = bandwidth.min(n.saturating_sub(1));
        Self { n, diags: (0..=bw).map(|u| vec![0.0; n - u]).collect() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.diags.len() - 1
    }

    pub fn diag(&self, u: usize) -> &[f64] {
        &self.diags[u]
    }

    pub fn diag_mut(&mut self, u: usize) -> &mut [f64] {
        &mut self.diags[u]
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        self.diags.get(b - a).map_or(0.0, |d| d[a])
    }

    pub fn set(&mut self, s: usize, t: usize, v: f64) {
        let (a, b) = if s <= t { (s, t) } else { (t, s) };
        self.diags[b - a][a] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |s, t| self.get(s, t))
    }

    /// Row-wise prefix sums: `out[s][i] = sum_{t = s - bw}^{s - bw + i - 1} M_{st}`
    /// with out-of-range columns contributing zero.
    pub fn row_prefix(&self) -> RowPrefix {
        let bw = self.bandwidth();
        let w = 2 * bw + 2;
        let mut data = vec![0.0; self.n * w];
        for s in 0..self.n {
            let row = &mut data[s * w..(s + 1) * w];
            let mut acc = 0.0;
            for i in 0..=2 * bw {
                let t = s as i64 - bw as i64 + i as i64;
                if t >= 0 && (t as usize) < self.n {
                    acc += self.get(s, t as usize);
                }
                row[i + 1] = acc;
            }
        }
        RowPrefix { n: self.n, bw, data }
    }
}

/// Constant-time row range sums of a [`BandedSym`].
pub struct RowPrefix {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl RowPrefix {
    /// `sum_{t = a}^{b - 1} M_{st}` for any `a <= b`.
    pub fn range_sum(&self, s: usize, a: i64, b: i64) -> f64 {
        let base = s as i64 - self.bw as i64;
        let lo = (a - base).clamp(0, 2 * self.bw as i64 + 1) as usize;
        let hi = (b - base).clamp(0, 2 * self.bw as i64 + 1) as usize;
        if hi <= lo {
            return 0.0;
        }
        let w = 2 * self.bw + 2;
        let row = &self.data[s * w..(s + 1) * w];
        row[hi] - row[lo]
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn get_is_symmetric_and_zero_off_band() {
        let mut m = BandedSym::zeros(6, 2);
        m.set(1, 3, 4.0);
        m.set(2, 2, 1.5);
        assert_eq!(m.get(3, 1), 4.0);
        assert_eq!(m.get(2, 2), 1.5);
        assert_eq!(m.get(0, 5), 0.0);
        let d = m.to_dense();
        assert_eq!(d, d.transpose());
    }

    #[test]
    fn bandwidth_is_clipped_to_size() {
        assert_eq!(BandedSym::zeros(3, 10).bandwidth(), 2);
    }

    #[test]
    fn row_prefix_matches_dense_sums() {
        let n = 9;
        let mut m = BandedSym::zeros(n, 3);
        for u in 0..=3 {
            for (s, v) in m.diag_mut(u).iter_mut().enumerate() {
                *v = (s * 7 + u * 3) as f64 * 0.1 - 1.0;
            }
        }
        let p = m.row_prefix();
        let d = m.to_dense();
        for s in 0..n {
            for a in -3i64..12 {
                for b in a..13 {
                    let want: f64 = (a.max(0)..b.min(n as i64)).map(|t| d[(s, t as usize)]).sum();
                    assert!((p.range_sum(s, a, b) - want).abs() < 1e-12);
                }
            }
        }
    }
}
