//! Clamped B-spline bases via the Cox-de Boor recursion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Clamped knot vector: the domain ends carry multiplicity `degree + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    pub degree: usize,
    pub domain: [f64; 2],
    pub interior: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, domain: [f64; 2], interior: Vec<f64>) -> Result<Self> {
        let kv = KnotVector {
            degree,
            domain,
            interior,
        };
        kv.validate()?;
        Ok(kv)
    }

    /// `n_interior` equally spaced interior knots over `[lo, hi]`.
    pub fn uniform(n_interior: usize, lo: f64, hi: f64, degree: usize) -> Result<Self> {
        let step = (hi - lo) / (n_interior + 1) as f64;
        let interior = (1..=n_interior).map(|i| lo + i as f64 * step).collect();
        Self::new(degree, [lo, hi], interior)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("bad knot domain [{lo}, {hi}]")));
        }
        let mut prev = lo;
        for &k in &self.interior {
            if !(k > prev) {
                return Err(Error::InvalidArgument("interior knots must be strictly increasing inside the domain".into()));
            }
            prev = k;
        }
        if !(hi > prev) {
            return Err(Error::InvalidArgument("interior knot on or beyond the upper bound".into()));
        }
        Ok(())
    }

    pub fn n_basis(&self) -> usize {
        self.interior.len() + self.degree + 1
    }

    /// Full knot sequence with repeated boundary knots.
    pub fn full(&self) -> Vec<f64> {
        let p = self.degree;
        let mut t = Vec::with_capacity(self.interior.len() + 2 * (p + 1));
        t.extend(std::iter::repeat_n(self.domain[0], p + 1));
        t.extend_from_slice(&self.interior);
        t.extend(std::iter::repeat_n(self.domain[1], p + 1));
        t
    }

    /// Greville abscissae: the average of the `degree` knots following each
    /// basis function's first knot. A spline whose coefficients are an affine
    /// function of these points is that same affine function.
    pub fn greville(&self) -> Vec<f64> {
        let t = self.full();
        let p = self.degree;
        (0..self.n_basis())
            .map(|k| {
                if p == 0 {
                    0.5 * (t[k] + t[k + 1])
                } else {
                    t[k + 1..=k + p].iter().sum::<f64>() / p as f64
                }
            })
            .collect()
    }

    /// Distinct breakpoints: domain ends plus interior knots.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.interior.len() + 2);
        b.push(self.domain[0]);
        b.extend_from_slice(&self.interior);
        b.push(self.domain[1]);
        b
    }

    pub fn check_domain(&self, x: f64) -> Result<()> {
        let [lo, hi] = self.domain;
        if x >= lo && x <= hi {
            Ok(())
        } else {
            Err(Error::OutOfDomain { x, lo, hi })
        }
    }
}

/// Index `mu` with `t[mu] <= x < t[mu + 1]`, clamped so the right end of the
/// domain falls in the last non-empty span.
pub(crate) fn find_span(t: &[f64], degree: usize, n_basis: usize, x: f64) -> usize {
    if x >= t[n_basis] {
        return n_basis - 1;
    }
    if x <= t[degree] {
        return degree;
    }
    // first index with t[i] > x, minus one
    t[degree..=n_basis].partition_point(|&k| k <= x) + degree - 1
}

/// Non-zero basis values at `x` for span `mu`: entries for B_{mu-p}..B_mu.
pub(crate) fn basis_funs(t: &[f64], degree: usize, mu: usize, x: f64) -> Vec<f64> {
    let p = degree;
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = x - t[mu + 1 - j];
        right[j] = t[mu + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Sparse basis row: index of the first non-zero function and its values.
pub fn basis_row(knots: &KnotVector, x: f64) -> Result<(usize, Vec<f64>)> {
    knots.check_domain(x)?;
    let t = knots.full();
    Ok(basis_row_unchecked(&t, knots.degree, knots.n_basis(), x))
}

pub(crate) fn basis_row_unchecked(t: &[f64], degree: usize, n_basis: usize, x: f64) -> (usize, Vec<f64>) {
    let mu = find_span(t, degree, n_basis, x);
    (mu - degree, basis_funs(t, degree, mu, x))
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl BasisMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// B_k(x_r) for every sample position and basis function.
pub fn basis_matrix(x: &[f64], knots: &KnotVector) -> Result<BasisMatrix> {
    let t = knots.full();
    let nb = knots.n_basis();
    let mut data = vec![0.0; x.len() * nb];
    for (r, &xr) in x.iter().enumerate() {
        knots.check_domain(xr)?;
        let (start, vals) = basis_row_unchecked(&t, knots.degree, nb, xr);
        data[r * nb + start..r * nb + start + vals.len()].copy_from_slice(&vals);
    }
    Ok(BasisMatrix {
        rows: x.len(),
        cols: nb,
        data,
    })
}

/// Evaluates a B-spline with full knot sequence `t` at `x`.
pub(crate) fn eval_bspline(t: &[f64], degree: usize, coefs: &[f64], x: f64) -> f64 {
    let (start, vals) = basis_row_unchecked(t, degree, coefs.len(), x);
    vals.iter().zip(&coefs[start..]).map(|(b, c)| b * c).sum()
}

/// Knots and coefficients of the derivative spline (one degree lower).
pub(crate) fn derivative(t: &[f64], degree: usize, coefs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let p = degree as f64;
    let d = (0..coefs.len() - 1)
        .map(|k| {
            let span = t[k + degree + 1] - t[k + 1];
            if span == 0.0 {
                0.0
            } else {
                p * (coefs[k + 1] - coefs[k]) / span
            }
        })
        .collect();
    (t[1..t.len() - 1].to_vec(), d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Textbook Cox-de Boor recursion on the full knot sequence, used as an
    /// independent check of the triangular evaluation.
    fn naive(t: &[f64], k: usize, p: usize, x: f64, last: usize) -> f64 {
        if p == 0 {
            let inside = t[k] <= x && x < t[k + 1];
            // right end of the domain belongs to the last non-empty span
            let at_end = x == t[t.len() - 1] && k == last;
            return if inside || at_end { 1.0 } else { 0.0 };
        }
        let mut v = 0.0;
        let d1 = t[k + p] - t[k];
        if d1 > 0.0 {
            v += (x - t[k]) / d1 * naive(t, k, p - 1, x, last);
        }
        let d2 = t[k + p + 1] - t[k + 1];
        if d2 > 0.0 {
            v += (t[k + p + 1] - x) / d2 * naive(t, k + 1, p - 1, x, last);
        }
        v
    }

    #[test]
    fn five_interior_knots_give_nine_columns() {
        let kv = KnotVector::uniform(5, 0.0, 1.0, 3).unwrap();
        assert_eq!(kv.n_basis(), 9);
        assert_eq!(basis_matrix(&[0.3], &kv).unwrap().cols, 9);
    }

    #[test]
    fn left_end_row_is_unit() {
        let kv = KnotVector::uniform(5, 0.0, 1.0, 3).unwrap();
        let m = basis_matrix(&[0.0, 1.0], &kv).unwrap();
        assert_eq!(m.row(0)[0], 1.0);
        assert!(m.row(0)[1..].iter().all(|&v| v == 0.0));
        assert_eq!(m.row(1)[8], 1.0);
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let kv = KnotVector::uniform(3, 0.0, 1.0, 3).unwrap();
        assert!(matches!(basis_matrix(&[1.0 + 1e-9], &kv), Err(Error::OutOfDomain { .. })));
        assert!(matches!(basis_matrix(&[-0.1], &kv), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn matches_naive_recursion() {
        let kv = KnotVector::new(3, [0.0, 2.0], vec![0.1, 0.5, 0.55, 1.3]).unwrap();
        let t = kv.full();
        let nb = kv.n_basis();
        for i in 0..=400 {
            let x = 2.0 * i as f64 / 400.0;
            let m = basis_matrix(&[x], &kv).unwrap();
            for k in 0..nb {
                let want = naive(&t, k, 3, x, nb - 1);
                assert!((m.get(0, k) - want).abs() < 1e-13, "x={x} k={k}");
            }
        }
    }

    #[test]
    fn invalid_knots_rejected() {
        assert!(KnotVector::new(3, [0.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(KnotVector::new(3, [0.0, 1.0], vec![1.0]).is_err());
        assert!(KnotVector::new(3, [1.0, 0.0], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn partition_of_unity_and_local_support(x in 0.0f64..=1.0, n in 1usize..60) {
            let kv = KnotVector::uniform(n, 0.0, 1.0, 3).unwrap();
            let m = basis_matrix(&[x], &kv).unwrap();
            let row = m.row(0);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!(row.iter().filter(|&&v| v != 0.0).count() <= 4);
        }
    }
}
