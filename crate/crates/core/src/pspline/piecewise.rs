//! Export of a cubic spline to per-interval polynomial coefficients,
//! p_i(x) = a_i (x - x_i)^3 + b_i (x - x_i)^2 + c_i (x - x_i) + d_i.

use serde::{Deserialize, Serialize};

use super::basis::{derivative, eval_bspline};
use super::fit::SplineModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCubic {
    pub breakpoints: Vec<f64>,
    /// `[a, b, c, d]` per interval.
    pub coeffs: Vec<[f64; 4]>,
}

impl PiecewiseCubic {
    pub fn n_pieces(&self) -> usize {
        self.coeffs.len()
    }

    /// Interval index for `x`: half-open `[x_i, x_{i+1})`, last one closed.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let (lo, hi) = (self.breakpoints[0], self.breakpoints[self.breakpoints.len() - 1]);
        if !(x >= lo && x <= hi) {
            return Err(Error::OutOfDomain { x, lo, hi });
        }
        let i = self.breakpoints.partition_point(|&b| b <= x);
        Ok(i.saturating_sub(1).min(self.coeffs.len() - 1))
    }

    /// Value of piece `i` at `x` by Horner's rule (no domain check).
    pub fn eval_piece(&self, i: usize, x: f64) -> f64 {
        let [a, b, c, d] = self.coeffs[i];
        let h = x - self.breakpoints[i];
        ((a * h + b) * h + c) * h + d
    }

    /// First and second derivative of piece `i` at `x`.
    pub fn eval_piece_derivs(&self, i: usize, x: f64) -> (f64, f64) {
        let [a, b, c, _] = self.coeffs[i];
        let h = x - self.breakpoints[i];
        ((3.0 * a * h + 2.0 * b) * h + c, 6.0 * a * h + 2.0 * b)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let i = self.locate(x)?;
        Ok(self.eval_piece(i, x))
    }

    /// Largest mismatch in value, slope and curvature between neighbouring
    /// pieces at the interior breakpoints.
    pub fn continuity_gaps(&self) -> [f64; 3] {
        let mut gaps = [0.0f64; 3];
        for i in 0..self.coeffs.len().saturating_sub(1) {
            let x = self.breakpoints[i + 1];
            let (d1l, d2l) = self.eval_piece_derivs(i, x);
            let (d1r, d2r) = self.eval_piece_derivs(i + 1, x);
            gaps[0] = gaps[0].max((self.eval_piece(i, x) - self.eval_piece(i + 1, x)).abs());
            gaps[1] = gaps[1].max((d1l - d1r).abs());
            gaps[2] = gaps[2].max((d2l - d2r).abs());
        }
        gaps
    }
}

/// Converts a cubic B-spline into its piecewise polynomial form, taking
/// value and derivatives at the left end of every knot interval.
pub fn to_piecewise(model: &SplineModel) -> Result<PiecewiseCubic> {
    if model.knots.degree != 3 {
        return Err(Error::InvalidArgument(format!(
            "piecewise export needs a cubic spline, got degree {}",
            model.knots.degree
        )));
    }
    let t0 = model.knots.full();
    let (t1, c1) = derivative(&t0, 3, &model.beta);
    let (t2, c2) = derivative(&t1, 2, &c1);
    let (t3, c3) = derivative(&t2, 1, &c2);
    let breakpoints = model.knots.breakpoints();
    let coeffs = breakpoints[..breakpoints.len() - 1]
        .iter()
        .map(|&x| {
            let d = eval_bspline(&t0, 3, &model.beta, x);
            let c = eval_bspline(&t1, 2, &c1, x);
            let b = eval_bspline(&t2, 1, &c2, x) / 2.0;
            let a = eval_bspline(&t3, 0, &c3, x) / 6.0;
            [a, b, c, d]
        })
        .collect();
    Ok(PiecewiseCubic { breakpoints, coeffs })
}

/// Evaluates the exported formula at `x`.
pub fn eval_piecewise(pw: &PiecewiseCubic, x: f64) -> Result<f64> {
    pw.eval(x)
}
