//! Penalized least squares on a B-spline basis.

use serde::{Deserialize, Serialize};

use super::basis::{basis_row_unchecked, eval_bspline, KnotVector};
use crate::error::{Error, Result};
use crate::linalg::{BandedCholesky, BandedSpd};
use crate::oracle::{uniform_grid, ForceProfile};

/// Cubic splines throughout.
pub const DEGREE: usize = 3;
/// Default difference order of the roughness penalty.
pub const PENALTY_ORDER: usize = 2;
/// Relative diagonal jitter tried once before giving up on a factorization.
pub const JITTER: f64 = 1e-12;

fn default_penalty_order() -> usize {
    PENALTY_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    pub knots: KnotVector,
    pub lambda: f64,
    pub beta: Vec<f64>,
    #[serde(default = "default_penalty_order")]
    pub penalty_order: usize,
}

impl SplineModel {
    pub fn eval(&self, x: f64) -> Result<f64> {
        self.knots.check_domain(x)?;
        Ok(eval_bspline(&self.knots.full(), self.knots.degree, &self.beta, x))
    }

    pub fn eval_many(&self, xs: &[f64]) -> Result<Vec<f64>> {
        let t = self.knots.full();
        xs.iter()
            .map(|&x| {
                self.knots.check_domain(x)?;
                Ok(eval_bspline(&t, self.knots.degree, &self.beta, x))
            })
            .collect()
    }

    /// Evaluates on `n_points` uniform positions across the knot domain.
    pub fn sample(&self, run_id: &str, n_points: usize) -> Result<ForceProfile> {
        let [lo, hi] = self.knots.domain;
        let xs: Vec<f64> = uniform_grid(n_points).iter().map(|u| lo + u * (hi - lo)).collect();
        let force = self.eval_many(&xs)?;
        Ok(ForceProfile {
            run_id: run_id.to_string(),
            displacement: xs,
            force,
        })
    }

    /// Squared norm of the scaled coefficient differences.
    pub fn roughness(&self) -> f64 {
        differences(&self.beta, &self.knots, self.penalty_order)
            .iter()
            .map(|d| d * d)
            .sum()
    }
}

/// Rows of the difference operator D. Row `r` holds the weights applied to
/// coefficients `r..=r+order`.
///
/// Differences are divided by the spacing of the Greville abscissae and
/// rescaled by the mean knot spacing, so on uniform interior knots the rows
/// are the usual binomial stencils while near the clamped ends the operator
/// still annihilates every straight line.
pub fn difference_operator(knots: &KnotVector, order: usize) -> Vec<Vec<f64>> {
    let g = knots.greville();
    let n = g.len();
    let [lo, hi] = knots.domain;
    let h = (hi - lo) / (knots.interior.len() + 1) as f64;
    let mut rows: Vec<Vec<f64>> = (0..n).map(|_| vec![1.0]).collect();
    for j in 1..=order {
        if rows.len() < 2 {
            return Vec::new();
        }
        rows = (0..rows.len() - 1)
            .map(|k| {
                let s = j as f64 * h / (g[k + j] - g[k]);
                let mut row = vec![0.0; j + 1];
                for (a, &w) in rows[k].iter().enumerate() {
                    row[a] -= s * w;
                }
                for (a, &w) in rows[k + 1].iter().enumerate() {
                    row[a + 1] += s * w;
                }
                row
            })
            .collect();
    }
    rows
}

/// D beta for the operator of [`difference_operator`].
pub fn differences(beta: &[f64], knots: &KnotVector, order: usize) -> Vec<f64> {
    difference_operator(knots, order)
        .iter()
        .enumerate()
        .map(|(r, row)| row.iter().zip(&beta[r..]).map(|(w, b)| w * b).sum())
        .collect()
}

/// D^T D for the `order`-th difference operator on the basis of `knots`.
pub fn penalty_matrix(knots: &KnotVector, order: usize) -> BandedSpd {
    let mut p = BandedSpd::zeros(knots.n_basis(), order);
    for (r, row) in difference_operator(knots, order).iter().enumerate() {
        for a in 0..row.len() {
            for b in 0..=a {
                p.add(r + a, r + b, row[a] * row[b]);
            }
        }
    }
    p
}

/// Normal equations B^T B and B^T y of a fixed design.
#[derive(Debug, Clone)]
pub(crate) struct Gram {
    pub btb: BandedSpd,
    pub bty: Vec<f64>,
    pub n_samples: usize,
}

pub(crate) fn gram(x: &[f64], y: &[f64], knots: &KnotVector) -> Result<Gram> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let t = knots.full();
    let nb = knots.n_basis();
    let p = knots.degree;
    let mut btb = BandedSpd::zeros(nb, p.max(PENALTY_ORDER));
    let mut bty = vec![0.0; nb];
    for (&xr, &yr) in x.iter().zip(y) {
        knots.check_domain(xr)?;
        let (start, vals) = basis_row_unchecked(&t, p, nb, xr);
        for (a, &va) in vals.iter().enumerate() {
            bty[start + a] += va * yr;
            for (b, &vb) in vals.iter().enumerate().take(a + 1) {
                btb.add(start + a, start + b, va * vb);
            }
        }
    }
    Ok(Gram {
        btb,
        bty,
        n_samples: x.len(),
    })
}

fn system(g: &Gram, knots: &KnotVector, lambda: f64, order: usize) -> BandedSpd {
    let nb = g.btb.dim();
    let pen = penalty_matrix(knots, order);
    let bw = g.btb.bandwidth().max(order);
    let mut a = BandedSpd::zeros(nb, bw);
    for i in 0..nb {
        for j in i.saturating_sub(bw)..=i {
            let v = g.btb.get(i, j) + lambda * pen.get(i, j);
            if v != 0.0 {
                a.add(i, j, v);
            }
        }
    }
    a
}

/// Factorizes, retrying once with `JITTER * trace` on the diagonal.
fn factor(mut a: BandedSpd) -> Result<BandedCholesky> {
    if let Some(c) = a.cholesky() {
        return Ok(c);
    }
    let jitter = JITTER * a.trace();
    a.add_diagonal(jitter);
    a.cholesky().ok_or(Error::SingularSystem)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("lambda must be finite and non-negative, got {lambda}")))
    }
}

/// Penalized fit of arbitrary samples against a given knot vector.
pub fn fit_xy(x: &[f64], y: &[f64], knots: &KnotVector, lambda: f64, penalty_order: usize) -> Result<SplineModel> {
    check_lambda(lambda)?;
    let g = gram(x, y, knots)?;
    let chol = factor(system(&g, knots, lambda, penalty_order))?;
    Ok(SplineModel {
        knots: knots.clone(),
        lambda,
        beta: chol.solve(&g.bty),
        penalty_order,
    })
}

/// Knots used for a profile: `n_interior` uniform interior knots over the
/// profile's displacement range.
pub fn profile_knots(y: &ForceProfile, n_interior: usize) -> Result<KnotVector> {
    if n_interior < 1 {
        return Err(Error::InvalidArgument("at least one interior knot is required".into()));
    }
    let (lo, hi) = match (y.displacement.first(), y.displacement.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(Error::InvalidArgument("empty profile".into())),
    };
    KnotVector::uniform(n_interior, lo, hi, DEGREE)
}

/// Fits a cubic P-spline with a second-order difference penalty of weight
/// `lambda` to a force profile.
pub fn fit(y: &ForceProfile, n_interior_knots: usize, lambda: f64) -> Result<SplineModel> {
    let knots = profile_knots(y, n_interior_knots)?;
    fit_xy(&y.displacement, &y.force, &knots, lambda, PENALTY_ORDER)
}

/// Generalized cross-validation score and its ingredients for one lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvScore {
    pub lambda: f64,
    pub rss: f64,
    pub edf: f64,
    pub gcv: f64,
}

fn gcv_with(g: &Gram, x: &[f64], y: &[f64], knots: &KnotVector, lambda: f64) -> Result<GcvScore> {
    check_lambda(lambda)?;
    let nb = knots.n_basis();
    let chol = factor(system(g, knots, lambda, PENALTY_ORDER))?;
    let beta = chol.solve(&g.bty);
    let t = knots.full();
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xr, &yr)| {
            let r = yr - eval_bspline(&t, knots.degree, &beta, xr);
            r * r
        })
        .sum();
    // tr(H) = tr((B^T B + lambda P)^-1 B^T B)
    let mut edf = 0.0;
    let mut col = vec![0.0; nb];
    for j in 0..nb {
        for (i, c) in col.iter_mut().enumerate() {
            *c = g.btb.get(i, j);
        }
        edf += chol.solve(&col)[j];
    }
    let n = g.n_samples as f64;
    let denom = n - edf;
    let gcv = if denom > 0.0 {
        n * rss / (denom * denom)
    } else {
        f64::INFINITY
    };
    Ok(GcvScore { lambda, rss, edf, gcv })
}

/// GCV(lambda) = n RSS / (n - tr H)^2 over a grid.
pub fn gcv_scores(y: &ForceProfile, n_interior_knots: usize, grid: &[f64]) -> Result<Vec<GcvScore>> {
    let knots = profile_knots(y, n_interior_knots)?;
    let g = gram(&y.displacement, &y.force, &knots)?;
    grid.iter()
        .map(|&lam| gcv_with(&g, &y.displacement, &y.force, &knots, lam))
        .collect()
}

/// Grid value minimizing GCV; ties go to the larger lambda.
pub fn select_lambda(y: &ForceProfile, n_interior_knots: usize, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let scores = gcv_scores(y, n_interior_knots, grid)?;
    let best = scores
        .iter()
        .fold(None::<GcvScore>, |best, s| match best {
            Some(b) if s.gcv > b.gcv || (s.gcv == b.gcv && s.lambda <= b.lambda) => Some(b),
            _ => Some(*s),
        })
        .expect("non-empty grid");
    Ok(best.lambda)
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
/// Grid searched when lambda is chosen by GCV: 17 values, 1e-4 to 1e4.
pub fn default_lambda_grid() -> Vec<f64> {
    log_grid(1e-4, 1e4, 17)
}

/// One lambda for a set of profiles sharing a knot layout: the grid value
/// minimizing the sum of per-profile GCV scores (ties to the larger lambda).
pub fn select_lambda_pooled(profiles: &[ForceProfile], n_interior_knots: usize, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if profiles.is_empty() {
        return Err(Error::InvalidArgument("no profiles given".into()));
    }
    let mut total = vec![0.0; grid.len()];
    for y in profiles {
        for (t, s) in total.iter_mut().zip(gcv_scores(y, n_interior_knots, grid)?) {
            *t += s.gcv;
        }
    }
    let mut best = 0;
    for i in 1..grid.len() {
        let better = total[i] < total[best] || (total[i] == total[best] && grid[i] > grid[best]);
        if better {
            best = i;
        }
    }
    Ok(grid[best])
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}
