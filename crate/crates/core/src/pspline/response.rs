//! Main-effects regression of spline coefficients on coded factor levels:
//! beta_k(z) = beta0_k + sum_j z_j e_jk, fitted independently per basis index.

use serde::{Deserialize, Serialize};

use super::basis::KnotVector;
use super::fit::SplineModel;
use crate::doe::CodedRun;
use crate::error::{Error, Result};
use crate::linalg::{column_rank, dense_cholesky, dense_cholesky_solve};
use crate::oracle::ForceProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffResponseModel {
    pub knots: KnotVector,
    pub beta0: Vec<f64>,
    /// One coefficient vector per coded factor.
    pub effects: Vec<Vec<f64>>,
    pub factor_names: Vec<String>,
    #[serde(default)]
    pub lambda: f64,
}

impl CoeffResponseModel {
    pub fn n_factors(&self) -> usize {
        self.effects.len()
    }

    fn check_levels(&self, run: &CodedRun) -> Result<()> {
        if run.z.len() != self.n_factors() {
            return Err(Error::LengthMismatch {
                left: run.z.len(),
                right: self.n_factors(),
            });
        }
        if let Some((j, &v)) = run.z.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
            return Err(Error::ExtrapolationRefused { factor: j, value: v });
        }
        Ok(())
    }

    /// Spline predicted for a coded run inside the design cube.
    pub fn predict_spline(&self, run: &CodedRun) -> Result<SplineModel> {
        self.check_levels(run)?;
        let mut beta = self.beta0.clone();
        for (e, &z) in self.effects.iter().zip(&run.z) {
            beta.iter_mut().zip(e).for_each(|(b, ek)| *b += z * ek);
        }
        Ok(SplineModel {
            knots: self.knots.clone(),
            lambda: self.lambda,
            beta,
            penalty_order: super::fit::PENALTY_ORDER,
        })
    }
}

/// Fits the main-effects model to per-run spline fits sharing one knot vector.
pub fn fit_response(runs: &[CodedRun], models: &[SplineModel], factor_names: &[String]) -> Result<CoeffResponseModel> {
    if runs.len() != models.len() {
        return Err(Error::LengthMismatch {
            left: runs.len(),
            right: models.len(),
        });
    }
    let first = models
        .first()
        .ok_or_else(|| Error::InvalidArgument("no spline models given".into()))?;
    if models
        .iter()
        .any(|m| m.knots != first.knots || m.lambda != first.lambda)
    {
        return Err(Error::InvalidArgument("spline models must share knots and lambda".into()));
    }
    let n_factors = runs[0].z.len();
    if runs.iter().any(|r| r.z.len() != n_factors) {
        return Err(Error::InvalidArgument("coded runs differ in factor count".into()));
    }
    if factor_names.len() != n_factors {
        return Err(Error::LengthMismatch {
            left: factor_names.len(),
            right: n_factors,
        });
    }

    let cols = n_factors + 1;
    let rows = runs.len();
    let x: Vec<f64> = runs
        .iter()
        .flat_map(|r| std::iter::once(1.0).chain(r.z.iter().copied()))
        .collect();
    let rank = column_rank(&x, rows, cols, 1e-10);
    if rank < cols {
        return Err(Error::RankDeficientDesign { rank, required: cols });
    }

    let mut xtx = vec![0.0; cols * cols];
    for r in 0..rows {
        let row = &x[r * cols..(r + 1) * cols];
        for a in 0..cols {
            for b in 0..cols {
                xtx[a * cols + b] += row[a] * row[b];
            }
        }
    }
    let l = dense_cholesky(&xtx, cols).ok_or(Error::RankDeficientDesign { rank, required: cols })?;

    let nb = first.beta.len();
    let mut beta0 = vec![0.0; nb];
    let mut effects = vec![vec![0.0; nb]; n_factors];
    let mut xty = vec![0.0; cols];
    for k in 0..nb {
        xty.iter_mut().for_each(|v| *v = 0.0);
        for (r, m) in models.iter().enumerate() {
            for (a, v) in xty.iter_mut().enumerate() {
                *v += x[r * cols + a] * m.beta[k];
            }
        }
        let theta = dense_cholesky_solve(&l, cols, &xty);
        beta0[k] = theta[0];
        for j in 0..n_factors {
            effects[j][k] = theta[j + 1];
        }
    }
    Ok(CoeffResponseModel {
        knots: first.knots.clone(),
        beta0,
        effects,
        factor_names: factor_names.to_vec(),
        lambda: first.lambda,
    })
}

/// Predicted force profile on `n_points` uniform positions.
pub fn predict_profile(crm: &CoeffResponseModel, run: &CodedRun, n_points: usize) -> Result<ForceProfile> {
    crm.predict_spline(run)?.sample(&run.run_id, n_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{encode, table1_factor_specs, table1_runs, FACTOR_NAMES};

    fn names() -> Vec<String> {
        FACTOR_NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn coded_table() -> Vec<CodedRun> {
        let specs = table1_factor_specs();
        table1_runs().iter().map(|r| encode(r, &specs).unwrap()).collect()
    }

    fn model_with(beta: Vec<f64>) -> SplineModel {
        SplineModel {
            knots: KnotVector::uniform(3, 0.0, 1.0, 3).unwrap(),
            lambda: 1.0,
            beta,
            penalty_order: 2,
        }
    }

    #[test]
    fn identical_models_give_zero_effects() {
        let beta = vec![1.0, -2.0, 0.5, 3.0, 0.0, 4.0, 2.5];
        let runs = coded_table();
        let models = vec![model_with(beta.clone()); runs.len()];
        let crm = fit_response(&runs, &models, &names()).unwrap();
        for (a, b) in crm.beta0.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(crm.effects.iter().flatten().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn recovers_exactly_linear_coefficients() {
        let runs = coded_table();
        let nb = 7;
        let truth0: Vec<f64> = (0..nb).map(|k| k as f64 * 0.3 - 1.0).collect();
        let truth: Vec<Vec<f64>> = (0..7)
            .map(|j| (0..nb).map(|k| ((j * 7 + k) as f64).sin()).collect())
            .collect();
        let models: Vec<_> = runs
            .iter()
            .map(|r| {
                let beta = (0..nb)
                    .map(|k| truth0[k] + (0..7).map(|j| r.z[j] * truth[j][k]).sum::<f64>())
                    .collect();
                model_with(beta)
            })
            .collect();
        let crm = fit_response(&runs, &models, &names()).unwrap();
        for k in 0..nb {
            assert!((crm.beta0[k] - truth0[k]).abs() < 1e-8);
            for j in 0..7 {
                assert!((crm.effects[j][k] - truth[j][k]).abs() < 1e-8);
            }
        }
        // The baseline has z = 0 and predicts the intercept spline.
        assert_eq!(crm.predict_spline(&runs[0]).unwrap().beta, crm.beta0);
    }

    #[test]
    fn too_few_runs_is_rank_deficient() {
        let runs: Vec<_> = coded_table().into_iter().take(6).collect();
        let models = vec![model_with(vec![0.0; 7]); 6];
        assert!(matches!(
            fit_response(&runs, &models, &names()),
            Err(Error::RankDeficientDesign { rank: 6, required: 8 })
        ));
    }

    #[test]
    fn extrapolation_is_refused() {
        let runs = coded_table();
        let models = vec![model_with(vec![1.0; 7]); runs.len()];
        let crm = fit_response(&runs, &models, &names()).unwrap();
        let mut far = runs[3].clone();
        far.z[2] = 1.5;
        assert!(matches!(
            predict_profile(&crm, &far, 50),
            Err(Error::ExtrapolationRefused { factor: 2, .. })
        ));
        let p = predict_profile(&crm, &runs[0], 50).unwrap();
        assert!(p.force.iter().all(|f| (f - 1.0).abs() < 1e-12));
    }

    #[test]
    fn mismatched_knots_rejected() {
        let runs = coded_table();
        let mut models = vec![model_with(vec![1.0; 7]); runs.len()];
        models[2].lambda = 3.0;
        assert!(fit_response(&runs, &models, &names()).is_err());
    }
}
