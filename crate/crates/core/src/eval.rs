//! Error metrics of surrogate predictions against simulated profiles.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::ForceProfile;

/// Reference MAEs of the spline and LSTM surrogates on proprietary
/// finite-element data. Documentation only; not reproducible here.
pub const REFERENCE_MAE_SPLINE: f64 = 3.0176;
pub const REFERENCE_MAE_LSTM: f64 = 1.357;

fn check_lengths(a: &ForceProfile, b: &ForceProfile) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Mean absolute error in force units.
pub fn mae(pred: &ForceProfile, truth: &ForceProfile) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.force.iter().zip(&truth.force).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Mean squared error in squared force units.
pub fn mse(pred: &ForceProfile, truth: &ForceProfile) -> Result<f64> {
    check_lengths(pred, truth)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.force.iter().zip(&truth.force).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Train,
    Test,
    All,
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Train => "train",
            Scope::Test => "test",
            Scope::All => "all",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub scope: Scope,
    pub n_profiles: usize,
    pub mae: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
}

/// Predictions of one surrogate, optionally labelled train/test per run.
#[derive(Debug, Clone)]
pub struct SurrogateOutput {
    pub method: String,
    pub profiles: Vec<ForceProfile>,
    pub scopes: Option<Vec<Scope>>,
}

impl MetricsReport {
    /// Rows ordered by ascending MAE (stable).
    pub fn sorted_by_mae(&self) -> Vec<MetricsRow> {
        let mut rows = self.rows.clone();
        rows.sort_by(|a, b| a.mae.total_cmp(&b.mae));
        rows
    }

    pub fn row(&self, method: &str, scope: Scope) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.method == method && r.scope == scope)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "scope", "n_profiles", "mae", "mse"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.scope.to_string(),
                r.n_profiles.to_string(),
                r.mae.to_string(),
                r.mse.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn aggregate(method: &str, scope: Scope, pairs: &[(f64, f64)]) -> MetricsRow {
    let n = pairs.len();
    let mean = |f: fn(&(f64, f64)) -> f64| if n == 0 { 0.0 } else { pairs.iter().map(f).sum::<f64>() / n as f64 };
    MetricsRow {
        method: method.to_string(),
        scope,
        n_profiles: n,
        mae: mean(|p| p.0),
        mse: mean(|p| p.1),
    }
}

/// Per-method MAE/MSE as the unweighted mean of per-profile metrics. Each
/// method yields train and test rows when it carries scope labels, and
/// always an `all` row.
pub fn compare_methods(truth: &[ForceProfile], outputs: &[SurrogateOutput]) -> Result<MetricsReport> {
    let mut rows = Vec::new();
    for out in outputs {
        if out.profiles.len() != truth.len() {
            return Err(Error::LengthMismatch {
                left: out.profiles.len(),
                right: truth.len(),
            });
        }
        let mut per_profile = Vec::with_capacity(truth.len());
        for (i, (p, t)) in out.profiles.iter().zip(truth).enumerate() {
            if p.run_id != t.run_id {
                return Err(Error::RunIdMismatch {
                    index: i,
                    expected: t.run_id.clone(),
                    found: p.run_id.clone(),
                });
            }
            per_profile.push((mae(p, t)?, mse(p, t)?));
        }
        if let Some(scopes) = &out.scopes {
            if scopes.len() != truth.len() {
                return Err(Error::LengthMismatch {
                    left: scopes.len(),
                    right: truth.len(),
                });
            }
            for scope in [Scope::Train, Scope::Test] {
                let sel: Vec<_> = per_profile
                    .iter()
                    .zip(scopes)
                    .filter(|(_, s)| **s == scope)
                    .map(|(m, _)| *m)
                    .collect();
                if !sel.is_empty() {
                    rows.push(aggregate(&out.method, scope, &sel));
                }
            }
        }
        rows.push(aggregate(&out.method, Scope::All, &per_profile));
    }
    Ok(MetricsReport { rows })
}

/// Spline versus network comparison with shared per-run scope labels.
pub fn compare(
    truth: &[ForceProfile],
    spline_pred: &[ForceProfile],
    net_pred: &[ForceProfile],
    scopes: &[Scope],
) -> Result<MetricsReport> {
    compare_methods(
        truth,
        &[
            SurrogateOutput {
                method: "spline".into(),
                profiles: spline_pred.to_vec(),
                scopes: Some(scopes.to_vec()),
            },
            SurrogateOutput {
                method: "lstm".into(),
                profiles: net_pred.to_vec(),
                scopes: Some(scopes.to_vec()),
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn prof(id: &str, f: Vec<f64>) -> ForceProfile {
        ForceProfile::on_uniform_grid(id, f)
    }

    fn shifted(p: &ForceProfile, c: f64) -> ForceProfile {
        prof(&p.run_id, p.force.iter().map(|f| f + c).collect())
    }

    #[test]
    fn mae_examples() {
        let t = prof("a", vec![1.0, -2.0, 3.5]);
        assert_eq!(mae(&t, &t).unwrap(), 0.0);
        assert!((mae(&shifted(&t, -0.75), &t).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(mae(&prof("a", vec![1.0]), &t), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn perfect_predictions_score_zero() {
        let truth = vec![prof("a", vec![1.0, 2.0]), prof("b", vec![0.0, 5.0])];
        let r = compare(&truth, &truth, &truth, &[Scope::Train, Scope::Test]).unwrap();
        assert_eq!(r.rows.len(), 6);
        assert!(r.rows.iter().all(|row| row.mae == 0.0 && row.mse == 0.0));
    }

    #[test]
    fn better_method_sorts_first() {
        let truth = vec![prof("a", vec![1.0, 2.0]), prof("b", vec![0.0, 5.0])];
        let spline: Vec<_> = truth.iter().map(|p| shifted(p, 1.0)).collect();
        let r = compare(&truth, &spline, &truth, &[Scope::Train, Scope::Train]).unwrap();
        let sorted = r.sorted_by_mae();
        assert_eq!(sorted[0].method, "lstm");
        assert_eq!(sorted.last().unwrap().method, "spline");
        assert_eq!(r.row("spline", Scope::All).unwrap().mae, 1.0);
        assert!(r.row("spline", Scope::Test).is_none());
    }

    #[test]
    fn mismatched_ids_rejected() {
        let truth = vec![prof("a", vec![1.0])];
        let other = vec![prof("b", vec![1.0])];
        assert!(matches!(
            compare(&truth, &other, &truth, &[Scope::All]),
            Err(Error::RunIdMismatch { index: 0, .. })
        ));
    }

    #[test]
    fn report_mae_is_mean_of_profile_maes() {
        let truth = vec![prof("a", vec![0.0; 4]), prof("b", vec![0.0; 4])];
        let pred = vec![prof("a", vec![1.0; 4]), prof("b", vec![3.0, -3.0, 3.0, -3.0])];
        let r = compare_methods(
            &truth,
            &[SurrogateOutput {
                method: "m".into(),
                profiles: pred,
                scopes: None,
            }],
        )
        .unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].mae, 2.0);
        assert_eq!(r.rows[0].mse, 5.0);
    }

    #[test]
    fn csv_layout() {
        let truth = vec![prof("a", vec![0.0, 1.0])];
        let r = compare(&truth, &truth, &truth, &[Scope::Test]).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("method,scope,n_profiles,mae,mse\nspline,test,1,0,0\n"));
    }

    proptest! {
        #[test]
        fn mae_symmetric_translation_invariant_and_below_rmse(
            pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..50),
            c in -1e3f64..1e3,
        ) {
            let p = prof("x", pairs.iter().map(|v| v.0).collect());
            let t = prof("x", pairs.iter().map(|v| v.1).collect());
            let m = mae(&p, &t).unwrap();
            prop_assert_eq!(m, mae(&t, &p).unwrap());
            prop_assert!((mae(&shifted(&p, c), &shifted(&t, c)).unwrap() - m).abs() <= 1e-9 * (1.0 + m));
            prop_assert!(m <= mse(&p, &t).unwrap().sqrt() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
