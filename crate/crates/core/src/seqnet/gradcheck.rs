//! Central finite-difference verification of [`SeqNetModel::backward`].

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bptt;
use super::model::SeqNetModel;
use crate::doe::CodedRun;
use crate::error::{Error, Result};
use crate::oracle::ForceProfile;

/// Parameters compared when the model has more than this many.
pub const DEFAULT_CHECKS: usize = 256;

/// Largest relative error between analytic and numeric gradients over a
/// seeded subsample of parameters.
pub fn grad_check(model: &SeqNetModel, run: &CodedRun, target: &ForceProfile, eps: f64) -> Result<f64> {
    grad_check_with(model, run, target, eps, DEFAULT_CHECKS, model.seed)
}

pub fn grad_check_with(
    model: &SeqNetModel,
    run: &CodedRun,
    target: &ForceProfile,
    eps: f64,
    n_checks: usize,
    seed: u64,
) -> Result<f64> {
    let pairs = gradient_pairs(model, run, target, eps, n_checks, seed)?;
    Ok(pairs
        .iter()
        .map(|p| (p.analytic - p.numeric).abs() / (p.analytic.abs() + p.numeric.abs()).max(1e-8))
        .fold(0.0, f64::max))
}

/// One compared parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientPair {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

/// Analytic and central-difference gradients for a seeded subsample of
/// `n_checks` parameters (all of them if the model is smaller).
pub fn gradient_pairs(
    model: &SeqNetModel,
    run: &CodedRun,
    target: &ForceProfile,
    eps: f64,
    n_checks: usize,
    seed: u64,
) -> Result<Vec<GradientPair>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {eps}")));
    }
    let (_, analytic) = model.backward(run, target)?;
    let seq = model.input_sequence(run)?;
    let t = model.normalize_output(&target.force);
    let output_at = |p: &super::model::NetParams| bptt::forward(p, &seq, 1).output;
    // (L(+) - L(-)) expanded term by term as (p+ - p-)(p+ + p- - 2t) / N,
    // which avoids cancelling two nearly equal loss totals.
    let central = |up: &[f64], down: &[f64]| {
        up.iter()
            .zip(down)
            .zip(&t)
            .map(|((u, d), ti)| (u - d) * (u + d - 2.0 * ti))
            .sum::<f64>()
            / (t.len() as f64 * 2.0 * eps)
    };

    let n = model.params.n_params();
    let indices: Vec<usize> = if n <= n_checks {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = sample(&mut rng, n, n_checks).into_vec();
        v.sort_unstable();
        v
    };

    let mut params = model.params.clone();
    let mut pairs = Vec::with_capacity(indices.len());
    for index in indices {
        let orig = params.get_flat(index);
        params.set_flat(index, orig + eps);
        let up = output_at(&params);
        params.set_flat(index, orig - eps);
        let down = output_at(&params);
        params.set_flat(index, orig);
        pairs.push(GradientPair {
            index,
            analytic: analytic.get_flat(index),
            numeric: central(&up, &down),
        });
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqnet::model::{init_with, NetConfig};

    fn small(seed: u64) -> SeqNetModel {
        init_with(
            NetConfig {
                layers: 1,
                hidden: 8,
                head_out: 500,
            },
            seed,
        )
        .unwrap()
    }

    fn sample_run() -> CodedRun {
        CodedRun {
            run_id: "r".into(),
            z: vec![1.0, -1.0, 0.0, 1.0, -1.0, 1.0, -1.0],
        }
    }

    fn target() -> ForceProfile {
        ForceProfile::on_uniform_grid("t", (0..500).map(|i| (i as f64 / 40.0).sin()).collect())
    }

    #[test]
    fn fresh_small_model_passes() {
        let err = grad_check(&small(0), &sample_run(), &target(), 1e-5).unwrap();
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn two_layer_model_passes() {
        let m = init_with(
            NetConfig {
                layers: 2,
                hidden: 5,
                head_out: 500,
            },
            9,
        )
        .unwrap();
        // Some first-layer gradients are ~1e-8, where finite-difference
        // roundoff alone is a sizeable fraction; allow an absolute floor.
        let pairs = gradient_pairs(&m, &sample_run(), &target(), 1e-5, 256, 9).unwrap();
        for p in pairs {
            let tol = 1e-4 * (p.analytic.abs() + p.numeric.abs()) + 1e-10;
            assert!((p.analytic - p.numeric).abs() <= tol, "{p:?}");
        }
    }

    #[test]
    fn ten_seeds_of_small_models_pass() {
        for seed in 0..10 {
            let err = grad_check(&small(seed), &sample_run(), &target(), 1e-5).unwrap();
            assert!(err <= 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn head_only_path_is_near_exact() {
        let mut m = small(4);
        for l in &mut m.params.layers {
            l.w.fill(0.0);
            l.u.fill(0.0);
            l.b.fill(0.0);
        }
        let err = grad_check(&m, &sample_run(), &target(), 1e-5).unwrap();
        assert!(err <= 1e-7, "{err}");
    }

    #[test]
    fn zero_step_rejected() {
        assert!(grad_check(&small(0), &sample_run(), &target(), 0.0).is_err());
    }
}
