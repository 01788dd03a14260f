use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::bptt;
use super::model::{Norm, SeqNetModel};
use crate::doe::CodedRun;
use crate::error::{Error, Result};
use crate::eval::mae;
use crate::oracle::ForceProfile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Training stops once the normalized training MSE reaches this value.
    pub early_stop_loss: f64,
    pub max_epochs: usize,
    pub split_fraction: f64,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            early_stop_loss: 1e-6,
            max_epochs: 1000,
            split_fraction: 0.8,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split_fraction must lie in (0, 1), got {}",
                self.split_fraction
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs_run: usize,
    /// Normalized training MSE at the last evaluated epoch.
    pub final_train_loss: f64,
    /// Mean per-profile MAE on the held-out runs, in force units.
    pub test_mae: f64,
    pub stopped_early: bool,
    pub loss_history: Vec<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub train_run_ids: Vec<String>,
    pub test_run_ids: Vec<String>,
}

/// Seeded shuffle split: `floor(fraction * n)` training indices, the rest
/// for testing. Both lists are returned in ascending order.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    // The epsilon keeps products such as 0.29 * 100 from flooring one short.
    let n_train = (fraction * n as f64 + 1e-9).floor() as usize;
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::DatasetTooSmall(format!(
            "{n} samples cannot be split {fraction} / {}",
            1.0 - fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut test = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Full-batch Adam training on the training share of `dataset`.
///
/// Normalization statistics are fitted on the training runs and stored in
/// the returned model. Each epoch evaluates the training loss first; if it is
/// at or below `early_stop_loss` training halts without a further update.
pub fn train(model: &SeqNetModel, dataset: &[(CodedRun, ForceProfile)], cfg: &TrainConfig) -> Result<(SeqNetModel, TrainReport)> {
    cfg.validate()?;
    if dataset.len() < 2 {
        return Err(Error::DatasetTooSmall(format!("{} samples, need at least 2", dataset.len())));
    }
    let (train_idx, test_idx) = split_indices(dataset.len(), cfg.split_fraction, cfg.seed)?;
    let train_runs: Vec<CodedRun> = train_idx.iter().map(|&i| dataset[i].0.clone()).collect();
    let train_targets: Vec<ForceProfile> = train_idx.iter().map(|&i| dataset[i].1.clone()).collect();

    let mut model = model.clone();
    let n_inputs = model.input_norm.len();
    if let Some(r) = train_runs.iter().find(|r| r.z.len() != n_inputs) {
        return Err(Error::LengthMismatch {
            left: r.z.len(),
            right: n_inputs,
        });
    }
    model.input_norm = (0..n_inputs)
        .map(|j| Norm::fit(train_runs.iter().map(|r| &r.z[j])))
        .collect();
    model.output_norm = Norm::fit(train_targets.iter().flat_map(|p| p.force.iter()));

    let (inputs, targets) = model.prepare_batch(&train_runs, &train_targets)?;
    let batch = train_runs.len();
    let mut state = AdamState::new(&model.params);
    let mut history = Vec::new();
    let mut stopped_early = false;
    for _ in 0..cfg.max_epochs {
        let (loss, grads) = bptt::loss_and_grad(&model.params, &inputs, &targets, batch);
        if !loss.is_finite() {
            return Err(Error::InvalidArgument(format!("training diverged at epoch {}", history.len() + 1)));
        }
        history.push(loss);
        if loss <= cfg.early_stop_loss {
            stopped_early = true;
            break;
        }
        adam_step(&mut model.params, &grads, &mut state, cfg.learning_rate, &cfg.adam);
    }

    let test_mae = if test_idx.is_empty() {
        0.0
    } else {
        let mut total = 0.0;
        for &i in &test_idx {
            let (run, truth) = &dataset[i];
            total += mae(&model.forward(run)?, truth)?;
        }
        total / test_idx.len() as f64
    };
    let ids = |idx: &[usize]| idx.iter().map(|&i| dataset[i].0.run_id.clone()).collect::<Vec<_>>();
    let report = TrainReport {
        epochs_run: history.len(),
        final_train_loss: *history.last().expect("at least one epoch"),
        test_mae,
        stopped_early,
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        train_run_ids: ids(&train_idx),
        test_run_ids: ids(&test_idx),
        loss_history: history,
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqnet::model::{init_with, NetConfig};

    fn small() -> SeqNetModel {
        init_with(
            NetConfig {
                layers: 1,
                hidden: 6,
                head_out: 500,
            },
            3,
        )
        .unwrap()
    }

    fn coded(i: usize) -> CodedRun {
        CodedRun {
            run_id: format!("V{i}"),
            z: (0..7).map(|j| if (i >> (j % 4)) & 1 == 1 { 1.0 } else { -1.0 }).collect(),
        }
    }

    fn toy_dataset(n: usize) -> Vec<(CodedRun, ForceProfile)> {
        (0..n)
            .map(|i| {
                let f = (0..500).map(|k| (k as f64 * 0.01 * (1.0 + i as f64 * 0.1)).sin() + 2.0).collect();
                (coded(i), ForceProfile::on_uniform_grid(format!("V{i}"), f))
            })
            .collect()
    }

    #[test]
    fn seventeen_split_thirteen_four() {
        let (tr, te) = split_indices(17, 0.8, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (13, 4));
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..17).collect::<Vec<_>>());
        assert_eq!(split_indices(17, 0.8, 7).unwrap(), (tr, te));
    }

    #[test]
    fn tiny_datasets_rejected() {
        assert!(matches!(split_indices(1, 0.8, 0), Err(Error::DatasetTooSmall(_))));
        let cfg = TrainConfig::default();
        assert!(matches!(train(&small(), &toy_dataset(1), &cfg), Err(Error::DatasetTooSmall(_))));
    }

    #[test]
    fn zero_loss_at_init_stops_immediately() {
        // Head weights zero and a head bias with mean 0 / population sd 1
        // make the refitted output normalization reproduce the same targets.
        let mut m = small();
        m.params.head_w.fill(0.0);
        for (j, b) in m.params.head_b.iter_mut().enumerate() {
            *b = if j % 2 == 0 { 1.0 } else { -1.0 };
        }
        m.output_norm = Norm { mean: 5.0, scale: 2.0 };
        let data: Vec<_> = (0..5)
            .map(|i| {
                let run = coded(i);
                let target = m.forward(&run).unwrap();
                (run, target)
            })
            .collect();
        let (_, report) = train(&m, &data, &TrainConfig::default()).unwrap();
        assert!(report.stopped_early);
        assert_eq!(report.epochs_run, 1);
        assert!(report.final_train_loss <= 1e-6);
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let cfg = TrainConfig {
            max_epochs: 60,
            learning_rate: 1e-2,
            seed: 11,
            ..TrainConfig::default()
        };
        let data = toy_dataset(6);
        let (m1, r1) = train(&small(), &data, &cfg).unwrap();
        let (m2, r2) = train(&small(), &data, &cfg).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(m1, m2);
        assert_eq!((r1.n_train, r1.n_test), (4, 2));
        assert!(!r1.stopped_early);
        assert_eq!(r1.epochs_run, 60);
        assert!(r1.loss_history[59] < r1.loss_history[0]);
        assert!(r1.test_mae.is_finite() && r1.test_mae >= 0.0);
    }

    #[test]
    fn bad_split_fraction_rejected() {
        let cfg = TrainConfig {
            split_fraction: 1.0,
            ..TrainConfig::default()
        };
        assert!(train(&small(), &toy_dataset(4), &cfg).is_err());
    }
}
