use super::bptt;
use super::model::{Gradients, SeqNetModel};
use crate::doe::CodedRun;
use crate::error::{Error, Result};
use crate::oracle::ForceProfile;

/// Mean squared difference of two equally long vectors.
pub fn mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(bptt::batch_mse(pred, target))
}

impl SeqNetModel {
    /// Normalized input sequence: one factor per time step.
    pub fn input_sequence(&self, run: &CodedRun) -> Result<Vec<f64>> {
        if run.z.len() != self.input_norm.len() {
            return Err(Error::LengthMismatch {
                left: run.z.len(),
                right: self.input_norm.len(),
            });
        }
        Ok(run.z.iter().zip(&self.input_norm).map(|(&z, n)| n.apply(z)).collect())
    }

    pub fn normalize_output(&self, force: &[f64]) -> Vec<f64> {
        force.iter().map(|&f| self.output_norm.apply(f)).collect()
    }

    fn check_target(&self, target: &ForceProfile) -> Result<()> {
        if target.len() != self.config.head_out {
            return Err(Error::LengthMismatch {
                left: target.len(),
                right: self.config.head_out,
            });
        }
        Ok(())
    }

    /// Predicted profile in force units.
    pub fn forward(&self, run: &CodedRun) -> Result<ForceProfile> {
        let seq = self.input_sequence(run)?;
        let cache = bptt::forward(&self.params, &seq, 1);
        let force = cache.output.iter().map(|&y| self.output_norm.invert(y)).collect();
        Ok(ForceProfile::on_uniform_grid(run.run_id.clone(), force))
    }

    /// MSE between two profiles, measured in normalized output units.
    pub fn loss(&self, pred: &ForceProfile, target: &ForceProfile) -> Result<f64> {
        mse(&self.normalize_output(&pred.force), &self.normalize_output(&target.force))
    }

    /// Loss of one sample and its exact gradient with respect to every
    /// parameter.
    pub fn backward(&self, run: &CodedRun, target: &ForceProfile) -> Result<(f64, Gradients)> {
        self.check_target(target)?;
        let seq = self.input_sequence(run)?;
        let t = self.normalize_output(&target.force);
        Ok(bptt::loss_and_grad(&self.params, &seq, &t, 1))
    }

    /// Mean loss over a batch and its gradient.
    pub fn batch_backward(&self, runs: &[CodedRun], targets: &[ForceProfile]) -> Result<(f64, Gradients)> {
        let (inputs, t) = self.prepare_batch(runs, targets)?;
        Ok(bptt::loss_and_grad(&self.params, &inputs, &t, runs.len()))
    }

    pub(crate) fn prepare_batch(&self, runs: &[CodedRun], targets: &[ForceProfile]) -> Result<(Vec<f64>, Vec<f64>)> {
        if runs.len() != targets.len() || runs.is_empty() {
            return Err(Error::LengthMismatch {
                left: runs.len(),
                right: targets.len(),
            });
        }
        let mut inputs = Vec::with_capacity(runs.len() * self.input_norm.len());
        let mut t = Vec::with_capacity(runs.len() * self.config.head_out);
        for (run, target) in runs.iter().zip(targets) {
            self.check_target(target)?;
            inputs.extend(self.input_sequence(run)?);
            t.extend(self.normalize_output(&target.force));
        }
        Ok((inputs, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqnet::model::{init, init_with, NetConfig, Norm};

    fn run() -> CodedRun {
        CodedRun {
            run_id: "V1".into(),
            z: vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0],
        }
    }

    #[test]
    fn output_has_five_hundred_points() {
        let m = init(2, 12, 0).unwrap();
        let p = m.forward(&run()).unwrap();
        assert_eq!(p.len(), 500);
        p.validate().unwrap();
    }

    #[test]
    fn zero_weights_give_denormalized_zero() {
        let mut m = init(2, 6, 0).unwrap();
        for t in m.params.tensors_mut() {
            t.fill(0.0);
        }
        m.output_norm = Norm { mean: 3.0, scale: 2.0 };
        let p = m.forward(&run()).unwrap();
        assert!(p.force.iter().all(|&f| f == 3.0));
    }

    #[test]
    fn forward_is_pure() {
        let m = init(2, 10, 3).unwrap();
        assert_eq!(m.forward(&run()).unwrap(), m.forward(&run()).unwrap());
    }

    #[test]
    fn loss_examples() {
        let m = init(1, 2, 0).unwrap();
        let t = ForceProfile::on_uniform_grid("a", (0..500).map(|i| i as f64 * 0.01).collect());
        assert_eq!(m.loss(&t, &t).unwrap(), 0.0);
        let shifted = ForceProfile::on_uniform_grid("a", t.force.iter().map(|f| f + 1.0).collect());
        assert!((m.loss(&shifted, &t).unwrap() - 1.0).abs() < 1e-12);
        let mut one = t.clone();
        one.force[10] += 2.0;
        assert!((m.loss(&one, &t).unwrap() - 4.0 / 500.0).abs() < 1e-15);
        let short = ForceProfile::on_uniform_grid("a", vec![0.0; 10]);
        assert!(matches!(m.loss(&short, &t), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn loss_is_measured_in_normalized_units() {
        let mut m = init(1, 2, 0).unwrap();
        m.output_norm = Norm { mean: 5.0, scale: 2.0 };
        let t = ForceProfile::on_uniform_grid("a", vec![1.0; 500]);
        let p = ForceProfile::on_uniform_grid("a", vec![3.0; 500]);
        assert!((m.loss(&p, &t).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_loss_sample_has_zero_gradient() {
        let m = init(2, 5, 8).unwrap();
        let target = m.forward(&run()).unwrap();
        let (loss, g) = m.backward(&run(), &target).unwrap();
        assert!(loss < 1e-28);
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| v.abs() < 1e-13)));
    }

    #[test]
    fn head_bias_gradient_is_scaled_residual() {
        let mut m = init_with(
            NetConfig {
                layers: 1,
                hidden: 4,
                head_out: 500,
            },
            1,
        )
        .unwrap();
        m.output_norm = Norm { mean: 1.0, scale: 3.0 };
        let pred = m.forward(&run()).unwrap();
        let target = ForceProfile::on_uniform_grid("t", (0..500).map(|i| (i as f64 * 0.1).sin()).collect());
        let (_, g) = m.backward(&run(), &target).unwrap();
        let p = m.normalize_output(&pred.force);
        let t = m.normalize_output(&target.force);
        for j in 0..500 {
            let want = 2.0 / 500.0 * (p[j] - t[j]);
            assert!((g.head_b[j] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn batch_gradient_is_mean_of_sample_gradients() {
        let m = init(2, 4, 2).unwrap();
        let runs = vec![run(), CodedRun { run_id: "x".into(), z: vec![1.0, 0.0, -1.0, 1.0, 0.0, -1.0, 1.0] }];
        let targets: Vec<_> = (0..2)
            .map(|k| ForceProfile::on_uniform_grid("t", (0..500).map(|i| ((i + 37 * k) as f64 * 0.05).cos()).collect()))
            .collect();
        let (lb, gb) = m.batch_backward(&runs, &targets).unwrap();
        let (l0, g0) = m.backward(&runs[0], &targets[0]).unwrap();
        let (l1, g1) = m.backward(&runs[1], &targets[1]).unwrap();
        assert!((lb - 0.5 * (l0 + l1)).abs() < 1e-14);
        for i in 0..gb.n_params() {
            let want = 0.5 * (g0.get_flat(i) + g1.get_flat(i));
            assert!((gb.get_flat(i) - want).abs() < 1e-13);
        }
    }
}
