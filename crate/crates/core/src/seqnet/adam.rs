use serde::{Deserialize, Serialize};

use super::model::NetParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &NetParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// Bias-corrected Adam update of one tensor at step `t` (1-based).
pub fn adam_update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], t: u64, lr: f64, cfg: &AdamConfig) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for i in 0..p.len() {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

/// One Adam step over every tensor of the network.
pub fn adam_step(params: &mut NetParams, grads: &NetParams, state: &mut AdamState, lr: f64, cfg: &AdamConfig) {
    state.t += 1;
    let t = state.t;
    for (((p, g), m), v) in params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        adam_update(p, g, m, v, t, lr, cfg);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqnet::model::init;
    use proptest::prelude::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = init(1, 4, 0).unwrap().params;
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &g, &mut st, 1e-4, &AdamConfig::default());
        assert_eq!(p, before);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let p0 = init(1, 4, 0).unwrap().params;
        let mut g = p0.zeros_like();
        g.head_b.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).cos());
        let run = || {
            let mut p = p0.clone();
            let mut st = AdamState::new(&p);
            adam_step(&mut p, &g, &mut st, 1e-4, &AdamConfig::default());
            (p, st)
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn first_step_is_about_lr_times_sign(g in prop::collection::vec(-1e3f64..1e3, 1..20)) {
            let lr = 1e-4;
            let cfg = AdamConfig::default();
            let mut p = vec![0.0; g.len()];
            let mut m = vec![0.0; g.len()];
            let mut v = vec![0.0; g.len()];
            adam_update(&mut p, &g, &mut m, &mut v, 1, lr, &cfg);
            for (step, gi) in p.iter().zip(&g) {
                let mag = step.abs();
                prop_assert!(mag <= lr * (1.0 + 1e-6));
                prop_assert!(mag >= lr * gi.abs() / (gi.abs() + cfg.epsilon) * (1.0 - 1e-6));
                if *gi != 0.0 {
                    prop_assert_eq!(step.signum(), -gi.signum());
                }
            }
        }
    }
}
