use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::doe::N_FACTORS;
use crate::error::{Error, Result};

/// Gate blocks inside the stacked weight rows, in this order.
pub const GATES: [&str; 4] = ["input", "forget", "candidate", "output"];
pub(crate) const FORGET: usize = 1;

/// Weights of one LSTM layer. Rows are gate-major: rows `g*hidden..(g+1)*hidden`
/// belong to gate `g` of [`GATES`].
#[derive(Debug, Clone, PartialEq)]
pub struct CellParams {
    pub input_dim: usize,
    pub hidden: usize,
    /// `4*hidden x input_dim`, row-major.
    pub w: Vec<f64>,
    /// `4*hidden x hidden`, row-major.
    pub u: Vec<f64>,
    /// `4*hidden`.
    pub b: Vec<f64>,
}

impl CellParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        CellParams {
            input_dim,
            hidden,
            w: vec![0.0; 4 * hidden * input_dim],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Input weights of one gate (`hidden x input_dim`).
    pub fn input_weights(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.input_dim;
        &self.w[gate * n..(gate + 1) * n]
    }

    /// Recurrent weights of one gate (`hidden x hidden`).
    pub fn recurrent_weights(&self, gate: usize) -> &[f64] {
        let n = self.hidden * self.hidden;
        &self.u[gate * n..(gate + 1) * n]
    }

    pub fn bias(&self, gate: usize) -> &[f64] {
        &self.b[gate * self.hidden..(gate + 1) * self.hidden]
    }
}

/// All trainable tensors. Gradients share this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub layers: Vec<CellParams>,
    /// `head_out x hidden`, row-major.
    pub head_w: Vec<f64>,
    pub head_b: Vec<f64>,
}

pub type Gradients = NetParams;

impl NetParams {
    pub fn zeros_like(&self) -> Self {
        NetParams {
            layers: self
                .layers
                .iter()
                .map(|l| CellParams::zeros(l.input_dim, l.hidden))
                .collect(),
            head_w: vec![0.0; self.head_w.len()],
            head_b: vec![0.0; self.head_b.len()],
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &self.layers {
            out.push(&l.w);
            out.push(&l.u);
            out.push(&l.b);
        }
        out.push(&self.head_w);
        out.push(&self.head_b);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * self.layers.len() + 2);
        for l in &mut self.layers {
            out.push(&mut l.w);
            out.push(&mut l.u);
            out.push(&mut l.b);
        }
        out.push(&mut self.head_w);
        out.push(&mut self.head_b);
        out
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter at a flat index over [`tensors`](Self::tensors).
    pub fn get_flat(&self, mut i: usize) -> f64 {
        for t in self.tensors() {
            if i < t.len() {
                return t[i];
            }
            i -= t.len();
        }
        panic!("flat index out of range")
    }

    pub fn set_flat(&mut self, mut i: usize, v: f64) {
        for t in self.tensors_mut() {
            if i < t.len() {
                t[i] = v;
                return;
            }
            i -= t.len();
        }
        panic!("flat index out of range")
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Affine standardization `(x - mean) / scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norm {
    pub mean: f64,
    pub scale: f64,
}

impl Norm {
    pub const IDENTITY: Norm = Norm { mean: 0.0, scale: 1.0 };

    /// Mean and population standard deviation; a zero spread maps to scale 1.
    pub fn fit<'a>(values: impl IntoIterator<Item = &'a f64>) -> Norm {
        let (mut n, mut sum) = (0usize, 0.0);
        let vals: Vec<f64> = values.into_iter().copied().collect();
        for v in &vals {
            n += 1;
            sum += v;
        }
        if n == 0 {
            return Norm::IDENTITY;
        }
        let mean = sum / n as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        Norm {
            mean,
            scale: if sd > 0.0 { sd } else { 1.0 },
        }
    }

    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.scale
    }

    pub fn invert(&self, x: f64) -> f64 {
        self.mean + self.scale * x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub layers: usize,
    pub hidden: usize,
    pub head_out: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            layers: 2,
            hidden: 250,
            head_out: 500,
        }
    }
}

/// Stacked LSTM with a dense head: seven coded factors in, one profile out.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqNetModel {
    pub config: NetConfig,
    pub params: NetParams,
    pub input_norm: Vec<Norm>,
    pub output_norm: Norm,
    pub seed: u64,
}

/// Initial model with `head_out` 500.
pub fn init(layer_count: usize, hidden: usize, seed: u64) -> Result<SeqNetModel> {
    init_with(
        NetConfig {
            layers: layer_count,
            hidden,
            head_out: 500,
        },
        seed,
    )
}

/// Weights uniform in +-1/sqrt(fan_in), forget biases 1, other biases 0.
pub fn init_with(config: NetConfig, seed: u64) -> Result<SeqNetModel> {
    if config.layers < 1 || config.hidden < 1 || config.head_out < 1 {
        return Err(Error::InvalidArgument(format!("invalid network shape {config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform = |buf: &mut [f64], fan_in: usize| {
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in buf {
            *v = rng.random_range(-bound..=bound);
        }
    };
    let h = config.hidden;
    let mut layers = Vec::with_capacity(config.layers);
    for l in 0..config.layers {
        let input_dim = if l == 0 { 1 } else { h };
        let mut cell = CellParams::zeros(input_dim, h);
        uniform(&mut cell.w, input_dim);
        uniform(&mut cell.u, h);
        cell.b[FORGET * h..(FORGET + 1) * h].fill(1.0);
        layers.push(cell);
    }
    let mut head_w = vec![0.0; config.head_out * h];
    uniform(&mut head_w, h);
    Ok(SeqNetModel {
        config,
        params: NetParams {
            layers,
            head_w,
            head_b: vec![0.0; config.head_out],
        },
        input_norm: vec![Norm::IDENTITY; N_FACTORS],
        output_norm: Norm::IDENTITY,
        seed,
    })
}

// On-disk layout: config, norms, flat named weight arrays with shapes, seed.

#[derive(Debug, Serialize, Deserialize)]
struct NormsFile {
    input: Vec<Norm>,
    output: Norm,
}

#[derive(Debug, Serialize, Deserialize)]
struct WeightArray {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetModelFile {
    config: NetConfig,
    norms: NormsFile,
    weights: Vec<WeightArray>,
    seed: u64,
}

impl SeqNetModel {
    fn weight_arrays(&self) -> Vec<WeightArray> {
        let mut out = Vec::new();
        for (i, l) in self.params.layers.iter().enumerate() {
            let rows = 4 * l.hidden;
            out.push(WeightArray {
                name: format!("layer{i}.w"),
                shape: vec![rows, l.input_dim],
                data: l.w.clone(),
            });
            out.push(WeightArray {
                name: format!("layer{i}.u"),
                shape: vec![rows, l.hidden],
                data: l.u.clone(),
            });
            out.push(WeightArray {
                name: format!("layer{i}.b"),
                shape: vec![rows],
                data: l.b.clone(),
            });
        }
        out.push(WeightArray {
            name: "head.w".into(),
            shape: vec![self.config.head_out, self.config.hidden],
            data: self.params.head_w.clone(),
        });
        out.push(WeightArray {
            name: "head.b".into(),
            shape: vec![self.config.head_out],
            data: self.params.head_b.clone(),
        });
        out
    }

    /// net_model.json contents.
    pub fn to_json(&self) -> Result<String> {
        let file = NetModelFile {
            config: self.config,
            norms: NormsFile {
                input: self.input_norm.clone(),
                output: self.output_norm,
            },
            weights: self.weight_arrays(),
            seed: self.seed,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetModelFile = serde_json::from_str(text)?;
        let mut model = init_with(file.config, file.seed)?;
        let expected = model.weight_arrays();
        if file.weights.len() != expected.len() {
            return Err(Error::Format("unexpected number of weight arrays".into()));
        }
        for (got, want) in file.weights.iter().zip(&expected) {
            if got.name != want.name || got.shape != want.shape || got.data.len() != want.data.len() {
                return Err(Error::Format(format!("weight array `{}` does not match the config", got.name)));
            }
        }
        let mut arrays = file.weights.into_iter();
        for t in model.params.tensors_mut() {
            t.copy_from_slice(&arrays.next().expect("length checked").data);
        }
        if file.norms.input.len() != N_FACTORS {
            return Err(Error::Format("input norms must have seven entries".into()));
        }
        model.input_norm = file.norms.input;
        model.output_norm = file.norms.output;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_model() {
        assert_eq!(init(2, 16, 4).unwrap(), init(2, 16, 4).unwrap());
        assert_ne!(init(2, 16, 4).unwrap(), init(2, 16, 5).unwrap());
    }

    #[test]
    fn stacking_dimensions() {
        let m = init(2, 250, 0).unwrap();
        assert_eq!(m.params.layers[0].input_dim, 1);
        assert_eq!(m.params.layers[1].input_dim, 250);
        assert_eq!(m.params.head_w.len(), 500 * 250);
        assert_eq!(m.input_norm.len(), 7);
    }

    #[test]
    fn forget_bias_is_one_and_others_zero() {
        let m = init(2, 8, 1).unwrap();
        for l in &m.params.layers {
            assert!(l.bias(FORGET).iter().all(|&b| b == 1.0));
            for g in [0, 2, 3] {
                assert!(l.bias(g).iter().all(|&b| b == 0.0));
            }
        }
        assert!(m.params.head_b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn weights_respect_fan_in_bound() {
        let m = init(2, 9, 2).unwrap();
        assert!(m.params.layers[0].w.iter().all(|v| v.abs() <= 1.0));
        assert!(m.params.layers[1].w.iter().all(|v| v.abs() <= 1.0 / 3.0));
        assert!(m.params.head_w.iter().all(|v| v.abs() <= 1.0 / 3.0));
    }

    #[test]
    fn flat_access_covers_every_tensor() {
        let mut m = init(1, 3, 0).unwrap().params;
        let n = m.n_params();
        assert_eq!(n, 4 * 3 * 1 + 4 * 3 * 3 + 12 + 500 * 3 + 500);
        m.set_flat(n - 1, 42.0);
        assert_eq!(m.head_b[499], 42.0);
        assert_eq!(m.get_flat(0), m.layers[0].w[0]);
    }

    #[test]
    fn json_round_trip() {
        let mut m = init(2, 5, 3).unwrap();
        m.output_norm = Norm { mean: 2.0, scale: 0.5 };
        let back = SeqNetModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn norm_fit_is_population_standardization() {
        let n = Norm::fit(&[1.0, 3.0]);
        assert_eq!(n, Norm { mean: 2.0, scale: 1.0 });
        assert_eq!(Norm::fit(&[5.0, 5.0]).scale, 1.0);
        assert_eq!(n.invert(n.apply(7.25)), 7.25);
    }
}
