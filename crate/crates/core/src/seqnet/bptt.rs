//! Batched forward pass and backpropagation through time, in normalized
//! units. Inputs are `batch x steps` scalars; targets are `batch x head_out`.

use super::model::{Gradients, NetParams};

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Activations of one layer at one time step, all `batch x ...` row-major.
struct StepCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// post-activation gates i, f, g, o: `batch x 4*hidden`
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

pub(crate) struct ForwardCache {
    batch: usize,
    layers: Vec<Vec<StepCache>>,
    /// `batch x head_out`
    pub output: Vec<f64>,
}

pub(crate) fn forward(params: &NetParams, inputs: &[f64], batch: usize) -> ForwardCache {
    assert!(batch > 0 && inputs.len().is_multiple_of(batch));
    let steps = inputs.len() / batch;
    let mut layers: Vec<Vec<StepCache>> = Vec::with_capacity(params.layers.len());
    for (li, cell) in params.layers.iter().enumerate() {
        let h_dim = cell.hidden;
        let in_dim = cell.input_dim;
        let rows = 4 * h_dim;
        let mut h = vec![0.0; batch * h_dim];
        let mut c = vec![0.0; batch * h_dim];
        let mut cache = Vec::with_capacity(steps);
        for t in 0..steps {
            let input: Vec<f64> = if li == 0 {
                (0..batch).map(|b| inputs[b * steps + t]).collect()
            } else {
                layers[li - 1][t].h.clone()
            };
            debug_assert_eq!(input.len(), batch * in_dim);
            let mut pre = vec![0.0; batch * rows];
            for r in 0..rows {
                let wr = &cell.w[r * in_dim..(r + 1) * in_dim];
                let ur = &cell.u[r * h_dim..(r + 1) * h_dim];
                for b in 0..batch {
                    let mut s = cell.b[r] + dot(wr, &input[b * in_dim..(b + 1) * in_dim]);
                    if t > 0 {
                        s += dot(ur, &h[b * h_dim..(b + 1) * h_dim]);
                    }
                    pre[b * rows + r] = s;
                }
            }
            let mut gates = pre;
            let mut c_new = vec![0.0; batch * h_dim];
            let mut tanh_c = vec![0.0; batch * h_dim];
            let mut h_new = vec![0.0; batch * h_dim];
            for b in 0..batch {
                let g = &mut gates[b * rows..(b + 1) * rows];
                for k in 0..h_dim {
                    g[k] = sigmoid(g[k]);
                    g[h_dim + k] = sigmoid(g[h_dim + k]);
                    g[2 * h_dim + k] = g[2 * h_dim + k].tanh();
                    g[3 * h_dim + k] = sigmoid(g[3 * h_dim + k]);
                    let idx = b * h_dim + k;
                    let cn = g[h_dim + k] * c[idx] + g[k] * g[2 * h_dim + k];
                    c_new[idx] = cn;
                    tanh_c[idx] = cn.tanh();
                    h_new[idx] = g[3 * h_dim + k] * tanh_c[idx];
                }
            }
            cache.push(StepCache {
                input,
                h_prev: std::mem::replace(&mut h, h_new.clone()),
                c_prev: std::mem::replace(&mut c, c_new),
                gates,
                tanh_c,
                h: h_new,
            });
        }
        layers.push(cache);
    }

    let top = &layers.last().expect("at least one layer").last().expect("at least one step").h;
    let hid = params.layers.last().unwrap().hidden;
    let out_dim = params.head_b.len();
    let mut output = vec![0.0; batch * out_dim];
    for j in 0..out_dim {
        let wj = &params.head_w[j * hid..(j + 1) * hid];
        for b in 0..batch {
            output[b * out_dim + j] = params.head_b[j] + dot(wj, &top[b * hid..(b + 1) * hid]);
        }
    }
    ForwardCache { batch, layers, output }
}

/// Mean over the batch of per-sample mean squared error.
pub(crate) fn batch_mse(output: &[f64], targets: &[f64]) -> f64 {
    let n = output.len() as f64;
    output.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

/// Loss and exact gradients of the mean batch MSE.
pub(crate) fn loss_and_grad(params: &NetParams, inputs: &[f64], targets: &[f64], batch: usize) -> (f64, Gradients) {
    let cache = forward(params, inputs, batch);
    let loss = batch_mse(&cache.output, targets);
    (loss, backward(params, &cache, targets))
}

pub(crate) fn backward(params: &NetParams, cache: &ForwardCache, targets: &[f64]) -> Gradients {
    let batch = cache.batch;
    let out_dim = params.head_b.len();
    let mut grads = params.zeros_like();
    let scale = 2.0 / cache.output.len() as f64;
    let dy: Vec<f64> = cache
        .output
        .iter()
        .zip(targets)
        .map(|(p, t)| scale * (p - t))
        .collect();

    let n_layers = params.layers.len();
    let steps = cache.layers[0].len();
    let hid = params.layers[n_layers - 1].hidden;
    let top_h = &cache.layers[n_layers - 1][steps - 1].h;

    // dense head
    let mut dh_top = vec![0.0; batch * hid];
    for j in 0..out_dim {
        let wj = &params.head_w[j * hid..(j + 1) * hid];
        let gwj = &mut grads.head_w[j * hid..(j + 1) * hid];
        for b in 0..batch {
            let d = dy[b * out_dim + j];
            grads.head_b[j] += d;
            axpy(gwj, d, &top_h[b * hid..(b + 1) * hid]);
            axpy(&mut dh_top[b * hid..(b + 1) * hid], d, wj);
        }
    }

    // External gradient into each step's hidden state, per layer.
    let mut dh_ext: Vec<Vec<f64>> = vec![vec![0.0; batch * hid]; steps];
    dh_ext[steps - 1] = dh_top;

    for li in (0..n_layers).rev() {
        let cell = &params.layers[li];
        let g = &mut grads.layers[li];
        let h_dim = cell.hidden;
        let in_dim = cell.input_dim;
        let rows = 4 * h_dim;
        let need_input_grad = li > 0;
        let mut d_input: Vec<Vec<f64>> = if need_input_grad {
            vec![vec![0.0; batch * in_dim]; steps]
        } else {
            Vec::new()
        };
        let mut dh_carry = vec![0.0; batch * h_dim];
        let mut dc_carry = vec![0.0; batch * h_dim];
        let mut dpre = vec![0.0; batch * rows];
        for t in (0..steps).rev() {
            let sc = &cache.layers[li][t];
            for b in 0..batch {
                let gt = &sc.gates[b * rows..(b + 1) * rows];
                let dp = &mut dpre[b * rows..(b + 1) * rows];
                for k in 0..h_dim {
                    let idx = b * h_dim + k;
                    let (i, f, cg, o) = (gt[k], gt[h_dim + k], gt[2 * h_dim + k], gt[3 * h_dim + k]);
                    let dh = dh_ext[t][idx] + dh_carry[idx];
                    let tc = sc.tanh_c[idx];
                    let dc = dc_carry[idx] + dh * o * (1.0 - tc * tc);
                    dp[k] = dc * cg * i * (1.0 - i);
                    dp[h_dim + k] = dc * sc.c_prev[idx] * f * (1.0 - f);
                    dp[2 * h_dim + k] = dc * i * (1.0 - cg * cg);
                    dp[3 * h_dim + k] = dh * tc * o * (1.0 - o);
                    dc_carry[idx] = dc * f;
                }
            }
            dh_carry.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..rows {
                let wr = &cell.w[r * in_dim..(r + 1) * in_dim];
                let ur = &cell.u[r * h_dim..(r + 1) * h_dim];
                for b in 0..batch {
                    let d = dpre[b * rows + r];
                    if d == 0.0 {
                        continue;
                    }
                    g.b[r] += d;
                    axpy(&mut g.w[r * in_dim..(r + 1) * in_dim], d, &sc.input[b * in_dim..(b + 1) * in_dim]);
                    if need_input_grad {
                        axpy(&mut d_input[t][b * in_dim..(b + 1) * in_dim], d, wr);
                    }
                    if t > 0 {
                        axpy(&mut g.u[r * h_dim..(r + 1) * h_dim], d, &sc.h_prev[b * h_dim..(b + 1) * h_dim]);
                        axpy(&mut dh_carry[b * h_dim..(b + 1) * h_dim], d, ur);
                    }
                }
            }
        }
        if need_input_grad {
            dh_ext = d_input;
        }
    }
    grads
}
