//! The actor-critic network: a shared two-layer tanh trunk feeding a
//! primitive head, an object head, and a value head. Forward and backward
//! passes are written out by hand; no autograd.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::world::PRIMITIVE_COUNT;

/// A dense layer with row-major weights: `w[i * fan_out + j]` connects input
/// `i` to output `j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Dense {
        Dense { fan_in, fan_out, w: vec![0.0; fan_in * fan_out], b: vec![0.0; fan_out] }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.fan_in);
        let mut out = self.b.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &self.w[i * self.fan_out..(i + 1) * self.fan_out];
            for (o, wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
        out
    }

    /// Accumulate `d_out` into this layer's gradient buffers and return the
    /// gradient with respect to the layer input.
    pub fn backward(&self, x: &[f64], d_out: &[f64], grad: &mut Dense) -> Vec<f64> {
        debug_assert_eq!(d_out.len(), self.fan_out);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                let row = &mut grad.w[i * self.fan_out..(i + 1) * self.fan_out];
                for (g, &d) in row.iter_mut().zip(d_out) {
                    *g += xi * d;
                }
            }
        }
        for (g, &d) in grad.b.iter_mut().zip(d_out) {
            *g += d;
        }
        let mut d_in = vec![0.0; self.fan_in];
        for (i, di) in d_in.iter_mut().enumerate() {
            let row = &self.w[i * self.fan_out..(i + 1) * self.fan_out];
            *di = row.iter().zip(d_out).map(|(w, d)| w * d).sum();
        }
        d_in
    }
}

/// All weights of the featurizer-trunk-heads network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub trunk1: Dense,
    pub trunk2: Dense,
    pub prim_head: Dense,
    pub obj_head: Dense,
    pub value_head: Dense,
}

impl PolicyParams {
    pub fn feature_dim(&self) -> usize {
        self.trunk1.fan_in
    }

    pub fn hidden_dim(&self) -> usize {
        self.trunk2.fan_out
    }

    pub fn num_objects(&self) -> usize {
        self.obj_head.fan_out
    }

    pub fn zeros(feature_dim: usize, hidden_dim: usize, num_objects: usize) -> PolicyParams {
        PolicyParams {
            trunk1: Dense::zeros(feature_dim, hidden_dim),
            trunk2: Dense::zeros(hidden_dim, hidden_dim),
            prim_head: Dense::zeros(hidden_dim, PRIMITIVE_COUNT),
            obj_head: Dense::zeros(hidden_dim, num_objects),
            value_head: Dense::zeros(hidden_dim, 1),
        }
    }

    pub fn zeros_like(&self) -> PolicyParams {
        PolicyParams::zeros(self.feature_dim(), self.hidden_dim(), self.num_objects())
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    fn layers(&self) -> [&Dense; 5] {
        [&self.trunk1, &self.trunk2, &self.prim_head, &self.obj_head, &self.value_head]
    }

    fn layers_mut(&mut self) -> [&mut Dense; 5] {
        [
            &mut self.trunk1,
            &mut self.trunk2,
            &mut self.prim_head,
            &mut self.obj_head,
            &mut self.value_head,
        ]
    }

    /// Visit every parameter in a fixed order (layer by layer, weights then
    /// biases).
    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        for layer in self.layers() {
            layer.w.iter().for_each(|&v| f(v));
            layer.b.iter().for_each(|&v| f(v));
        }
    }

    /// Mutable visit in the same fixed order as [`PolicyParams::for_each`].
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for layer in self.layers_mut() {
            layer.w.iter_mut().for_each(|v| f(v));
            layer.b.iter_mut().for_each(|v| f(v));
        }
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }
}

/// Intermediate activations of one forward pass, kept for backprop.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub prim_logits: Vec<f64>,
    pub obj_logits: Vec<f64>,
    pub value: f64,
}

/// Deterministic forward pass. Softmax is applied downstream, not here.
pub fn forward(params: &PolicyParams, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let cache = forward_cached(params, x);
    (cache.prim_logits, cache.obj_logits, cache.value)
}

pub fn forward_cached(params: &PolicyParams, x: &[f64]) -> ForwardCache {
    let mut h1 = params.trunk1.forward(x);
    h1.iter_mut().for_each(|v| *v = v.tanh());
    let mut h2 = params.trunk2.forward(&h1);
    h2.iter_mut().for_each(|v| *v = v.tanh());
    let prim_logits = params.prim_head.forward(&h2);
    let obj_logits = params.obj_head.forward(&h2);
    let value = params.value_head.forward(&h2)[0];
    ForwardCache { h1, h2, prim_logits, obj_logits, value }
}

/// Backpropagate head gradients through the network, accumulating into
/// `grads` (a zero-initialized mirror of the parameters).
pub fn backward(
    params: &PolicyParams,
    x: &[f64],
    cache: &ForwardCache,
    d_prim: &[f64],
    d_obj: &[f64],
    d_value: f64,
    grads: &mut PolicyParams,
) {
    let mut d_h2 = params.prim_head.backward(&cache.h2, d_prim, &mut grads.prim_head);
    let d_h2_obj = params.obj_head.backward(&cache.h2, d_obj, &mut grads.obj_head);
    let d_h2_val = params.value_head.backward(&cache.h2, &[d_value], &mut grads.value_head);
    for i in 0..d_h2.len() {
        d_h2[i] += d_h2_obj[i] + d_h2_val[i];
    }
    // tanh' = 1 - tanh^2
    for (d, h) in d_h2.iter_mut().zip(&cache.h2) {
        *d *= 1.0 - h * h;
    }
    let mut d_h1 = params.trunk2.backward(&cache.h1, &d_h2, &mut grads.trunk2);
    for (d, h) in d_h1.iter_mut().zip(&cache.h1) {
        *d *= 1.0 - h * h;
    }
    params.trunk1.backward(x, &d_h1, &mut grads.trunk1);
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

/// Orthonormalize the rows of `m` in place (modified Gram-Schmidt). Requires
/// rows <= cols.
fn orthonormalize_rows(m: &mut [Vec<f64>], rng: &mut impl Rng) {
    let cols = m[0].len();
    for i in 0..m.len() {
        loop {
            for j in 0..i {
                let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                for k in 0..cols {
                    m[i][k] -= dot * m[j][k];
                }
            }
            let norm: f64 = m[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-8 {
                m[i].iter_mut().for_each(|v| *v /= norm);
                break;
            }
            // Degenerate draw; resample the row.
            m[i] = (0..cols).map(|_| StandardNormal.sample(rng)).collect();
        }
    }
}

/// Fill a dense layer with scaled orthogonal-like weights: random Gaussian
/// rows (or columns, whichever side is smaller) made orthonormal, then scaled
/// by `gain`. Biases stay zero.
pub fn init_dense_orthogonal(layer: &mut Dense, gain: f64, rng: &mut impl Rng) {
    let (fan_in, fan_out) = (layer.fan_in, layer.fan_out);
    // Work on a (fan_out x fan_in) matrix; orthonormalize the smaller side.
    if fan_out <= fan_in {
        let mut m = gaussian_matrix(fan_out, fan_in, rng);
        orthonormalize_rows(&mut m, rng);
        for i in 0..fan_in {
            for j in 0..fan_out {
                layer.w[i * fan_out + j] = gain * m[j][i];
            }
        }
    } else {
        let mut m = gaussian_matrix(fan_in, fan_out, rng);
        orthonormalize_rows(&mut m, rng);
        for i in 0..fan_in {
            for j in 0..fan_out {
                layer.w[i * fan_out + j] = gain * m[i][j];
            }
        }
    }
    layer.b.fill(0.0);
}

/// Gain applied to freshly initialized actor/critic output heads.
pub const HEAD_INIT_GAIN: f64 = 0.01;

/// Initialize a full network: orthogonal trunk at gain 1, heads at gain 0.01.
pub fn init_policy(
    feature_dim: usize,
    hidden_dim: usize,
    num_objects: usize,
    rng: &mut impl Rng,
) -> PolicyParams {
    let mut params = PolicyParams::zeros(feature_dim, hidden_dim, num_objects);
    init_dense_orthogonal(&mut params.trunk1, 1.0, rng);
    init_dense_orthogonal(&mut params.trunk2, 1.0, rng);
    init_dense_orthogonal(&mut params.prim_head, HEAD_INIT_GAIN, rng);
    init_dense_orthogonal(&mut params.obj_head, HEAD_INIT_GAIN, rng);
    init_dense_orthogonal(&mut params.value_head, HEAD_INIT_GAIN, rng);
    params
}
