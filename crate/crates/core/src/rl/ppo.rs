//! PPO-style clipped policy-gradient updates over the actor-critic network,
//! with generalized advantage estimation and an Adam optimizer. Gradients of
//! the full loss (clipped surrogate + value MSE - entropy bonus) are derived
//! by hand and verified against finite differences in the test suite.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rl::dist::{entropy, entropy_grad, log_softmax_at, softmax, MaskedJoint};
use crate::rl::episode::{RlError, Transition};
use crate::rl::net::{backward, forward_cached, PolicyParams};

/// PPO hyperparameters. Defaults are the widely used ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoHyper {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub grad_clip: f64,
    /// Environment steps collected per update.
    pub rollout_steps: usize,
}

impl Default for PpoHyper {
    fn default() -> Self {
        PpoHyper {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 64,
            learning_rate: 3e-4,
            vf_coef: 0.5,
            ent_coef: 0.01,
            grad_clip: 0.5,
            rollout_steps: 512,
        }
    }
}

/// Means over every minibatch step of one update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Generalized advantage estimation over a rollout. `bootstrap` is the value
/// estimate of the state following the last transition (0 when it ended an
/// episode).
pub fn compute_gae(
    transitions: &[Transition],
    gamma: f64,
    lambda: f64,
    bootstrap: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = transitions.len();
    let mut advantages = vec![0.0; n];
    let mut returns = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let tr = &transitions[t];
        let next_value = if tr.done {
            0.0
        } else if t + 1 < n {
            transitions[t + 1].value
        } else {
            bootstrap
        };
        let delta = tr.reward + gamma * next_value - tr.value;
        gae = delta + gamma * lambda * if tr.done { 0.0 } else { gae };
        advantages[t] = gae;
        returns[t] = gae + tr.value;
    }
    (advantages, returns)
}

/// One training sample as seen by the loss.
#[derive(Clone, Copy, Debug)]
pub struct PpoSample<'a> {
    pub features: &'a [f64],
    pub prim: usize,
    pub obj: usize,
    pub old_logprob: f64,
    pub advantage: f64,
    pub ret: f64,
    pub mask: Option<&'a [bool]>,
}

struct SampleEval {
    logprob: f64,
    entropy: f64,
    value: f64,
}

/// The per-sample loss: -min(surr1, surr2) + vf_coef * (v - ret)^2
/// - ent_coef * H.
fn sample_loss(eval: &SampleEval, s: &PpoSample, hyper: &PpoHyper) -> (f64, f64, bool) {
    let ratio = (eval.logprob - s.old_logprob).exp();
    let surr1 = ratio * s.advantage;
    let surr2 = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip) * s.advantage;
    let surrogate = surr1.min(surr2);
    let v_err = eval.value - s.ret;
    let loss = -surrogate + hyper.vf_coef * v_err * v_err - hyper.ent_coef * eval.entropy;
    let clipped = (ratio - 1.0).abs() > hyper.clip;
    (loss, surrogate, clipped)
}

/// Mean loss of a minibatch. This is the exact function whose analytic
/// gradient `minibatch_loss_and_grads` computes; the gradient check runs
/// central finite differences over it.
pub fn minibatch_loss(
    params: &PolicyParams,
    samples: &[PpoSample],
    hyper: &PpoHyper,
) -> f64 {
    let mut total = 0.0;
    for s in samples {
        let cache = forward_cached(params, s.features);
        let eval = match s.mask {
            Some(mask) => {
                let joint = MaskedJoint::new(&cache.prim_logits, &cache.obj_logits, mask)
                    .expect("stored masks admit the taken action");
                SampleEval {
                    logprob: joint.logprob(s.prim, s.obj),
                    entropy: joint.entropy(),
                    value: cache.value,
                }
            }
            None => {
                let logprob = log_softmax_at(&cache.prim_logits, s.prim)
                    + log_softmax_at(&cache.obj_logits, s.obj);
                let h = entropy(&softmax(&cache.prim_logits)) + entropy(&softmax(&cache.obj_logits));
                SampleEval { logprob, entropy: h, value: cache.value }
            }
        };
        total += sample_loss(&eval, s, hyper).0;
    }
    total / samples.len() as f64
}

/// Mean loss, its gradient, and summary stats for one minibatch.
pub fn minibatch_loss_and_grads(
    params: &PolicyParams,
    samples: &[PpoSample],
    hyper: &PpoHyper,
) -> (f64, PolicyParams, PpoStats) {
    let m = samples.len() as f64;
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    let mut stats = PpoStats::default();
    for s in samples {
        let cache = forward_cached(params, s.features);
        let (eval, d_prim, d_obj) = match s.mask {
            Some(mask) => {
                let joint = MaskedJoint::new(&cache.prim_logits, &cache.obj_logits, mask)
                    .expect("stored masks admit the taken action");
                let eval = SampleEval {
                    logprob: joint.logprob(s.prim, s.obj),
                    entropy: joint.entropy(),
                    value: cache.value,
                };
                let (loss, surrogate, clipped) = sample_loss(&eval, s, hyper);
                total += loss;
                stats.surrogate += surrogate;
                stats.value_loss += (eval.value - s.ret) * (eval.value - s.ret);
                stats.entropy += eval.entropy;
                stats.clip_fraction += clipped as u8 as f64;

                let d_lp = policy_grad_coefficient(&eval, s, hyper) / m;
                let (glp_u, glp_v) = joint.logprob_grads(s.prim, s.obj);
                let (ge_u, ge_v) = joint.entropy_grads();
                let d_prim: Vec<f64> = glp_u
                    .iter()
                    .zip(&ge_u)
                    .map(|(lp, ge)| d_lp * lp - hyper.ent_coef / m * ge)
                    .collect();
                let d_obj: Vec<f64> = glp_v
                    .iter()
                    .zip(&ge_v)
                    .map(|(lp, ge)| d_lp * lp - hyper.ent_coef / m * ge)
                    .collect();
                (eval, d_prim, d_obj)
            }
            None => {
                let pu = softmax(&cache.prim_logits);
                let pv = softmax(&cache.obj_logits);
                let eval = SampleEval {
                    logprob: log_softmax_at(&cache.prim_logits, s.prim)
                        + log_softmax_at(&cache.obj_logits, s.obj),
                    entropy: entropy(&pu) + entropy(&pv),
                    value: cache.value,
                };
                let (loss, surrogate, clipped) = sample_loss(&eval, s, hyper);
                total += loss;
                stats.surrogate += surrogate;
                stats.value_loss += (eval.value - s.ret) * (eval.value - s.ret);
                stats.entropy += eval.entropy;
                stats.clip_fraction += clipped as u8 as f64;

                let d_lp = policy_grad_coefficient(&eval, s, hyper) / m;
                let he_u = entropy_grad(&pu);
                let he_v = entropy_grad(&pv);
                let d_prim: Vec<f64> = (0..pu.len())
                    .map(|i| {
                        let one_hot = (i == s.prim) as u8 as f64;
                        d_lp * (one_hot - pu[i]) - hyper.ent_coef / m * he_u[i]
                    })
                    .collect();
                let d_obj: Vec<f64> = (0..pv.len())
                    .map(|j| {
                        let one_hot = (j == s.obj) as u8 as f64;
                        d_lp * (one_hot - pv[j]) - hyper.ent_coef / m * he_v[j]
                    })
                    .collect();
                (eval, d_prim, d_obj)
            }
        };
        let d_value = 2.0 * hyper.vf_coef * (eval.value - s.ret) / m;
        backward(params, s.features, &cache, &d_prim, &d_obj, d_value, &mut grads);
    }
    stats.surrogate /= m;
    stats.value_loss /= m;
    stats.entropy /= m;
    stats.clip_fraction /= m;
    stats.minibatches = 1;
    (total / m, grads, stats)
}

/// d(-min(surr1, surr2))/d logprob: zero when the clipped branch is active,
/// otherwise -A * ratio.
fn policy_grad_coefficient(eval: &SampleEval, s: &PpoSample, hyper: &PpoHyper) -> f64 {
    let ratio = (eval.logprob - s.old_logprob).exp();
    let surr1 = ratio * s.advantage;
    let surr2 = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip) * s.advantage;
    if surr1 <= surr2 {
        -s.advantage * ratio
    } else {
        0.0
    }
}

/// Adam over the flattened parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    /// Compute the per-parameter step for `grads` (to be subtracted).
    pub fn step(&mut self, grads: &[f64]) -> Vec<f64> {
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut updates = vec![0.0; grads.len()];
        for i in 0..grads.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            updates[i] = self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        updates
    }
}

fn global_grad_norm(grads: &PolicyParams) -> f64 {
    let mut sum = 0.0;
    grads.for_each(|g| sum += g * g);
    sum.sqrt()
}

fn flatten(params: &PolicyParams) -> Vec<f64> {
    let mut out = Vec::with_capacity(params.n_params());
    params.for_each(|v| out.push(v));
    out
}

/// PPO update state that persists across rollouts (Adam moments).
pub struct PpoOptimizer {
    pub hyper: PpoHyper,
    adam: Adam,
}

impl PpoOptimizer {
    pub fn new(hyper: PpoHyper, n_params: usize) -> PpoOptimizer {
        let adam = Adam::new(n_params, hyper.learning_rate);
        PpoOptimizer { hyper, adam }
    }

    /// Run `epochs` passes of shuffled minibatch updates over the batch.
    /// Advantages are normalized once per batch.
    pub fn update(
        &mut self,
        params: &mut PolicyParams,
        batch: &[Transition],
        bootstrap: f64,
        rng: &mut impl Rng,
    ) -> Result<PpoStats, RlError> {
        assert!(!batch.is_empty(), "ppo update needs a nonempty batch");
        let hyper = self.hyper;
        let (mut advantages, returns) = compute_gae(batch, hyper.gamma, hyper.lambda, bootstrap);
        normalize_in_place(&mut advantages);

        let n = batch.len();
        let mut indices: Vec<usize> = (0..n).collect();
        let mut totals = PpoStats::default();
        let mut minibatch_index = 0usize;
        for _ in 0..hyper.epochs {
            // Fisher-Yates shuffle from the training RNG.
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                indices.swap(i, j);
            }
            for chunk in indices.chunks(hyper.minibatch.max(1)) {
                let samples: Vec<PpoSample> = chunk
                    .iter()
                    .map(|&i| PpoSample {
                        features: &batch[i].features,
                        prim: batch[i].prim,
                        obj: batch[i].obj,
                        old_logprob: batch[i].logprob,
                        advantage: advantages[i],
                        ret: returns[i],
                        mask: batch[i].mask.as_deref(),
                    })
                    .collect();
                let (loss, mut grads, stats) = minibatch_loss_and_grads(params, &samples, &hyper);
                if !loss.is_finite() {
                    return Err(RlError::NonFiniteLoss { minibatch: minibatch_index });
                }
                let norm = global_grad_norm(&grads);
                if norm > hyper.grad_clip {
                    let scale = hyper.grad_clip / norm;
                    grads.for_each_mut(|g| *g *= scale);
                }
                let updates = self.adam.step(&flatten(&grads));
                let mut k = 0;
                params.for_each_mut(|p| {
                    *p -= updates[k];
                    k += 1;
                });
                totals.surrogate += stats.surrogate;
                totals.value_loss += stats.value_loss;
                totals.entropy += stats.entropy;
                totals.clip_fraction += stats.clip_fraction;
                totals.minibatches += 1;
                minibatch_index += 1;
            }
        }
        let count = totals.minibatches as f64;
        totals.surrogate /= count;
        totals.value_loss /= count;
        totals.entropy /= count;
        totals.clip_fraction /= count;
        Ok(totals)
    }
}

/// One-shot PPO update with fresh optimizer state.
pub fn ppo_update(
    params: &mut PolicyParams,
    batch: &[Transition],
    hyper: &PpoHyper,
    rng: &mut impl Rng,
) -> Result<PpoStats, RlError> {
    PpoOptimizer::new(*hyper, params.n_params()).update(params, batch, 0.0, rng)
}

fn normalize_in_place(values: &mut [f64]) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    values.iter_mut().for_each(|v| *v = (*v - mean) / std);
}
