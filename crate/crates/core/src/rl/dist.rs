//! Categorical distribution math shared by action sampling and the PPO
//! update: stable softmax, log-probabilities, entropies, and the masked
//! joint distribution used when invalid actions are filtered out.

use rand::Rng;

/// Stable softmax probabilities.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// log softmax(logits)[index], computed stably.
pub fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse: f64 = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits[index] - lse
}

/// Shannon entropy of a probability vector.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// d entropy / d logit_i for a softmax distribution: -p_i (ln p_i + H).
pub fn entropy_grad(probs: &[f64]) -> Vec<f64> {
    let h = entropy(probs);
    probs.iter().map(|&p| if p > 0.0 { -p * (p.ln() + h) } else { 0.0 }).collect()
}

/// Sample an index from categorical probabilities.
pub fn sample_categorical(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

/// Joint categorical over (primitive, object) pairs with logits
/// `u_i + v_j`, restricted to pairs whose mask bit is set. Row-major mask
/// and probabilities: index `i * v.len() + j`.
pub struct MaskedJoint {
    pub probs: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl MaskedJoint {
    /// Returns `None` when the mask admits no pair at all.
    pub fn new(u: &[f64], v: &[f64], mask: &[bool]) -> Option<MaskedJoint> {
        assert_eq!(mask.len(), u.len() * v.len());
        if !mask.iter().any(|&m| m) {
            return None;
        }
        let mu = u.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mv = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = vec![0.0; mask.len()];
        let mut z = 0.0;
        for i in 0..u.len() {
            for j in 0..v.len() {
                if mask[i * v.len() + j] {
                    let w = ((u[i] - mu) + (v[j] - mv)).exp();
                    probs[i * v.len() + j] = w;
                    z += w;
                }
            }
        }
        probs.iter_mut().for_each(|p| *p /= z);
        Some(MaskedJoint { probs, rows: u.len(), cols: v.len() })
    }

    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.cols + j]
    }

    pub fn logprob(&self, i: usize, j: usize) -> f64 {
        self.prob(i, j).max(f64::MIN_POSITIVE).ln()
    }

    pub fn row_marginals(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.probs[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn col_marginals(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.prob(i, j)).sum())
            .collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.probs)
    }

    /// Gradients of log p(a,b) with respect to the row and column logits:
    /// one-hot minus the corresponding marginal.
    pub fn logprob_grads(&self, a: usize, b: usize) -> (Vec<f64>, Vec<f64>) {
        let mut du = self.row_marginals();
        let mut dv = self.col_marginals();
        du.iter_mut().for_each(|m| *m = -*m);
        dv.iter_mut().for_each(|m| *m = -*m);
        du[a] += 1.0;
        dv[b] += 1.0;
        (du, dv)
    }

    /// Gradients of the joint entropy with respect to row and column logits.
    pub fn entropy_grads(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.entropy();
        let rows = self.row_marginals();
        let cols = self.col_marginals();
        let mut du = vec![0.0; self.rows];
        for (i, du_i) in du.iter_mut().enumerate() {
            let s: f64 = (0..self.cols)
                .map(|j| {
                    let p = self.prob(i, j);
                    if p > 0.0 { p * p.ln() } else { 0.0 }
                })
                .sum();
            *du_i = -s - rows[i] * h;
        }
        let mut dv = vec![0.0; self.cols];
        for (j, dv_j) in dv.iter_mut().enumerate() {
            let s: f64 = (0..self.rows)
                .map(|i| {
                    let p = self.prob(i, j);
                    if p > 0.0 { p * p.ln() } else { 0.0 }
                })
                .sum();
            *dv_j = -s - cols[j] * h;
        }
        (du, dv)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> (usize, usize) {
        let flat = sample_categorical(&self.probs, rng);
        (flat / self.cols, flat % self.cols)
    }
}
