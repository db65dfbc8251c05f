//! Full training runs: collect whole episodes into a rollout buffer, update
//! with PPO whenever enough steps have accumulated, and record the learning
//! curve. Fully reproducible from the seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity::Activity;
use crate::rl::episode::{run_episode, RewardParams, RlError, Transition};
use crate::rl::net::{init_policy, PolicyParams};
use crate::rl::ppo::{PpoHyper, PpoOptimizer, PpoStats};

/// Everything a training run needs besides the activity and the seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub episodes: usize,
    pub feature_dim: usize,
    pub hidden_dim: usize,
    pub reward: RewardParams,
    pub ppo: PpoHyper,
    pub mask_invalid: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 512,
            feature_dim: 512,
            hidden_dim: 128,
            reward: RewardParams::default(),
            ppo: PpoHyper::default(),
            mask_invalid: false,
        }
    }
}

/// Per-episode totals of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub activity: String,
    pub seed: u64,
    pub totals: Vec<f64>,
    pub steps: Vec<u32>,
    pub successes: Vec<bool>,
}

impl LearningCurve {
    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    /// Mean total reward over the last `window` episodes (or all of them if
    /// the curve is shorter). The paper-style selection metric.
    pub fn final_window_mean(&self, window: usize) -> f64 {
        if self.totals.is_empty() {
            return f64::NEG_INFINITY;
        }
        let start = self.totals.len().saturating_sub(window);
        let tail = &self.totals[start..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub curve: LearningCurve,
    pub params: PolicyParams,
    pub updates: Vec<PpoStats>,
}

/// Train from scratch.
pub fn train(activity: &Activity, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome, RlError> {
    train_from(activity, cfg, seed, None)
}

/// Train starting from the given parameters (used by policy transplants), or
/// from fresh orthogonal-initialized weights when `init` is `None`.
pub fn train_from(
    activity: &Activity,
    cfg: &TrainConfig,
    seed: u64,
    init: Option<PolicyParams>,
) -> Result<TrainOutcome, RlError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = match init {
        Some(p) => {
            assert_eq!(p.num_objects(), activity.scene.len(), "object head must match the scene");
            assert_eq!(p.feature_dim(), cfg.feature_dim, "feature dim mismatch");
            p
        }
        None => init_policy(cfg.feature_dim, cfg.hidden_dim, activity.scene.len(), &mut rng),
    };
    let mut params = params;
    let mut optimizer = PpoOptimizer::new(cfg.ppo, params.n_params());
    let mut curve = LearningCurve {
        activity: activity.name.clone(),
        seed,
        totals: Vec::with_capacity(cfg.episodes),
        steps: Vec::with_capacity(cfg.episodes),
        successes: Vec::with_capacity(cfg.episodes),
    };
    let mut updates = Vec::new();
    let mut buffer: Vec<Transition> = Vec::with_capacity(cfg.ppo.rollout_steps + 64);

    for _ in 0..cfg.episodes {
        let (transitions, summary) =
            run_episode(activity, &params, cfg.reward, cfg.mask_invalid, &mut rng)?;
        curve.totals.push(summary.total);
        curve.steps.push(summary.steps);
        curve.successes.push(summary.success);
        buffer.extend(transitions);
        // Flush at episode boundaries once the rollout target is reached; the
        // final transition is always terminal, so no bootstrap is needed.
        if buffer.len() >= cfg.ppo.rollout_steps {
            let stats = optimizer.update(&mut params, &buffer, 0.0, &mut rng)?;
            updates.push(stats);
            buffer.clear();
        }
    }
    Ok(TrainOutcome { curve, params, updates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::tests::window_activity;

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            episodes: 12,
            feature_dim: 128,
            hidden_dim: 32,
            ppo: PpoHyper { rollout_steps: 128, ..PpoHyper::default() },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn equal_seeds_give_bitwise_equal_curves() {
        let activity = window_activity();
        let cfg = quick_cfg();
        let a = train(&activity, &cfg, 7).unwrap();
        let b = train(&activity, &cfg, 7).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn different_seeds_differ() {
        let activity = window_activity();
        let cfg = quick_cfg();
        let a = train(&activity, &cfg, 1).unwrap();
        let b = train(&activity, &cfg, 2).unwrap();
        assert_ne!(a.curve.totals, b.curve.totals);
    }

    #[test]
    fn curve_totals_respect_reward_bounds() {
        let activity = window_activity();
        let cfg = quick_cfg();
        let outcome = train(&activity, &cfg, 3).unwrap();
        assert_eq!(outcome.curve.len(), cfg.episodes);
        for (&total, &steps) in outcome.curve.totals.iter().zip(&outcome.curve.steps) {
            assert!(total >= -64.0 && total <= 200.0, "total {total}");
            assert!(steps >= 1 && steps <= 64);
        }
    }

    #[test]
    fn final_window_mean_uses_the_tail() {
        let curve = LearningCurve {
            activity: "x".into(),
            seed: 0,
            totals: vec![0.0, 0.0, 100.0, 200.0],
            steps: vec![1; 4],
            successes: vec![false; 4],
        };
        assert_eq!(curve.final_window_mean(2), 150.0);
        assert_eq!(curve.final_window_mean(100), 75.0);
    }
}
