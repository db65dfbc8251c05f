//! The learning core: hashed text featurization, the actor-critic network,
//! the episode loop and reward function, and the PPO trainer.

pub mod dist;
pub mod episode;
pub mod net;
pub mod ppo;
pub mod train;

pub use episode::{
    action_mask, reward, run_episode, sample_action, Episode, EpisodeSummary, RewardParams,
    RlError, StepOutcome, Transition,
};
pub use net::{forward, forward_cached, init_policy, Dense, ForwardCache, PolicyParams};
pub use ppo::{
    compute_gae, minibatch_loss, minibatch_loss_and_grads, ppo_update, PpoHyper, PpoOptimizer,
    PpoSample, PpoStats,
};
pub use train::{train, train_from, LearningCurve, TrainConfig, TrainOutcome};

use crate::embed::{accumulate_ngrams, l2_normalize, tokenize};
use crate::text::{GoalText, StateText};

/// Default dimension of policy feature vectors.
pub const DEFAULT_FEATURE_DIM: usize = 512;

/// Hash state and goal text into one fixed-dimension feature vector. State
/// and goal n-grams live in distinct namespaces (`s:` / `g:` prefixes); the
/// result is L2-normalized and fully deterministic.
pub fn featurize(state_text: &StateText, goal_text: &GoalText, dim: usize) -> Vec<f64> {
    assert!(dim >= 2, "feature dimension must be at least 2");
    let mut v = vec![0.0; dim];
    let state_tokens = tokenize(state_text.as_str());
    let goal_tokens = tokenize(goal_text.as_str());
    accumulate_ngrams(state_tokens.as_slice(), "s:", true, &mut v);
    accumulate_ngrams(goal_tokens.as_slice(), "g:", true, &mut v);
    l2_normalize(&mut v);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::fnv1a64;

    #[test]
    fn featurize_is_deterministic() {
        let s = StateText("window_0 is open.".into());
        let g = GoalText("For every window, the following is NOT true: the window is open.".into());
        assert_eq!(featurize(&s, &g, 64), featurize(&s, &g, 64));
    }

    #[test]
    fn featurize_empty_texts_is_zero() {
        let v = featurize(&StateText(String::new()), &GoalText(String::new()), 16);
        assert_eq!(v, vec![0.0; 16]);
    }

    #[test]
    fn featurize_namespaces_state_and_goal() {
        // The same sentence on either side must produce different features.
        let text = "window_0 is open.";
        let a = featurize(&StateText(text.into()), &GoalText(String::new()), 64);
        let b = featurize(&StateText(String::new()), &GoalText(text.into()), 64);
        assert_ne!(a, b);
    }

    #[test]
    fn featurize_matches_the_hash_oracle() {
        // Single token on the state side: one feature at fnv1a64("s:window")
        // % dim with sign from bit 63, then normalized to unit length.
        let dim = 32;
        let v = featurize(&StateText("window".into()), &GoalText(String::new()), dim);
        let h = fnv1a64(b"s:window");
        let idx = (h % dim as u64) as usize;
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        for (i, &x) in v.iter().enumerate() {
            if i == idx {
                assert_eq!(x, sign);
            } else {
                assert_eq!(x, 0.0);
            }
        }
    }
}
