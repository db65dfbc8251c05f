//! The episode loop: reset to the activity's initial state, repeatedly
//! featurize the rendered text, run the policy, apply the sampled action, and
//! hand out rewards until the goal is met or the step cap is reached.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::Activity;
use crate::goal::{progress, Fraction, GroundedGoal};
use crate::rl::dist::{log_softmax_at, sample_categorical, softmax, MaskedJoint};
use crate::rl::net::{forward_cached, PolicyParams};
use crate::text::{render_state, RenderError};
use crate::world::{
    apply_action, executable, Action, ObjectIdx, Primitive, WorldError, WorldState,
    PRIMITIVE_COUNT,
};

/// Reward function constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardParams {
    /// Scale applied to subgoal progress.
    pub c: f64,
    /// Reward of a non-executable action.
    pub invalid_penalty: f64,
    /// Episode step cap.
    pub max_steps: u32,
}

impl Default for RewardParams {
    fn default() -> Self {
        RewardParams { c: 200.0, invalid_penalty: -1.0, max_steps: 64 }
    }
}

#[derive(Debug, Error)]
pub enum RlError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("non-finite network output at step {step}")]
    NonFiniteOutput { step: u32 },
    #[error("non-finite loss in minibatch {minibatch}")]
    NonFiniteLoss { minibatch: usize },
}

/// One-step reward: a non-executable action costs `invalid_penalty`;
/// otherwise the change in best satisfied-subgoal fraction, scaled by `c`.
pub fn reward(
    prev: &WorldState,
    executed: bool,
    next: &WorldState,
    goal: &GroundedGoal,
    params: &RewardParams,
) -> f64 {
    if !executed {
        return params.invalid_penalty;
    }
    let before = progress(prev, goal).fraction;
    let after = progress(next, goal).fraction;
    after.diff_f64(before) * params.c
}

/// Sample a (primitive, object) action from independent categorical heads.
/// Returns the action and `log p(prim) + log p(obj)`.
pub fn sample_action(
    prim_logits: &[f64],
    obj_logits: &[f64],
    rng: &mut impl Rng,
) -> (Action, f64) {
    let prim_probs = softmax(prim_logits);
    let obj_probs = softmax(obj_logits);
    let prim = sample_categorical(&prim_probs, rng);
    let obj = sample_categorical(&obj_probs, rng);
    let logprob = log_softmax_at(prim_logits, prim) + log_softmax_at(obj_logits, obj);
    (
        Action::new(Primitive::from_index(prim).expect("primitive index in range"), ObjectIdx(obj)),
        logprob,
    )
}

/// One environment step as stored for training.
#[derive(Clone, Debug)]
pub struct Transition {
    pub features: Vec<f64>,
    pub prim: usize,
    pub obj: usize,
    pub logprob: f64,
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    /// Joint validity mask (row-major primitive x object), present only when
    /// the episode ran with invalid-action masking.
    pub mask: Option<Vec<bool>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub executed: bool,
    pub done: bool,
    pub success: bool,
}

/// Totals of a finished episode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpisodeSummary {
    pub total: f64,
    pub steps: u32,
    pub success: bool,
}

/// Stepwise episode simulator.
///
/// Progress rewards are paid against the episode's best fraction so far:
/// re-achieving a previously satisfied subgoal earns nothing, and the exact
/// rational accounting keeps every episode total inside
/// `[-max_steps * |invalid_penalty|, c]`.
pub struct Episode<'a> {
    activity: &'a Activity,
    params: RewardParams,
    state: WorldState,
    best: Fraction,
    initial: Fraction,
    penalties: u32,
    steps: u32,
    success: bool,
    done: bool,
}

impl<'a> Episode<'a> {
    pub fn new(activity: &'a Activity, params: RewardParams) -> Episode<'a> {
        let report = progress(&activity.initial, &activity.goal);
        Episode {
            activity,
            params,
            state: activity.initial.clone(),
            best: report.fraction,
            initial: report.fraction,
            penalties: 0,
            steps: 0,
            success: report.success,
            done: report.success,
        }
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn is_success(&self) -> bool {
        self.success
    }

    /// Episode total so far, computed exactly from the progress fractions:
    /// `c * (best - initial) - penalties`.
    pub fn total(&self) -> f64 {
        self.params.c * self.best.diff_f64(self.initial) - self.penalties as f64
    }

    pub fn summary(&self) -> EpisodeSummary {
        EpisodeSummary { total: self.total(), steps: self.steps, success: self.success }
    }

    pub fn step(&mut self, action: Action, rng: &mut impl Rng) -> Result<StepOutcome, WorldError> {
        debug_assert!(!self.done, "stepping a finished episode");
        let (next, executed) =
            apply_action(&self.state, &self.activity.scene, action, &self.activity.model, rng)?;
        let reward = if executed {
            let report = progress(&next, &self.activity.goal);
            if report.success {
                self.success = true;
            }
            if report.fraction > self.best {
                let gained = report.fraction.diff_f64(self.best) * self.params.c;
                self.best = report.fraction;
                gained
            } else {
                0.0
            }
        } else {
            self.penalties += 1;
            self.params.invalid_penalty
        };
        self.state = next;
        self.steps += 1;
        self.done = self.success || self.steps >= self.params.max_steps;
        Ok(StepOutcome { reward, executed, done: self.done, success: self.success })
    }
}

/// Build the joint (primitive x object) validity mask for the current state.
pub fn action_mask(state: &WorldState, activity: &Activity) -> Vec<bool> {
    let k = activity.scene.len();
    let mut mask = vec![false; PRIMITIVE_COUNT * k];
    for (pi, prim) in Primitive::ALL.iter().enumerate() {
        for obj in 0..k {
            let action = Action::new(*prim, ObjectIdx(obj));
            mask[pi * k + obj] =
                executable(state, &activity.scene, action).unwrap_or(false);
        }
    }
    mask
}

/// Run one full episode under the policy, collecting transitions for PPO.
pub fn run_episode(
    activity: &Activity,
    params: &PolicyParams,
    reward_params: RewardParams,
    mask_invalid: bool,
    rng: &mut impl Rng,
) -> Result<(Vec<Transition>, EpisodeSummary), RlError> {
    let mut episode = Episode::new(activity, reward_params);
    let mut transitions = Vec::new();
    while !episode.is_done() {
        let state_text = render_state(episode.state(), &activity.scene)?;
        let features =
            super::featurize(&state_text, &activity.goal_text, params.feature_dim());
        let cache = forward_cached(params, &features);
        if !cache.value.is_finite()
            || cache.prim_logits.iter().any(|v| !v.is_finite())
            || cache.obj_logits.iter().any(|v| !v.is_finite())
        {
            return Err(RlError::NonFiniteOutput { step: episode.steps() });
        }

        let (action, logprob, mask) = if mask_invalid {
            let mask = action_mask(episode.state(), activity);
            match MaskedJoint::new(&cache.prim_logits, &cache.obj_logits, &mask) {
                Some(joint) => {
                    let (prim, obj) = joint.sample(rng);
                    let logprob = joint.logprob(prim, obj);
                    let action = Action::new(
                        Primitive::from_index(prim).expect("primitive index in range"),
                        ObjectIdx(obj),
                    );
                    (action, logprob, Some(mask))
                }
                // Nothing is executable: fall back to the unmasked heads.
                None => {
                    let (action, logprob) =
                        sample_action(&cache.prim_logits, &cache.obj_logits, rng);
                    (action, logprob, None)
                }
            }
        } else {
            let (action, logprob) = sample_action(&cache.prim_logits, &cache.obj_logits, rng);
            (action, logprob, None)
        };

        let outcome = episode.step(action, rng)?;
        transitions.push(Transition {
            features,
            prim: action.primitive.index(),
            obj: action.object.0,
            logprob,
            reward: outcome.reward,
            value: cache.value,
            done: outcome.done,
            mask,
        });
    }
    Ok((transitions, episode.summary()))
}
