//! hearthlab: a symbolic household-activity laboratory.
//!
//! The crate simulates household scenes as sets of logical predicates,
//! renders states and goals to text, trains a text-conditioned actor-critic
//! with PPO, transplants policies between activities, and measures whether
//! description similarity predicts transfer performance.

pub mod activity;
pub mod embed;
pub mod goal;
pub mod report;
pub mod rl;
pub mod text;
pub mod transfer;
pub mod world;
