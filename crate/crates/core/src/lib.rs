//! Learning-to-exploit laboratory.
//!
//! A base policy is meta-trained against automatically generated opponents
//! (hard-to-exploit and style-diverse) so that a handful of policy-gradient
//! steps at test time specialize it to an unknown opponent. The crate ships
//! four small zero-sum games (rock-paper-scissors, Leduc, BigLeduc and a grid
//! soccer), a hand-differentiated MLP policy, REINFORCE machinery, an MMD
//! style metric, tabular CFR and the baselines used for comparison.

pub mod error;
pub mod eval;
pub mod games;
pub mod io;
pub mod meta;
pub mod mmd;
pub mod osg;
pub mod policy;
pub mod rng;
pub mod rollout;
pub mod stats;
pub mod zoo;

pub use error::{L2eError, Result};
pub use games::{ActionSet, GameId, GameSpec, GameState, Observation, Player, StepOutcome};
pub use policy::{ActionDistribution, GradientVector, PolicyParams};
pub use rollout::{MdpView, Opponent, Trajectory};
pub use stats::ReturnStat;
