//! Opponent strategy generation: adversarial (hard-to-exploit) opponents and
//! style-diverse opponents regularized by MMD.
//!
//! Generated opponents always sit in the second seat; the base policy plays
//! the first seat.

use crate::error::{L2eError, Result};
use crate::games::{GameId, GameSpec, Player};
use crate::mmd::{embed_all, mmd2, mmd2_grad_from, KernelConfig, TrajectoryEmbedding};
use crate::policy::{Direction, PolicyParams};
use crate::rng::Rng;
use crate::rollout::{default_gamma, make_mdp, pg_gradient, sample_trajectories, sample_with, Learner, Opponent};
use crate::stats;

pub const BASE_SEAT: Player = Player::First;
pub const OPPONENT_SEAT: Player = Player::Second;

#[derive(Clone, Debug, PartialEq)]
pub struct OsgConfig {
    pub hard_epochs: usize,
    pub diverse_steps: usize,
    pub alpha_mmd: f64,
    pub n_diverse: usize,
    /// Step size of the base's one-step adaptation inside Hard-OSG.
    pub alpha: f64,
    /// Step size of the generated opponent's own updates.
    pub opponent_step: f64,
    pub trajs: usize,
    pub mmd_trajs: usize,
    pub kernel: KernelConfig,
    pub gamma: f64,
}

impl Default for OsgConfig {
    fn default() -> Self {
        OsgConfig {
            hard_epochs: 20,
            diverse_steps: 50,
            alpha_mmd: 0.8,
            n_diverse: 5,
            alpha: 0.1,
            opponent_step: 0.1,
            trajs: 20,
            mmd_trajs: 8,
            kernel: KernelConfig::default(),
            gamma: 1.0,
        }
    }
}

impl OsgConfig {
    /// Defaults with the game's discount.
    pub fn for_game(game: GameId) -> Self {
        OsgConfig {
            gamma: default_gamma(game),
            ..OsgConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.trajs == 0 || self.mmd_trajs < 2 || self.mmd_trajs > self.trajs {
            return Err(L2eError::InvalidArgument(format!(
                "need trajs >= mmd_trajs >= 2, got trajs={} mmd_trajs={}",
                self.trajs, self.mmd_trajs
            )));
        }
        if self.n_diverse == 0 {
            return Err(L2eError::InvalidArgument("n_diverse must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct HardOutcome {
    pub opponent: PolicyParams,
    /// Mean return of the one-step-adapted base against the opponent, taken
    /// from the samples of the final update.
    pub adapted_return: f64,
}

/// One-step adaptation of `base` against `opponent` on fresh samples.
pub fn adapt_once(
    spec: &GameSpec,
    base: &PolicyParams,
    opponent: Opponent,
    step: f64,
    n: usize,
    gamma: f64,
    rng: &mut Rng,
) -> Result<PolicyParams> {
    let mdp = make_mdp(*spec, BASE_SEAT, opponent)?;
    let trajs = sample_trajectories(&mdp, base, n, rng)?;
    base.apply_step(&pg_gradient(base, &trajs, gamma)?, step, Direction::Descend)
}

/// Trains a fresh opponent to beat the one-step-adapted version of `base`.
pub fn hard_osg(spec: &GameSpec, base: &PolicyParams, cfg: &OsgConfig, rng: &mut Rng) -> Result<HardOutcome> {
    let phi = PolicyParams::init(spec, rng);
    hard_osg_from(spec, base, phi, cfg, rng)
}

pub fn hard_osg_from(
    spec: &GameSpec,
    base: &PolicyParams,
    mut phi: PolicyParams,
    cfg: &OsgConfig,
    rng: &mut Rng,
) -> Result<HardOutcome> {
    base.check_spec(spec)?;
    let mut adapted_return = f64::NAN;
    for _ in 0..cfg.hard_epochs {
        let adapted = adapt_once(spec, base, Opponent::policy(phi.clone()), cfg.alpha, cfg.trajs, cfg.gamma, rng)?;
        let mdp = make_mdp(*spec, OPPONENT_SEAT, Opponent::policy(adapted))?;
        let trajs = sample_trajectories(&mdp, &phi, cfg.trajs, rng)?;
        adapted_return = -stats::mean(&trajs.iter().map(|t| t.total_return()).collect::<Vec<_>>());
        phi = phi.apply_step(&pg_gradient(&phi, &trajs, cfg.gamma)?, cfg.opponent_step, Direction::Descend)?;
    }
    Ok(HardOutcome {
        opponent: phi,
        adapted_return,
    })
}

/// Embedded style sample of `member` playing against the frozen base.
pub fn style_sample(
    spec: &GameSpec,
    base: &PolicyParams,
    member: &Opponent,
    n: usize,
    kernel: &KernelConfig,
    rng: &mut Rng,
) -> Result<Vec<TrajectoryEmbedding>> {
    let mdp = make_mdp(*spec, OPPONENT_SEAT, Opponent::policy(base.clone()))?;
    Ok(embed_all(&sample_with(&mdp, Learner::from(member), n, rng)?, kernel))
}

/// Grows `{seed}` to `n` opponents. Each new member starts from a random
/// initialization and ascends its return against `base` plus `alpha_mmd`
/// times its smallest MMD² to the members already in the set.
pub fn diverse_osg(
    spec: &GameSpec,
    base: &PolicyParams,
    seed: Opponent,
    n: usize,
    cfg: &OsgConfig,
    rng: &mut Rng,
) -> Result<Vec<Opponent>> {
    if n == 0 {
        return Err(L2eError::InvalidArgument("diverse_osg needs n >= 1".into()));
    }
    cfg.validate()?;
    base.check_spec(spec)?;
    seed.check_spec(spec)?;
    let mdp = make_mdp(*spec, OPPONENT_SEAT, Opponent::policy(base.clone()))?;
    let mut refs = vec![style_sample(spec, base, &seed, cfg.mmd_trajs, &cfg.kernel, rng)?];
    let mut set = vec![seed];
    while set.len() < n {
        let mut phi = PolicyParams::init(spec, rng);
        for _ in 0..cfg.diverse_steps {
            let trajs = sample_trajectories(&mdp, &phi, cfg.trajs, rng)?;
            let mut g = pg_gradient(&phi, &trajs, cfg.gamma)?;
            if cfg.alpha_mmd != 0.0 {
                let sample = &trajs[..cfg.mmd_trajs];
                let emb = embed_all(sample, &cfg.kernel);
                let (closest, _) = closest_member(&refs, &emb, &cfg.kernel)?;
                let gm = mmd2_grad_from(&phi, &refs[closest], sample, &cfg.kernel)?;
                g.add_scaled(&gm, -cfg.alpha_mmd);
            }
            phi = phi.apply_step(&g, cfg.opponent_step, Direction::Descend)?;
        }
        let member = Opponent::policy(phi);
        refs.push(style_sample(spec, base, &member, cfg.mmd_trajs, &cfg.kernel, rng)?);
        set.push(member);
    }
    Ok(set)
}

/// Index and value of the smallest MMD² between `sample` and the members'
/// reference sets.
pub fn closest_member(
    refs: &[Vec<TrajectoryEmbedding>],
    sample: &[TrajectoryEmbedding],
    kernel: &KernelConfig,
) -> Result<(usize, f64)> {
    if refs.is_empty() {
        return Err(L2eError::InvalidArgument("empty reference set".into()));
    }
    let mut best = (0, f64::INFINITY);
    for (i, r) in refs.iter().enumerate() {
        let v = mmd2(r, sample, kernel)?;
        if v < best.1 {
            best = (i, v);
        }
    }
    Ok(best)
}

/// Smallest pairwise MMD² among `members`, each described by a fresh style
/// sample of size `n`.
pub fn min_pairwise_mmd2(
    spec: &GameSpec,
    base: &PolicyParams,
    members: &[Opponent],
    n: usize,
    kernel: &KernelConfig,
    rng: &mut Rng,
) -> Result<f64> {
    let samples = members
        .iter()
        .map(|m| style_sample(spec, base, m, n, kernel, rng))
        .collect::<Result<Vec<_>>>()?;
    let mut best = f64::INFINITY;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            best = best.min(mmd2(&samples[i], &samples[j], kernel)?);
        }
    }
    Ok(best)
}
