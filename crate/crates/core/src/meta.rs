//! Base-policy meta-training: inner adaptation, the outer update over a
//! sampled opponent batch, the epoch loop over a growing opponent pool and
//! test-time adaptation.

use std::fmt;

use rand::Rng as _;

use crate::error::{L2eError, Result};
use crate::games::{GameId, GameSpec};
use crate::osg::{diverse_osg, hard_osg, OsgConfig, BASE_SEAT};
use crate::policy::{Direction, GradientVector, PolicyParams};
use crate::rng::{fork, Rng};
use crate::rollout::{
    advantages, default_gamma, evaluate, make_mdp, sample_trajectories, weighted_score_gradient, Learner, MdpView,
    Opponent, ReturnMode, Trajectory,
};
use crate::stats::{self, ReturnStat};
use crate::zoo::{ScriptKind, ScriptedOpponent};

/// How the outer update differentiates through the inner step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MetaGradient {
    /// Gradient at the adapted parameters, applied to the base.
    FirstOrder,
    /// First-order term multiplied by `(I - alpha H)` per inner step, where
    /// `H` is the Hessian of the inner surrogate loss on the inner samples
    /// (Hessian-vector products by central differences).
    #[default]
    SurrogateHessian,
}

/// Update rule applied to the combined outer gradient, with step size `beta`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OuterOptimizer {
    #[default]
    Sgd,
    /// Adam with the usual moment decay rates (0.9, 0.999).
    Adam,
}

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamState {
    pub fn new(like: &PolicyParams) -> Self {
        AdamState {
            m: vec![0.0; like.len()],
            v: vec![0.0; like.len()],
            t: 0,
        }
    }

    /// Descends `grad` from `params` by one Adam step of size `lr`.
    pub fn step(&mut self, params: &PolicyParams, grad: &GradientVector, lr: f64) -> Result<PolicyParams> {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        if grad.as_slice().len() != self.m.len() {
            return Err(L2eError::Shape("gradient does not match optimizer state".into()));
        }
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        let mut dir = grad.clone();
        for (i, d) in dir.as_mut_slice().iter_mut().enumerate() {
            let g = grad.as_slice()[i];
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * g;
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * g * g;
            *d = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + EPS);
        }
        params.apply_step(&dir, lr, Direction::Descend)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OuterReduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub alpha: f64,
    pub beta: f64,
    pub test_step: f64,
    pub opponents_per_batch: usize,
    pub trajs_per_opponent: usize,
    pub inner_steps_train: usize,
    pub adapt_steps_test: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub return_mode: ReturnMode,
    pub meta_gradient: MetaGradient,
    pub outer_reduction: OuterReduction,
    pub outer_optimizer: OuterOptimizer,
    /// Episodes per opponent for the per-epoch adapted-return diagnostic;
    /// zero disables it.
    pub history_episodes: usize,
    pub history_every: usize,
    pub workers: usize,
}

impl TrainConfig {
    pub fn for_game(game: GameId) -> Self {
        TrainConfig {
            alpha: 0.1,
            beta: 0.01,
            test_step: 0.1,
            opponents_per_batch: 40,
            trajs_per_opponent: 20,
            inner_steps_train: 1,
            adapt_steps_test: 3,
            epochs: match game {
                GameId::BigLeduc => 400,
                _ => 300,
            },
            gamma: default_gamma(game),
            return_mode: ReturnMode::Total,
            meta_gradient: MetaGradient::SurrogateHessian,
            outer_reduction: OuterReduction::Mean,
            outer_optimizer: OuterOptimizer::Sgd,
            history_episodes: 200,
            history_every: 1,
            workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(L2eError::InvalidArgument(format!("{what} must be positive")));
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.test_step >= 0.0) {
            return bad("step sizes");
        }
        if self.opponents_per_batch == 0 {
            return bad("opponents_per_batch");
        }
        if self.trajs_per_opponent == 0 {
            return bad("trajs_per_opponent");
        }
        if self.inner_steps_train == 0 {
            return bad("inner_steps_train");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(L2eError::InvalidArgument(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Seed,
    HardOsg,
    DiverseOsg,
    Scripted,
    Random,
}

impl Provenance {
    pub fn tag(self) -> &'static str {
        match self {
            Provenance::Seed => "seed",
            Provenance::HardOsg => "hard_osg",
            Provenance::DiverseOsg => "diverse_osg",
            Provenance::Scripted => "scripted",
            Provenance::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "seed" => Provenance::Seed,
            "hard_osg" => Provenance::HardOsg,
            "diverse_osg" => Provenance::DiverseOsg,
            "scripted" => Provenance::Scripted,
            "random" => Provenance::Random,
            other => return Err(L2eError::Parse(format!("unknown provenance tag `{other}`"))),
        })
    }

    pub fn is_osg(self) -> bool {
        matches!(self, Provenance::HardOsg | Provenance::DiverseOsg)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug)]
pub struct PoolEntry {
    pub opponent: Opponent,
    pub provenance: Provenance,
    pub epoch: usize,
}

/// Append-only archive of training opponents.
#[derive(Clone, Debug, Default)]
pub struct OpponentPool {
    entries: Vec<PoolEntry>,
}

impl OpponentPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, opponent: Opponent, provenance: Provenance, epoch: usize) {
        self.entries.push(PoolEntry {
            opponent,
            provenance,
            epoch,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    /// `n` entries drawn uniformly with replacement.
    pub fn sample_batch(&self, n: usize, rng: &mut Rng) -> Result<Vec<Opponent>> {
        if self.entries.is_empty() {
            return Err(L2eError::InvalidArgument("cannot sample from an empty pool".into()));
        }
        Ok((0..n)
            .map(|_| self.entries[rng.gen_range(0..self.entries.len())].opponent.clone())
            .collect())
    }
}

/// Samples and weights of one inner step, kept for the meta-gradient.
struct InnerStep {
    params: PolicyParams,
    trajs: Vec<Trajectory>,
    weights: Vec<Vec<f64>>,
}

/// Loss gradient (negative return) as a fixed-weight surrogate.
fn loss_gradient(policy: &PolicyParams, trajs: &[Trajectory], weights: &[Vec<f64>]) -> Result<GradientVector> {
    let mut g = weighted_score_gradient(policy, trajs, weights)?;
    g.scale(-1.0);
    Ok(g)
}

fn adapt_steps(
    base: &PolicyParams,
    mdp: &MdpView,
    alpha: f64,
    k: usize,
    n: usize,
    gamma: f64,
    mode: ReturnMode,
    rng: &mut Rng,
) -> Result<(PolicyParams, Vec<InnerStep>)> {
    let mut params = base.clone();
    let mut steps = Vec::with_capacity(k);
    for _ in 0..k {
        let trajs = sample_trajectories(mdp, &params, n, rng)?;
        let weights = advantages(&trajs, gamma, mode);
        let g = loss_gradient(&params, &trajs, &weights)?;
        let next = params.apply_step(&g, alpha, Direction::Descend)?;
        steps.push(InnerStep {
            params,
            trajs,
            weights,
        });
        params = next;
    }
    Ok((params, steps))
}

/// `k` policy-gradient descent steps on the loss against the frozen
/// opponent, each on `n` fresh trajectories. Returns the adapted policy and
/// the trajectories of every step.
pub fn inner_adapt(
    base: &PolicyParams,
    mdp: &MdpView,
    alpha: f64,
    k: usize,
    n: usize,
    gamma: f64,
    rng: &mut Rng,
) -> Result<(PolicyParams, Vec<Vec<Trajectory>>)> {
    if k == 0 {
        return Err(L2eError::InvalidArgument("inner_adapt needs k >= 1".into()));
    }
    let (p, steps) = adapt_steps(base, mdp, alpha, k, n, gamma, ReturnMode::Total, rng)?;
    Ok((p, steps.into_iter().map(|s| s.trajs).collect()))
}

/// `(I - alpha H) v` with `H v` from central differences of the surrogate
/// loss gradient on the stored samples.
fn hessian_correct(step: &InnerStep, v: &GradientVector, alpha: f64) -> Result<GradientVector> {
    let norm = v.norm();
    if norm == 0.0 || alpha == 0.0 {
        return Ok(v.clone());
    }
    let eps = 1e-4 / norm;
    let plus = step.params.apply_step(v, eps, Direction::Ascend)?;
    let minus = step.params.apply_step(v, eps, Direction::Descend)?;
    let mut hv = loss_gradient(&plus, &step.trajs, &step.weights)?;
    hv.add_scaled(&loss_gradient(&minus, &step.trajs, &step.weights)?, -1.0);
    hv.scale(1.0 / (2.0 * eps));
    let mut out = v.clone();
    out.add_scaled(&hv, -alpha);
    Ok(out)
}

/// Meta-gradient contributed by one opponent.
pub fn opponent_meta_gradient(
    base: &PolicyParams,
    mdp: &MdpView,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<GradientVector> {
    let (adapted, steps) = adapt_steps(
        base,
        mdp,
        cfg.alpha,
        cfg.inner_steps_train,
        cfg.trajs_per_opponent,
        cfg.gamma,
        cfg.return_mode,
        rng,
    )?;
    let trajs = sample_trajectories(mdp, &adapted, cfg.trajs_per_opponent, rng)?;
    let mut g = loss_gradient(&adapted, &trajs, &advantages(&trajs, cfg.gamma, cfg.return_mode))?;
    if cfg.meta_gradient == MetaGradient::SurrogateHessian {
        for step in steps.iter().rev() {
            g = hessian_correct(step, &g, cfg.alpha)?;
        }
    }
    Ok(g)
}

/// One plain outer step of the base policy over `batch`.
pub fn outer_update(
    base: &PolicyParams,
    spec: &GameSpec,
    batch: &[Opponent],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<PolicyParams> {
    let g = outer_gradient(base, spec, batch, cfg, rng)?;
    base.apply_step(&g, cfg.beta, Direction::Descend)
}

/// Per-opponent meta-gradients over `batch`, combined by `cfg.outer_reduction`.
pub fn outer_gradient(
    base: &PolicyParams,
    spec: &GameSpec,
    batch: &[Opponent],
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<GradientVector> {
    if batch.is_empty() {
        return Err(L2eError::InvalidArgument("empty opponent batch".into()));
    }
    let jobs: Vec<(MdpView, Rng)> = batch
        .iter()
        .map(|o| Ok((make_mdp(*spec, BASE_SEAT, o.clone())?, fork(rng))))
        .collect::<Result<_>>()?;
    let grads = run_jobs(jobs, cfg.workers, |(mdp, mut r)| opponent_meta_gradient(base, &mdp, cfg, &mut r))?;
    let mut total = GradientVector::zeros_like(base);
    for g in &grads {
        total.add_scaled(g, 1.0);
    }
    if cfg.outer_reduction == OuterReduction::Mean {
        total.scale(1.0 / batch.len() as f64);
    }
    Ok(total)
}

/// Runs independent jobs on up to `workers` threads; results come back in
/// job order.
fn run_jobs<J, T, F>(jobs: Vec<J>, workers: usize, f: F) -> Result<Vec<T>>
where
    J: Send,
    T: Send,
    F: Fn(J) -> Result<T> + Sync,
{
    let workers = workers.max(1).min(jobs.len().max(1));
    if workers == 1 {
        return jobs.into_iter().map(f).collect();
    }
    let chunk = jobs.len().div_ceil(workers);
    let mut chunks: Vec<Vec<J>> = Vec::new();
    let mut it = jobs.into_iter();
    loop {
        let c: Vec<J> = it.by_ref().take(chunk).collect();
        if c.is_empty() {
            break;
        }
        chunks.push(c);
    }
    let f = &f;
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|s| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|c| s.spawn(move || c.into_iter().map(f).collect::<Result<Vec<T>>>()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Repeats {sample, one gradient step} `steps` times against `mdp`. The
/// returned list holds the evaluation of the policy before adaptation and
/// after every step, each over `eval_episodes` fresh episodes.
pub fn test_adapt(
    base: &PolicyParams,
    mdp: &MdpView,
    steps: usize,
    step_size: f64,
    trajs_per_step: usize,
    eval_episodes: usize,
    gamma: f64,
    rng: &mut Rng,
) -> Result<(PolicyParams, Vec<ReturnStat>)> {
    let mut params = base.clone();
    let mut curve = Vec::with_capacity(steps + 1);
    for s in 0..=steps {
        let mut erng = fork(rng);
        curve.push(evaluate(mdp, Learner::Policy(&params), eval_episodes, &mut erng)?);
        if s < steps {
            let trajs = sample_trajectories(mdp, &params, trajs_per_step, rng)?;
            let g = loss_gradient(&params, &trajs, &advantages(&trajs, gamma, ReturnMode::Total))?;
            params = params.apply_step(&g, step_size, Direction::Descend)?;
        }
    }
    Ok((params, curve))
}

/// Opponents whose adapted return is tracked during training.
pub fn history_opponents(game: GameId) -> Vec<ScriptKind> {
    match game {
        GameId::Rps => vec![ScriptKind::Random, ScriptKind::Rocks],
        GameId::Leduc | GameId::BigLeduc => vec![ScriptKind::Random, ScriptKind::Call, ScriptKind::Rocks],
        GameId::Soccer => vec![ScriptKind::SoccerDefensive, ScriptKind::SoccerAggressive],
    }
}

/// Where the per-epoch pool additions come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolSource {
    /// Hard-OSG and/or Diverse-OSG, with random initializations standing in
    /// for a disabled module.
    Osg { hard: bool, diverse: bool },
    /// Scripted training set up front, random policies every epoch.
    Random,
}

impl PoolSource {
    pub const L2E: PoolSource = PoolSource::Osg {
        hard: true,
        diverse: true,
    };
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub opponent: String,
    pub step: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
    /// Per recorded epoch: mean final-step adapted return over the history
    /// opponents.
    pub metric: Vec<(usize, f64)>,
    /// Per epoch: one-step-adapted base return against that epoch's hard
    /// opponent.
    pub hardness: Vec<(usize, f64)>,
    pub pool_sizes: Vec<usize>,
}

pub struct TrainOutcome {
    pub base: PolicyParams,
    pub pool: OpponentPool,
    pub history: TrainHistory,
}

/// Per-epoch callback: `(epoch, base, pool, history)`.
pub type EpochHook<'a> = dyn FnMut(usize, &PolicyParams, &OpponentPool, &TrainHistory) -> Result<()> + 'a;

pub fn train(cfg: &TrainConfig, osg: &OsgConfig, spec: &GameSpec, source: PoolSource, rng: &mut Rng) -> Result<TrainOutcome> {
    train_with(cfg, osg, spec, source, rng, &mut |_, _, _, _| Ok(()))
}

pub fn train_with(
    cfg: &TrainConfig,
    osg: &OsgConfig,
    spec: &GameSpec,
    source: PoolSource,
    rng: &mut Rng,
    hook: &mut EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    osg.validate()?;
    let mut base = PolicyParams::init(spec, rng);
    let mut pool = OpponentPool::new();
    match source {
        PoolSource::Osg { .. } => pool.push(Opponent::policy(PolicyParams::init(spec, rng)), Provenance::Seed, 0),
        PoolSource::Random => {
            for kind in crate::zoo::scripted::training_set(spec.game_id) {
                pool.push(Opponent::Scripted(ScriptedOpponent::new(kind)), Provenance::Scripted, 0);
            }
        }
    }
    let n_new = osg.n_diverse.clamp(1, 5);
    let mut adam = AdamState::new(&base);
    let mut history = TrainHistory::default();
    for epoch in 1..=cfg.epochs {
        let mut erng = fork(rng);
        match source {
            PoolSource::Osg { hard, diverse } => {
                let (first, tag) = if hard {
                    let out = hard_osg(spec, &base, osg, &mut erng)?;
                    history.hardness.push((epoch, out.adapted_return));
                    (Opponent::policy(out.opponent), Provenance::HardOsg)
                } else {
                    (Opponent::policy(PolicyParams::init(spec, &mut erng)), Provenance::Random)
                };
                let set = if diverse {
                    diverse_osg(spec, &base, first, n_new, osg, &mut erng)?
                } else {
                    let mut v = vec![first];
                    v.extend((1..n_new).map(|_| Opponent::policy(PolicyParams::init(spec, &mut erng))));
                    v
                };
                for (i, o) in set.into_iter().enumerate() {
                    let p = match (i, diverse) {
                        (0, _) => tag,
                        (_, true) => Provenance::DiverseOsg,
                        (_, false) => Provenance::Random,
                    };
                    pool.push(o, p, epoch);
                }
            }
            PoolSource::Random => {
                for _ in 0..n_new {
                    pool.push(Opponent::policy(PolicyParams::init(spec, &mut erng)), Provenance::Random, epoch);
                }
            }
        }
        let batch = pool.sample_batch(cfg.opponents_per_batch, &mut erng)?;
        let g = outer_gradient(&base, spec, &batch, cfg, &mut erng)?;
        base = match cfg.outer_optimizer {
            OuterOptimizer::Sgd => base.apply_step(&g, cfg.beta, Direction::Descend)?,
            OuterOptimizer::Adam => adam.step(&base, &g, cfg.beta)?,
        };
        history.pool_sizes.push(pool.len());
        if cfg.history_episodes > 0 && cfg.history_every > 0 && epoch % cfg.history_every == 0 {
            record_history(&base, spec, cfg, epoch, &mut history, &mut erng)?;
        }
        hook(epoch, &base, &pool, &history)?;
    }
    Ok(TrainOutcome { base, pool, history })
}

fn record_history(
    base: &PolicyParams,
    spec: &GameSpec,
    cfg: &TrainConfig,
    epoch: usize,
    history: &mut TrainHistory,
    rng: &mut Rng,
) -> Result<()> {
    let mut finals = Vec::new();
    for kind in history_opponents(spec.game_id) {
        let mdp = make_mdp(*spec, BASE_SEAT, Opponent::Scripted(ScriptedOpponent::new(kind)))?;
        let (_, curve) = test_adapt(
            base,
            &mdp,
            cfg.adapt_steps_test,
            cfg.test_step,
            cfg.trajs_per_opponent,
            cfg.history_episodes,
            cfg.gamma,
            rng,
        )?;
        for (step, st) in curve.iter().enumerate() {
            history.rows.push(HistoryRow {
                epoch,
                opponent: kind.name().to_string(),
                step,
                mean: st.mean,
                std: st.std,
            });
        }
        finals.push(curve.last().expect("curve has step 0").mean);
    }
    history.metric.push((epoch, stats::mean(&finals)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn tiny(game: GameId) -> TrainConfig {
        TrainConfig {
            opponents_per_batch: 3,
            trajs_per_opponent: 6,
            epochs: 2,
            history_episodes: 10,
            ..TrainConfig::for_game(game)
        }
    }

    fn tiny_osg() -> OsgConfig {
        OsgConfig {
            hard_epochs: 1,
            diverse_steps: 1,
            n_diverse: 3,
            trajs: 6,
            mmd_trajs: 4,
            ..Default::default()
        }
    }

    #[test]
    fn table_defaults() {
        let c = TrainConfig::for_game(GameId::Leduc);
        assert_eq!((c.alpha, c.beta, c.test_step), (0.1, 0.01, 0.1));
        assert_eq!((c.opponents_per_batch, c.trajs_per_opponent), (40, 20));
        assert_eq!((c.inner_steps_train, c.adapt_steps_test, c.epochs), (1, 3, 300));
        assert_eq!(TrainConfig::for_game(GameId::BigLeduc).epochs, 400);
    }

    #[test]
    fn zero_alpha_keeps_base() {
        let spec = GameSpec::leduc();
        let base = PolicyParams::init(&spec, &mut from_seed(1));
        let mdp = make_mdp(spec, BASE_SEAT, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Call))).unwrap();
        let (p, trajs) = inner_adapt(&base, &mdp, 0.0, 2, 5, 1.0, &mut from_seed(2)).unwrap();
        assert_eq!(p, base);
        assert_eq!(trajs.len(), 2);
        assert!(inner_adapt(&base, &mdp, 0.1, 0, 5, 1.0, &mut from_seed(2)).is_err());
    }

    #[test]
    fn zero_beta_keeps_base_and_single_batch_direction() {
        let spec = GameSpec::leduc();
        let base = PolicyParams::init(&spec, &mut from_seed(1));
        let opp = Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Call));
        let cfg = TrainConfig {
            beta: 0.0,
            ..tiny(GameId::Leduc)
        };
        assert_eq!(outer_update(&base, &spec, &[opp.clone()], &cfg, &mut from_seed(3)).unwrap(), base);
        let cfg = tiny(GameId::Leduc);
        let stepped = outer_update(&base, &spec, &[opp.clone()], &cfg, &mut from_seed(3)).unwrap();
        // the outer step forks one stream per opponent off the incoming one
        let mut r = from_seed(3);
        let mut jr = fork(&mut r);
        let mdp = make_mdp(spec, BASE_SEAT, opp).unwrap();
        let g = opponent_meta_gradient(&base, &mdp, &cfg, &mut jr).unwrap();
        assert_eq!(stepped, base.apply_step(&g, cfg.beta, Direction::Descend).unwrap());
    }

    #[test]
    fn workers_do_not_change_results() {
        let spec = GameSpec::leduc();
        let base = PolicyParams::init(&spec, &mut from_seed(1));
        let batch: Vec<Opponent> = (0..5).map(|i| Opponent::policy(PolicyParams::init(&spec, &mut from_seed(10 + i)))).collect();
        let one = outer_update(&base, &spec, &batch, &tiny(GameId::Leduc), &mut from_seed(4)).unwrap();
        let cfg = TrainConfig {
            workers: 3,
            ..tiny(GameId::Leduc)
        };
        assert_eq!(outer_update(&base, &spec, &batch, &cfg, &mut from_seed(4)).unwrap(), one);
    }

    #[test]
    fn surrogate_hessian_matches_first_order_at_zero_alpha() {
        let spec = GameSpec::rps();
        let base = PolicyParams::init(&spec, &mut from_seed(1));
        let mdp = make_mdp(spec, BASE_SEAT, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Rocks))).unwrap();
        let fo = TrainConfig {
            alpha: 0.0,
            ..tiny(GameId::Rps)
        };
        let so = TrainConfig {
            meta_gradient: MetaGradient::SurrogateHessian,
            ..fo.clone()
        };
        let a = opponent_meta_gradient(&base, &mdp, &fo, &mut from_seed(5)).unwrap();
        let b = opponent_meta_gradient(&base, &mdp, &so, &mut from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_grows_pool_and_is_deterministic() {
        let spec = GameSpec::leduc();
        let cfg = tiny(GameId::Leduc);
        let a = train(&cfg, &tiny_osg(), &spec, PoolSource::L2E, &mut from_seed(7)).unwrap();
        let b = train(&cfg, &tiny_osg(), &spec, PoolSource::L2E, &mut from_seed(7)).unwrap();
        assert_eq!(a.base, b.base);
        assert_eq!(a.pool.len(), 1 + 2 * 3);
        assert_eq!(a.history.pool_sizes, vec![4, 7]);
        assert_eq!(a.history.metric.len(), 2);
        assert_eq!(a.history.hardness.len(), 2);
        let tags: Vec<_> = a.pool.entries().iter().map(|e| e.provenance).collect();
        assert_eq!(tags[0], Provenance::Seed);
        assert_eq!(tags[1], Provenance::HardOsg);
        assert_eq!(tags[2], Provenance::DiverseOsg);
    }

    #[test]
    fn zero_epochs_returns_initial_base() {
        let spec = GameSpec::rps();
        let cfg = TrainConfig {
            epochs: 0,
            ..tiny(GameId::Rps)
        };
        let out = train(&cfg, &tiny_osg(), &spec, PoolSource::L2E, &mut from_seed(7)).unwrap();
        assert_eq!(out.base, PolicyParams::init(&spec, &mut from_seed(7)));
    }

    #[test]
    fn random_source_has_no_osg_entries() {
        let spec = GameSpec::leduc();
        let out = train(&tiny(GameId::Leduc), &tiny_osg(), &spec, PoolSource::Random, &mut from_seed(7)).unwrap();
        assert!(out.pool.entries().iter().all(|e| !e.provenance.is_osg()));
        let hd = PoolSource::Osg {
            hard: false,
            diverse: false,
        };
        let out = train(&tiny(GameId::Leduc), &tiny_osg(), &spec, hd, &mut from_seed(7)).unwrap();
        assert!(out.pool.entries()[1..].iter().all(|e| e.provenance == Provenance::Random));
    }

    #[test]
    fn test_adapt_curve_length() {
        let spec = GameSpec::leduc();
        let base = PolicyParams::init(&spec, &mut from_seed(1));
        let mdp = make_mdp(spec, BASE_SEAT, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Call))).unwrap();
        let (p, curve) = test_adapt(&base, &mdp, 0, 0.1, 5, 10, 1.0, &mut from_seed(2)).unwrap();
        assert_eq!(p, base);
        assert_eq!(curve.len(), 1);
        let (_, curve) = test_adapt(&base, &mdp, 3, 0.1, 5, 10, 1.0, &mut from_seed(2)).unwrap();
        assert_eq!(curve.len(), 4);
    }
}
