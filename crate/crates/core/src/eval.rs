//! Matchup evaluation, baselines, ablations and the RPS analysis.
//!
//! The "TRPO" baselines are plain policy-gradient fine-tuning with the test
//! step size; no trust region is enforced.

use std::fmt;

use crate::error::{L2eError, Result};
use crate::games::{rps, ActionSet, GameId, GameSpec};
use crate::meta::{train, MetaGradient, PoolSource, TrainConfig, TrainOutcome};
use crate::osg::{OsgConfig, BASE_SEAT, OPPONENT_SEAT};
use crate::policy::{Direction, PolicyParams};
use crate::rng::{fork, Rng};
use crate::rollout::{
    evaluate, make_mdp, pg_gradient, sample_trajectories, sample_with, weighted_score_gradient, Learner, Opponent,
    Trajectory,
};
use crate::stats::{self, ReturnStat};
use crate::zoo::scripted::evaluation_set;
use crate::zoo::{ScriptKind, ScriptedOpponent};

/// How an agent adapts at test time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptSpec {
    pub steps: usize,
    pub step_size: f64,
    pub trajs_per_step: usize,
    pub gamma: f64,
}

impl AdaptSpec {
    pub fn from_train(cfg: &TrainConfig) -> Self {
        AdaptSpec {
            steps: cfg.adapt_steps_test,
            step_size: cfg.test_step,
            trajs_per_step: cfg.trajs_per_opponent,
            gamma: cfg.gamma,
        }
    }
}

/// Per-step returns of one agent against one opponent, aggregated over
/// independent seeds (mean and population std of the per-seed means).
#[derive(Clone, Debug, PartialEq)]
pub struct MatchReport {
    pub agent: String,
    pub opponent: String,
    pub steps: Vec<ReturnStat>,
    /// `per_seed[s][k]`: mean return of seed `s` after `k` steps.
    pub per_seed: Vec<Vec<f64>>,
    pub episodes: usize,
    pub seeds: usize,
}

impl MatchReport {
    fn from_per_seed(agent: &str, opponent: &str, per_seed: Vec<Vec<f64>>, episodes: usize) -> Self {
        let k = per_seed[0].len();
        let steps = (0..k)
            .map(|s| ReturnStat::from_samples(&per_seed.iter().map(|r| r[s]).collect::<Vec<_>>()))
            .collect();
        MatchReport {
            agent: agent.to_string(),
            opponent: opponent.to_string(),
            steps,
            seeds: per_seed.len(),
            per_seed,
            episodes,
        }
    }

    pub fn final_mean(&self) -> f64 {
        self.steps.last().expect("at least one step").mean
    }

    /// Per-seed values at `step`.
    pub fn at_step(&self, step: usize) -> Vec<f64> {
        self.per_seed.iter().map(|r| r[step]).collect()
    }
}

fn check_counts(episodes: usize, seeds: usize) -> Result<()> {
    if episodes == 0 || seeds == 0 {
        return Err(L2eError::InvalidArgument(format!(
            "need at least one episode and one seed, got {episodes} and {seeds}"
        )));
    }
    Ok(())
}

/// Runs `per_seed` on one forked stream per seed.
fn over_seeds(seeds: usize, rng: &mut Rng, mut per_seed: impl FnMut(&mut Rng) -> Result<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
    let streams: Vec<Rng> = (0..seeds).map(|_| fork(rng)).collect();
    streams.into_iter().map(|mut r| per_seed(&mut r)).collect()
}

fn adapt_curve(
    start: &PolicyParams,
    spec: &GameSpec,
    opponent: &Opponent,
    adapt: &AdaptSpec,
    episodes: usize,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mdp = make_mdp(*spec, BASE_SEAT, opponent.clone())?;
    let (_, curve) = crate::meta::test_adapt(
        start,
        &mdp,
        adapt.steps,
        adapt.step_size,
        adapt.trajs_per_step,
        episodes,
        adapt.gamma,
        rng,
    )?;
    Ok(curve.iter().map(|s| s.mean).collect())
}

/// Adapts `base` to `opponent` once per seed and evaluates every step over
/// `episodes` fresh episodes.
pub fn evaluate_matchup(
    agent: &str,
    base: &PolicyParams,
    spec: &GameSpec,
    opponent: &Opponent,
    adapt: &AdaptSpec,
    episodes: usize,
    seeds: usize,
    rng: &mut Rng,
) -> Result<MatchReport> {
    check_counts(episodes, seeds)?;
    let per_seed = over_seeds(seeds, rng, |r| adapt_curve(base, spec, opponent, adapt, episodes, r))?;
    Ok(MatchReport::from_per_seed(agent, &opponent.tag(), per_seed, episodes))
}

/// Uniform play over legal actions, never updated.
pub fn random_baseline(
    spec: &GameSpec,
    opponent: &Opponent,
    adapt: &AdaptSpec,
    episodes: usize,
    seeds: usize,
    rng: &mut Rng,
) -> Result<MatchReport> {
    check_counts(episodes, seeds)?;
    let uniform = PolicyParams::zeros(spec);
    let mdp = make_mdp(*spec, BASE_SEAT, opponent.clone())?;
    let per_seed = over_seeds(seeds, rng, |r| {
        (0..=adapt.steps)
            .map(|_| Ok(evaluate(&mdp, Learner::Policy(&uniform), episodes, &mut fork(r))?.mean))
            .collect()
    })?;
    Ok(MatchReport::from_per_seed("Random", &opponent.tag(), per_seed, episodes))
}

#[derive(Clone, Debug)]
pub enum FinetuneStart {
    /// A fresh random initialization per seed.
    RandomInit,
    Pretrained(PolicyParams),
}

/// Plain policy-gradient fine-tuning from `start` with the adaptation budget.
pub fn pg_finetune_baseline(
    spec: &GameSpec,
    opponent: &Opponent,
    start: &FinetuneStart,
    adapt: &AdaptSpec,
    episodes: usize,
    seeds: usize,
    rng: &mut Rng,
) -> Result<MatchReport> {
    check_counts(episodes, seeds)?;
    let per_seed = over_seeds(seeds, rng, |r| {
        let p = match start {
            FinetuneStart::RandomInit => PolicyParams::init(spec, r),
            FinetuneStart::Pretrained(p) => p.clone(),
        };
        adapt_curve(&p, spec, opponent, adapt, episodes, r)
    })?;
    let tag = match start {
        FinetuneStart::RandomInit => "TRPO",
        FinetuneStart::Pretrained(_) => "TRPO-P",
    };
    Ok(MatchReport::from_per_seed(tag, &opponent.tag(), per_seed, episodes))
}

/// Non-meta pre-training for the fine-tuning baseline: the gradient at the
/// base itself, averaged over opponents sampled from the scripted-plus-random
/// pool.
pub fn pretrain_baseline(cfg: &TrainConfig, osg: &OsgConfig, spec: &GameSpec, rng: &mut Rng) -> Result<PolicyParams> {
    let cfg = TrainConfig {
        alpha: 0.0,
        meta_gradient: MetaGradient::FirstOrder,
        history_episodes: 0,
        ..cfg.clone()
    };
    Ok(train(&cfg, osg, spec, PoolSource::Random, rng)?.base)
}

/// Meta-training over scripted opponents plus random initializations only.
pub fn maml_baseline_train(cfg: &TrainConfig, osg: &OsgConfig, spec: &GameSpec, rng: &mut Rng) -> Result<TrainOutcome> {
    train(cfg, osg, spec, PoolSource::Random, rng)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EomConfig {
    /// Cross-entropy gradient steps when fitting the opponent model.
    pub fit_steps: usize,
    pub fit_step: f64,
    /// Policy-gradient steps of the best response against the model.
    pub br_steps: usize,
    pub br_trajs: usize,
    pub br_step: f64,
}

impl Default for EomConfig {
    fn default() -> Self {
        EomConfig {
            fit_steps: 200,
            fit_step: 0.5,
            br_steps: 30,
            br_trajs: 20,
            br_step: 0.1,
        }
    }
}

/// Opponent model with random hidden layers and a zero head, so that it
/// predicts uniformly before seeing data.
pub fn blank_model(spec: &GameSpec, rng: &mut Rng) -> PolicyParams {
    let mut m = PolicyParams::init(spec, rng);
    let (w, b) = m.layer_mut(2);
    w.iter_mut().for_each(|x| *x = 0.0);
    b.iter_mut().for_each(|x| *x = 0.0);
    m
}

/// Maximum-likelihood fit of `model` to the recorded decisions (trajectories
/// recorded from the modelled player's seat).
pub fn fit_opponent_model(model: &PolicyParams, data: &[Trajectory], cfg: &EomConfig) -> Result<PolicyParams> {
    let data: Vec<Trajectory> = data.iter().filter(|t| !t.is_empty()).cloned().collect();
    if data.is_empty() {
        return Ok(model.clone());
    }
    let weights: Vec<Vec<f64>> = data.iter().map(|t| vec![1.0; t.len()]).collect();
    let mut m = model.clone();
    for _ in 0..cfg.fit_steps {
        let g = weighted_score_gradient(&m, &data, &weights)?;
        m = m.apply_step(&g, cfg.fit_step, Direction::Ascend)?;
    }
    Ok(m)
}

/// Explicit opponent modelling with the same interaction budget as the
/// adaptation protocol: at each step the current policy plays
/// `trajs_per_step` episodes against the real opponent, the model is refit
/// on everything seen so far and the policy is retrained against the model.
pub fn eom_baseline(
    spec: &GameSpec,
    opponent: &Opponent,
    adapt: &AdaptSpec,
    eom: &EomConfig,
    episodes: usize,
    seeds: usize,
    rng: &mut Rng,
) -> Result<MatchReport> {
    check_counts(episodes, seeds)?;
    let real = make_mdp(*spec, BASE_SEAT, opponent.clone())?;
    let per_seed = over_seeds(seeds, rng, |r| {
        let mut policy = PolicyParams::init(spec, r);
        let blank = blank_model(spec, r);
        let mut data: Vec<Trajectory> = Vec::new();
        let mut curve = vec![evaluate(&real, Learner::Policy(&policy), episodes, &mut fork(r))?.mean];
        for _ in 0..adapt.steps {
            let seen = make_mdp(*spec, OPPONENT_SEAT, Opponent::policy(policy.clone()))?;
            data.extend(sample_with(&seen, Learner::from(opponent), adapt.trajs_per_step, r)?);
            let model = fit_opponent_model(&blank, &data, eom)?;
            let sim = make_mdp(*spec, BASE_SEAT, Opponent::policy(model))?;
            for _ in 0..eom.br_steps {
                let trajs = sample_trajectories(&sim, &policy, eom.br_trajs, r)?;
                policy = policy.apply_step(&pg_gradient(&policy, &trajs, adapt.gamma)?, eom.br_step, Direction::Descend)?;
            }
            curve.push(evaluate(&real, Learner::Policy(&policy), episodes, &mut fork(r))?.mean);
        }
        Ok(curve)
    })?;
    Ok(MatchReport::from_per_seed("EOM", &opponent.tag(), per_seed, episodes))
}

/// Evaluation opponents of a game, as seat occupants.
pub fn scripted_opponents(game: GameId) -> Vec<Opponent> {
    evaluation_set(game)
        .into_iter()
        .map(|k| Opponent::Scripted(ScriptedOpponent::new(k)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    L2e,
    NoHard,
    NoDiverse,
    NoBoth,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::L2e, Variant::NoHard, Variant::NoDiverse, Variant::NoBoth];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::L2e => "L2E",
            Variant::NoHard => "L2E-H",
            Variant::NoDiverse => "L2E-D",
            Variant::NoBoth => "L2E-HD",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| L2eError::Parse(format!("unknown variant `{s}`")))
    }

    pub fn source(self) -> PoolSource {
        let (hard, diverse) = match self {
            Variant::L2e => (true, true),
            Variant::NoHard => (false, true),
            Variant::NoDiverse => (true, false),
            Variant::NoBoth => (false, false),
        };
        PoolSource::Osg { hard, diverse }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationCurve {
    pub variant: Variant,
    /// Per step: summed mean return over the evaluation opponents.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Maps the pooled minimum and maximum of all raw values to 0 and 1.
pub fn normalize_curves(curves: &mut [AblationCurve]) {
    let all = curves.iter().flat_map(|c| c.raw.iter().copied());
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    for c in curves.iter_mut() {
        c.normalized = c
            .raw
            .iter()
            .map(|v| if span > 0.0 { (v - lo) / span } else { 0.5 })
            .collect();
    }
}

/// Trains every variant from the same stream and evaluates it against the
/// game's scripted evaluation set.
pub fn ablation_run(
    variants: &[Variant],
    cfg: &TrainConfig,
    osg: &OsgConfig,
    spec: &GameSpec,
    episodes: usize,
    seeds: usize,
    rng: &mut Rng,
) -> Result<Vec<AblationCurve>> {
    let adapt = AdaptSpec::from_train(cfg);
    let opponents = scripted_opponents(spec.game_id);
    let mut curves = Vec::new();
    for v in variants {
        // every variant sees the same training and evaluation streams
        let mut vr = rng.clone();
        let base = train(cfg, osg, spec, v.source(), &mut vr)?.base;
        let mut raw = vec![0.0; adapt.steps + 1];
        for o in &opponents {
            let rep = evaluate_matchup(v.tag(), &base, spec, o, &adapt, episodes, seeds, &mut vr)?;
            for (r, s) in raw.iter_mut().zip(&rep.steps) {
                *r += s.mean;
            }
        }
        curves.push(AblationCurve {
            variant: *v,
            raw,
            normalized: Vec::new(),
        });
    }
    fork(rng);
    normalize_curves(&mut curves);
    Ok(curves)
}

/// Action probabilities of an RPS policy.
pub fn rps_probs(p: &PolicyParams) -> Result<[f64; 3]> {
    let d = p.forward(&[1.0], ActionSet::all(3))?;
    Ok([d.probs[0], d.probs[1], d.probs[2]])
}

/// Expected payoff of mixed strategy `p` against pure `opp`.
pub fn rps_value(p: &[f64; 3], opp: usize) -> f64 {
    (0..3).map(|a| p[a] * rps::payoff(a, opp)).sum()
}

/// Fits a random initialization to the uniform strategy by cross-entropy
/// gradient steps until every probability is within `tol` of 1/3.
pub fn nash_imitation(spec: &GameSpec, tol: f64, rng: &mut Rng) -> Result<PolicyParams> {
    if spec.game_id != GameId::Rps {
        return Err(L2eError::InvalidArgument("nash imitation is defined for rps".into()));
    }
    let mut p = PolicyParams::init(spec, rng);
    let mask = ActionSet::all(3);
    for _ in 0..10_000 {
        let probs = rps_probs(&p)?;
        if probs.iter().all(|q| (q - 1.0 / 3.0).abs() < tol) {
            return Ok(p);
        }
        let mut g = crate::policy::GradientVector::zeros_like(&p);
        for a in 0..3 {
            p.accumulate_logprob_grad(&[1.0], a, mask, 1.0 / 3.0, &mut g)?;
        }
        p = p.apply_step(&g, 0.5, Direction::Ascend)?;
    }
    Err(L2eError::InvalidArgument("nash imitation did not converge".into()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptPoint {
    pub step: usize,
    pub probs: [f64; 3],
    /// Exact expected payoff against the opponent.
    pub value: f64,
}

/// Strategy and exact value after each step of adaptation against a pure
/// Rock player.
pub fn rock_adaptation_trace(base: &PolicyParams, adapt: &AdaptSpec, rng: &mut Rng) -> Result<Vec<AdaptPoint>> {
    let spec = GameSpec::rps();
    let mdp = make_mdp(spec, BASE_SEAT, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Rocks)))?;
    let mut p = base.clone();
    let mut out = Vec::new();
    for step in 0..=adapt.steps {
        let probs = rps_probs(&p)?;
        out.push(AdaptPoint {
            step,
            probs,
            value: rps_value(&probs, rps::ROCK),
        });
        if step < adapt.steps {
            let trajs = sample_trajectories(&mdp, &p, adapt.trajs_per_step, rng)?;
            p = p.apply_step(&pg_gradient(&p, &trajs, adapt.gamma)?, adapt.step_size, Direction::Descend)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RpsAnalysis {
    /// Base-policy strategy after each training epoch (index 0: initial).
    pub simplex: Vec<[f64; 3]>,
    pub l2e_trace: Vec<AdaptPoint>,
    pub nash_trace: Vec<AdaptPoint>,
    pub base: PolicyParams,
}

pub fn rps_analysis(cfg: &TrainConfig, osg: &OsgConfig, rng: &mut Rng) -> Result<RpsAnalysis> {
    let spec = GameSpec::rps();
    let mut train_rng = fork(rng);
    let mut simplex = Vec::new();
    let mut hook = |_: usize, b: &PolicyParams, _: &crate::meta::OpponentPool, _: &crate::meta::TrainHistory| {
        simplex.push(rps_probs(b)?);
        Ok(())
    };
    let initial = PolicyParams::init(&spec, &mut train_rng.clone());
    let out = crate::meta::train_with(cfg, osg, &spec, PoolSource::L2E, &mut train_rng, &mut hook)?;
    simplex.insert(0, rps_probs(&initial)?);
    let nash = nash_imitation(&spec, 1e-3, &mut fork(rng))?;
    let adapt = AdaptSpec::from_train(cfg);
    let l2e_trace = rock_adaptation_trace(&out.base, &adapt, &mut fork(rng))?;
    let nash_trace = rock_adaptation_trace(&nash, &adapt, &mut fork(rng))?;
    Ok(RpsAnalysis {
        simplex,
        l2e_trace,
        nash_trace,
        base: out.base,
    })
}

/// One `(method, opponent, step)` cell of a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub method: String,
    pub opponent: String,
    pub step: usize,
    pub mean: f64,
    pub std: f64,
    pub n_seeds: usize,
    pub n_episodes: usize,
}

pub fn table_rows(reports: &[MatchReport]) -> Vec<TableRow> {
    reports
        .iter()
        .flat_map(|r| {
            r.steps.iter().enumerate().map(move |(k, s)| TableRow {
                method: r.agent.clone(),
                opponent: r.opponent.clone(),
                step: k,
                mean: s.mean,
                std: s.std,
                n_seeds: r.seeds,
                n_episodes: r.episodes,
            })
        })
        .collect()
}

/// Mean of the per-seed values, used for quick summaries.
pub fn mean_of(report: &MatchReport, step: usize) -> f64 {
    stats::mean(&report.at_step(step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::from_seed;

    fn adapt() -> AdaptSpec {
        AdaptSpec {
            steps: 3,
            step_size: 0.1,
            trajs_per_step: 10,
            gamma: 1.0,
        }
    }

    #[test]
    fn report_shape_and_errors() {
        let spec = GameSpec::leduc();
        let base = PolicyParams::init(&spec, &mut from_seed(1));
        let opp = Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Call));
        let rep = evaluate_matchup("L2E", &base, &spec, &opp, &adapt(), 20, 3, &mut from_seed(2)).unwrap();
        assert_eq!(rep.steps.len(), 4);
        assert_eq!(rep.seeds, 3);
        assert_eq!(rep.opponent, "call");
        assert!(evaluate_matchup("L2E", &base, &spec, &opp, &adapt(), 0, 3, &mut from_seed(2)).is_err());
        let again = evaluate_matchup("L2E", &base, &spec, &opp, &adapt(), 20, 3, &mut from_seed(2)).unwrap();
        assert_eq!(rep, again);
        assert_eq!(table_rows(&[rep]).len(), 4);
    }

    #[test]
    fn rps_best_response_value() {
        // an agent that already plays Paper beats the always-Rock opponent
        // every time and gets nothing new from adapting
        let spec = GameSpec::rps();
        let mut p = PolicyParams::zeros(&spec);
        p.layer_mut(2).1[rps::PAPER] = 50.0;
        let opp = Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Rocks));
        let rep = evaluate_matchup("BR", &p, &spec, &opp, &adapt(), 200, 2, &mut from_seed(3)).unwrap();
        for s in &rep.steps {
            assert_eq!(s.mean, 1.0);
        }
    }

    #[test]
    fn random_init_zero_steps_matches_its_own_evaluation() {
        let spec = GameSpec::leduc();
        let opp = Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Call));
        let a = AdaptSpec { steps: 0, ..adapt() };
        let rep = pg_finetune_baseline(&spec, &opp, &FinetuneStart::RandomInit, &a, 50, 2, &mut from_seed(4)).unwrap();
        assert_eq!(rep.steps.len(), 1);
        let rnd = random_baseline(&spec, &opp, &a, 50, 2, &mut from_seed(4)).unwrap();
        assert_eq!(rnd.steps.len(), 1);
    }

    #[test]
    fn blank_model_is_uniform() {
        let spec = GameSpec::leduc();
        let m = blank_model(&spec, &mut from_seed(1));
        let fitted = fit_opponent_model(&m, &[], &EomConfig::default()).unwrap();
        let d = fitted.forward(&[0.5; 7], ActionSet::all(4)).unwrap();
        for p in d.probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_endpoints() {
        let mut c = vec![
            AblationCurve {
                variant: Variant::L2e,
                raw: vec![1.0, 3.0],
                normalized: vec![],
            },
            AblationCurve {
                variant: Variant::NoBoth,
                raw: vec![-1.0, 0.0],
                normalized: vec![],
            },
        ];
        normalize_curves(&mut c);
        assert_eq!(c[0].normalized, vec![0.5, 1.0]);
        assert_eq!(c[1].normalized, vec![0.0, 0.25]);
    }

    #[test]
    fn variant_sources() {
        assert_eq!(Variant::L2e.source(), PoolSource::L2E);
        assert_eq!(
            Variant::NoBoth.source(),
            PoolSource::Osg {
                hard: false,
                diverse: false
            }
        );
        assert_eq!(Variant::parse("l2e-hd").unwrap(), Variant::NoBoth);
    }

    #[test]
    fn nash_imitation_is_near_uniform() {
        let p = nash_imitation(&GameSpec::rps(), 1e-3, &mut from_seed(5)).unwrap();
        for q in rps_probs(&p).unwrap() {
            assert!((q - 1.0 / 3.0).abs() < 0.01);
        }
    }
}
