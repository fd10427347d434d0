//! Two-player game to single-player MDP reduction, Monte-Carlo sampling and
//! REINFORCE gradient estimation.
//!
//! An [`MdpView`] freezes one seat behind the [`Opponent`] interface; the
//! learner only sees its own decision points. Rewards produced while the
//! opponent acts are credited to the learner's most recent step.

use std::io::Write;
use std::sync::Arc;

use crate::error::{L2eError, Result};
use crate::games::{ActionSet, GameId, GameSpec, GameState, Player};
use crate::policy::{GradientVector, PolicyParams};
use crate::rng::{fork, Rng};
use crate::stats::ReturnStat;
use crate::zoo::{ScriptedOpponent, TabularOpponent};

/// Anything that can occupy a seat: a policy network, a scripted rule or a
/// tabular strategy.
#[derive(Clone, Debug)]
pub enum Opponent {
    Policy(Arc<PolicyParams>),
    Scripted(ScriptedOpponent),
    Tabular(Arc<TabularOpponent>),
}

impl Opponent {
    pub fn policy(p: PolicyParams) -> Self {
        Opponent::Policy(Arc::new(p))
    }

    pub fn act(&self, spec: &GameSpec, state: &GameState, player: Player, rng: &mut Rng) -> Result<usize> {
        match self {
            Opponent::Policy(p) => {
                let legal = spec.legal_actions(state, player)?;
                let mut obs = vec![0.0; spec.obs_dim];
                spec.encode_into(state, player, &mut obs);
                Ok(p.sample_action(&obs, legal, rng)?.0)
            }
            Opponent::Scripted(s) => s.act(spec, state, player, rng),
            Opponent::Tabular(t) => t.act(spec, state, player, rng),
        }
    }

    pub fn check_spec(&self, spec: &GameSpec) -> Result<()> {
        match self {
            Opponent::Policy(p) => p.check_spec(spec),
            Opponent::Scripted(s) => s.check_spec(spec),
            Opponent::Tabular(t) => {
                if t.game() == spec.game_id {
                    Ok(())
                } else {
                    Err(L2eError::GameMismatch {
                        expected: spec.game_id,
                        found: t.game(),
                    })
                }
            }
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Opponent::Policy(_) => "policy".to_string(),
            Opponent::Scripted(s) => s.kind.name().to_string(),
            Opponent::Tabular(_) => "nash".to_string(),
        }
    }

    pub fn as_policy(&self) -> Option<&PolicyParams> {
        match self {
            Opponent::Policy(p) => Some(p),
            _ => None,
        }
    }
}

/// A game with one seat frozen.
#[derive(Clone, Debug)]
pub struct MdpView {
    pub spec: GameSpec,
    pub learner: Player,
    pub frozen_opponent: Opponent,
}

pub fn make_mdp(spec: GameSpec, learner: Player, opponent: Opponent) -> Result<MdpView> {
    opponent.check_spec(&spec)?;
    Ok(MdpView {
        spec,
        learner,
        frozen_opponent: opponent,
    })
}

impl MdpView {
    pub fn new(spec: GameSpec, learner: Player, opponent: Opponent) -> Result<Self> {
        make_mdp(spec, learner, opponent)
    }

    /// The same game seen from the other seat, with `occupant` frozen there.
    pub fn mirrored(&self, occupant: Opponent) -> Result<MdpView> {
        make_mdp(self.spec, self.learner.other(), occupant)
    }
}

/// One episode as seen by the learner.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub obs_dim: usize,
    /// Row-major `len x obs_dim`.
    pub obs: Vec<f64>,
    pub masks: Vec<ActionSet>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Learner log-probabilities; empty when the learner is not a policy.
    pub log_probs: Vec<f64>,
    /// Reward of an episode that ended before the learner's first decision.
    pub unattributed_reward: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_at(&self, t: usize) -> &[f64] {
        &self.obs[t * self.obs_dim..(t + 1) * self.obs_dim]
    }

    pub fn total_return(&self) -> f64 {
        self.rewards.iter().sum::<f64>() + self.unattributed_reward
    }

    pub fn discounted_return(&self, gamma: f64) -> f64 {
        discounted_return(self, gamma)
    }
}

pub fn discounted_return(traj: &Trajectory, gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut disc = 1.0;
    for r in &traj.rewards {
        acc += disc * r;
        disc *= gamma;
    }
    acc + traj.unattributed_reward
}

/// Discount used for learning in each game.
pub fn default_gamma(game: GameId) -> f64 {
    match game {
        GameId::Soccer => 0.99,
        _ => 1.0,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReturnMode {
    /// Whole-episode return times the summed log-probabilities.
    #[default]
    Total,
    /// Each step weighted by the discounted return from that step on.
    RewardToGo,
    /// Reward-to-go minus a per-batch ridge fit of it on
    /// `[obs, obs^2, t, t^2, t^3, 1]`.
    LinearFeature,
}

/// Who sits in the learner seat while sampling.
#[derive(Clone, Copy)]
pub enum Learner<'a> {
    Policy(&'a PolicyParams),
    Other(&'a Opponent),
}

impl<'a> From<&'a PolicyParams> for Learner<'a> {
    fn from(p: &'a PolicyParams) -> Self {
        Learner::Policy(p)
    }
}

impl<'a> From<&'a Opponent> for Learner<'a> {
    fn from(o: &'a Opponent) -> Self {
        match o {
            Opponent::Policy(p) => Learner::Policy(p),
            other => Learner::Other(other),
        }
    }
}

fn run_episode(
    mdp: &MdpView,
    learner: Learner<'_>,
    rng: &mut Rng,
    mut record: Option<&mut Trajectory>,
) -> Result<f64> {
    let spec = &mdp.spec;
    let me = mdp.learner;
    let mut state = spec.reset(rng);
    let mut obs = vec![0.0; spec.obs_dim];
    let mut total = 0.0;
    let mut acted = false;
    loop {
        let acting = spec.acting_players(&state);
        if acting.is_empty() {
            break;
        }
        let mut actions = [None, None];
        for p in acting.iter() {
            let a = if p == me {
                let legal = spec.legal_actions(&state, p)?;
                spec.encode_into(&state, p, &mut obs);
                let (a, logp) = match learner {
                    Learner::Policy(pol) => {
                        let (a, lp) = pol.sample_action(&obs, legal, rng)?;
                        (a, Some(lp))
                    }
                    Learner::Other(o) => (o.act(spec, &state, p, rng)?, None),
                };
                if let Some(tr) = record.as_deref_mut() {
                    tr.obs.extend_from_slice(&obs);
                    tr.masks.push(legal);
                    tr.actions.push(a);
                    tr.rewards.push(0.0);
                    tr.dones.push(false);
                    if let Some(lp) = logp {
                        tr.log_probs.push(lp);
                    }
                }
                acted = true;
                a
            } else {
                mdp.frozen_opponent.act(spec, &state, p, rng)?
            };
            actions[p.index()] = Some(a);
        }
        let out = spec.step(&state, actions)?;
        let r = out.rewards[me.index()];
        total += r;
        if let Some(tr) = record.as_deref_mut() {
            if acted {
                *tr.rewards.last_mut().expect("learner acted") += r;
            } else {
                tr.unattributed_reward += r;
            }
        }
        state = out.next_state;
    }
    if let Some(tr) = record {
        if let Some(d) = tr.dones.last_mut() {
            *d = true;
        }
    }
    Ok(total)
}

/// Samples one complete episode.
pub fn sample_episode<'a>(mdp: &MdpView, learner: impl Into<Learner<'a>>, rng: &mut Rng) -> Result<Trajectory> {
    let mut tr = Trajectory {
        obs_dim: mdp.spec.obs_dim,
        ..Default::default()
    };
    run_episode(mdp, learner.into(), rng, Some(&mut tr))?;
    Ok(tr)
}

/// `n` independent episodes. Each episode draws from its own generator
/// forked off `rng`, so the set depends only on the incoming stream.
pub fn sample_trajectories(mdp: &MdpView, policy: &PolicyParams, n: usize, rng: &mut Rng) -> Result<Vec<Trajectory>> {
    sample_with(mdp, Learner::Policy(policy), n, rng)
}

pub fn sample_with(mdp: &MdpView, learner: Learner<'_>, n: usize, rng: &mut Rng) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(L2eError::InvalidArgument("need at least one trajectory".into()));
    }
    if let Learner::Policy(p) = learner {
        p.check_spec(&mdp.spec)?;
    }
    (0..n)
        .map(|_| {
            let mut erng = fork(rng);
            sample_episode(mdp, learner, &mut erng)
        })
        .collect()
}

/// Undiscounted return of one episode, without recording it.
pub fn play_return(mdp: &MdpView, learner: Learner<'_>, rng: &mut Rng) -> Result<f64> {
    run_episode(mdp, learner, rng, None)
}

/// Mean undiscounted return over `episodes` fresh episodes.
pub fn evaluate(mdp: &MdpView, learner: Learner<'_>, episodes: usize, rng: &mut Rng) -> Result<ReturnStat> {
    if episodes == 0 {
        return Err(L2eError::InvalidArgument("zero evaluation episodes".into()));
    }
    let rets = (0..episodes)
        .map(|_| {
            let mut erng = fork(rng);
            play_return(mdp, learner, &mut erng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReturnStat::from_samples(&rets))
}

/// Per-step advantage weights with a leave-one-out mean baseline.
pub fn advantages(trajs: &[Trajectory], gamma: f64, mode: ReturnMode) -> Vec<Vec<f64>> {
    let n = trajs.len();
    match mode {
        ReturnMode::Total => {
            let rets: Vec<f64> = trajs.iter().map(|t| discounted_return(t, gamma)).collect();
            let sum: f64 = rets.iter().sum();
            trajs
                .iter()
                .zip(&rets)
                .map(|(t, &r)| {
                    let b = if n > 1 { (sum - r) / (n as f64 - 1.0) } else { 0.0 };
                    vec![r - b; t.len()]
                })
                .collect()
        }
        ReturnMode::LinearFeature => linear_feature_advantages(trajs, gamma),
        ReturnMode::RewardToGo => {
            let togo = rewards_to_go(trajs, gamma);
            let horizon = togo.iter().map(Vec::len).max().unwrap_or(0);
            let mut sums = vec![0.0; horizon];
            let mut counts = vec![0usize; horizon];
            for g in &togo {
                for (s, v) in g.iter().enumerate() {
                    sums[s] += v;
                    counts[s] += 1;
                }
            }
            togo.iter()
                .map(|g| {
                    let mut disc = 1.0;
                    g.iter()
                        .enumerate()
                        .map(|(s, &v)| {
                            let b = if counts[s] > 1 {
                                (sums[s] - v) / (counts[s] as f64 - 1.0)
                            } else {
                                0.0
                            };
                            let w = disc * (v - b);
                            disc *= gamma;
                            w
                        })
                        .collect()
                })
                .collect()
        }
    }
}

fn rewards_to_go(trajs: &[Trajectory], gamma: f64) -> Vec<Vec<f64>> {
    trajs
        .iter()
        .map(|t| {
            let mut g = vec![0.0; t.len()];
            let mut acc = 0.0;
            for s in (0..t.len()).rev() {
                acc = t.rewards[s] + gamma * acc;
                g[s] = acc;
            }
            g
        })
        .collect()
}

const BASELINE_RIDGE: f64 = 1e-5;

fn baseline_features(t: &Trajectory, s: usize, out: &mut Vec<f64>) {
    out.clear();
    let o = t.obs_at(s);
    out.extend(o.iter().map(|x| x.clamp(-10.0, 10.0)));
    out.extend(o.iter().map(|x| x.clamp(-10.0, 10.0).powi(2)));
    let ts = s as f64 / 100.0;
    out.extend([ts, ts * ts, ts * ts * ts, 1.0]);
}

fn linear_feature_advantages(trajs: &[Trajectory], gamma: f64) -> Vec<Vec<f64>> {
    use nalgebra::{DMatrix, DVector};
    let togo = rewards_to_go(trajs, gamma);
    let dim = trajs.first().map_or(0, |t| 2 * t.obs_dim + 4);
    let mut xtx = DMatrix::<f64>::zeros(dim, dim);
    let mut xty = DVector::<f64>::zeros(dim);
    let mut f = Vec::with_capacity(dim);
    for (t, g) in trajs.iter().zip(&togo) {
        for (s, &y) in g.iter().enumerate() {
            baseline_features(t, s, &mut f);
            let x = DVector::from_column_slice(&f);
            xtx.ger(1.0, &x, &x, 1.0);
            xty.axpy(y, &x, 1.0);
        }
    }
    // grow the ridge until the system is well posed
    let coef = (0..6).find_map(|k| {
        let mut a = xtx.clone();
        for i in 0..dim {
            a[(i, i)] += BASELINE_RIDGE * 10f64.powi(k);
        }
        let w = a.cholesky()?.solve(&xty);
        w.iter().all(|v| v.is_finite()).then_some(w)
    });
    trajs
        .iter()
        .zip(&togo)
        .map(|(t, g)| {
            let mut disc = 1.0;
            g.iter()
                .enumerate()
                .map(|(s, &v)| {
                    let b = coef.as_ref().map_or(0.0, |w| {
                        baseline_features(t, s, &mut f);
                        f.iter().zip(w.iter()).map(|(a, b)| a * b).sum()
                    });
                    let w = disc * (v - b);
                    disc *= gamma;
                    w
                })
                .collect()
        })
        .collect()
}

/// `(1/n) sum_i sum_t w[i][t] * grad log pi(a_it | s_it)` with fixed weights.
pub fn weighted_score_gradient(policy: &PolicyParams, trajs: &[Trajectory], weights: &[Vec<f64>]) -> Result<GradientVector> {
    if trajs.is_empty() {
        return Err(L2eError::InvalidArgument("empty trajectory list".into()));
    }
    let mut g = GradientVector::zeros_like(policy);
    let k = 1.0 / trajs.len() as f64;
    for (tr, w) in trajs.iter().zip(weights) {
        for t in 0..tr.len() {
            if w[t] != 0.0 {
                policy.accumulate_logprob_grad(tr.obs_at(t), tr.actions[t], tr.masks[t], k * w[t], &mut g)?;
            }
        }
    }
    Ok(g)
}

/// Gradient of the negative expected discounted return (the loss); stepping
/// against it raises the return.
pub fn pg_gradient(policy: &PolicyParams, trajs: &[Trajectory], gamma: f64) -> Result<GradientVector> {
    pg_gradient_with(policy, trajs, gamma, ReturnMode::Total)
}

pub fn pg_gradient_with(policy: &PolicyParams, trajs: &[Trajectory], gamma: f64, mode: ReturnMode) -> Result<GradientVector> {
    if trajs.is_empty() {
        return Err(L2eError::InvalidArgument("empty trajectory list".into()));
    }
    let w = advantages(trajs, gamma, mode);
    let mut g = weighted_score_gradient(policy, trajs, &w)?;
    g.scale(-1.0);
    Ok(g)
}

/// Debug dump: one row per learner step.
pub fn write_trajectory_csv<W: Write>(mut out: W, trajs: &[Trajectory]) -> Result<()> {
    let obs_dim = trajs.first().map_or(0, |t| t.obs_dim);
    let mut header = String::from("episode,t");
    for i in 0..obs_dim {
        header.push_str(&format!(",obs{i}"));
    }
    header.push_str(",action,reward,done");
    writeln!(out, "{header}")?;
    for (e, tr) in trajs.iter().enumerate() {
        for t in 0..tr.len() {
            let mut row = format!("{e},{t}");
            for v in tr.obs_at(t) {
                row.push_str(&format!(",{v}"));
            }
            row.push_str(&format!(",{},{},{}", tr.actions[t], tr.rewards[t], tr.dones[t] as u8));
            writeln!(out, "{row}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::poker::{CALL, CHECK};
    use crate::rng::from_seed;
    use crate::zoo::{ScriptKind, ScriptedOpponent};

    fn traj_with_rewards(rs: &[f64]) -> Trajectory {
        let mut t = Trajectory {
            obs_dim: 1,
            obs: vec![1.0; rs.len()],
            masks: vec![ActionSet::all(2); rs.len()],
            actions: vec![0; rs.len()],
            rewards: rs.to_vec(),
            dones: vec![false; rs.len()],
            log_probs: vec![],
            unattributed_reward: 0.0,
        };
        if let Some(d) = t.dones.last_mut() {
            *d = true;
        }
        t
    }

    #[test]
    fn linear_feature_baseline_absorbs_linear_returns() {
        // one-step episodes whose return is 3*obs - 1: the fitted baseline
        // explains it up to ridge shrinkage
        let trajs: Vec<Trajectory> = (0..12)
            .map(|i| {
                let x = i as f64 / 4.0;
                let mut t = traj_with_rewards(&[3.0 * x - 1.0]);
                t.obs = vec![x];
                t
            })
            .collect();
        let w = advantages(&trajs, 1.0, ReturnMode::LinearFeature);
        assert!(w.iter().flatten().all(|a| a.abs() < 1e-3), "{w:?}");
        // returns the features cannot explain leave a residual
        let mut noisy = trajs.clone();
        noisy[3].rewards[0] += 5.0;
        let w = advantages(&noisy, 1.0, ReturnMode::LinearFeature);
        assert!(w[3][0] > 3.0);
    }

    #[test]
    fn discounted_returns() {
        assert_eq!(discounted_return(&traj_with_rewards(&[0.0, 0.0, 2.0]), 1.0), 2.0);
        assert_eq!(discounted_return(&traj_with_rewards(&[1.0, 1.0, 1.0]), 0.5), 1.75);
        let r = discounted_return(&traj_with_rewards(&[0.0, 0.0, 0.0, 3.0]), 0.9);
        assert!((r - 0.9f64.powi(3) * 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_returns_give_zero_gradient() {
        let spec = GameSpec::rps();
        let p = PolicyParams::init(&spec, &mut from_seed(0));
        let mut trajs = vec![traj_with_rewards(&[1.0]), traj_with_rewards(&[1.0])];
        trajs[1].actions[0] = 2;
        trajs.iter_mut().for_each(|t| t.masks[0] = ActionSet::all(3));
        let g = pg_gradient(&p, &trajs, 1.0).unwrap();
        assert!(g.is_zero());
        assert!(pg_gradient(&p, &[], 1.0).is_err());
    }

    #[test]
    fn stored_log_probs_match_forward() {
        let spec = GameSpec::leduc();
        let p = PolicyParams::init(&spec, &mut from_seed(5));
        let mdp = make_mdp(spec, Player::First, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Random))).unwrap();
        let trajs = sample_trajectories(&mdp, &p, 50, &mut from_seed(6)).unwrap();
        for tr in &trajs {
            assert_eq!(tr.log_probs.len(), tr.len());
            for t in 0..tr.len() {
                let lp = p.log_prob(tr.obs_at(t), tr.actions[t], tr.masks[t]).unwrap();
                assert!((lp - tr.log_probs[t]).abs() < 1e-9);
            }
            if !tr.is_empty() {
                assert_eq!(tr.dones.iter().filter(|&&d| d).count(), 1);
                assert!(*tr.dones.last().unwrap());
                assert!(tr.rewards[..tr.len() - 1].iter().all(|&r| r == 0.0));
            }
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let spec = GameSpec::soccer();
        let p = PolicyParams::init(&spec, &mut from_seed(5));
        let mdp = make_mdp(spec, Player::First, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::SoccerAggressive))).unwrap();
        let a = sample_trajectories(&mdp, &p, 5, &mut from_seed(1)).unwrap();
        let b = sample_trajectories(&mdp, &p, 5, &mut from_seed(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn always_call_opponent_never_raises() {
        let spec = GameSpec::leduc();
        let mdp = make_mdp(spec, Player::Second, Opponent::Scripted(ScriptedOpponent::new(ScriptKind::Call))).unwrap();
        let p = PolicyParams::init(&spec, &mut from_seed(2));
        let mut rng = from_seed(3);
        for _ in 0..300 {
            let tr = sample_episode(&mdp, &p, &mut rng).unwrap();
            // an opponent raise would show up as chips to call at the learner's next decision
            for t in 0..tr.len() {
                assert_eq!(tr.obs_at(t)[5], 0.0);
                assert!(tr.masks[t].contains(CHECK) && !tr.masks[t].contains(CALL));
            }
        }
    }

    #[test]
    fn mismatched_opponent_is_rejected() {
        let p = PolicyParams::init(&GameSpec::soccer(), &mut from_seed(0));
        assert!(make_mdp(GameSpec::leduc(), Player::First, Opponent::policy(p)).is_err());
    }

    #[test]
    fn trajectory_csv_has_one_row_per_step() {
        let t = traj_with_rewards(&[0.0, 1.0]);
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &[t]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "episode,t,obs0,action,reward,done");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2], "0,1,1,0,1,1");
    }
}
