//! Trajectory embeddings, RBF kernel, the unbiased MMD² estimator and its
//! score-function gradient with respect to the policy that generated one of
//! the two sample sets.

use crate::error::{L2eError, Result};
use crate::policy::{GradientVector, PolicyParams};
use crate::rollout::{sample_trajectories, weighted_score_gradient, MdpView, Trajectory};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ActionEncoding {
    /// Action id stored as one real.
    #[default]
    Scalar,
    /// One-hot over the given number of actions.
    OneHot(usize),
}

impl ActionEncoding {
    fn width(self) -> usize {
        match self {
            ActionEncoding::Scalar => 1,
            ActionEncoding::OneHot(n) => n,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    pub bandwidth: f64,
    pub min_len: usize,
    pub actions: ActionEncoding,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            bandwidth: 1.0,
            min_len: 20,
            actions: ActionEncoding::Scalar,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(L2eError::InvalidArgument(format!("bandwidth must be positive, got {}", self.bandwidth)));
        }
        if self.min_len == 0 {
            return Err(L2eError::InvalidArgument("min_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEmbedding {
    pub vector: Vec<f64>,
    pub valid_len: usize,
}

/// Stacks `(obs, action)` of the first `min_len` steps; later slots stay zero.
pub fn embed(traj: &Trajectory, cfg: &KernelConfig) -> TrajectoryEmbedding {
    let aw = cfg.actions.width();
    let row = traj.obs_dim + aw;
    let mut vector = vec![0.0; cfg.min_len * row];
    let valid_len = traj.len().min(cfg.min_len);
    for t in 0..valid_len {
        let dst = &mut vector[t * row..(t + 1) * row];
        dst[..traj.obs_dim].copy_from_slice(traj.obs_at(t));
        match cfg.actions {
            ActionEncoding::Scalar => dst[traj.obs_dim] = traj.actions[t] as f64,
            ActionEncoding::OneHot(_) => dst[traj.obs_dim + traj.actions[t]] = 1.0,
        }
    }
    TrajectoryEmbedding { vector, valid_len }
}

pub fn embed_all(trajs: &[Trajectory], cfg: &KernelConfig) -> Vec<TrajectoryEmbedding> {
    trajs.iter().map(|t| embed(t, cfg)).collect()
}

pub fn rbf(a: &TrajectoryEmbedding, b: &TrajectoryEmbedding, cfg: &KernelConfig) -> Result<f64> {
    if a.vector.len() != b.vector.len() {
        return Err(L2eError::Shape(format!(
            "embedding lengths differ: {} vs {}",
            a.vector.len(),
            b.vector.len()
        )));
    }
    let d2: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-d2 / (2.0 * cfg.bandwidth)).exp())
}

fn check_sizes(a: usize, b: usize) -> Result<()> {
    if a < 2 || b < 2 {
        return Err(L2eError::InvalidArgument(format!(
            "unbiased MMD needs at least two samples per set, got {a} and {b}"
        )));
    }
    Ok(())
}

/// Unbiased estimate of MMD² between the distributions behind `a` and `b`.
///
/// For equal set sizes the cross term skips the paired diagonal `k(a_i, b_i)`
/// (the two-sample U-statistic), which makes `mmd2(a, a)` exactly zero; for
/// unequal sizes every cross pair is used.
pub fn mmd2(a: &[TrajectoryEmbedding], b: &[TrajectoryEmbedding], cfg: &KernelConfig) -> Result<f64> {
    check_sizes(a.len(), b.len())?;
    let (m, n) = (a.len(), b.len());
    let mut kaa = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            kaa += 2.0 * rbf(&a[i], &a[j], cfg)?;
        }
    }
    let mut kbb = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            kbb += 2.0 * rbf(&b[i], &b[j], cfg)?;
        }
    }
    let paired = m == n;
    let mut cross = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            if !(paired && i == j) {
                cross.push(rbf(&a[i], &b[j], cfg)?);
            }
        }
    }
    // sorted summation keeps mmd2(a, b) and mmd2(b, a) bit-identical
    cross.sort_by(f64::total_cmp);
    let kab: f64 = cross.iter().sum();
    let cross_pairs = if paired { m * (m - 1) } else { m * n } as f64;
    Ok(kaa / (m * (m - 1)) as f64 + kbb / (n * (n - 1)) as f64 - 2.0 * kab / cross_pairs)
}

/// Coefficient of each sample's score `grad log p(y_j)` in the gradient of
/// each estimator term, for `y = samples` drawn from the differentiated
/// policy and `reference` drawn independently of it.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTerms {
    pub reference: Vec<f64>,
    pub within: Vec<f64>,
    pub cross: Vec<f64>,
}

impl ScoreTerms {
    pub fn total(&self) -> Vec<f64> {
        (0..self.within.len())
            .map(|j| self.reference[j] + self.within[j] + self.cross[j])
            .collect()
    }
}

pub fn score_terms(reference: &[TrajectoryEmbedding], samples: &[TrajectoryEmbedding], cfg: &KernelConfig) -> Result<ScoreTerms> {
    check_sizes(reference.len(), samples.len())?;
    let (m, n) = (reference.len(), samples.len());
    let mut terms = ScoreTerms {
        reference: vec![0.0; n],
        within: vec![0.0; n],
        cross: vec![0.0; n],
    };
    // each kernel pair credits its weight to every sample of `y` it touches;
    // pairs made only of reference points touch none, so `reference` stays 0
    let ww = 1.0 / (n * (n - 1)) as f64;
    for j in 0..n {
        for j2 in 0..n {
            if j != j2 {
                let k = ww * rbf(&samples[j], &samples[j2], cfg)?;
                terms.within[j] += k;
                terms.within[j2] += k;
            }
        }
    }
    let paired = m == n;
    let wc = -2.0 / if paired { m * (m - 1) } else { m * n } as f64;
    for (i, x) in reference.iter().enumerate() {
        for (j, y) in samples.iter().enumerate() {
            if !(paired && i == j) {
                terms.cross[j] += wc * rbf(x, y, cfg)?;
            }
        }
    }
    Ok(terms)
}

/// Score-function gradient of `MMD²(reference, samples)` in `policy`, where
/// `samples` were generated by `policy` in the learner seat. Only the steps
/// inside the embedding window carry score weight.
pub fn mmd2_grad_from(
    policy: &PolicyParams,
    reference: &[TrajectoryEmbedding],
    samples: &[Trajectory],
    cfg: &KernelConfig,
) -> Result<GradientVector> {
    let emb = embed_all(samples, cfg);
    let coef = score_terms(reference, &emb, cfg)?.total();
    let n = samples.len() as f64;
    let weights: Vec<Vec<f64>> = samples
        .iter()
        .zip(&coef)
        .map(|(t, &c)| (0..t.len()).map(|s| if s < cfg.min_len { n * c } else { 0.0 }).collect())
        .collect();
    weighted_score_gradient(policy, samples, &weights)
}

/// Samples `n` fresh trajectories of `policy` in `mdp` and returns the MMD²
/// gradient together with the estimate on that sample.
pub fn mmd2_grad(
    policy: &PolicyParams,
    mdp: &MdpView,
    reference: &[TrajectoryEmbedding],
    n: usize,
    cfg: &KernelConfig,
    rng: &mut Rng,
) -> Result<(GradientVector, f64)> {
    let samples = sample_trajectories(mdp, policy, n, rng)?;
    let value = mmd2(reference, &embed_all(&samples, cfg), cfg)?;
    Ok((mmd2_grad_from(policy, reference, &samples, cfg)?, value))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(v: &[f64]) -> TrajectoryEmbedding {
        TrajectoryEmbedding {
            vector: v.to_vec(),
            valid_len: 1,
        }
    }

    fn traj(len: usize, obs_dim: usize) -> Trajectory {
        Trajectory {
            obs_dim,
            obs: (0..len * obs_dim).map(|i| i as f64 + 1.0).collect(),
            masks: vec![crate::ActionSet::all(2); len],
            actions: (0..len).map(|t| t % 2).collect(),
            rewards: vec![0.0; len],
            dones: (0..len).map(|t| t + 1 == len).collect(),
            log_probs: vec![],
            unattributed_reward: 0.0,
        }
    }

    #[test]
    fn embedding_pads_and_clips() {
        let cfg = KernelConfig::default();
        let short = embed(&traj(3, 2), &cfg);
        assert_eq!(short.vector.len(), 20 * 3);
        assert_eq!(short.valid_len, 3);
        assert!(short.vector[9..].iter().all(|&v| v == 0.0));
        assert_eq!(&short.vector[..3], &[1.0, 2.0, 0.0]);
        let long = traj(25, 2);
        let el = embed(&long, &cfg);
        assert_eq!(el.valid_len, 20);
        assert_eq!(el.vector[57], long.obs_at(19)[0]);
        assert_eq!(embed(&long, &cfg), el);
    }

    #[test]
    fn one_hot_actions() {
        let cfg = KernelConfig {
            min_len: 2,
            actions: ActionEncoding::OneHot(2),
            ..Default::default()
        };
        let v = embed(&traj(2, 1), &cfg).vector;
        assert_eq!(v, vec![1.0, 1.0, 0.0, 2.0, 0.0, 1.0]);
    }

    #[test]
    fn kernel_values() {
        let cfg = KernelConfig::default();
        assert_eq!(rbf(&e(&[0.3, 0.1]), &e(&[0.3, 0.1]), &cfg).unwrap(), 1.0);
        let k = rbf(&e(&[0.0, 0.0]), &e(&[1.0, 1.0]), &cfg).unwrap();
        assert!((k - (-1.0f64).exp()).abs() < 1e-15);
        assert!(rbf(&e(&[0.0]), &e(&[0.0, 1.0]), &cfg).is_err());
    }

    #[test]
    fn two_point_sets_by_hand() {
        let cfg = KernelConfig::default();
        let a = [e(&[0.0]), e(&[0.0])];
        let b = [e(&[2.0]), e(&[2.0])];
        // within terms are 1 each, every cross pair is exp(-2)
        let want = 1.0 + 1.0 - 2.0 * (-2.0f64).exp();
        assert!((mmd2(&a, &b, &cfg).unwrap() - want).abs() < 1e-15);
        assert!(mmd2(&a[..1], &b, &cfg).is_err());
    }

    #[test]
    fn identical_sets_give_zero() {
        let cfg = KernelConfig::default();
        let a: Vec<_> = (0..8).map(|i| e(&[i as f64 * 0.3, 1.0])).collect();
        assert!(mmd2(&a, &a, &cfg).unwrap().abs() < 1e-9);
        let b: Vec<_> = (0..8).map(|i| e(&[i as f64 * 0.2, 0.0])).collect();
        assert_eq!(mmd2(&a, &b, &cfg).unwrap(), mmd2(&b, &a, &cfg).unwrap());
    }

    #[test]
    fn reference_term_has_no_score_weight() {
        let cfg = KernelConfig::default();
        let a: Vec<_> = (0..4).map(|i| e(&[i as f64])).collect();
        let b: Vec<_> = (0..5).map(|i| e(&[i as f64 * 0.5])).collect();
        let t = score_terms(&a, &b, &cfg).unwrap();
        assert!(t.reference.iter().all(|&c| c == 0.0));
        assert!(t.within.iter().all(|&c| c > 0.0));
        assert!(t.cross.iter().all(|&c| c < 0.0));
    }
}
