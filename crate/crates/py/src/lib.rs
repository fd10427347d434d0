//! Python bindings: policies, training, adaptation, CFR and the MMD metric.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use l2e_core::eval::{self, AdaptSpec};
use l2e_core::io::{self, RunConfig};
use l2e_core::meta::{self, PoolSource};
use l2e_core::mmd;
use l2e_core::rng::SeedTree;
use l2e_core::zoo::{self, ScriptKind, ScriptedOpponent};
use l2e_core::{ActionSet, GameId, GameSpec, L2eError, Opponent, PolicyParams};

fn py_err(e: L2eError) -> PyErr {
    match e {
        L2eError::Io(e) => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn game_of(name: &str) -> PyResult<GameId> {
    name.parse().map_err(py_err)
}

/// A policy network for one game.
#[pyclass(name = "Policy", module = "l2e")]
#[derive(Clone)]
pub struct PyPolicy {
    inner: PolicyParams,
}

#[pymethods]
impl PyPolicy {
    /// Random initialization for `game` from `seed`.
    #[new]
    #[pyo3(signature = (game, seed = 0))]
    fn new(game: &str, seed: u64) -> PyResult<Self> {
        let spec = GameSpec::from_id(game_of(game)?);
        let mut rng = SeedTree::new(seed).stream("init", 0);
        Ok(PyPolicy {
            inner: PolicyParams::init(&spec, &mut rng),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyPolicy {
            inner: io::load_checkpoint(&path).map_err(py_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_checkpoint(&self.inner, &path).map_err(py_err)
    }

    #[getter]
    fn game(&self) -> String {
        self.inner.game().to_string()
    }

    #[getter]
    fn sizes(&self) -> [usize; 4] {
        self.inner.sizes()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn parameters(&self) -> Vec<f64> {
        self.inner.as_slice().to_vec()
    }

    /// Action probabilities at `obs`; `legal` lists the allowed action ids
    /// (all actions when omitted).
    #[pyo3(signature = (obs, legal = None))]
    fn probs(&self, obs: Vec<f64>, legal: Option<Vec<usize>>) -> PyResult<Vec<f64>> {
        let n = self.inner.sizes()[3];
        let mask = match legal {
            Some(a) if a.iter().any(|&x| x >= n) => return Err(PyValueError::new_err(format!("action id >= {n}"))),
            Some(a) => ActionSet::from_actions(&a),
            None => ActionSet::all(n),
        };
        Ok(self.inner.forward(&obs, mask).map_err(py_err)?.probs)
    }

    fn __repr__(&self) -> String {
        format!("Policy(game={}, sizes={:?})", self.inner.game(), self.inner.sizes())
    }
}

fn config_from(game: &str, config: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<RunConfig> {
    let mut cfg = match config {
        Some(text) => io::parse_config(text).map_err(py_err)?,
        None => RunConfig::for_game(game_of(game)?),
    };
    if let Some(d) = overrides {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let value = v.str()?.to_string();
            let (section, key) = match key.split_once('.') {
                Some((s, k)) => (Some(s.to_string()), k.to_string()),
                None => (None, key),
            };
            cfg.set(section.as_deref(), &key, &value).map_err(py_err)?;
        }
    }
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// Resolved configuration as INI text. `overrides` maps keys (optionally
/// `section.key`) to values.
#[pyfunction]
#[pyo3(signature = (game = "leduc", config = None, overrides = None))]
fn resolve_config(game: &str, config: Option<&str>, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<String> {
    Ok(config_from(game, config, overrides)?.to_text())
}

/// Meta-trains a base policy. Returns `(policy, metric)` where `metric` is a
/// list of `(epoch, mean adapted return)` pairs.
#[pyfunction]
#[pyo3(signature = (game = "leduc", seed = 0, config = None, overrides = None))]
fn train(
    py: Python<'_>,
    game: &str,
    seed: u64,
    config: Option<&str>,
    overrides: Option<&Bound<'_, PyDict>>,
) -> PyResult<(PyPolicy, Vec<(usize, f64)>)> {
    let cfg = config_from(game, config, overrides)?;
    let spec = GameSpec::from_id(cfg.game);
    let out = py
        .allow_threads(|| {
            let mut rng = SeedTree::new(seed).stream("train", 0);
            meta::train(&cfg.train, &cfg.osg, &spec, PoolSource::L2E, &mut rng)
        })
        .map_err(py_err)?;
    Ok((PyPolicy { inner: out.base }, out.history.metric))
}

fn opponent_of(name: &str, spec: &GameSpec) -> PyResult<Opponent> {
    if name == "nash" {
        let s = zoo::cfr_solve(spec, 1000).map_err(py_err)?;
        return Ok(Opponent::Tabular(Arc::new(zoo::nash_opponent(s).map_err(py_err)?)));
    }
    let o = ScriptedOpponent::new(ScriptKind::parse(name).map_err(py_err)?);
    o.check_spec(spec).map_err(py_err)?;
    Ok(Opponent::Scripted(o))
}

/// Adapts `policy` to a scripted opponent (or `"nash"`) with `steps`
/// gradient steps. Returns per-step `(mean, std)` across seeds.
#[pyfunction]
#[pyo3(signature = (policy, opponent, steps = 3, step_size = 0.1, trajs = 20, episodes = 2000, seeds = 10, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn test_adapt(
    py: Python<'_>,
    policy: &PyPolicy,
    opponent: &str,
    steps: usize,
    step_size: f64,
    trajs: usize,
    episodes: usize,
    seeds: usize,
    seed: u64,
) -> PyResult<Vec<(f64, f64)>> {
    let game = policy.inner.game();
    let spec = GameSpec::from_id(game);
    let opp = opponent_of(opponent, &spec)?;
    let adapt = AdaptSpec {
        steps,
        step_size,
        trajs_per_step: trajs,
        gamma: l2e_core::rollout::default_gamma(game),
    };
    let base = policy.inner.clone();
    let rep = py
        .allow_threads(|| {
            let mut rng = SeedTree::new(seed).stream("test-adapt", 0);
            eval::evaluate_matchup("L2E", &base, &spec, &opp, &adapt, episodes, seeds, &mut rng)
        })
        .map_err(py_err)?;
    Ok(rep.steps.iter().map(|s| (s.mean, s.std)).collect())
}

/// Exploitability of the CFR average strategy after `iters` iterations.
#[pyfunction]
fn cfr_exploitability(py: Python<'_>, game: &str, iters: usize) -> PyResult<f64> {
    let spec = GameSpec::from_id(game_of(game)?);
    py.allow_threads(|| {
        let s = zoo::cfr_solve(&spec, iters)?;
        zoo::exploitability(&s, &spec)
    })
    .map_err(py_err)
}

/// Unbiased squared MMD between two sets of equal-length vectors with an
/// RBF kernel of bandwidth `h`.
#[pyfunction]
#[pyo3(signature = (a, b, h = 1.0))]
fn mmd2(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, h: f64) -> PyResult<f64> {
    let wrap = |s: Vec<Vec<f64>>| -> Vec<mmd::TrajectoryEmbedding> {
        s.into_iter()
            .map(|v| {
                let valid_len = v.len();
                mmd::TrajectoryEmbedding { vector: v, valid_len }
            })
            .collect()
    };
    let cfg = mmd::KernelConfig {
        bandwidth: h,
        ..mmd::KernelConfig::default()
    };
    cfg.validate().map_err(py_err)?;
    mmd::mmd2(&wrap(a), &wrap(b), &cfg).map_err(py_err)
}

#[pymodule]
pub fn l2e(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(resolve_config, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(test_adapt, m)?)?;
    m.add_function(wrap_pyfunction!(cfr_exploitability, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2, m)?)?;
    m.add("GAMES", GameId::ALL.map(|g| g.name()).to_vec())?;
    Ok(())
}
