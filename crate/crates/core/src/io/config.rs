//! INI-style run configuration.
//!
//! ```text
//! # comment
//! [run]
//! game = leduc
//! seed = 7
//! [train]
//! alpha = 0.1
//! ```
//!
//! Keys outside any section resolve to the first section that knows them, in
//! the order run, train, osg, kernel. `alpha` and `gamma` exist in both
//! `[train]` and `[osg]`; bare they mean the training ones.

use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{L2eError, Result};
use crate::games::GameId;
use crate::meta::{MetaGradient, OuterOptimizer, OuterReduction, TrainConfig};
use crate::mmd::{ActionEncoding, KernelConfig};
use crate::osg::OsgConfig;
use crate::rollout::ReturnMode;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub game: GameId,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub train: TrainConfig,
    pub osg: OsgConfig,
}

impl RunConfig {
    pub fn for_game(game: GameId) -> Self {
        RunConfig {
            game,
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            train: TrainConfig::for_game(game),
            osg: OsgConfig::for_game(game),
        }
    }

    pub fn workers(&self) -> usize {
        self.train.workers
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.osg.validate()
    }

    /// Sets one key, as the config file would.
    pub fn set(&mut self, section: Option<&str>, key: &str, value: &str) -> Result<()> {
        let section = match section {
            Some(s) => {
                if !SECTIONS.contains(&s) {
                    return Err(L2eError::Parse(format!("unknown section [{s}]")));
                }
                if !keys_of(s).contains(&key) {
                    return Err(L2eError::Parse(format!("unknown key `{key}` in [{s}]")));
                }
                s
            }
            None => SECTIONS
                .into_iter()
                .find(|s| keys_of(s).contains(&key))
                .ok_or_else(|| L2eError::Parse(format!("unknown key `{key}`")))?,
        };
        let t = &mut self.train;
        let o = &mut self.osg;
        match (section, key) {
            ("run", "game") => self.game = value.parse()?,
            ("run", "seed") => self.seed = parse_num(key, value)?,
            ("run", "out_dir") => self.out_dir = PathBuf::from(value),
            ("run", "workers") => t.workers = positive(key, value)?,
            ("train", "alpha") => t.alpha = nonneg(key, value)?,
            ("train", "beta") => t.beta = nonneg(key, value)?,
            ("train", "test_step") => t.test_step = nonneg(key, value)?,
            ("train", "opponents_per_batch") => t.opponents_per_batch = positive(key, value)?,
            ("train", "trajs_per_opponent") => t.trajs_per_opponent = positive(key, value)?,
            ("train", "inner_steps_train") => t.inner_steps_train = positive(key, value)?,
            ("train", "adapt_steps_test") => t.adapt_steps_test = parse_num(key, value)?,
            ("train", "epochs") => t.epochs = parse_num(key, value)?,
            ("train", "gamma") => t.gamma = unit(key, value)?,
            ("train", "return_mode") => t.return_mode = pick(key, value, RETURN_MODES)?,
            ("train", "meta_gradient") => t.meta_gradient = pick(key, value, META_GRADIENTS)?,
            ("train", "outer_reduction") => t.outer_reduction = pick(key, value, REDUCTIONS)?,
            ("train", "outer_optimizer") => t.outer_optimizer = pick(key, value, OPTIMIZERS)?,
            ("train", "history_episodes") => t.history_episodes = parse_num(key, value)?,
            ("train", "history_every") => t.history_every = parse_num(key, value)?,
            ("osg", "hard_epochs") => o.hard_epochs = parse_num(key, value)?,
            ("osg", "diverse_steps") => o.diverse_steps = parse_num(key, value)?,
            ("osg", "alpha_mmd") => o.alpha_mmd = nonneg(key, value)?,
            ("osg", "n_diverse") => {
                let n: usize = positive(key, value)?;
                if n > 5 {
                    return Err(L2eError::Parse(format!("`{key}` must be at most 5, got {n}")));
                }
                o.n_diverse = n;
            }
            ("osg", "alpha") => o.alpha = nonneg(key, value)?,
            ("osg", "opponent_step") => o.opponent_step = nonneg(key, value)?,
            ("osg", "trajs") => o.trajs = positive(key, value)?,
            ("osg", "mmd_trajs") => {
                let n: usize = parse_num(key, value)?;
                if n < 2 {
                    return Err(L2eError::Parse(format!("`{key}` must be at least 2, got {n}")));
                }
                o.mmd_trajs = n;
            }
            ("osg", "gamma") => o.gamma = unit(key, value)?,
            ("kernel", "bandwidth") => {
                let h: f64 = parse_num(key, value)?;
                if !(h > 0.0 && h.is_finite()) {
                    return Err(L2eError::Parse(format!("`{key}` must be positive, got {value}")));
                }
                o.kernel.bandwidth = h;
            }
            ("kernel", "min_len") => o.kernel.min_len = positive(key, value)?,
            ("kernel", "actions") => o.kernel.actions = parse_actions(value)?,
            _ => unreachable!("key table and setter disagree on `{section}.{key}`"),
        }
        Ok(())
    }

    /// Canonical rendering: every key, fixed order, round-trips through
    /// [`parse_config`].
    pub fn to_text(&self) -> String {
        let t = &self.train;
        let o = &self.osg;
        let k: &KernelConfig = &o.kernel;
        let mut s = String::new();
        let _ = writeln!(s, "[run]");
        let _ = writeln!(s, "game = {}", self.game);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let _ = writeln!(s, "workers = {}", t.workers);
        let _ = writeln!(s, "[train]");
        let _ = writeln!(s, "alpha = {:?}", t.alpha);
        let _ = writeln!(s, "beta = {:?}", t.beta);
        let _ = writeln!(s, "test_step = {:?}", t.test_step);
        let _ = writeln!(s, "opponents_per_batch = {}", t.opponents_per_batch);
        let _ = writeln!(s, "trajs_per_opponent = {}", t.trajs_per_opponent);
        let _ = writeln!(s, "inner_steps_train = {}", t.inner_steps_train);
        let _ = writeln!(s, "adapt_steps_test = {}", t.adapt_steps_test);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "gamma = {:?}", t.gamma);
        let _ = writeln!(s, "return_mode = {}", name_of(t.return_mode, RETURN_MODES));
        let _ = writeln!(s, "meta_gradient = {}", name_of(t.meta_gradient, META_GRADIENTS));
        let _ = writeln!(s, "outer_reduction = {}", name_of(t.outer_reduction, REDUCTIONS));
        let _ = writeln!(s, "outer_optimizer = {}", name_of(t.outer_optimizer, OPTIMIZERS));
        let _ = writeln!(s, "history_episodes = {}", t.history_episodes);
        let _ = writeln!(s, "history_every = {}", t.history_every);
        let _ = writeln!(s, "[osg]");
        let _ = writeln!(s, "hard_epochs = {}", o.hard_epochs);
        let _ = writeln!(s, "diverse_steps = {}", o.diverse_steps);
        let _ = writeln!(s, "alpha_mmd = {:?}", o.alpha_mmd);
        let _ = writeln!(s, "n_diverse = {}", o.n_diverse);
        let _ = writeln!(s, "alpha = {:?}", o.alpha);
        let _ = writeln!(s, "opponent_step = {:?}", o.opponent_step);
        let _ = writeln!(s, "trajs = {}", o.trajs);
        let _ = writeln!(s, "mmd_trajs = {}", o.mmd_trajs);
        let _ = writeln!(s, "gamma = {:?}", o.gamma);
        let _ = writeln!(s, "[kernel]");
        let _ = writeln!(s, "bandwidth = {:?}", k.bandwidth);
        let _ = writeln!(s, "min_len = {}", k.min_len);
        let _ = writeln!(s, "actions = {}", actions_name(k.actions));
        s
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

const SECTIONS: [&str; 4] = ["run", "train", "osg", "kernel"];

fn keys_of(section: &str) -> &'static [&'static str] {
    match section {
        "run" => &["game", "seed", "out_dir", "workers"],
        "train" => &[
            "alpha",
            "beta",
            "test_step",
            "opponents_per_batch",
            "trajs_per_opponent",
            "inner_steps_train",
            "adapt_steps_test",
            "epochs",
            "gamma",
            "return_mode",
            "meta_gradient",
            "outer_reduction",
            "outer_optimizer",
            "history_episodes",
            "history_every",
        ],
        "osg" => &[
            "hard_epochs",
            "diverse_steps",
            "alpha_mmd",
            "n_diverse",
            "alpha",
            "opponent_step",
            "trajs",
            "mmd_trajs",
            "gamma",
        ],
        "kernel" => &["bandwidth", "min_len", "actions"],
        _ => &[],
    }
}

const RETURN_MODES: &[(&str, ReturnMode)] = &[
    ("total", ReturnMode::Total),
    ("reward_to_go", ReturnMode::RewardToGo),
    ("linear_feature", ReturnMode::LinearFeature),
];
const META_GRADIENTS: &[(&str, MetaGradient)] = &[
    ("first_order", MetaGradient::FirstOrder),
    ("surrogate_hessian", MetaGradient::SurrogateHessian),
];
const REDUCTIONS: &[(&str, OuterReduction)] = &[("mean", OuterReduction::Mean), ("sum", OuterReduction::Sum)];
const OPTIMIZERS: &[(&str, OuterOptimizer)] = &[("sgd", OuterOptimizer::Sgd), ("adam", OuterOptimizer::Adam)];

fn pick<T: Copy>(key: &str, value: &str, table: &[(&str, T)]) -> Result<T> {
    table.iter().find(|(n, _)| *n == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = table.iter().map(|(n, _)| *n).collect();
        L2eError::Parse(format!("`{key}` must be one of {}, got `{value}`", names.join("|")))
    })
}

fn name_of<T: Copy + PartialEq>(v: T, table: &[(&'static str, T)]) -> &'static str {
    table.iter().find(|(_, x)| *x == v).map(|(n, _)| *n).expect("every variant is named")
}

fn parse_actions(value: &str) -> Result<ActionEncoding> {
    if value == "scalar" {
        return Ok(ActionEncoding::Scalar);
    }
    value
        .strip_prefix("onehot")
        .and_then(|n| n.parse().ok())
        .filter(|&n: &usize| n > 0)
        .map(ActionEncoding::OneHot)
        .ok_or_else(|| L2eError::Parse(format!("`actions` must be scalar or onehotN, got `{value}`")))
}

fn actions_name(a: ActionEncoding) -> String {
    match a {
        ActionEncoding::Scalar => "scalar".into(),
        ActionEncoding::OneHot(n) => format!("onehot{n}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        if value.starts_with('-') {
            L2eError::Parse(format!("`{key}` out of range: {value}"))
        } else {
            L2eError::Parse(format!("`{key}`: malformed value `{value}`"))
        }
    })
}

fn positive(key: &str, value: &str) -> Result<usize> {
    let n: usize = parse_num(key, value)?;
    if n == 0 {
        return Err(L2eError::Parse(format!("`{key}` out of range: must be at least 1")));
    }
    Ok(n)
}

fn nonneg(key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse_num(key, value)?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(L2eError::Parse(format!("`{key}` out of range: {value}")));
    }
    Ok(x)
}

fn unit(key: &str, value: &str) -> Result<f64> {
    let x: f64 = parse_num(key, value)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(L2eError::Parse(format!("`{key}` out of range [0, 1]: {value}")));
    }
    Ok(x)
}

struct Line<'a> {
    no: usize,
    section: Option<&'a str>,
    key: &'a str,
    value: &'a str,
}

fn lex(text: &str) -> Result<Vec<Line<'_>>> {
    let mut out = Vec::new();
    let mut section = None;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .ok_or_else(|| L2eError::Config { line: no, msg: format!("malformed section header `{line}`") })?;
            if !SECTIONS.contains(&name) {
                return Err(L2eError::Config { line: no, msg: format!("unknown section [{name}]") });
            }
            section = Some(name);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| L2eError::Config { line: no, msg: format!("expected key = value, got `{line}`") })?;
        out.push(Line {
            no,
            section,
            key: key.trim(),
            value: value.trim(),
        });
    }
    Ok(out)
}

/// Parses a config file. Absent keys keep the defaults of the configured
/// game; errors carry the 1-based line number.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let lines = lex(text)?;
    // the game picks the defaults, so it is resolved first
    let mut game = GameId::Leduc;
    for l in &lines {
        if l.key == "game" && matches!(l.section, None | Some("run")) {
            game = l.value.parse().map_err(|e: L2eError| L2eError::Config { line: l.no, msg: e.to_string() })?;
        }
    }
    let mut cfg = RunConfig::for_game(game);
    let mut seen = std::collections::HashSet::new();
    for l in &lines {
        cfg.set(l.section, l.key, l.value).map_err(|e| L2eError::Config { line: l.no, msg: e.to_string() })?;
        let qualified = (l.section.unwrap_or(""), l.key);
        if !seen.insert(qualified) {
            return Err(L2eError::Config { line: l.no, msg: format!("duplicate key `{}`", l.key) });
        }
    }
    // cross-key constraints are reported against the last line
    cfg.validate().map_err(|e| L2eError::Config {
        line: lines.last().map_or(0, |l| l.no),
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_table_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c.game, GameId::Leduc);
        assert_eq!(c.osg.alpha_mmd, 0.8);
        assert_eq!((c.train.alpha, c.train.beta), (0.1, 0.01));
        assert_eq!(c.train.opponents_per_batch, 40);
        assert_eq!(c.train.trajs_per_opponent, 20);
        assert_eq!(c.train.adapt_steps_test, 3);
        assert_eq!(c.train.test_step, 0.1);
        assert_eq!((c.osg.hard_epochs, c.osg.diverse_steps, c.osg.n_diverse), (20, 50, 5));
        assert_eq!((c.osg.mmd_trajs, c.osg.kernel.min_len, c.osg.kernel.bandwidth), (8, 20, 1.0));
    }

    #[test]
    fn bare_keys_set_training_steps() {
        let c = parse_config("alpha=0.1\nbeta=0.01").unwrap();
        assert_eq!((c.train.alpha, c.train.beta), (0.1, 0.01));
        let c = parse_config("alpha = 0.3\n[osg]\nalpha = 0.2\n").unwrap();
        assert_eq!((c.train.alpha, c.osg.alpha), (0.3, 0.2));
    }

    #[test]
    fn negative_epochs_name_the_key_and_line() {
        let e = parse_config("seed = 1\nepochs=-1").unwrap_err();
        let msg = e.to_string();
        assert!(matches!(e, L2eError::Config { line: 2, .. }), "{msg}");
        assert!(msg.contains("epochs") && msg.contains("range"), "{msg}");
    }

    #[test]
    fn rejects_unknown_keys_sections_and_garbage() {
        for (text, line) in [
            ("bogus = 1", 1),
            ("\n[train]\nhard_epochs = 3", 3),
            ("[nope]", 1),
            ("alpha", 1),
            ("beta = fast", 1),
            ("n_diverse = 6", 1),
            ("meta_gradient = exact", 1),
            ("seed = 1\nseed = 2", 2),
        ] {
            match parse_config(text) {
                Err(L2eError::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn game_sets_game_defaults() {
        let c = parse_config("[run]\ngame = soccer").unwrap();
        assert_eq!(c.train.gamma, 0.99);
        assert_eq!(c.osg.gamma, 0.99);
        let c = parse_config("game = bigleduc").unwrap();
        assert_eq!(c.train.epochs, 400);
    }

    #[test]
    fn canonical_text_round_trips() {
        let mut c = RunConfig::for_game(GameId::Soccer);
        c.seed = 99;
        c.train.meta_gradient = MetaGradient::FirstOrder;
        c.train.return_mode = ReturnMode::LinearFeature;
        c.osg.kernel.actions = ActionEncoding::OneHot(5);
        c.osg.alpha = 0.05;
        let back = parse_config(&c.to_text()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        c.seed = 100;
        assert_ne!(back.hash(), c.hash());
    }
}
