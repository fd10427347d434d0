//! Run configuration, checkpoints, pool manifests and CSV output.
//!
//! A run writes into one directory with fixed file names (see
//! [`RunLayout`]). Every CSV starts with `#`-prefixed metadata lines, the
//! first of which is the hash of the resolved configuration.

pub mod checkpoint;
pub mod config;
pub mod manifest;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use checkpoint::{check_fits, load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use config::{parse_config, RunConfig};
pub use manifest::{load_pool, save_pool, ManifestEntry, PoolManifest};

use crate::error::{L2eError, Result};
use crate::eval::{AblationCurve, AdaptPoint, TableRow};
use crate::meta::TrainHistory;

pub const OUT_ENV: &str = "L2E_OUT";
pub const HISTORY_CSV: &str = "history.csv";
pub const TABLE_CSV: &str = "table.csv";
pub const POOL_MANIFEST: &str = "pool.manifest";
pub const CONFIG_FILE: &str = "config.ini";

/// Output directory of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunLayout {
    dir: PathBuf,
}

impl RunLayout {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        RunLayout { dir: dir.into() }
    }

    /// `$L2E_OUT` when set, otherwise `configured`.
    pub fn resolve(configured: &Path) -> Self {
        match std::env::var_os(OUT_ENV) {
            Some(d) if !d.is_empty() => RunLayout::new(d),
            _ => RunLayout::new(configured),
        }
    }

    pub fn create(&self) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn history(&self) -> PathBuf {
        self.file(HISTORY_CSV)
    }

    pub fn table(&self) -> PathBuf {
        self.file(TABLE_CSV)
    }

    pub fn manifest(&self) -> PathBuf {
        self.file(POOL_MANIFEST)
    }

    pub fn checkpoint(&self, epoch: usize) -> PathBuf {
        self.file(&format!("ckpt_e{epoch:03}.bin"))
    }
}

/// CSV output with `# key=value` metadata lines ahead of the header row.
pub struct CsvOut<W: Write> {
    inner: csv::Writer<W>,
}

impl CsvOut<BufWriter<File>> {
    pub fn create(path: &Path, meta: &[(String, String)], header: &[&str]) -> Result<Self> {
        CsvOut::new(BufWriter::new(File::create(path)?), meta, header)
    }
}

impl<W: Write> CsvOut<W> {
    pub fn new(mut w: W, meta: &[(String, String)], header: &[&str]) -> Result<Self> {
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(header).map_err(csv_err)?;
        Ok(CsvOut { inner })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.inner.write_record(fields).map_err(csv_err)
    }

    pub fn finish(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| L2eError::Io(e.into_error()))
    }
}

fn csv_err(e: csv::Error) -> L2eError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => L2eError::Io(e),
        other => L2eError::Parse(format!("csv: {other:?}")),
    }
}

fn num(x: f64) -> String {
    format!("{x:.6}")
}

/// Standard metadata block: the config hash first, then extras.
pub fn meta(config_hash: &str, extra: &[(&str, String)]) -> Vec<(String, String)> {
    let mut m = vec![("config_hash".to_string(), config_hash.to_string())];
    m.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    m
}

/// Long-format history: adapted returns per (epoch, opponent, step), plus
/// `metric` rows (mean final-step return) and `hard_osg` rows (one-step
/// adapted return against the epoch's hard opponent).
pub fn write_history<W: Write>(w: W, meta: &[(String, String)], h: &TrainHistory, final_step: usize) -> Result<W> {
    let mut out = CsvOut::new(w, meta, &["epoch", "opponent", "step", "mean", "std"])?;
    for r in &h.rows {
        out.row([r.epoch.to_string(), r.opponent.clone(), r.step.to_string(), num(r.mean), num(r.std)])?;
    }
    for (e, m) in &h.metric {
        out.row([e.to_string(), "metric".into(), final_step.to_string(), num(*m), String::new()])?;
    }
    for (e, m) in &h.hardness {
        out.row([e.to_string(), "hard_osg".into(), "1".into(), num(*m), String::new()])?;
    }
    out.finish()
}

pub fn write_table<W: Write>(w: W, meta: &[(String, String)], rows: &[TableRow]) -> Result<W> {
    let mut out = CsvOut::new(w, meta, &["method", "opponent", "step", "mean", "std", "n_seeds", "n_episodes"])?;
    for r in rows {
        out.row([
            r.method.clone(),
            r.opponent.clone(),
            r.step.to_string(),
            num(r.mean),
            num(r.std),
            r.n_seeds.to_string(),
            r.n_episodes.to_string(),
        ])?;
    }
    out.finish()
}

pub fn write_simplex<W: Write>(w: W, meta: &[(String, String)], simplex: &[[f64; 3]]) -> Result<W> {
    let mut out = CsvOut::new(w, meta, &["epoch", "p_rock", "p_paper", "p_scissors"])?;
    for (e, p) in simplex.iter().enumerate() {
        out.row([e.to_string(), num(p[0]), num(p[1]), num(p[2])])?;
    }
    out.finish()
}

pub fn write_adapt_traces<W: Write>(w: W, meta: &[(String, String)], traces: &[(&str, &[AdaptPoint])]) -> Result<W> {
    let mut out = CsvOut::new(w, meta, &["method", "step", "p_rock", "p_paper", "p_scissors", "value"])?;
    for (name, trace) in traces {
        for p in *trace {
            out.row([
                name.to_string(),
                p.step.to_string(),
                num(p.probs[0]),
                num(p.probs[1]),
                num(p.probs[2]),
                num(p.value),
            ])?;
        }
    }
    out.finish()
}

/// `seed` column: index of the training seed the curve belongs to.
pub fn write_ablation<W: Write>(w: W, meta: &[(String, String)], runs: &[Vec<AblationCurve>]) -> Result<W> {
    let mut out = CsvOut::new(w, meta, &["seed", "variant", "step", "raw", "normalized"])?;
    for (s, curves) in runs.iter().enumerate() {
        for c in curves {
            for (k, (r, n)) in c.raw.iter().zip(&c.normalized).enumerate() {
                out.row([s.to_string(), c.variant.tag().to_string(), k.to_string(), num(*r), num(*n)])?;
            }
        }
    }
    out.finish()
}
