//! Opponent-pool manifest: one CSV row per pool entry, in pool order.
//!
//! Policies are stored as checkpoints next to the manifest; scripted entries
//! are written as `script:<kind>` and need no file.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{L2eError, Result};
use crate::games::GameSpec;
use crate::meta::{OpponentPool, Provenance};
use crate::rollout::Opponent;
use crate::zoo::{ScriptKind, ScriptedOpponent};

use super::checkpoint::{load_checkpoint_for, save_checkpoint};

const HEADER: &str = "file,provenance,epoch,seed";
const SCRIPT: &str = "script:";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub provenance: Provenance,
    pub epoch: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PoolManifest {
    pub entries: Vec<ManifestEntry>,
}

impl PoolManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for e in &self.entries {
            s.push_str(&format!("{},{},{},{}\n", e.file, e.provenance.tag(), e.epoch, e.seed));
        }
        s
    }

    pub fn parse(text: &str) -> Result<PoolManifest> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        match lines.next() {
            Some((_, h)) if h.trim() == HEADER => {}
            _ => return Err(L2eError::Parse(format!("manifest must start with `{HEADER}`"))),
        }
        let entries = lines
            .map(|(i, l)| {
                let bad = |m: &str| L2eError::Config { line: i + 1, msg: m.to_string() };
                let f: Vec<&str> = l.split(',').map(str::trim).collect();
                if f.len() != 4 {
                    return Err(bad("expected 4 fields"));
                }
                Ok(ManifestEntry {
                    file: f[0].to_string(),
                    provenance: Provenance::parse(f[1]).map_err(|e| bad(&e.to_string()))?,
                    epoch: f[2].parse().map_err(|_| bad("bad epoch"))?,
                    seed: f[3].parse().map_err(|_| bad("bad seed"))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(PoolManifest { entries })
    }
}

/// Writes every pool policy to `dir/pool/` and the manifest to `manifest`.
pub fn save_pool(pool: &OpponentPool, seed: u64, manifest: &Path) -> Result<PoolManifest> {
    let dir = manifest.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir.join("pool"))?;
    let mut out = PoolManifest::default();
    for (i, e) in pool.entries().iter().enumerate() {
        let file = match &e.opponent {
            Opponent::Policy(p) => {
                let name = format!("pool/opp_{i:05}.bin");
                save_checkpoint(p, &dir.join(&name))?;
                name
            }
            Opponent::Scripted(s) => format!("{SCRIPT}{}", s.kind.name()),
            Opponent::Tabular(_) => {
                return Err(L2eError::InvalidArgument("tabular opponents are not stored in pools".into()))
            }
        };
        out.entries.push(ManifestEntry {
            file,
            provenance: e.provenance,
            epoch: e.epoch,
            seed,
        });
    }
    fs::write(manifest, out.to_text())?;
    Ok(out)
}

/// Reads a manifest and loads every entry, checking shapes against `spec`.
pub fn load_pool(manifest: &Path, spec: &GameSpec) -> Result<OpponentPool> {
    let m = PoolManifest::parse(&fs::read_to_string(manifest)?)?;
    let dir: PathBuf = manifest.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    let mut pool = OpponentPool::new();
    for e in &m.entries {
        let opp = match e.file.strip_prefix(SCRIPT) {
            Some(kind) => {
                let s = ScriptedOpponent::new(ScriptKind::parse(kind)?);
                s.check_spec(spec)?;
                Opponent::Scripted(s)
            }
            None => Opponent::policy(load_checkpoint_for(&dir.join(&e.file), spec)?),
        };
        pool.push(opp, e.provenance, e.epoch);
    }
    Ok(pool)
}
