//! Binary policy checkpoints.
//!
//! Layout, little endian:
//!
//! | bytes | field                       |
//! |-------|-----------------------------|
//! | 4     | magic `L2EP`                |
//! | 4     | format version (u32)        |
//! | 1     | game code                   |
//! | 16    | layer sizes, 4 x u32        |
//! | 8     | parameter count (u64)       |
//! | 8n    | parameters (f64)            |

use std::fs;
use std::path::Path;

use crate::error::{L2eError, Result};
use crate::games::{GameId, GameSpec};
use crate::policy::PolicyParams;

pub const MAGIC: &[u8; 4] = b"L2EP";
pub const VERSION: u32 = 1;
const HEADER: usize = 4 + 4 + 1 + 16 + 8;

pub fn encode_checkpoint(params: &PolicyParams) -> Vec<u8> {
    let data = params.as_slice();
    let mut out = Vec::with_capacity(HEADER + 8 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(params.game().code());
    for s in params.sizes() {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&(data.len() as u64).to_le_bytes());
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<PolicyParams> {
    let corrupt = |m: &str| L2eError::CorruptCheckpoint(m.to_string());
    if bytes.len() < HEADER {
        return Err(corrupt("truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(L2eError::CorruptCheckpoint(format!("unsupported version {version}")));
    }
    let game = GameId::from_code(bytes[8]).ok_or_else(|| corrupt("unknown game code"))?;
    let sizes = [u32_at(9), u32_at(13), u32_at(17), u32_at(21)].map(|s| s as usize);
    let count = u64::from_le_bytes(bytes[25..33].try_into().expect("8 bytes")) as usize;
    let body = &bytes[HEADER..];
    if body.len() != count.saturating_mul(8) {
        return Err(L2eError::CorruptCheckpoint(format!(
            "expected {count} parameters, found {} bytes",
            body.len()
        )));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    PolicyParams::from_parts(game, sizes, data).map_err(|e| L2eError::CorruptCheckpoint(e.to_string()))
}

pub fn save_checkpoint(params: &PolicyParams, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PolicyParams> {
    decode_checkpoint(&fs::read(path)?)
}

/// Loads a checkpoint and checks it fits `spec`.
pub fn load_checkpoint_for(path: &Path, spec: &GameSpec) -> Result<PolicyParams> {
    let p = load_checkpoint(path)?;
    check_fits(&p, spec)?;
    Ok(p)
}

pub fn check_fits(p: &PolicyParams, spec: &GameSpec) -> Result<()> {
    let want = PolicyParams::zeros(spec).sizes();
    if p.sizes() != want {
        return Err(L2eError::Shape(format!(
            "checkpoint has layers {:?}, {} needs {:?}",
            p.sizes(),
            spec.game_id,
            want
        )));
    }
    if p.game() != spec.game_id {
        return Err(L2eError::GameMismatch {
            expected: spec.game_id,
            found: p.game(),
        });
    }
    Ok(())
}
