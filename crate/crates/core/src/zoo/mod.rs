//! Scripted opponents, tabular CFR and the exploitability oracle.

pub mod cfr;
pub mod scripted;

pub use cfr::{cfr_solve, exploitability, info_key, nash_opponent, CfrSolver, GameTree, TabularOpponent, TabularStrategy};
pub use scripted::{ScriptKind, ScriptedOpponent};
