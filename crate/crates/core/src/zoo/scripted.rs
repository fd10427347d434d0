//! Rule-based opponents.
//!
//! Poker rules: `call` checks or calls; `raise` raises whenever allowed;
//! `rocks` plays by hand strength tier; `oracle` peeks at the other hand.
//! Soccer rules: `defensive` guards its own target cells; `aggressive` chases
//! the ball and runs it to the goal. Ties between equally good moves go to the
//! first action in N, S, E, W, stay order.

use crate::error::{L2eError, Result};
use crate::games::poker::{self, Card, PokerState, CALL, CHECK, FOLD, RAISE};
use crate::games::rps::ROCK;
use crate::games::soccer::{self, Cell, SoccerState, STAY};
use crate::games::{ActionSet, GameId, GameSpec, GameState, Player};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScriptKind {
    Random,
    Call,
    Raise,
    Rocks,
    Oracle,
    SoccerDefensive,
    SoccerAggressive,
}

impl ScriptKind {
    pub fn name(self) -> &'static str {
        match self {
            ScriptKind::Random => "random",
            ScriptKind::Call => "call",
            ScriptKind::Raise => "raise",
            ScriptKind::Rocks => "rocks",
            ScriptKind::Oracle => "oracle",
            ScriptKind::SoccerDefensive => "defensive",
            ScriptKind::SoccerAggressive => "aggressive",
        }
    }

    pub fn parse(s: &str) -> Result<ScriptKind> {
        Ok(match s {
            "random" => ScriptKind::Random,
            "call" => ScriptKind::Call,
            "raise" => ScriptKind::Raise,
            "rocks" | "rock" => ScriptKind::Rocks,
            "oracle" => ScriptKind::Oracle,
            "defensive" => ScriptKind::SoccerDefensive,
            "aggressive" => ScriptKind::SoccerAggressive,
            other => return Err(L2eError::Parse(format!("unknown scripted opponent `{other}`"))),
        })
    }

    pub fn supports(self, game: GameId) -> bool {
        match self {
            ScriptKind::Random => true,
            ScriptKind::Rocks => game == GameId::Rps || game.is_poker(),
            ScriptKind::Call | ScriptKind::Raise | ScriptKind::Oracle => game.is_poker(),
            ScriptKind::SoccerDefensive | ScriptKind::SoccerAggressive => game == GameId::Soccer,
        }
    }
}

/// Held-out evaluation opponents for each game.
pub fn evaluation_set(game: GameId) -> Vec<ScriptKind> {
    match game {
        GameId::Rps => vec![ScriptKind::Random, ScriptKind::Rocks],
        GameId::Leduc => vec![ScriptKind::Random, ScriptKind::Call, ScriptKind::Rocks, ScriptKind::Oracle],
        GameId::BigLeduc => vec![ScriptKind::Random, ScriptKind::Call, ScriptKind::Raise, ScriptKind::Oracle],
        GameId::Soccer => vec![ScriptKind::SoccerDefensive, ScriptKind::SoccerAggressive],
    }
}

/// Scripted opponents that seed the MAML baseline's pool.
pub fn training_set(game: GameId) -> Vec<ScriptKind> {
    match game {
        GameId::Rps => vec![ScriptKind::Random, ScriptKind::Rocks],
        GameId::Leduc | GameId::BigLeduc => {
            vec![ScriptKind::Random, ScriptKind::Call, ScriptKind::Raise, ScriptKind::Rocks]
        }
        GameId::Soccer => vec![ScriptKind::Random, ScriptKind::SoccerDefensive, ScriptKind::SoccerAggressive],
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScriptedOpponent {
    pub kind: ScriptKind,
}

impl ScriptedOpponent {
    pub fn new(kind: ScriptKind) -> Self {
        ScriptedOpponent { kind }
    }

    pub fn check_spec(&self, spec: &GameSpec) -> Result<()> {
        if self.kind.supports(spec.game_id) {
            Ok(())
        } else {
            Err(L2eError::InvalidArgument(format!(
                "scripted opponent `{}` cannot play {}",
                self.kind.name(),
                spec.game_id
            )))
        }
    }

    pub fn act(&self, spec: &GameSpec, state: &GameState, player: Player, rng: &mut Rng) -> Result<usize> {
        let legal = spec.legal_actions(state, player)?;
        if self.kind == ScriptKind::Random {
            return Ok(spec.random_action(legal, rng));
        }
        self.check_spec(spec)?;
        Ok(match state {
            GameState::Rps(_) => ROCK,
            GameState::Poker(s) => match self.kind {
                ScriptKind::Call => passive(legal),
                ScriptKind::Raise => aggressive_or_call(legal),
                ScriptKind::Rocks => rocks(spec, s, player, legal),
                ScriptKind::Oracle => oracle(spec, s, player, legal),
                _ => unreachable!("checked by supports"),
            },
            GameState::Soccer(s) => match self.kind {
                ScriptKind::SoccerDefensive => defend(spec, s, player),
                ScriptKind::SoccerAggressive => attack(spec, s, player),
                _ => unreachable!("checked by supports"),
            },
        })
    }
}

fn passive(legal: ActionSet) -> usize {
    if legal.contains(CHECK) {
        CHECK
    } else {
        CALL
    }
}

fn aggressive_or_call(legal: ActionSet) -> usize {
    if legal.contains(RAISE) {
        RAISE
    } else {
        passive(legal)
    }
}

fn fold_or_check(legal: ActionSet) -> usize {
    if legal.contains(CHECK) {
        CHECK
    } else {
        FOLD
    }
}

/// 0 = bottom third of ranks, 1 = middle, 2 = top.
pub fn rank_tier(spec: &GameSpec, rank: u8) -> u8 {
    ((rank as usize * 3) / spec.num_ranks as usize) as u8
}

fn rocks(spec: &GameSpec, s: &PokerState, player: Player, legal: ActionSet) -> usize {
    let hole = s.hole[player.index()];
    let paired = s.board.is_some_and(|b| b.rank == hole.rank);
    match (paired, rank_tier(spec, hole.rank)) {
        (true, _) | (_, 2) => aggressive_or_call(legal),
        (_, 1) => passive(legal),
        _ => fold_or_check(legal),
    }
}

/// Twice the showdown equity of `mine` against `theirs`, in units of
/// `1 / outcomes`: returns `(2 * wins + ties, outcomes)`.
pub fn oracle_equity(spec: &GameSpec, s: &PokerState, player: Player) -> (usize, usize) {
    let mine = s.hole[player.index()];
    let theirs = s.hole[player.other().index()];
    let score = |board: Card| match poker::showdown_winner(mine, theirs, board) {
        poker::Showdown::A => 2,
        poker::Showdown::Split => 1,
        poker::Showdown::B => 0,
    };
    match s.board {
        Some(b) => (score(b), 1),
        None => {
            let boards: Vec<Card> = (0..spec.deck_size())
                .map(Card::from_index)
                .filter(|&c| c != mine && c != theirs)
                .collect();
            (boards.iter().map(|&b| score(b)).sum(), boards.len())
        }
    }
}

fn oracle(spec: &GameSpec, s: &PokerState, player: Player, legal: ActionSet) -> usize {
    let (twice_wins, n) = oracle_equity(spec, s, player);
    // equity = twice_wins / (2n), compared against one half
    match twice_wins.cmp(&n) {
        std::cmp::Ordering::Greater => aggressive_or_call(legal),
        std::cmp::Ordering::Equal => passive(legal),
        std::cmp::Ordering::Less => fold_or_check(legal),
    }
}

/// First action in N, S, E, W, stay order that minimizes the distance to `target`.
pub fn greedy_step(spec: &GameSpec, from: Cell, target: Cell) -> usize {
    (0..5)
        .min_by_key(|&a| (soccer::moved(spec, from, a).manhattan(target), a))
        .unwrap_or(STAY)
}

fn defend(spec: &GameSpec, s: &SoccerState, player: Player) -> usize {
    let me = s.positions[player.index()];
    let attacker = s.positions[player.other().index()];
    let cells = soccer::area_cells(spec, player);
    let target = *cells
        .iter()
        .min_by_key(|c| c.row.abs_diff(attacker.row))
        .expect("two area cells");
    if me == target {
        STAY
    } else {
        greedy_step(spec, me, target)
    }
}

fn attack(spec: &GameSpec, s: &SoccerState, player: Player) -> usize {
    let me = s.positions[player.index()];
    if s.ball_holder == player {
        let goal = soccer::area_cells(spec, player.other());
        let target = *goal.iter().min_by_key(|c| me.manhattan(**c)).expect("two goal cells");
        greedy_step(spec, me, target)
    } else {
        greedy_step(spec, me, s.positions[player.other().index()])
    }
}
