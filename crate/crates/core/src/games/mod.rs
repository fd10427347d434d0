//! The four environments behind one episodic interface.
//!
//! States are immutable values: [`GameSpec::step`] consumes a reference and
//! returns a fresh state. Poker is strictly alternating; RPS and soccer are
//! simultaneous, so both seats are listed as acting and one engine step takes
//! both actions.

pub mod poker;
pub mod rps;
pub mod soccer;

use rand::Rng as _;
use std::fmt;

use crate::error::{L2eError, Result};
use crate::rng::Rng;

pub use poker::{Card, PokerState};
pub use rps::RpsState;
pub use soccer::SoccerState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GameId {
    Rps,
    Leduc,
    BigLeduc,
    Soccer,
}

impl GameId {
    pub const ALL: [GameId; 4] = [GameId::Rps, GameId::Leduc, GameId::BigLeduc, GameId::Soccer];

    pub fn name(self) -> &'static str {
        match self {
            GameId::Rps => "rps",
            GameId::Leduc => "leduc",
            GameId::BigLeduc => "bigleduc",
            GameId::Soccer => "soccer",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            GameId::Rps => 0,
            GameId::Leduc => 1,
            GameId::BigLeduc => 2,
            GameId::Soccer => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<GameId> {
        GameId::ALL.into_iter().find(|g| g.code() == code)
    }

    pub fn is_poker(self) -> bool {
        matches!(self, GameId::Leduc | GameId::BigLeduc)
    }
}

impl fmt::Display for GameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GameId {
    type Err = L2eError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rps" => Ok(GameId::Rps),
            "leduc" => Ok(GameId::Leduc),
            "bigleduc" | "big-leduc" | "big_leduc" => Ok(GameId::BigLeduc),
            "soccer" | "grid-soccer" => Ok(GameId::Soccer),
            other => Err(L2eError::Parse(format!("unknown game `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    First,
    Second,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::First, Player::Second];

    pub fn index(self) -> usize {
        match self {
            Player::First => 0,
            Player::Second => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::First => Player::Second,
            Player::Second => Player::First,
        }
    }

    pub fn from_index(i: usize) -> Player {
        if i == 0 {
            Player::First
        } else {
            Player::Second
        }
    }
}

/// Set of action ids as a bitmask; every game has at most five actions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn all(n: usize) -> ActionSet {
        debug_assert!(n <= 8);
        ActionSet(((1u16 << n) - 1) as u8)
    }

    pub fn from_actions(actions: &[usize]) -> ActionSet {
        actions.iter().fold(ActionSet::EMPTY, |s, &a| s.with(a))
    }

    pub fn from_bits(bits: u8) -> ActionSet {
        ActionSet(bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn with(self, a: usize) -> ActionSet {
        ActionSet(self.0 | (1 << a))
    }

    pub fn without(self, a: usize) -> ActionSet {
        ActionSet(self.0 & !(1 << a))
    }

    pub fn contains(self, a: usize) -> bool {
        a < 8 && self.0 & (1 << a) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..8).filter(move |&a| self.contains(a))
    }

    pub fn to_mask(self, n: usize) -> Vec<bool> {
        (0..n).map(|a| self.contains(a)).collect()
    }
}

/// Players due to act in the current state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlayerSet(u8);

impl PlayerSet {
    pub const NONE: PlayerSet = PlayerSet(0);
    pub const BOTH: PlayerSet = PlayerSet(0b11);

    pub fn only(p: Player) -> PlayerSet {
        PlayerSet(1 << p.index())
    }

    pub fn contains(self, p: Player) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Player> {
        Player::BOTH.into_iter().filter(move |&p| self.contains(p))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub Vec<f64>);

impl Observation {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GameSpec {
    pub game_id: GameId,
    pub num_ranks: u8,
    pub max_raises_per_round: u8,
    /// (rows, columns)
    pub grid_dims: (usize, usize),
    pub action_count: usize,
    pub obs_dim: usize,
    pub max_episode_len: usize,
}

/// Soccer episode cap in simultaneous steps; reaching it is a draw.
pub const SOCCER_MAX_STEPS: usize = 50;

impl GameSpec {
    pub fn rps() -> Self {
        GameSpec {
            game_id: GameId::Rps,
            num_ranks: 0,
            max_raises_per_round: 0,
            grid_dims: (0, 0),
            action_count: 3,
            obs_dim: 1,
            max_episode_len: 1,
        }
    }

    pub fn leduc() -> Self {
        Self::poker(GameId::Leduc, 3, 2)
    }

    pub fn big_leduc() -> Self {
        Self::poker(GameId::BigLeduc, 12, 6)
    }

    fn poker(game_id: GameId, num_ranks: u8, max_raises: u8) -> Self {
        GameSpec {
            game_id,
            num_ranks,
            max_raises_per_round: max_raises,
            grid_dims: (0, 0),
            action_count: 4,
            obs_dim: 7,
            // per round: one opening check plus every raise plus the closing call
            max_episode_len: 2 * (max_raises as usize + 2),
        }
    }

    pub fn soccer() -> Self {
        let (rows, cols) = (6, 9);
        GameSpec {
            game_id: GameId::Soccer,
            num_ranks: 0,
            max_raises_per_round: 0,
            grid_dims: (rows, cols),
            action_count: 5,
            obs_dim: 3 * rows * cols + 1,
            max_episode_len: SOCCER_MAX_STEPS,
        }
    }

    pub fn from_id(id: GameId) -> Self {
        match id {
            GameId::Rps => Self::rps(),
            GameId::Leduc => Self::leduc(),
            GameId::BigLeduc => Self::big_leduc(),
            GameId::Soccer => Self::soccer(),
        }
    }

    pub fn deck_size(&self) -> usize {
        2 * self.num_ranks as usize
    }

    pub fn reset(&self, rng: &mut Rng) -> GameState {
        match self.game_id {
            GameId::Rps => GameState::Rps(RpsState::default()),
            GameId::Leduc | GameId::BigLeduc => GameState::Poker(poker::deal(self, rng)),
            GameId::Soccer => GameState::Soccer(soccer::spawn(self, rng)),
        }
    }

    pub fn acting_players(&self, state: &GameState) -> PlayerSet {
        match state {
            GameState::Rps(s) => {
                if s.done {
                    PlayerSet::NONE
                } else {
                    PlayerSet::BOTH
                }
            }
            GameState::Poker(s) => {
                if s.terminal {
                    PlayerSet::NONE
                } else {
                    PlayerSet::only(s.to_act)
                }
            }
            GameState::Soccer(s) => {
                if s.terminal {
                    PlayerSet::NONE
                } else {
                    PlayerSet::BOTH
                }
            }
        }
    }

    pub fn legal_actions(&self, state: &GameState, player: Player) -> Result<ActionSet> {
        if !self.acting_players(state).contains(player) {
            return Err(L2eError::NotActing(player));
        }
        Ok(match state {
            GameState::Poker(s) => poker::legal_actions(self, s),
            _ => ActionSet::all(self.action_count),
        })
    }

    /// Applies one engine step. `actions[p]` must hold a legal action for
    /// every acting player and nothing for the others.
    pub fn step(&self, state: &GameState, actions: [Option<usize>; 2]) -> Result<StepOutcome> {
        let acting = self.acting_players(state);
        if acting.is_empty() {
            return Err(L2eError::Terminal);
        }
        for p in Player::BOTH {
            match (acting.contains(p), actions[p.index()]) {
                (true, None) => return Err(L2eError::MissingAction(p)),
                (false, Some(_)) => return Err(L2eError::NotActing(p)),
                (true, Some(a)) => {
                    if !self.legal_actions(state, p)?.contains(a) {
                        return Err(L2eError::IllegalAction { player: p, action: a });
                    }
                }
                (false, None) => {}
            }
        }
        let (next_state, rewards, done) = match state {
            GameState::Rps(_) => {
                let (s, r) = rps::play(actions[0].unwrap(), actions[1].unwrap());
                (GameState::Rps(s), r, true)
            }
            GameState::Poker(s) => {
                let p = s.to_act;
                let (s, r) = poker::apply(self, s, actions[p.index()].unwrap());
                let done = s.terminal;
                (GameState::Poker(s), r, done)
            }
            GameState::Soccer(s) => {
                let (s, r) = soccer::apply(self, s, [actions[0].unwrap(), actions[1].unwrap()]);
                let done = s.terminal;
                (GameState::Soccer(s), r, done)
            }
        };
        let acting_players = self.acting_players(&next_state);
        Ok(StepOutcome {
            next_state,
            rewards,
            done,
            acting_players,
        })
    }

    pub fn encode_observation(&self, state: &GameState, player: Player) -> Observation {
        let mut v = vec![0.0; self.obs_dim];
        self.encode_into(state, player, &mut v);
        Observation(v)
    }

    /// Writes the observation of `player` into `out` (length `obs_dim`).
    pub fn encode_into(&self, state: &GameState, player: Player, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.obs_dim);
        match state {
            GameState::Rps(_) => out[0] = 1.0,
            GameState::Poker(s) => poker::encode(self, s, player, out),
            GameState::Soccer(s) => soccer::encode(self, s, player, out),
        }
    }

    /// Uniformly random legal action, used by the random opponent and by
    /// playout-style tests.
    pub fn random_action(&self, legal: ActionSet, rng: &mut Rng) -> usize {
        let k = rng.gen_range(0..legal.len());
        legal.iter().nth(k).expect("nonempty legal set")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum GameState {
    Rps(RpsState),
    Poker(PokerState),
    Soccer(SoccerState),
}

impl GameState {
    pub fn is_terminal(&self) -> bool {
        match self {
            GameState::Rps(s) => s.done,
            GameState::Poker(s) => s.terminal,
            GameState::Soccer(s) => s.terminal,
        }
    }

    pub fn as_poker(&self) -> Option<&PokerState> {
        match self {
            GameState::Poker(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_soccer(&self) -> Option<&SoccerState> {
        match self {
            GameState::Soccer(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: GameState,
    pub rewards: [f64; 2],
    pub done: bool,
    pub acting_players: PlayerSet,
}
