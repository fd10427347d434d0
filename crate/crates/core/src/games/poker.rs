//! Leduc-family limit poker.
//!
//! Two suits of `num_ranks` ranks, one private card each, one community card
//! revealed for the second betting round. Both players ante one chip; raises
//! are two chips in the first round and four in the second, capped at
//! `max_raises_per_round` per round. Fold is always available.

use rand::seq::index::sample;

use super::{ActionSet, GameSpec, Player};
use crate::rng::Rng;

pub const FOLD: usize = 0;
pub const CHECK: usize = 1;
pub const CALL: usize = 2;
pub const RAISE: usize = 3;

pub const ANTE: u32 = 1;
pub const ACTION_CHARS: [char; 4] = ['f', 'k', 'c', 'r'];

pub fn raise_size(round: u8) -> u32 {
    if round == 1 {
        2
    } else {
        4
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Card {
    pub rank: u8,
    pub suit: u8,
}

impl Card {
    pub fn new(rank: u8, suit: u8) -> Self {
        Card { rank, suit }
    }

    /// Cards are numbered `rank * 2 + suit`.
    pub fn from_index(i: usize) -> Self {
        Card {
            rank: (i / 2) as u8,
            suit: (i % 2) as u8,
        }
    }

    pub fn index(self) -> usize {
        self.rank as usize * 2 + self.suit as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Showdown {
    A,
    B,
    Split,
}

pub fn showdown_winner(hole_a: Card, hole_b: Card, board: Card) -> Showdown {
    let pair_a = hole_a.rank == board.rank;
    let pair_b = hole_b.rank == board.rank;
    match (pair_a, pair_b) {
        (true, false) => Showdown::A,
        (false, true) => Showdown::B,
        _ => match hole_a.rank.cmp(&hole_b.rank) {
            std::cmp::Ordering::Greater => Showdown::A,
            std::cmp::Ordering::Less => Showdown::B,
            std::cmp::Ordering::Equal => Showdown::Split,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PokerState {
    pub button: Player,
    pub to_act: Player,
    pub round: u8,
    pub hole: [Card; 2],
    pub board: Option<Card>,
    /// Community card already drawn at deal time, revealed on entering round 2.
    pub pending_board: Card,
    pub bets: [u32; 2],
    pub pot: u32,
    pub raise_count: u8,
    pub actions_in_round: u8,
    pub terminal: bool,
    pub folded: Option<Player>,
    /// Betting actions in order; `round_split` marks where round 2 starts.
    pub history: Vec<u8>,
    pub round_split: Option<usize>,
}

impl PokerState {
    /// Chips `player` must add to match the other seat.
    pub fn chips_to_call(&self, player: Player) -> u32 {
        self.bets[player.other().index()].saturating_sub(self.bets[player.index()])
    }

    /// Information-set key for `player`: seat, private rank, public rank and
    /// the public betting sequence.
    pub fn info_key(&self, player: Player) -> String {
        let mut key = String::with_capacity(16);
        key.push_str(if player == self.button { "btn" } else { "oop" });
        key.push(':');
        key.push_str(&self.hole[player.index()].rank.to_string());
        key.push(':');
        match self.board {
            Some(b) => key.push_str(&b.rank.to_string()),
            None => key.push('-'),
        }
        key.push(':');
        for (i, &a) in self.history.iter().enumerate() {
            if Some(i) == self.round_split {
                key.push('/');
            }
            key.push(ACTION_CHARS[a as usize]);
        }
        if self.round_split == Some(self.history.len()) {
            key.push('/');
        }
        key
    }

    /// Largest reachable pot, used to scale the pot observation.
    pub fn pot_cap(spec: &GameSpec) -> u32 {
        let m = spec.max_raises_per_round as u32;
        2 * (ANTE + raise_size(1) * m + raise_size(2) * m)
    }
}

pub(crate) fn deal(spec: &GameSpec, rng: &mut Rng) -> PokerState {
    let picks = sample(rng, spec.deck_size(), 3);
    let button = if rand::Rng::gen_bool(rng, 0.5) {
        Player::First
    } else {
        Player::Second
    };
    new_hand(
        button,
        [Card::from_index(picks.index(0)), Card::from_index(picks.index(1))],
        Card::from_index(picks.index(2)),
    )
}

/// Fresh hand after antes, with explicit cards and button.
pub fn new_hand(button: Player, hole: [Card; 2], pending_board: Card) -> PokerState {
    PokerState {
        button,
        to_act: button,
        round: 1,
        hole,
        board: None,
        pending_board,
        bets: [ANTE, ANTE],
        pot: 2 * ANTE,
        raise_count: 0,
        actions_in_round: 0,
        terminal: false,
        folded: None,
        history: Vec::new(),
        round_split: None,
    }
}

pub(crate) fn legal_actions(spec: &GameSpec, s: &PokerState) -> ActionSet {
    let mut set = ActionSet::EMPTY.with(FOLD);
    if s.bets[0] == s.bets[1] {
        set = set.with(CHECK);
    } else {
        set = set.with(CALL);
    }
    if s.raise_count < spec.max_raises_per_round {
        set = set.with(RAISE);
    }
    set
}

pub(crate) fn apply(_spec: &GameSpec, s: &PokerState, action: usize) -> (PokerState, [f64; 2]) {
    let mut n = s.clone();
    let p = s.to_act;
    let (me, other) = (p.index(), p.other().index());
    n.history.push(action as u8);
    let mut round_over = false;
    match action {
        FOLD => {
            n.terminal = true;
            n.folded = Some(p);
            let lost = n.bets[me] as f64;
            let mut r = [0.0; 2];
            r[me] = -lost;
            r[other] = lost;
            return (n, r);
        }
        CHECK => {
            n.actions_in_round += 1;
            round_over = n.actions_in_round >= 2;
        }
        CALL => {
            n.bets[me] = n.bets[other];
            n.actions_in_round += 1;
            round_over = true;
        }
        RAISE => {
            n.bets[me] = n.bets[other] + raise_size(n.round);
            n.raise_count += 1;
            n.actions_in_round += 1;
        }
        _ => unreachable!("action validated by caller"),
    }
    n.pot = n.bets[0] + n.bets[1];
    if !round_over {
        n.to_act = p.other();
        return (n, [0.0; 2]);
    }
    if n.round == 1 {
        n.round = 2;
        n.board = Some(n.pending_board);
        n.raise_count = 0;
        n.actions_in_round = 0;
        n.to_act = n.button;
        n.round_split = Some(n.history.len());
        return (n, [0.0; 2]);
    }
    n.terminal = true;
    let board = n.board.expect("board present in round 2");
    let stake = n.bets[0].min(n.bets[1]) as f64;
    let r = match showdown_winner(n.hole[0], n.hole[1], board) {
        Showdown::A => [stake, -stake],
        Showdown::B => [-stake, stake],
        Showdown::Split => [0.0, 0.0],
    };
    (n, r)
}

pub(crate) fn encode(spec: &GameSpec, s: &PokerState, player: Player, out: &mut [f64]) {
    let ranks = spec.num_ranks as f64;
    out[0] = if s.button == player { 1.0 } else { 0.0 };
    out[1] = if s.to_act == player && !s.terminal { 1.0 } else { 0.0 };
    out[2] = (s.round - 1) as f64;
    out[3] = (s.hole[player.index()].rank as f64 + 1.0) / ranks;
    // absent board is rank -1, which scales to 0
    out[4] = s.board.map_or(0.0, |b| (b.rank as f64 + 1.0) / ranks);
    out[5] = s.chips_to_call(player) as f64 / raise_size(2) as f64;
    out[6] = s.pot as f64 / PokerState::pot_cap(spec) as f64;
}
