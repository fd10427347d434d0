//! Grid soccer on a 6x9 board.
//!
//! Each player owns a two-cell target area in the middle rows of its edge
//! column (first player on the left, second on the right) and spawns inside
//! it. Carrying the ball into the other player's area scores +1 and ends the
//! episode. Moves are simultaneous; if both players end up contesting the
//! same cell (or swap cells) the ball changes hands and nobody moves.

use rand::Rng as _;

use super::{GameSpec, Player, SOCCER_MAX_STEPS};
use crate::rng::Rng;

pub const NORTH: usize = 0;
pub const SOUTH: usize = 1;
pub const EAST: usize = 2;
pub const WEST: usize = 3;
pub const STAY: usize = 4;

pub const TARGET_ROWS: [usize; 2] = [2, 3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SoccerState {
    pub positions: [Cell; 2],
    pub ball_holder: Player,
    pub step_count: usize,
    pub terminal: bool,
    pub scorer: Option<Player>,
}

/// Column of `player`'s own target area.
pub fn home_col(spec: &GameSpec, player: Player) -> usize {
    match player {
        Player::First => 0,
        Player::Second => spec.grid_dims.1 - 1,
    }
}

pub fn in_area(spec: &GameSpec, owner: Player, cell: Cell) -> bool {
    cell.col == home_col(spec, owner) && TARGET_ROWS.contains(&cell.row)
}

pub fn area_cells(spec: &GameSpec, owner: Player) -> [Cell; 2] {
    let c = home_col(spec, owner);
    [Cell::new(TARGET_ROWS[0], c), Cell::new(TARGET_ROWS[1], c)]
}

/// Destination after `action`; moves off the board leave the player in place.
pub fn moved(spec: &GameSpec, cell: Cell, action: usize) -> Cell {
    let (rows, cols) = spec.grid_dims;
    match action {
        NORTH if cell.row > 0 => Cell::new(cell.row - 1, cell.col),
        SOUTH if cell.row + 1 < rows => Cell::new(cell.row + 1, cell.col),
        EAST if cell.col + 1 < cols => Cell::new(cell.row, cell.col + 1),
        WEST if cell.col > 0 => Cell::new(cell.row, cell.col - 1),
        _ => cell,
    }
}

pub(crate) fn spawn(spec: &GameSpec, rng: &mut Rng) -> SoccerState {
    let mut pick = |p: Player| area_cells(spec, p)[rng.gen_range(0..2)];
    let positions = [pick(Player::First), pick(Player::Second)];
    let ball_holder = if rng.gen_bool(0.5) {
        Player::First
    } else {
        Player::Second
    };
    SoccerState {
        positions,
        ball_holder,
        step_count: 0,
        terminal: false,
        scorer: None,
    }
}

pub(crate) fn apply(spec: &GameSpec, s: &SoccerState, actions: [usize; 2]) -> (SoccerState, [f64; 2]) {
    let mut n = s.clone();
    let dest = [
        moved(spec, s.positions[0], actions[0]),
        moved(spec, s.positions[1], actions[1]),
    ];
    let swap = dest[0] == s.positions[1] && dest[1] == s.positions[0];
    if dest[0] == dest[1] || swap {
        n.ball_holder = s.ball_holder.other();
    } else {
        n.positions = dest;
    }
    n.step_count += 1;
    let holder = n.ball_holder;
    if in_area(spec, holder.other(), n.positions[holder.index()]) {
        n.terminal = true;
        n.scorer = Some(holder);
        let mut r = [-1.0; 2];
        r[holder.index()] = 1.0;
        return (n, r);
    }
    if n.step_count >= SOCCER_MAX_STEPS {
        n.terminal = true;
    }
    (n, [0.0; 2])
}

pub(crate) fn encode(spec: &GameSpec, s: &SoccerState, player: Player, out: &mut [f64]) {
    let (rows, cols) = spec.grid_dims;
    let cells = rows * cols;
    out.iter_mut().for_each(|x| *x = 0.0);
    let idx = |c: Cell| c.row * cols + c.col;
    out[idx(s.positions[player.index()])] = 1.0;
    out[cells + idx(s.positions[player.other().index()])] = 1.0;
    out[2 * cells + idx(s.positions[s.ball_holder.index()])] = 1.0;
    out[3 * cells] = s.step_count as f64 / SOCCER_MAX_STEPS as f64;
}
