//! One-shot rock-paper-scissors.

pub const ROCK: usize = 0;
pub const PAPER: usize = 1;
pub const SCISSORS: usize = 2;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RpsState {
    pub done: bool,
    /// Choices revealed by the single simultaneous step.
    pub choices: Option<[usize; 2]>,
}

/// Payoff to the first player.
pub fn payoff(a: usize, b: usize) -> f64 {
    match (3 + a - b) % 3 {
        0 => 0.0,
        1 => 1.0,
        _ => -1.0,
    }
}

pub(crate) fn play(a: usize, b: usize) -> (RpsState, [f64; 2]) {
    let r = payoff(a, b);
    (
        RpsState {
            done: true,
            choices: Some([a, b]),
        },
        [r, -r],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn payoff_matrix() {
        assert_eq!(payoff(ROCK, PAPER), -1.0);
        assert_eq!(payoff(PAPER, ROCK), 1.0);
        assert_eq!(payoff(SCISSORS, PAPER), 1.0);
        assert_eq!(payoff(ROCK, SCISSORS), 1.0);
        for a in 0..3 {
            assert_eq!(payoff(a, a), 0.0);
            for b in 0..3 {
                assert_eq!(payoff(a, b), -payoff(b, a));
            }
        }
    }
}
