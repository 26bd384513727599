//! Fixed-priority Tic-Tac-Toe opponents.

use crate::env::tictactoe::TicTacToeBoard;
use crate::error::{Error, Result};

const CENTER_CORNERS_EDGES: [usize; 9] = [4, 0, 2, 6, 8, 1, 3, 5, 7];
const ROW_MAJOR: [usize; 9] = [0, 1, 2, 3, 4, 5, 6, 7, 8];
const COLUMN_MAJOR: [usize; 9] = [0, 3, 6, 1, 4, 7, 2, 5, 8];

pub const NUM_ORDERINGS: u8 = 3;

/// Cell priority for an ordering id: 0 = center, corners, edges;
/// 1 = row-major; 2 = column-major.
pub fn ordering(ordering_id: u8) -> Result<&'static [usize; 9]> {
    match ordering_id {
        0 => Ok(&CENTER_CORNERS_EDGES),
        1 => Ok(&ROW_MAJOR),
        2 => Ok(&COLUMN_MAJOR),
        other => Err(Error::config(format!("unknown pattern ordering {other}"))),
    }
}

/// First empty cell in the ordering.
pub fn preferred_pattern_act(ordering_id: u8, board: &TicTacToeBoard) -> Result<usize> {
    ordering(ordering_id)?
        .iter()
        .copied()
        .find(|&i| board.is_empty_cell(i))
        .ok_or_else(|| Error::contract("pattern opponent asked to move on a full board"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_first_moves() {
        let empty = TicTacToeBoard::new();
        assert_eq!(preferred_pattern_act(0, &empty).unwrap(), 4);
        assert_eq!(preferred_pattern_act(1, &empty).unwrap(), 0);
        assert_eq!(preferred_pattern_act(2, &empty).unwrap(), 0);
        let center = empty.play(4).unwrap();
        assert_eq!(preferred_pattern_act(0, &center).unwrap(), 0);
        assert!(preferred_pattern_act(7, &empty).is_err());
    }
}
