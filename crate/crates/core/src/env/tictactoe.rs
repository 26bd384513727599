use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    X,
    O,
}

impl Mark {
    pub fn other(self) -> Mark {
        match self {
            Mark::X => Mark::O,
            Mark::O => Mark::X,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Mark::X => 'X',
            Mark::O => 'O',
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// All eight winning lines as flat cell indices.
pub const LINES: [[usize; 3]; 8] = [
    [0, 1, 2],
    [3, 4, 5],
    [6, 7, 8],
    [0, 3, 6],
    [1, 4, 7],
    [2, 5, 8],
    [0, 4, 8],
    [2, 4, 6],
];

/// Converts a 1-indexed `(row, col)` coordinate to a flat index.
pub fn cell_index(row: u8, col: u8) -> Option<usize> {
    if (1..=3).contains(&row) && (1..=3).contains(&col) {
        Some((row as usize - 1) * 3 + (col as usize - 1))
    } else {
        None
    }
}

/// Converts a flat index back to a 1-indexed `(row, col)`.
pub fn cell_coords(idx: usize) -> (u8, u8) {
    debug_assert!(idx < 9);
    ((idx / 3) as u8 + 1, (idx % 3) as u8 + 1)
}

/// A 3×3 board. X always moves first, so the mover is implied by the mark counts
/// and is stored only for convenience.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TicTacToeBoard {
    cells: [Option<Mark>; 9],
    to_move: Mark,
}

impl Default for TicTacToeBoard {
    fn default() -> Self {
        Self::new()
    }
}

impl TicTacToeBoard {
    pub fn new() -> Self {
        Self {
            cells: [None; 9],
            to_move: Mark::X,
        }
    }

    /// Builds a board from flat cells, checking the mark-count invariant.
    pub fn from_cells(cells: [Option<Mark>; 9]) -> Result<Self> {
        let xs = cells.iter().filter(|c| **c == Some(Mark::X)).count();
        let os = cells.iter().filter(|c| **c == Some(Mark::O)).count();
        if xs != os && xs != os + 1 {
            return Err(Error::Parse(format!("illegal mark counts: {xs} X vs {os} O")));
        }
        let board = Self {
            cells,
            to_move: if xs == os { Mark::X } else { Mark::O },
        };
        if board.line_owner(Mark::X) && board.line_owner(Mark::O) {
            return Err(Error::Parse("both players have three in a row".into()));
        }
        Ok(board)
    }

    pub fn cells(&self) -> &[Option<Mark>; 9] {
        &self.cells
    }

    pub fn to_move(&self) -> Mark {
        self.to_move
    }

    pub fn get(&self, row: u8, col: u8) -> Option<Mark> {
        cell_index(row, col).and_then(|i| self.cells[i])
    }

    pub fn is_empty_cell(&self, idx: usize) -> bool {
        idx < 9 && self.cells[idx].is_none()
    }

    /// Places the mover's mark on `idx`, returning the new board, or `None` if illegal.
    pub fn play(&self, idx: usize) -> Option<Self> {
        if !self.is_empty_cell(idx) || self.is_terminal() {
            return None;
        }
        let mut next = *self;
        next.cells[idx] = Some(self.to_move);
        next.to_move = self.to_move.other();
        Some(next)
    }

    fn line_owner(&self, mark: Mark) -> bool {
        LINES
            .iter()
            .any(|l| l.iter().all(|&i| self.cells[i] == Some(mark)))
    }

    pub fn winner(&self) -> Option<Mark> {
        if self.line_owner(Mark::X) {
            Some(Mark::X)
        } else if self.line_owner(Mark::O) {
            Some(Mark::O)
        } else {
            None
        }
    }

    pub fn is_full(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    pub fn is_terminal(&self) -> bool {
        self.winner().is_some() || self.is_full()
    }

    /// Empty cells in row-major order, as flat indices.
    pub fn empty_cells(&self) -> Vec<usize> {
        (0..9).filter(|&i| self.cells[i].is_none()).collect()
    }

    /// Cells where `mark` would complete a line immediately.
    pub fn winning_cells(&self, mark: Mark) -> Vec<usize> {
        (0..9)
            .filter(|&i| self.cells[i].is_none())
            .filter(|&i| {
                LINES.iter().any(|l| {
                    l.contains(&i) && l.iter().filter(|&&j| j != i).all(|&j| self.cells[j] == Some(mark))
                })
            })
            .collect()
    }

    pub fn count(&self, mark: Mark) -> usize {
        self.cells.iter().filter(|c| **c == Some(mark)).count()
    }

    /// Three lines of `. X O` separated by single spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(18);
        for r in 0..3 {
            let row: Vec<String> = (0..3)
                .map(|c| match self.cells[r * 3 + c] {
                    None => ".".to_string(),
                    Some(m) => m.symbol().to_string(),
                })
                .collect();
            out.push_str(&row.join(" "));
            if r < 2 {
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        if rows.len() != 3 {
            return Err(Error::Parse(format!("expected 3 rows, got {}", rows.len())));
        }
        let mut cells = [None; 9];
        for (r, row) in rows.iter().enumerate() {
            let symbols: Vec<char> = row.chars().filter(|c| !c.is_whitespace()).collect();
            if symbols.len() != 3 {
                return Err(Error::Parse(format!("row {} has {} cells", r + 1, symbols.len())));
            }
            for (c, s) in symbols.into_iter().enumerate() {
                cells[r * 3 + c] = match s {
                    '.' => None,
                    'X' => Some(Mark::X),
                    'O' => Some(Mark::O),
                    other => return Err(Error::Parse(format!("unknown cell symbol {other:?}"))),
                };
            }
        }
        Self::from_cells(cells)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_board_renders_dots() {
        assert_eq!(TicTacToeBoard::new().to_text(), ". . .\n. . .\n. . .");
    }

    #[test]
    fn text_round_trip() {
        let b = TicTacToeBoard::new().play(4).unwrap().play(0).unwrap().play(8).unwrap();
        let parsed = TicTacToeBoard::from_text(&b.to_text()).unwrap();
        assert_eq!(parsed, b);
        assert_eq!(parsed.to_move(), Mark::O);
    }

    #[test]
    fn rejects_illegal_counts() {
        assert!(TicTacToeBoard::from_text("X X .\n. . .\n. . .").is_err());
        assert!(TicTacToeBoard::from_text("O . .\n. . .\n. . .").is_err());
    }

    #[test]
    fn winning_cells_detects_threats() {
        let b = TicTacToeBoard::from_text("X X .\nO O .\n. . .").unwrap();
        assert_eq!(b.winning_cells(Mark::X), vec![2]);
        assert_eq!(b.winning_cells(Mark::O), vec![5]);
    }

    #[test]
    fn play_rejects_occupied() {
        let b = TicTacToeBoard::new().play(0).unwrap();
        assert!(b.play(0).is_none());
    }
}
