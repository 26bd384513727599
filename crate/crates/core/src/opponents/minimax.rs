//! Exact Tic-Tac-Toe values by full-depth alpha-beta search.

use crate::env::tictactoe::{Mark, TicTacToeBoard};

/// Game-theoretic value for the side to move and the first optimal move in
/// row-major order (`None` on terminal boards).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MinimaxResult {
    pub value: i8,
    pub best: Option<usize>,
}

fn terminal_value(board: &TicTacToeBoard) -> Option<i8> {
    match board.winner() {
        // The previous mover completed a line.
        Some(_) => Some(-1),
        None if board.is_full() => Some(0),
        None => None,
    }
}

fn alphabeta(board: &TicTacToeBoard, mut alpha: i8, beta: i8) -> i8 {
    if let Some(v) = terminal_value(board) {
        return v;
    }
    let mut best = -2;
    for idx in board.empty_cells() {
        let child = board.play(idx).expect("empty cell");
        let v = -alphabeta(&child, -beta, -alpha);
        if v > best {
            best = v;
        }
        if best > alpha {
            alpha = best;
        }
        if alpha >= beta {
            break;
        }
    }
    best
}

/// Value of every legal move from the mover's perspective, row-major.
pub fn move_values(board: &TicTacToeBoard) -> Vec<(usize, i8)> {
    if board.is_terminal() {
        return Vec::new();
    }
    board
        .empty_cells()
        .into_iter()
        .map(|idx| {
            let child = board.play(idx).expect("empty cell");
            (idx, -alphabeta(&child, -2, 2))
        })
        .collect()
}

pub fn minimax_value(board: &TicTacToeBoard) -> MinimaxResult {
    if let Some(v) = terminal_value(board) {
        return MinimaxResult { value: v, best: None };
    }
    let mut out = MinimaxResult { value: -2, best: None };
    for (idx, v) in move_values(board) {
        if v > out.value {
            out = MinimaxResult { value: v, best: Some(idx) };
        }
    }
    out
}

/// Value of `board` from `mark`'s point of view.
pub fn value_for(board: &TicTacToeBoard, mark: Mark) -> i8 {
    let v = minimax_value(board).value;
    if board.to_move() == mark {
        v
    } else {
        -v
    }
}

/// Moves that keep the mover's game-theoretic value.
pub fn optimal_moves(board: &TicTacToeBoard) -> Vec<usize> {
    let values = move_values(board);
    let best = values.iter().map(|(_, v)| *v).max();
    values
        .into_iter()
        .filter(|(_, v)| Some(*v) == best)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    // Plain negamax without pruning, memoized over every reachable board.
    fn reference(board: &TicTacToeBoard, memo: &mut HashMap<TicTacToeBoard, i8>) -> i8 {
        if let Some(v) = memo.get(board) {
            return *v;
        }
        let v = if board.winner().is_some() {
            -1
        } else if board.is_full() {
            0
        } else {
            board
                .empty_cells()
                .into_iter()
                .map(|i| -reference(&board.play(i).unwrap(), memo))
                .max()
                .unwrap()
        };
        memo.insert(*board, v);
        v
    }

    #[test]
    fn empty_board_is_a_draw() {
        let r = minimax_value(&TicTacToeBoard::new());
        assert_eq!(r.value, 0);
        assert_eq!(r.best, Some(0));
    }

    #[test]
    fn fork_position_wins_for_x() {
        // By mark counts O is the side to move here; X still wins.
        let b = TicTacToeBoard::from_text("X O .\n. X .\n. . .").unwrap();
        assert_eq!(b.to_move(), Mark::O);
        assert_eq!(value_for(&b, Mark::X), 1);
        assert_eq!(minimax_value(&b).value, -1);
        let after_block = b.play(8).unwrap();
        let r = minimax_value(&after_block);
        assert_eq!(r.value, 1);
        assert!(optimal_moves(&after_block).contains(&r.best.unwrap()));
    }

    #[test]
    fn completed_line_is_terminal() {
        let b = TicTacToeBoard::from_text("X X X\nO O .\n. . .").unwrap();
        let r = minimax_value(&b);
        assert_eq!(r.value, -1, "O to move has lost");
        assert_eq!(r.best, None);
    }

    #[test]
    fn agrees_with_unpruned_search_on_every_reachable_board() {
        let mut memo = HashMap::new();
        reference(&TicTacToeBoard::new(), &mut memo);
        assert_eq!(memo.len(), 5478);
        for (board, v) in &memo {
            assert_eq!(minimax_value(board).value, *v, "{}", board.to_text());
        }
    }
}
