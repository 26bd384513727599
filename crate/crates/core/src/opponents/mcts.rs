//! UCT search for Tic-Tac-Toe with uniform-random rollouts.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::env::tictactoe::TicTacToeBoard;
use crate::seeds::Rng;

pub const EXPLORATION: f64 = std::f64::consts::SQRT_2;

struct Node {
    board: TicTacToeBoard,
    parent: Option<usize>,
    /// Cell that led here from the parent.
    mv: Option<usize>,
    children: Vec<usize>,
    untried: Vec<usize>,
    visits: u32,
    /// Summed reward for the player who moved into this node.
    reward: f64,
}

impl Node {
    fn new(board: TicTacToeBoard, parent: Option<usize>, mv: Option<usize>) -> Self {
        let untried = if board.is_terminal() { Vec::new() } else { board.empty_cells() };
        Self {
            board,
            parent,
            mv,
            children: Vec::new(),
            untried,
            visits: 0,
            reward: 0.0,
        }
    }
}

fn rollout(mut board: TicTacToeBoard, rng: &mut Rng) -> TicTacToeBoard {
    while !board.is_terminal() {
        let cells = board.empty_cells();
        let idx = *cells.choose(rng).expect("non-terminal board has a move");
        board = board.play(idx).expect("empty cell");
    }
    board
}

/// Runs `num_simulations` UCT playouts from `board` and returns the most
/// visited move (lowest cell index on ties). `None` on terminal boards.
pub fn mcts_select(board: &TicTacToeBoard, num_simulations: u32, rng: &mut Rng) -> Option<usize> {
    if board.is_terminal() {
        return None;
    }
    let mut nodes = vec![Node::new(*board, None, None)];
    for _ in 0..num_simulations.max(1) {
        // Selection.
        let mut cur = 0;
        while nodes[cur].untried.is_empty() && !nodes[cur].children.is_empty() {
            let ln_parent = f64::from(nodes[cur].visits).ln();
            let mut best = nodes[cur].children[0];
            let mut best_score = f64::NEG_INFINITY;
            for &c in &nodes[cur].children {
                let n = f64::from(nodes[c].visits);
                let score = nodes[c].reward / n + EXPLORATION * (ln_parent / n).sqrt();
                if score > best_score {
                    best_score = score;
                    best = c;
                }
            }
            cur = best;
        }
        // Expansion.
        if !nodes[cur].untried.is_empty() {
            let pick = rng.gen_range(0..nodes[cur].untried.len());
            let mv = nodes[cur].untried.swap_remove(pick);
            let child_board = nodes[cur].board.play(mv).expect("untried move is legal");
            nodes.push(Node::new(child_board, Some(cur), Some(mv)));
            let id = nodes.len() - 1;
            nodes[cur].children.push(id);
            cur = id;
        }
        // Simulation.
        let end = rollout(nodes[cur].board, rng);
        let winner = end.winner();
        // Backpropagation.
        let mut node = Some(cur);
        while let Some(i) = node {
            nodes[i].visits += 1;
            if nodes[i].parent.is_some() {
                let mover = nodes[i].board.to_move().other();
                nodes[i].reward += match winner {
                    Some(w) if w == mover => 1.0,
                    Some(_) => 0.0,
                    None => 0.5,
                };
            }
            node = nodes[i].parent;
        }
    }
    nodes[0]
        .children
        .iter()
        .map(|&c| (nodes[c].visits, nodes[c].mv.expect("child has a move")))
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, mv)| mv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    #[test]
    fn completes_own_line() {
        let b = TicTacToeBoard::from_text("O O .\nX X .\nX . .").unwrap();
        let mut rng = seeds::rng(1, &[]);
        assert_eq!(mcts_select(&b, 1000, &mut rng), Some(2));
    }

    #[test]
    fn blocks_opponent_threat() {
        let b = TicTacToeBoard::from_text("X X .\n. O .\n. . .").unwrap();
        let mut rng = seeds::rng(2, &[]);
        assert_eq!(mcts_select(&b, 1000, &mut rng), Some(2));
    }

    #[test]
    fn single_simulation_is_legal() {
        let b = TicTacToeBoard::new();
        let mut rng = seeds::rng(3, &[]);
        let mv = mcts_select(&b, 1, &mut rng).unwrap();
        assert!(b.is_empty_cell(mv));
    }

    #[test]
    fn deterministic_under_seed() {
        let b = TicTacToeBoard::from_text("X . .\n. . .\n. . .").unwrap();
        let a = mcts_select(&b, 200, &mut seeds::rng(9, &[]));
        let c = mcts_select(&b, 200, &mut seeds::rng(9, &[]));
        assert_eq!(a, c);
    }
}
