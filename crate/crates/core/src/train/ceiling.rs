//! Best achievable success rate against a fixed opponent.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::sokoban::solve;
use crate::env::tictactoe::{Mark, TicTacToeBoard};
use crate::env::{EnvConfig, SeatChoice, TaskInstance};
use crate::error::{Error, Result};
use crate::opponents::mcts::mcts_select;
use crate::opponents::pattern::preferred_pattern_act;
use crate::opponents::{best_response_value, Archetype, OpponentSpec, Utility, NO_OPPONENT_ID};
use crate::seeds;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ceiling {
    pub opponent_id: String,
    /// Success probability of the best response.
    pub value: f64,
    /// False when the value is a sampled estimate.
    pub exact: bool,
    pub note: String,
}

/// Opponent move distribution at a Tic-Tac-Toe position.
type MoveDist = Vec<(usize, f64)>;

type ReplyModel = Box<dyn Fn(&TicTacToeBoard) -> Result<MoveDist>>;

struct TttSearch<'a> {
    agent: Mark,
    opponent: &'a dyn Fn(&TicTacToeBoard) -> Result<MoveDist>,
    memo: HashMap<TicTacToeBoard, f64>,
}

impl TttSearch<'_> {
    /// Probability that the agent wins from `board` under best play.
    fn value(&mut self, board: &TicTacToeBoard) -> Result<f64> {
        if let Some(w) = board.winner() {
            return Ok(if w == self.agent { 1.0 } else { 0.0 });
        }
        if board.is_full() {
            return Ok(0.0);
        }
        if let Some(v) = self.memo.get(board) {
            return Ok(*v);
        }
        let v = if board.to_move() == self.agent {
            let mut best: f64 = 0.0;
            for idx in board.empty_cells() {
                best = best.max(self.value(&board.play(idx).expect("empty cell"))?);
            }
            best
        } else {
            let mut total = 0.0;
            for (idx, p) in (self.opponent)(board)? {
                let next = board
                    .play(idx)
                    .ok_or_else(|| Error::contract(format!("opponent picked occupied cell {idx}")))?;
                total += p * self.value(&next)?;
            }
            total
        };
        self.memo.insert(*board, v);
        Ok(v)
    }
}

fn board_code(board: &TicTacToeBoard) -> u64 {
    board.cells().iter().fold(0, |acc, c| {
        acc * 3
            + match c {
                None => 0,
                Some(Mark::X) => 1,
                Some(Mark::O) => 2,
            }
    })
}

/// Samples taken of the MCTS opponent's move at each position.
pub const MCTS_SAMPLES_PER_POSITION: usize = 8;

/// Sokoban rooms sampled for the solvability estimate.
pub const SOKOBAN_ROOM_SAMPLES: u64 = 200;

fn ttt_ceiling(agent: Mark, spec: &OpponentSpec) -> Result<Ceiling> {
    let (opponent, exact, note): (ReplyModel, bool, String) = match &spec.archetype {
        Archetype::PreferredPattern { ordering_id } => {
            let id = *ordering_id;
            (
                Box::new(move |b| Ok(vec![(preferred_pattern_act(id, b)?, 1.0)])),
                true,
                "expectimax against the fixed ordering".into(),
            )
        }
        Archetype::RandomTtt => (
            Box::new(|b| {
                let cells = b.empty_cells();
                let p = 1.0 / cells.len() as f64;
                Ok(cells.into_iter().map(|c| (c, p)).collect())
            }),
            true,
            "expectimax against uniform replies".into(),
        ),
        Archetype::MctsTtt { num_simulations } => {
            let sims = *num_simulations;
            let seed = spec.seed;
            (
                Box::new(move |b| {
                    let mut rng = seeds::rng(seed, &[0xCE, board_code(b)]);
                    let mut counts = [0usize; 9];
                    for _ in 0..MCTS_SAMPLES_PER_POSITION {
                        let m = mcts_select(b, sims, &mut rng)
                            .ok_or_else(|| Error::contract("MCTS asked to move on a finished board"))?;
                        counts[m] += 1;
                    }
                    let n = MCTS_SAMPLES_PER_POSITION as f64;
                    Ok((0..9).filter(|&i| counts[i] > 0).map(|i| (i, counts[i] as f64 / n)).collect())
                }),
                false,
                format!("estimate: expectimax over {MCTS_SAMPLES_PER_POSITION} sampled MCTS replies per position"),
            )
        }
        _ => return Err(Error::config(format!("{} does not play tic-tac-toe", spec.id()))),
    };
    let mut search = TttSearch {
        agent,
        opponent: opponent.as_ref(),
        memo: HashMap::new(),
    };
    Ok(Ceiling {
        opponent_id: spec.id(),
        value: search.value(&TicTacToeBoard::new())?,
        exact,
        note,
    })
}

/// Best-response success probability against `opponent`. Success means a win
/// in the games and a solved room in Sokoban.
pub fn theoretical_ceiling(env: &EnvConfig, opponent: Option<&OpponentSpec>) -> Result<Ceiling> {
    env.validate()?;
    match (env, opponent) {
        (EnvConfig::KuhnPoker(c), Some(spec)) => {
            let strategy = spec.kuhn_strategy()?;
            let value = |seat| best_response_value(strategy.as_ref(), seat, Utility::Win);
            let value = match c.agent_seat {
                SeatChoice::P0 => value(0),
                SeatChoice::P1 => value(1),
                SeatChoice::Random => 0.5 * (value(0) + value(1)),
            };
            Ok(Ceiling {
                opponent_id: spec.id(),
                value,
                exact: true,
                note: "best response over the Kuhn game tree".into(),
            })
        }
        (EnvConfig::TicTacToe(c), Some(spec)) => ttt_ceiling(c.agent_mark, spec),
        (EnvConfig::Sokoban(c), None) => {
            let budget = c.max_turns as usize * c.actions_per_turn;
            let mut solved = 0;
            for i in 0..SOKOBAN_ROOM_SAMPLES {
                let task = env.instantiate(seeds::derive(0x50C0, &[i]))?;
                let TaskInstance::Sokoban { room, .. } = task else { unreachable!("sokoban config") };
                if solve(&room, c.max_solution_steps).is_some_and(|s| s.moves.len() <= budget) {
                    solved += 1;
                }
            }
            Ok(Ceiling {
                opponent_id: NO_OPPONENT_ID.into(),
                value: solved as f64 / SOKOBAN_ROOM_SAMPLES as f64,
                exact: false,
                note: format!("estimate: rooms out of {SOKOBAN_ROOM_SAMPLES} solvable within {budget} moves"),
            })
        }
        (EnvConfig::Sokoban(_), Some(_)) => Err(Error::config("sokoban has no opponent")),
        (_, None) => Err(Error::config("this game needs an opponent")),
    }
}
