//! Post-episode reflections: a structured digest computed from the trajectory
//! alone, rendered to text for logs and prompts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::advantage::anchor_key;
use crate::env::kuhn::is_showdown;
use crate::env::tictactoe::{cell_index, Mark, TicTacToeBoard};
use crate::env::{Action, Card, GameResult, KuhnMove, StateSnapshot, TaskInstance};
use crate::opponents::minimax::move_values;
use crate::opponents::pattern::{preferred_pattern_act, NUM_ORDERINGS};

use super::EpisodeTrajectory;

/// One agent decision, keyed by its anchor state. Sokoban turns are split
/// into single moves.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub step: usize,
    pub anchor: u64,
    pub action: Action,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    MissedWin { step: usize, anchor: u64, cell: Action },
    MissedBlock { step: usize, anchor: u64, cell: Action },
    Blunder { step: usize, anchor: u64, played: Action, better: Action },
    Invalid { step: usize, action: Action },
    Deadlock { step: usize, anchor: u64, action: Action },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KuhnOpponentAct {
    pub facing_bet: bool,
    pub action: KuhnMove,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpponentDigest {
    None,
    TicTacToe {
        /// Opponent cells in play order.
        moves: Vec<usize>,
        cell_counts: [u32; 9],
        /// Per preferred-pattern ordering, the index of the first opponent
        /// move that departed from it (`None` if every move matched).
        first_divergence: Vec<Option<usize>>,
    },
    Kuhn {
        acts: Vec<KuhnOpponentAct>,
        revealed_card: Option<Card>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflectionFeatures {
    pub episode_index: usize,
    pub outcome: GameResult,
    pub invalid_count: u32,
    pub kuhn_chips: Option<i32>,
    pub decisions: Vec<DecisionRecord>,
    pub corrections: Vec<Correction>,
    pub opponent: OpponentDigest,
}

impl ReflectionFeatures {
    pub fn succeeded(&self) -> bool {
        self.outcome == GameResult::Win
    }

    /// +1 for a win, 0 for a draw, -1 otherwise.
    pub fn outcome_score(&self) -> f64 {
        match self.outcome {
            GameResult::Win => 1.0,
            GameResult::Draw | GameResult::Ongoing => 0.0,
            GameResult::Loss | GameResult::Timeout => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub episode_index: usize,
    pub text: String,
    /// `None` for the empty reflection.
    pub features: Option<ReflectionFeatures>,
}

impl Reflection {
    pub fn empty(episode_index: usize) -> Self {
        Self {
            episode_index,
            text: String::new(),
            features: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_none() && self.text.is_empty()
    }
}

fn placed_cell(board: &TicTacToeBoard, action: &Action) -> Option<usize> {
    let Action::Place { row, col } = action else { return None };
    cell_index(*row, *col).filter(|&i| board.is_empty_cell(i))
}

fn ttt_corrections(traj: &EpisodeTrajectory, agent: Mark, out: &mut Vec<Correction>) {
    let mut blunder_seen = false;
    for (i, step) in traj.steps.iter().enumerate() {
        let t = i + 1;
        let StateSnapshot::TicTacToe { board, .. } = &step.obs.structured else { continue };
        if step.invalid {
            continue;
        }
        let Some(played) = placed_cell(board, &step.action) else { continue };
        let anchor = anchor_key(&step.obs.structured);
        let own_wins = board.winning_cells(agent);
        let threats = board.winning_cells(agent.other());
        if !own_wins.is_empty() && !own_wins.contains(&played) {
            out.push(Correction::MissedWin {
                step: t,
                anchor,
                cell: Action::place_index(own_wins[0]),
            });
        } else if own_wins.is_empty() && !threats.is_empty() && !threats.contains(&played) {
            out.push(Correction::MissedBlock {
                step: t,
                anchor,
                cell: Action::place_index(threats[0]),
            });
        } else if !blunder_seen {
            let values = move_values(board);
            let best = values.iter().max_by_key(|(i, v)| (*v, std::cmp::Reverse(*i)));
            let played_value = values.iter().find(|(i, _)| *i == played).map(|(_, v)| *v);
            if let (Some(&(better, best_v)), Some(pv)) = (best, played_value) {
                if pv < best_v {
                    blunder_seen = true;
                    out.push(Correction::Blunder {
                        step: t,
                        anchor,
                        played: step.action.clone(),
                        better: Action::place_index(better),
                    });
                }
            }
        }
    }
}

fn ttt_opponent_digest(traj: &EpisodeTrajectory) -> OpponentDigest {
    // Board positions right before each opponent move, paired with the move.
    let mut faced: Vec<(TicTacToeBoard, usize)> = Vec::new();
    if let Some(Action::Place { row, col }) = &traj.opening_opponent_action {
        if let Some(idx) = cell_index(*row, *col) {
            faced.push((TicTacToeBoard::new(), idx));
        }
    }
    for step in &traj.steps {
        let (StateSnapshot::TicTacToe { board, .. }, Some(Action::Place { row, col })) =
            (&step.obs.structured, &step.opponent_reply)
        else {
            continue;
        };
        let Some(reply) = cell_index(*row, *col) else { continue };
        if let Some(b) = placed_cell(board, &step.action).and_then(|i| board.play(i)) {
            faced.push((b, reply));
        }
    }
    let mut cell_counts = [0u32; 9];
    for (_, m) in &faced {
        cell_counts[*m] += 1;
    }
    let first_divergence = (0..NUM_ORDERINGS)
        .map(|k| {
            faced
                .iter()
                .position(|(b, m)| preferred_pattern_act(k, b).map_or(true, |p| p != *m))
        })
        .collect();
    OpponentDigest::TicTacToe {
        moves: faced.iter().map(|(_, m)| *m).collect(),
        cell_counts,
        first_divergence,
    }
}

fn kuhn_opponent_digest(traj: &EpisodeTrajectory) -> OpponentDigest {
    let StateSnapshot::Kuhn(view) = &traj.final_obs.structured else {
        return OpponentDigest::None;
    };
    let opp_seat = 1 - view.seat as usize;
    let acts = view
        .history
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 2 == opp_seat)
        .map(|(i, m)| KuhnOpponentAct {
            facing_bet: i > 0 && view.history[i - 1] == KuhnMove::Bet,
            action: *m,
        })
        .collect();
    OpponentDigest::Kuhn {
        acts,
        revealed_card: if is_showdown(&view.history) { view.opponent_card } else { None },
    }
}

/// Splits each step into single decisions with their anchors.
pub fn decision_records(traj: &EpisodeTrajectory) -> Vec<DecisionRecord> {
    let mut out = Vec::new();
    for (i, step) in traj.steps.iter().enumerate() {
        match (&step.obs.structured, &step.action) {
            (StateSnapshot::Sokoban(room), Action::Moves(moves)) => {
                let mut room = room.clone();
                for d in moves {
                    out.push(DecisionRecord {
                        step: i + 1,
                        anchor: anchor_key(&StateSnapshot::Sokoban(room.clone())),
                        action: Action::Moves(vec![*d]),
                    });
                    match room.try_move(*d) {
                        Some((next, _)) if !next.is_solved() => room = next,
                        _ => break,
                    }
                }
            }
            (s, a) => out.push(DecisionRecord {
                step: i + 1,
                anchor: anchor_key(s),
                action: a.clone(),
            }),
        }
    }
    out
}

fn sokoban_deadlock(traj: &EpisodeTrajectory) -> Option<Correction> {
    if traj.outcome != GameResult::Loss {
        return None;
    }
    let (i, step) = traj.steps.iter().enumerate().next_back()?;
    let (StateSnapshot::Sokoban(room), Action::Moves(moves)) = (&step.obs.structured, &step.action) else {
        return None;
    };
    // Find the single move that first produced the deadlock.
    let mut room = room.clone();
    for d in moves {
        let anchor = anchor_key(&StateSnapshot::Sokoban(room.clone()));
        let (next, _) = room.try_move(*d)?;
        if next.has_deadlock() {
            return Some(Correction::Deadlock {
                step: i + 1,
                anchor,
                action: Action::Moves(vec![*d]),
            });
        }
        room = next;
    }
    None
}

/// The structured digest of a finished episode. Depends only on its inputs.
pub fn digest(traj: &EpisodeTrajectory, task: &TaskInstance) -> ReflectionFeatures {
    let mut corrections = Vec::new();
    for (i, step) in traj.steps.iter().enumerate() {
        if step.invalid {
            corrections.push(Correction::Invalid {
                step: i + 1,
                action: step.action.clone(),
            });
        }
    }
    let opponent = match task {
        TaskInstance::TicTacToe { agent } => {
            ttt_corrections(traj, *agent, &mut corrections);
            ttt_opponent_digest(traj)
        }
        TaskInstance::Kuhn => kuhn_opponent_digest(traj),
        TaskInstance::Sokoban { .. } => {
            corrections.extend(sokoban_deadlock(traj));
            OpponentDigest::None
        }
    };
    ReflectionFeatures {
        episode_index: traj.episode_index,
        outcome: traj.outcome,
        invalid_count: traj.invalid_count,
        kuhn_chips: traj.kuhn_chips,
        decisions: decision_records(traj),
        corrections,
        opponent,
    }
}

/// Text rendering of a digest.
pub fn render(features: &ReflectionFeatures) -> String {
    let mut out = format!(
        "Episode {}: outcome={}, invalid actions={}",
        features.episode_index, features.outcome, features.invalid_count
    );
    if let Some(chips) = features.kuhn_chips {
        let _ = write!(out, ", chips={chips:+}");
    }
    let actions: Vec<String> = features.decisions.iter().map(|d| d.action.to_string()).collect();
    let _ = write!(out, "\nMy actions: {}", actions.join(" "));
    for c in &features.corrections {
        let line = match c {
            Correction::MissedWin { step, cell, .. } => format!("step {step}: missed the winning cell {cell}"),
            Correction::MissedBlock { step, cell, .. } => format!("step {step}: failed to block at {cell}"),
            Correction::Blunder { step, played, better, .. } => {
                format!("step {step}: {played} lost value, {better} was stronger")
            }
            Correction::Invalid { step, action } => format!("step {step}: invalid action {action}"),
            Correction::Deadlock { step, action, .. } => format!("step {step}: move {action} created a deadlock"),
        };
        let _ = write!(out, "\n- {line}");
    }
    match &features.opponent {
        OpponentDigest::None => {}
        OpponentDigest::TicTacToe {
            moves, first_divergence, ..
        } => {
            let cells: Vec<String> = moves.iter().map(|m| Action::place_index(*m).to_string()).collect();
            let _ = write!(out, "\nOpponent moves: {}", cells.join(" "));
            for (k, d) in first_divergence.iter().enumerate() {
                if d.is_none() && !moves.is_empty() {
                    let _ = write!(out, "\nOpponent followed fixed ordering {k} throughout");
                }
            }
        }
        OpponentDigest::Kuhn { acts, revealed_card } => {
            let moves: Vec<String> = acts
                .iter()
                .map(|a| format!("{}{}", a.action, if a.facing_bet { " (facing bet)" } else { "" }))
                .collect();
            let _ = write!(out, "\nOpponent actions: {}", moves.join(", "));
            if let Some(c) = revealed_card {
                let _ = write!(out, "\nOpponent showed {}", c.symbol());
            }
        }
    }
    out
}
