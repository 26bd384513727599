//! Per-action feature vectors for the linear softmax policy.
//!
//! Action-independent features cancel in a softmax, so the state enters
//! through action-relative encodings. Each environment has a base block
//! followed by a memory block that is all zeros when memory holds only the
//! empty reflection.

use std::collections::{HashMap, HashSet};

use crate::advantage::anchor_key;
use crate::env::sokoban::{Direction, SokobanRoom};
use crate::env::tictactoe::{cell_index, Mark, TicTacToeBoard};
use crate::env::{Action, Card, EnvKind, KuhnMove, StateSnapshot};
use crate::error::{Error, Result};
use crate::opponents::pattern::{preferred_pattern_act, NUM_ORDERINGS};
use crate::rollout::{Correction, OpponentDigest, PolicyContext, Reflection};

pub const TTT_DIM: usize = 18;
pub const KUHN_DIM: usize = 98;
pub const SOKOBAN_DIM: usize = 15;

/// Offset of the memory block.
pub fn memory_block_start(kind: EnvKind) -> usize {
    match kind {
        EnvKind::TicTacToe => 12,
        EnvKind::KuhnPoker => 24,
        EnvKind::Sokoban => 12,
    }
}

pub fn feature_dim(kind: EnvKind) -> usize {
    match kind {
        EnvKind::TicTacToe => TTT_DIM,
        EnvKind::KuhnPoker => KUHN_DIM,
        EnvKind::Sokoban => SOKOBAN_DIM,
    }
}

/// Candidate actions at one sampling step and their feature vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoicePoint {
    pub actions: Vec<Action>,
    pub features: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, Default)]
struct Rate {
    hits: u32,
    total: u32,
}

impl Rate {
    fn add(&mut self, hit: bool) {
        self.total += 1;
        self.hits += u32::from(hit);
    }

    /// Centred to [-1, 1]; 0 when nothing was observed.
    fn centred(self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            2.0 * f64::from(self.hits) / f64::from(self.total) - 1.0
        }
    }
}

/// Aggregates of every reflection digest in memory.
#[derive(Clone, Debug, Default)]
pub struct MemorySummary {
    results: HashMap<(u64, Action), (f64, u32)>,
    suggested: HashSet<(u64, Action)>,
    warned: HashSet<(u64, Action)>,
    opponent_cells: [u32; 9],
    opponent_moves: u32,
    /// Pattern orderings every observed opponent move agreed with.
    consistent_orderings: Vec<u8>,
    kuhn_bet: Rate,
    kuhn_call: Rate,
    kuhn_strength: (f64, u32),
}

impl MemorySummary {
    pub fn from_memory(memory: &[Reflection]) -> Self {
        let mut s = MemorySummary::default();
        let mut orderings: Option<Vec<u8>> = None;
        for f in memory.iter().filter_map(|r| r.features.as_ref()) {
            let score = f.outcome_score();
            for d in &f.decisions {
                let e = s.results.entry((d.anchor, d.action.clone())).or_insert((0.0, 0));
                e.0 += score;
                e.1 += 1;
            }
            for c in &f.corrections {
                match c {
                    Correction::MissedWin { anchor, cell, .. } | Correction::MissedBlock { anchor, cell, .. } => {
                        s.suggested.insert((*anchor, cell.clone()));
                    }
                    Correction::Blunder {
                        anchor, played, better, ..
                    } => {
                        s.suggested.insert((*anchor, better.clone()));
                        s.warned.insert((*anchor, played.clone()));
                    }
                    Correction::Deadlock { anchor, action, .. } => {
                        s.warned.insert((*anchor, action.clone()));
                    }
                    Correction::Invalid { .. } => {}
                }
            }
            match &f.opponent {
                OpponentDigest::None => {}
                OpponentDigest::TicTacToe {
                    moves,
                    cell_counts,
                    first_divergence,
                } => {
                    for (total, c) in s.opponent_cells.iter_mut().zip(cell_counts) {
                        *total += c;
                    }
                    s.opponent_moves += moves.len() as u32;
                    if !moves.is_empty() {
                        let here: Vec<u8> = (0..NUM_ORDERINGS)
                            .filter(|&k| first_divergence.get(k as usize).copied().flatten().is_none())
                            .collect();
                        orderings = Some(match orderings {
                            None => here,
                            Some(prev) => prev.into_iter().filter(|k| here.contains(k)).collect(),
                        });
                    }
                }
                OpponentDigest::Kuhn { acts, revealed_card } => {
                    let mut aggressive = false;
                    for a in acts {
                        let bet = a.action == KuhnMove::Bet;
                        aggressive |= bet;
                        if a.facing_bet {
                            s.kuhn_call.add(bet);
                        } else {
                            s.kuhn_bet.add(bet);
                        }
                    }
                    if let (Some(card), true) = (revealed_card, aggressive) {
                        s.kuhn_strength.0 += card_strength(*card);
                        s.kuhn_strength.1 += 1;
                    }
                }
            }
        }
        s.consistent_orderings = orderings.unwrap_or_default();
        s
    }

    /// Mean outcome score after taking `action` at `anchor` earlier, and
    /// whether it was taken at all.
    fn result(&self, anchor: u64, action: &Action) -> (f64, f64) {
        match self.results.get(&(anchor, action.clone())) {
            Some((sum, n)) if *n > 0 => (sum / f64::from(*n), 1.0),
            _ => (0.0, 0.0),
        }
    }

    fn flag(set: &HashSet<(u64, Action)>, anchor: u64, action: &Action) -> f64 {
        if set.contains(&(anchor, action.clone())) {
            1.0
        } else {
            0.0
        }
    }
}

fn card_strength(c: Card) -> f64 {
    match c {
        Card::J => -1.0,
        Card::Q => 0.0,
        Card::K => 1.0,
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Best result the agent can force when the opponent follows `ordering`.
fn value_against_pattern(board: &TicTacToeBoard, agent: Mark, ordering: u8) -> f64 {
    if let Some(w) = board.winner() {
        return if w == agent { 1.0 } else { -1.0 };
    }
    if board.is_full() {
        return 0.0;
    }
    if board.to_move() != agent {
        let Ok(reply) = preferred_pattern_act(ordering, board) else { return 0.0 };
        return board
            .play(reply)
            .map_or(0.0, |b| value_against_pattern(&b, agent, ordering));
    }
    board
        .empty_cells()
        .into_iter()
        .filter_map(|i| board.play(i))
        .map(|b| value_against_pattern(&b, agent, ordering))
        .fold(-1.0, f64::max)
}

fn ttt_features(board: &TicTacToeBoard, agent: Mark, anchor: u64, action: &Action, mem: &MemorySummary) -> Result<Vec<f64>> {
    let Action::Place { row, col } = action else {
        return Err(Error::contract("non-placement action on a Tic-Tac-Toe board"));
    };
    let cell = cell_index(*row, *col).ok_or_else(|| Error::contract("cell out of range"))?;
    let mut f = vec![0.0; TTT_DIM];
    f[cell] = 1.0;
    f[9] = indicator(board.winning_cells(agent).contains(&cell));
    f[10] = indicator(board.winning_cells(agent.other()).contains(&cell));
    let after = board.play(cell);
    f[11] = indicator(after.is_some_and(|b| b.winner().is_none() && b.winning_cells(agent).len() >= 2));
    let (mean, seen) = mem.result(anchor, action);
    f[12] = mean;
    f[13] = seen;
    f[14] = MemorySummary::flag(&mem.suggested, anchor, action);
    f[15] = -MemorySummary::flag(&mem.warned, anchor, action);
    if mem.opponent_moves > 0 {
        f[16] = f64::from(mem.opponent_cells[cell]) / f64::from(mem.opponent_moves);
    }
    if let (Some(b), false) = (after, mem.consistent_orderings.is_empty()) {
        let total: f64 = mem
            .consistent_orderings
            .iter()
            .map(|&k| value_against_pattern(&b, agent, k))
            .sum();
        f[17] = total / mem.consistent_orderings.len() as f64;
    }
    Ok(f)
}

fn kuhn_features(info_index: usize, anchor: u64, action: &Action, mem: &MemorySummary) -> Result<Vec<f64>> {
    let Action::Kuhn(m) = action else {
        return Err(Error::contract("non-poker action in Kuhn Poker"));
    };
    let slot = info_index * 2 + m.index();
    let mut f = vec![0.0; KUHN_DIM];
    f[slot] = 1.0;
    f[24 + slot] = mem.kuhn_bet.centred();
    f[48 + slot] = mem.kuhn_call.centred();
    if mem.kuhn_strength.1 > 0 {
        f[72 + slot] = mem.kuhn_strength.0 / f64::from(mem.kuhn_strength.1);
    }
    let (mean, seen) = mem.result(anchor, action);
    f[96] = mean;
    f[97] = seen;
    Ok(f)
}

fn manhattan(size: usize, a: usize, b: usize) -> usize {
    (a / size).abs_diff(b / size) + (a % size).abs_diff(b % size)
}

fn player_to_loose_box(room: &SokobanRoom) -> usize {
    let p = room.player();
    room.boxes()
        .into_iter()
        .filter(|&b| !room.is_target(b))
        .map(|b| manhattan(room.size(), p, b))
        .min()
        .unwrap_or(0)
}

fn boxes_to_targets(room: &SokobanRoom) -> usize {
    let targets = room.targets();
    room.boxes()
        .into_iter()
        .map(|b| targets.iter().map(|&t| manhattan(room.size(), b, t)).min().unwrap_or(0))
        .sum()
}

fn sign_decrease(before: usize, after: usize) -> f64 {
    match after.cmp(&before) {
        std::cmp::Ordering::Less => 1.0,
        std::cmp::Ordering::Equal => 0.0,
        std::cmp::Ordering::Greater => -1.0,
    }
}

/// Unblocked single moves from `room` and their features.
pub fn sokoban_choice(room: &SokobanRoom, previous: Option<Direction>, mem: &MemorySummary) -> ChoicePoint {
    let anchor = anchor_key(&StateSnapshot::Sokoban(room.clone()));
    let mut cp = ChoicePoint {
        actions: Vec::new(),
        features: Vec::new(),
    };
    for d in Direction::ALL {
        let Some((next, pushed)) = room.try_move(d) else { continue };
        let action = Action::Moves(vec![d]);
        let mut f = vec![0.0; SOKOBAN_DIM];
        f[d.index()] = 1.0;
        f[4] = indicator(pushed);
        f[5] = indicator(next.boxes_on_target() > room.boxes_on_target());
        f[6] = indicator(next.boxes_on_target() < room.boxes_on_target());
        f[7] = indicator(next.has_deadlock() && !room.has_deadlock());
        f[8] = sign_decrease(player_to_loose_box(room), player_to_loose_box(&next));
        f[9] = sign_decrease(boxes_to_targets(room), boxes_to_targets(&next));
        f[10] = indicator(next.is_solved());
        f[11] = indicator(previous == Some(d.opposite()));
        let (mean, seen) = mem.result(anchor, &action);
        f[12] = mean;
        f[13] = seen;
        f[14] = -MemorySummary::flag(&mem.warned, anchor, &action);
        cp.actions.push(action);
        cp.features.push(f);
    }
    cp
}

/// The single choice point of a Tic-Tac-Toe or Kuhn decision.
pub fn board_choice(ctx: &PolicyContext<'_>, mem: &MemorySummary) -> Result<ChoicePoint> {
    let anchor = anchor_key(&ctx.current.structured);
    let features = match &ctx.current.structured {
        StateSnapshot::TicTacToe { board, agent } => ctx
            .admissible
            .iter()
            .map(|a| ttt_features(board, *agent, anchor, a, mem))
            .collect::<Result<Vec<_>>>()?,
        StateSnapshot::Kuhn(view) => {
            let idx = view.info_set().index();
            ctx.admissible
                .iter()
                .map(|a| kuhn_features(idx, anchor, a, mem))
                .collect::<Result<Vec<_>>>()?
        }
        StateSnapshot::Sokoban(_) => return Err(Error::contract("Sokoban decisions are sequences of choices")),
    };
    Ok(ChoicePoint {
        actions: ctx.admissible.to_vec(),
        features,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rollout::reflection::{DecisionRecord, ReflectionFeatures};
    use crate::env::GameResult;

    fn losing_reflection(anchor: u64, action: Action) -> Reflection {
        Reflection {
            episode_index: 1,
            text: String::new(),
            features: Some(ReflectionFeatures {
                episode_index: 1,
                outcome: GameResult::Loss,
                invalid_count: 0,
                kuhn_chips: Some(-2),
                decisions: vec![DecisionRecord { step: 1, anchor, action }],
                corrections: vec![],
                opponent: OpponentDigest::None,
            }),
        }
    }

    #[test]
    fn previously_losing_action_gets_negative_feature() {
        let anchor = 42;
        let mem = MemorySummary::from_memory(&[Reflection::empty(0), losing_reflection(anchor, Action::Kuhn(KuhnMove::Bet))]);
        let bet = kuhn_features(3, anchor, &Action::Kuhn(KuhnMove::Bet), &mem).unwrap();
        let pass = kuhn_features(3, anchor, &Action::Kuhn(KuhnMove::Pass), &mem).unwrap();
        assert_eq!(bet[96], -1.0);
        assert_eq!(bet[97], 1.0);
        assert_eq!(pass[96], 0.0);
        assert_eq!(pass[97], 0.0);
    }

    #[test]
    fn empty_memory_gives_zero_memory_block() {
        let mem = MemorySummary::from_memory(&[Reflection::empty(0)]);
        let f = kuhn_features(5, 9, &Action::Kuhn(KuhnMove::Pass), &mem).unwrap();
        assert!(f[memory_block_start(EnvKind::KuhnPoker)..].iter().all(|v| *v == 0.0));
        let b = TicTacToeBoard::new();
        let f = ttt_features(&b, Mark::X, 9, &Action::Place { row: 2, col: 2 }, &mem).unwrap();
        assert!(f[memory_block_start(EnvKind::TicTacToe)..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pattern_value_spots_the_exploit() {
        // Against the row-major pattern, X in the center then (1,2) wins.
        let b = TicTacToeBoard::new();
        assert_eq!(value_against_pattern(&b, Mark::X, 1), 1.0);
    }
}
