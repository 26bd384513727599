//! Grouping and normalization of step returns into advantages.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::env::StateSnapshot;
use crate::error::{Error, Result};

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

/// Canonical text of the part of a state that identifies an anchor: board and
/// mover, the Kuhn information set, or the Sokoban grid. Memory is excluded.
pub fn anchor_label(state: &StateSnapshot) -> String {
    match state {
        StateSnapshot::TicTacToe { board, agent } => {
            let cells: String = board
                .cells()
                .iter()
                .map(|c| c.map_or('.', |m| m.symbol()))
                .collect();
            format!("ttt:{cells}:{}:{}", board.to_move(), agent)
        }
        StateSnapshot::Kuhn(view) => format!("kuhn:{}", view.info_set().key()),
        StateSnapshot::Sokoban(room) => format!("sokoban:{}", room.to_text().replace('\n', "/")),
    }
}

/// Stable 64-bit key of [`anchor_label`].
pub fn anchor_key(state: &StateSnapshot) -> u64 {
    fnv1a(anchor_label(state).as_bytes())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    MeanNorm,
    ZNorm,
}

pub const ZNORM_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    EpisodeLevel,
    StepGlobalAnchor,
    StepPerEpisodeAnchor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    Stationary,
    NonStationary,
}

/// Pooled opponent key used when grouping ignores opponents.
pub const POOLED: &str = "*";

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub opponent_id: String,
    pub anchor: Option<u64>,
    pub scope: Scope,
    pub episode_index: Option<usize>,
    /// Episode-level groups under stationary grouping stay within one
    /// (task, opponent) draw.
    pub draw: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageRecord {
    pub meta_episode_id: usize,
    /// Which (task, opponent) draw of the batch the meta-episode belongs to.
    pub draw: usize,
    /// 1-based episode index; 0 for a record covering a whole meta-episode.
    pub episode_index: usize,
    /// 1-based step index.
    pub step: usize,
    pub opponent_id: String,
    pub anchor: u64,
    pub raw_return: f64,
    pub advantage: Option<f64>,
}

/// The group a record falls into.
///
/// Episode-level records are keyed by episode index (0 for whole
/// meta-episodes) and, when stationary, by draw. Step-level records are keyed
/// by anchor, plus the episode index for per-episode anchors.
pub fn group_key(record: &AdvantageRecord, grouping: Grouping, scope: Scope) -> GroupKey {
    let stationary = grouping == Grouping::Stationary;
    let opponent_id = if stationary {
        record.opponent_id.clone()
    } else {
        POOLED.to_string()
    };
    let episode_level = scope == Scope::EpisodeLevel;
    GroupKey {
        opponent_id,
        anchor: (!episode_level).then_some(record.anchor),
        scope,
        episode_index: (scope != Scope::StepGlobalAnchor).then_some(record.episode_index),
        draw: (episode_level && stationary).then_some(record.draw),
    }
}

/// Partitions record indices by group key, in key order.
pub fn group_records(records: &[AdvantageRecord], grouping: Grouping, scope: Scope) -> BTreeMap<GroupKey, Vec<usize>> {
    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(group_key(r, grouping, scope)).or_default().push(i);
    }
    groups
}

/// Centres (and for `ZNorm` scales) a group. Singletons map to zero.
pub fn normalize(values: &[f64], mode: NormMode) -> Vec<f64> {
    if values.len() <= 1 {
        return vec![0.0; values.len()];
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    match mode {
        NormMode::MeanNorm => values.iter().map(|v| v - mean).collect(),
        NormMode::ZNorm => {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let scale = var.sqrt().max(ZNORM_EPS);
            values.iter().map(|v| (v - mean) / scale).collect()
        }
    }
}

/// Fills `advantage` on every record from its group.
pub fn normalize_records(records: &mut [AdvantageRecord], grouping: Grouping, scope: Scope, mode: NormMode) {
    for idx in group_records(records, grouping, scope).into_values() {
        let values: Vec<f64> = idx.iter().map(|&i| records[i].raw_return).collect();
        for (&i, a) in idx.iter().zip(normalize(&values, mode)) {
            records[i].advantage = Some(a);
        }
    }
}

/// Episode-level advantage plus weighted step-level advantage, elementwise.
pub fn combine_advantages(episode_adv: &[f64], step_adv: &[f64], step_weight: f64) -> Result<Vec<f64>> {
    if episode_adv.len() != step_adv.len() {
        return Err(Error::contract(format!(
            "advantage components disagree in length: {} vs {}",
            episode_adv.len(),
            step_adv.len()
        )));
    }
    Ok(episode_adv.iter().zip(step_adv).map(|(e, s)| e + step_weight * s).collect())
}

/// CSV dump used for ablation plots.
pub fn advantages_csv(records: &[AdvantageRecord], combined: &[f64]) -> String {
    let mut out = String::from("meta_episode_id,n,t,opponent_id,anchor_key,G,A\n");
    for (r, a) in records.iter().zip(combined) {
        let _ = writeln!(
            out,
            "{},{},{},{},{:016x},{},{}",
            r.meta_episode_id, r.episode_index, r.step, r.opponent_id, r.anchor, r.raw_return, a
        );
    }
    out
}
