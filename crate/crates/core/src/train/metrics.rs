//! Per-opponent success metrics, Pass@k and the metrics / frequency CSVs.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::advantage::anchor_key;
use crate::env::GameResult;
use crate::error::{Error, Result};
use crate::rollout::MetaEpisode;

/// Label of the row aggregating every opponent.
pub const ALL_OPPONENTS: &str = "all";

/// Fraction of meta-episodes with at least one success among episodes `1..=k`.
pub fn pass_at_k(outcomes: &[Vec<bool>], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::contract("pass@k needs k >= 1"));
    }
    if let Some(row) = outcomes.iter().find(|r| r.len() < k) {
        return Err(Error::contract(format!("pass@{k} asked of a meta-episode with {} episodes", row.len())));
    }
    if outcomes.is_empty() {
        return Ok(0.0);
    }
    let hits = outcomes.iter().filter(|r| r[..k].iter().any(|&s| s)).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let denom = 1.0 + z * z / n_f;
    let centre = (p + z * z / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z * z / (4.0 * n_f * n_f)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub opponent_id: String,
    pub meta_episodes: usize,
    /// Success rate by episode index.
    pub success: Vec<f64>,
    /// Pass@k for k = 1..=N.
    pub pass_at: Vec<f64>,
    /// Wilson interval of the final-episode success rate.
    pub final_ci: (f64, f64),
    pub mean_return: f64,
    pub mean_invalid: f64,
    /// Result split of the final episode.
    pub win_rate: f64,
    pub draw_rate: f64,
    pub loss_rate: f64,
    pub timeout_rate: f64,
    pub train_loss: Option<f64>,
}

impl MetricsRow {
    pub fn final_success(&self) -> f64 {
        self.success.last().copied().unwrap_or(0.0)
    }

    /// Builds one row from meta-episodes that all have the same length.
    pub fn from_metas(epoch: usize, opponent_id: &str, metas: &[&MetaEpisode], train_loss: Option<f64>) -> Result<Self> {
        let n_eps = metas.first().map_or(0, |m| m.episodes.len());
        if metas.iter().any(|m| m.episodes.len() != n_eps) {
            return Err(Error::contract("metrics over meta-episodes of different lengths"));
        }
        let outcomes: Vec<Vec<bool>> = metas.iter().map(|m| m.successes()).collect();
        let count = metas.len().max(1) as f64;
        let success = (0..n_eps)
            .map(|i| outcomes.iter().filter(|o| o[i]).count() as f64 / count)
            .collect();
        let pass_at = (1..=n_eps).map(|k| pass_at_k(&outcomes, k)).collect::<Result<_>>()?;
        let final_wins = outcomes.iter().filter(|o| o.last() == Some(&true)).count();
        let episodes: Vec<_> = metas.iter().flat_map(|m| &m.episodes).collect();
        let ep_count = episodes.len().max(1) as f64;
        let finals: Vec<GameResult> = metas.iter().filter_map(|m| m.episodes.last().map(|e| e.outcome)).collect();
        let rate = |r: GameResult| finals.iter().filter(|&&f| f == r).count() as f64 / count;
        Ok(Self {
            epoch,
            opponent_id: opponent_id.to_string(),
            meta_episodes: metas.len(),
            success,
            pass_at,
            final_ci: wilson_interval(final_wins, metas.len()),
            mean_return: episodes.iter().map(|e| e.episode_reward).sum::<f64>() / ep_count,
            mean_invalid: episodes.iter().map(|e| f64::from(e.invalid_count)).sum::<f64>() / ep_count,
            win_rate: rate(GameResult::Win),
            draw_rate: rate(GameResult::Draw),
            loss_rate: rate(GameResult::Loss),
            timeout_rate: rate(GameResult::Timeout),
            train_loss,
        })
    }
}

/// One row per opponent (sorted by id), then the pooled row.
pub fn summarize(epoch: usize, metas: &[MetaEpisode], train_loss: Option<f64>) -> Result<Vec<MetricsRow>> {
    let mut by_opp: BTreeMap<&str, Vec<&MetaEpisode>> = BTreeMap::new();
    for m in metas {
        by_opp.entry(&m.opponent_id).or_default().push(m);
    }
    let mut rows = Vec::with_capacity(by_opp.len() + 1);
    for (id, ms) in &by_opp {
        rows.push(MetricsRow::from_metas(epoch, id, ms, train_loss)?);
    }
    let all: Vec<&MetaEpisode> = metas.iter().collect();
    rows.push(MetricsRow::from_metas(epoch, ALL_OPPONENTS, &all, train_loss)?);
    Ok(rows)
}

pub fn metrics_header(episodes: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["epoch".into(), "opponent_id".into(), "meta_episodes".into()];
    h.extend((1..=episodes).map(|i| format!("success_ep{i}")));
    h.extend((1..=episodes).map(|k| format!("pass_at_{k}")));
    for s in [
        "final_ci_low",
        "final_ci_high",
        "mean_return",
        "mean_invalid",
        "win_rate",
        "draw_rate",
        "loss_rate",
        "timeout_rate",
        "train_loss",
    ] {
        h.push(s.into());
    }
    h
}

fn row_record(r: &MetricsRow) -> Vec<String> {
    let mut v = vec![r.epoch.to_string(), r.opponent_id.clone(), r.meta_episodes.to_string()];
    v.extend(r.success.iter().map(|x| x.to_string()));
    v.extend(r.pass_at.iter().map(|x| x.to_string()));
    for x in [
        r.final_ci.0,
        r.final_ci.1,
        r.mean_return,
        r.mean_invalid,
        r.win_rate,
        r.draw_rate,
        r.loss_rate,
        r.timeout_rate,
    ] {
        v.push(x.to_string());
    }
    v.push(r.train_loss.map_or_else(String::new, |l| l.to_string()));
    v
}

/// Append-only metrics CSV; rows are flushed as they are written.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
    episodes: usize,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(w: W, episodes: usize) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(metrics_header(episodes))?;
        inner.flush()?;
        Ok(Self { inner, episodes })
    }

    pub fn write_rows(&mut self, rows: &[MetricsRow]) -> Result<()> {
        for r in rows {
            if r.success.len() != self.episodes {
                return Err(Error::contract("metrics row has the wrong number of episodes"));
            }
            self.inner.write_record(row_record(r))?;
        }
        self.inner.flush()?;
        Ok(())
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let episodes = rows.first().map_or(0, |r| r.success.len());
    let mut buf = Vec::new();
    MetricsWriter::new(&mut buf, episodes)?.write_rows(rows)?;
    String::from_utf8(buf).map_err(|e| Error::contract(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrequencyRow {
    pub episode_index: usize,
    pub anchor_key: String,
    pub action: String,
    pub frequency: u64,
}

/// Counts of (state, action) pairs per episode index over logged meta-episodes.
pub fn export_state_action_frequencies(metas: &[MetaEpisode]) -> Vec<FrequencyRow> {
    let mut counts: BTreeMap<(usize, u64, String), u64> = BTreeMap::new();
    for m in metas {
        for e in &m.episodes {
            for s in &e.steps {
                *counts
                    .entry((e.episode_index, anchor_key(&s.obs.structured), s.action.to_string()))
                    .or_default() += 1;
            }
        }
    }
    counts
        .into_iter()
        .map(|((episode_index, anchor, action), frequency)| FrequencyRow {
            episode_index,
            anchor_key: format!("{anchor:016x}"),
            action,
            frequency,
        })
        .collect()
}

pub fn write_frequencies<W: Write>(w: W, rows: &[FrequencyRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
