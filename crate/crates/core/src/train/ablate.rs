//! Matched training runs that differ along one axis.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::advantage::{Grouping, Scope};
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::opponents::PopulationConfig;
use crate::policy::LinearSoftmaxPolicy;
use crate::returns::ReturnVariant;
use crate::rollout::ReflectionGenerator;
use crate::seeds;

use super::config::RunConfig;
use super::metrics::{metrics_header, MetricsRow, ALL_OPPONENTS};
use super::{evaluate, train};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    RewardVariant,
    OpponentDistribution,
    GroupingStationarity,
    AnchorScope,
}

impl AblationAxis {
    /// Config paths an arm may change on this axis.
    fn allowed(self) -> &'static [&'static str] {
        match self {
            AblationAxis::RewardVariant => &["returns.variant", "memory"],
            AblationAxis::OpponentDistribution => &["population"],
            AblationAxis::GroupingStationarity => &["grouping"],
            AblationAxis::AnchorScope => &["anchor_scope"],
        }
    }
}

impl FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "reward_variant" | "reward-variant" => AblationAxis::RewardVariant,
            "opponent_distribution" | "opponent-distribution" => AblationAxis::OpponentDistribution,
            "grouping_stationarity" | "grouping-stationarity" | "grouping" => AblationAxis::GroupingStationarity,
            "anchor_scope" | "anchor-scope" => AblationAxis::AnchorScope,
            other => return Err(Error::config(format!("unknown ablation axis {other:?}"))),
        })
    }
}

/// The configs compared on `axis`, each named. Every arm differs from `base`
/// only in the axis' keys.
pub fn ablation_arms(base: &RunConfig, axis: AblationAxis) -> Result<Vec<(String, RunConfig)>> {
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let arms: Vec<(String, RunConfig)> = match axis {
        AblationAxis::RewardVariant => {
            let arm = |variant, memory| {
                with(&|c: &mut RunConfig| {
                    c.returns.variant = variant;
                    c.memory = memory;
                })
            };
            vec![
                ("differential".into(), arm(ReturnVariant::Differential, true)),
                ("cumulative".into(), arm(ReturnVariant::Cumulative, true)),
                ("single_episode".into(), arm(ReturnVariant::SingleEpisode, true)),
                ("single_episode_no_memory".into(), arm(ReturnVariant::SingleEpisode, false)),
            ]
        }
        AblationAxis::OpponentDistribution => {
            let alternative = match base.env.kind() {
                EnvKind::KuhnPoker => PopulationConfig::kuhn_skewed(),
                EnvKind::TicTacToe => PopulationConfig::ttt_pattern_skewed(),
                EnvKind::Sokoban => return Err(Error::config("sokoban has no opponent distribution to ablate")),
            };
            let population = base.population();
            vec![
                ("base".into(), with(&|c: &mut RunConfig| c.population = population.clone())),
                ("alternative".into(), with(&|c: &mut RunConfig| c.population = Some(alternative.clone()))),
            ]
        }
        AblationAxis::GroupingStationarity => vec![
            ("stationary".into(), with(&|c: &mut RunConfig| c.grouping = Grouping::Stationary)),
            ("non_stationary".into(), with(&|c: &mut RunConfig| c.grouping = Grouping::NonStationary)),
        ],
        AblationAxis::AnchorScope => vec![
            ("global".into(), with(&|c: &mut RunConfig| c.anchor_scope = Scope::StepGlobalAnchor)),
            ("per_episode".into(), with(&|c: &mut RunConfig| c.anchor_scope = Scope::StepPerEpisodeAnchor)),
        ],
    };
    for (name, cfg) in &arms {
        for path in base.diff(cfg)? {
            if !axis.allowed().iter().any(|a| path == *a || path.starts_with(&format!("{a}."))) {
                return Err(Error::contract(format!("arm {name} changes {path}, outside the {axis:?} axis")));
            }
        }
        cfg.validate()?;
    }
    Ok(arms)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub arm: String,
    pub seed: u64,
    /// Evaluation rows of the trained policy, per opponent then pooled.
    pub rows: Vec<MetricsRow>,
}

impl AblationResult {
    pub fn pooled(&self) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.opponent_id == ALL_OPPONENTS)
    }
}

/// Trains every arm on every seed of `base.seeds`, then evaluates each
/// trained policy on the base population with a seed shared across arms.
/// With `out` set, runs go to `out/<arm>/seed_<s>/` and results to
/// `out/ablation.csv`.
pub fn ablate(base: &RunConfig, axis: AblationAxis, out: Option<&Path>) -> Result<Vec<AblationResult>> {
    base.validate()?;
    let arms = ablation_arms(base, axis)?;
    let eval_opponents = base.population().map(|p| p.specs()).unwrap_or_default();
    let mut results = Vec::new();
    for (name, arm) in &arms {
        for &seed in &base.seeds {
            let cfg = RunConfig { seed, ..arm.clone() };
            let dir = out.map(|d| d.join(name).join(format!("seed_{seed}")));
            log::info!("ablation arm {name}, seed {seed}");
            let trained = train(&cfg, dir.as_deref())?;
            let ev = evaluate(
                &LinearSoftmaxPolicy::new(trained.params),
                &ReflectionGenerator::Structured,
                &cfg.env,
                &eval_opponents,
                cfg.eval_meta_episodes,
                &cfg.rollout(),
                seeds::derive(seed, &[0xE1]),
            )?;
            results.push(AblationResult {
                arm: name.clone(),
                seed,
                rows: ev.rows,
            });
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("ablation.csv"), ablation_csv(&results, base.episodes)?)?;
    }
    Ok(results)
}

/// Mean final-episode success of each arm over seeds, pooled over opponents.
pub fn arm_means(results: &[AblationResult]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64, usize)> = Vec::new();
    for r in results {
        let v = r.pooled().map_or(0.0, MetricsRow::final_success);
        match out.iter_mut().find(|(a, _, _)| *a == r.arm) {
            Some(e) => {
                e.1 += v;
                e.2 += 1;
            }
            None => out.push((r.arm.clone(), v, 1)),
        }
    }
    out.into_iter().map(|(a, s, n)| (a, s / n as f64)).collect()
}

pub fn ablation_csv(results: &[AblationResult], episodes: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["arm".to_string(), "seed".to_string()];
    header.extend(metrics_header(episodes).into_iter().skip(1));
    w.write_record(&header)?;
    for r in results {
        for row in &r.rows {
            let mut rec = vec![r.arm.clone(), r.seed.to_string(), row.opponent_id.clone(), row.meta_episodes.to_string()];
            rec.extend(row.success.iter().map(f64::to_string));
            rec.extend(row.pass_at.iter().map(f64::to_string));
            for x in [
                row.final_ci.0,
                row.final_ci.1,
                row.mean_return,
                row.mean_invalid,
                row.win_rate,
                row.draw_rate,
                row.loss_rate,
                row.timeout_rate,
            ] {
                rec.push(x.to_string());
            }
            rec.push(String::new());
            w.write_record(&rec)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::contract(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::contract(e.to_string()))
}
