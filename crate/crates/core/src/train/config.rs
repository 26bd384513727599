//! Declarative run configuration (TOML) with `key=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::advantage::{Grouping, NormMode, Scope};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::opponents::PopulationConfig;
use crate::policy::RemoteConfig;
use crate::returns::{ReturnConfig, RewardConfig};
use crate::rollout::RolloutConfig;

/// Whether agent-specific grouping applies to each advantage component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSpecific {
    pub episode_level: bool,
    pub step_level: bool,
}

impl Default for AgentSpecific {
    fn default() -> Self {
        Self {
            episode_level: true,
            step_level: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyChoice {
    Parametric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        checkpoint: Option<PathBuf>,
    },
    Remote(RemoteConfig),
}

impl Default for PolicyChoice {
    fn default() -> Self {
        PolicyChoice::Parametric { checkpoint: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub epochs: usize,
    /// Episodes per meta-episode.
    pub episodes: usize,
    /// Meta-episodes sharing one (task, opponent) draw.
    pub group_size: usize,
    /// Draws per epoch.
    pub groups_per_epoch: usize,
    pub learning_rate: f64,
    pub step_weight: f64,
    pub grouping: Grouping,
    pub anchor_scope: Scope,
    pub norm: NormMode,
    pub agent_specific: AgentSpecific,
    pub memory: bool,
    pub reflect_after_success: bool,
    pub checkpoint_every: usize,
    pub eval_meta_episodes: usize,
    /// Seeds used by multi-seed commands such as `ablate`.
    pub seeds: Vec<u64>,
    pub save_trajectories: bool,
    pub max_trajectory_bytes: u64,
    pub env: EnvConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub population: Option<PopulationConfig>,
    /// Defaults to the environment's reward constants.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardConfig>,
    pub returns: ReturnConfig,
    pub policy: PolicyChoice,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 150,
            episodes: 3,
            group_size: 8,
            groups_per_epoch: 4,
            learning_rate: 0.1,
            step_weight: 1.0,
            grouping: Grouping::Stationary,
            anchor_scope: Scope::StepGlobalAnchor,
            norm: NormMode::MeanNorm,
            agent_specific: AgentSpecific::default(),
            memory: true,
            reflect_after_success: true,
            checkpoint_every: 10,
            eval_meta_episodes: 256,
            seeds: vec![0, 1, 2, 3, 4],
            save_trajectories: true,
            max_trajectory_bytes: 64 << 20,
            env: EnvConfig::default(),
            population: None,
            reward: None,
            returns: ReturnConfig::default(),
            policy: PolicyChoice::default(),
        }
    }
}

impl RunConfig {
    pub fn reward(&self) -> RewardConfig {
        self.reward.clone().unwrap_or_else(|| RewardConfig::for_env(self.env.kind()))
    }

    pub fn population(&self) -> Option<PopulationConfig> {
        self.population.clone().or_else(|| PopulationConfig::default_for(self.env.kind()))
    }

    pub fn rollout(&self) -> RolloutConfig {
        RolloutConfig {
            episodes: self.episodes,
            reflect_after_success: self.reflect_after_success,
            memory: self.memory,
            reward: self.reward(),
            returns: self.returns.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.rollout().validate()?;
        if self.group_size == 0 || self.groups_per_epoch == 0 {
            return Err(Error::config("group_size and groups_per_epoch must be positive"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::config("learning_rate must be finite and non-negative"));
        }
        if !self.step_weight.is_finite() {
            return Err(Error::config("step_weight must be finite"));
        }
        if self.anchor_scope == Scope::EpisodeLevel {
            return Err(Error::config("anchor_scope must be a step-level scope"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        if let Some(pop) = self.population() {
            pop.validate()?;
            if pop.env_kinds().iter().any(|k| *k != self.env.kind()) {
                return Err(Error::config("population contains opponents for another game"));
            }
        }
        if let PolicyChoice::Remote(r) = &self.policy {
            r.validate()?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    /// Parses TOML text, applies `key=value` overrides, and validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e| Error::config(format!("invalid config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e| Error::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    /// Dotted paths of every leaf that differs between the two configs.
    pub fn diff(&self, other: &RunConfig) -> Result<Vec<String>> {
        let a = toml::Value::try_from(self).map_err(|e| Error::config(e.to_string()))?;
        let b = toml::Value::try_from(other).map_err(|e| Error::config(e.to_string()))?;
        let mut out = Vec::new();
        diff_values("", &a, &b, &mut out);
        Ok(out)
    }
}

fn diff_values(path: &str, a: &toml::Value, b: &toml::Value, out: &mut Vec<String>) {
    match (a, b) {
        (toml::Value::Table(x), toml::Value::Table(y)) => {
            let mut keys: Vec<&String> = x.keys().chain(y.keys()).collect();
            keys.sort();
            keys.dedup();
            for k in keys {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match (x.get(k), y.get(k)) {
                    (Some(u), Some(v)) => diff_values(&p, u, v, out),
                    _ => out.push(p),
                }
            }
        }
        _ if a != b => out.push(path.to_string()),
        _ => {}
    }
}

/// Sets `a.b.c = value`, parsing the value as a TOML literal when possible
/// and as a bare string otherwise.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!("bad override key {key:?}")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override key {key:?} descends into a non-table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
