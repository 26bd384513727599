//! The opponent population and the game-theoretic oracles behind it.

pub mod cfr;
pub mod kuhn;
pub mod mcts;
pub mod minimax;
pub mod pattern;

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::env::{Action, EnvKind, GameState, OpponentPolicy};
use crate::error::{Error, Result};
use crate::seeds::Rng;

pub use cfr::{best_response, best_response_value, cfr_train, exploitability, CfrStrategyProfile, Utility};
pub use kuhn::{sample_move, KuhnArchetypeParams, KuhnStrategy, UniformKuhn};
pub use minimax::{minimax_value, MinimaxResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "archetype", rename_all = "snake_case")]
pub enum Archetype {
    MctsTtt { num_simulations: u32 },
    PreferredPattern { ordering_id: u8 },
    RandomTtt,
    KuhnConservative,
    KuhnAggressive,
    KuhnIntermediate,
    /// A number trains that many CFR iterations; anything else is a profile path.
    KuhnCfr { strategy_id: String },
    RandomKuhn,
}

impl Archetype {
    pub fn env_kind(&self) -> EnvKind {
        match self {
            Archetype::MctsTtt { .. } | Archetype::PreferredPattern { .. } | Archetype::RandomTtt => EnvKind::TicTacToe,
            _ => EnvKind::KuhnPoker,
        }
    }
}

/// An immutable opponent identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpponentSpec {
    #[serde(flatten)]
    pub archetype: Archetype,
    /// Replaces the built-in probabilities of a Kuhn archetype.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params_override: Option<KuhnArchetypeParams>,
    #[serde(default)]
    pub seed: u64,
}

/// Grouping key used for tasks without an opponent.
pub const NO_OPPONENT_ID: &str = "none";

impl OpponentSpec {
    pub fn new(archetype: Archetype) -> Self {
        Self {
            archetype,
            params_override: None,
            seed: 0,
        }
    }

    /// Stable key derived from the archetype and its parameters.
    pub fn id(&self) -> String {
        let base = match &self.archetype {
            Archetype::MctsTtt { num_simulations } => format!("mcts-{num_simulations}"),
            Archetype::PreferredPattern { ordering_id } => format!("pattern-{ordering_id}"),
            Archetype::RandomTtt => "random-ttt".to_string(),
            Archetype::KuhnConservative => "kuhn-conservative".to_string(),
            Archetype::KuhnAggressive => "kuhn-aggressive".to_string(),
            Archetype::KuhnIntermediate => "kuhn-intermediate".to_string(),
            Archetype::KuhnCfr { strategy_id } => format!("kuhn-cfr-{strategy_id}"),
            Archetype::RandomKuhn => "random-kuhn".to_string(),
        };
        match &self.params_override {
            Some(p) => format!("{base}[{}]", p.tag()),
            None => base,
        }
    }

    /// Inverse of [`OpponentSpec::id`] for ids without overrides.
    pub fn from_id(id: &str) -> Result<Self> {
        let archetype = match id {
            "random-ttt" => Archetype::RandomTtt,
            "kuhn-conservative" => Archetype::KuhnConservative,
            "kuhn-aggressive" => Archetype::KuhnAggressive,
            "kuhn-intermediate" => Archetype::KuhnIntermediate,
            "random-kuhn" => Archetype::RandomKuhn,
            _ => {
                if let Some(n) = id.strip_prefix("mcts-") {
                    Archetype::MctsTtt {
                        num_simulations: n.parse().map_err(|_| Error::config(format!("bad opponent id {id:?}")))?,
                    }
                } else if let Some(n) = id.strip_prefix("pattern-") {
                    Archetype::PreferredPattern {
                        ordering_id: n.parse().map_err(|_| Error::config(format!("bad opponent id {id:?}")))?,
                    }
                } else if let Some(s) = id.strip_prefix("kuhn-cfr-") {
                    Archetype::KuhnCfr {
                        strategy_id: s.to_string(),
                    }
                } else {
                    return Err(Error::config(format!("unknown opponent id {id:?}")));
                }
            }
        };
        let spec = Self::new(archetype);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = &self.params_override {
            if !matches!(
                self.archetype,
                Archetype::KuhnConservative | Archetype::KuhnAggressive | Archetype::KuhnIntermediate
            ) {
                return Err(Error::config("params_override only applies to Kuhn archetypes"));
            }
            p.validate()?;
        }
        match &self.archetype {
            Archetype::MctsTtt { num_simulations: 0 } => Err(Error::config("num_simulations must be at least 1")),
            Archetype::PreferredPattern { ordering_id } => pattern::ordering(*ordering_id).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// The mixed strategy of a Kuhn opponent.
    pub fn kuhn_strategy(&self) -> Result<Arc<dyn KuhnStrategy>> {
        if let Some(p) = self.params_override {
            return Ok(Arc::new(p));
        }
        Ok(match &self.archetype {
            Archetype::KuhnConservative => Arc::new(KuhnArchetypeParams::CONSERVATIVE),
            Archetype::KuhnAggressive => Arc::new(KuhnArchetypeParams::AGGRESSIVE),
            Archetype::KuhnIntermediate => Arc::new(KuhnArchetypeParams::INTERMEDIATE),
            Archetype::RandomKuhn => Arc::new(UniformKuhn),
            Archetype::KuhnCfr { strategy_id } => cfr_profile(strategy_id)?,
            other => return Err(Error::config(format!("{other:?} is not a Kuhn opponent"))),
        })
    }

    pub fn build(&self) -> Result<Opponent> {
        self.validate()?;
        Ok(match &self.archetype {
            Archetype::MctsTtt { num_simulations } => Opponent::Mcts(*num_simulations),
            Archetype::PreferredPattern { ordering_id } => Opponent::Pattern(*ordering_id),
            Archetype::RandomTtt => Opponent::RandomTtt,
            _ => Opponent::Kuhn(self.kuhn_strategy()?),
        })
    }
}

/// CFR profiles keyed by strategy id, trained or loaded once per process.
fn cfr_profile(strategy_id: &str) -> Result<Arc<dyn KuhnStrategy>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<CfrStrategyProfile>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(p) = cache.lock().expect("cfr cache poisoned").get(strategy_id) {
        return Ok(p.clone());
    }
    let profile = match strategy_id.parse::<u64>() {
        Ok(iterations) => cfr_train(iterations)?,
        Err(_) => CfrStrategyProfile::load(Path::new(strategy_id))?,
    };
    let profile = Arc::new(profile);
    cache
        .lock()
        .expect("cfr cache poisoned")
        .insert(strategy_id.to_string(), profile.clone());
    Ok(profile)
}

/// A ready-to-play opponent.
#[derive(Clone)]
pub enum Opponent {
    Mcts(u32),
    Pattern(u8),
    RandomTtt,
    Kuhn(Arc<dyn KuhnStrategy>),
}

impl OpponentPolicy for Opponent {
    fn respond(&self, state: &GameState, rng: &mut Rng) -> Result<Action> {
        match (self, state) {
            (Opponent::Mcts(sims), GameState::TicTacToe { board, .. }) => mcts::mcts_select(board, *sims, rng)
                .map(Action::place_index)
                .ok_or_else(|| Error::contract("mcts asked to move on a finished board")),
            (Opponent::Pattern(o), GameState::TicTacToe { board, .. }) => {
                pattern::preferred_pattern_act(*o, board).map(Action::place_index)
            }
            (Opponent::RandomTtt, GameState::TicTacToe { board, .. }) => board
                .empty_cells()
                .choose(rng)
                .map(|&i| Action::place_index(i))
                .ok_or_else(|| Error::contract("random opponent asked to move on a full board")),
            (Opponent::Kuhn(s), GameState::Kuhn { state, agent_seat }) => {
                let set = state.info_set(1 - agent_seat);
                Ok(Action::Kuhn(sample_move(s.as_ref(), &set, rng)))
            }
            _ => Err(Error::contract("opponent does not play this game")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationEntry {
    #[serde(flatten)]
    pub spec: OpponentSpec,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationConfig {
    pub entries: Vec<PopulationEntry>,
}

impl PopulationConfig {
    pub fn new(entries: Vec<(OpponentSpec, f64)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .map(|(spec, weight)| PopulationEntry { spec, weight })
                .collect(),
        }
    }

    pub fn single(spec: OpponentSpec) -> Self {
        Self::new(vec![(spec, 1.0)])
    }

    /// Conservative, aggressive and intermediate, equally weighted.
    pub fn kuhn_archetypes() -> Self {
        let w = 1.0 / 3.0;
        Self::new(vec![
            (OpponentSpec::new(Archetype::KuhnConservative), w),
            (OpponentSpec::new(Archetype::KuhnAggressive), w),
            (OpponentSpec::new(Archetype::KuhnIntermediate), w),
        ])
    }

    /// Half the mass on MCTS-100, half spread over the patterns and random play.
    pub fn ttt_balanced() -> Self {
        Self::new(vec![
            (OpponentSpec::new(Archetype::MctsTtt { num_simulations: 100 }), 0.5),
            (OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 0 }), 0.125),
            (OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 1 }), 0.125),
            (OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 2 }), 0.125),
            (OpponentSpec::new(Archetype::RandomTtt), 0.125),
        ])
    }

    /// Most of the mass on the deterministic patterns.
    pub fn ttt_pattern_skewed() -> Self {
        Self::new(vec![
            (OpponentSpec::new(Archetype::MctsTtt { num_simulations: 100 }), 0.1),
            (OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 0 }), 0.3),
            (OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 1 }), 0.25),
            (OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 2 }), 0.25),
            (OpponentSpec::new(Archetype::RandomTtt), 0.1),
        ])
    }

    /// Kuhn archetypes with most of the mass on the aggressive one.
    pub fn kuhn_skewed() -> Self {
        Self::new(vec![
            (OpponentSpec::new(Archetype::KuhnConservative), 0.2),
            (OpponentSpec::new(Archetype::KuhnAggressive), 0.6),
            (OpponentSpec::new(Archetype::KuhnIntermediate), 0.2),
        ])
    }

    /// The training population used when a config names none.
    pub fn default_for(kind: EnvKind) -> Option<Self> {
        match kind {
            EnvKind::TicTacToe => Some(Self::ttt_balanced()),
            EnvKind::KuhnPoker => Some(Self::kuhn_archetypes()),
            EnvKind::Sokoban => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::config("opponent population is empty"));
        }
        if self.entries.iter().any(|e| !(e.weight > 0.0) || !e.weight.is_finite()) {
            return Err(Error::config("population weights must be positive"));
        }
        let total: f64 = self.entries.iter().map(|e| e.weight).sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::config(format!("population weights sum to {total}, expected 1")));
        }
        let mut ids: Vec<String> = self.entries.iter().map(|e| e.spec.id()).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.entries.len() {
            return Err(Error::config("population lists the same opponent twice"));
        }
        for e in &self.entries {
            e.spec.validate()?;
        }
        Ok(())
    }

    pub fn env_kinds(&self) -> Vec<EnvKind> {
        let mut kinds: Vec<EnvKind> = self.entries.iter().map(|e| e.spec.archetype.env_kind()).collect();
        kinds.dedup();
        kinds
    }

    pub fn specs(&self) -> Vec<OpponentSpec> {
        self.entries.iter().map(|e| e.spec.clone()).collect()
    }
}

/// Draws one opponent by weight; the caller holds it fixed for a meta-episode.
pub fn sample_opponent(population: &PopulationConfig, rng: &mut Rng) -> Result<OpponentSpec> {
    population.validate()?;
    let dist = WeightedIndex::new(population.entries.iter().map(|e| e.weight))
        .map_err(|e| Error::config(format!("invalid population weights: {e}")))?;
    Ok(population.entries[dist.sample(rng)].spec.clone())
}
