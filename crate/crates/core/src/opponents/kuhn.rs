//! Kuhn Poker strategies: rule-based archetypes and the uniform player.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::env::kuhn::{InfoSet, KuhnMove};
use crate::error::{Error, Result};
use crate::seeds::Rng;

/// A behavioural strategy: probabilities of `[PASS, BET]` at each info set.
pub trait KuhnStrategy: Send + Sync {
    fn action_probs(&self, set: &InfoSet) -> [f64; 2];
}

/// Samples from a strategy. Exactly one draw is consumed when the info set
/// is mixed, none when it is pure.
pub fn sample_move(strategy: &dyn KuhnStrategy, set: &InfoSet, rng: &mut Rng) -> KuhnMove {
    let p_bet = strategy.action_probs(set)[1];
    if p_bet <= 0.0 {
        KuhnMove::Pass
    } else if p_bet >= 1.0 || rng.gen::<f64>() < p_bet {
        KuhnMove::Bet
    } else {
        KuhnMove::Pass
    }
}

/// Bet and call probabilities indexed by card (J, Q, K).
///
/// "Bet" applies when no bet is outstanding (opening or after a check);
/// "call" applies when facing a bet.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KuhnArchetypeParams {
    pub bet: [f64; 3],
    pub call: [f64; 3],
}

impl KuhnArchetypeParams {
    pub const CONSERVATIVE: Self = Self {
        bet: [0.0, 0.0, 1.0],
        call: [0.0, 0.0, 1.0],
    };
    pub const AGGRESSIVE: Self = Self {
        bet: [1.0, 1.0, 1.0],
        call: [1.0, 1.0, 1.0],
    };
    pub const INTERMEDIATE: Self = Self {
        bet: [0.25, 0.5, 1.0],
        call: [0.0, 0.5, 1.0],
    };

    pub fn validate(&self) -> Result<()> {
        let ok = self.bet.iter().chain(&self.call).all(|p| (0.0..=1.0).contains(p));
        if ok {
            Ok(())
        } else {
            Err(Error::config("archetype probabilities must lie in [0, 1]"))
        }
    }

    pub fn tag(&self) -> String {
        let f = |v: &[f64; 3]| v.iter().map(|p| format!("{p}")).collect::<Vec<_>>().join("/");
        format!("b{}-c{}", f(&self.bet), f(&self.call))
    }
}

impl KuhnStrategy for KuhnArchetypeParams {
    fn action_probs(&self, set: &InfoSet) -> [f64; 2] {
        let c = set.card.index();
        let p = if set.facing_bet() { self.call[c] } else { self.bet[c] };
        [1.0 - p, p]
    }
}

pub struct UniformKuhn;

impl KuhnStrategy for UniformKuhn {
    fn action_probs(&self, _set: &InfoSet) -> [f64; 2] {
        [0.5, 0.5]
    }
}
