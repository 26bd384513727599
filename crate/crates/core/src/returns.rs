//! Episode rewards, per-episode meta-rewards and discounted step returns.

use serde::{Deserialize, Serialize};

use crate::env::{EnvKind, GameResult};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub task_win: f64,
    pub task_loss: f64,
    pub task_neutral: f64,
    pub invalid_penalty: f64,
    pub length_coeff: f64,
    pub max_response_length: usize,
    /// Score a timeout as a failure rather than a neutral outcome.
    pub timeout_is_failure: bool,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self::for_env(EnvKind::KuhnPoker)
    }
}

impl RewardConfig {
    pub fn for_env(kind: EnvKind) -> Self {
        let (length_coeff, max_response_length) = match kind {
            EnvKind::TicTacToe => (2.0, 3072),
            EnvKind::KuhnPoker => (2.0, 4096),
            EnvKind::Sokoban => (1.0, 4096),
        };
        Self {
            task_win: 10.0,
            task_loss: -10.0,
            task_neutral: 0.0,
            invalid_penalty: 0.5,
            length_coeff,
            max_response_length,
            timeout_is_failure: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.invalid_penalty >= 0.0) || !(self.length_coeff >= 0.0) || self.max_response_length == 0 {
            return Err(Error::config(
                "invalid_penalty and length_coeff must be >= 0 and max_response_length > 0",
            ));
        }
        Ok(())
    }

    pub fn task_reward(&self, outcome: GameResult) -> f64 {
        match outcome {
            GameResult::Win => self.task_win,
            GameResult::Loss => self.task_loss,
            GameResult::Timeout if self.timeout_is_failure => self.task_loss,
            GameResult::Draw | GameResult::Timeout | GameResult::Ongoing => self.task_neutral,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnVariant {
    /// Improvement over the previous episode, with cross-episode propagation.
    Differential,
    /// Raw episode reward, with cross-episode propagation.
    Cumulative,
    /// Raw episode reward, no cross-episode term.
    SingleEpisode,
}

/// How the cross-episode term reads the return at the start of a later episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartReturn {
    /// The return observed at the first decision point.
    FirstDecision,
    /// One extra step of within-episode discount before the first decision.
    BeforeFirstDecision,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReturnConfig {
    pub gamma_step: f64,
    pub gamma_traj: f64,
    pub variant: ReturnVariant,
    pub start_return: StartReturn,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        Self {
            gamma_step: 0.95,
            gamma_traj: 0.6,
            variant: ReturnVariant::Differential,
            start_return: StartReturn::FirstDecision,
        }
    }
}

impl ReturnConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |g: f64| g > 0.0 && g <= 1.0;
        if !ok(self.gamma_step) {
            return Err(Error::config(format!("gamma_step must be in (0, 1], got {}", self.gamma_step)));
        }
        // Zero is allowed here: it switches the cross-episode term off.
        if !(0.0..=1.0).contains(&self.gamma_traj) {
            return Err(Error::config(format!("gamma_traj must be in [0, 1], got {}", self.gamma_traj)));
        }
        Ok(())
    }
}

/// Zero below half the budget, a linear ramp up to the budget, then one.
pub fn length_penalty(len: f64, max_len: f64) -> f64 {
    let half = max_len / 2.0;
    if len < half {
        0.0
    } else if len < max_len {
        (len - half) / (max_len - half)
    } else {
        1.0
    }
}

pub fn compose_episode_reward(outcome: GameResult, invalid_count: u32, response_lengths: &[usize], cfg: &RewardConfig) -> f64 {
    let length: f64 = response_lengths
        .iter()
        .map(|&l| length_penalty(l as f64, cfg.max_response_length as f64))
        .sum();
    cfg.task_reward(outcome) - cfg.invalid_penalty * f64::from(invalid_count) - cfg.length_coeff * length
}

/// Difference to the previous episode's reward; the first episode is
/// compared against zero.
pub fn differential_meta_reward(episode_rewards: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    episode_rewards
        .iter()
        .map(|&r| {
            let d = r - prev;
            prev = r;
            d
        })
        .collect()
}

/// Sparse step rewards: everything on the last step.
pub fn stepwise_rewards(meta_reward: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::contract("an episode has at least one step"));
    }
    let mut out = vec![0.0; steps];
    out[steps - 1] = meta_reward;
    Ok(out)
}

/// Per-episode reward signal fed to the return recursion under `variant`.
pub fn episode_signals(episode_rewards: &[f64], variant: ReturnVariant) -> Vec<f64> {
    match variant {
        ReturnVariant::Differential => differential_meta_reward(episode_rewards),
        ReturnVariant::Cumulative | ReturnVariant::SingleEpisode => episode_rewards.to_vec(),
    }
}

/// Step returns for every episode, computed by a backward pass over episodes.
///
/// Within an episode of `T` steps the signal is discounted by `gamma_step`
/// from the last step; the cross-episode term adds `gamma_traj^(m-n)` times
/// the start-of-episode return of every later episode `m`.
pub fn stepwise_returns(signals: &[f64], steps: &[usize], cfg: &ReturnConfig) -> Result<Vec<Vec<f64>>> {
    if signals.len() != steps.len() {
        return Err(Error::contract("one signal per episode is required"));
    }
    if steps.contains(&0) {
        return Err(Error::contract("an episode has at least one step"));
    }
    let cross = cfg.variant != ReturnVariant::SingleEpisode;
    let n = signals.len();
    let mut out = vec![Vec::new(); n];
    // Discounted sum of later episodes' start returns, seen from episode i.
    let mut carry = 0.0;
    let mut next_start = 0.0;
    for i in (0..n).rev() {
        if cross && i + 1 < n {
            carry = cfg.gamma_traj * (next_start + carry);
        }
        let t_max = steps[i];
        out[i] = (1..=t_max)
            .map(|t| cfg.gamma_step.powi((t_max - t) as i32) * signals[i] + carry)
            .collect();
        next_start = match cfg.start_return {
            StartReturn::FirstDecision => out[i][0],
            StartReturn::BeforeFirstDecision => cfg.gamma_step.powi(t_max as i32) * signals[i] + carry,
        };
    }
    Ok(out)
}

/// Everything reward-related for one meta-episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaRewardVector {
    pub episode_rewards: Vec<f64>,
    pub meta_rewards: Vec<f64>,
    pub step_returns: Vec<Vec<f64>>,
}

impl MetaRewardVector {
    pub fn compute(episode_rewards: &[f64], steps: &[usize], cfg: &ReturnConfig) -> Result<Self> {
        let meta_rewards = episode_signals(episode_rewards, cfg.variant);
        let step_returns = stepwise_returns(&meta_rewards, steps, cfg)?;
        Ok(Self {
            episode_rewards: episode_rewards.to_vec(),
            meta_rewards,
            step_returns,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Direct double summation over later episodes, recursing only through the
    // start-of-episode values.
    fn brute_force(signals: &[f64], steps: &[usize], cfg: &ReturnConfig) -> Vec<Vec<f64>> {
        fn start(signals: &[f64], steps: &[usize], cfg: &ReturnConfig, m: usize) -> f64 {
            let own = match cfg.start_return {
                StartReturn::FirstDecision => cfg.gamma_step.powi(steps[m] as i32 - 1) * signals[m],
                StartReturn::BeforeFirstDecision => cfg.gamma_step.powi(steps[m] as i32) * signals[m],
            };
            own + cross(signals, steps, cfg, m)
        }
        fn cross(signals: &[f64], steps: &[usize], cfg: &ReturnConfig, n: usize) -> f64 {
            if cfg.variant == ReturnVariant::SingleEpisode {
                return 0.0;
            }
            let mut s = 0.0;
            for m in n + 1..signals.len() {
                s += cfg.gamma_traj.powi((m - n) as i32) * start(signals, steps, cfg, m);
            }
            s
        }
        (0..signals.len())
            .map(|n| {
                (1..=steps[n])
                    .map(|t| {
                        let mut g = signals[n];
                        for _ in t..steps[n] {
                            g *= cfg.gamma_step;
                        }
                        g + cross(signals, steps, cfg, n)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn length_penalty_breakpoints() {
        assert_eq!(length_penalty(50.0, 100.0), 0.0);
        assert_eq!(length_penalty(75.0, 100.0), 0.5);
        assert_eq!(length_penalty(100.0, 100.0), 1.0);
        assert_eq!(length_penalty(10_000.0, 100.0), 1.0);
    }

    #[test]
    fn episode_reward_composition() {
        let cfg = RewardConfig::for_env(EnvKind::TicTacToe);
        assert_eq!(compose_episode_reward(GameResult::Win, 0, &[], &cfg), 10.0);
        assert_eq!(compose_episode_reward(GameResult::Loss, 2, &[], &cfg), -11.0);
        assert_eq!(compose_episode_reward(GameResult::Draw, 0, &[cfg.max_response_length], &cfg), -2.0);
        assert_eq!(compose_episode_reward(GameResult::Timeout, 0, &[], &cfg), -10.0);
        let lenient = RewardConfig {
            timeout_is_failure: false,
            ..cfg
        };
        assert_eq!(compose_episode_reward(GameResult::Timeout, 0, &[], &lenient), 0.0);
    }

    #[test]
    fn differential_examples() {
        assert_eq!(differential_meta_reward(&[10.0]), vec![10.0]);
        assert_eq!(differential_meta_reward(&[-10.0, 10.0, 10.0]), vec![-10.0, 20.0, 0.0]);
    }

    #[test]
    fn sparse_step_rewards() {
        assert_eq!(stepwise_rewards(20.0, 3).unwrap(), vec![0.0, 0.0, 20.0]);
        assert_eq!(stepwise_rewards(0.0, 1).unwrap(), vec![0.0]);
        assert!(stepwise_rewards(1.0, 0).is_err());
    }

    #[test]
    fn single_episode_discount() {
        let g = stepwise_returns(&[10.0], &[2], &ReturnConfig::default()).unwrap();
        assert!((g[0][0] - 9.5).abs() < 1e-12);
        assert_eq!(g[0][1], 10.0);
    }

    #[test]
    fn two_episode_hand_computation() {
        let g = stepwise_returns(&[0.0, 10.0], &[3, 3], &ReturnConfig::default()).unwrap();
        assert!((g[1][0] - 9.025).abs() < 1e-12);
        for t in 0..3 {
            assert!((g[0][t] - 5.415).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_traj_discount_matches_single_episode() {
        let signals = [3.0, -2.0, 7.0];
        let steps = [2, 4, 1];
        let zero = ReturnConfig {
            gamma_traj: 0.0,
            ..ReturnConfig::default()
        };
        let single = ReturnConfig {
            variant: ReturnVariant::SingleEpisode,
            ..ReturnConfig::default()
        };
        assert_eq!(
            stepwise_returns(&signals, &steps, &zero).unwrap(),
            stepwise_returns(&signals, &steps, &single).unwrap()
        );
    }

    proptest! {
        #[test]
        fn recursion_matches_direct_sum(
            signals in prop::collection::vec(-20.0f64..20.0, 1..=5),
            seed_steps in prop::collection::vec(1usize..=10, 5),
            gs in 0.01f64..=1.0,
            gt in 0.0f64..=1.0,
            variant in prop_oneof![Just(ReturnVariant::Differential), Just(ReturnVariant::Cumulative), Just(ReturnVariant::SingleEpisode)],
            literal in any::<bool>(),
        ) {
            let steps = &seed_steps[..signals.len()];
            let cfg = ReturnConfig {
                gamma_step: gs,
                gamma_traj: gt,
                variant,
                start_return: if literal { StartReturn::BeforeFirstDecision } else { StartReturn::FirstDecision },
            };
            let a = stepwise_returns(&signals, steps, &cfg).unwrap();
            let b = brute_force(&signals, steps, &cfg);
            for (x, y) in a.iter().flatten().zip(b.iter().flatten()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()), "{} vs {}", x, y);
            }
        }

        #[test]
        fn differential_telescopes(rewards in prop::collection::vec(-1000i32..1000, 1..8)) {
            let r: Vec<f64> = rewards.iter().map(|&x| f64::from(x) / 2.0).collect();
            let d = differential_meta_reward(&r);
            prop_assert_eq!(d.iter().sum::<f64>(), *r.last().unwrap());
        }

        #[test]
        fn final_reward_raises_every_return(
            rewards in prop::collection::vec(-20.0f64..20.0, 2..=4),
            bump in 0.1f64..5.0,
        ) {
            let steps = vec![3; rewards.len()];
            for variant in [ReturnVariant::Differential, ReturnVariant::Cumulative] {
                let cfg = ReturnConfig { variant, ..ReturnConfig::default() };
                let mut raised = rewards.clone();
                *raised.last_mut().unwrap() += bump;
                let before = MetaRewardVector::compute(&rewards, &steps, &cfg).unwrap().step_returns;
                let after = MetaRewardVector::compute(&raised, &steps, &cfg).unwrap().step_returns;
                for (a, b) in after.iter().flatten().zip(before.iter().flatten()) {
                    prop_assert!(a > b);
                }
            }
        }

        #[test]
        fn length_penalty_is_monotone(a in 0.0f64..10_000.0, b in 0.0f64..10_000.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(length_penalty(lo, 4096.0) <= length_penalty(hi, 4096.0));
        }
    }
}
