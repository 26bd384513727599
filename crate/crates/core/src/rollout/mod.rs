//! Meta-episodes: N episodes against one fixed opponent, with a reflection
//! appended to the policy's memory after each episode but the last.

pub mod reflection;

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{Action, Env, EnvConfig, GameResult, NoOpponent, Observation, OpponentPolicy, TaskInstance};
use crate::error::{Error, Result};
use crate::opponents::{OpponentSpec, NO_OPPONENT_ID};
use crate::policy::remote::{extract_tag, RemoteClient};
use crate::policy::Policy;
use crate::prompts;
use crate::returns::{compose_episode_reward, MetaRewardVector, ReturnConfig, RewardConfig};
use crate::seeds;

pub use reflection::{digest, Correction, DecisionRecord, OpponentDigest, Reflection, ReflectionFeatures};

/// One agent decision point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub obs: Observation,
    pub action: Action,
    /// Zero except on the final step, which carries the episode reward.
    pub reward: f64,
    pub invalid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opponent_reply: Option<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrajectory {
    /// 1-based.
    pub episode_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening_opponent_action: Option<Action>,
    pub steps: Vec<StepRecord>,
    pub final_obs: Observation,
    pub outcome: GameResult,
    pub invalid_count: u32,
    pub response_lengths: Vec<usize>,
    pub episode_reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kuhn_chips: Option<i32>,
}

impl EpisodeTrajectory {
    pub fn succeeded(&self) -> bool {
        self.outcome == GameResult::Win
    }

    pub fn initial_obs(&self) -> &Observation {
        self.steps.first().map_or(&self.final_obs, |s| &s.obs)
    }

    /// Prompt lines for the agent's own actions (opponent moves are only
    /// visible through the observations).
    pub fn action_lines(&self) -> Vec<String> {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("Step {}: {}{}", i + 1, s.action, if s.invalid { " (invalid)" } else { "" }))
            .collect()
    }
}

/// Reflections `[m_0, ..., m_{n-1}]` available to episode `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextMemory {
    pub reflections: Vec<Reflection>,
}

impl Default for ContextMemory {
    fn default() -> Self {
        Self {
            reflections: vec![Reflection::empty(0)],
        }
    }
}

impl ContextMemory {
    pub fn len(&self) -> usize {
        self.reflections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reflections.is_empty()
    }

    /// Non-empty reflection texts, oldest first.
    pub fn texts(&self) -> Vec<String> {
        self.reflections.iter().filter(|r| !r.text.is_empty()).map(|r| r.text.clone()).collect()
    }
}

pub fn append_memory(memory: &ContextMemory, reflection: Reflection) -> Result<ContextMemory> {
    if reflection.episode_index != memory.len() {
        return Err(Error::contract(format!(
            "reflection for episode {} appended to memory of length {}",
            reflection.episode_index,
            memory.len()
        )));
    }
    let mut out = memory.clone();
    out.reflections.push(reflection);
    Ok(out)
}

/// Everything the policy may condition on at one decision point.
#[derive(Clone, Copy, Debug)]
pub struct PolicyContext<'a> {
    pub task: &'a TaskInstance,
    pub memory: &'a [Reflection],
    /// Earlier decision points of the current episode.
    pub past_steps: &'a [StepRecord],
    pub current: &'a Observation,
    pub admissible: &'a [Action],
    /// 1-based.
    pub episode_index: usize,
}

impl<'a> PolicyContext<'a> {
    pub fn initial_obs(&self) -> &'a Observation {
        self.past_steps.first().map_or(self.current, |s| &s.obs)
    }

    /// Observation history of the current episode up to now.
    pub fn history(&self) -> impl Iterator<Item = &'a Observation> {
        self.past_steps.iter().map(|s| &s.obs).chain(std::iter::once(self.current))
    }
}

pub fn build_context<'a>(
    task: &'a TaskInstance,
    memory: &'a [Reflection],
    past_steps: &'a [StepRecord],
    current: &'a Observation,
    admissible: &'a [Action],
    episode_index: usize,
) -> Result<PolicyContext<'a>> {
    if memory.len() != episode_index {
        return Err(Error::contract(format!(
            "episode {episode_index} given {} reflections",
            memory.len()
        )));
    }
    Ok(PolicyContext {
        task,
        memory,
        past_steps,
        current,
        admissible,
        episode_index,
    })
}

#[derive(Clone)]
pub enum ReflectionGenerator {
    Structured,
    /// Asks a text endpoint for the reflection; digest features stay local.
    Remote(Arc<RemoteClient>),
}

pub fn generate_reflection(traj: &EpisodeTrajectory, task: &TaskInstance, generator: &ReflectionGenerator) -> Reflection {
    let features = digest(traj, task);
    let structured_text = reflection::render(&features);
    let text = match generator {
        ReflectionGenerator::Structured => structured_text,
        ReflectionGenerator::Remote(client) => {
            let reply = prompts::render_reflect(task, traj.initial_obs(), &traj.action_lines(), traj.succeeded())
                .and_then(|prompt| client.complete(&prompt));
            match reply {
                Ok(body) => extract_tag(&body, "remark").unwrap_or(body).trim().to_string(),
                Err(e) => {
                    log::warn!("remote reflection failed, using the structured digest: {e}");
                    structured_text
                }
            }
        }
    };
    Reflection {
        episode_index: traj.episode_index,
        text,
        features: Some(features),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RolloutConfig {
    pub episodes: usize,
    /// Also reflect after a successful episode.
    pub reflect_after_success: bool,
    /// When off, every reflection is replaced by an empty one.
    pub memory: bool,
    pub reward: RewardConfig,
    pub returns: ReturnConfig,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        Self {
            episodes: 3,
            reflect_after_success: true,
            memory: true,
            reward: RewardConfig::default(),
            returns: ReturnConfig::default(),
        }
    }
}

impl RolloutConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes per meta-episode must be at least 1"));
        }
        self.reward.validate()?;
        self.returns.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetaEpisode {
    pub opponent_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opponent: Option<OpponentSpec>,
    pub task: TaskInstance,
    pub seed: u64,
    pub episodes: Vec<EpisodeTrajectory>,
    pub reflections: ContextMemory,
    pub rewards: MetaRewardVector,
}

impl MetaEpisode {
    pub fn successes(&self) -> Vec<bool> {
        self.episodes.iter().map(|e| e.succeeded()).collect()
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn write_jsonl<W: Write>(mut w: W, metas: &[MetaEpisode]) -> Result<()> {
    for m in metas {
        writeln!(w, "{}", m.to_json_line()?)?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<MetaEpisode>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

fn run_episode(
    policy: &dyn Policy,
    env_cfg: &EnvConfig,
    task: &TaskInstance,
    memory: &ContextMemory,
    opponent: &dyn OpponentPolicy,
    episode_index: usize,
    env_seed: u64,
    policy_seed: u64,
    reward_cfg: &RewardConfig,
) -> Result<EpisodeTrajectory> {
    let (mut env, mut obs, opening) = Env::reset(env_cfg, task, env_seed, opponent)?;
    let mut rng = seeds::rng(policy_seed, &[]);
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut response_lengths = Vec::new();
    while !env.is_terminal() {
        let admissible = obs.admissible.clone();
        let ctx = build_context(task, &memory.reflections, &steps, &obs, &admissible, episode_index)?;
        let decision = policy.decide(&ctx, &mut rng)?;
        if decision.invalid {
            env.record_invalid();
        }
        if let Some(len) = decision.response_length {
            response_lengths.push(len);
        }
        let outcome = env.step(&decision.action, opponent)?;
        steps.push(StepRecord {
            obs,
            action: decision.action,
            reward: 0.0,
            invalid: decision.invalid || outcome.invalid,
            log_prob: decision.log_prob,
            opponent_reply: outcome.opponent_action,
            raw_text: decision.raw_text,
        });
        obs = outcome.next_obs;
    }
    if steps.is_empty() {
        return Err(Error::contract("episode ended before the agent acted"));
    }
    let outcome = env.result();
    let episode_reward = compose_episode_reward(outcome, env.invalid_count(), &response_lengths, reward_cfg);
    if let Some(last) = steps.last_mut() {
        last.reward = episode_reward;
    }
    Ok(EpisodeTrajectory {
        episode_index,
        opening_opponent_action: opening,
        steps,
        final_obs: obs,
        outcome,
        invalid_count: env.invalid_count(),
        response_lengths,
        episode_reward,
        kuhn_chips: env.kuhn_chips(),
    })
}

/// Runs one meta-episode. The opponent's identity is never shown to the
/// policy; it only sees the task, its memory and the current episode.
pub fn run_meta_episode(
    policy: &dyn Policy,
    generator: &ReflectionGenerator,
    opponent: Option<&OpponentSpec>,
    env_cfg: &EnvConfig,
    task: &TaskInstance,
    cfg: &RolloutConfig,
    seed: u64,
) -> Result<MetaEpisode> {
    cfg.validate()?;
    let built = opponent.map(|o| o.build()).transpose()?;
    let opp: &dyn OpponentPolicy = match &built {
        Some(o) => o,
        None => &NoOpponent,
    };
    let opp_seed = opponent.map_or(0, |o| o.seed);
    let mut memory = ContextMemory::default();
    let mut episodes = Vec::with_capacity(cfg.episodes);
    for n in 1..=cfg.episodes {
        let traj = run_episode(
            policy,
            env_cfg,
            task,
            &memory,
            opp,
            n,
            seeds::derive(seed, &[n as u64, opp_seed]),
            seeds::derive(seed, &[n as u64, 0xA1]),
            &cfg.reward,
        )?;
        if n < cfg.episodes {
            let reflection = if cfg.memory && (cfg.reflect_after_success || !traj.succeeded()) {
                generate_reflection(&traj, task, generator)
            } else {
                Reflection::empty(n)
            };
            memory = append_memory(&memory, reflection)?;
        }
        episodes.push(traj);
    }
    let episode_rewards: Vec<f64> = episodes.iter().map(|e| e.episode_reward).collect();
    let steps: Vec<usize> = episodes.iter().map(|e| e.steps.len()).collect();
    let rewards = MetaRewardVector::compute(&episode_rewards, &steps, &cfg.returns)?;
    Ok(MetaEpisode {
        opponent_id: opponent.map_or_else(|| NO_OPPONENT_ID.to_string(), |o| o.id()),
        opponent: opponent.cloned(),
        task: task.clone(),
        seed,
        episodes,
        reflections: memory,
        rewards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::tictactoe::Mark;
    use crate::env::{EnvKind, KuhnConfig, SeatChoice, TicTacToeConfig};
    use crate::opponents::Archetype;
    use crate::policy::{ActionDecision, LinearSoftmaxPolicy};
    use crate::seeds::Rng;
    use proptest::prelude::*;
    use std::sync::Mutex;

    fn uniform(kind: EnvKind) -> LinearSoftmaxPolicy {
        LinearSoftmaxPolicy::zeros(kind)
    }

    #[test]
    fn three_episodes_give_three_reflections() {
        let cfg = EnvConfig::default_for(EnvKind::KuhnPoker);
        let task = cfg.instantiate(0).unwrap();
        let opp = OpponentSpec::new(Archetype::KuhnAggressive);
        let m = run_meta_episode(
            &uniform(EnvKind::KuhnPoker),
            &ReflectionGenerator::Structured,
            Some(&opp),
            &cfg,
            &task,
            &RolloutConfig::default(),
            7,
        )
        .unwrap();
        assert_eq!(m.episodes.len(), 3);
        assert_eq!(m.reflections.len(), 3);
        assert!(m.reflections.reflections[0].is_empty());
        assert!(m.reflections.reflections[1].features.is_some());
        assert_eq!(m.opponent_id, "kuhn-aggressive");
        for e in &m.episodes {
            let (last, rest) = e.steps.split_last().unwrap();
            assert!(rest.iter().all(|s| s.reward == 0.0));
            assert_eq!(last.reward, e.episode_reward);
        }
    }

    #[test]
    fn single_episode_keeps_only_the_empty_reflection() {
        let cfg = EnvConfig::default_for(EnvKind::Sokoban);
        let task = cfg.instantiate(0).unwrap();
        let rc = RolloutConfig {
            episodes: 1,
            ..RolloutConfig::default()
        };
        let m = run_meta_episode(&uniform(EnvKind::Sokoban), &ReflectionGenerator::Structured, None, &cfg, &task, &rc, 1)
            .unwrap();
        assert_eq!(m.episodes.len(), 1);
        assert_eq!(m.reflections.len(), 1);
        assert_eq!(m.opponent_id, NO_OPPONENT_ID);
    }

    #[test]
    fn replay_is_byte_identical() {
        let cfg = EnvConfig::default_for(EnvKind::TicTacToe);
        let task = cfg.instantiate(0).unwrap();
        let opp = OpponentSpec::new(Archetype::MctsTtt { num_simulations: 50 });
        let run = || {
            run_meta_episode(
                &uniform(EnvKind::TicTacToe),
                &ReflectionGenerator::Structured,
                Some(&opp),
                &cfg,
                &task,
                &RolloutConfig::default(),
                99,
            )
            .unwrap()
            .to_json_line()
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn append_checks_index() {
        let m = ContextMemory::default();
        let m1 = append_memory(&m, Reflection::empty(1)).unwrap();
        assert_eq!(m1.len(), 2);
        assert_eq!(m.len(), 1);
        assert!(append_memory(&m1, Reflection::empty(5)).is_err());
    }

    // Records every context it is shown and checks the information-flow rule.
    struct Spy {
        seen: Mutex<Vec<(usize, usize, usize)>>,
    }

    impl Policy for Spy {
        fn decide(&self, ctx: &PolicyContext<'_>, _rng: &mut Rng) -> Result<ActionDecision> {
            assert_eq!(ctx.memory.len(), ctx.episode_index);
            assert_eq!(ctx.history().count(), ctx.past_steps.len() + 1);
            for (t, s) in ctx.past_steps.iter().enumerate() {
                assert_eq!(s.obs.turn_index as usize, t + 1);
            }
            assert_eq!(ctx.current.turn_index as usize, ctx.past_steps.len() + 1);
            self.seen
                .lock()
                .unwrap()
                .push((ctx.episode_index, ctx.past_steps.len(), ctx.memory.len()));
            Ok(ActionDecision::plain(ctx.admissible[0].clone()))
        }
    }

    #[test]
    fn contexts_only_see_memory_and_the_current_prefix() {
        let cfg = EnvConfig::TicTacToe(TicTacToeConfig::default());
        let task = cfg.instantiate(0).unwrap();
        let spy = Spy { seen: Mutex::new(Vec::new()) };
        let opp = OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 1 });
        run_meta_episode(&spy, &ReflectionGenerator::Structured, Some(&opp), &cfg, &task, &RolloutConfig::default(), 3)
            .unwrap();
        let seen = spy.seen.lock().unwrap();
        assert_eq!(seen[0], (1, 0, 1));
        assert!(seen.iter().any(|s| s.0 == 3 && s.2 == 3));
    }

    #[test]
    fn missed_block_is_reported() {
        // X: (1,1), O: center, X: (3,3), O: (1,3) threatens the anti-diagonal,
        // X ignores it with (3,2) and O completes the line at (3,1).
        struct Scripted;
        impl Policy for Scripted {
            fn decide(&self, ctx: &PolicyContext<'_>, _rng: &mut Rng) -> Result<ActionDecision> {
                let (row, col) = [(1, 1), (3, 3), (3, 2)][ctx.past_steps.len()];
                Ok(ActionDecision::plain(Action::Place { row, col }))
            }
        }
        let cfg = EnvConfig::TicTacToe(TicTacToeConfig {
            agent_mark: Mark::X,
            ..TicTacToeConfig::default()
        });
        let task = cfg.instantiate(0).unwrap();
        let opp = OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 0 });
        let m = run_meta_episode(&Scripted, &ReflectionGenerator::Structured, Some(&opp), &cfg, &task, &RolloutConfig::default(), 0)
            .unwrap();
        let f = m.reflections.reflections[1].features.as_ref().unwrap();
        assert_eq!(f.outcome, GameResult::Loss);
        assert!(f.corrections.iter().any(|c| matches!(
            c,
            Correction::MissedBlock { step: 3, cell: Action::Place { row: 3, col: 1 }, .. }
        )));
        let OpponentDigest::TicTacToe { first_divergence, .. } = &f.opponent else { panic!() };
        assert_eq!(first_divergence[0], None);
        assert!(reflection::render(f).contains("failed to block at (3,1)"));
    }

    #[test]
    fn won_episode_has_no_corrections() {
        // Row-major O answers the center with (1,1), then takes (1,3) instead
        // of blocking the middle column.
        struct Scripted;
        impl Policy for Scripted {
            fn decide(&self, ctx: &PolicyContext<'_>, _rng: &mut Rng) -> Result<ActionDecision> {
                let (row, col) = [(2, 2), (1, 2), (3, 2)][ctx.past_steps.len()];
                Ok(ActionDecision::plain(Action::Place { row, col }))
            }
        }
        let cfg = EnvConfig::TicTacToe(TicTacToeConfig::default());
        let task = cfg.instantiate(0).unwrap();
        let opp = OpponentSpec::new(Archetype::PreferredPattern { ordering_id: 1 });
        let m = run_meta_episode(&Scripted, &ReflectionGenerator::Structured, Some(&opp), &cfg, &task, &RolloutConfig::default(), 0)
            .unwrap();
        let f = digest(&m.episodes[0], &task);
        assert_eq!(f.outcome, GameResult::Win);
        assert!(f.corrections.is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn digest_is_a_pure_function(seed in any::<u64>(), seat in 0u8..2) {
            let cfg = EnvConfig::KuhnPoker(KuhnConfig {
                agent_seat: if seat == 0 { SeatChoice::P0 } else { SeatChoice::P1 },
                ..KuhnConfig::default()
            });
            let task = cfg.instantiate(0).unwrap();
            let opp = OpponentSpec::new(Archetype::KuhnIntermediate);
            let m = run_meta_episode(
                &uniform(EnvKind::KuhnPoker),
                &ReflectionGenerator::Structured,
                Some(&opp),
                &cfg,
                &task,
                &RolloutConfig::default(),
                seed,
            ).unwrap();
            for e in &m.episodes {
                prop_assert_eq!(digest(e, &task), digest(e, &task));
            }
            for (r, e) in m.reflections.reflections[1..].iter().zip(&m.episodes) {
                prop_assert_eq!(r.features.clone().unwrap(), digest(e, &task));
            }
        }
    }
}
