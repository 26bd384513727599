//! The outer loop: population sampling, parallel rollout, advantages, policy
//! updates, evaluation and metrics.

pub mod ablate;
pub mod ceiling;
pub mod config;
pub mod metrics;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::advantage::{anchor_key, combine_advantages, normalize_records, AdvantageRecord, Grouping, NormMode, Scope};
use crate::env::{EnvConfig, TaskInstance};
use crate::error::{Error, Result};
use crate::opponents::{sample_opponent, OpponentSpec};
use crate::policy::{apply_update, LinearSoftmaxPolicy, Policy, PolicyParams, RemoteClient, RemotePolicy};
use crate::returns::{episode_signals, ReturnVariant};
use crate::rollout::{build_context, run_meta_episode, write_jsonl, MetaEpisode, ReflectionGenerator, RolloutConfig};
use crate::seeds;

pub use ablate::{ablate, ablation_arms, AblationAxis, AblationResult};
pub use ceiling::{theoretical_ceiling, Ceiling};
pub use config::{AgentSpecific, PolicyChoice, RunConfig};
pub use metrics::{export_state_action_frequencies, pass_at_k, summarize, MetricsRow, MetricsWriter};

/// Stream tags mixed into seeds so draws, tasks and slots never share a stream.
const OPPONENT_STREAM: u64 = 0xD2;
const TASK_STREAM: u64 = 0x7A;

/// Settings that turn a batch of returns into advantages.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvantageConfig {
    pub grouping: Grouping,
    pub anchor_scope: Scope,
    pub norm: NormMode,
    pub step_weight: f64,
    pub agent_specific: AgentSpecific,
    pub variant: ReturnVariant,
}

impl AdvantageConfig {
    pub fn from_run(cfg: &RunConfig) -> Self {
        Self {
            grouping: cfg.grouping,
            anchor_scope: cfg.anchor_scope,
            norm: cfg.norm,
            step_weight: cfg.step_weight,
            agent_specific: cfg.agent_specific,
            variant: cfg.returns.variant,
        }
    }

    fn effective(&self, agent_specific: bool) -> Grouping {
        if agent_specific {
            self.grouping
        } else {
            Grouping::NonStationary
        }
    }
}

/// Advantages of one batch, one entry per decision point in (meta, episode,
/// step) order.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchAdvantages {
    pub step_records: Vec<AdvantageRecord>,
    pub episode_records: Vec<AdvantageRecord>,
    /// For each step record, the index of its episode-level record.
    pub episode_of_step: Vec<usize>,
    pub combined: Vec<f64>,
}

impl BatchAdvantages {
    /// Combined advantages of meta-episode `m`, flattened over its steps.
    pub fn for_meta(&self, m: usize) -> Vec<f64> {
        self.step_records
            .iter()
            .zip(&self.combined)
            .filter(|(r, _)| r.meta_episode_id == m)
            .map(|(_, a)| *a)
            .collect()
    }
}

/// Episode-level objective values and step returns of a batch, normalized
/// and combined. `draws[m]` names the (task, opponent) draw of meta-episode `m`.
pub fn compute_advantages(metas: &[MetaEpisode], draws: &[usize], cfg: &AdvantageConfig) -> Result<BatchAdvantages> {
    if metas.len() != draws.len() {
        return Err(Error::contract("one draw index per meta-episode is required"));
    }
    let per_episode = cfg.variant == ReturnVariant::SingleEpisode;
    let mut step_records = Vec::new();
    let mut episode_records = Vec::new();
    let mut episode_of_step = Vec::new();
    for (m, (meta, &draw)) in metas.iter().zip(draws).enumerate() {
        if meta.rewards.step_returns.len() != meta.episodes.len() {
            return Err(Error::contract("returns do not cover every episode"));
        }
        let base = |episode_index: usize, step: usize, anchor: u64, raw_return: f64| AdvantageRecord {
            meta_episode_id: m,
            draw,
            episode_index,
            step,
            opponent_id: meta.opponent_id.clone(),
            anchor,
            raw_return,
            advantage: None,
        };
        let signals = episode_signals(&meta.rewards.episode_rewards, cfg.variant);
        if !per_episode {
            episode_records.push(base(0, 0, 0, signals.iter().sum()));
        }
        for (e, returns) in meta.episodes.iter().zip(&meta.rewards.step_returns) {
            if returns.len() != e.steps.len() {
                return Err(Error::contract("returns do not cover every step"));
            }
            if per_episode {
                episode_records.push(base(e.episode_index, 0, 0, signals[e.episode_index - 1]));
            }
            for (t, (s, g)) in e.steps.iter().zip(returns).enumerate() {
                step_records.push(base(e.episode_index, t + 1, anchor_key(&s.obs.structured), *g));
                episode_of_step.push(episode_records.len() - 1);
            }
        }
    }
    normalize_records(
        &mut episode_records,
        cfg.effective(cfg.agent_specific.episode_level),
        Scope::EpisodeLevel,
        cfg.norm,
    );
    normalize_records(
        &mut step_records,
        cfg.effective(cfg.agent_specific.step_level),
        cfg.anchor_scope,
        cfg.norm,
    );
    let episode_adv: Vec<f64> = episode_of_step
        .iter()
        .map(|&i| episode_records[i].advantage.unwrap_or(0.0))
        .collect();
    let step_adv: Vec<f64> = step_records.iter().map(|r| r.advantage.unwrap_or(0.0)).collect();
    let combined = combine_advantages(&episode_adv, &step_adv, cfg.step_weight)?;
    Ok(BatchAdvantages {
        step_records,
        episode_records,
        episode_of_step,
        combined,
    })
}

/// Loss of a batch and its gradient in theta.
#[derive(Clone, Debug, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

impl LossOutput {
    /// Direction that increases the advantage-weighted log-likelihood.
    pub fn ascent(&self) -> Vec<f64> {
        self.gradient.iter().map(|g| -g).collect()
    }
}

/// Log-probability and gradient of every decision point of one meta-episode.
pub fn meta_logprob_grads(policy: &LinearSoftmaxPolicy, meta: &MetaEpisode) -> Result<Vec<(f64, Vec<f64>)>> {
    let mut out = Vec::new();
    for e in &meta.episodes {
        let n = e.episode_index;
        let memory = meta
            .reflections
            .reflections
            .get(..n)
            .ok_or_else(|| Error::contract(format!("episode {n} has no memory in the log")))?;
        for (t, s) in e.steps.iter().enumerate() {
            let ctx = build_context(&meta.task, memory, &e.steps[..t], &s.obs, &s.obs.admissible, n)?;
            out.push(policy.logprob_grad(&ctx, &s.action)?);
        }
    }
    Ok(out)
}

/// `L = -(1/M) sum_m sum_{n,t} A * log pi(a | context)` over the M
/// meta-episodes of the batch, with its exact gradient.
pub fn compute_loss(policy: &LinearSoftmaxPolicy, metas: &[MetaEpisode], adv: &BatchAdvantages) -> Result<LossOutput> {
    let dim = policy.params.theta.len();
    let per_meta: Vec<Result<(f64, Vec<f64>)>> = metas
        .par_iter()
        .enumerate()
        .map(|(m, meta)| {
            let a = adv.for_meta(m);
            let lg = meta_logprob_grads(policy, meta)?;
            if a.len() != lg.len() {
                return Err(Error::contract(format!(
                    "meta-episode {m}: {} advantages for {} decision points",
                    a.len(),
                    lg.len()
                )));
            }
            let mut loss = 0.0;
            let mut grad = vec![0.0; dim];
            for (adv, (lp, g)) in a.iter().zip(lg) {
                if *adv == 0.0 {
                    continue;
                }
                loss -= adv * lp;
                for (acc, gi) in grad.iter_mut().zip(g) {
                    *acc -= adv * gi;
                }
            }
            Ok((loss, grad))
        })
        .collect();
    if adv.combined.len() != adv.step_records.len() {
        return Err(Error::contract("advantages are not aligned to the batch"));
    }
    let scale = 1.0 / metas.len().max(1) as f64;
    let mut loss = 0.0;
    let mut gradient = vec![0.0; dim];
    // Summed in batch order so results do not depend on thread scheduling.
    for r in per_meta {
        let (l, g) = r?;
        loss += l * scale;
        for (acc, gi) in gradient.iter_mut().zip(g) {
            *acc += gi * scale;
        }
    }
    Ok(LossOutput { loss, gradient })
}

/// One batch of the training loop.
#[derive(Clone, Debug)]
pub struct Batch {
    pub metas: Vec<MetaEpisode>,
    pub draws: Vec<usize>,
}

struct Job {
    draw: usize,
    opponent: Option<OpponentSpec>,
    task: Arc<TaskInstance>,
    seed: u64,
}

/// Samples `groups_per_epoch` (task, opponent) draws and rolls out
/// `group_size` meta-episodes for each.
pub fn rollout_batch(
    policy: &dyn Policy,
    generator: &ReflectionGenerator,
    cfg: &RunConfig,
    epoch: usize,
) -> Result<Batch> {
    let population = cfg.population();
    let rollout = cfg.rollout();
    let e = epoch as u64;
    let mut jobs = Vec::with_capacity(cfg.groups_per_epoch * cfg.group_size);
    for g in 0..cfg.groups_per_epoch {
        let gu = g as u64;
        let opponent = population
            .as_ref()
            .map(|p| sample_opponent(p, &mut seeds::rng(cfg.seed, &[e, gu, OPPONENT_STREAM])))
            .transpose()?;
        let task = Arc::new(cfg.env.instantiate(seeds::derive(cfg.seed, &[e, gu, TASK_STREAM]))?);
        for s in 0..cfg.group_size {
            jobs.push(Job {
                draw: g,
                opponent: opponent.clone(),
                task: Arc::clone(&task),
                seed: seeds::derive(cfg.seed, &[e, gu, s as u64]),
            });
        }
    }
    let metas = jobs
        .par_iter()
        .map(|j| run_meta_episode(policy, generator, j.opponent.as_ref(), &cfg.env, &j.task, &rollout, j.seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(Batch {
        metas,
        draws: jobs.iter().map(|j| j.draw).collect(),
    })
}

fn check_finite(loss: &LossOutput, batch: &Batch, epoch: usize, out: Option<&Path>) -> Result<()> {
    if loss.loss.is_finite() && loss.gradient.iter().all(|g| g.is_finite()) {
        return Ok(());
    }
    let mut msg = format!("non-finite loss or gradient at epoch {epoch} (loss {})", loss.loss);
    if let Some(dir) = out {
        let path = dir.join(format!("nonfinite_batch_epoch_{epoch:04}.jsonl"));
        match File::create(&path).map_err(Error::from).and_then(|f| write_jsonl(BufWriter::new(f), &batch.metas)) {
            Ok(()) => msg.push_str(&format!("; batch dumped to {}", path.display())),
            Err(e) => msg.push_str(&format!("; batch dump failed: {e}")),
        }
    }
    Err(Error::Numerical(msg))
}

/// Trajectory log that stops growing once it reaches its byte budget.
struct TrajectoryLog {
    writer: BufWriter<File>,
    written: u64,
    budget: u64,
    full: bool,
}

impl TrajectoryLog {
    fn append(&mut self, metas: &[MetaEpisode]) -> Result<()> {
        for m in metas {
            if self.full {
                break;
            }
            let line = m.to_json_line()?;
            let len = line.len() as u64 + 1;
            if self.written + len > self.budget {
                log::warn!("trajectory log reached {} bytes, no further meta-episodes are saved", self.written);
                self.full = true;
                break;
            }
            writeln!(self.writer, "{line}")?;
            self.written += len;
        }
        self.writer.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    /// Per-epoch rows computed on the training rollouts.
    pub rows: Vec<MetricsRow>,
    pub checkpoints: Vec<PathBuf>,
}

pub fn checkpoint_name(epoch: usize) -> String {
    format!("epoch_{epoch:04}.ckpt")
}

pub fn initial_params(cfg: &RunConfig) -> Result<PolicyParams> {
    match &cfg.policy {
        PolicyChoice::Parametric { checkpoint: Some(path) } => {
            let p = PolicyParams::load(path)?;
            if p.env_kind != cfg.env.kind() {
                return Err(Error::config(format!(
                    "checkpoint {} is for {}, config trains {}",
                    path.display(),
                    p.env_kind,
                    cfg.env.kind()
                )));
            }
            Ok(p)
        }
        PolicyChoice::Parametric { checkpoint: None } => Ok(PolicyParams::zeros(cfg.env.kind())),
        PolicyChoice::Remote(_) => Err(Error::config("remote policies are evaluation-only and cannot be trained")),
    }
}

/// The policy and reflection generator a config describes.
pub fn build_policy(cfg: &RunConfig) -> Result<(Box<dyn Policy>, ReflectionGenerator)> {
    match &cfg.policy {
        PolicyChoice::Remote(r) => {
            let client = Arc::new(RemoteClient::new(r.clone())?);
            Ok((
                Box::new(RemotePolicy {
                    client: Arc::clone(&client),
                }),
                ReflectionGenerator::Remote(client),
            ))
        }
        PolicyChoice::Parametric { .. } => Ok((
            Box::new(LinearSoftmaxPolicy::new(initial_params(cfg)?)),
            ReflectionGenerator::Structured,
        )),
    }
}

/// Trains the parametric policy. With `out` set, writes `config.toml`,
/// `metrics.csv`, `checkpoints/` and (if enabled) `trajectories.jsonl` there.
pub fn train(cfg: &RunConfig, out: Option<&Path>) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = initial_params(cfg)?;
    let adv_cfg = AdvantageConfig::from_run(cfg);
    let generator = ReflectionGenerator::Structured;

    let mut writer = None;
    let mut traj_log = None;
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("checkpoints"))?;
        fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
        writer = Some(MetricsWriter::new(File::create(dir.join("metrics.csv"))?, cfg.episodes)?);
        if cfg.save_trajectories {
            traj_log = Some(TrajectoryLog {
                writer: BufWriter::new(File::create(dir.join("trajectories.jsonl"))?),
                written: 0,
                budget: cfg.max_trajectory_bytes,
                full: false,
            });
        }
    }

    let mut rows = Vec::new();
    let mut checkpoints = Vec::new();
    for epoch in 1..=cfg.epochs {
        let policy = LinearSoftmaxPolicy::new(params.clone());
        let batch = rollout_batch(&policy, &generator, cfg, epoch)?;
        let adv = compute_advantages(&batch.metas, &batch.draws, &adv_cfg)?;
        let loss = compute_loss(&policy, &batch.metas, &adv)?;
        check_finite(&loss, &batch, epoch, out)?;
        params = apply_update(&params, &loss.ascent(), cfg.learning_rate)?;

        let epoch_rows = summarize(epoch, &batch.metas, Some(loss.loss))?;
        if let Some(all) = epoch_rows.last() {
            log::info!(
                "epoch {epoch}: loss {:.4} success by episode {:?}",
                loss.loss,
                all.success
            );
        }
        if let Some(w) = writer.as_mut() {
            w.write_rows(&epoch_rows)?;
        }
        if let Some(t) = traj_log.as_mut() {
            t.append(&batch.metas)?;
        }
        if let Some(dir) = out {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                let path = dir.join("checkpoints").join(checkpoint_name(epoch));
                params.save(&path)?;
                checkpoints.push(path);
            }
        }
        rows.extend(epoch_rows);
    }
    if let Some(dir) = out {
        let path = dir.join("checkpoints").join("final.ckpt");
        params.save(&path)?;
        checkpoints.push(path);
    }
    Ok(TrainOutcome {
        params,
        rows,
        checkpoints,
    })
}

/// Result of a pure evaluation rollout.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub rows: Vec<MetricsRow>,
    pub metas: Vec<MetaEpisode>,
}

/// Rolls out `num_meta_episodes` per opponent without updating anything.
/// An empty opponent list evaluates the single-agent task.
pub fn evaluate(
    policy: &dyn Policy,
    generator: &ReflectionGenerator,
    env: &EnvConfig,
    opponents: &[OpponentSpec],
    num_meta_episodes: usize,
    rollout: &RolloutConfig,
    seed: u64,
) -> Result<Evaluation> {
    rollout.validate()?;
    let slots: Vec<Option<&OpponentSpec>> = if opponents.is_empty() {
        vec![None]
    } else {
        opponents.iter().map(Some).collect()
    };
    for o in slots.iter().flatten() {
        if o.archetype.env_kind() != env.kind() {
            return Err(Error::config(format!("opponent {} does not play {}", o.id(), env.kind())));
        }
    }
    let jobs: Vec<(Option<&OpponentSpec>, u64, u64)> = slots
        .iter()
        .enumerate()
        .flat_map(|(oi, o)| {
            (0..num_meta_episodes).map(move |i| {
                let path = [oi as u64, i as u64];
                (*o, seeds::derive(seed, &[path[0], path[1], TASK_STREAM]), seeds::derive(seed, &path))
            })
        })
        .collect();
    let metas = jobs
        .par_iter()
        .map(|(o, task_seed, s)| {
            let task = env.instantiate(*task_seed)?;
            run_meta_episode(policy, generator, *o, env, &task, rollout, *s)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize(0, &metas, None)?;
    Ok(Evaluation { rows, metas })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvKind;
    use crate::opponents::{Archetype, PopulationConfig};
    use crate::returns::MetaRewardVector;

    fn small_cfg(kind: EnvKind) -> RunConfig {
        RunConfig {
            env: EnvConfig::default_for(kind),
            epochs: 2,
            group_size: 4,
            groups_per_epoch: 2,
            learning_rate: 0.05,
            ..RunConfig::default()
        }
    }

    fn batch(kind: EnvKind, seed: u64) -> Batch {
        let cfg = RunConfig { seed, ..small_cfg(kind) };
        rollout_batch(&LinearSoftmaxPolicy::zeros(kind), &ReflectionGenerator::Structured, &cfg, 1).unwrap()
    }

    fn naive_loss(policy: &LinearSoftmaxPolicy, metas: &[MetaEpisode], adv: &[f64]) -> f64 {
        let mut k = 0;
        let mut total = 0.0;
        for meta in metas {
            for e in &meta.episodes {
                for t in 0..e.steps.len() {
                    let mem = &meta.reflections.reflections[..e.episode_index];
                    let s = &e.steps[t];
                    let ctx = build_context(&meta.task, mem, &e.steps[..t], &s.obs, &s.obs.admissible, e.episode_index)
                        .unwrap();
                    total -= adv[k] * policy.log_prob(&ctx, &s.action).unwrap();
                    k += 1;
                }
            }
        }
        total / metas.len() as f64
    }

    #[test]
    fn every_step_gets_one_advantage() {
        for kind in [EnvKind::KuhnPoker, EnvKind::TicTacToe, EnvKind::Sokoban] {
            let b = batch(kind, 3);
            let adv = compute_advantages(&b.metas, &b.draws, &AdvantageConfig::from_run(&small_cfg(kind))).unwrap();
            let steps: usize = b.metas.iter().flat_map(|m| &m.episodes).map(|e| e.steps.len()).sum();
            assert_eq!(adv.combined.len(), steps);
            assert_eq!(adv.episode_records.len(), b.metas.len());
            assert!(adv.combined.iter().all(|a| a.is_finite()));
        }
    }

    #[test]
    fn single_episode_variant_keys_episode_values_by_index() {
        let mut cfg = small_cfg(EnvKind::KuhnPoker);
        cfg.returns.variant = ReturnVariant::SingleEpisode;
        let b = batch(EnvKind::KuhnPoker, 5);
        let adv = compute_advantages(&b.metas, &b.draws, &AdvantageConfig::from_run(&cfg)).unwrap();
        assert_eq!(adv.episode_records.len(), b.metas.len() * 3);
        for (r, &e) in adv.step_records.iter().zip(&adv.episode_of_step) {
            assert_eq!(adv.episode_records[e].episode_index, r.episode_index);
        }
    }

    #[test]
    fn constant_returns_give_zero_update() {
        let kind = EnvKind::TicTacToe;
        let mut b = batch(kind, 11);
        for m in &mut b.metas {
            let n = m.episodes.len();
            let steps: Vec<usize> = m.episodes.iter().map(|e| e.steps.len()).collect();
            m.rewards = MetaRewardVector {
                episode_rewards: vec![1.0; n],
                meta_rewards: vec![1.0; n],
                step_returns: steps.iter().map(|&t| vec![2.5; t]).collect(),
            };
        }
        let mut cfg = AdvantageConfig::from_run(&small_cfg(kind));
        cfg.variant = ReturnVariant::Cumulative;
        let adv = compute_advantages(&b.metas, &b.draws, &cfg).unwrap();
        assert!(adv.combined.iter().all(|a| a.abs() < 1e-12));
        let policy = LinearSoftmaxPolicy::zeros(kind);
        let loss = compute_loss(&policy, &b.metas, &adv).unwrap();
        assert_eq!(loss.loss, 0.0);
        assert!(loss.gradient.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn loss_matches_naive_double_loop() {
        for kind in [EnvKind::KuhnPoker, EnvKind::TicTacToe, EnvKind::Sokoban] {
            let b = batch(kind, 21);
            let adv = compute_advantages(&b.metas, &b.draws, &AdvantageConfig::from_run(&small_cfg(kind))).unwrap();
            let mut params = PolicyParams::zeros(kind);
            let mut rng = seeds::rng(4, &[]);
            for v in &mut params.theta {
                *v = rand::Rng::gen_range(&mut rng, -1.0..1.0);
            }
            let policy = LinearSoftmaxPolicy::new(params);
            let fast = compute_loss(&policy, &b.metas, &adv).unwrap();
            let slow = naive_loss(&policy, &b.metas, &adv.combined);
            assert!((fast.loss - slow).abs() < 1e-10, "{kind}: {} vs {slow}", fast.loss);
        }
    }

    #[test]
    fn single_step_unit_advantage_is_negative_log_prob() {
        let kind = EnvKind::KuhnPoker;
        let b = batch(kind, 2);
        let meta = b.metas[0].clone();
        let mut adv = compute_advantages(&[meta.clone()], &[0], &AdvantageConfig::from_run(&small_cfg(kind))).unwrap();
        for (i, a) in adv.combined.iter_mut().enumerate() {
            *a = if i == 0 { 1.0 } else { 0.0 };
        }
        let policy = LinearSoftmaxPolicy::zeros(kind);
        let out = compute_loss(&policy, &[meta.clone()], &adv).unwrap();
        let (lp, g) = meta_logprob_grads(&policy, &meta).unwrap().swap_remove(0);
        assert!((out.loss + lp).abs() < 1e-12);
        for (a, b) in out.gradient.iter().zip(&g) {
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_batches_never_mix_opponents() {
        let b = batch(EnvKind::TicTacToe, 8);
        let cfg = AdvantageConfig::from_run(&small_cfg(EnvKind::TicTacToe));
        let adv = compute_advantages(&b.metas, &b.draws, &cfg).unwrap();
        let groups = crate::advantage::group_records(&adv.step_records, cfg.grouping, cfg.anchor_scope);
        let total: usize = groups.values().map(Vec::len).sum();
        assert_eq!(total, adv.step_records.len());
        for idx in groups.values() {
            let first = &adv.step_records[idx[0]].opponent_id;
            assert!(idx.iter().all(|&i| &adv.step_records[i].opponent_id == first));
        }
    }

    #[test]
    fn training_is_reproducible_and_writes_outputs() {
        let cfg = small_cfg(EnvKind::KuhnPoker);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ra = train(&cfg, Some(a.path())).unwrap();
        let rb = train(&cfg, Some(b.path())).unwrap();
        assert_eq!(ra.params, rb.params);
        for f in ["metrics.csv", "checkpoints/final.ckpt", "trajectories.jsonl", "config.toml"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        assert_ne!(ra.params.theta, vec![0.0; ra.params.theta.len()]);
    }

    #[test]
    fn zero_cross_episode_discount_with_one_episode_is_plain_policy_gradient() {
        let mut cfg = small_cfg(EnvKind::KuhnPoker);
        cfg.episodes = 1;
        cfg.returns.gamma_traj = 0.0;
        let out = train(&cfg, None).unwrap();
        assert!(out.rows.iter().all(|r| r.success.len() == 1));
    }

    #[test]
    fn evaluation_reports_monotone_pass_at_k() {
        let cfg = small_cfg(EnvKind::KuhnPoker);
        let ev = evaluate(
            &LinearSoftmaxPolicy::zeros(EnvKind::KuhnPoker),
            &ReflectionGenerator::Structured,
            &cfg.env,
            &PopulationConfig::kuhn_archetypes().specs(),
            20,
            &cfg.rollout(),
            1,
        )
        .unwrap();
        assert_eq!(ev.rows.len(), 4);
        for r in &ev.rows {
            assert!(r.pass_at.windows(2).all(|w| w[0] <= w[1]));
        }
        let wrong = evaluate(
            &LinearSoftmaxPolicy::zeros(EnvKind::KuhnPoker),
            &ReflectionGenerator::Structured,
            &cfg.env,
            &[OpponentSpec::new(Archetype::RandomTtt)],
            1,
            &cfg.rollout(),
            1,
        );
        assert!(wrong.is_err());
    }

    #[test]
    fn remote_policies_cannot_be_trained() {
        let mut cfg = small_cfg(EnvKind::KuhnPoker);
        cfg.policy = PolicyChoice::Remote(crate::policy::RemoteConfig::default());
        assert_eq!(train(&cfg, None).unwrap_err().exit_code(), 2);
    }
}
