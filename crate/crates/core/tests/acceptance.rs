//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use metaplay::advantage::{group_records, normalize_records, AdvantageRecord, Grouping, NormMode, Scope};
use metaplay::env::tictactoe::{Mark, TicTacToeBoard};
use metaplay::env::{Action, Env, EnvConfig, EnvKind, GameResult, KuhnConfig, SeatChoice};
use metaplay::opponents::cfr::expected_value;
use metaplay::opponents::mcts::mcts_select;
use metaplay::opponents::minimax::optimal_moves;
use metaplay::opponents::{cfr_train, exploitability, Archetype, OpponentSpec, PopulationConfig, Utility};
use metaplay::policy::remote::{decision_from_reply, parse_action, ParseQuality};
use metaplay::policy::{LinearSoftmaxPolicy, PolicyParams};
use metaplay::returns::{
    compose_episode_reward, differential_meta_reward, stepwise_returns, ReturnConfig, ReturnVariant, RewardConfig,
    StartReturn,
};
use metaplay::rollout::{build_context, run_meta_episode, MetaEpisode, ReflectionGenerator, RolloutConfig};
use metaplay::seeds;
use metaplay::train::ablate::{ablate, arm_means, AblationAxis};
use metaplay::train::{evaluate, pass_at_k, theoretical_ceiling, train, MetricsRow, RunConfig};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// 1. CFR

fn cfr_correctness() -> Verdict {
    let start = Instant::now();
    let profile = cfr_train(100_000).expect("cfr");
    let elapsed = start.elapsed();
    let expl = exploitability(&profile);
    let value = expected_value(&profile, &profile, 0, Utility::Chips);
    let ok = expl < 1e-3 && (value + 1.0 / 18.0).abs() < 1e-3 && elapsed < Duration::from_secs(10);
    verdict(
        ok,
        format!("exploitability {expl:.2e}, first-player value {value:.6} (target -0.055556), {elapsed:.1?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. MCTS against the minimax oracle

fn tactical_positions(count: usize) -> Vec<TicTacToeBoard> {
    let mut rng = seeds::rng(2024, &[]);
    let mut found: Vec<TicTacToeBoard> = Vec::new();
    while found.len() < count {
        let mut b = TicTacToeBoard::new();
        while !b.is_terminal() {
            let mover = b.to_move();
            let forcing = !b.winning_cells(mover).is_empty() || !b.winning_cells(mover.other()).is_empty();
            let optimal = optimal_moves(&b);
            if forcing && optimal.len() < b.empty_cells().len() && !found.contains(&b) {
                found.push(b);
                break;
            }
            let cell = *b.empty_cells().choose(&mut rng).expect("non-terminal");
            b = b.play(cell).expect("empty cell");
        }
    }
    found
}

fn mcts_soundness() -> Verdict {
    let start = Instant::now();
    let positions = tactical_positions(24);
    let trials: Vec<(usize, u64)> = (0..positions.len()).flat_map(|p| (0..5).map(move |s| (p, s))).collect();
    let optimal_hits = trials
        .par_iter()
        .filter(|(p, s)| {
            let b = &positions[*p];
            let mut rng = seeds::rng(*s, &[*p as u64]);
            let m = mcts_select(b, 1000, &mut rng).expect("non-terminal");
            optimal_moves(b).contains(&m)
        })
        .count();
    let rate = optimal_hits as f64 / trials.len() as f64;

    let losses: usize = (0..1000u64)
        .into_par_iter()
        .filter(|&g| {
            let mcts_mark = if g % 2 == 0 { Mark::X } else { Mark::O };
            let mut rng = seeds::rng(77, &[g]);
            let mut b = TicTacToeBoard::new();
            while !b.is_terminal() {
                let cell = if b.to_move() == mcts_mark {
                    mcts_select(&b, 1000, &mut rng).expect("non-terminal")
                } else {
                    *b.empty_cells().choose(&mut rng).expect("non-terminal")
                };
                b = b.play(cell).expect("legal");
            }
            b.winner() == Some(mcts_mark.other())
        })
        .count();
    let elapsed = start.elapsed();
    verdict(
        rate >= 0.95 && losses == 0 && elapsed < Duration::from_secs(60),
        format!(
            "{} tactical positions, optimal in {:.1}% of {} trials; {losses} losses in 1000 games vs random; {elapsed:.1?}",
            positions.len(),
            rate * 100.0,
            trials.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. Return arithmetic

/// Value an episode contributes to earlier ones: its return at the first
/// decision, or one step before it.
fn start_value(signals: &[f64], steps: &[usize], cfg: &ReturnConfig, m: usize) -> f64 {
    match cfg.start_return {
        StartReturn::FirstDecision => double_sum(signals, steps, cfg, m, 1),
        StartReturn::BeforeFirstDecision => {
            cfg.gamma_step.powi(steps[m] as i32) * signals[m] + later_sum(signals, steps, cfg, m)
        }
    }
}

/// Discounted start values of every episode after `n`, summed term by term.
fn later_sum(signals: &[f64], steps: &[usize], cfg: &ReturnConfig, n: usize) -> f64 {
    if cfg.variant == ReturnVariant::SingleEpisode {
        return 0.0;
    }
    (n + 1..signals.len())
        .map(|m| cfg.gamma_traj.powi((m - n) as i32) * start_value(signals, steps, cfg, m))
        .sum()
}

/// Return at 1-based step `t` of episode `n` by direct summation.
fn double_sum(signals: &[f64], steps: &[usize], cfg: &ReturnConfig, n: usize, t: usize) -> f64 {
    cfg.gamma_step.powi((steps[n] - t) as i32) * signals[n] + later_sum(signals, steps, cfg, n)
}

fn return_arithmetic() -> Verdict {
    let mut rng = seeds::rng(3, &[]);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=5);
        let steps: Vec<usize> = (0..n).map(|_| rng.gen_range(1..=10)).collect();
        let signals: Vec<f64> = (0..n).map(|_| rng.gen_range(-25.0..25.0)).collect();
        let cfg = ReturnConfig {
            gamma_step: rng.gen_range(0.5..=1.0),
            gamma_traj: rng.gen_range(0.0..=1.0),
            variant: *[ReturnVariant::Differential, ReturnVariant::Cumulative, ReturnVariant::SingleEpisode]
                .choose(&mut rng)
                .unwrap(),
            start_return: *[StartReturn::FirstDecision, StartReturn::BeforeFirstDecision]
                .choose(&mut rng)
                .unwrap(),
        };
        let fast = stepwise_returns(&signals, &steps, &cfg).expect("returns");
        for (i, row) in fast.iter().enumerate() {
            for (t, g) in row.iter().enumerate() {
                let slow = double_sum(&signals, &steps, &cfg, i, t + 1);
                worst = worst.max((g - slow).abs() / slow.abs().max(1.0));
            }
        }
    }

    // Telescoping on episode rewards drawn from the reward model itself.
    let reward_cfg = RewardConfig::for_env(EnvKind::KuhnPoker);
    let outcomes = [GameResult::Win, GameResult::Loss, GameResult::Draw, GameResult::Timeout];
    let mut exact_failures = 0;
    let mut real_worst: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=5);
        let grid: Vec<f64> = (0..n)
            .map(|_| compose_episode_reward(*outcomes.choose(&mut rng).unwrap(), rng.gen_range(0..6), &[], &reward_cfg))
            .collect();
        let sum: f64 = differential_meta_reward(&grid).iter().sum();
        if sum != grid[n - 1] {
            exact_failures += 1;
        }
        let real: Vec<f64> = (0..n)
            .map(|_| {
                let lens: Vec<usize> = (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..5000)).collect();
                compose_episode_reward(*outcomes.choose(&mut rng).unwrap(), rng.gen_range(0..6), &lens, &reward_cfg)
            })
            .collect();
        let sum: f64 = differential_meta_reward(&real).iter().sum();
        real_worst = real_worst.max((sum - real[n - 1]).abs());
    }
    verdict(
        worst <= 1e-12 && exact_failures == 0 && real_worst <= 1e-12,
        format!(
            "max relative deviation from double summation {worst:.1e}; telescoping exact on {} of 10000 reward-grid vectors, max deviation {real_worst:.1e} with length penalties",
            10_000 - exact_failures
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. Advantage invariants

fn random_batch(rng: &mut seeds::Rng) -> Vec<AdvantageRecord> {
    let opponents = ["mcts-100", "pattern-0", "random-ttt"];
    let len = rng.gen_range(1..120);
    (0..len)
        .map(|i| AdvantageRecord {
            meta_episode_id: i / 6,
            draw: rng.gen_range(0..4),
            episode_index: rng.gen_range(1..=3),
            step: rng.gen_range(1..=5),
            opponent_id: opponents[rng.gen_range(0..3)].to_string(),
            anchor: rng.gen_range(0..12),
            raw_return: rng.gen_range(-30.0..30.0),
            advantage: None,
        })
        .collect()
}

fn advantage_invariants() -> Verdict {
    let mut rng = seeds::rng(4, &[]);
    let scopes = [Scope::EpisodeLevel, Scope::StepGlobalAnchor, Scope::StepPerEpisodeAnchor];
    let (mut worst_mean, mut worst_shift, mut mixed, mut order_breaks) = (0.0f64, 0.0f64, 0usize, 0usize);
    let batches = 2000;
    for _ in 0..batches {
        let batch = random_batch(&mut rng);
        let scope = scopes[rng.gen_range(0..3)];
        let shift = rng.gen_range(-100.0..100.0);
        for mode in [NormMode::MeanNorm, NormMode::ZNorm] {
            let mut a = batch.clone();
            normalize_records(&mut a, Grouping::Stationary, scope, mode);
            let mut b: Vec<AdvantageRecord> = batch
                .iter()
                .map(|r| AdvantageRecord {
                    raw_return: r.raw_return + shift,
                    ..r.clone()
                })
                .collect();
            normalize_records(&mut b, Grouping::Stationary, scope, mode);
            for (x, y) in a.iter().zip(&b) {
                worst_shift = worst_shift.max((x.advantage.unwrap() - y.advantage.unwrap()).abs());
            }
            for idx in group_records(&a, Grouping::Stationary, scope).values() {
                if idx.iter().any(|&i| a[i].opponent_id != a[idx[0]].opponent_id) {
                    mixed += 1;
                }
                if mode == NormMode::MeanNorm {
                    let s: f64 = idx.iter().map(|&i| a[i].advantage.unwrap()).sum();
                    worst_mean = worst_mean.max(s.abs() / idx.len() as f64);
                }
                for &i in idx {
                    for &j in idx {
                        let (gi, gj) = (a[i].raw_return, a[j].raw_return);
                        let (ai, aj) = (a[i].advantage.unwrap(), a[j].advantage.unwrap());
                        if idx.len() > 1 && gi < gj && ai >= aj {
                            order_breaks += 1;
                        }
                    }
                }
            }
        }
    }
    // Shift invariance is exact up to rounding of values of magnitude ~100.
    verdict(
        worst_mean <= 1e-12 && worst_shift <= 1e-9 && mixed == 0 && order_breaks == 0,
        format!(
            "{batches} batches: max group mean {worst_mean:.1e}, max shift change {worst_shift:.1e}, {mixed} mixed-opponent groups, {order_breaks} ordering breaks"
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Gradients

fn random_params(kind: EnvKind, rng: &mut seeds::Rng) -> PolicyParams {
    let mut p = PolicyParams::zeros(kind);
    for v in &mut p.theta {
        *v = rng.gen_range(-1.5..1.5);
    }
    p
}

fn sample_metas(kind: EnvKind, rng: &mut seeds::Rng, count: usize) -> Vec<MetaEpisode> {
    let env = EnvConfig::default_for(kind);
    let specs = PopulationConfig::default_for(kind).map(|p| p.specs()).unwrap_or_default();
    (0..count)
        .map(|i| {
            let policy = LinearSoftmaxPolicy::new(random_params(kind, rng));
            let task = env.instantiate(i as u64).expect("task");
            let opp = if specs.is_empty() { None } else { Some(&specs[i % specs.len()]) };
            run_meta_episode(&policy, &ReflectionGenerator::Structured, opp, &env, &task, &RolloutConfig::default(), i as u64)
                .expect("rollout")
        })
        .collect()
}

fn gradient_correctness() -> Verdict {
    let h = 1e-5;
    let mut details = Vec::new();
    let mut ok = true;
    for kind in [EnvKind::TicTacToe, EnvKind::KuhnPoker, EnvKind::Sokoban] {
        let mut rng = seeds::rng(5, &[kind as u64]);
        let metas = sample_metas(kind, &mut rng, 40);
        let points: Vec<(usize, usize, usize)> = metas
            .iter()
            .enumerate()
            .flat_map(|(m, meta)| {
                meta.episodes
                    .iter()
                    .enumerate()
                    .flat_map(move |(e, ep)| (0..ep.steps.len()).map(move |t| (m, e, t)))
            })
            .collect();
        let mut worst: f64 = 0.0;
        for k in 0..100 {
            let (m, e, t) = points[(k * 7919) % points.len()];
            let meta = &metas[m];
            let ep = &meta.episodes[e];
            let s = &ep.steps[t];
            let mem = &meta.reflections.reflections[..ep.episode_index];
            let ctx = build_context(&meta.task, mem, &ep.steps[..t], &s.obs, &s.obs.admissible, ep.episode_index)
                .expect("context");
            let params = random_params(kind, &mut rng);
            let (_, grad) = LinearSoftmaxPolicy::new(params.clone()).logprob_grad(&ctx, &s.action).expect("grad");
            let fd: Vec<f64> = (0..params.theta.len())
                .map(|i| {
                    let at = |delta: f64| {
                        let mut p = params.clone();
                        p.theta[i] += delta;
                        LinearSoftmaxPolicy::new(p).log_prob(&ctx, &s.action).expect("log prob")
                    };
                    (at(h) - at(-h)) / (2.0 * h)
                })
                .collect();
            let diff = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-3);
            worst = worst.max(diff / scale);
        }
        ok &= worst < 1e-5;
        details.push(format!("{kind} max relative error {worst:.1e}"));
    }
    verdict(ok, format!("100 contexts per game; {}", details.join(", ")))
}

// ---------------------------------------------------------------------------
// 6. Adaptation curve on Kuhn

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EVAL_PER_ARCHETYPE: usize = 2000;

fn kuhn_base() -> RunConfig {
    RunConfig {
        seeds: SEEDS.to_vec(),
        eval_meta_episodes: EVAL_PER_ARCHETYPE,
        ..RunConfig::default()
    }
}

fn adaptation_curve() -> Verdict {
    let start = Instant::now();
    let base = kuhn_base();
    let specs = PopulationConfig::kuhn_archetypes().specs();
    let mut per_opp: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let (mut ep1, mut ep3) = (0.0, 0.0);
    for &seed in &SEEDS {
        let cfg = RunConfig { seed, ..base.clone() };
        let trained = train(&cfg, None).expect("train");
        let ev = evaluate(
            &LinearSoftmaxPolicy::new(trained.params),
            &ReflectionGenerator::Structured,
            &cfg.env,
            &specs,
            EVAL_PER_ARCHETYPE,
            &cfg.rollout(),
            seeds::derive(seed, &[0xE1]),
        )
        .expect("eval");
        for r in &ev.rows {
            if r.opponent_id == "all" {
                ep1 += r.success[0] / SEEDS.len() as f64;
                ep3 += r.success[2] / SEEDS.len() as f64;
            } else {
                per_opp.entry(r.opponent_id.clone()).or_default().push(r.final_success());
            }
        }
    }
    let mut gaps = Vec::new();
    let mut within = true;
    for s in &specs {
        let ceiling = theoretical_ceiling(&EnvConfig::default(), Some(s)).expect("ceiling").value;
        let v = per_opp[&s.id()].iter().sum::<f64>() / SEEDS.len() as f64;
        within &= (v - ceiling).abs() <= 0.03;
        gaps.push(format!("{} {:.3}/{:.3}", s.id(), v, ceiling));
    }
    let elapsed = start.elapsed();
    let improved = ep3 - ep1 >= 0.05;
    verdict(
        improved && within && elapsed < Duration::from_secs(600),
        format!(
            "episode 1 {ep1:.3} -> episode 3 {ep3:.3} (gain {:+.1} pp, need +5); final vs ceiling: {}; {elapsed:.1?}",
            (ep3 - ep1) * 100.0,
            gaps.join(", ")
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. Ablation ordering

fn ablation_direction() -> Verdict {
    let base = kuhn_base();
    let variants = arm_means(&ablate(&base, AblationAxis::RewardVariant, None).expect("reward ablation"));
    let grouping = arm_means(&ablate(&base, AblationAxis::GroupingStationarity, None).expect("grouping ablation"));
    let get = |v: &[(String, f64)], k: &str| v.iter().find(|(a, _)| a == k).map(|(_, m)| *m).expect(k);
    let diff = get(&variants, "differential");
    let single = get(&variants, "single_episode");
    let no_mem = get(&variants, "single_episode_no_memory");
    let stat = get(&grouping, "stationary");
    let non = get(&grouping, "non_stationary");
    verdict(
        diff >= single && single >= no_mem && stat >= non,
        format!(
            "differential {diff:.4} >= single_episode {single:.4} >= no memory {no_mem:.4}; stationary {stat:.4} >= non_stationary {non:.4} (cumulative {:.4})",
            get(&variants, "cumulative")
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Metric definitions

fn metric_definitions() -> Verdict {
    let mut rng = seeds::rng(8, &[]);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=5);
        let rows: Vec<Vec<bool>> = (0..rng.gen_range(0..30))
            .map(|_| (0..n).map(|_| rng.gen_bool(0.3)).collect())
            .collect();
        for k in 1..=n {
            let mut hits = 0usize;
            for r in &rows {
                let mut any = false;
                for s in r.iter().take(k) {
                    any |= *s;
                }
                hits += usize::from(any);
            }
            let expect = if rows.is_empty() { 0.0 } else { hits as f64 / rows.len() as f64 };
            if pass_at_k(&rows, k).expect("pass@k") != expect {
                mismatches += 1;
            }
        }
    }
    let cfg = RunConfig {
        epochs: 20,
        ..RunConfig::default()
    };
    let mut rows: Vec<MetricsRow> = train(&cfg, None).expect("train").rows;
    let ttt = RunConfig {
        env: EnvConfig::default_for(EnvKind::TicTacToe),
        epochs: 3,
        ..RunConfig::default()
    };
    rows.extend(train(&ttt, None).expect("train ttt").rows);
    let non_monotone = rows
        .iter()
        .filter(|r| r.pass_at.windows(2).any(|w| w[0] > w[1]))
        .count();
    verdict(
        mismatches == 0 && non_monotone == 0,
        format!("{mismatches} mismatches against the row scan; {non_monotone} of {} metrics rows non-monotone", rows.len()),
    )
}

// ---------------------------------------------------------------------------
// 9. Reproducibility

fn dir_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["", "checkpoints"] {
        for entry in fs::read_dir(dir.join(sub)).expect("read dir") {
            let p = entry.expect("entry").path();
            if p.is_file() {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).expect("read"));
            }
        }
    }
    out
}

fn reproducibility() -> Verdict {
    let mut ok = true;
    let mut compared = 0;
    for cfg in [
        RunConfig {
            epochs: 20,
            checkpoint_every: 5,
            seed: 9,
            ..RunConfig::default()
        },
        RunConfig {
            env: EnvConfig::default_for(EnvKind::TicTacToe),
            epochs: 3,
            checkpoint_every: 1,
            seed: 9,
            ..RunConfig::default()
        },
        RunConfig {
            env: EnvConfig::default_for(EnvKind::Sokoban),
            epochs: 10,
            checkpoint_every: 5,
            seed: 9,
            ..RunConfig::default()
        },
    ] {
        let a = tempfile::tempdir().expect("tempdir");
        let b = tempfile::tempdir().expect("tempdir");
        train(&cfg, Some(a.path())).expect("train a");
        train(&cfg, Some(b.path())).expect("train b");
        let (fa, fb) = (dir_files(a.path()), dir_files(b.path()));
        ok &= fa == fb && fa.contains_key("metrics.csv");
        compared += fa.len();
    }
    verdict(ok, format!("{compared} files byte-identical across paired runs on three games"))
}

// ---------------------------------------------------------------------------
// 10. Remote parser

fn fixture(name: &str) -> Vec<serde_json::Value> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    fs::read_to_string(path)
        .expect("fixture")
        .lines()
        .map(|l| serde_json::from_str(l).expect("json line"))
        .collect()
}

fn well_formed(action: &Action, kind: EnvKind, per_turn: usize) -> bool {
    match (action, kind) {
        (Action::Place { row, col }, EnvKind::TicTacToe) => (1..=3).contains(row) && (1..=3).contains(col),
        (Action::Kuhn(_), EnvKind::KuhnPoker) => true,
        (Action::Moves(m), EnvKind::Sokoban) => !m.is_empty() && m.len() <= per_turn,
        _ => false,
    }
}

fn remote_parser() -> Verdict {
    let malformed = fixture("malformed_responses.jsonl");
    let tagged = fixture("tagged_responses.jsonl");
    let (mut crashes, mut bad, mut substituted) = (0, 0, 0);
    for sample in &malformed {
        let kind: EnvKind = sample["env"].as_str().unwrap().parse().unwrap();
        let text = sample["text"].as_str().unwrap();
        let env_cfg = match kind {
            EnvKind::KuhnPoker => EnvConfig::KuhnPoker(KuhnConfig {
                agent_seat: SeatChoice::P0,
                ..KuhnConfig::default()
            }),
            k => EnvConfig::default_for(k),
        };
        let task = env_cfg.instantiate(1).unwrap();
        let opponent = OpponentSpec::new(Archetype::RandomKuhn).build().unwrap();
        let (_, obs, _) = Env::reset(&env_cfg, &task, 1, &opponent).unwrap();
        let per_turn = if kind == EnvKind::Sokoban { 3 } else { 1 };
        let result = panic::catch_unwind(AssertUnwindSafe(|| {
            let memory = [metaplay::rollout::Reflection::empty(0)];
            let ctx = build_context(&task, &memory, &[], &obs, &obs.admissible, 1).unwrap();
            decision_from_reply(text, text.len(), &ctx, &mut seeds::rng(10, &[])).unwrap()
        }));
        match result {
            Err(_) => crashes += 1,
            Ok(d) if d.invalid => {
                substituted += 1;
                if !obs.admissible.contains(&d.action) {
                    bad += 1;
                }
            }
            Ok(d) => {
                if !well_formed(&d.action, kind, per_turn) {
                    bad += 1;
                }
            }
        }
    }
    let mut tag_misses = 0;
    for sample in &tagged {
        let kind: EnvKind = sample["env"].as_str().unwrap().parse().unwrap();
        let per_turn = if kind == EnvKind::Sokoban { 3 } else { 1 };
        match parse_action(sample["text"].as_str().unwrap(), kind, per_turn) {
            Some((a, ParseQuality::Strict)) if a.to_string() == sample["expect"].as_str().unwrap() => {}
            _ => tag_misses += 1,
        }
    }
    verdict(
        malformed.len() == 200 && crashes == 0 && bad == 0 && tag_misses == 0,
        format!(
            "{} malformed replies: {crashes} crashes, {bad} unusable, {substituted} flagged-invalid substitutes; {} of {} tagged replies exact",
            malformed.len(),
            tagged.len() - tag_misses,
            tagged.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("cfr correctness", cfr_correctness),
        ("minimax/mcts soundness", mcts_soundness),
        ("return arithmetic", return_arithmetic),
        ("advantage invariants", advantage_invariants),
        ("gradient correctness", gradient_correctness),
        ("adaptation curve", adaptation_curve),
        ("ablation direction", ablation_direction),
        ("metric definitions", metric_definitions),
        ("reproducibility", reproducibility),
        ("remote parser robustness", remote_parser),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name}: {} [{:.1?}]",
            if v.pass { "PASS" } else { "FAIL" },
            i + 1,
            v.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
