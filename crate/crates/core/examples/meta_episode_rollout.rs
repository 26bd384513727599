//! Rolls out one meta-episode of Kuhn Poker and prints what the policy saw:
//! each episode's actions, the reflection written afterwards and the rewards.
//!
//! cargo run --example meta_episode_rollout -- [opponent-id] [seed]

use metaplay::env::EnvConfig;
use metaplay::opponents::OpponentSpec;
use metaplay::policy::LinearSoftmaxPolicy;
use metaplay::rollout::{run_meta_episode, ReflectionGenerator, RolloutConfig};

fn main() -> metaplay::Result<()> {
    let mut args = std::env::args().skip(1);
    let opponent = OpponentSpec::from_id(&args.next().unwrap_or_else(|| "kuhn-aggressive".into()))?;
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));
    let env = EnvConfig::default();
    let task = env.instantiate(seed)?;
    let policy = LinearSoftmaxPolicy::zeros(env.kind());
    let meta = run_meta_episode(
        &policy,
        &ReflectionGenerator::Structured,
        Some(&opponent),
        &env,
        &task,
        &RolloutConfig::default(),
        seed,
    )?;
    for ep in &meta.episodes {
        println!("episode {} ({:?})", ep.episode_index, ep.outcome);
        for line in ep.action_lines() {
            println!("  {line}");
        }
        // No reflection is written after the last episode.
        if let Some(r) = meta.reflections.reflections.get(ep.episode_index) {
            println!("reflection:\n{}\n", r.text);
        }
    }
    println!("episode rewards {:?}", meta.rewards.episode_rewards);
    println!("meta rewards    {:?}", meta.rewards.meta_rewards);
    println!("step returns    {:?}", meta.rewards.step_returns);
    Ok(())
}
