//! Plays Tic-Tac-Toe through a chat-completion endpoint.
//!
//! Without METAPLAY_BASE_URL this only prints the first prompt and shows how
//! a few canned replies are parsed.
//!
//! METAPLAY_BASE_URL=http://localhost:8000/v1 METAPLAY_MODEL=my-model \
//!     cargo run --example remote_policy

use std::sync::Arc;

use metaplay::env::{Env, EnvConfig, EnvKind};
use metaplay::opponents::OpponentSpec;
use metaplay::policy::remote::{parse_action, render_context};
use metaplay::policy::{RemoteClient, RemoteConfig, RemotePolicy};
use metaplay::rollout::{build_context, run_meta_episode, Reflection, ReflectionGenerator, RolloutConfig};

fn main() -> metaplay::Result<()> {
    let env = EnvConfig::default_for(EnvKind::TicTacToe);
    let task = env.instantiate(0)?;
    let opponent = OpponentSpec::from_id("pattern-0")?;

    let Ok(base_url) = std::env::var("METAPLAY_BASE_URL") else {
        let built = opponent.build()?;
        let (_, obs, _) = Env::reset(&env, &task, 0, &built)?;
        let memory = [Reflection::empty(0)];
        let ctx = build_context(&task, &memory, &[], &obs, &obs.admissible, 1)?;
        println!("{}\n", render_context(&ctx, None)?);
        for reply in ["I'll take the centre. <action>(2,2)</action>", "corner (1,3) looks safest", "no idea"] {
            println!("{reply:?} -> {:?}", parse_action(reply, EnvKind::TicTacToe, 1));
        }
        return Ok(());
    };

    let mut cfg = RemoteConfig {
        base_url,
        ..RemoteConfig::default()
    };
    if let Ok(model) = std::env::var("METAPLAY_MODEL") {
        cfg.model = model;
    }
    let client = Arc::new(RemoteClient::new(cfg)?);
    let policy = RemotePolicy { client: client.clone() };
    let meta = run_meta_episode(
        &policy,
        &ReflectionGenerator::Remote(client),
        Some(&opponent),
        &env,
        &task,
        &RolloutConfig::default(),
        0,
    )?;
    for ep in &meta.episodes {
        println!("episode {}: {:?}, {} invalid replies", ep.episode_index, ep.outcome, ep.invalid_count);
    }
    println!("success by episode {:?}", meta.successes());
    Ok(())
}
