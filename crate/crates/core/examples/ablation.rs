//! Short ablation along one axis on Kuhn Poker.
//!
//! cargo run --release --example ablation -- [axis] [epochs]

use metaplay::train::ablate::arm_means;
use metaplay::train::{ablate, AblationAxis, RunConfig};

fn main() -> metaplay::Result<()> {
    let mut args = std::env::args().skip(1);
    let axis: AblationAxis = args.next().unwrap_or_else(|| "reward_variant".into()).parse()?;
    let cfg = RunConfig {
        epochs: args.next().map_or(40, |s| s.parse().expect("epochs")),
        seeds: vec![0, 1, 2],
        eval_meta_episodes: 500,
        ..RunConfig::default()
    };
    let results = ablate(&cfg, axis, None)?;
    for r in &results {
        if let Some(row) = r.pooled() {
            println!("{:<26} seed {}  success by episode {:?}", r.arm, r.seed, row.success);
        }
    }
    for (arm, mean) in arm_means(&results) {
        println!("{arm:<26} mean final-episode success {mean:.4}");
    }
    Ok(())
}
