//! Trains the linear policy on Kuhn Poker against the three archetypes and
//! compares its per-episode success with each opponent's best-response ceiling.
//!
//! cargo run --example train_kuhn -- [epochs] [seed] [learning_rate]

use metaplay::env::EnvConfig;
use metaplay::opponents::PopulationConfig;
use metaplay::policy::LinearSoftmaxPolicy;
use metaplay::rollout::ReflectionGenerator;
use metaplay::train::{evaluate, theoretical_ceiling, train, RunConfig};

fn main() -> metaplay::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig::default();
    if let Some(e) = args.first() {
        cfg.epochs = e.parse().expect("epochs");
    }
    if let Some(s) = args.get(1) {
        cfg.seed = s.parse().expect("seed");
    }
    if let Some(lr) = args.get(2) {
        cfg.learning_rate = lr.parse().expect("learning rate");
    }
    let start = std::time::Instant::now();
    let out = train(&cfg, None)?;
    println!("trained {} epochs in {:.1?}", cfg.epochs, start.elapsed());

    let specs = PopulationConfig::kuhn_archetypes().specs();
    let ev = evaluate(
        &LinearSoftmaxPolicy::new(out.params),
        &ReflectionGenerator::Structured,
        &cfg.env,
        &specs,
        2000,
        &cfg.rollout(),
        cfg.seed + 1000,
    )?;
    for row in &ev.rows {
        let ceiling = specs
            .iter()
            .find(|s| s.id() == row.opponent_id)
            .map(|s| theoretical_ceiling(&EnvConfig::default(), Some(s)).map(|c| c.value))
            .transpose()?;
        let ceiling = ceiling.map_or_else(|| "-".to_string(), |c| format!("{c:.3}"));
        println!(
            "{:<20} success by episode {:?}  ceiling {ceiling}",
            row.opponent_id,
            row.success.iter().map(|s| (s * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
