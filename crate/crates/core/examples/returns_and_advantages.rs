//! Step returns under each reward variant for a fixed set of episode
//! rewards, then group-normalized advantages for a handful of records.
//!
//! cargo run --example returns_and_advantages

use metaplay::advantage::{normalize_records, AdvantageRecord, Grouping, NormMode, Scope};
use metaplay::returns::{episode_signals, stepwise_returns, ReturnConfig, ReturnVariant};

fn main() -> metaplay::Result<()> {
    // Lost the first game, won the next two.
    let rewards = [-10.0, 10.0, 10.0];
    let steps = [2, 3, 2];
    for variant in [ReturnVariant::Differential, ReturnVariant::Cumulative, ReturnVariant::SingleEpisode] {
        let cfg = ReturnConfig { variant, ..ReturnConfig::default() };
        let signals = episode_signals(&rewards, variant);
        println!("{variant:?}: signals {signals:?}");
        for (i, row) in stepwise_returns(&signals, &steps, &cfg)?.iter().enumerate() {
            let shown: Vec<String> = row.iter().map(|g| format!("{g:.3}")).collect();
            println!("  episode {}: {}", i + 1, shown.join(" "));
        }
    }

    let record = |id: usize, opp: &str, ret: f64| AdvantageRecord {
        meta_episode_id: id,
        draw: 0,
        episode_index: 0,
        step: 1,
        opponent_id: opp.into(),
        anchor: 0,
        raw_return: ret,
        advantage: None,
    };
    let batch = vec![
        record(0, "kuhn-aggressive", 10.0),
        record(1, "kuhn-aggressive", -10.0),
        record(2, "kuhn-conservative", 20.0),
        record(3, "kuhn-conservative", 0.0),
    ];
    for grouping in [Grouping::Stationary, Grouping::NonStationary] {
        let mut recs = batch.clone();
        normalize_records(&mut recs, grouping, Scope::EpisodeLevel, NormMode::MeanNorm);
        let adv: Vec<f64> = recs.iter().map(|r| r.advantage.unwrap_or(0.0)).collect();
        println!("{grouping:?} advantages {adv:?}");
    }
    Ok(())
}
