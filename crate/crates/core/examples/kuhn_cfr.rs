//! Runs vanilla CFR on Kuhn Poker and prints how exploitable the average
//! strategy is along the way, then how much each archetype gives away.
//!
//! cargo run --release --example kuhn_cfr -- [iterations]

use metaplay::opponents::cfr::{cfr_train_with_checkpoints, expected_value};
use metaplay::opponents::{best_response_value, Archetype, OpponentSpec, Utility};

fn main() -> metaplay::Result<()> {
    let iterations: u64 = std::env::args().nth(1).map_or(100_000, |s| s.parse().expect("iterations"));
    let checkpoints: Vec<u64> = [100, 1_000, 10_000, 100_000].into_iter().filter(|&c| c <= iterations).collect();
    let (profile, curve) = cfr_train_with_checkpoints(iterations, &checkpoints)?;
    for (it, expl) in curve {
        println!("{it:>7} iterations  exploitability {expl:.6}");
    }
    println!("first-player value {:.6}", expected_value(&profile, &profile, 0, Utility::Chips));
    println!("\n{}", profile.to_text());

    for arch in [Archetype::KuhnConservative, Archetype::KuhnAggressive, Archetype::KuhnIntermediate] {
        let spec = OpponentSpec::new(arch);
        let s = spec.kuhn_strategy()?;
        println!(
            "{:<18} best response: {:+.4} chips as first player, {:+.4} as second",
            spec.id(),
            best_response_value(s.as_ref(), 0, Utility::Chips),
            best_response_value(s.as_ref(), 1, Utility::Chips)
        );
    }
    Ok(())
}
