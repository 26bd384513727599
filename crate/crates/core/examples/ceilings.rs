//! Best-response success ceilings for every default population.
//!
//! cargo run --release --example ceilings

use metaplay::env::{EnvConfig, EnvKind};
use metaplay::opponents::PopulationConfig;
use metaplay::train::theoretical_ceiling;

fn main() -> metaplay::Result<()> {
    for kind in [EnvKind::KuhnPoker, EnvKind::TicTacToe, EnvKind::Sokoban] {
        let env = EnvConfig::default_for(kind);
        println!("{kind}");
        let specs = PopulationConfig::default_for(kind).map(|p| p.specs()).unwrap_or_default();
        let ceilings = if specs.is_empty() {
            vec![theoretical_ceiling(&env, None)?]
        } else {
            specs.iter().map(|s| theoretical_ceiling(&env, Some(s))).collect::<metaplay::Result<_>>()?
        };
        for c in ceilings {
            println!("  {:<20} {:.4}{}  {}", c.opponent_id, c.value, if c.exact { "" } else { "*" }, c.note);
        }
    }
    Ok(())
}
