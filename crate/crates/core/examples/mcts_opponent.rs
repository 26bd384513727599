//! Plays the UCT opponent against uniform random moves at two budgets.
//!
//! cargo run --release --example mcts_opponent -- [games]

use rand::seq::SliceRandom;

use metaplay::env::{Mark, TicTacToeBoard};
use metaplay::opponents::mcts::mcts_select;
use metaplay::seeds;

fn main() {
    let games: u64 = std::env::args().nth(1).map_or(200, |s| s.parse().expect("games"));
    for budget in [100, 1000] {
        let (mut wins, mut draws, mut losses) = (0, 0, 0);
        for g in 0..games {
            let mcts = if g % 2 == 0 { Mark::X } else { Mark::O };
            let mut rng = seeds::rng(g, &[budget as u64]);
            let mut b = TicTacToeBoard::new();
            while !b.is_terminal() {
                let cell = if b.to_move() == mcts {
                    mcts_select(&b, budget, &mut rng).expect("game not over")
                } else {
                    *b.empty_cells().choose(&mut rng).expect("game not over")
                };
                b = b.play(cell).expect("legal move");
            }
            match b.winner() {
                Some(w) if w == mcts => wins += 1,
                Some(_) => losses += 1,
                None => draws += 1,
            }
        }
        println!("mcts-{budget}: {wins} wins, {draws} draws, {losses} losses over {games} games");
    }
}
