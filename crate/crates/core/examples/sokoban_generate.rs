//! Generates Sokoban rooms by reverse play and solves them.
//!
//! cargo run --release --example sokoban_generate -- [count] [boxes]

use metaplay::env::sokoban::{solve, sokoban_generate_room};
use metaplay::env::RoomParams;

fn main() -> metaplay::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: u64 = args.next().map_or(3, |s| s.parse().expect("count"));
    let boxes: usize = args.next().map_or(2, |s| s.parse().expect("boxes"));
    let params = RoomParams {
        size: 6,
        num_boxes: boxes,
        search_depth: 100,
        max_solution_steps: 30,
    };
    for seed in 0..count {
        let room = sokoban_generate_room(params, seed)?;
        println!("seed {seed}\n{}", room.to_text());
        match solve(&room, params.max_solution_steps) {
            Some(s) => {
                let moves: Vec<String> = s.moves.iter().map(ToString::to_string).collect();
                println!("{} pushes, {} moves: {}\n", s.pushes, s.moves.len(), moves.join(","));
            }
            None => println!("no solution within {} pushes\n", params.max_solution_steps),
        }
    }
    Ok(())
}
