//! Solves a few Tic-Tac-Toe positions exactly.
//!
//! cargo run --example tictactoe_minimax

use metaplay::env::TicTacToeBoard;
use metaplay::opponents::minimax::optimal_moves;
use metaplay::opponents::minimax_value;

fn main() -> metaplay::Result<()> {
    let positions = [
        ". . .\n. . .\n. . .",
        "X . .\n. O .\n. . X",
        "X X .\n. O .\n. . .",
        "X . .\n. . .\n. . O",
    ];
    for text in positions {
        let board = TicTacToeBoard::from_text(text)?;
        let r = minimax_value(&board);
        println!("{}", board.to_text());
        // Value is from the point of view of the side to move.
        println!(
            "{:?} to move: value {:+}, best cell {:?}, all optimal {:?}\n",
            board.to_move(),
            r.value,
            r.best,
            optimal_moves(&board)
        );
    }
    Ok(())
}
