//! Meta-reinforcement learning over repeated games.
//!
//! An agent plays a *meta-episode*: several consecutive episodes against one
//! fixed opponent (or one fixed puzzle), carrying a memory of reflections from
//! earlier episodes into later ones. Training rewards improvement across
//! episodes, propagates returns backwards through the meta-episode, and
//! normalizes advantages separately for each opponent in a population.
//!
//! The crate is organised by subsystem:
//!
//! - [`env`]: Tic-Tac-Toe, Kuhn Poker and procedurally generated Sokoban.
//! - [`opponents`]: MCTS, preferred-pattern, archetype, CFR and random opponents,
//!   plus the minimax / best-response oracles used to verify them.
//! - [`rollout`]: meta-episode execution, reflections and policy contexts.
//! - [`returns`]: episode reward composition and cross-episode returns.
//! - [`advantage`]: grouping and normalization of step returns.
//! - [`policy`]: the trainable linear-softmax policy and the remote text-policy adapter.
//! - [`train`]: the outer training loop, evaluation, ceilings and ablations.
//!
//! Runnable walkthroughs of each capability live in `examples/`.

pub mod advantage;
pub mod env;
pub mod error;
pub mod opponents;
pub mod policy;
pub mod prompts;
pub mod returns;
pub mod rollout;
pub mod seeds;
pub mod train;

pub use error::{Error, Result};
