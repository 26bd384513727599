//! Environments behind one contract: reset to an [`Observation`], then
//! [`Env::step`] with the agent's [`Action`] until a terminal [`GameResult`].
//!
//! Opponent replies are folded into the agent's step, so every step is an
//! agent decision point.

pub mod kuhn;
pub mod sokoban;
pub mod tictactoe;

use std::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds::{self, Rng};

pub use kuhn::{Card, InfoSet, KuhnMove, KuhnState};
pub use sokoban::{Direction, RoomParams, SokobanRoom};
pub use tictactoe::{Mark, TicTacToeBoard};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    TicTacToe,
    KuhnPoker,
    Sokoban,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::TicTacToe => "tic_tac_toe",
            EnvKind::KuhnPoker => "kuhn_poker",
            EnvKind::Sokoban => "sokoban",
        })
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tic_tac_toe" | "tictactoe" | "ttt" => Ok(EnvKind::TicTacToe),
            "kuhn_poker" | "kuhn" => Ok(EnvKind::KuhnPoker),
            "sokoban" => Ok(EnvKind::Sokoban),
            other => Err(Error::config(format!("unknown environment {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// 1-indexed board coordinate.
    Place { row: u8, col: u8 },
    Kuhn(KuhnMove),
    Moves(Vec<Direction>),
}

impl Action {
    pub fn place_index(idx: usize) -> Action {
        let (row, col) = tictactoe::cell_coords(idx);
        Action::Place { row, col }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Place { row, col } => write!(f, "({row},{col})"),
            Action::Kuhn(m) => write!(f, "{m}"),
            Action::Moves(ms) => {
                let names: Vec<&str> = ms.iter().map(|d| d.name()).collect();
                f.write_str(&names.join(","))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameResult {
    Ongoing,
    Win,
    Loss,
    Draw,
    Timeout,
}

impl GameResult {
    pub fn is_terminal(self) -> bool {
        self != GameResult::Ongoing
    }
}

impl fmt::Display for GameResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GameResult::Ongoing => "ongoing",
            GameResult::Win => "win",
            GameResult::Loss => "loss",
            GameResult::Draw => "draw",
            GameResult::Timeout => "timeout",
        })
    }
}

/// The agent's view of a Kuhn hand.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KuhnView {
    pub seat: u8,
    pub own_card: Card,
    pub history: Vec<KuhnMove>,
    /// Revealed only when the hand ends at showdown.
    pub opponent_card: Option<Card>,
    pub contributions: [u8; 2],
}

impl KuhnView {
    pub fn info_set(&self) -> InfoSet {
        InfoSet {
            card: self.own_card,
            history: self.history.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSnapshot {
    TicTacToe { board: TicTacToeBoard, agent: Mark },
    Kuhn(KuhnView),
    Sokoban(SokobanRoom),
}

impl StateSnapshot {
    pub fn kind(&self) -> EnvKind {
        match self {
            StateSnapshot::TicTacToe { .. } => EnvKind::TicTacToe,
            StateSnapshot::Kuhn(_) => EnvKind::KuhnPoker,
            StateSnapshot::Sokoban(_) => EnvKind::Sokoban,
        }
    }

    pub fn render(&self) -> String {
        match self {
            StateSnapshot::TicTacToe { board, agent } => {
                format!("{}\nYou play {agent}. {} to move.", board.to_text(), board.to_move())
            }
            StateSnapshot::Kuhn(v) => {
                let history: Vec<String> = v.history.iter().map(|m| m.to_string()).collect();
                let mut out = format!(
                    "You are player {}.\nYour card: {}\nAction history: {}\nChips in pot: player 0 = {}, player 1 = {}",
                    v.seat,
                    v.own_card.symbol(),
                    if history.is_empty() { "(none)".to_string() } else { history.join(", ") },
                    v.contributions[0],
                    v.contributions[1],
                );
                if let Some(c) = v.opponent_card {
                    out.push_str(&format!("\nOpponent card: {}", c.symbol()));
                }
                out
            }
            StateSnapshot::Sokoban(room) => room.to_text(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub text: String,
    pub structured: StateSnapshot,
    pub turn_index: u32,
    pub admissible: Vec<Action>,
}

impl Observation {
    fn new(structured: StateSnapshot, turn_index: u32, admissible: Vec<Action>) -> Self {
        Self {
            text: structured.render(),
            structured,
            turn_index,
            admissible,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub next_obs: Observation,
    pub terminal: bool,
    pub result: GameResult,
    pub invalid: bool,
    /// The opponent's reply folded into this step, if any.
    pub opponent_action: Option<Action>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TicTacToeConfig {
    pub agent_mark: Mark,
    pub max_turns: u32,
}

impl Default for TicTacToeConfig {
    fn default() -> Self {
        Self {
            agent_mark: Mark::X,
            max_turns: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeatChoice {
    Random,
    P0,
    P1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KuhnConfig {
    pub agent_seat: SeatChoice,
    pub max_turns: u32,
}

impl Default for KuhnConfig {
    fn default() -> Self {
        Self {
            agent_seat: SeatChoice::Random,
            max_turns: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SokobanConfig {
    pub size: usize,
    pub num_boxes: usize,
    pub search_depth: u32,
    pub max_solution_steps: u32,
    pub actions_per_turn: usize,
    pub max_turns: u32,
    /// End the episode as a loss as soon as a box is frozen off target.
    pub deadlock_terminates: bool,
}

impl Default for SokobanConfig {
    fn default() -> Self {
        Self {
            size: 6,
            num_boxes: 2,
            search_depth: 100,
            max_solution_steps: 21,
            actions_per_turn: 3,
            max_turns: 7,
            deadlock_terminates: true,
        }
    }
}

impl SokobanConfig {
    pub fn room_params(&self) -> RoomParams {
        RoomParams {
            size: self.size,
            num_boxes: self.num_boxes,
            search_depth: self.search_depth,
            max_solution_steps: self.max_solution_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    TicTacToe(TicTacToeConfig),
    KuhnPoker(KuhnConfig),
    Sokoban(SokobanConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::KuhnPoker(KuhnConfig::default())
    }
}

impl EnvConfig {
    pub fn kind(&self) -> EnvKind {
        match self {
            EnvConfig::TicTacToe(_) => EnvKind::TicTacToe,
            EnvConfig::KuhnPoker(_) => EnvKind::KuhnPoker,
            EnvConfig::Sokoban(_) => EnvKind::Sokoban,
        }
    }

    pub fn default_for(kind: EnvKind) -> Self {
        match kind {
            EnvKind::TicTacToe => EnvConfig::TicTacToe(TicTacToeConfig::default()),
            EnvKind::KuhnPoker => EnvConfig::KuhnPoker(KuhnConfig::default()),
            EnvKind::Sokoban => EnvConfig::Sokoban(SokobanConfig::default()),
        }
    }

    pub fn max_turns(&self) -> u32 {
        match self {
            EnvConfig::TicTacToe(c) => c.max_turns,
            EnvConfig::KuhnPoker(c) => c.max_turns,
            EnvConfig::Sokoban(c) => c.max_turns,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_turns() == 0 {
            return Err(Error::config("max_turns must be at least 1"));
        }
        if let EnvConfig::Sokoban(c) = self {
            c.room_params().validate()?;
            if c.actions_per_turn == 0 {
                return Err(Error::config("actions_per_turn must be at least 1"));
            }
        }
        Ok(())
    }

    /// Fixes the per-meta-episode task. Sokoban rooms are generated here so
    /// every episode of a meta-episode replays the same puzzle.
    pub fn instantiate(&self, task_seed: u64) -> Result<TaskInstance> {
        self.validate()?;
        Ok(match self {
            EnvConfig::TicTacToe(c) => TaskInstance::TicTacToe { agent: c.agent_mark },
            EnvConfig::KuhnPoker(_) => TaskInstance::Kuhn,
            EnvConfig::Sokoban(c) => TaskInstance::Sokoban {
                room: sokoban::sokoban_generate_room(c.room_params(), task_seed)?,
                actions_per_turn: c.actions_per_turn,
            },
        })
    }
}

/// The fixed task a meta-episode is played on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskInstance {
    TicTacToe { agent: Mark },
    Kuhn,
    Sokoban { room: SokobanRoom, actions_per_turn: usize },
}

impl TaskInstance {
    pub fn kind(&self) -> EnvKind {
        match self {
            TaskInstance::TicTacToe { .. } => EnvKind::TicTacToe,
            TaskInstance::Kuhn => EnvKind::KuhnPoker,
            TaskInstance::Sokoban { .. } => EnvKind::Sokoban,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TaskInstance::TicTacToe { agent } => {
                format!("Play Tic-Tac-Toe as {agent} against a fixed opponent. X moves first.")
            }
            TaskInstance::Kuhn => "Play Kuhn Poker against a fixed opponent.".to_string(),
            TaskInstance::Sokoban { room, actions_per_turn } => format!(
                "Push every box onto a target. Up to {actions_per_turn} moves per turn.\n{}",
                room.to_text()
            ),
        }
    }
}

/// Full game state, including information hidden from the agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameState {
    TicTacToe { board: TicTacToeBoard, agent: Mark },
    Kuhn { state: KuhnState, agent_seat: u8 },
    Sokoban { room: SokobanRoom },
}

/// A fixed strategy that replies to the agent. Implementations must return a
/// legal move for the state they are given.
pub trait OpponentPolicy {
    fn respond(&self, state: &GameState, rng: &mut Rng) -> Result<Action>;
}

/// Used by single-agent tasks.
pub struct NoOpponent;

impl OpponentPolicy for NoOpponent {
    fn respond(&self, _state: &GameState, _rng: &mut Rng) -> Result<Action> {
        Err(Error::contract("single-agent task asked for an opponent move"))
    }
}

/// A running episode.
#[derive(Clone, Debug)]
pub struct Env {
    state: GameState,
    max_turns: u32,
    actions_per_turn: usize,
    deadlock_terminates: bool,
    turn: u32,
    invalid_count: u32,
    result: GameResult,
    rng: Rng,
}

impl Env {
    /// Starts an episode of `task`. If the opponent moves first its reply is
    /// applied before the first observation and returned alongside it.
    pub fn reset(
        cfg: &EnvConfig,
        task: &TaskInstance,
        seed: u64,
        opponent: &dyn OpponentPolicy,
    ) -> Result<(Env, Observation, Option<Action>)> {
        cfg.validate()?;
        if cfg.kind() != task.kind() {
            return Err(Error::config("task does not match environment config"));
        }
        let mut rng = seeds::rng(seed, &[0xE7]);
        let (state, actions_per_turn, deadlock_terminates) = match (cfg, task) {
            (EnvConfig::TicTacToe(_), TaskInstance::TicTacToe { agent }) => (
                GameState::TicTacToe {
                    board: TicTacToeBoard::new(),
                    agent: *agent,
                },
                1,
                false,
            ),
            (EnvConfig::KuhnPoker(c), TaskInstance::Kuhn) => {
                let first = rng.gen_range(0..3);
                let second = (first + rng.gen_range(1..3)) % 3;
                let agent_seat = match c.agent_seat {
                    SeatChoice::P0 => 0,
                    SeatChoice::P1 => 1,
                    SeatChoice::Random => rng.gen_range(0..2u8),
                };
                (
                    GameState::Kuhn {
                        state: KuhnState::new([Card::ALL[first], Card::ALL[second]])?,
                        agent_seat,
                    },
                    1,
                    false,
                )
            }
            (EnvConfig::Sokoban(c), TaskInstance::Sokoban { room, actions_per_turn }) => (
                GameState::Sokoban { room: room.clone() },
                *actions_per_turn,
                c.deadlock_terminates,
            ),
            _ => unreachable!("kinds checked above"),
        };
        let mut env = Env {
            state,
            max_turns: cfg.max_turns(),
            actions_per_turn,
            deadlock_terminates,
            turn: 0,
            invalid_count: 0,
            result: GameResult::Ongoing,
            rng,
        };
        let opening = if env.opponent_to_move() {
            let reply = opponent.respond(&env.state, &mut env.rng)?;
            env.apply_opponent(&reply)?;
            Some(reply)
        } else {
            None
        };
        let obs = env.observation();
        Ok((env, obs, opening))
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn kind(&self) -> EnvKind {
        match self.state {
            GameState::TicTacToe { .. } => EnvKind::TicTacToe,
            GameState::Kuhn { .. } => EnvKind::KuhnPoker,
            GameState::Sokoban { .. } => EnvKind::Sokoban,
        }
    }

    pub fn invalid_count(&self) -> u32 {
        self.invalid_count
    }

    pub fn turns_taken(&self) -> u32 {
        self.turn
    }

    pub fn result(&self) -> GameResult {
        self.result
    }

    pub fn is_terminal(&self) -> bool {
        self.result.is_terminal()
    }

    pub fn actions_per_turn(&self) -> usize {
        self.actions_per_turn
    }

    /// Net chips for the agent once a Kuhn hand is over.
    pub fn kuhn_chips(&self) -> Option<i32> {
        match &self.state {
            GameState::Kuhn { state, agent_seat } if state.is_terminal() => state.payoff(*agent_seat).ok(),
            _ => None,
        }
    }

    fn opponent_to_move(&self) -> bool {
        match &self.state {
            GameState::TicTacToe { board, agent } => !board.is_terminal() && board.to_move() != *agent,
            GameState::Kuhn { state, agent_seat } => !state.is_terminal() && state.to_act() != *agent_seat,
            GameState::Sokoban { .. } => false,
        }
    }

    pub fn admissible(&self) -> Vec<Action> {
        if self.is_terminal() {
            return Vec::new();
        }
        match &self.state {
            GameState::TicTacToe { board, .. } => board.empty_cells().into_iter().map(Action::place_index).collect(),
            GameState::Kuhn { .. } => KuhnMove::ALL.iter().map(|m| Action::Kuhn(*m)).collect(),
            // Single moves that are not blocked; longer turns chain these.
            GameState::Sokoban { room } => Direction::ALL
                .iter()
                .filter(|d| room.try_move(**d).is_some())
                .map(|d| Action::Moves(vec![*d]))
                .collect(),
        }
    }

    pub fn snapshot(&self) -> StateSnapshot {
        match &self.state {
            GameState::TicTacToe { board, agent } => StateSnapshot::TicTacToe {
                board: *board,
                agent: *agent,
            },
            GameState::Kuhn { state, agent_seat } => {
                let showdown = state.is_terminal() && kuhn::is_showdown(state.history());
                StateSnapshot::Kuhn(KuhnView {
                    seat: *agent_seat,
                    own_card: state.cards()[*agent_seat as usize],
                    history: state.history().to_vec(),
                    opponent_card: showdown.then(|| state.cards()[1 - *agent_seat as usize]),
                    contributions: state.contributions(),
                })
            }
            GameState::Sokoban { room } => StateSnapshot::Sokoban(room.clone()),
        }
    }

    pub fn observation(&self) -> Observation {
        Observation::new(self.snapshot(), self.turn + 1, self.admissible())
    }

    /// Applies the agent's action, then the opponent's reply.
    pub fn step(&mut self, action: &Action, opponent: &dyn OpponentPolicy) -> Result<StepOutcome> {
        if self.is_terminal() {
            return Err(Error::contract("step called on a finished episode"));
        }
        self.turn += 1;
        let applied = self.apply_agent(action)?;
        let mut opponent_action = None;
        if applied {
            self.settle();
            if !self.is_terminal() && self.opponent_to_move() {
                let reply = opponent.respond(&self.state, &mut self.rng)?;
                self.apply_opponent(&reply)?;
                opponent_action = Some(reply);
                self.settle();
            }
        } else {
            self.invalid_count += 1;
        }
        if !self.is_terminal() && self.turn >= self.max_turns {
            self.result = GameResult::Timeout;
        }
        Ok(StepOutcome {
            next_obs: self.observation(),
            terminal: self.is_terminal(),
            result: self.result,
            invalid: !applied,
            opponent_action,
        })
    }

    /// Books an invalid turn without an action, used when a text policy's reply
    /// cannot be parsed and a substitute is played instead.
    pub fn record_invalid(&mut self) {
        self.invalid_count += 1;
    }

    fn apply_agent(&mut self, action: &Action) -> Result<bool> {
        match (&mut self.state, action) {
            (GameState::TicTacToe { board, .. }, Action::Place { row, col }) => {
                match tictactoe::cell_index(*row, *col).and_then(|i| board.play(i)) {
                    Some(next) => {
                        *board = next;
                        Ok(true)
                    }
                    None => Ok(false),
                }
            }
            (GameState::Kuhn { state, .. }, Action::Kuhn(m)) => {
                *state = state.apply(*m)?;
                Ok(true)
            }
            (GameState::Sokoban { room }, Action::Moves(moves)) => {
                if moves.is_empty() || moves.len() > self.actions_per_turn {
                    return Ok(false);
                }
                let mut next = room.clone();
                for d in moves {
                    match next.try_move(*d) {
                        Some((r, _)) => next = r,
                        None => return Ok(false),
                    }
                    if next.is_solved() {
                        break;
                    }
                }
                *room = next;
                Ok(true)
            }
            _ => Ok(false),
        }
    }

    fn apply_opponent(&mut self, action: &Action) -> Result<()> {
        match (&mut self.state, action) {
            (GameState::TicTacToe { board, .. }, Action::Place { row, col }) => {
                *board = tictactoe::cell_index(*row, *col)
                    .and_then(|i| board.play(i))
                    .ok_or_else(|| Error::contract(format!("opponent played illegal move {action}")))?;
                Ok(())
            }
            (GameState::Kuhn { state, .. }, Action::Kuhn(m)) => {
                *state = state.apply(*m)?;
                Ok(())
            }
            _ => Err(Error::contract(format!("opponent action {action} does not fit the game"))),
        }
    }

    fn settle(&mut self) {
        self.result = match &self.state {
            GameState::TicTacToe { board, agent } => match board.winner() {
                Some(m) if m == *agent => GameResult::Win,
                Some(_) => GameResult::Loss,
                None if board.is_full() => GameResult::Draw,
                None => GameResult::Ongoing,
            },
            GameState::Kuhn { state, agent_seat } => {
                if state.is_terminal() {
                    match state.payoff(*agent_seat) {
                        Ok(p) if p > 0 => GameResult::Win,
                        Ok(_) => GameResult::Loss,
                        Err(_) => GameResult::Ongoing,
                    }
                } else {
                    GameResult::Ongoing
                }
            }
            GameState::Sokoban { room } => {
                if room.is_solved() {
                    GameResult::Win
                } else if self.deadlock_terminates && room.has_deadlock() {
                    GameResult::Loss
                } else {
                    GameResult::Ongoing
                }
            }
        };
    }
}
