//! Prompt templates for text policies, with `{placeholder}` substitution.

use std::sync::OnceLock;

use regex::Regex;

use crate::env::{EnvKind, Observation, StateSnapshot, TaskInstance};
use crate::error::{Error, Result};

pub const TICTACTOE_PLAY: &str = include_str!("../assets/prompts/tictactoe_play.txt");
pub const KUHN_PLAY: &str = include_str!("../assets/prompts/kuhn_play.txt");
pub const SOKOBAN_PLAY: &str = include_str!("../assets/prompts/sokoban_play.txt");
pub const REFLECT: &str = include_str!("../assets/prompts/reflect.txt");

pub fn play_template(kind: EnvKind) -> &'static str {
    match kind {
        EnvKind::TicTacToe => TICTACTOE_PLAY,
        EnvKind::KuhnPoker => KUHN_PLAY,
        EnvKind::Sokoban => SOKOBAN_PLAY,
    }
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").expect("static regex"))
}

/// Substitutes every `{name}` in `template`. Missing values are an error so a
/// template change cannot silently leak raw placeholders into a request.
pub fn fill(template: &str, vars: &[(&str, String)]) -> Result<String> {
    let mut missing = Vec::new();
    let out = placeholder_re().replace_all(template, |caps: &regex::Captures| {
        let name = &caps[1];
        match vars.iter().find(|(k, _)| *k == name) {
            Some((_, v)) => v.clone(),
            None => {
                missing.push(name.to_string());
                caps[0].to_string()
            }
        }
    });
    if missing.is_empty() {
        Ok(out.into_owned())
    } else {
        Err(Error::contract(format!("unfilled prompt placeholders: {}", missing.join(", "))))
    }
}

/// Text pieces a play prompt is assembled from.
#[derive(Clone, Debug, Default)]
pub struct PlayPromptParts {
    pub reflections: Vec<String>,
    pub trajectory: Vec<String>,
}

fn reflections_block(reflections: &[String]) -> String {
    if reflections.is_empty() {
        return String::new();
    }
    let mut out = String::from("\n\n# Reflections from past attempts\n");
    for r in reflections {
        out.push_str(r);
        out.push('\n');
    }
    out
}

fn trajectory_block(lines: &[String]) -> String {
    if lines.is_empty() {
        String::new()
    } else {
        format!("\n\n# Current attempt\n{}", lines.join("\n"))
    }
}

/// Renders the play prompt for `task`. If `max_chars` is set, the oldest
/// reflections are dropped until the prompt fits.
pub fn render_play(
    task: &TaskInstance,
    initial: &Observation,
    parts: &PlayPromptParts,
    max_chars: Option<usize>,
) -> Result<String> {
    let mut reflections: &[String] = &parts.reflections;
    loop {
        let prompt = render_play_once(task, initial, reflections, &parts.trajectory)?;
        match max_chars {
            Some(limit) if prompt.chars().count() > limit && !reflections.is_empty() => {
                log::warn!(
                    "prompt of {} chars exceeds budget {limit}; dropping oldest reflection",
                    prompt.chars().count()
                );
                reflections = &reflections[1..];
            }
            _ => return Ok(prompt),
        }
    }
}

fn render_play_once(task: &TaskInstance, initial: &Observation, reflections: &[String], trajectory: &[String]) -> Result<String> {
    let mut vars = vec![
        ("init_observation", initial.text.clone()),
        ("past_trajectories_reflections", reflections_block(reflections)),
        ("current_trajectory", trajectory_block(trajectory)),
    ];
    match (task, &initial.structured) {
        (TaskInstance::TicTacToe { agent }, _) => {
            vars.push(("board_size", "3".to_string()));
            vars.push(("player_symbol", agent.to_string()));
            vars.push(("opponent_symbol", agent.other().to_string()));
        }
        (TaskInstance::Kuhn, StateSnapshot::Kuhn(view)) => {
            vars.push(("agent_player_id", view.seat.to_string()));
            vars.push(("opponent_player_id", (1 - view.seat).to_string()));
        }
        (TaskInstance::Sokoban { actions_per_turn, .. }, _) => {
            vars.push(("num_actions_per_turn", actions_per_turn.to_string()));
        }
        _ => return Err(Error::contract("observation does not match task")),
    }
    fill(play_template(task.kind()), &vars)
}

pub fn render_reflect(task: &TaskInstance, initial: &Observation, trajectory: &[String], succeeded: bool) -> Result<String> {
    let game_name = match task.kind() {
        EnvKind::TicTacToe => "Tic-Tac-Toe",
        EnvKind::KuhnPoker => "Kuhn Poker",
        EnvKind::Sokoban => "Sokoban",
    };
    let outcome = if succeeded {
        "The task was successfully completed."
    } else {
        "The task is NOT successfully completed."
    };
    fill(
        REFLECT,
        &[
            ("game_name", game_name.to_string()),
            ("init_observation", format!("{}\n{}", task.describe(), initial.text)),
            ("current_trajectory", trajectory.join("\n")),
            ("outcome_statement", outcome.to_string()),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Env, EnvConfig, NoOpponent};

    fn ttt_initial() -> (TaskInstance, Observation) {
        let cfg = EnvConfig::default_for(EnvKind::TicTacToe);
        let task = cfg.instantiate(0).unwrap();
        let (_, obs, _) = Env::reset(&cfg, &task, 0, &NoOpponent).unwrap();
        (task, obs)
    }

    #[test]
    fn fill_reports_missing_placeholders() {
        assert_eq!(fill("a {x} b", &[("x", "1".into())]).unwrap(), "a 1 b");
        assert!(matches!(fill("a {y}", &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn ttt_prompt_has_cell_states_section() {
        let (task, obs) = ttt_initial();
        let p = render_play(&task, &obs, &PlayPromptParts::default(), None).unwrap();
        assert!(p.contains("# Cell States"));
        assert!(p.contains("You play as X, opponent plays as O"));
        assert!(!p.contains('{'));
    }

    #[test]
    fn truncation_drops_oldest_reflection_first() {
        let (task, obs) = ttt_initial();
        let parts = PlayPromptParts {
            reflections: vec!["OLDEST ".repeat(50), "NEWEST".into()],
            trajectory: vec![],
        };
        let full = render_play(&task, &obs, &parts, None).unwrap();
        let cut = render_play(&task, &obs, &parts, Some(full.chars().count() - 10)).unwrap();
        assert!(!cut.contains("OLDEST"));
        assert!(cut.contains("NEWEST"));
    }

    #[test]
    fn reflect_prompt_states_outcome() {
        let (task, obs) = ttt_initial();
        let p = render_reflect(&task, &obs, &["(2,2)".into()], false).unwrap();
        assert!(p.contains("NOT successfully completed"));
        assert!(p.contains("<remark>"));
    }
}
