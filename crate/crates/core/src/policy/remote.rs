//! Chat-completion text policy: fills the play prompt, posts it, and parses
//! the `<action>` tag out of the reply.

use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use rand::seq::SliceRandom;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::env::sokoban::Direction;
use crate::env::{Action, EnvKind, KuhnMove, TaskInstance};
use crate::error::{Error, Result};
use crate::prompts::{render_play, PlayPromptParts};
use crate::rollout::PolicyContext;
use crate::seeds::Rng;

use super::{ActionDecision, Policy};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    pub max_response_length: usize,
    /// Name of the environment variable holding the bearer token.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub max_prompt_chars: Option<usize>,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            temperature: 0.7,
            top_p: 0.8,
            top_k: 20,
            max_response_length: 4096,
            auth_env: "METAPLAY_API_KEY".into(),
            timeout_secs: 120,
            max_retries: 3,
            max_in_flight: 4,
            max_prompt_chars: None,
        }
    }
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_url.is_empty() || self.model.is_empty() {
            return Err(Error::config("remote endpoint needs base_url and model"));
        }
        if self.max_in_flight == 0 || self.max_response_length == 0 {
            return Err(Error::config("max_in_flight and max_response_length must be positive"));
        }
        Ok(())
    }
}

/// A completed request: reply text and its length in tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub text: String,
    pub length: usize,
}

pub struct RemoteClient {
    cfg: RemoteConfig,
    agent: ureq::Agent,
    token: Option<String>,
    in_flight: Mutex<usize>,
    slot_freed: Condvar,
}

impl RemoteClient {
    pub fn new(cfg: RemoteConfig) -> Result<Self> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(cfg.timeout_secs)))
            .build()
            .into();
        let token = std::env::var(&cfg.auth_env).ok();
        Ok(Self {
            cfg,
            agent,
            token,
            in_flight: Mutex::new(0),
            slot_freed: Condvar::new(),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cfg.max_in_flight {
            n = self.slot_freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
    }

    fn release(&self) {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.slot_freed.notify_one();
    }

    fn post_once(&self, body: &Value) -> std::result::Result<Value, (bool, String)> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        match req.send_json(body) {
            Ok(mut resp) => resp
                .body_mut()
                .read_json::<Value>()
                .map_err(|e| (true, format!("unreadable response: {e}"))),
            Err(ureq::Error::StatusCode(code)) => Err((code == 429 || code >= 500, format!("HTTP status {code}"))),
            Err(e) => Err((true, e.to_string())),
        }
    }

    /// Sends one user message, retrying transient failures.
    pub fn complete_with_length(&self, prompt: &str) -> Result<Completion> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "top_k": self.cfg.top_k,
            "max_tokens": self.cfg.max_response_length,
        });
        self.acquire();
        let mut last = String::new();
        let mut result = None;
        for attempt in 0..=self.cfg.max_retries {
            match self.post_once(&body) {
                Ok(v) => {
                    result = Some(v);
                    break;
                }
                Err((retriable, msg)) => {
                    log::warn!("remote request attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                    if !retriable {
                        break;
                    }
                    std::thread::sleep(Duration::from_millis(250 << attempt.min(4)));
                }
            }
        }
        self.release();
        let v = result.ok_or(Error::Transport(last))?;
        let text = v["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| Error::Transport("response has no choices[0].message.content".into()))?
            .to_string();
        let length = v["usage"]["completion_tokens"]
            .as_u64()
            .map_or_else(|| text.chars().count().div_ceil(4), |n| n as usize);
        Ok(Completion { text, length })
    }

    pub fn complete(&self, prompt: &str) -> Result<String> {
        Ok(self.complete_with_length(prompt)?.text)
    }
}

/// Content of the last `<tag>...</tag>` pair.
pub fn extract_tag(text: &str, tag: &str) -> Option<String> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let end = text.rfind(&close)?;
    let start = text[..end].rfind(&open)? + open.len();
    Some(text[start..end].to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseQuality {
    Strict,
    Lenient,
}

fn coord_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(\s*([0-9]+)\s*,\s*([0-9]+)\s*\)").expect("static regex"))
}

fn bare_coord_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\(?\s*([0-9]+)\s*,\s*([0-9]+)\s*\)?$").expect("static regex"))
}

fn keyword_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(PASS|BET)\b").expect("static regex"))
}

fn direction_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(up|down|left|right)\b").expect("static regex"))
}

fn place(row: &str, col: &str) -> Option<Action> {
    let row: u8 = row.parse().ok()?;
    let col: u8 = col.parse().ok()?;
    ((1..=3).contains(&row) && (1..=3).contains(&col)).then_some(Action::Place { row, col })
}

fn strict(content: &str, kind: EnvKind, per_turn: usize) -> Option<Action> {
    let content = content.trim();
    match kind {
        EnvKind::TicTacToe => {
            let c = bare_coord_re().captures(content)?;
            place(&c[1], &c[2])
        }
        EnvKind::KuhnPoker => match content.to_ascii_uppercase().as_str() {
            "PASS" => Some(Action::Kuhn(KuhnMove::Pass)),
            "BET" => Some(Action::Kuhn(KuhnMove::Bet)),
            _ => None,
        },
        EnvKind::Sokoban => {
            let moves: Option<Vec<Direction>> = content
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(Direction::parse)
                .collect();
            moves.filter(|m| !m.is_empty() && m.len() <= per_turn).map(Action::Moves)
        }
    }
}

fn lenient(text: &str, kind: EnvKind, per_turn: usize) -> Option<Action> {
    match kind {
        EnvKind::TicTacToe => coord_re().captures_iter(text).filter_map(|c| place(&c[1], &c[2])).last(),
        EnvKind::KuhnPoker => keyword_re().captures_iter(text).last().map(|c| {
            Action::Kuhn(if &c[1] == "BET" { KuhnMove::Bet } else { KuhnMove::Pass })
        }),
        EnvKind::Sokoban => {
            let all: Vec<Direction> = direction_re()
                .captures_iter(text)
                .filter_map(|c| Direction::parse(&c[1].to_ascii_lowercase()))
                .collect();
            let tail = &all[all.len().saturating_sub(per_turn.max(1))..];
            (!tail.is_empty()).then(|| Action::Moves(tail.to_vec()))
        }
    }
}

/// Exact tag first, then the last coordinate / keyword / directions in the
/// whole reply. Total over arbitrary input.
pub fn parse_action(text: &str, kind: EnvKind, actions_per_turn: usize) -> Option<(Action, ParseQuality)> {
    if let Some(a) = extract_tag(text, "action").and_then(|c| strict(&c, kind, actions_per_turn)) {
        return Some((a, ParseQuality::Strict));
    }
    lenient(text, kind, actions_per_turn).map(|a| (a, ParseQuality::Lenient))
}

pub fn parse_action_bytes(bytes: &[u8], kind: EnvKind, actions_per_turn: usize) -> Option<(Action, ParseQuality)> {
    parse_action(&String::from_utf8_lossy(bytes), kind, actions_per_turn)
}

fn actions_per_turn(task: &TaskInstance) -> usize {
    match task {
        TaskInstance::Sokoban { actions_per_turn, .. } => *actions_per_turn,
        _ => 1,
    }
}

/// Maps a reply to a decision: the parsed action, or a uniformly random
/// admissible substitute flagged invalid.
pub fn decision_from_reply(text: &str, length: usize, ctx: &PolicyContext<'_>, rng: &mut Rng) -> Result<ActionDecision> {
    let per_turn = actions_per_turn(ctx.task);
    let parsed = parse_action(text, ctx.task.kind(), per_turn).map(|(a, _)| a);
    let (action, invalid) = match parsed {
        Some(a) => (a, false),
        None => {
            let sub = ctx
                .admissible
                .choose(rng)
                .cloned()
                .ok_or_else(|| Error::contract("no admissible action to substitute"))?;
            (sub, true)
        }
    };
    Ok(ActionDecision {
        action,
        log_prob: None,
        raw_text: Some(text.to_string()),
        response_length: Some(length),
        invalid,
    })
}

/// Prompt for the current decision.
pub fn render_context(ctx: &PolicyContext<'_>, max_chars: Option<usize>) -> Result<String> {
    let mut trajectory: Vec<String> = ctx
        .past_steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("Step {}: {}", i + 1, s.action))
        .collect();
    if !ctx.past_steps.is_empty() {
        trajectory.push(format!("Current observation:\n{}", ctx.current.text));
    }
    let options: Vec<String> = ctx.admissible.iter().map(|a| a.to_string()).collect();
    trajectory.push(format!("Admissible actions: {}", options.join(" ")));
    let parts = PlayPromptParts {
        reflections: ctx.memory.iter().filter(|r| !r.text.is_empty()).map(|r| r.text.clone()).collect(),
        trajectory,
    };
    render_play(ctx.task, ctx.initial_obs(), &parts, max_chars)
}

/// Inference-only policy backed by a [`RemoteClient`].
pub struct RemotePolicy {
    pub client: std::sync::Arc<RemoteClient>,
}

impl Policy for RemotePolicy {
    fn decide(&self, ctx: &PolicyContext<'_>, rng: &mut Rng) -> Result<ActionDecision> {
        let prompt = render_context(ctx, self.client.cfg.max_prompt_chars)?;
        let reply = self.client.complete_with_length(&prompt)?;
        decision_from_reply(&reply.text, reply.length, ctx, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tagged_replies_parse_exactly() {
        assert_eq!(
            parse_action("thinking...<action>(2,2)</action>", EnvKind::TicTacToe, 1),
            Some((Action::Place { row: 2, col: 2 }, ParseQuality::Strict))
        );
        assert_eq!(
            parse_action("I will BET. <action>BET</action>", EnvKind::KuhnPoker, 1),
            Some((Action::Kuhn(KuhnMove::Bet), ParseQuality::Strict))
        );
        assert_eq!(
            parse_action("<action>up, left</action>", EnvKind::Sokoban, 3),
            Some((Action::Moves(vec![Direction::Up, Direction::Left]), ParseQuality::Strict))
        );
    }

    #[test]
    fn lenient_fallbacks() {
        assert_eq!(
            parse_action("No tag here, but I pick (1, 3)", EnvKind::TicTacToe, 1),
            Some((Action::Place { row: 1, col: 3 }, ParseQuality::Lenient))
        );
        assert_eq!(
            parse_action("maybe PASS, no, BET", EnvKind::KuhnPoker, 1),
            Some((Action::Kuhn(KuhnMove::Bet), ParseQuality::Lenient))
        );
        assert_eq!(parse_action("(4,4)", EnvKind::TicTacToe, 1), None);
        assert_eq!(parse_action("<action>", EnvKind::KuhnPoker, 1), None);
        assert_eq!(
            parse_action("go Up then DOWN then left then right", EnvKind::Sokoban, 2),
            Some((Action::Moves(vec![Direction::Left, Direction::Right]), ParseQuality::Lenient))
        );
    }

    #[test]
    fn extract_tag_takes_the_last_pair() {
        assert_eq!(extract_tag("<remark>a</remark> <remark>b</remark>", "remark").as_deref(), Some("b"));
        assert_eq!(extract_tag("</remark><remark>", "remark"), None);
    }

    proptest! {
        #[test]
        fn parsing_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            for kind in [EnvKind::TicTacToe, EnvKind::KuhnPoker, EnvKind::Sokoban] {
                let _ = parse_action_bytes(&bytes, kind, 3);
            }
        }

        #[test]
        fn parsing_never_panics_on_tag_soup(s in "[<>/a-z(),0-9 A-Z]{0,80}") {
            for kind in [EnvKind::TicTacToe, EnvKind::KuhnPoker, EnvKind::Sokoban] {
                let _ = parse_action(&s, kind, 3);
            }
        }
    }
}
