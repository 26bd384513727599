//! Policies: a trainable linear softmax over handcrafted features and a
//! remote text-policy adapter.

pub mod features;
pub mod remote;

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng as _;

use crate::env::{Action, EnvKind, StateSnapshot};
use crate::error::{Error, Result};
use crate::rollout::PolicyContext;
use crate::seeds::Rng;

pub use features::{feature_dim, ChoicePoint, MemorySummary};
pub use remote::{RemoteClient, RemoteConfig, RemotePolicy};

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDecision {
    pub action: Action,
    /// Exact log-probability of `action`; absent for remote policies.
    pub log_prob: Option<f64>,
    pub raw_text: Option<String>,
    pub response_length: Option<usize>,
    /// The reply could not be parsed and `action` is a random substitute.
    pub invalid: bool,
}

impl ActionDecision {
    pub fn plain(action: Action) -> Self {
        Self {
            action,
            log_prob: None,
            raw_text: None,
            response_length: None,
            invalid: false,
        }
    }
}

pub trait Policy: Send + Sync {
    fn decide(&self, ctx: &PolicyContext<'_>, rng: &mut Rng) -> Result<ActionDecision>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams {
    pub env_kind: EnvKind,
    pub theta: Vec<f64>,
}

const CHECKPOINT_HEADER: &str = "metaplay-policy v1";

impl PolicyParams {
    pub fn zeros(env_kind: EnvKind) -> Self {
        Self {
            env_kind,
            theta: vec![0.0; feature_dim(env_kind)],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.theta.len()
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{CHECKPOINT_HEADER}\nenv_kind {}\nfeature_dim {}\n", self.env_kind, self.theta.len());
        for v in &self.theta {
            let _ = writeln!(out, "{v:?}");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(CHECKPOINT_HEADER) {
            return Err(Error::Parse("not a policy checkpoint".into()));
        }
        let field = |line: Option<&str>, name: &str| -> Result<String> {
            line.and_then(|l| l.strip_prefix(name))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("checkpoint missing {name}")))
        };
        let env_kind: EnvKind = field(lines.next(), "env_kind")?.parse()?;
        let dim: usize = field(lines.next(), "feature_dim")?
            .parse()
            .map_err(|_| Error::Parse("bad feature_dim".into()))?;
        let theta = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad weight {l:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if theta.len() != dim || dim != feature_dim(env_kind) {
            return Err(Error::Parse(format!(
                "checkpoint has {} weights, header says {dim}, {env_kind} expects {}",
                theta.len(),
                feature_dim(env_kind)
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("checkpoint holds non-finite weights".into()));
        }
        Ok(Self { env_kind, theta })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

/// `params + lr * gradient`, leaving the input untouched.
pub fn apply_update(params: &PolicyParams, gradient: &[f64], learning_rate: f64) -> Result<PolicyParams> {
    if gradient.len() != params.theta.len() {
        return Err(Error::contract(format!(
            "gradient of length {} for {} weights",
            gradient.len(),
            params.theta.len()
        )));
    }
    if let Some(i) = gradient.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("gradient entry {i} is {}", gradient[i])));
    }
    let theta: Vec<f64> = params.theta.iter().zip(gradient).map(|(t, g)| t + learning_rate * g).collect();
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("update produced non-finite weights".into()));
    }
    Ok(PolicyParams {
        env_kind: params.env_kind,
        theta,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Log-probabilities of a softmax over `logits`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
    let lse = max + sum.ln();
    logits.iter().map(|l| l - lse).collect()
}

/// Linear softmax policy; probabilities are `softmax(theta . phi(ctx, a))`
/// over the admissible actions.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSoftmaxPolicy {
    pub params: PolicyParams,
}

/// One sampled or replayed sub-decision.
struct Choice {
    point: ChoicePoint,
    log_probs: Vec<f64>,
    index: usize,
}

impl LinearSoftmaxPolicy {
    pub fn new(params: PolicyParams) -> Self {
        Self { params }
    }

    pub fn zeros(kind: EnvKind) -> Self {
        Self::new(PolicyParams::zeros(kind))
    }

    fn log_probs(&self, point: &ChoicePoint) -> Vec<f64> {
        let logits: Vec<f64> = point.features.iter().map(|f| dot(&self.params.theta, f)).collect();
        log_softmax(&logits)
    }

    /// Walks the choice points of one decision. `select` picks an index at
    /// each point; Sokoban decisions chain up to `actions_per_turn` moves.
    fn walk(
        &self,
        ctx: &PolicyContext<'_>,
        mut select: impl FnMut(usize, &ChoicePoint, &[f64]) -> Result<usize>,
    ) -> Result<(Action, Vec<Choice>)> {
        if ctx.task.kind() != self.params.env_kind {
            return Err(Error::contract(format!(
                "{} policy asked to act in {}",
                self.params.env_kind,
                ctx.task.kind()
            )));
        }
        let mem = MemorySummary::from_memory(ctx.memory);
        match &ctx.current.structured {
            StateSnapshot::Sokoban(room) => {
                let per_turn = match ctx.task {
                    crate::env::TaskInstance::Sokoban { actions_per_turn, .. } => *actions_per_turn,
                    _ => 1,
                };
                let mut room = room.clone();
                let mut moves = Vec::new();
                let mut choices = Vec::new();
                for k in 0..per_turn {
                    let point = features::sokoban_choice(&room, moves.last().copied(), &mem);
                    if point.actions.is_empty() {
                        break;
                    }
                    let log_probs = self.log_probs(&point);
                    let index = select(k, &point, &log_probs)?;
                    let Action::Moves(m) = &point.actions[index] else { unreachable!("single moves") };
                    let d = m[0];
                    moves.push(d);
                    choices.push(Choice { point, log_probs, index });
                    room = room.try_move(d).expect("candidate moves are unblocked").0;
                    if room.is_solved() {
                        break;
                    }
                }
                if moves.is_empty() {
                    return Err(Error::contract("no unblocked move available"));
                }
                Ok((Action::Moves(moves), choices))
            }
            _ => {
                if ctx.admissible.is_empty() {
                    return Err(Error::contract("no admissible action"));
                }
                let point = features::board_choice(ctx, &mem)?;
                let log_probs = self.log_probs(&point);
                let index = select(0, &point, &log_probs)?;
                let action = point.actions[index].clone();
                Ok((action, vec![Choice { point, log_probs, index }]))
            }
        }
    }

    /// Replays `action` through the choice points.
    fn replay(&self, ctx: &PolicyContext<'_>, action: &Action) -> Result<Vec<Choice>> {
        let target: Vec<Action> = match action {
            Action::Moves(ms) => ms.iter().map(|d| Action::Moves(vec![*d])).collect(),
            a => vec![a.clone()],
        };
        let (produced, choices) = self.walk(ctx, |k, point, _| {
            target
                .get(k)
                .and_then(|t| point.actions.iter().position(|a| a == t))
                .ok_or_else(|| Error::contract(format!("action {action} is not admissible here")))
        })?;
        if &produced != action {
            return Err(Error::contract(format!("action {action} is not reachable (policy stops at {produced})")));
        }
        Ok(choices)
    }

    /// Admissible actions of the first choice point with their probabilities.
    pub fn action_probs(&self, ctx: &PolicyContext<'_>) -> Result<Vec<(Action, f64)>> {
        let (_, choices) = self.walk(ctx, |_, _, _| Ok(0))?;
        let first = &choices[0];
        Ok(first
            .point
            .actions
            .iter()
            .cloned()
            .zip(first.log_probs.iter().map(|l| l.exp()))
            .collect())
    }

    /// Feature vectors of the first choice point.
    pub fn featurize(&self, ctx: &PolicyContext<'_>) -> Result<ChoicePoint> {
        let (_, mut choices) = self.walk(ctx, |_, _, _| Ok(0))?;
        Ok(choices.swap_remove(0).point)
    }

    pub fn log_prob(&self, ctx: &PolicyContext<'_>, action: &Action) -> Result<f64> {
        Ok(self.replay(ctx, action)?.iter().map(|c| c.log_probs[c.index]).sum())
    }

    /// `log pi(action | ctx)` and its exact gradient in theta.
    pub fn logprob_grad(&self, ctx: &PolicyContext<'_>, action: &Action) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.params.theta.len()];
        let mut lp = 0.0;
        for c in self.replay(ctx, action)? {
            lp += c.log_probs[c.index];
            for (g, v) in grad.iter_mut().zip(&c.point.features[c.index]) {
                *g += v;
            }
            for (f, l) in c.point.features.iter().zip(&c.log_probs) {
                let p = l.exp();
                for (g, v) in grad.iter_mut().zip(f) {
                    *g -= p * v;
                }
            }
        }
        Ok((lp, grad))
    }
}

impl Policy for LinearSoftmaxPolicy {
    fn decide(&self, ctx: &PolicyContext<'_>, rng: &mut Rng) -> Result<ActionDecision> {
        let (action, choices) = self.walk(ctx, |_, _, log_probs| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (i, l) in log_probs.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    return Ok(i);
                }
            }
            Ok(log_probs.len() - 1)
        })?;
        let log_prob = choices.iter().map(|c| c.log_probs[c.index]).sum();
        Ok(ActionDecision {
            action,
            log_prob: Some(log_prob),
            raw_text: None,
            response_length: None,
            invalid: false,
        })
    }
}
