//! Vanilla counterfactual regret minimization on Kuhn Poker, exact best
//! responses and exploitability.

use std::fmt::Write as _;
use std::path::Path;

use crate::env::kuhn::{all_deals, kuhn_payoff, Card, InfoSet, KuhnMove};
use crate::error::{Error, Result};

use super::kuhn::KuhnStrategy;

/// What a best responder maximises.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Utility {
    /// Net chips.
    Chips,
    /// Probability of winning the hand.
    Win,
}

impl Utility {
    fn of(self, chips: i32) -> f64 {
        match self {
            Utility::Chips => f64::from(chips),
            Utility::Win => f64::from(u8::from(chips > 0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfrStrategyProfile {
    /// `[p(PASS), p(BET)]` indexed by [`InfoSet::index`].
    pub probs: [[f64; 2]; 12],
    pub iterations_trained: u64,
    pub exploitability: f64,
}

impl KuhnStrategy for CfrStrategyProfile {
    fn action_probs(&self, set: &InfoSet) -> [f64; 2] {
        self.probs[set.index()]
    }
}

impl CfrStrategyProfile {
    pub fn from_strategy(strategy: &dyn KuhnStrategy) -> Self {
        let mut probs = [[0.5; 2]; 12];
        for set in InfoSet::all() {
            probs[set.index()] = strategy.action_probs(&set);
        }
        let mut out = Self {
            probs,
            iterations_trained: 0,
            exploitability: 0.0,
        };
        out.exploitability = exploitability(&out);
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# iterations {}", self.iterations_trained);
        let _ = writeln!(out, "# exploitability {:e}", self.exploitability);
        for set in InfoSet::all() {
            let [p, b] = self.probs[set.index()];
            let _ = writeln!(out, "{} {p} {b}", set.key());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut probs = [[f64::NAN; 2]; 12];
        let mut iterations_trained = 0;
        let mut seen = [false; 12];
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = line.strip_prefix('#') {
                let mut parts = rest.split_whitespace();
                if parts.next() == Some("iterations") {
                    iterations_trained = parts
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| Error::Parse("bad iterations header".into()))?;
                }
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("expected `KEY p_pass p_bet`, got {line:?}")));
            }
            let set = InfoSet::from_key(parts[0])?;
            let p: f64 = parts[1].parse().map_err(|_| Error::Parse(format!("bad probability in {line:?}")))?;
            let b: f64 = parts[2].parse().map_err(|_| Error::Parse(format!("bad probability in {line:?}")))?;
            if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&b) || (p + b - 1.0).abs() > 1e-9 {
                return Err(Error::Parse(format!("distribution at {} does not sum to 1", parts[0])));
            }
            probs[set.index()] = [p, b];
            seen[set.index()] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Parse("profile must cover all 12 information sets".into()));
        }
        let mut out = Self {
            probs,
            iterations_trained,
            exploitability: 0.0,
        };
        out.exploitability = exploitability(&out);
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn regret_matching(regret: &[f64; 2]) -> [f64; 2] {
    let pos = [regret[0].max(0.0), regret[1].max(0.0)];
    let total = pos[0] + pos[1];
    if total > 0.0 {
        [pos[0] / total, pos[1] / total]
    } else {
        [0.5, 0.5]
    }
}

struct CfrState {
    regret: [[f64; 2]; 12],
    strategy_sum: [[f64; 2]; 12],
}

impl CfrState {
    /// Returns player 0's expected payoff under `current` below `history`.
    fn walk(
        &mut self,
        current: &[[f64; 2]; 12],
        cards: [Card; 2],
        history: &mut Vec<KuhnMove>,
        reach: [f64; 2],
    ) -> f64 {
        if let Ok(payoff) = kuhn_payoff(cards, history) {
            return f64::from(payoff);
        }
        let player = history.len() % 2;
        let set = InfoSet {
            card: cards[player],
            history: history.clone(),
        };
        let idx = set.index();
        let sigma = current[idx];
        let mut values = [0.0; 2];
        for a in KuhnMove::ALL {
            let mut next_reach = reach;
            next_reach[player] *= sigma[a.index()];
            history.push(a);
            values[a.index()] = self.walk(current, cards, history, next_reach);
            history.pop();
        }
        let node = sigma[0] * values[0] + sigma[1] * values[1];
        let sign = if player == 0 { 1.0 } else { -1.0 };
        for a in 0..2 {
            self.regret[idx][a] += reach[1 - player] * sign * (values[a] - node);
            self.strategy_sum[idx][a] += reach[player] * sigma[a];
        }
        node
    }

    fn average(&self) -> [[f64; 2]; 12] {
        let mut out = [[0.5; 2]; 12];
        for (o, s) in out.iter_mut().zip(&self.strategy_sum) {
            let total = s[0] + s[1];
            if total > 0.0 {
                *o = [s[0] / total, s[1] / total];
            }
        }
        out
    }
}

/// Trains for `iterations` full-tree passes and returns the average strategy,
/// together with its exploitability at each requested checkpoint.
pub fn cfr_train_with_checkpoints(iterations: u64, checkpoints: &[u64]) -> Result<(CfrStrategyProfile, Vec<(u64, f64)>)> {
    if iterations == 0 {
        return Err(Error::config("cfr iterations must be at least 1"));
    }
    let mut st = CfrState {
        regret: [[0.0; 2]; 12],
        strategy_sum: [[0.0; 2]; 12],
    };
    let deals = all_deals();
    let mut history = Vec::with_capacity(3);
    let mut trace = Vec::new();
    for it in 1..=iterations {
        let mut current = [[0.5; 2]; 12];
        for (c, r) in current.iter_mut().zip(&st.regret) {
            *c = regret_matching(r);
        }
        for &cards in &deals {
            st.walk(&current, cards, &mut history, [1.0, 1.0]);
        }
        if checkpoints.contains(&it) {
            let snapshot = CfrStrategyProfile {
                probs: st.average(),
                iterations_trained: it,
                exploitability: 0.0,
            };
            trace.push((it, exploitability(&snapshot)));
        }
    }
    let mut profile = CfrStrategyProfile {
        probs: st.average(),
        iterations_trained: iterations,
        exploitability: 0.0,
    };
    profile.exploitability = exploitability(&profile);
    Ok((profile, trace))
}

pub fn cfr_train(iterations: u64) -> Result<CfrStrategyProfile> {
    cfr_train_with_checkpoints(iterations, &[]).map(|(p, _)| p)
}

/// Best-response search state for one responder card; `reach` holds the
/// opponent's reach probability for each of its possible cards.
fn br_node(
    opponent: &dyn KuhnStrategy,
    br_seat: usize,
    br_card: Card,
    history: &mut Vec<KuhnMove>,
    reach: [f64; 3],
    utility: Utility,
    choice: &mut [Option<KuhnMove>; 12],
) -> f64 {
    let deal = |opp: Card| {
        let mut cards = [opp, opp];
        cards[br_seat] = br_card;
        cards
    };
    if crate::env::kuhn::is_terminal_history(history) {
        return Card::ALL
            .iter()
            .filter(|&&c| c != br_card)
            .map(|&c| {
                let p0 = kuhn_payoff(deal(c), history).expect("terminal history");
                let mine = if br_seat == 0 { p0 } else { -p0 };
                reach[c.index()] * utility.of(mine)
            })
            .sum();
    }
    let player = history.len() % 2;
    if player == br_seat {
        let mut best = f64::NEG_INFINITY;
        let mut best_move = KuhnMove::Pass;
        for a in KuhnMove::ALL {
            history.push(a);
            let v = br_node(opponent, br_seat, br_card, history, reach, utility, choice);
            history.pop();
            if v > best + 1e-12 {
                best = v;
                best_move = a;
            }
        }
        let set = InfoSet {
            card: br_card,
            history: history.clone(),
        };
        choice[set.index()] = Some(best_move);
        best
    } else {
        let mut total = 0.0;
        for a in KuhnMove::ALL {
            let mut next = reach;
            for c in Card::ALL {
                if c != br_card {
                    let set = InfoSet {
                        card: c,
                        history: history.clone(),
                    };
                    next[c.index()] *= opponent.action_probs(&set)[a.index()];
                }
            }
            history.push(a);
            total += br_node(opponent, br_seat, br_card, history, next, utility, choice);
            history.pop();
        }
        total
    }
}

/// A deterministic strategy covering one seat's six info sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PureKuhnStrategy {
    pub moves: [KuhnMove; 12],
}

impl KuhnStrategy for PureKuhnStrategy {
    fn action_probs(&self, set: &InfoSet) -> [f64; 2] {
        match self.moves[set.index()] {
            KuhnMove::Pass => [1.0, 0.0],
            KuhnMove::Bet => [0.0, 1.0],
        }
    }
}

/// Exact best-response value (per hand, averaged over deals) for `br_seat`
/// against `opponent`, and the responding pure strategy.
pub fn best_response(opponent: &dyn KuhnStrategy, br_seat: u8, utility: Utility) -> (f64, PureKuhnStrategy) {
    let mut choice = [None; 12];
    let mut value = 0.0;
    let mut history = Vec::with_capacity(3);
    for br_card in Card::ALL {
        let mut reach = [0.0; 3];
        for c in Card::ALL {
            if c != br_card {
                reach[c.index()] = 0.5;
            }
        }
        value += br_node(opponent, br_seat as usize, br_card, &mut history, reach, utility, &mut choice)
            / 3.0;
    }
    let mut moves = [KuhnMove::Pass; 12];
    for (m, c) in moves.iter_mut().zip(choice) {
        if let Some(c) = c {
            *m = c;
        }
    }
    (value, PureKuhnStrategy { moves })
}

pub fn best_response_value(opponent: &dyn KuhnStrategy, br_seat: u8, utility: Utility) -> f64 {
    best_response(opponent, br_seat, utility).0
}

/// Average best-response gain in chips per hand over both seats.
pub fn exploitability(profile: &dyn KuhnStrategy) -> f64 {
    (best_response_value(profile, 0, Utility::Chips) + best_response_value(profile, 1, Utility::Chips)) / 2.0
}

/// Expected utility for `seat` when `me` plays that seat against `other`.
pub fn expected_value(me: &dyn KuhnStrategy, other: &dyn KuhnStrategy, seat: u8, utility: Utility) -> f64 {
    fn walk(
        strategies: [&dyn KuhnStrategy; 2],
        cards: [Card; 2],
        history: &mut Vec<KuhnMove>,
        seat: usize,
        utility: Utility,
    ) -> f64 {
        if let Ok(p0) = kuhn_payoff(cards, history) {
            return utility.of(if seat == 0 { p0 } else { -p0 });
        }
        let player = history.len() % 2;
        let set = InfoSet {
            card: cards[player],
            history: history.clone(),
        };
        let probs = strategies[player].action_probs(&set);
        let mut v = 0.0;
        for a in KuhnMove::ALL {
            let p = probs[a.index()];
            if p > 0.0 {
                history.push(a);
                v += p * walk(strategies, cards, history, seat, utility);
                history.pop();
            }
        }
        v
    }
    let strategies: [&dyn KuhnStrategy; 2] = if seat == 0 { [me, other] } else { [other, me] };
    let deals = all_deals();
    let mut history = Vec::with_capacity(3);
    deals
        .iter()
        .map(|&cards| walk(strategies, cards, &mut history, seat as usize, utility))
        .sum::<f64>()
        / deals.len() as f64
}
