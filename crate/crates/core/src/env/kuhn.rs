use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Card {
    J,
    Q,
    K,
}

impl Card {
    pub const ALL: [Card; 3] = [Card::J, Card::Q, Card::K];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn symbol(self) -> char {
        match self {
            Card::J => 'J',
            Card::Q => 'Q',
            Card::K => 'K',
        }
    }

    pub fn from_symbol(c: char) -> Option<Card> {
        match c {
            'J' => Some(Card::J),
            'Q' => Some(Card::Q),
            'K' => Some(Card::K),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum KuhnMove {
    Pass,
    Bet,
}

impl KuhnMove {
    pub const ALL: [KuhnMove; 2] = [KuhnMove::Pass, KuhnMove::Bet];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn letter(self) -> char {
        match self {
            KuhnMove::Pass => 'P',
            KuhnMove::Bet => 'B',
        }
    }
}

impl fmt::Display for KuhnMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KuhnMove::Pass => "PASS",
            KuhnMove::Bet => "BET",
        })
    }
}

pub fn history_string(history: &[KuhnMove]) -> String {
    history.iter().map(|m| m.letter()).collect()
}

pub fn parse_history(s: &str) -> Result<Vec<KuhnMove>> {
    s.chars()
        .map(|c| match c {
            'P' => Ok(KuhnMove::Pass),
            'B' => Ok(KuhnMove::Bet),
            other => Err(Error::Parse(format!("bad history letter {other:?}"))),
        })
        .collect()
}

/// The five terminal action sequences.
pub const TERMINAL_HISTORIES: [&str; 5] = ["PP", "PBP", "PBB", "BP", "BB"];

/// The four non-terminal decision histories; even length means player 0 acts.
pub const DECISION_HISTORIES: [&str; 4] = ["", "P", "B", "PB"];

pub fn is_terminal_history(history: &[KuhnMove]) -> bool {
    use KuhnMove::*;
    matches!(
        history,
        [Pass, Pass] | [Pass, Bet, Pass] | [Pass, Bet, Bet] | [Bet, Pass] | [Bet, Bet]
    )
}

fn is_history_prefix(history: &[KuhnMove]) -> bool {
    let h = history_string(history);
    TERMINAL_HISTORIES.iter().any(|t| t.starts_with(&h))
}

/// Net chips won by player 0 at a terminal history.
pub fn kuhn_payoff(cards: [Card; 2], history: &[KuhnMove]) -> Result<i32> {
    use KuhnMove::*;
    let showdown = |stake: i32| if cards[0] > cards[1] { stake } else { -stake };
    match history {
        [Pass, Pass] => Ok(showdown(1)),
        [Bet, Pass] => Ok(1),
        [Pass, Bet, Pass] => Ok(-1),
        [Bet, Bet] | [Pass, Bet, Bet] => Ok(showdown(2)),
        _ => Err(Error::contract(format!(
            "kuhn payoff requested for non-terminal history {:?}",
            history_string(history)
        ))),
    }
}

/// Whether a terminal history was settled by comparing cards.
pub fn is_showdown(history: &[KuhnMove]) -> bool {
    use KuhnMove::*;
    matches!(history, [Pass, Pass] | [Bet, Bet] | [Pass, Bet, Bet])
}

/// What one seat knows: its own card and the public action history.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct InfoSet {
    pub card: Card,
    pub history: Vec<KuhnMove>,
}

impl InfoSet {
    pub fn seat(&self) -> u8 {
        (self.history.len() % 2) as u8
    }

    /// Facing an outstanding bet (the only way `BET` means "call").
    pub fn facing_bet(&self) -> bool {
        self.history.last() == Some(&KuhnMove::Bet)
    }

    /// Compact key such as `K`, `QPB`, `JB`.
    pub fn key(&self) -> String {
        format!("{}{}", self.card.symbol(), history_string(&self.history))
    }

    pub fn from_key(key: &str) -> Result<Self> {
        let mut chars = key.chars();
        let card = chars
            .next()
            .and_then(Card::from_symbol)
            .ok_or_else(|| Error::Parse(format!("bad info set key {key:?}")))?;
        let history = parse_history(chars.as_str())?;
        if !DECISION_HISTORIES.contains(&history_string(&history).as_str()) {
            return Err(Error::Parse(format!("{key:?} is not a decision point")));
        }
        Ok(Self { card, history })
    }

    /// Dense index in `0..12`: card-major, then decision history.
    pub fn index(&self) -> usize {
        let h = history_string(&self.history);
        let hi = DECISION_HISTORIES.iter().position(|d| *d == h).expect("decision history");
        self.card.index() * 4 + hi
    }

    pub fn all() -> Vec<InfoSet> {
        let mut out = Vec::with_capacity(12);
        for card in Card::ALL {
            for h in DECISION_HISTORIES {
                out.push(InfoSet {
                    card,
                    history: parse_history(h).expect("static history"),
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct KuhnState {
    cards: [Card; 2],
    history: Vec<KuhnMove>,
}

impl KuhnState {
    pub fn new(cards: [Card; 2]) -> Result<Self> {
        if cards[0] == cards[1] {
            return Err(Error::contract("kuhn cards must be distinct"));
        }
        Ok(Self {
            cards,
            history: Vec::new(),
        })
    }

    pub fn cards(&self) -> [Card; 2] {
        self.cards
    }

    pub fn history(&self) -> &[KuhnMove] {
        &self.history
    }

    pub fn to_act(&self) -> u8 {
        (self.history.len() % 2) as u8
    }

    pub fn is_terminal(&self) -> bool {
        is_terminal_history(&self.history)
    }

    pub fn info_set(&self, seat: u8) -> InfoSet {
        InfoSet {
            card: self.cards[seat as usize],
            history: self.history.clone(),
        }
    }

    /// Chips committed by each seat, ante included.
    pub fn contributions(&self) -> [u8; 2] {
        let mut pot = [1u8, 1u8];
        for (i, m) in self.history.iter().enumerate() {
            if *m == KuhnMove::Bet {
                pot[i % 2] += 1;
            }
        }
        pot
    }

    pub fn apply(&self, mv: KuhnMove) -> Result<Self> {
        if self.is_terminal() {
            return Err(Error::contract("kuhn hand already finished"));
        }
        let mut next = self.clone();
        next.history.push(mv);
        debug_assert!(is_history_prefix(&next.history));
        Ok(next)
    }

    pub fn payoff(&self, seat: u8) -> Result<i32> {
        let p0 = kuhn_payoff(self.cards, &self.history)?;
        Ok(if seat == 0 { p0 } else { -p0 })
    }
}

/// All six ordered deals.
pub fn all_deals() -> Vec<[Card; 2]> {
    let mut out = Vec::with_capacity(6);
    for a in Card::ALL {
        for b in Card::ALL {
            if a != b {
                out.push([a, b]);
            }
        }
    }
    out
}
