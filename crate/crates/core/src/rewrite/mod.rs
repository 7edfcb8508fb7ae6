//! Configuration strings and the rule system Δ_M.
//!
//! A configuration is a pair of strings, one per tape. Each holds the visited
//! extent with a state marker `[A]` in front of the scanned cell. Order-0
//! machines have no oracle tape and that side is written `λ`.
//!
//! Every defined transition compiles to rules over a small window around the
//! marker. Moving off either end of a string extends it by one blank 0, so a
//! configuration string always equals the visited extent of the simulator's
//! tape. An inquire rule changes only the state on the work side and
//! replaces the whole oracle side by `[B]F(i, α)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::error::ParseError;
use crate::machine::{state_from_letter, state_letter, Configuration, MachineTable, Move, Symbol};
use crate::oracle::{DualConfiguration, OracleEntry, OracleMachineTable, OracleTable};
use crate::tape::{BitString, Tape};

pub mod cert;

pub use cert::{
    check_deriv, compute_via_deriv, trace_certificate, CheckError, DerivationCertificate, Step,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rule index {index} out of range (rule set has {len})")]
    UnknownRule { index: usize, len: usize },
    #[error("oracle {oracle} has no entry for query {query}")]
    Unresolved { oracle: u32, query: BitString },
    #[error("run did not halt: {outcome}")]
    NotHalting { outcome: String },
    #[error("simulator and rules disagree at step {step}")]
    Inconsistent { step: u64 },
}

/// Either kind of machine; rules and certificates work over both.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnyMachine {
    Plain(MachineTable),
    Oracle(OracleMachineTable),
}

impl AnyMachine {
    /// Order 0 parses a plain machine, anything higher an oracle machine.
    pub fn parse(text: &str, order: u32) -> Result<Self, ParseError> {
        if order == 0 {
            Ok(AnyMachine::Plain(text.parse()?))
        } else {
            Ok(AnyMachine::Oracle(OracleMachineTable::parse(text, order)?))
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            AnyMachine::Plain(_) => 0,
            AnyMachine::Oracle(m) => m.order(),
        }
    }

    pub fn states(&self) -> usize {
        match self {
            AnyMachine::Plain(m) => m.states(),
            AnyMachine::Oracle(m) => m.states(),
        }
    }
}

impl fmt::Display for AnyMachine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnyMachine::Plain(m) => m.fmt(f),
            AnyMachine::Oracle(m) => m.fmt(f),
        }
    }
}

impl From<MachineTable> for AnyMachine {
    fn from(m: MachineTable) -> Self {
        AnyMachine::Plain(m)
    }
}

impl From<OracleMachineTable> for AnyMachine {
    fn from(m: OracleMachineTable) -> Self {
        AnyMachine::Oracle(m)
    }
}

/// One tape as a string: `left`, then the marker, then `right` whose first
/// symbol is the scanned one. `right` is never empty.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Side {
    left: Vec<Symbol>,
    state: usize,
    right: Vec<Symbol>,
}

impl Side {
    pub fn new(left: Vec<Symbol>, state: usize, right: Vec<Symbol>) -> Option<Side> {
        (!right.is_empty()).then_some(Side { left, state, right })
    }

    /// `[A]x`, or `[A]0` for the empty string.
    pub fn start(content: &BitString) -> Side {
        let mut right = content.symbols().to_vec();
        if right.is_empty() {
            right.push(Symbol::Zero);
        }
        Side {
            left: Vec::new(),
            state: 0,
            right,
        }
    }

    pub fn of_tape(tape: &Tape, state: usize) -> Side {
        let mut left = tape.visited();
        let right = left.split_off(tape.head_offset());
        Side { left, state, right }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn scanned(&self) -> Symbol {
        self.right[0]
    }

    pub fn left(&self) -> &[Symbol] {
        &self.left
    }

    pub fn right(&self) -> &[Symbol] {
        &self.right
    }

    /// The string without its marker.
    pub fn content(&self) -> BitString {
        BitString([self.left.as_slice(), self.right.as_slice()].concat())
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.left {
            write!(f, "{s}")?;
        }
        write!(f, "[{}]", state_letter(self.state))?;
        for s in &self.right {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for Side {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let open = text
            .find('[')
            .ok_or_else(|| ParseError::at(0, "missing state marker"))?;
        let digits = |part: &str, offset: usize| -> Result<Vec<Symbol>, ParseError> {
            part.chars()
                .enumerate()
                .map(|(i, c)| {
                    Symbol::from_digit(c)
                        .ok_or_else(|| ParseError::at(offset + i, format!("unexpected `{c}`")))
                })
                .collect()
        };
        let left = digits(&text[..open], 0)?;
        let rest = &text[open + 1..];
        let mut chars = rest.chars();
        let state = chars
            .next()
            .and_then(state_from_letter)
            .ok_or_else(|| ParseError::at(open + 1, "expected a state letter"))?;
        if chars.next() != Some(']') {
            return Err(ParseError::at(open + 2, "expected `]`"));
        }
        let right = digits(chars.as_str(), open + 3)?;
        Side::new(left, state, right)
            .ok_or_else(|| ParseError::at(text.len(), "marker must precede a symbol"))
    }
}

/// A work side and, for oracle machines, an oracle side carrying the same
/// state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ConfigString {
    work: Side,
    oracle: Option<Side>,
}

impl ConfigString {
    pub fn new(work: Side, oracle: Option<Side>) -> Result<Self, ParseError> {
        if let Some(o) = &oracle {
            if o.state != work.state {
                return Err(ParseError::at(
                    0,
                    format!(
                        "state markers differ: [{}] and [{}]",
                        state_letter(work.state),
                        state_letter(o.state)
                    ),
                ));
            }
        }
        Ok(ConfigString { work, oracle })
    }

    /// `q_0 x` paired with `λ` (order 0) or a blank oracle tape.
    pub fn initial(input: &BitString, order: u32) -> Self {
        ConfigString {
            work: Side::start(input),
            oracle: (order > 0).then(|| Side::start(&BitString::empty())),
        }
    }

    pub fn of_config(c: &Configuration) -> Self {
        ConfigString {
            work: Side::of_tape(&c.tape, c.state),
            oracle: None,
        }
    }

    pub fn of_dual(c: &DualConfiguration) -> Self {
        ConfigString {
            work: Side::of_tape(&c.work, c.state),
            oracle: Some(Side::of_tape(&c.oracle, c.state)),
        }
    }

    pub fn state(&self) -> usize {
        self.work.state
    }

    pub fn work(&self) -> &Side {
        &self.work
    }

    pub fn oracle(&self) -> Option<&Side> {
        self.oracle.as_ref()
    }

    /// Work tape content, leftmost visited cell first.
    pub fn output(&self) -> BitString {
        self.work.content()
    }
}

impl fmt::Display for ConfigString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.oracle {
            Some(o) => write!(f, "{} | {}", self.work, o),
            None => write!(f, "{} | λ", self.work),
        }
    }
}

impl FromStr for ConfigString {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let (work, oracle) = text
            .split_once('|')
            .ok_or_else(|| ParseError::at(0, "expected `work | oracle`"))?;
        let work: Side = work.trim().parse()?;
        let oracle = match oracle.trim() {
            "λ" => None,
            o => Some(o.parse().map_err(|e: ParseError| {
                ParseError::at(text.find('|').unwrap_or(0) + 2 + e.position, e.message)
            })?),
        };
        ConfigString::new(work, oracle)
    }
}

/// What the rule requires next to the scanned cell in the direction of the
/// move: a given symbol, or the end of the string.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Context {
    Symbol(Symbol),
    Edge,
}

const CONTEXTS: [Context; 3] = [
    Context::Symbol(Symbol::Zero),
    Context::Symbol(Symbol::One),
    Context::Edge,
];

/// The rewrite a rule performs on one side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Effect {
    Move {
        read: Symbol,
        write: Symbol,
        dir: Move,
        context: Context,
    },
    /// Only the marker state changes.
    Stay { read: Symbol },
    /// The whole side becomes `[B]F(oracle, α)`.
    Replace { oracle: u32, read: Symbol },
}

impl Effect {
    fn matches(&self, side: &Side) -> bool {
        match *self {
            Effect::Move {
                read, dir, context, ..
            } => {
                side.scanned() == read
                    && match (dir, context) {
                        (Move::Right, Context::Symbol(x)) => side.right.get(1) == Some(&x),
                        (Move::Right, Context::Edge) => side.right.len() == 1,
                        (Move::Left, Context::Symbol(x)) => side.left.last() == Some(&x),
                        (Move::Left, Context::Edge) => side.left.is_empty(),
                    }
            }
            Effect::Stay { read } | Effect::Replace { read, .. } => side.scanned() == read,
        }
    }

    /// Assumes [`Effect::matches`].
    fn apply(
        &self,
        side: &Side,
        next: usize,
        oracles: &[OracleTable],
    ) -> Result<Side, RewriteError> {
        let mut out = side.clone();
        out.state = next;
        match *self {
            Effect::Move {
                write,
                dir,
                context,
                ..
            } => match dir {
                Move::Right => {
                    out.left.push(write);
                    out.right.remove(0);
                    if context == Context::Edge {
                        out.right.push(Symbol::Zero);
                    }
                }
                Move::Left => {
                    let x = out.left.pop().unwrap_or(Symbol::Zero);
                    out.right[0] = write;
                    out.right.insert(0, x);
                }
            },
            Effect::Stay { .. } => {}
            Effect::Replace { oracle, .. } => {
                let query = side.content();
                let answer = oracles
                    .iter()
                    .find(|t| t.index == oracle)
                    .and_then(|t| t.lookup(&query))
                    .ok_or(RewriteError::Unresolved { oracle, query })?;
                out = Side::start(answer);
                out.state = next;
            }
        }
        Ok(out)
    }

    fn sides(&self, from: char, to: char) -> (String, String) {
        match *self {
            Effect::Move {
                read,
                write,
                dir,
                context,
            } => match (dir, context) {
                (Move::Right, Context::Symbol(x)) => {
                    (format!("[{from}]{read}{x}"), format!("{write}[{to}]{x}"))
                }
                (Move::Right, Context::Edge) => {
                    (format!("[{from}]{read}⊣"), format!("{write}[{to}]0⊣"))
                }
                (Move::Left, Context::Symbol(x)) => {
                    (format!("{x}[{from}]{read}"), format!("[{to}]{x}{write}"))
                }
                (Move::Left, Context::Edge) => {
                    (format!("⊢[{from}]{read}"), format!("⊢[{to}]0{write}"))
                }
            },
            Effect::Stay { read } => (format!("[{from}]{read}"), format!("[{to}]{read}")),
            Effect::Replace { oracle, read } => (
                format!("⊢α[{from}]{read}β⊣"),
                format!("⊢[{to}]F{oracle}(α{read}β)⊣"),
            ),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Move,
    Inquire,
}

/// One rule of Δ_M: the pair (work effect, oracle effect) applied at the
/// marker when the current state is `state`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub index: usize,
    pub state: usize,
    pub next: usize,
    pub work: Effect,
    pub oracle: Option<Effect>,
}

impl Rule {
    pub fn kind(&self) -> RuleKind {
        match self.oracle {
            Some(Effect::Replace { .. }) => RuleKind::Inquire,
            _ => RuleKind::Move,
        }
    }

    fn matches(&self, c: &ConfigString) -> bool {
        c.state() == self.state
            && self.work.matches(&c.work)
            && match (&self.oracle, &c.oracle) {
                (Some(e), Some(o)) => e.matches(o),
                (None, None) => true,
                _ => false,
            }
    }

    fn apply(
        &self,
        c: &ConfigString,
        oracles: &[OracleTable],
    ) -> Result<ConfigString, RewriteError> {
        let work = self.work.apply(&c.work, self.next, oracles)?;
        let oracle = match (&self.oracle, &c.oracle) {
            (Some(e), Some(o)) => Some(e.apply(o, self.next, oracles)?),
            _ => None,
        };
        Ok(ConfigString { work, oracle })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (from, to) = (state_letter(self.state), state_letter(self.next));
        let (g, h) = self.work.sides(from, to);
        let (m, n) = match &self.oracle {
            Some(e) => e.sides(from, to),
            None => ("λ".to_string(), "λ".to_string()),
        };
        write!(f, "{}: ({g}, {m}) -> ({h}, {n})", self.index)
    }
}

/// Δ_M for one machine, with rules grouped by (state, scanned symbols).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleSet {
    pub machine: String,
    pub order: u32,
    pub states: usize,
    /// Moving off an end of a string appends a blank 0. Always set.
    pub boundary_extension: bool,
    rules: Vec<Rule>,
    by_slot: Vec<Vec<usize>>,
}

fn slot(order: u32, state: usize, work: Symbol, oracle: Option<Symbol>) -> usize {
    if order == 0 {
        state * 2 + work.index()
    } else {
        state * 4 + work.index() * 2 + oracle.map_or(0, Symbol::index)
    }
}

pub fn compile_rules(machine: &AnyMachine) -> RuleSet {
    let order = machine.order();
    let states = machine.states();
    let mut rules = Vec::new();
    let mut by_slot = vec![Vec::new(); states * if order == 0 { 2 } else { 4 }];
    let mut push = |rule: Rule, slot: usize, rules: &mut Vec<Rule>| {
        by_slot[slot].push(rules.len());
        rules.push(Rule {
            index: rules.len(),
            ..rule
        });
    };
    for state in 0..states {
        for work in Symbol::ALL {
            match machine {
                AnyMachine::Plain(m) => {
                    let Some(a) = m.entry(state, work) else {
                        continue;
                    };
                    for context in CONTEXTS {
                        let rule = Rule {
                            index: 0,
                            state,
                            next: a.next,
                            work: Effect::Move {
                                read: work,
                                write: a.write,
                                dir: a.dir,
                                context,
                            },
                            oracle: None,
                        };
                        push(rule, slot(0, state, work, None), &mut rules);
                    }
                }
                AnyMachine::Oracle(m) => {
                    for read in Symbol::ALL {
                        let at = slot(order, state, work, Some(read));
                        match m.entry(state, work, read) {
                            None => {}
                            Some(OracleEntry::Inquire { next, oracle }) => {
                                let rule = Rule {
                                    index: 0,
                                    state,
                                    next,
                                    work: Effect::Stay { read: work },
                                    oracle: Some(Effect::Replace { oracle, read }),
                                };
                                push(rule, at, &mut rules);
                            }
                            Some(OracleEntry::Move {
                                next,
                                work_write,
                                work_move,
                                oracle_write,
                                oracle_move,
                            }) => {
                                for wc in CONTEXTS {
                                    for oc in CONTEXTS {
                                        let rule = Rule {
                                            index: 0,
                                            state,
                                            next,
                                            work: Effect::Move {
                                                read: work,
                                                write: work_write,
                                                dir: work_move,
                                                context: wc,
                                            },
                                            oracle: Some(Effect::Move {
                                                read,
                                                write: oracle_write,
                                                dir: oracle_move,
                                                context: oc,
                                            }),
                                        };
                                        push(rule, at, &mut rules);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    RuleSet {
        machine: machine.to_string(),
        order,
        states,
        boundary_extension: true,
        rules,
        by_slot,
    }
}

impl RuleSet {
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Whether `c` has the shape this rule set works on.
    pub fn fits(&self, c: &ConfigString) -> bool {
        c.state() < self.states && c.oracle.is_some() == (self.order > 0)
    }

    /// Indices of rules whose left side occurs at the marker of `c`.
    pub fn matching(&self, c: &ConfigString) -> Vec<usize> {
        if !self.fits(c) {
            return Vec::new();
        }
        let at = slot(
            self.order,
            c.state(),
            c.work.scanned(),
            c.oracle.as_ref().map(Side::scanned),
        );
        self.by_slot[at]
            .iter()
            .copied()
            .filter(|&i| self.rules[i].matches(c))
            .collect()
    }

    /// Applies rule `index` to `c`; `None` when its left side does not occur.
    pub fn apply(
        &self,
        index: usize,
        c: &ConfigString,
        oracles: &[OracleTable],
    ) -> Result<Option<ConfigString>, RewriteError> {
        let rule = self.rules.get(index).ok_or(RewriteError::UnknownRule {
            index,
            len: self.rules.len(),
        })?;
        if !self.fits(c) || !rule.matches(c) {
            return Ok(None);
        }
        rule.apply(c, oracles).map(Some)
    }

    /// The unique applicable rule and its result, or `None` at a terminal
    /// configuration.
    pub fn successor(
        &self,
        c: &ConfigString,
        oracles: &[OracleTable],
    ) -> Result<Option<(usize, ConfigString)>, RewriteError> {
        let found = self.matching(c);
        assert!(found.len() <= 1, "rules {found:?} all apply to {c}");
        match found.first() {
            None => Ok(None),
            Some(&i) => Ok(Some((i, self.rules[i].apply(c, oracles)?))),
        }
    }

    pub fn is_terminal(&self, c: &ConfigString) -> bool {
        self.matching(c).is_empty()
    }
}

/// `c1 ⇒ c2` by rule `index`. Unresolved oracle lookups give `false`.
pub fn derives_one(
    rules: &RuleSet,
    index: usize,
    c1: &ConfigString,
    c2: &ConfigString,
    oracles: &[OracleTable],
) -> Result<bool, RewriteError> {
    match rules.apply(index, c1, oracles) {
        Ok(next) => Ok(next.as_ref() == Some(c2)),
        Err(RewriteError::Unresolved { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// `c1 ⇒ c2` by some rule.
pub fn derives_any(
    rules: &RuleSet,
    c1: &ConfigString,
    c2: &ConfigString,
    oracles: &[OracleTable],
) -> bool {
    let found = rules.matching(c1);
    assert!(found.len() <= 1, "rules {found:?} all apply to {c1}");
    found
        .into_iter()
        .any(|i| derives_one(rules, i, c1, c2, oracles).unwrap_or(false))
}
