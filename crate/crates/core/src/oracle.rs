//! Order-m oracle machines: a work tape and an oracle tape read together,
//! with an inquire action that replaces the oracle tape contents by an oracle
//! function value.
//!
//! Text format: one group per state, groups separated by `_`, four entries
//! per group for reads (work, oracle) = (0,0), (0,1), (1,0), (1,1).
//! A move entry `1R0LB` writes 1 on the work tape and moves it right, writes
//! 0 on the oracle tape and moves it left, then enters B. An inquire entry
//! `?1>B` consults oracle 1 and enters B. `-----` is undefined.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigUint;
use thiserror::Error;

use crate::deciders::{NonHaltProof, ProofKind};
use crate::error::ParseError;
use crate::machine::{state_from_letter, state_letter, Move, Symbol, MAX_STATES};
use crate::tape::{BitString, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OracleEntry {
    Move {
        next: usize,
        work_write: Symbol,
        work_move: Move,
        oracle_write: Symbol,
        oracle_move: Move,
    },
    /// Inquire oracle `oracle` (1-based).
    Inquire { next: usize, oracle: u32 },
}

impl OracleEntry {
    pub fn next(&self) -> usize {
        match self {
            OracleEntry::Move { next, .. } | OracleEntry::Inquire { next, .. } => *next,
        }
    }
}

impl fmt::Display for OracleEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            OracleEntry::Move {
                next,
                work_write,
                work_move,
                oracle_write,
                oracle_move,
            } => write!(
                f,
                "{}{}{}{}{}",
                work_write,
                work_move.letter(),
                oracle_write,
                oracle_move.letter(),
                state_letter(next)
            ),
            OracleEntry::Inquire { next, oracle } => {
                write!(f, "?{}>{}", oracle, state_letter(next))
            }
        }
    }
}

pub(crate) fn format_slot(entry: &Option<OracleEntry>) -> String {
    match entry {
        Some(e) => e.to_string(),
        None => "-----".to_string(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OracleMachineTable {
    states: usize,
    order: u32,
    entries: Vec<Option<OracleEntry>>,
}

impl OracleMachineTable {
    pub fn new(
        states: usize,
        order: u32,
        entries: Vec<Option<OracleEntry>>,
    ) -> Result<Self, ParseError> {
        if !(1..=MAX_STATES).contains(&states) {
            return Err(ParseError::at(
                0,
                format!("state count {states} out of range"),
            ));
        }
        if order == 0 {
            return Err(ParseError::at(0, "oracle machines have order at least 1"));
        }
        if entries.len() != 4 * states {
            return Err(ParseError::at(
                0,
                "entry count must be four times the state count",
            ));
        }
        for e in entries.iter().flatten() {
            if e.next() >= states {
                return Err(ParseError::at(
                    0,
                    format!("state {} out of range", state_letter(e.next())),
                ));
            }
            if let OracleEntry::Inquire { oracle, .. } = e {
                if *oracle == 0 || *oracle > order {
                    return Err(ParseError::at(
                        0,
                        format!("oracle index {oracle} outside 1..={order}"),
                    ));
                }
            }
        }
        Ok(OracleMachineTable {
            states,
            order,
            entries,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn entries(&self) -> &[Option<OracleEntry>] {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, state: usize, work: Symbol, oracle: Symbol) -> Option<OracleEntry> {
        self.entries[4 * state + 2 * work.index() + oracle.index()]
    }

    pub fn has_inquire(&self) -> bool {
        self.entries
            .iter()
            .any(|e| matches!(e, Some(OracleEntry::Inquire { .. })))
    }

    /// Parses the text format; the order must be given since it is not
    /// recoverable from a table that never inquires.
    pub fn parse(text: &str, order: u32) -> Result<Self, ParseError> {
        let groups: Vec<&str> = text.split('_').collect();
        let states = groups.len();
        if states > MAX_STATES {
            return Err(ParseError::at(0, "too many states"));
        }
        let mut entries = Vec::with_capacity(4 * states);
        let mut offset = 0;
        for group in &groups {
            let chars: Vec<char> = group.chars().collect();
            let mut i = 0;
            let mut count = 0;
            while i < chars.len() {
                let (entry, used) = parse_slot(&chars[i..], states, offset + i)?;
                entries.push(entry);
                i += used;
                count += 1;
            }
            if count != 4 {
                return Err(ParseError::at(
                    offset,
                    format!("state group {group:?} must hold exactly four entries"),
                ));
            }
            offset += chars.len() + 1;
        }
        OracleMachineTable::new(states, order, entries)
    }
}

fn parse_slot(
    chars: &[char],
    states: usize,
    at: usize,
) -> Result<(Option<OracleEntry>, usize), ParseError> {
    let state_at = |c: char, pos: usize| -> Result<usize, ParseError> {
        let s = state_from_letter(c)
            .ok_or_else(|| ParseError::at(pos, format!("bad state letter {c:?}")))?;
        if s >= states {
            return Err(ParseError::at(pos, format!("state {c} out of range")));
        }
        Ok(s)
    };
    match chars.first() {
        Some('-') => {
            if chars.len() >= 5 && chars[..5].iter().all(|&c| c == '-') {
                Ok((None, 5))
            } else {
                Err(ParseError::at(at, "truncated undefined entry"))
            }
        }
        Some('?') => {
            let digits: String = chars[1..]
                .iter()
                .take_while(|c| c.is_ascii_digit())
                .collect();
            let oracle: u32 = digits
                .parse()
                .map_err(|_| ParseError::at(at + 1, "missing oracle index"))?;
            let gt = 1 + digits.len();
            if chars.get(gt) != Some(&'>') {
                return Err(ParseError::at(at + gt, "expected '>' in inquire entry"));
            }
            let letter = *chars
                .get(gt + 1)
                .ok_or_else(|| ParseError::at(at + gt + 1, "missing next state"))?;
            let next = state_at(letter, at + gt + 1)?;
            Ok((Some(OracleEntry::Inquire { next, oracle }), gt + 2))
        }
        Some(_) => {
            if chars.len() < 5 {
                return Err(ParseError::at(at, "truncated move entry"));
            }
            let sym = |c: char, pos: usize| {
                Symbol::from_digit(c)
                    .ok_or_else(|| ParseError::at(pos, format!("bad symbol {c:?}")))
            };
            let mv = |c: char, pos: usize| {
                Move::from_letter(c).ok_or_else(|| ParseError::at(pos, format!("bad move {c:?}")))
            };
            Ok((
                Some(OracleEntry::Move {
                    work_write: sym(chars[0], at)?,
                    work_move: mv(chars[1], at + 1)?,
                    oracle_write: sym(chars[2], at + 2)?,
                    oracle_move: mv(chars[3], at + 3)?,
                    next: state_at(chars[4], at + 4)?,
                }),
                5,
            ))
        }
        None => Err(ParseError::at(at, "missing entry")),
    }
}

impl fmt::Display for OracleMachineTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for state in 0..self.states {
            if state > 0 {
                f.write_str("_")?;
            }
            for slot in &self.entries[4 * state..4 * state + 4] {
                f.write_str(&format_slot(slot))?;
            }
        }
        Ok(())
    }
}

/// Binary numeral, most significant bit first, no leading zeros.
pub fn encode_nat(value: &BigUint) -> BitString {
    let text = value.to_str_radix(2);
    text.parse().expect("binary digits")
}

pub fn encode_u64(value: u64) -> BitString {
    encode_nat(&BigUint::from(value))
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NumeralError {
    #[error("empty numeral")]
    Empty,
    #[error("numeral {0} has a leading zero")]
    LeadingZero(String),
}

pub fn decode_nat(bits: &BitString) -> Result<BigUint, NumeralError> {
    match bits.symbols() {
        [] => Err(NumeralError::Empty),
        [Symbol::Zero, _, ..] => Err(NumeralError::LeadingZero(bits.to_string())),
        _ => Ok(BigUint::parse_bytes(bits.to_string().as_bytes(), 2).expect("binary digits")),
    }
}

/// Finite part of an oracle function F(i, ·). Lookups outside the table are
/// unresolved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleTable {
    pub index: u32,
    pub entries: BTreeMap<BitString, BitString>,
    pub provenance: String,
}

impl OracleTable {
    pub fn empty(index: u32) -> Self {
        OracleTable {
            index,
            entries: BTreeMap::new(),
            provenance: "empty".to_string(),
        }
    }

    pub fn lookup(&self, query: &BitString) -> Option<&BitString> {
        self.entries.get(query)
    }

    pub fn is_superset_of(&self, other: &OracleTable) -> bool {
        other
            .entries
            .iter()
            .all(|(k, v)| self.entries.get(k) == Some(v))
    }

    /// File form: header `oracle i`, a `# provenance` comment, then one
    /// `query<TAB>answer` line per entry.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("oracle {}\n# {}\n", self.index, self.provenance);
        for (k, v) in &self.entries {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out
    }

    pub fn from_file_str(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| ParseError::at(0, "empty oracle file"))?;
        let index: u32 = header
            .strip_prefix("oracle ")
            .and_then(|i| i.trim().parse().ok())
            .filter(|&i| i >= 1)
            .ok_or_else(|| ParseError::at(0, "expected header line `oracle i`"))?;
        let mut table = OracleTable::empty(index);
        table.provenance = String::new();
        for (no, line) in lines {
            if let Some(note) = line.strip_prefix('#') {
                table.provenance = note.trim().to_string();
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('\t')
                .ok_or_else(|| ParseError::at(no, "expected `query<TAB>answer`"))?;
            let k: BitString = k
                .parse()
                .map_err(|e: ParseError| ParseError::at(no, e.message))?;
            let v: BitString = v
                .parse()
                .map_err(|e: ParseError| ParseError::at(no, e.message))?;
            if table.entries.insert(k, v).is_some() {
                return Err(ParseError::at(no, "duplicate query"));
            }
        }
        Ok(table)
    }
}

/// State and both tapes of an oracle machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualConfiguration {
    pub state: usize,
    pub work: Tape,
    pub oracle: Tape,
    pub steps: u64,
}

impl DualConfiguration {
    pub fn initial(work_input: &BitString) -> Self {
        DualConfiguration {
            state: 0,
            work: Tape::with_input(work_input),
            oracle: Tape::blank(),
            steps: 0,
        }
    }

    /// The oracle tape contents α: the visited extent, leftmost cell first.
    pub fn oracle_string(&self) -> BitString {
        BitString(self.oracle.visited())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleStepOutcome {
    Next(DualConfiguration),
    Halt { steps: u64 },
    Unresolved { oracle: u32, query: BitString },
}

/// Applies one step in place; shared by [`oracle_step`] and the run loop.
fn advance(
    machine: &OracleMachineTable,
    config: &mut DualConfiguration,
    oracles: &[OracleTable],
) -> Result<Option<u64>, (u32, BitString)> {
    match machine.entry(config.state, config.work.read(), config.oracle.read()) {
        None => Ok(Some(config.steps + 1)),
        Some(OracleEntry::Move {
            next,
            work_write,
            work_move,
            oracle_write,
            oracle_move,
        }) => {
            config.work.write(work_write);
            config.work.shift(work_move);
            config.oracle.write(oracle_write);
            config.oracle.shift(oracle_move);
            config.state = next;
            config.steps += 1;
            Ok(None)
        }
        Some(OracleEntry::Inquire { next, oracle }) => {
            let query = config.oracle_string();
            let answer = oracles
                .iter()
                .find(|t| t.index == oracle)
                .and_then(|t| t.lookup(&query))
                .ok_or((oracle, query))?;
            config.oracle = Tape::from_content(answer.symbols());
            config.state = next;
            config.steps += 1;
            Ok(None)
        }
    }
}

pub fn oracle_step(
    machine: &OracleMachineTable,
    config: &DualConfiguration,
    oracles: &[OracleTable],
) -> OracleStepOutcome {
    let mut next = config.clone();
    match advance(machine, &mut next, oracles) {
        Ok(None) => OracleStepOutcome::Next(next),
        Ok(Some(steps)) => OracleStepOutcome::Halt { steps },
        Err((oracle, query)) => OracleStepOutcome::Unresolved { oracle, query },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleRunOutcome {
    Halted { steps: u64 },
    NonHaltingProven { proof: NonHaltProof },
    Unknown { budget: u64 },
    Unresolved { oracle: u32, query: BitString },
}

pub fn oracle_run(
    machine: &OracleMachineTable,
    work_input: &BitString,
    budget: u64,
    oracles: &[OracleTable],
) -> OracleRunOutcome {
    oracle_run_inner(machine, work_input, budget, oracles, None)
}

pub fn oracle_run_traced(
    machine: &OracleMachineTable,
    work_input: &BitString,
    budget: u64,
    oracles: &[OracleTable],
) -> (OracleRunOutcome, Vec<DualConfiguration>) {
    let mut trace = Vec::new();
    let outcome = oracle_run_inner(machine, work_input, budget, oracles, Some(&mut trace));
    (outcome, trace)
}

fn oracle_run_inner(
    machine: &OracleMachineTable,
    work_input: &BitString,
    budget: u64,
    oracles: &[OracleTable],
    mut trace: Option<&mut Vec<DualConfiguration>>,
) -> OracleRunOutcome {
    assert!(budget >= 1, "budget must be at least one step");
    let mut config = DualConfiguration::initial(work_input);
    loop {
        if let Some(t) = trace.as_deref_mut() {
            t.push(config.clone());
        }
        if config.steps >= budget {
            return OracleRunOutcome::Unknown { budget };
        }
        match advance(machine, &mut config, oracles) {
            Ok(None) => {}
            Ok(Some(steps)) => return OracleRunOutcome::Halted { steps },
            Err((oracle, query)) => return OracleRunOutcome::Unresolved { oracle, query },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct DualSnapshot {
    state: usize,
    work_head: i64,
    oracle_head: i64,
    work: Vec<(i64, Symbol)>,
    oracle: Vec<(i64, Symbol)>,
}

fn ones(tape: &Tape) -> Vec<(i64, Symbol)> {
    (tape.min_visited()..=tape.max_visited())
        .filter(|&i| tape.get(i) == Symbol::One)
        .map(|i| (i, Symbol::One))
        .collect()
}

impl DualSnapshot {
    fn of(c: &DualConfiguration) -> Self {
        DualSnapshot {
            state: c.state,
            work_head: c.work.head(),
            oracle_head: c.oracle.head(),
            work: ones(&c.work),
            oracle: ones(&c.oracle),
        }
    }
}

/// Exact repetition of the whole dual configuration. The oracle string
/// depends on the visited extent, so the extents are part of the snapshot
/// when the machine can inquire.
pub fn decide_oracle_cycler(
    machine: &OracleMachineTable,
    work_input: &BitString,
    budget: u64,
    oracles: &[OracleTable],
) -> Option<NonHaltProof> {
    let inquires = machine.has_inquire();
    let key = |c: &DualConfiguration| {
        let extents = if inquires {
            Some((c.oracle.min_visited(), c.oracle.max_visited()))
        } else {
            None
        };
        (DualSnapshot::of(c), extents)
    };
    let mut seen = HashMap::new();
    let mut config = DualConfiguration::initial(work_input);
    loop {
        if let Some(period) = runaway_period(machine, &config) {
            return Some(NonHaltProof {
                kind: ProofKind::TranslatedCycler {
                    start_step: config.steps,
                    period,
                    shift: runaway_shift(machine, &config, period),
                },
                machine: machine.to_string(),
                input: work_input.clone(),
            });
        }
        let k = key(&config);
        if let Some(&first) = seen.get(&k) {
            return Some(NonHaltProof {
                kind: ProofKind::Cycler {
                    start_step: first,
                    period: config.steps - first,
                },
                machine: machine.to_string(),
                input: work_input.clone(),
            });
        }
        seen.insert(k, config.steps);
        if config.steps >= budget {
            return None;
        }
        match advance(machine, &mut config, oracles) {
            Ok(None) => {}
            _ => return None,
        }
    }
}

fn at_edge(tape: &Tape, dir: Move) -> bool {
    let edge = match dir {
        Move::Left => tape.min_visited(),
        Move::Right => tape.max_visited(),
    };
    tape.head() == edge && tape.read() == Symbol::Zero
}

/// Both heads sit on blank edge cells, and the entries followed from there
/// keep moving them outward until a state repeats. Every later read is a
/// fresh blank pair, so the run never halts. Returns the period.
fn runaway_period(machine: &OracleMachineTable, config: &DualConfiguration) -> Option<u64> {
    let first = machine.entry(config.state, Symbol::Zero, Symbol::Zero)?;
    let OracleEntry::Move {
        work_move: dw,
        oracle_move: dor,
        ..
    } = first
    else {
        return None;
    };
    if !at_edge(&config.work, dw) || !at_edge(&config.oracle, dor) {
        return None;
    }
    let mut state = config.state;
    for period in 1..=machine.states() as u64 {
        match machine.entry(state, Symbol::Zero, Symbol::Zero)? {
            OracleEntry::Move {
                next,
                work_move,
                oracle_move,
                ..
            } if work_move == dw && oracle_move == dor => state = next,
            _ => return None,
        }
        if state == config.state {
            return Some(period);
        }
    }
    None
}

fn runaway_shift(machine: &OracleMachineTable, config: &DualConfiguration, period: u64) -> i64 {
    match machine.entry(config.state, Symbol::Zero, Symbol::Zero) {
        Some(OracleEntry::Move {
            work_move: Move::Left,
            ..
        }) => -(period as i64),
        _ => period as i64,
    }
}

/// Replays a cycler proof for an oracle machine.
pub fn verify_oracle_proof(
    machine: &OracleMachineTable,
    proof: &NonHaltProof,
    oracles: &[OracleTable],
) -> bool {
    if proof.machine != machine.to_string() {
        return false;
    }
    let (start_step, period) = match proof.kind {
        ProofKind::Cycler { start_step, period } => (start_step, period),
        ProofKind::TranslatedCycler {
            start_step,
            period,
            shift,
        } => {
            let mut config = DualConfiguration::initial(&proof.input);
            for _ in 0..start_step {
                if !matches!(advance(machine, &mut config, oracles), Ok(None)) {
                    return false;
                }
            }
            return runaway_period(machine, &config) == Some(period)
                && runaway_shift(machine, &config, period) == shift;
        }
        _ => return false,
    };
    if period == 0 {
        return false;
    }
    let mut config = DualConfiguration::initial(&proof.input);
    for _ in 0..start_step {
        if !matches!(advance(machine, &mut config, oracles), Ok(None)) {
            return false;
        }
    }
    let before = config.clone();
    for _ in 0..period {
        if !matches!(advance(machine, &mut config, oracles), Ok(None)) {
            return false;
        }
    }
    let same_extent = before.oracle.min_visited() == config.oracle.min_visited()
        && before.oracle.max_visited() == config.oracle.max_visited();
    DualSnapshot::of(&before) == DualSnapshot::of(&config)
        && (same_extent || !machine.has_inquire())
}

/// Number of distinct entries one slot of an order-m, n-state table can
/// hold: 16n moves, mn inquires, and undefined.
pub fn slot_options(order: u32, states: usize) -> u64 {
    16 * states as u64 + order as u64 * states as u64 + 1
}
