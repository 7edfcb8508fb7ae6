//! Non-halting deciders and the classification pipeline.
//!
//! Five deciders are provided:
//!
//! * cyclers: the full configuration (state, head position, tape) repeats
//!   exactly;
//! * translated cyclers: at two record-breaking steps the machine is in the
//!   same state and the tape around the head, over every cell the machine
//!   read in between, is identical up to a shift. The machine then repeats
//!   the same segment forever, drifting by the shift each period;
//! * backward reasoning: starting from every undefined slot, no chain of
//!   predecessor configurations of the recorded depth is consistent, so the
//!   machine can only halt within that many steps, and simulation shows it
//!   does not;
//! * closed position sets: an over-approximation of the reachable
//!   configurations, described by the state, the `k` cells on each side of
//!   the head and the set of `k+1`-cell windows that may occur further out,
//!   is closed under the transition relation and never meets an undefined
//!   slot;
//! * closed tape languages: two small automata, one reading the tape left
//!   of the head from the far left and one reading the rest from the far
//!   right, together with a set of accepted (left state, machine state, right
//!   state) triples, describe a language that holds the initial
//!   configuration, is closed under steps and holds no halting
//!   configuration.
//!
//! Every proof can be replayed by [`verify_proof`], which re-simulates the
//! claimed period without using the search code.

use std::collections::HashMap;
use std::fmt;

use crate::machine::run_report;
use crate::machine::{Configuration, MachineTable, RunOutcome, Symbol};
use crate::tape::{BitString, Tape};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ProofKind {
    Cycler {
        start_step: u64,
        period: u64,
    },
    TranslatedCycler {
        start_step: u64,
        period: u64,
        shift: i64,
    },
    /// No predecessor chain of `depth` transitions leads to a halt.
    Backward {
        depth: u64,
    },
    /// Closed position set with `window`-cell local context.
    ClosedPositionSet {
        window: u32,
    },
    /// Closed tape language given by the two side automata, which read
    /// each cell together with its position modulo `period`.
    ClosedTapeLanguage {
        period: u32,
        left: Dfa,
        right: Dfa,
    },
}

impl ProofKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ProofKind::Cycler { .. } => "cycler",
            ProofKind::TranslatedCycler { .. } => "translated",
            ProofKind::Backward { .. } => "backward",
            ProofKind::ClosedPositionSet { .. } => "cps",
            ProofKind::ClosedTapeLanguage { .. } => "ctl",
        }
    }

    /// Text form stored in the results database, e.g.
    /// `translated:start=0,period=1,shift=1`.
    pub fn to_blob(&self) -> String {
        match self {
            ProofKind::Cycler { start_step, period } => {
                format!("cycler:start={start_step},period={period}")
            }
            ProofKind::TranslatedCycler {
                start_step,
                period,
                shift,
            } => format!("translated:start={start_step},period={period},shift={shift}"),
            ProofKind::Backward { depth } => format!("backward:depth={depth}"),
            ProofKind::ClosedPositionSet { window } => format!("cps:window={window}"),
            ProofKind::ClosedTapeLanguage {
                period,
                left,
                right,
            } => format!("ctl:period={period},left={left},right={right}"),
        }
    }

    pub fn from_blob(blob: &str) -> Option<ProofKind> {
        let (tag, fields) = blob.split_once(':')?;
        if tag == "backward" {
            let depth = fields.strip_prefix("depth=")?.parse().ok()?;
            return (depth > 0).then_some(ProofKind::Backward { depth });
        }
        if tag == "ctl" {
            let mut parts = fields.split(',');
            let period: u32 = parts.next()?.strip_prefix("period=")?.parse().ok()?;
            let letters = 2 * usize::try_from(period)
                .ok()
                .filter(|p| (1..=MAX_CTL_PERIOD).contains(p))?;
            let left = Dfa::parse(parts.next()?.strip_prefix("left=")?, letters)?;
            let right = Dfa::parse(parts.next()?.strip_prefix("right=")?, letters)?;
            return parts
                .next()
                .is_none()
                .then_some(ProofKind::ClosedTapeLanguage {
                    period,
                    left,
                    right,
                });
        }
        if tag == "cps" {
            let window = fields.strip_prefix("window=")?.parse().ok()?;
            return (1..=MAX_CPS_WINDOW)
                .contains(&window)
                .then_some(ProofKind::ClosedPositionSet { window });
        }
        let mut start = None;
        let mut period = None;
        let mut shift = None;
        for field in fields.split(',') {
            let (key, value) = field.split_once('=')?;
            match key {
                "start" => start = Some(value.parse().ok()?),
                "period" => period = Some(value.parse().ok()?),
                "shift" => shift = Some(value.parse().ok()?),
                _ => return None,
            }
        }
        let (start_step, period) = (start?, period?);
        if period == 0 {
            return None;
        }
        match tag {
            "cycler" if shift.is_none() => Some(ProofKind::Cycler { start_step, period }),
            "translated" => Some(ProofKind::TranslatedCycler {
                start_step,
                period,
                shift: shift.filter(|&s| s != 0)?,
            }),
            _ => None,
        }
    }
}

/// A replayable certificate that a machine never halts on an input.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NonHaltProof {
    pub kind: ProofKind,
    pub machine: String,
    pub input: BitString,
}

impl fmt::Display for NonHaltProof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} on {} ({})",
            self.machine,
            self.input.display_or_epsilon(),
            self.kind.to_blob()
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Snapshot {
    state: usize,
    head: i64,
    start: i64,
    bits: Vec<Symbol>,
}

impl Snapshot {
    fn of(config: &Configuration) -> Self {
        let tape = &config.tape;
        let (start, bits) = match tape.nonzero_span() {
            Some((lo, hi)) => (lo, (lo..=hi).map(|i| tape.get(i)).collect()),
            None => (0, Vec::new()),
        };
        Snapshot {
            state: config.state,
            head: tape.head(),
            start,
            bits,
        }
    }
}

pub fn decide_cycler(
    machine: &MachineTable,
    input: &BitString,
    budget: u64,
) -> Option<NonHaltProof> {
    assert!(budget >= 1);
    let mut seen: HashMap<Snapshot, u64> = HashMap::new();
    let mut config = Configuration::initial(input);
    loop {
        if let Some(&first) = seen.get(&Snapshot::of(&config)) {
            return Some(NonHaltProof {
                kind: ProofKind::Cycler {
                    start_step: first,
                    period: config.steps - first,
                },
                machine: machine.to_string(),
                input: input.clone(),
            });
        }
        seen.insert(Snapshot::of(&config), config.steps);
        if config.steps >= budget || config.advance(machine).is_some() {
            return None;
        }
    }
}

struct Record {
    step: u64,
    state: usize,
    head: i64,
    tape: Tape,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Right,
    Left,
}

pub fn decide_translated_cycler(
    machine: &MachineTable,
    input: &BitString,
    budget: u64,
) -> Option<NonHaltProof> {
    assert!(budget >= 1);
    let mut config = Configuration::initial(input);
    // heads[t] is the head position at step t
    let mut heads = vec![config.tape.head()];
    let mut max_head = config.tape.head();
    let mut min_head = config.tape.head();
    let mut right = vec![record_of(&config)];
    let mut left = vec![record_of(&config)];

    while config.steps < budget {
        if config.advance(machine).is_some() {
            return None;
        }
        let head = config.tape.head();
        heads.push(head);
        let found = if head > max_head {
            max_head = head;
            check_records(&mut right, &config, &heads, Side::Right)
        } else if head < min_head {
            min_head = head;
            check_records(&mut left, &config, &heads, Side::Left)
        } else {
            None
        };
        if let Some(kind) = found {
            return Some(NonHaltProof {
                kind,
                machine: machine.to_string(),
                input: input.clone(),
            });
        }
    }
    None
}

fn record_of(config: &Configuration) -> Record {
    Record {
        step: config.steps,
        state: config.state,
        head: config.tape.head(),
        tape: config.tape.clone(),
    }
}

/// Compares the new record against earlier records on the same side and
/// stores it. `heads` covers steps `0..=config.steps`.
fn check_records(
    records: &mut Vec<Record>,
    config: &Configuration,
    heads: &[i64],
    side: Side,
) -> Option<ProofKind> {
    let now = config.steps;
    let head = config.tape.head();
    let beyond_blank = match side {
        Side::Right => config.tape.blank_right_of(head),
        Side::Left => config.tape.blank_left_of(head),
    };
    if beyond_blank {
        // walk back in time, tracking the far end of the window touched since
        // each earlier record
        let mut t = now as usize;
        let mut far = head;
        for rec in records.iter().rev() {
            while t > rec.step as usize {
                t -= 1;
                far = match side {
                    Side::Right => far.min(heads[t]),
                    Side::Left => far.max(heads[t]),
                };
            }
            if rec.state != config.state {
                continue;
            }
            let shift = head - rec.head;
            let earlier_blank = match side {
                Side::Right => rec.tape.blank_right_of(rec.head),
                Side::Left => rec.tape.blank_left_of(rec.head),
            };
            if !earlier_blank {
                continue;
            }
            let window = match side {
                Side::Right => far..=rec.head,
                Side::Left => rec.head..=far,
            };
            if window
                .clone()
                .all(|x| rec.tape.get(x) == config.tape.get(x + shift))
            {
                return Some(ProofKind::TranslatedCycler {
                    start_step: rec.step,
                    period: now - rec.step,
                    shift,
                });
            }
        }
    }
    records.push(record_of(config));
    None
}

/// Longest chain of predecessor configurations ending in a halt, found by
/// exhaustive backward search from every undefined slot. Each partial
/// configuration only fixes the cells the chain has read. `None` if some
/// chain reaches `depth_limit` or the search exceeds `node_limit` nodes.
fn longest_backward_chain(
    machine: &MachineTable,
    depth_limit: u64,
    node_limit: usize,
) -> Option<u64> {
    #[derive(Clone)]
    struct Partial {
        state: usize,
        head: i64,
        cells: Vec<(i64, Symbol)>,
    }
    let mut stack: Vec<(Partial, u64)> = Vec::new();
    for state in 0..machine.states() {
        for read in Symbol::ALL {
            if machine.entry(state, read).is_none() {
                let start = Partial {
                    state,
                    head: 0,
                    cells: vec![(0, read)],
                };
                stack.push((start, 0));
            }
        }
    }
    let mut longest = 0;
    let mut nodes = 0;
    while let Some((partial, depth)) = stack.pop() {
        nodes += 1;
        if depth >= depth_limit || nodes > node_limit {
            return None;
        }
        longest = longest.max(depth);
        for prev in 0..machine.states() {
            for read in Symbol::ALL {
                let Some(action) = machine.entry(prev, read) else {
                    continue;
                };
                if action.next != partial.state {
                    continue;
                }
                let prev_head = match action.dir {
                    crate::machine::Move::Right => partial.head - 1,
                    crate::machine::Move::Left => partial.head + 1,
                };
                let known = partial.cells.iter().position(|&(i, _)| i == prev_head);
                if let Some(k) = known {
                    if partial.cells[k].1 != action.write {
                        continue;
                    }
                }
                let mut cells = partial.cells.clone();
                match known {
                    Some(k) => cells[k].1 = read,
                    None => cells.push((prev_head, read)),
                }
                stack.push((
                    Partial {
                        state: prev,
                        head: prev_head,
                        cells,
                    },
                    depth + 1,
                ));
            }
        }
    }
    Some(longest)
}

const BACKWARD_NODE_LIMIT: usize = 20_000;

/// Proves non-halting when every backward chain from a halt dies out within
/// `depth_limit` transitions and the machine survives that many steps.
pub fn decide_backward(
    machine: &MachineTable,
    input: &BitString,
    depth_limit: u64,
) -> Option<NonHaltProof> {
    let depth = longest_backward_chain(machine, depth_limit, BACKWARD_NODE_LIMIT)? + 1;
    let survives = matches!(
        run_report(machine, input, depth).outcome,
        RunOutcome::Unknown { .. }
    );
    survives.then(|| NonHaltProof {
        kind: ProofKind::Backward { depth },
        machine: machine.to_string(),
        input: input.clone(),
    })
}

pub const MAX_CPS_WINDOW: u32 = 8;

/// Local view of a configuration: state, head symbol and the nearest
/// `window` cells on each side, packed with the nearest cell in bit 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Local {
    state: usize,
    left: u32,
    head: Symbol,
    right: u32,
}

/// Closed set of locals plus the windows allowed on each side.
#[derive(Debug, Default)]
struct PositionSet {
    locals: std::collections::BTreeSet<Local>,
    left: std::collections::BTreeSet<u32>,
    right: std::collections::BTreeSet<u32>,
}

fn windows_of(cells: &[Symbol], window: u32) -> Vec<u32> {
    // cells listed outward from the head, followed by blanks forever
    let width = window as usize + 1;
    let mut padded = cells.to_vec();
    padded.resize(cells.len() + width, Symbol::Zero);
    (0..=cells.len())
        .map(|i| pack(&padded[i..i + width]))
        .collect()
}

fn pack(cells: &[Symbol]) -> u32 {
    cells
        .iter()
        .enumerate()
        .fold(0, |acc, (i, s)| acc | (s.index() as u32) << i)
}

fn initial_positions(input: &BitString, window: u32) -> (Local, Vec<u32>, Vec<u32>) {
    let cells = input.symbols();
    let head = cells.first().copied().unwrap_or(Symbol::Zero);
    let rest: Vec<Symbol> = cells.iter().skip(1).copied().collect();
    let right_windows = windows_of(&rest, window);
    let mask = (1u32 << window) - 1;
    let local = Local {
        state: 0,
        left: 0,
        head,
        right: right_windows[0] & mask,
    };
    (local, windows_of(&[], window), right_windows)
}

/// A successor, plus the window pushed off one side when the head leaves.
type LocalStep = (Local, Option<(Side, u32)>);

/// Successors of a local configuration under the current window sets;
/// `None` when the head slot is undefined.
fn successors(
    machine: &MachineTable,
    local: &Local,
    window: u32,
    left: &std::collections::BTreeSet<u32>,
    right: &std::collections::BTreeSet<u32>,
) -> Option<Vec<LocalStep>> {
    let action = machine.entry(local.state, local.head)?;
    let mask = (1u32 << window) - 1;
    let top = 1u32 << window;
    let mut out = Vec::new();
    // the side being pushed onto gains the window (written, old near cells)
    let (from, into) = match action.dir {
        crate::machine::Move::Right => (local.right, local.left),
        crate::machine::Move::Left => (local.left, local.right),
    };
    let pushed = action.write.index() as u32 | into << 1;
    let popped_windows = match action.dir {
        crate::machine::Move::Right => right,
        crate::machine::Move::Left => left,
    };
    let pushed_side = match action.dir {
        crate::machine::Move::Right => Side::Left,
        crate::machine::Move::Left => Side::Right,
    };
    for far in [0u32, 1] {
        if !popped_windows.contains(&(from | far << window)) {
            continue;
        }
        let head = if from & 1 == 1 {
            Symbol::One
        } else {
            Symbol::Zero
        };
        let rest = (from >> 1) | far << (window - 1);
        let near = pushed & mask;
        let next = match action.dir {
            crate::machine::Move::Right => Local {
                state: action.next,
                left: near,
                head,
                right: rest,
            },
            crate::machine::Move::Left => Local {
                state: action.next,
                left: rest,
                head,
                right: near,
            },
        };
        out.push((next, Some((pushed_side, pushed & (top | mask)))));
    }
    Some(out)
}

fn closed_position_set(
    machine: &MachineTable,
    input: &BitString,
    window: u32,
) -> Option<PositionSet> {
    let (start, left, right) = initial_positions(input, window);
    let mut set = PositionSet::default();
    set.locals.insert(start);
    set.left.extend(left);
    set.right.extend(right);
    loop {
        let mut changed = false;
        let locals: Vec<Local> = set.locals.iter().copied().collect();
        for local in locals {
            for (next, pushed) in successors(machine, &local, window, &set.left, &set.right)? {
                changed |= set.locals.insert(next);
                if let Some((side, w)) = pushed {
                    changed |= match side {
                        Side::Left => set.left.insert(w),
                        Side::Right => set.right.insert(w),
                    };
                }
            }
        }
        if !changed {
            return Some(set);
        }
    }
}

pub fn decide_closed_position_set(
    machine: &MachineTable,
    input: &BitString,
    window: u32,
) -> Option<NonHaltProof> {
    assert!((1..=MAX_CPS_WINDOW).contains(&window));
    closed_position_set(machine, input, window).map(|_| NonHaltProof {
        kind: ProofKind::ClosedPositionSet { window },
        machine: machine.to_string(),
        input: input.clone(),
    })
}

/// Checks that a position set contains the initial configuration, is
/// closed, and holds no halting local.
fn check_position_set(
    machine: &MachineTable,
    input: &BitString,
    window: u32,
    set: &PositionSet,
) -> bool {
    let (start, left, right) = initial_positions(input, window);
    if !set.locals.contains(&start)
        || !left.iter().all(|w| set.left.contains(w))
        || !right.iter().all(|w| set.right.contains(w))
    {
        return false;
    }
    set.locals.iter().all(
        |local| match successors(machine, local, window, &set.left, &set.right) {
            None => false,
            Some(next) => next.iter().all(|(l, pushed)| {
                set.locals.contains(l)
                    && pushed.is_none_or(|(side, w)| match side {
                        Side::Left => set.left.contains(&w),
                        Side::Right => set.right.contains(&w),
                    })
            }),
        },
    )
}

/// Deterministic automaton reading letters `(symbol, position mod period)`
/// with start state 0, which stays put on blanks. Missing transitions lead
/// to an implicit rejecting state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Dfa {
    letters: usize,
    /// `table[letters * state + letter]`
    table: Vec<Option<u8>>,
}

impl Dfa {
    pub fn states(&self) -> usize {
        self.table.len() / self.letters
    }

    /// Parses the string written by `Display`: one digit per transition,
    /// `-` where it is missing.
    pub fn parse(text: &str, letters: usize) -> Option<Dfa> {
        let table = text
            .bytes()
            .map(|b| match b {
                b'-' => Some(None),
                b'0'..=b'9' => Some(Some(b - b'0')),
                _ => None,
            })
            .collect::<Option<Vec<Option<u8>>>>()?;
        let states = table.len() / letters;
        let ok = states >= 1
            && table.len() == letters * states
            && (0..letters).step_by(2).all(|blank| table[blank] == Some(0))
            && table.iter().flatten().all(|&t| usize::from(t) < states);
        ok.then_some(Dfa { letters, table })
    }
}

impl fmt::Display for Dfa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.table {
            match t {
                Some(t) => write!(f, "{}", (b'0' + t) as char)?,
                None => write!(f, "-")?,
            }
        }
        Ok(())
    }
}

/// Largest automaton size tried on each side.
pub const MAX_CTL_STATES: usize = 6;

/// Largest position modulus the automata may read.
pub const MAX_CTL_PERIOD: usize = 2;

/// Search nodes allowed per choice of sizes and period.
const CTL_NODE_LIMIT: usize = 10_000;

/// Automaton whose transitions may still be open.
#[derive(Clone)]
struct PartialDfa {
    letters: usize,
    table: Vec<Option<u8>>,
}

impl PartialDfa {
    fn start(period: usize) -> Self {
        let letters = 2 * period;
        let table = (0..letters).map(|l| (l % 2 == 0).then_some(0)).collect();
        PartialDfa { letters, table }
    }

    fn full(dfa: &Dfa) -> Self {
        PartialDfa {
            letters: dfa.letters,
            table: dfa.table.clone(),
        }
    }

    fn states(&self) -> usize {
        self.table.len() / self.letters
    }

    fn letter(&self, symbol: Symbol, position: i64) -> usize {
        let period = (self.letters / 2) as i64;
        2 * position.rem_euclid(period) as usize + symbol.index()
    }

    fn next(
        &self,
        side: usize,
        state: usize,
        symbol: Symbol,
        position: i64,
    ) -> Result<usize, Blocked> {
        let slot = self.letters * state + self.letter(symbol, position);
        self.table[slot]
            .map(usize::from)
            .ok_or(Blocked::Open { side, slot })
    }

    /// States with a transition into `state` on `symbol` read at `position`.
    fn sources(
        &self,
        state: usize,
        symbol: Symbol,
        position: i64,
    ) -> impl Iterator<Item = usize> + '_ {
        let letter = self.letter(symbol, position);
        (0..self.states())
            .filter(move |&from| self.table[self.letters * from + letter] == Some(state as u8))
    }
}

enum Blocked {
    Halts,
    /// Side 0 is the left automaton, 1 the right one.
    Open {
        side: usize,
        slot: usize,
    },
}

/// Left automaton state, machine state, right automaton state and head
/// position modulo the period.
type Triple = (usize, usize, usize, usize);

/// Explores the least set of triples that holds the start configuration and
/// is closed under steps. Fails on the first represented halting
/// configuration or on a transition that is still open.
///
/// A triple `(d, q, e, p)` stands for every configuration whose left part
/// drives the left automaton from 0 to `d`, whose head cell and right part,
/// read from the far right, drive the right automaton from 0 to `e`, and
/// whose head sits at a position `p` modulo the period.
fn tape_language_closure(
    machine: &MachineTable,
    input: &BitString,
    sides: &[PartialDfa; 2],
) -> Result<usize, Blocked> {
    let [left, right] = sides;
    let period = (left.letters / 2) as i64;
    let cells = if input.is_empty() {
        vec![Symbol::Zero]
    } else {
        input.symbols().to_vec()
    };
    let mut e0 = 0;
    for (i, &s) in cells.iter().enumerate().rev() {
        e0 = right.next(1, e0, s, i as i64)?;
    }
    let start = (0, 0, e0, 0);
    let mut accepted: std::collections::BTreeSet<Triple> = [start].into();
    let mut stack = vec![start];
    while let Some((d, q, e, p)) = stack.pop() {
        let head = p as i64;
        let mut found = Vec::new();
        for s in Symbol::ALL {
            for e_rest in right.sources(e, s, head) {
                let action = machine.entry(q, s).ok_or(Blocked::Halts)?;
                let moved = match action.dir {
                    crate::machine::Move::Right => head + 1,
                    crate::machine::Move::Left => head - 1,
                };
                let p_next = moved.rem_euclid(period) as usize;
                match action.dir {
                    crate::machine::Move::Right => {
                        let d_next = left.next(0, d, action.write, head)?;
                        found.push((d_next, action.next, e_rest, p_next));
                    }
                    crate::machine::Move::Left => {
                        for t in Symbol::ALL {
                            for d_rest in left.sources(d, t, moved) {
                                let e1 = right.next(1, e_rest, action.write, head)?;
                                let e_next = right.next(1, e1, t, moved)?;
                                found.push((d_rest, action.next, e_next, p_next));
                            }
                        }
                    }
                }
            }
        }
        for next in found {
            if accepted.insert(next) {
                stack.push(next);
            }
        }
    }
    Ok(accepted.len())
}

fn ctl_search(
    machine: &MachineTable,
    input: &BitString,
    sides: &mut [PartialDfa; 2],
    limits: [usize; 2],
    nodes: &mut usize,
) -> bool {
    if *nodes == 0 {
        return false;
    }
    *nodes -= 1;
    let (side, slot) = match tape_language_closure(machine, input, sides) {
        Err(Blocked::Halts) => return false,
        Err(Blocked::Open { side, slot }) => (side, slot),
        Ok(_) => return true,
    };
    let used = sides[side].states();
    for target in 0..=used.min(limits[side] - 1) {
        let saved = sides[side].clone();
        if target == used {
            let blank = PartialDfa::start(saved.letters / 2)
                .table
                .iter()
                .map(|_| None)
                .collect::<Vec<_>>();
            sides[side].table.extend(blank);
        }
        sides[side].table[slot] = Some(target as u8);
        if ctl_search(machine, input, sides, limits, nodes) {
            return true;
        }
        sides[side] = saved;
    }
    false
}

pub fn decide_closed_tape_language(
    machine: &MachineTable,
    input: &BitString,
    max_states: usize,
) -> Option<NonHaltProof> {
    let sizes = (2..=2 * max_states).flat_map(|total| {
        (1..total)
            .map(move |l| [l, total - l])
            .filter(|&[l, r]| l <= max_states && r <= max_states)
    });
    for limits in sizes {
        for period in 1..=MAX_CTL_PERIOD {
            let mut nodes = CTL_NODE_LIMIT;
            let mut sides = [PartialDfa::start(period), PartialDfa::start(period)];
            if ctl_search(machine, input, &mut sides, limits, &mut nodes) {
                let done = |dfa: &PartialDfa| Dfa {
                    letters: dfa.letters,
                    table: dfa.table.clone(),
                };
                return Some(NonHaltProof {
                    kind: ProofKind::ClosedTapeLanguage {
                        period: period as u32,
                        left: done(&sides[0]),
                        right: done(&sides[1]),
                    },
                    machine: machine.to_string(),
                    input: input.clone(),
                });
            }
        }
    }
    None
}

fn check_tape_language(
    machine: &MachineTable,
    input: &BitString,
    period: u32,
    left: &Dfa,
    right: &Dfa,
) -> bool {
    let letters = 2 * period as usize;
    if left.letters != letters || right.letters != letters {
        return false;
    }
    let sides = [PartialDfa::full(left), PartialDfa::full(right)];
    tape_language_closure(machine, input, &sides).is_ok()
}

/// Re-simulates the period a proof claims and checks the repetition
/// condition directly.
pub fn verify_proof(machine: &MachineTable, proof: &NonHaltProof) -> bool {
    if proof.machine != machine.to_string() {
        return false;
    }
    let mut config = Configuration::initial(&proof.input);
    let (start_step, period) = match proof.kind {
        ProofKind::ClosedTapeLanguage {
            period,
            ref left,
            ref right,
        } => {
            return check_tape_language(machine, &proof.input, period, left, right);
        }
        ProofKind::ClosedPositionSet { window } => {
            return (1..=MAX_CPS_WINDOW).contains(&window)
                && closed_position_set(machine, &proof.input, window)
                    .is_some_and(|set| check_position_set(machine, &proof.input, window, &set));
        }
        ProofKind::Cycler { start_step, period } => (start_step, period),
        ProofKind::TranslatedCycler {
            start_step, period, ..
        } => (start_step, period),
        ProofKind::Backward { depth } => {
            let survives = matches!(
                run_report(machine, &proof.input, depth).outcome,
                RunOutcome::Unknown { .. }
            );
            return survives
                && longest_backward_chain(machine, depth, usize::MAX).is_some_and(|d| d < depth);
        }
    };
    if period == 0 {
        return false;
    }
    for _ in 0..start_step {
        if config.advance(machine).is_some() {
            return false;
        }
    }
    let before = config.clone();
    let (mut lo, mut hi) = (before.tape.head(), before.tape.head());
    for _ in 0..period {
        if config.advance(machine).is_some() {
            return false;
        }
        lo = lo.min(config.tape.head());
        hi = hi.max(config.tape.head());
    }
    if config.state != before.state {
        return false;
    }
    match proof.kind {
        ProofKind::Cycler { .. } => {
            let span_lo = lo
                .min(before.tape.min_visited())
                .min(config.tape.min_visited());
            let span_hi = hi
                .max(before.tape.max_visited())
                .max(config.tape.max_visited());
            config.tape.head() == before.tape.head()
                && (span_lo..=span_hi).all(|x| before.tape.get(x) == config.tape.get(x))
        }
        ProofKind::Backward { .. }
        | ProofKind::ClosedPositionSet { .. }
        | ProofKind::ClosedTapeLanguage { .. } => {
            unreachable!("handled above")
        }
        ProofKind::TranslatedCycler { shift, .. } => {
            let (p1, p2) = (before.tape.head(), config.tape.head());
            if shift == 0 || p2 - p1 != shift {
                return false;
            }
            if shift > 0 {
                before.tape.blank_right_of(p1)
                    && config.tape.blank_right_of(p2)
                    && (lo..=p1).all(|x| before.tape.get(x) == config.tape.get(x + shift))
            } else {
                before.tape.blank_left_of(p1)
                    && config.tape.blank_left_of(p2)
                    && (p1..=hi).all(|x| before.tape.get(x) == config.tape.get(x + shift))
            }
        }
    }
}

/// Budgets for [`classify`]: one simulation budget, then each decider budget
/// in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pipeline {
    pub halt_budget: u64,
    pub decider_budgets: Vec<u64>,
}

/// Best known halting step counts on the blank tape for 1..=4 states.
pub const KNOWN_BB: [u64; 4] = [1, 6, 21, 107];

impl Pipeline {
    pub fn new(halt_budget: u64, decider_budgets: Vec<u64>) -> Self {
        assert!(halt_budget >= 1);
        Pipeline {
            halt_budget,
            decider_budgets,
        }
    }

    /// Simulation budget of twice the best known step count (at least 256),
    /// followed by four doubling decider budgets.
    pub fn default_for(states: usize) -> Self {
        let base = match states {
            1..=4 => (2 * KNOWN_BB[states - 1]).max(256),
            _ => 100_000,
        };
        Pipeline::with_base(base)
    }

    pub fn with_base(base: u64) -> Self {
        Pipeline::new(base, (0..4).map(|k| base << k).collect())
    }

    pub fn scaled(&self, factor: u64) -> Self {
        Pipeline {
            halt_budget: self.halt_budget * factor,
            decider_budgets: self.decider_budgets.iter().map(|b| b * factor).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Simulation,
    Cycler,
    TranslatedCycler,
    Backward,
    ClosedPositionSet,
    ClosedTapeLanguage,
    Unsettled,
}

impl Stage {
    pub fn tag(self) -> &'static str {
        match self {
            Stage::Simulation => "sim",
            Stage::Cycler => "cycler",
            Stage::TranslatedCycler => "translated",
            Stage::Backward => "backward",
            Stage::ClosedPositionSet => "cps",
            Stage::ClosedTapeLanguage => "ctl",
            Stage::Unsettled => "-",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub outcome: RunOutcome,
    pub settled_by: Stage,
    pub pipeline: Pipeline,
}

pub fn classify(machine: &MachineTable, input: &BitString, pipeline: &Pipeline) -> Classification {
    let done = |outcome, settled_by| Classification {
        outcome,
        settled_by,
        pipeline: pipeline.clone(),
    };
    let outcome = run_report(machine, input, pipeline.halt_budget).outcome;
    if matches!(outcome, RunOutcome::Halted { .. }) {
        return done(outcome, Stage::Simulation);
    }
    for &budget in &pipeline.decider_budgets {
        if let Some(proof) = decide_cycler(machine, input, budget) {
            return done(RunOutcome::NonHaltingProven { proof }, Stage::Cycler);
        }
        if let Some(proof) = decide_translated_cycler(machine, input, budget) {
            return done(
                RunOutcome::NonHaltingProven { proof },
                Stage::TranslatedCycler,
            );
        }
    }
    let deepest = pipeline
        .decider_budgets
        .iter()
        .copied()
        .max()
        .unwrap_or(pipeline.halt_budget);
    if let Some(proof) = decide_backward(machine, input, deepest) {
        return done(RunOutcome::NonHaltingProven { proof }, Stage::Backward);
    }
    for window in 1..=MAX_CPS_WINDOW {
        if let Some(proof) = decide_closed_position_set(machine, input, window) {
            return done(
                RunOutcome::NonHaltingProven { proof },
                Stage::ClosedPositionSet,
            );
        }
    }
    if let Some(proof) = decide_closed_tape_language(machine, input, MAX_CTL_STATES) {
        return done(
            RunOutcome::NonHaltingProven { proof },
            Stage::ClosedTapeLanguage,
        );
    }
    done(
        RunOutcome::Unknown {
            budget: pipeline.halt_budget,
        },
        Stage::Unsettled,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::run;

    fn m(text: &str) -> MachineTable {
        text.parse().unwrap()
    }

    fn blank() -> BitString {
        BitString::empty()
    }

    #[test]
    fn oscillator_is_cycler() {
        let machine = m("0RB---_0LA---");
        let proof = decide_cycler(&machine, &blank(), 100).unwrap();
        assert_eq!(
            proof.kind,
            ProofKind::Cycler {
                start_step: 0,
                period: 2
            }
        );
        assert!(verify_proof(&machine, &proof));
        assert!(decide_translated_cycler(&machine, &blank(), 100).is_none());
    }

    #[test]
    fn halter_is_not_a_cycler() {
        assert!(decide_cycler(&m("------"), &blank(), 100).is_none());
        assert!(decide_translated_cycler(&m("1RB1LB_1LA---"), &blank(), 100).is_none());
    }

    #[test]
    fn runaway_is_translated_not_cycler() {
        let machine = m("1RA---");
        assert!(decide_cycler(&machine, &blank(), 100).is_none());
        let proof = decide_translated_cycler(&machine, &blank(), 100).unwrap();
        assert_eq!(
            proof.kind,
            ProofKind::TranslatedCycler {
                start_step: 0,
                period: 1,
                shift: 1
            }
        );
        assert!(verify_proof(&machine, &proof));
    }

    #[test]
    fn leftward_translation() {
        // sweeps left leaving a trail of ones
        let machine = m("1LA---");
        let proof = decide_translated_cycler(&machine, &blank(), 10).unwrap();
        assert!(matches!(
            proof.kind,
            ProofKind::TranslatedCycler { shift: -1, .. }
        ));
        assert!(verify_proof(&machine, &proof));
    }

    #[test]
    fn input_blocks_premature_translation() {
        // walks right over the input; only once past it does the pattern repeat
        let machine = m("0RA0RA");
        let input: BitString = "1101".parse().unwrap();
        let proof = decide_translated_cycler(&machine, &input, 100).unwrap();
        let ProofKind::TranslatedCycler { start_step, .. } = proof.kind else {
            panic!()
        };
        assert!(start_step >= 3);
        assert!(verify_proof(&machine, &proof));
    }

    #[test]
    fn tampered_proofs_are_rejected() {
        let machine = m("0RB---_0LA---");
        let mut proof = decide_cycler(&machine, &blank(), 100).unwrap();
        proof.kind = ProofKind::Cycler {
            start_step: 0,
            period: 3,
        };
        assert!(!verify_proof(&machine, &proof));
        let halter = m("1RB1LB_1LA---");
        let fake = NonHaltProof {
            kind: ProofKind::Cycler {
                start_step: 0,
                period: 2,
            },
            machine: halter.to_string(),
            input: blank(),
        };
        assert!(!verify_proof(&halter, &fake));
    }

    #[test]
    fn backward_reasoning_kills_unreachable_halt() {
        // C1 is only entered from B0, which requires the cell C reads to
        // have been written 0
        let machine = m("0RB0LA_0LC1RA_1LA---");
        assert!(decide_cycler(&machine, &blank(), 1000).is_none());
        assert!(decide_translated_cycler(&machine, &blank(), 1000).is_none());
        let proof = decide_backward(&machine, &blank(), 100).unwrap();
        assert_eq!(proof.kind, ProofKind::Backward { depth: 2 });
        assert!(verify_proof(&machine, &proof));
        // a halter is never proven
        assert!(decide_backward(&m("1RB1LB_1LA---"), &blank(), 100).is_none());
        let wrong = NonHaltProof {
            kind: ProofKind::Backward { depth: 1 },
            ..proof
        };
        assert!(!verify_proof(&machine, &wrong));
    }

    #[test]
    fn position_sets_and_tape_languages() {
        let bouncer = m("0RB---_0LC1RB_1LA1LC");
        let proof = (1..=MAX_CPS_WINDOW)
            .find_map(|w| decide_closed_position_set(&bouncer, &blank(), w))
            .unwrap();
        assert!(verify_proof(&bouncer, &proof));

        // binary counter with digits on every other cell
        let counter = m("0RB0LA_1LA1RC_1RB---");
        assert!((1..=MAX_CPS_WINDOW)
            .all(|w| decide_closed_position_set(&counter, &blank(), w).is_none()));
        let proof = decide_closed_tape_language(&counter, &blank(), MAX_CTL_STATES).unwrap();
        assert!(verify_proof(&counter, &proof));
        assert_eq!(
            ProofKind::from_blob(&proof.kind.to_blob()),
            Some(proof.kind.clone())
        );
        let ProofKind::ClosedTapeLanguage { period, left, .. } = proof.kind.clone() else {
            panic!("{:?}", proof.kind);
        };
        // an automaton that forgets everything cannot exclude the halt
        let trivial = Dfa::parse(&"0".repeat(2 * period as usize), 2 * period as usize).unwrap();
        let weak = NonHaltProof {
            kind: ProofKind::ClosedTapeLanguage {
                period,
                left,
                right: trivial,
            },
            ..proof
        };
        assert!(!verify_proof(&counter, &weak));

        for halter in ["1RB1LB_1LA---", "1RB1LC_1RC1RB_1LA---"] {
            let halter = m(halter);
            assert!(decide_closed_tape_language(&halter, &blank(), MAX_CTL_STATES).is_none());
            assert!((1..=MAX_CPS_WINDOW)
                .all(|w| decide_closed_position_set(&halter, &blank(), w).is_none()));
        }
    }

    #[test]
    fn blob_round_trip() {
        for kind in [
            ProofKind::Cycler {
                start_step: 3,
                period: 7,
            },
            ProofKind::TranslatedCycler {
                start_step: 0,
                period: 1,
                shift: -4,
            },
            ProofKind::Backward { depth: 9 },
            ProofKind::ClosedPositionSet { window: 3 },
            ProofKind::ClosedTapeLanguage {
                period: 2,
                left: Dfa::parse("0-01-0--", 4).unwrap(),
                right: Dfa::parse("010101--", 4).unwrap(),
            },
        ] {
            assert_eq!(ProofKind::from_blob(&kind.to_blob()), Some(kind));
        }
        assert_eq!(ProofKind::from_blob("cycler:start=1,period=0"), None);
        assert_eq!(
            ProofKind::from_blob("translated:start=1,period=2,shift=0"),
            None
        );
        // blank must keep the start state in place
        assert_eq!(ProofKind::from_blob("ctl:period=1,left=10,right=00"), None);
        assert_eq!(
            ProofKind::from_blob("ctl:period=3,left=000000,right=000000"),
            None
        );
    }

    #[test]
    fn classify_small_space() {
        let pipeline = Pipeline::default_for(1);
        for text in ["------", "1RA---", "0RB---_0LA---", "1RB1LB_1LA---"] {
            let machine = m(text);
            let c = classify(&machine, &blank(), &pipeline);
            assert_ne!(c.settled_by, Stage::Unsettled, "{text}");
            if let RunOutcome::NonHaltingProven { proof } = &c.outcome {
                assert!(verify_proof(&machine, proof));
                assert_eq!(
                    run(&machine, &blank(), 10 * pipeline.halt_budget),
                    RunOutcome::Unknown {
                        budget: 10 * pipeline.halt_budget
                    }
                );
            }
        }
    }

    #[test]
    fn tiny_budget_is_unknown_then_halts() {
        let machine = m("1RB1LB_1LA---");
        let small = Pipeline::new(3, vec![3]);
        assert_eq!(
            classify(&machine, &blank(), &small).outcome,
            RunOutcome::Unknown { budget: 3 }
        );
        assert_eq!(
            classify(&machine, &blank(), &Pipeline::new(10, vec![10])).outcome,
            RunOutcome::Halted { steps: 6 }
        );
    }
}
