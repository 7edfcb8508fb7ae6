//! Single-tape binary Turing machines that halt on an undefined transition.
//!
//! Machines use the standard compact text format: one group per state, groups
//! separated by `_`, each group holding the entries for read symbol 0 and 1.
//! A defined entry is write digit, move letter and next-state letter
//! (`1RB`); an undefined entry is `---`.

use std::fmt;
use std::str::FromStr;

use crate::deciders::NonHaltProof;
use crate::error::ParseError;
use crate::tape::{BitString, Tape};

/// Largest state count the text format can name.
pub const MAX_STATES: usize = 26;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Symbol {
    Zero = 0,
    One = 1,
}

impl Symbol {
    pub const ALL: [Symbol; 2] = [Symbol::Zero, Symbol::One];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn flipped(self) -> Symbol {
        match self {
            Symbol::Zero => Symbol::One,
            Symbol::One => Symbol::Zero,
        }
    }

    pub(crate) fn from_digit(c: char) -> Option<Symbol> {
        match c {
            '0' => Some(Symbol::Zero),
            '1' => Some(Symbol::One),
            _ => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 2] = [Move::Left, Move::Right];

    pub fn letter(self) -> char {
        match self {
            Move::Left => 'L',
            Move::Right => 'R',
        }
    }

    pub(crate) fn from_letter(c: char) -> Option<Move> {
        match c {
            'L' => Some(Move::Left),
            'R' => Some(Move::Right),
            _ => None,
        }
    }

    pub fn mirrored(self) -> Move {
        match self {
            Move::Left => Move::Right,
            Move::Right => Move::Left,
        }
    }
}

pub fn state_letter(state: usize) -> char {
    (b'A' + state as u8) as char
}

pub(crate) fn state_from_letter(c: char) -> Option<usize> {
    c.is_ascii_uppercase().then(|| (c as u8 - b'A') as usize)
}

/// A defined transition: write, move, enter `next`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Action {
    pub write: Symbol,
    pub dir: Move,
    pub next: usize,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            self.write,
            self.dir.letter(),
            state_letter(self.next)
        )
    }
}

/// Transition table with `2n` slots indexed by `(state, read symbol)`;
/// state 0 is the start state. `None` is an undefined entry.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MachineTable {
    states: usize,
    entries: Vec<Option<Action>>,
}

impl MachineTable {
    /// Machine with every entry undefined.
    pub fn empty(states: usize) -> Self {
        assert!(
            (1..=MAX_STATES).contains(&states),
            "state count out of range"
        );
        MachineTable {
            states,
            entries: vec![None; 2 * states],
        }
    }

    pub fn from_entries(states: usize, entries: Vec<Option<Action>>) -> Result<Self, ParseError> {
        if !(1..=MAX_STATES).contains(&states) {
            return Err(ParseError::at(
                0,
                format!("state count {states} out of range"),
            ));
        }
        if entries.len() != 2 * states {
            return Err(ParseError::at(
                0,
                "entry count must be twice the state count",
            ));
        }
        if let Some(bad) = entries.iter().flatten().find(|a| a.next >= states) {
            return Err(ParseError::at(
                0,
                format!("state {} out of range", state_letter(bad.next)),
            ));
        }
        Ok(MachineTable { states, entries })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn entries(&self) -> &[Option<Action>] {
        &self.entries
    }

    #[inline]
    pub fn entry(&self, state: usize, read: Symbol) -> Option<Action> {
        self.entries[2 * state + read.index()]
    }

    pub fn set_entry(&mut self, state: usize, read: Symbol, action: Option<Action>) {
        if let Some(a) = action {
            assert!(a.next < self.states, "next state out of range");
        }
        self.entries[2 * state + read.index()] = action;
    }

    pub fn undefined_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_none()).count()
    }

    /// Table with every move direction reversed.
    pub fn mirrored(&self) -> MachineTable {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                e.map(|a| Action {
                    dir: a.dir.mirrored(),
                    ..a
                })
            })
            .collect();
        MachineTable {
            states: self.states,
            entries,
        }
    }
}

impl fmt::Display for MachineTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for state in 0..self.states {
            if state > 0 {
                f.write_str("_")?;
            }
            for read in Symbol::ALL {
                match self.entry(state, read) {
                    Some(a) => write!(f, "{a}")?,
                    None => f.write_str("---")?,
                }
            }
        }
        Ok(())
    }
}

impl FromStr for MachineTable {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        parse_machine(text)
    }
}

pub fn parse_machine(text: &str) -> Result<MachineTable, ParseError> {
    let groups: Vec<&str> = text.split('_').collect();
    let states = groups.len();
    if states > MAX_STATES {
        return Err(ParseError::at(
            0,
            format!("{states} states exceed the format limit"),
        ));
    }
    let mut entries = Vec::with_capacity(2 * states);
    let mut offset = 0;
    for group in &groups {
        let chars: Vec<char> = group.chars().collect();
        if chars.len() != 6 {
            return Err(ParseError::at(
                offset,
                format!("state group {group:?} must hold exactly two 3-character entries"),
            ));
        }
        for (k, entry) in chars.chunks(3).enumerate() {
            let at = offset + 3 * k;
            entries.push(parse_entry(entry, states, at)?);
        }
        offset += group.len() + 1;
    }
    MachineTable::from_entries(states, entries)
}

fn parse_entry(entry: &[char], states: usize, at: usize) -> Result<Option<Action>, ParseError> {
    if entry == ['-', '-', '-'] {
        return Ok(None);
    }
    let write = Symbol::from_digit(entry[0])
        .ok_or_else(|| ParseError::at(at, format!("bad write symbol {:?}", entry[0])))?;
    let dir = Move::from_letter(entry[1])
        .ok_or_else(|| ParseError::at(at + 1, format!("bad move {:?}", entry[1])))?;
    let next = state_from_letter(entry[2])
        .ok_or_else(|| ParseError::at(at + 2, format!("bad state letter {:?}", entry[2])))?;
    if next >= states {
        return Err(ParseError::at(
            at + 2,
            format!(
                "state {} out of range for a {states}-state machine",
                entry[2]
            ),
        ));
    }
    Ok(Some(Action { write, dir, next }))
}

pub fn format_machine(machine: &MachineTable) -> String {
    machine.to_string()
}

/// Machine state plus tape, with the number of steps taken so far.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub state: usize,
    pub tape: Tape,
    pub steps: u64,
}

impl Configuration {
    pub fn initial(input: &BitString) -> Self {
        Configuration {
            state: 0,
            tape: Tape::with_input(input),
            steps: 0,
        }
    }

    /// Applies one step in place. Returns `Some(total steps)` when the
    /// transition is undefined; that halt step is counted.
    #[inline]
    pub fn advance(&mut self, machine: &MachineTable) -> Option<u64> {
        self.steps += 1;
        match machine.entry(self.state, self.tape.read()) {
            Some(a) => {
                self.tape.write(a.write);
                self.tape.shift(a.dir);
                self.state = a.next;
                None
            }
            None => Some(self.steps),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Next(Configuration),
    Halt { steps: u64 },
}

pub fn step(machine: &MachineTable, config: &Configuration) -> StepOutcome {
    let mut next = config.clone();
    match next.advance(machine) {
        None => StepOutcome::Next(next),
        Some(steps) => StepOutcome::Halt { steps },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunOutcome {
    Halted { steps: u64 },
    NonHaltingProven { proof: NonHaltProof },
    Unknown { budget: u64 },
}

impl RunOutcome {
    pub fn halted_steps(&self) -> Option<u64> {
        match self {
            RunOutcome::Halted { steps } => Some(*steps),
            _ => None,
        }
    }
}

/// Result of a run together with the configuration it stopped in. For a
/// halting run the final configuration is the one whose transition is
/// undefined.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub outcome: RunOutcome,
    pub last: Configuration,
}

pub fn run_report(machine: &MachineTable, input: &BitString, budget: u64) -> RunReport {
    assert!(budget >= 1, "budget must be at least one step");
    let mut config = Configuration::initial(input);
    while config.steps < budget {
        if machine.entry(config.state, config.tape.read()).is_none() {
            return RunReport {
                outcome: RunOutcome::Halted {
                    steps: config.steps + 1,
                },
                last: config,
            };
        }
        config.advance(machine);
    }
    RunReport {
        outcome: RunOutcome::Unknown { budget },
        last: config,
    }
}

pub fn run(machine: &MachineTable, input: &BitString, budget: u64) -> RunOutcome {
    run_report(machine, input, budget).outcome
}

/// Runs and records every configuration from the initial one up to the one
/// the halt step (or budget) was reached from.
pub fn run_traced(
    machine: &MachineTable,
    input: &BitString,
    budget: u64,
) -> (RunOutcome, Vec<Configuration>) {
    assert!(budget >= 1, "budget must be at least one step");
    let mut config = Configuration::initial(input);
    let mut trace = vec![config.clone()];
    loop {
        if config.steps >= budget {
            return (RunOutcome::Unknown { budget }, trace);
        }
        match step(machine, &config) {
            StepOutcome::Halt { steps } => return (RunOutcome::Halted { steps }, trace),
            StepOutcome::Next(next) => {
                trace.push(next.clone());
                config = next;
            }
        }
    }
}
