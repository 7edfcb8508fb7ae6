//! Enumeration of machine spaces.
//!
//! The raw stream lists every table of T(n) in lexicographic order of the
//! text format; since `-` < `0` < `1`, `L` < `R` and state letters are
//! ordered, this is a mixed-radix count over the 2n slots with the first slot
//! most significant. Cursors are plain indices into that order.
//!
//! The tree-normal-form stream is simulation driven: starting from the
//! all-undefined table, a table that halts on some undefined slot is
//! expanded by defining that slot in every way that introduces at most the
//! next unused state. Each table appears before its children (preorder).

use num_bigint::BigUint;
use thiserror::Error;

use crate::machine::{run_report, Action, MachineTable, Move, RunOutcome, Symbol, MAX_STATES};
use crate::oracle::{slot_options, OracleEntry, OracleMachineTable};
use crate::tape::BitString;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("state count {0} outside 1..=26")]
    BadStateCount(usize),
    #[error("machine space too large to index")]
    TooLarge,
    #[error("order must be at least 1")]
    BadOrder,
}

/// |T(n)| = (4n+1)^(2n).
pub fn space_size(states: usize) -> BigUint {
    assert!(states >= 1, "state count must be positive");
    BigUint::from(4 * states as u64 + 1).pow(2 * states as u32)
}

/// Number of order-m, n-state oracle tables: one of `16n + mn + 1` entries in
/// each of the 4n slots.
pub fn oracle_space_size(order: u32, states: usize) -> BigUint {
    BigUint::from(slot_options(order, states)).pow(4 * states as u32)
}

fn to_u128(value: &BigUint) -> Option<u128> {
    let digits = value.to_u64_digits();
    match digits.len() {
        0 => Some(0),
        1 => Some(digits[0] as u128),
        2 => Some(digits[0] as u128 | (digits[1] as u128) << 64),
        _ => None,
    }
}

/// Entries a raw slot may hold, in text order.
pub fn raw_slot_options(states: usize) -> Vec<Option<Action>> {
    let mut options = vec![None];
    for write in Symbol::ALL {
        for dir in Move::ALL {
            for next in 0..states {
                options.push(Some(Action { write, dir, next }));
            }
        }
    }
    options
}

/// Deterministic iterator over T(n) by index.
#[derive(Clone, Debug)]
pub struct RawEnumerator {
    states: usize,
    options: Vec<Option<Action>>,
    next: u128,
    end: u128,
}

impl RawEnumerator {
    pub fn new(states: usize) -> Result<Self, EnumerationError> {
        if !(1..=MAX_STATES).contains(&states) {
            return Err(EnumerationError::BadStateCount(states));
        }
        let total = to_u128(&space_size(states)).ok_or(EnumerationError::TooLarge)?;
        Ok(RawEnumerator {
            states,
            options: raw_slot_options(states),
            next: 0,
            end: total,
        })
    }

    /// Restricts the stream to indices `start..end` (clamped to the space).
    pub fn range(mut self, start: u128, end: u128) -> Self {
        self.end = self.end.min(end);
        self.next = start.min(self.end);
        self
    }

    pub fn cursor(&self) -> u128 {
        self.next
    }

    pub fn total(&self) -> u128 {
        to_u128(&space_size(self.states)).expect("checked in new")
    }

    pub fn machine_at(&self, mut index: u128) -> MachineTable {
        let radix = self.options.len() as u128;
        let slots = 2 * self.states;
        let mut entries = vec![None; slots];
        for slot in (0..slots).rev() {
            entries[slot] = self.options[(index % radix) as usize];
            index /= radix;
        }
        MachineTable::from_entries(self.states, entries).expect("valid by construction")
    }
}

impl Iterator for RawEnumerator {
    type Item = MachineTable;

    fn next(&mut self) -> Option<MachineTable> {
        if self.next >= self.end {
            return None;
        }
        let m = self.machine_at(self.next);
        self.next += 1;
        Some(m)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

pub fn enumerate_raw(states: usize) -> Result<RawEnumerator, EnumerationError> {
    RawEnumerator::new(states)
}

/// Tree-normal-form stream for a given input. Expansion simulates each table
/// for `expand_budget` steps; a table that has not halted by then is a leaf.
#[derive(Clone, Debug)]
pub struct TnfEnumerator {
    states: usize,
    input: BitString,
    expand_budget: u64,
    stack: Vec<MachineTable>,
    position: u64,
}

impl TnfEnumerator {
    pub fn new(
        states: usize,
        input: BitString,
        expand_budget: u64,
    ) -> Result<Self, EnumerationError> {
        if !(1..=MAX_STATES).contains(&states) {
            return Err(EnumerationError::BadStateCount(states));
        }
        Ok(TnfEnumerator {
            states,
            input,
            expand_budget,
            stack: vec![MachineTable::empty(states)],
            position: 0,
        })
    }

    /// Index of the next table in the stream.
    pub fn cursor(&self) -> u64 {
        self.position
    }

    /// Advances past the first `index` tables.
    pub fn starting_at(mut self, index: u64) -> Self {
        while self.position < index && self.next().is_some() {}
        self
    }

    fn children(&self, machine: &MachineTable) -> Vec<MachineTable> {
        let report = run_report(machine, &self.input, self.expand_budget);
        if !matches!(report.outcome, RunOutcome::Halted { .. }) {
            return Vec::new();
        }
        // defining the last undefined slot leaves nothing to halt on
        if machine.undefined_count() <= 1 {
            return Vec::new();
        }
        let state = report.last.state;
        let read = report.last.tape.read();
        let used = machine
            .entries()
            .iter()
            .flatten()
            .map(|a| a.next)
            .max()
            .unwrap_or(0);
        let limit = (used + 1).min(self.states - 1);
        let first = machine.undefined_count() == 2 * self.states;
        let blank = self.input.is_empty();
        let mut out = Vec::new();
        for write in Symbol::ALL {
            for dir in Move::ALL {
                for next in 0..=limit {
                    if blank && first {
                        // mirror images halt alike on the blank tape, and a
                        // first transition back into A reads fresh blanks
                        // forever
                        if dir == Move::Left || next == 0 {
                            continue;
                        }
                    }
                    let mut child = machine.clone();
                    child.set_entry(state, read, Some(Action { write, dir, next }));
                    out.push(child);
                }
            }
        }
        out
    }
}

impl Iterator for TnfEnumerator {
    type Item = MachineTable;

    fn next(&mut self) -> Option<MachineTable> {
        let machine = self.stack.pop()?;
        let children = self.children(&machine);
        self.stack.extend(children.into_iter().rev());
        self.position += 1;
        Some(machine)
    }
}

/// Blank-tape tree-normal-form stream with the default expansion budget
/// for `states`.
pub fn enumerate_tnf(states: usize) -> Result<TnfEnumerator, EnumerationError> {
    let budget = crate::deciders::Pipeline::default_for(states).halt_budget;
    TnfEnumerator::new(states, BitString::empty(), budget)
}

/// Deterministic iterator over order-m, n-state oracle tables in text order.
#[derive(Clone, Debug)]
pub struct OracleEnumerator {
    states: usize,
    order: u32,
    options: Vec<Option<OracleEntry>>,
    next: u128,
    end: u128,
    total: u128,
}

impl OracleEnumerator {
    pub fn new(order: u32, states: usize) -> Result<Self, EnumerationError> {
        if order == 0 {
            return Err(EnumerationError::BadOrder);
        }
        if !(1..=MAX_STATES).contains(&states) {
            return Err(EnumerationError::BadStateCount(states));
        }
        let total = to_u128(&oracle_space_size(order, states)).ok_or(EnumerationError::TooLarge)?;
        let mut options: Vec<Option<OracleEntry>> = vec![None];
        for work_write in Symbol::ALL {
            for work_move in Move::ALL {
                for oracle_write in Symbol::ALL {
                    for oracle_move in Move::ALL {
                        for next in 0..states {
                            options.push(Some(OracleEntry::Move {
                                next,
                                work_write,
                                work_move,
                                oracle_write,
                                oracle_move,
                            }));
                        }
                    }
                }
            }
        }
        for oracle in 1..=order {
            for next in 0..states {
                options.push(Some(OracleEntry::Inquire { next, oracle }));
            }
        }
        options.sort_by_key(crate::oracle::format_slot);
        Ok(OracleEnumerator {
            states,
            order,
            options,
            next: 0,
            end: total,
            total,
        })
    }

    /// Stops after `limit` tables.
    pub fn limited(mut self, limit: Option<u128>) -> Self {
        if let Some(l) = limit {
            self.end = self.end.min(self.next.saturating_add(l));
        }
        self
    }

    pub fn range(mut self, start: u128, end: u128) -> Self {
        self.end = self.total.min(end);
        self.next = start.min(self.end);
        self
    }

    pub fn cursor(&self) -> u128 {
        self.next
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    /// True when the stream reaches the end of the space.
    pub fn is_complete(&self) -> bool {
        self.end == self.total
    }

    pub fn machine_at(&self, mut index: u128) -> OracleMachineTable {
        let radix = self.options.len() as u128;
        let slots = 4 * self.states;
        let mut entries = vec![None; slots];
        for slot in (0..slots).rev() {
            entries[slot] = self.options[(index % radix) as usize];
            index /= radix;
        }
        OracleMachineTable::new(self.states, self.order, entries).expect("valid by construction")
    }
}

impl Iterator for OracleEnumerator {
    type Item = OracleMachineTable;

    fn next(&mut self) -> Option<OracleMachineTable> {
        if self.next >= self.end {
            return None;
        }
        let m = self.machine_at(self.next);
        self.next += 1;
        Some(m)
    }
}

pub fn enumerate_oracle(
    order: u32,
    states: usize,
    limit: Option<u128>,
) -> Result<OracleEnumerator, EnumerationError> {
    Ok(OracleEnumerator::new(order, states)?.limited(limit))
}
