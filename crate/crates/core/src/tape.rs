//! Two-way infinite binary tape.

use std::fmt;
use std::str::FromStr;

use crate::error::ParseError;
use crate::machine::{Move, Symbol};

/// A finite string over `{0,1}`, used for machine inputs, tape contents and
/// oracle numerals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(pub Vec<Symbol>);

impl BitString {
    pub fn empty() -> Self {
        BitString(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    /// Renders the string, using `ε` for the empty string.
    pub fn display_or_epsilon(&self) -> String {
        if self.is_empty() {
            "ε".to_string()
        } else {
            self.to_string()
        }
    }

    /// Inverse of [`BitString::display_or_epsilon`]; also accepts `""`.
    pub fn parse_or_epsilon(text: &str) -> Result<Self, ParseError> {
        if text == "ε" {
            Ok(BitString::empty())
        } else {
            text.parse()
        }
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s)?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(Symbol::Zero),
                '1' => Ok(Symbol::One),
                _ => Err(ParseError::at(i, format!("non-binary character {c:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(BitString)
    }
}

/// Tape with dense storage that grows in both directions.
///
/// Cells outside `[min_visited, max_visited]` always read 0.
#[derive(Clone, Debug)]
pub struct Tape {
    cells: Vec<Symbol>,
    /// Cell index stored at `cells[0]`.
    origin: i64,
    head: i64,
    min_visited: i64,
    max_visited: i64,
}

impl PartialEq for Tape {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head
            && self.min_visited == other.min_visited
            && self.max_visited == other.max_visited
            && (self.min_visited..=self.max_visited).all(|i| self.get(i) == other.get(i))
    }
}

impl Eq for Tape {}

impl Default for Tape {
    fn default() -> Self {
        Tape::blank()
    }
}

impl Tape {
    pub fn blank() -> Self {
        Tape {
            cells: vec![Symbol::Zero; 16],
            origin: -8,
            head: 0,
            min_visited: 0,
            max_visited: 0,
        }
    }

    /// Input written at cells `0..len`, head on cell 0.
    pub fn with_input(input: &BitString) -> Self {
        let mut tape = Tape::blank();
        for (i, &s) in input.symbols().iter().enumerate() {
            tape.set(i as i64, s);
        }
        tape.max_visited = input.len().saturating_sub(1) as i64;
        tape
    }

    /// Tape holding `content` at cells `0..len` with the head on cell 0 and
    /// the visited extent equal to the content.
    pub(crate) fn from_content(content: &[Symbol]) -> Self {
        Tape::with_input(&BitString(content.to_vec()))
    }

    pub fn head(&self) -> i64 {
        self.head
    }

    pub fn min_visited(&self) -> i64 {
        self.min_visited
    }

    pub fn max_visited(&self) -> i64 {
        self.max_visited
    }

    pub fn read(&self) -> Symbol {
        self.get(self.head)
    }

    pub fn get(&self, index: i64) -> Symbol {
        let offset = index - self.origin;
        if offset < 0 {
            return Symbol::Zero;
        }
        self.cells
            .get(offset as usize)
            .copied()
            .unwrap_or(Symbol::Zero)
    }

    pub fn write(&mut self, symbol: Symbol) {
        self.set(self.head, symbol);
    }

    pub fn shift(&mut self, dir: Move) {
        match dir {
            Move::Left => {
                self.head -= 1;
                self.min_visited = self.min_visited.min(self.head);
            }
            Move::Right => {
                self.head += 1;
                self.max_visited = self.max_visited.max(self.head);
            }
        }
    }

    fn set(&mut self, index: i64, symbol: Symbol) {
        if index < self.origin {
            let grow = (self.origin - index) as usize + self.cells.len();
            let mut cells = vec![Symbol::Zero; grow];
            cells.extend_from_slice(&self.cells);
            self.origin -= grow as i64;
            self.cells = cells;
        }
        let offset = (index - self.origin) as usize;
        if offset >= self.cells.len() {
            let new_len = (offset + 1).max(self.cells.len() * 2);
            self.cells.resize(new_len, Symbol::Zero);
        }
        self.cells[offset] = symbol;
    }

    /// Contents of the visited extent, leftmost cell first.
    pub fn visited(&self) -> Vec<Symbol> {
        (self.min_visited..=self.max_visited)
            .map(|i| self.get(i))
            .collect()
    }

    /// Position of the head inside [`Tape::visited`].
    pub fn head_offset(&self) -> usize {
        (self.head - self.min_visited) as usize
    }

    /// Smallest and largest cells holding a 1, if any.
    pub fn nonzero_span(&self) -> Option<(i64, i64)> {
        let first = (self.min_visited..=self.max_visited).find(|&i| self.get(i) == Symbol::One)?;
        let last = (self.min_visited..=self.max_visited)
            .rev()
            .find(|&i| self.get(i) == Symbol::One)?;
        Some((first, last))
    }

    /// True if every cell strictly right of `index` reads 0.
    pub fn blank_right_of(&self, index: i64) -> bool {
        ((index + 1)..=self.max_visited).all(|i| self.get(i) == Symbol::Zero)
    }

    /// True if every cell strictly left of `index` reads 0.
    pub fn blank_left_of(&self, index: i64) -> bool {
        (self.min_visited..index).all(|i| self.get(i) == Symbol::Zero)
    }

    pub fn count_ones(&self) -> usize {
        (self.min_visited..=self.max_visited)
            .filter(|&i| self.get(i) == Symbol::One)
            .count()
    }
}
