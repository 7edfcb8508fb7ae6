//! Ratio tables over exact busy beaver values.
//!
//! Growth rows compare BB(s,m,n) with BB(s,m,n+1), directly and after
//! squaring or exponentiating the smaller value. Cross rows compare two
//! inputs at the same n. Finite tables say nothing about limits, so every
//! row is labelled `EVIDENCE`.

use std::fmt;
use std::ops::RangeInclusive;

use super::{BBResult, EngineError, QueryKey};
use crate::tape::BitString;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RatioRow {
    Growth { n: usize, current: u64, next: u64 },
    Cross { n: usize, left: u64, right: u64 },
}

fn fraction(num: u64, den: u64) -> String {
    format!("{num}/{den}={:.4}", num as f64 / den as f64)
}

impl RatioRow {
    /// `(numerator, denominator)` of the plain ratio.
    pub fn ratio(&self) -> (u64, u64) {
        match *self {
            RatioRow::Growth { current, next, .. } => (current, next),
            RatioRow::Cross { left, right, .. } => (left, right),
        }
    }
}

/// Rows for one (s, t, m) choice; `Display` renders a tab-separated table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportTable {
    pub s: BitString,
    pub t: Option<BitString>,
    pub order: u32,
    pub rows: Vec<RatioRow>,
}

impl fmt::Display for ReportTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.s.display_or_epsilon();
        let m = self.order;
        for row in &self.rows {
            match *row {
                RatioRow::Growth { n, current, next } => {
                    // log10(2^a / b), printed since 2^a overflows quickly
                    let exp = current as f64 * 2f64.log10() - (next as f64).log10();
                    writeln!(
                        f,
                        "EVIDENCE\tgrowth\tn={n}\tBB({s},{m},{n})={current}\tBB({s},{m},{})={next}\tratio={}\tsquare={}\texp=10^{exp:.3}",
                        n + 1,
                        fraction(current, next),
                        fraction(current * current, next),
                    )?;
                }
                RatioRow::Cross { n, left, right } => {
                    let t = self
                        .t
                        .as_ref()
                        .map(BitString::display_or_epsilon)
                        .unwrap_or_default();
                    writeln!(
                        f,
                        "EVIDENCE\tcross\tn={n}\tBB({s},{m},{n})={left}\tBB({t},{m},{n})={right}\tratio={}",
                        fraction(left, right)
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Builds growth rows for `s` over `n_range` and, when `t` is given, cross
/// rows against `t`. `lookup` supplies results; anything missing or
/// inexact is refused.
pub fn ratio_report(
    s: &BitString,
    t: Option<&BitString>,
    order: u32,
    n_range: RangeInclusive<usize>,
    lookup: impl Fn(&QueryKey) -> Option<BBResult>,
) -> Result<ReportTable, EngineError> {
    let exact = |input: &BitString, n: usize| {
        let key = QueryKey::new(input.clone(), order, n);
        lookup(&key)
            .filter(|r| r.exact)
            .map(|r| r.value)
            .ok_or(EngineError::NotExact(key))
    };
    let mut rows = Vec::new();
    for n in n_range.clone() {
        rows.push(RatioRow::Growth {
            n,
            current: exact(s, n)?,
            next: exact(s, n + 1)?,
        });
    }
    if let Some(t) = t {
        for n in n_range {
            rows.push(RatioRow::Cross {
                n,
                left: exact(s, n)?,
                right: exact(t, n)?,
            });
        }
    }
    Ok(ReportTable {
        s: s.clone(),
        t: t.cloned(),
        order,
        rows,
    })
}
