//! Bounded evaluation.
//!
//! `min` searches `t = 0..=H`. `max` returns the greatest `t <= H` with
//! `P(t)`, and only if `P` stays false on `(t, H + V]`. Anything the budget
//! cannot settle is `BudgetExceeded`, never `Undefined`; the latter needs a
//! caller-supplied bound on where the predicate can hold.

use std::collections::HashMap;

use num_bigint::BigUint;

use super::{decode_input, DslError, Expr};
use crate::engine::BBResult;
use crate::enumerate::{oracle_space_size, space_size, OracleEnumerator, RawEnumerator};
use crate::machine::{run, RunOutcome};
use crate::oracle::{oracle_run, OracleRunOutcome, OracleTable};

/// Largest machine space [`bb_expression`] accepts by default.
pub const MAX_BB_SPACE: u64 = 250_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalBudget {
    /// H: largest value `min` and `max` may return.
    pub horizon: u64,
    /// V: how far past H a `max` is checked for later witnesses.
    pub verify: u64,
    /// Longest simulation `step-pred` may run.
    pub step_cap: u64,
    /// Node evaluations per call before giving up.
    pub work_cap: u64,
}

impl EvalBudget {
    pub fn new(horizon: u64, verify: u64) -> Self {
        EvalBudget {
            horizon,
            verify,
            step_cap: 100_000,
            work_cap: 200_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalOutcome {
    Value(u64),
    Undefined,
    BudgetExceeded { horizon: u64 },
}

enum Stop {
    Budget,
    Error(DslError),
}

impl From<DslError> for Stop {
    fn from(e: DslError) -> Self {
        Stop::Error(e)
    }
}

/// What is known about one (machine, input) pair.
#[derive(Clone, Copy)]
struct Known {
    halted_at: Option<u64>,
    /// No halt happens at any step `<= checked`.
    checked: u64,
}

enum Space {
    Plain(RawEnumerator),
    Oracle(OracleEnumerator),
}

impl Space {
    fn total(&self) -> u128 {
        match self {
            Space::Plain(e) => e.total(),
            Space::Oracle(e) => e.total(),
        }
    }
}

/// Evaluates expressions under one budget, caching machine runs.
pub struct Evaluator {
    budget: EvalBudget,
    oracles: Vec<OracleTable>,
    spaces: HashMap<(u32, usize), Space>,
    runs: HashMap<(u32, usize, u64, u64), Known>,
    work: u64,
}

impl Evaluator {
    pub fn new(budget: EvalBudget) -> Self {
        Evaluator::with_oracles(budget, Vec::new())
    }

    /// `oracles` answer the inquiries of order ≥ 1 machines in `step-pred`.
    pub fn with_oracles(budget: EvalBudget, oracles: Vec<OracleTable>) -> Self {
        Evaluator {
            budget,
            oracles,
            spaces: HashMap::new(),
            runs: HashMap::new(),
            work: 0,
        }
    }

    pub fn budget(&self) -> EvalBudget {
        self.budget
    }

    fn start(&mut self, expr: &Expr, args: &[u64]) -> Result<(), DslError> {
        if let Some(expected) = expr.arity() {
            if expected != args.len() {
                return Err(DslError::Arguments {
                    expected,
                    got: args.len(),
                });
            }
        }
        self.work = 0;
        Ok(())
    }

    fn finish(&self, r: Result<u64, Stop>) -> Result<EvalOutcome, DslError> {
        match r {
            Ok(v) => Ok(EvalOutcome::Value(v)),
            Err(Stop::Budget) => Ok(EvalOutcome::BudgetExceeded {
                horizon: self.budget.horizon,
            }),
            Err(Stop::Error(e)) => Err(e),
        }
    }

    pub fn eval(&mut self, expr: &Expr, args: &[u64]) -> Result<EvalOutcome, DslError> {
        self.start(expr, args)?;
        let r = self.value(expr, args);
        self.finish(r)
    }

    /// Like [`Evaluator::eval`], given a certificate that the outermost
    /// `min`/`max` predicate is false for every `t > support`. The search
    /// then covers `0..=support` exactly and may answer `Undefined`. Other
    /// expressions ignore the certificate.
    pub fn eval_with_support(
        &mut self,
        expr: &Expr,
        args: &[u64],
        support: u64,
    ) -> Result<EvalOutcome, DslError> {
        self.start(expr, args)?;
        let (p, lowest) = match expr {
            Expr::Min(p) => (p, true),
            Expr::Max(p) => (p, false),
            _ => {
                let r = self.value(expr, args);
                return self.finish(r);
            }
        };
        let mut buf = vec![0];
        buf.extend_from_slice(args);
        let order: Box<dyn Iterator<Item = u64>> = if lowest {
            Box::new(0..=support)
        } else {
            Box::new((0..=support).rev())
        };
        for t in order {
            buf[0] = t;
            match self.value(p, &buf) {
                Ok(0) => {}
                Ok(_) => return Ok(EvalOutcome::Value(t)),
                Err(e) => return self.finish(Err(e)),
            }
        }
        Ok(EvalOutcome::Undefined)
    }

    fn value(&mut self, e: &Expr, args: &[u64]) -> Result<u64, Stop> {
        self.work += 1;
        if self.work > self.budget.work_cap {
            return Err(Stop::Budget);
        }
        let arg = |i: usize| args.get(i).copied().unwrap_or(0);
        match e {
            Expr::Zero => Ok(0),
            Expr::Succ => arg(0).checked_add(1).ok_or(Stop::Error(DslError::Overflow)),
            Expr::Proj { i, .. } => Ok(arg(i - 1)),
            Expr::Lit(n) => Ok(*n),
            Expr::Comp { h, gs } => {
                let vals = gs
                    .iter()
                    .map(|g| self.value(g, args))
                    .collect::<Result<Vec<_>, _>>()?;
                self.value(h, &vals)
            }
            Expr::PrimRec { g, h } => {
                let (y, rest) = args.split_first().unwrap_or((&0, &[]));
                let mut acc = self.value(g, rest)?;
                let mut buf = vec![0, 0];
                buf.extend_from_slice(rest);
                for i in 0..*y {
                    buf[0] = i;
                    buf[1] = acc;
                    acc = self.value(h, &buf)?;
                }
                Ok(acc)
            }
            Expr::Min(p) => {
                let mut buf = vec![0];
                buf.extend_from_slice(args);
                for t in 0..=self.budget.horizon {
                    buf[0] = t;
                    if self.value(p, &buf)? != 0 {
                        return Ok(t);
                    }
                }
                Err(Stop::Budget)
            }
            Expr::Max(p) => {
                let mut buf = vec![0];
                buf.extend_from_slice(args);
                let h = self.budget.horizon;
                let end = h.saturating_add(self.budget.verify);
                let mut best = None;
                for t in 0..=end {
                    buf[0] = t;
                    if self.value(p, &buf)? != 0 {
                        if t > h {
                            return Err(Stop::Budget);
                        }
                        best = Some(t);
                    }
                }
                best.ok_or(Stop::Budget)
            }
            Expr::Cmp { op, left, right } => {
                let a = self.value(left, args)?;
                let b = self.value(right, args)?;
                Ok(op.holds(a, b) as u64)
            }
            Expr::StepPred { order, states } => self
                .halts_exactly(*order, *states, arg(0), arg(1), arg(2))
                .map(u64::from),
        }
    }

    fn halts_exactly(
        &mut self,
        order: u32,
        states: usize,
        t: u64,
        s: u64,
        k: u64,
    ) -> Result<bool, Stop> {
        let space = match self.spaces.entry((order, states)) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let space = if order == 0 {
                    RawEnumerator::new(states).map(Space::Plain)
                } else {
                    OracleEnumerator::new(order, states).map(Space::Oracle)
                };
                e.insert(space.map_err(|_| Stop::Budget)?)
            }
        };
        if k as u128 >= space.total() {
            return Ok(false);
        }
        let key = (order, states, s, k);
        if let Some(known) = self.runs.get(&key) {
            if let Some(h) = known.halted_at {
                return Ok(h == t);
            }
            if t <= known.checked {
                return Ok(false);
            }
        }
        if t > self.budget.step_cap {
            return Err(Stop::Budget);
        }
        let budget = t
            .max(self.budget.horizon.saturating_add(self.budget.verify))
            .clamp(1, self.budget.step_cap);
        let input = decode_input(s);
        let known = match space {
            Space::Plain(e) => match run(&e.machine_at(k as u128), &input, budget) {
                RunOutcome::Halted { steps } => Known {
                    halted_at: Some(steps),
                    checked: steps,
                },
                RunOutcome::NonHaltingProven { .. } => Known {
                    halted_at: None,
                    checked: u64::MAX,
                },
                RunOutcome::Unknown { budget } => Known {
                    halted_at: None,
                    checked: budget,
                },
            },
            Space::Oracle(e) => {
                match oracle_run(&e.machine_at(k as u128), &input, budget, &self.oracles) {
                    OracleRunOutcome::Halted { steps } => Known {
                        halted_at: Some(steps),
                        checked: steps,
                    },
                    OracleRunOutcome::NonHaltingProven { .. } => Known {
                        halted_at: None,
                        checked: u64::MAX,
                    },
                    OracleRunOutcome::Unknown { budget } => Known {
                        halted_at: None,
                        checked: budget,
                    },
                    OracleRunOutcome::Unresolved { .. } => return Err(Stop::Budget),
                }
            }
        };
        self.runs.insert(key, known);
        Ok(known.halted_at == Some(t))
    }
}

fn add() -> Expr {
    Expr::primrec(
        Expr::Proj { i: 1, j: 1 },
        Expr::comp(Expr::Succ, vec![Expr::Proj { i: 2, j: 3 }]).expect("arity 3"),
    )
    .expect("addition")
}

/// BB(s, m, n) as `max_t ∃k < |T(m, n)|. step-pred(t, s, k)`, taking the
/// input code `s`. The bounded existential counts witnesses by primitive
/// recursion over `k` and compares the count with 1.
pub fn bb_expression(order: u32, states: usize) -> Result<Expr, DslError> {
    bb_expression_capped(order, states, MAX_BB_SPACE)
}

pub fn bb_expression_capped(order: u32, states: usize, limit: u64) -> Result<Expr, DslError> {
    let size: BigUint = if order == 0 {
        space_size(states)
    } else {
        oracle_space_size(order, states)
    };
    if size > BigUint::from(limit) {
        return Err(DslError::TooLarge {
            size: size.to_string(),
            limit,
        });
    }
    let total = u64::try_from(&size).expect("below the limit");
    let p = |i, j| Expr::Proj { i, j };
    // h(k, count, t, s) = step(t, s, k) + count
    let step = Expr::comp(
        Expr::StepPred { order, states },
        vec![p(3, 4), p(4, 4), p(1, 4)],
    )
    .expect("arity 4");
    let h = Expr::comp(add(), vec![step, p(2, 4)]).expect("arity 4");
    let count = Expr::primrec(Expr::Lit(0), h).expect("arity 3");
    let witnesses = Expr::comp(count, vec![Expr::Lit(total), p(1, 2), p(2, 2)]).expect("arity 2");
    let exists = Expr::cmp(super::CmpOp::Ge, witnesses, Expr::Lit(1)).expect("arity 2");
    Ok(Expr::Max(Box::new(exists)))
}

/// Support certificate for [`bb_expression`] from an exact search: no
/// machine halts after BB steps.
pub fn step_support(result: &BBResult) -> Option<u64> {
    result.exact.then_some(result.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_expr;

    fn value(text: &str, args: &[u64], h: u64, v: u64) -> EvalOutcome {
        Evaluator::new(EvalBudget::new(h, v))
            .eval(&parse_expr(text).unwrap(), args)
            .unwrap()
    }

    #[test]
    fn base_functions_and_operators() {
        let add = "(primrec (proj 1 1) (comp (succ) (proj 2 3)))";
        assert_eq!(value(add, &[2, 3], 0, 0), EvalOutcome::Value(5));
        assert_eq!(
            value("(comp (succ) (zero))", &[9], 0, 0),
            EvalOutcome::Value(1)
        );
        assert_eq!(value("(proj 2 3)", &[4, 5, 6], 0, 0), EvalOutcome::Value(5));
        assert_eq!(
            value("(min (ge (proj 1 1) 3))", &[], 10, 0),
            EvalOutcome::Value(3)
        );
        assert_eq!(
            value("(min (ge (proj 1 1) 3))", &[], 2, 0),
            EvalOutcome::BudgetExceeded { horizon: 2 }
        );
        assert_eq!(
            value("(max (le (proj 1 1) 4))", &[], 5, 1),
            EvalOutcome::Value(4)
        );
        assert_eq!(
            value("(max (le (proj 1 1) 4))", &[], 3, 10),
            EvalOutcome::BudgetExceeded { horizon: 3 }
        );
        assert_eq!(value("(eq 3 3)", &[], 0, 0), EvalOutcome::Value(1));
        let mut e = Evaluator::new(EvalBudget::new(1, 1));
        assert_eq!(
            e.eval(&parse_expr(add).unwrap(), &[1]),
            Err(DslError::Arguments {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn support_certificates_settle_searches() {
        let mut e = Evaluator::new(EvalBudget::new(0, 0));
        let never = parse_expr("(max (eq (proj 1 1) 100))").unwrap();
        assert_eq!(
            e.eval_with_support(&never, &[], 50).unwrap(),
            EvalOutcome::Undefined
        );
        let four = parse_expr("(max (le (proj 1 1) 4))").unwrap();
        assert_eq!(
            e.eval_with_support(&four, &[], 4).unwrap(),
            EvalOutcome::Value(4)
        );
        let mut short = Evaluator::new(EvalBudget::new(2, 5));
        assert_eq!(
            short.eval(&four, &[]).unwrap(),
            EvalOutcome::BudgetExceeded { horizon: 2 }
        );
    }

    #[test]
    fn bb_expressions_match_known_values() {
        let one = bb_expression(0, 1).unwrap();
        assert_eq!(one.arity(), Some(1));
        let mut e = Evaluator::new(EvalBudget::new(10, 10));
        assert_eq!(e.eval(&one, &[0]).unwrap(), EvalOutcome::Value(1));
        let mut e = Evaluator::new(EvalBudget::new(3, 20));
        assert_eq!(
            e.eval(&one, &[2]).unwrap(),
            EvalOutcome::Value(2),
            "one-state machines on input 1"
        );
        assert!(matches!(
            bb_expression(0, 3),
            Err(DslError::TooLarge {
                limit: MAX_BB_SPACE,
                ..
            })
        ));
        assert_eq!(parse_expr(&one.to_string()).unwrap(), one);
    }
}
