//! Max-min partial recursive functions as s-expressions.
//!
//! ```text
//! expr := zero | succ | NAT
//!       | (zero) | (succ) | (proj i j)
//!       | (comp h g1 ... gk) | (primrec g h)
//!       | (min p) | (max p)
//!       | (eq a b) | (le a b) | (ge a b)
//!       | (step-pred m n)
//! ```
//!
//! `zero` and `succ` take one argument, `(proj i j)` takes `j`. A natural
//! literal is a constant of whatever arity its context needs. `(primrec g h)`
//! recurses on its first argument: `f(0, x) = g(x)`, `f(t+1, x) = h(t, f(t,
//! x), x)`. `(min p)` and `(max p)` search over the first argument of `p`.
//! Comparisons yield 1 or 0. Predicates treat 0 as false.
//!
//! `(step-pred m n)` takes `(t, s, k)`: 1 iff machine `k` of the raw
//! enumeration of T(m, n) halts on input `decode(s)` at exactly step `t`.
//! Inputs are coded bijectively, `code(s) = int("1" s, 2) - 1`.

use std::fmt;

use thiserror::Error;

use crate::tape::BitString;

mod eval;

pub use eval::{
    bb_expression, bb_expression_capped, step_support, EvalBudget, EvalOutcome, Evaluator,
    MAX_BB_SPACE,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("arity error at {position}: {message}")]
    Arity { position: usize, message: String },
    #[error("expression takes {expected} arguments, got {got}")]
    Arguments { expected: usize, got: usize },
    #[error("machine space of size {size} exceeds the limit {limit}")]
    TooLarge { size: String, limit: u64 },
    #[error("arithmetic overflow")]
    Overflow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Le,
    Ge,
}

impl CmpOp {
    fn name(self) -> &'static str {
        match self {
            CmpOp::Eq => "eq",
            CmpOp::Le => "le",
            CmpOp::Ge => "ge",
        }
    }

    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Zero,
    Succ,
    Proj {
        i: usize,
        j: usize,
    },
    Lit(u64),
    Comp {
        h: Box<Expr>,
        gs: Vec<Expr>,
    },
    PrimRec {
        g: Box<Expr>,
        h: Box<Expr>,
    },
    Min(Box<Expr>),
    Max(Box<Expr>),
    Cmp {
        op: CmpOp,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    StepPred {
        order: u32,
        states: usize,
    },
}

/// `None` accepts any argument count; used for literals.
type Arity = Option<usize>;

fn unify(arities: impl IntoIterator<Item = Arity>) -> Result<Arity, String> {
    let mut out = None;
    for a in arities.into_iter().flatten() {
        match out {
            None => out = Some(a),
            Some(b) if b != a => return Err(format!("arguments disagree on arity ({b} vs {a})")),
            _ => {}
        }
    }
    Ok(out)
}

impl Expr {
    /// Argument count; `None` for constants that accept any.
    pub fn arity(&self) -> Option<usize> {
        self.check().expect("arity checked at construction")
    }

    fn check(&self) -> Result<Arity, String> {
        match self {
            Expr::Zero | Expr::Succ => Ok(Some(1)),
            Expr::Proj { i, j } => {
                if *i >= 1 && i <= j {
                    Ok(Some(*j))
                } else {
                    Err(format!("projection needs 1 <= i <= j, got ({i} {j})"))
                }
            }
            Expr::Lit(_) => Ok(None),
            Expr::StepPred { .. } => Ok(Some(3)),
            Expr::Comp { h, gs } => {
                if let Some(k) = h.check()? {
                    if k != gs.len() {
                        return Err(format!(
                            "outer function takes {k} arguments, given {}",
                            gs.len()
                        ));
                    }
                }
                unify(gs.iter().map(Expr::check).collect::<Result<Vec<_>, _>>()?)
            }
            Expr::PrimRec { g, h } => match (g.check()?, h.check()?) {
                (Some(a), Some(b)) if b != a + 2 => Err(format!(
                    "step function must take {} arguments, takes {b}",
                    a + 2
                )),
                (_, Some(b)) if b < 2 => Err("step function takes at least 2 arguments".into()),
                (Some(a), _) => Ok(Some(a + 1)),
                (None, Some(b)) => Ok(Some(b - 1)),
                (None, None) => Ok(None),
            },
            Expr::Min(p) | Expr::Max(p) => match p.check()? {
                Some(0) => Err("search predicate needs an argument".into()),
                a => Ok(a.map(|a| a - 1)),
            },
            Expr::Cmp { left, right, .. } => unify([left.check()?, right.check()?]),
        }
    }

    pub fn comp(h: Expr, gs: Vec<Expr>) -> Result<Expr, String> {
        Expr::Comp { h: h.into(), gs }.checked()
    }

    pub fn primrec(g: Expr, h: Expr) -> Result<Expr, String> {
        Expr::PrimRec {
            g: g.into(),
            h: h.into(),
        }
        .checked()
    }

    pub fn cmp(op: CmpOp, left: Expr, right: Expr) -> Result<Expr, String> {
        Expr::Cmp {
            op,
            left: left.into(),
            right: right.into(),
        }
        .checked()
    }

    fn checked(self) -> Result<Expr, String> {
        self.check().map(|_| self)
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + match self {
            Expr::Comp { h, gs } => h.size() + gs.iter().map(Expr::size).sum::<usize>(),
            Expr::PrimRec { g, h } => g.size() + h.size(),
            Expr::Min(p) | Expr::Max(p) => p.size(),
            Expr::Cmp { left, right, .. } => left.size() + right.size(),
            _ => 0,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Zero => f.write_str("zero"),
            Expr::Succ => f.write_str("succ"),
            Expr::Proj { i, j } => write!(f, "(proj {i} {j})"),
            Expr::Lit(n) => write!(f, "{n}"),
            Expr::Comp { h, gs } => {
                write!(f, "(comp {h}")?;
                for g in gs {
                    write!(f, " {g}")?;
                }
                f.write_str(")")
            }
            Expr::PrimRec { g, h } => write!(f, "(primrec {g} {h})"),
            Expr::Min(p) => write!(f, "(min {p})"),
            Expr::Max(p) => write!(f, "(max {p})"),
            Expr::Cmp { op, left, right } => write!(f, "({} {left} {right})", op.name()),
            Expr::StepPred { order, states } => write!(f, "(step-pred {order} {states})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sexp {
    Atom { text: String, at: usize },
    List { items: Vec<Sexp>, at: usize },
}

impl Sexp {
    fn at(&self) -> usize {
        match self {
            Sexp::Atom { at, .. } | Sexp::List { at, .. } => *at,
        }
    }
}

fn syntax(position: usize, message: impl Into<String>) -> DslError {
    DslError::Syntax {
        position,
        message: message.into(),
    }
}

fn read_sexps(text: &str) -> Result<Vec<Sexp>, DslError> {
    let mut stack: Vec<(usize, Vec<Sexp>)> = vec![(0, Vec::new())];
    let mut chars = text.char_indices().peekable();
    while let Some((at, c)) = chars.next() {
        match c {
            ';' => while chars.next_if(|&(_, c)| c != '\n').is_some() {},
            '(' => stack.push((at, Vec::new())),
            ')' => {
                let (start, items) = stack
                    .pop()
                    .filter(|_| !stack.is_empty())
                    .ok_or_else(|| syntax(at, "unmatched `)`"))?;
                stack
                    .last_mut()
                    .expect("outer level")
                    .1
                    .push(Sexp::List { items, at: start });
            }
            c if c.is_whitespace() => {}
            _ => {
                let mut end = at + c.len_utf8();
                while let Some(&(i, c)) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    end = i + c.len_utf8();
                    chars.next();
                }
                stack.last_mut().expect("outer level").1.push(Sexp::Atom {
                    text: text[at..end].to_string(),
                    at,
                });
            }
        }
    }
    if stack.len() > 1 {
        let (start, _) = stack.pop().expect("open list");
        return Err(syntax(start, "unbalanced `(`"));
    }
    Ok(stack.pop().expect("outer level").1)
}

fn number<T: std::str::FromStr>(s: &Sexp) -> Result<T, DslError> {
    match s {
        Sexp::Atom { text, at } if text.chars().all(|c| c.is_ascii_digit()) => text
            .parse()
            .map_err(|_| syntax(*at, format!("number `{text}` out of range"))),
        other => Err(syntax(other.at(), "expected a natural number")),
    }
}

fn build(s: &Sexp) -> Result<Expr, DslError> {
    let arity = |at: usize| {
        move |message: String| DslError::Arity {
            position: at,
            message,
        }
    };
    match s {
        Sexp::Atom { text, at } => match text.as_str() {
            "zero" => Ok(Expr::Zero),
            "succ" => Ok(Expr::Succ),
            t if t.chars().all(|c| c.is_ascii_digit()) => number(s).map(Expr::Lit),
            t => Err(syntax(*at, format!("unknown atom `{t}`"))),
        },
        Sexp::List { items, at } => {
            let at = *at;
            let (head, args) = match items.split_first() {
                Some((Sexp::Atom { text, .. }, args)) => (text.as_str(), args),
                Some((other, _)) => return Err(syntax(other.at(), "expected an operator name")),
                None => return Err(syntax(at, "empty list")),
            };
            let want = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(syntax(
                        at,
                        format!("`{head}` takes {n} operands, got {}", args.len()),
                    ))
                }
            };
            let sub = |i: usize| build(&args[i]);
            match head {
                "zero" => want(0).map(|_| Expr::Zero),
                "succ" => want(0).map(|_| Expr::Succ),
                "proj" => {
                    want(2)?;
                    let e = Expr::Proj {
                        i: number(&args[0])?,
                        j: number(&args[1])?,
                    };
                    e.checked().map_err(arity(at))
                }
                "comp" => {
                    if args.is_empty() {
                        return Err(syntax(at, "`comp` needs an outer function"));
                    }
                    let gs = (1..args.len()).map(sub).collect::<Result<_, _>>()?;
                    Expr::comp(sub(0)?, gs).map_err(arity(at))
                }
                "primrec" => {
                    want(2)?;
                    Expr::primrec(sub(0)?, sub(1)?).map_err(arity(at))
                }
                "min" | "max" => {
                    want(1)?;
                    let p = Box::new(sub(0)?);
                    let e = if head == "min" {
                        Expr::Min(p)
                    } else {
                        Expr::Max(p)
                    };
                    e.checked().map_err(arity(at))
                }
                "eq" | "le" | "ge" => {
                    want(2)?;
                    let op = match head {
                        "eq" => CmpOp::Eq,
                        "le" => CmpOp::Le,
                        _ => CmpOp::Ge,
                    };
                    Expr::cmp(op, sub(0)?, sub(1)?).map_err(arity(at))
                }
                "step-pred" => {
                    want(2)?;
                    let states: usize = number(&args[1])?;
                    if states == 0 {
                        return Err(DslError::Arity {
                            position: args[1].at(),
                            message: "machines need at least one state".into(),
                        });
                    }
                    Ok(Expr::StepPred {
                        order: number(&args[0])?,
                        states,
                    })
                }
                other => Err(syntax(at, format!("unknown operator `{other}`"))),
            }
        }
    }
}

/// Parses one expression; positions in errors are byte offsets.
pub fn parse_expr(text: &str) -> Result<Expr, DslError> {
    let sexps = read_sexps(text)?;
    match sexps.as_slice() {
        [one] => build(one),
        [] => Err(syntax(text.len(), "empty expression")),
        [_, second, ..] => Err(syntax(second.at(), "trailing input after the expression")),
    }
}

/// `int("1" s, 2) - 1`: ε ↦ 0, 0 ↦ 1, 1 ↦ 2, 00 ↦ 3, ...
pub fn encode_input(s: &BitString) -> Option<u64> {
    if s.len() >= 64 {
        return None;
    }
    let v = s
        .symbols()
        .iter()
        .fold(1u64, |acc, b| (acc << 1) | b.index() as u64);
    Some(v - 1)
}

pub fn decode_input(code: u64) -> BitString {
    let v = code as u128 + 1;
    let bits = 128 - v.leading_zeros() as usize;
    BitString(
        (0..bits - 1)
            .rev()
            .map(|i| {
                if (v >> i) & 1 == 1 {
                    crate::machine::Symbol::One
                } else {
                    crate::machine::Symbol::Zero
                }
            })
            .collect(),
    )
}
