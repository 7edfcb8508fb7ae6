//! Derivation certificates: a halting computation written out as the chain
//! of configuration strings it passes through.
//!
//! File form:
//!
//! ```text
//! machine 1RB1LB_1LA---
//! order 0
//! input ε
//! output 1111
//! [A]0 | λ | 2
//! ...
//! 1[A]111 | λ | halt
//! 1[A]111 | λ | -
//! ```
//!
//! Each configuration line names the rule taking it to the next line. The
//! halting configuration is marked `halt` and is repeated once more as the
//! terminal line `-`, so a run of `k` steps (the halt step included) has
//! `k + 1` lines.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{compile_rules, derives_one, AnyMachine, ConfigString, RewriteError, RuleSet};
use crate::error::ParseError;
use crate::machine::{run_traced, RunOutcome};
use crate::oracle::{oracle_run_traced, OracleRunOutcome, OracleTable};
use crate::tape::BitString;

/// What links a configuration to the following one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Step {
    Rule(usize),
    /// No rule applies; the next line repeats this configuration.
    Halt,
    /// Last line.
    Terminal,
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Rule(i) => write!(f, "{i}"),
            Step::Halt => f.write_str("halt"),
            Step::Terminal => f.write_str("-"),
        }
    }
}

impl FromStr for Step {
    type Err = ParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        match text {
            "halt" => Ok(Step::Halt),
            "-" => Ok(Step::Terminal),
            _ => text
                .parse()
                .map(Step::Rule)
                .map_err(|_| ParseError::at(0, format!("bad rule index `{text}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationCertificate {
    pub machine: String,
    pub order: u32,
    pub input: BitString,
    pub output: BitString,
    pub configs: Vec<ConfigString>,
    /// `steps[k]` links `configs[k]` to `configs[k + 1]`.
    pub steps: Vec<Step>,
}

impl fmt::Display for DerivationCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "machine {}", self.machine)?;
        writeln!(f, "order {}", self.order)?;
        writeln!(f, "input {}", self.input.display_or_epsilon())?;
        writeln!(f, "output {}", self.output.display_or_epsilon())?;
        for (c, s) in self.configs.iter().zip(&self.steps) {
            writeln!(f, "{c} | {s}")?;
        }
        Ok(())
    }
}

impl FromStr for DerivationCertificate {
    type Err = ParseError;

    /// Positions in errors are line numbers (0-based).
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let mut header = |key: &str| -> Result<String, ParseError> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| ParseError::at(0, format!("missing `{key}` line")))?;
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(|v| v.trim().to_string())
                .ok_or_else(|| ParseError::at(no, format!("expected `{key} ...`")))
        };
        let machine = header("machine")?;
        let order = header("order")?
            .parse()
            .map_err(|_| ParseError::at(1, "order must be a natural number"))?;
        let input = BitString::parse_or_epsilon(&header("input")?)
            .map_err(|e| ParseError::at(2, e.message))?;
        let output = BitString::parse_or_epsilon(&header("output")?)
            .map_err(|e| ParseError::at(3, e.message))?;
        let mut configs = Vec::new();
        let mut steps = Vec::new();
        for (no, line) in lines {
            let (config, step) = line
                .rsplit_once('|')
                .ok_or_else(|| ParseError::at(no, "expected `work | oracle | rule`"))?;
            configs.push(
                config
                    .trim()
                    .parse()
                    .map_err(|e: ParseError| ParseError::at(no, e.message))?,
            );
            steps.push(
                step.trim()
                    .parse()
                    .map_err(|e: ParseError| ParseError::at(no, e.message))?,
            );
        }
        Ok(DerivationCertificate {
            machine,
            order,
            input,
            output,
            configs,
            steps,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckError {
    /// The certificate does not have the shape of a derivation at all.
    #[error("malformed certificate: {0}")]
    Structure(String),
    /// Configuration `index` (1-based) is not what the derivation requires.
    #[error("invalid at configuration {index}: {reason}")]
    Step { index: usize, reason: String },
}

fn structure(message: impl Into<String>) -> CheckError {
    CheckError::Structure(message.into())
}

fn invalid(index: usize, reason: impl Into<String>) -> CheckError {
    CheckError::Step {
        index,
        reason: reason.into(),
    }
}

/// Accepts iff `c_1` is the initial configuration of `x`, every link is the
/// named rule, the halting configuration has no applicable rule and its
/// work tape reads `y`.
pub fn check_deriv(
    rules: &RuleSet,
    d: &DerivationCertificate,
    x: &BitString,
    y: &BitString,
    oracles: &[OracleTable],
) -> Result<(), CheckError> {
    if d.machine != rules.machine || d.order != rules.order {
        return Err(structure(format!(
            "certificate is for {} (order {}), rules for {} (order {})",
            d.machine, d.order, rules.machine, rules.order
        )));
    }
    let m = d.configs.len();
    if m < 2 || d.steps.len() != m {
        return Err(structure("need at least two configuration lines"));
    }
    for (k, s) in d.steps.iter().enumerate() {
        let expected = if k + 1 == m {
            matches!(s, Step::Terminal)
        } else if k + 2 == m {
            matches!(s, Step::Halt)
        } else {
            matches!(s, Step::Rule(_))
        };
        if !expected {
            return Err(structure(format!(
                "line {} carries `{s}`; only the last two lines are `halt` and `-`",
                k + 1
            )));
        }
    }
    if let Some(k) = d.configs.iter().position(|c| !rules.fits(c)) {
        return Err(structure(format!(
            "configuration {} does not fit the machine",
            k + 1
        )));
    }
    if &d.input != x {
        return Err(invalid(
            1,
            format!(
                "certificate input {} is not {}",
                d.input.display_or_epsilon(),
                x.display_or_epsilon()
            ),
        ));
    }
    if d.configs[0] != ConfigString::initial(x, rules.order) {
        return Err(invalid(1, "not the initial configuration"));
    }
    for k in 0..m - 2 {
        let Step::Rule(i) = d.steps[k] else {
            unreachable!()
        };
        match derives_one(rules, i, &d.configs[k], &d.configs[k + 1], oracles) {
            Ok(true) => {}
            Ok(false) => {
                return Err(invalid(k + 2, format!("does not follow by rule {i}")));
            }
            Err(e) => return Err(invalid(k + 1, e.to_string())),
        }
    }
    let last = &d.configs[m - 2];
    if let Some(&i) = rules.matching(last).first() {
        return Err(invalid(m - 1, format!("rule {i} still applies")));
    }
    if &d.configs[m - 1] != last {
        return Err(invalid(
            m,
            "terminal line differs from the halting configuration",
        ));
    }
    let tape = last.output();
    if tape != d.output || &tape != y {
        return Err(invalid(
            m - 1,
            format!(
                "tape reads {}, certificate claims {}, expected {}",
                tape.display_or_epsilon(),
                d.output.display_or_epsilon(),
                y.display_or_epsilon()
            ),
        ));
    }
    Ok(())
}

fn assemble(
    machine: &AnyMachine,
    rules: &RuleSet,
    input: &BitString,
    mut configs: Vec<ConfigString>,
    mut steps: Vec<Step>,
) -> DerivationCertificate {
    let last = configs.last().expect("non-empty trace").clone();
    steps.push(Step::Halt);
    steps.push(Step::Terminal);
    let output = last.output();
    configs.push(last);
    DerivationCertificate {
        machine: machine.to_string(),
        order: rules.order,
        input: input.clone(),
        output,
        configs,
        steps,
    }
}

/// Certificate for a run that halts within `budget` steps.
pub fn trace_certificate(
    machine: &AnyMachine,
    x: &BitString,
    budget: u64,
    oracles: &[OracleTable],
) -> Result<DerivationCertificate, RewriteError> {
    let configs: Vec<ConfigString> = match machine {
        AnyMachine::Plain(m) => match run_traced(m, x, budget) {
            (RunOutcome::Halted { .. }, trace) => {
                trace.iter().map(ConfigString::of_config).collect()
            }
            (outcome, _) => {
                return Err(RewriteError::NotHalting {
                    outcome: format!("{outcome:?}"),
                })
            }
        },
        AnyMachine::Oracle(m) => match oracle_run_traced(m, x, budget, oracles) {
            (OracleRunOutcome::Halted { .. }, trace) => {
                trace.iter().map(ConfigString::of_dual).collect()
            }
            (outcome, _) => {
                return Err(RewriteError::NotHalting {
                    outcome: format!("{outcome:?}"),
                })
            }
        },
    };
    let rules = compile_rules(machine);
    let mut steps = Vec::with_capacity(configs.len() + 1);
    for (k, pair) in configs.windows(2).enumerate() {
        match rules.successor(&pair[0], oracles)? {
            Some((i, next)) if next == pair[1] => steps.push(Step::Rule(i)),
            _ => return Err(RewriteError::Inconsistent { step: k as u64 + 1 }),
        }
    }
    if !rules.is_terminal(configs.last().expect("trace starts with c_1")) {
        return Err(RewriteError::Inconsistent {
            step: configs.len() as u64,
        });
    }
    Ok(assemble(machine, &rules, x, configs, steps))
}

/// Output of `machine` on `x` found by rewriting alone: the derivation from
/// `q_0 x` is extended one rule at a time, and the first terminal one is
/// checked and decoded. Rules are deterministic, so there is exactly one
/// candidate of each length. `None` once `search_budget` steps are used up
/// or an oracle lookup is unresolved.
pub fn compute_via_deriv(
    machine: &AnyMachine,
    x: &BitString,
    search_budget: u64,
    oracles: &[OracleTable],
) -> Option<BitString> {
    let rules = compile_rules(machine);
    let mut current = ConfigString::initial(x, rules.order);
    let mut configs = Vec::new();
    let mut steps = Vec::new();
    for _ in 0..search_budget {
        match rules.successor(&current, oracles).ok()? {
            Some((i, next)) => {
                configs.push(std::mem::replace(&mut current, next));
                steps.push(Step::Rule(i));
            }
            None => {
                configs.push(current);
                let d = assemble(machine, &rules, x, configs, steps);
                check_deriv(&rules, &d, x, &d.output, oracles).ok()?;
                return Some(d.output);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plain(text: &str) -> AnyMachine {
        AnyMachine::Plain(text.parse().unwrap())
    }

    #[test]
    fn champion_certificate() {
        let m = plain("1RB1LB_1LA---");
        let e = BitString::empty();
        let d = trace_certificate(&m, &e, 100, &[]).unwrap();
        assert_eq!(d.configs.len(), 7);
        assert_eq!(d.output.to_string(), "1111");
        let rules = compile_rules(&m);
        assert_eq!(check_deriv(&rules, &d, &e, &d.output, &[]), Ok(()));
        let text = d.to_string();
        assert!(
            text.starts_with("machine 1RB1LB_1LA---\norder 0\ninput ε\noutput 1111\n[A]0 | λ | ")
        );
        let tail: Vec<_> = text.lines().rev().take(2).collect();
        assert!(tail[0].ends_with(" | λ | -") && tail[1].ends_with(" | λ | halt"));
        assert_eq!(
            tail[0].trim_end_matches(" | λ | -"),
            tail[1].trim_end_matches(" | λ | halt")
        );
        assert_eq!(text.parse::<DerivationCertificate>().unwrap(), d);
        assert!(matches!(
            check_deriv(&rules, &d, &e, &"11".parse().unwrap(), &[]),
            Err(CheckError::Step { .. })
        ));
    }

    #[test]
    fn empty_machine_has_two_lines() {
        let m = plain("------");
        let e = BitString::empty();
        let d = trace_certificate(&m, &e, 1, &[]).unwrap();
        assert_eq!(d.configs.len(), 2);
        assert_eq!(d.configs[0], d.configs[1]);
        assert_eq!(d.steps, vec![Step::Halt, Step::Terminal]);
        assert_eq!(
            compute_via_deriv(&m, &e, 1, &[]),
            Some("0".parse().unwrap())
        );
    }

    #[test]
    fn structural_defects_are_separate() {
        let m = plain("1RB1LB_1LA---");
        let e = BitString::empty();
        let rules = compile_rules(&m);
        let d = trace_certificate(&m, &e, 100, &[]).unwrap();
        let mut short = d.clone();
        short.steps.pop();
        assert!(matches!(
            check_deriv(&rules, &short, &e, &d.output, &[]),
            Err(CheckError::Structure(_))
        ));
        let mut other = d.clone();
        other.machine = "1RB1LB_1LA1RA".into();
        assert!(matches!(
            check_deriv(&rules, &other, &e, &d.output, &[]),
            Err(CheckError::Structure(_))
        ));
        // stopping one step early leaves a rule applicable
        let mut early = d.clone();
        early.configs.truncate(4);
        early.steps.truncate(3);
        early.configs.push(early.configs[3].clone());
        early.steps.extend([Step::Halt, Step::Terminal]);
        early.output = early.configs[3].output();
        assert!(matches!(
            check_deriv(&rules, &early, &e, &early.output, &[]),
            Err(CheckError::Step { index: 4, .. })
        ));
    }

    #[test]
    fn nonhalting_runs_are_refused() {
        let m = plain("1RA---");
        let e = BitString::empty();
        assert!(matches!(
            trace_certificate(&m, &e, 50, &[]),
            Err(RewriteError::NotHalting { .. })
        ));
        assert_eq!(compute_via_deriv(&m, &e, 500, &[]), None);
    }
}
