//! Rule semantics against the simulators.

use bblab_core::enumerate::{enumerate_raw, OracleEnumerator, TnfEnumerator};
use bblab_core::machine::run_report;
use bblab_core::oracle::{oracle_run_traced, OracleRunOutcome, OracleTable};
use bblab_core::rewrite::{
    check_deriv, compile_rules, compute_via_deriv, derives_any, trace_certificate, AnyMachine,
    ConfigString, DerivationCertificate, Step,
};
use bblab_core::{BitString, MachineTable, RunOutcome};
use proptest::prelude::*;

const BUDGET: u64 = 300;

fn bits(text: &str) -> BitString {
    BitString::parse_or_epsilon(text).unwrap()
}

/// Checks one plain machine on one input; returns whether it halted.
fn agree_plain(m: &MachineTable, input: &BitString) -> bool {
    let machine = AnyMachine::Plain(m.clone());
    let report = run_report(m, input, BUDGET);
    let via = compute_via_deriv(&machine, input, BUDGET, &[]);
    match report.outcome {
        RunOutcome::Halted { steps } => {
            let y = BitString(report.last.tape.visited());
            let d = trace_certificate(&machine, input, BUDGET, &[]).unwrap();
            assert_eq!(d.configs.len() as u64, steps + 1, "{m}");
            let rules = compile_rules(&machine);
            assert_eq!(check_deriv(&rules, &d, input, &y, &[]), Ok(()), "{m}");
            assert_eq!(via.as_ref(), Some(&y), "{m}");
            true
        }
        _ => {
            assert_eq!(via, None, "{m}");
            false
        }
    }
}

#[test]
fn every_small_machine_matches_its_rules() {
    let mut halted = 0;
    for n in 1..=2 {
        for m in enumerate_raw(n).unwrap() {
            for input in ["", "1", "011"] {
                halted += agree_plain(&m, &bits(input)) as usize;
            }
        }
    }
    assert!(halted > 1000);
}

#[test]
fn sampled_three_state_machines_match_their_rules() {
    let input = BitString::empty();
    let mut seen = 0;
    for m in TnfEnumerator::new(3, input.clone(), 200)
        .unwrap()
        .step_by(13)
    {
        agree_plain(&m, &input);
        seen += 1;
    }
    assert!(seen > 300);
}

fn bb_oracle() -> Vec<OracleTable> {
    let mut t = OracleTable::empty(1);
    for (k, v) in [("1", "1"), ("10", "110"), ("11", "10101")] {
        t.entries.insert(bits(k), bits(v));
    }
    vec![t]
}

#[test]
fn sampled_oracle_machines_match_their_rules() {
    let oracles = bb_oracle();
    let e = OracleEnumerator::new(1, 1).unwrap();
    let total = e.total();
    let mut checked = 0;
    for index in (0..total).step_by(97) {
        let m = e.machine_at(index);
        let machine = AnyMachine::Oracle(m.clone());
        let input = bits("1");
        let (outcome, trace) = oracle_run_traced(&m, &input, BUDGET, &oracles);
        let via = compute_via_deriv(&machine, &input, BUDGET, &oracles);
        match outcome {
            OracleRunOutcome::Halted { steps } => {
                let y = BitString(trace.last().unwrap().work.visited());
                let d = trace_certificate(&machine, &input, BUDGET, &oracles).unwrap();
                assert_eq!(d.configs.len() as u64, steps + 1);
                let rules = compile_rules(&machine);
                assert_eq!(check_deriv(&rules, &d, &input, &y, &oracles), Ok(()), "{m}");
                assert_eq!(via, Some(y));
                checked += 1;
            }
            _ => assert_eq!(via, None, "{m}"),
        }
    }
    assert!(checked > 100);
}

#[test]
fn only_consecutive_trace_pairs_derive() {
    let machine = AnyMachine::parse("1RB1LB_1LA---", 0).unwrap();
    let rules = compile_rules(&machine);
    let d = trace_certificate(&machine, &BitString::empty(), 100, &[]).unwrap();
    let real = &d.configs[..d.configs.len() - 1];
    for (i, a) in real.iter().enumerate() {
        for (j, b) in real.iter().enumerate() {
            assert_eq!(derives_any(&rules, a, b, &[]), j == i + 1);
        }
    }
}

fn samples() -> Vec<(AnyMachine, BitString, Vec<OracleTable>)> {
    let plain = |m: &str, x: &str| (AnyMachine::parse(m, 0).unwrap(), bits(x), vec![]);
    vec![
        plain("1RB1LB_1LA---", ""),
        plain("1RB1RC_1LA0RB_1LC---", ""),
        plain("1RB---_1LB0RA", "0110"),
        (
            AnyMachine::parse("1R1RB?1>B----------_1R0LA---------------", 1).unwrap(),
            bits(""),
            bb_oracle(),
        ),
    ]
}

#[derive(Clone, Debug)]
enum Mutation {
    Symbol { line: usize, at: usize },
    Marker { line: usize, left: bool },
    Rule { line: usize, to: usize },
}

fn mutate(d: &DerivationCertificate, mutation: &Mutation) -> Option<DerivationCertificate> {
    let mut out = d.clone();
    match *mutation {
        Mutation::Symbol { line, at } => {
            let line = line % d.configs.len();
            let text = d.configs[line].to_string();
            let digits: Vec<usize> = text
                .char_indices()
                .filter(|(_, c)| *c == '0' || *c == '1')
                .map(|(i, _)| i)
                .collect();
            let i = digits[at % digits.len()];
            let mut bytes = text.into_bytes();
            bytes[i] ^= 1;
            out.configs[line] = String::from_utf8(bytes).unwrap().parse().ok()?;
        }
        Mutation::Marker { line, left } => {
            let line = line % d.configs.len();
            let text = d.configs[line].to_string();
            let (work, rest) = text.split_once(" | ").unwrap();
            let open = work.find('[').unwrap();
            let marker = &work[open..open + 3];
            let plain = format!("{}{}", &work[..open], &work[open + 3..]);
            if (left && open == 0) || (!left && open + 1 >= plain.len()) {
                return None;
            }
            let to = if left { open - 1 } else { open + 1 };
            let moved = format!("{}{}{}", &plain[..to], marker, &plain[to..]);
            out.configs[line] = format!("{moved} | {rest}").parse().ok()?;
        }
        Mutation::Rule { line, to } => {
            let rules = d.steps.len() - 2;
            if rules == 0 {
                return None;
            }
            let line = line % rules;
            let Step::Rule(i) = d.steps[line] else {
                unreachable!()
            };
            if i == to {
                return None;
            }
            out.steps[line] = Step::Rule(to);
        }
    }
    (out != *d).then_some(out)
}

fn mutation() -> impl Strategy<Value = Mutation> {
    prop_oneof![
        (0usize..64, 0usize..64).prop_map(|(line, at)| Mutation::Symbol { line, at }),
        (0usize..64, any::<bool>()).prop_map(|(line, left)| Mutation::Marker { line, left }),
        (0usize..64, 0usize..40).prop_map(|(line, to)| Mutation::Rule { line, to }),
    ]
}

proptest! {
    #[test]
    fn single_mutations_are_rejected(which in 0usize..4, m in mutation()) {
        let (machine, input, oracles) = samples().swap_remove(which);
        let d = trace_certificate(&machine, &input, BUDGET, &oracles).unwrap();
        let rules = compile_rules(&machine);
        prop_assert_eq!(check_deriv(&rules, &d, &input, &d.output, &oracles), Ok(()));
        if let Some(bad) = mutate(&d, &m) {
            prop_assert!(check_deriv(&rules, &bad, &input, &d.output, &oracles).is_err());
        }
    }

    #[test]
    fn certificates_round_trip(which in 0usize..4) {
        let (machine, input, oracles) = samples().swap_remove(which);
        let d = trace_certificate(&machine, &input, BUDGET, &oracles).unwrap();
        prop_assert_eq!(d.to_string().parse::<DerivationCertificate>().unwrap(), d);
    }
}

#[test]
fn samples_halt_with_some_work() {
    for (machine, input, oracles) in samples() {
        let d = trace_certificate(&machine, &input, BUDGET, &oracles).unwrap();
        assert!(d.configs.len() >= 4, "{machine}\n{d}");
        assert!(d
            .configs
            .iter()
            .all(|c: &ConfigString| c.oracle().is_some() == (machine.order() > 0)));
    }
}
