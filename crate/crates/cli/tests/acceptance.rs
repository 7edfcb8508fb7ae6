//! Acceptance criteria, one PASS/FAIL line each. Criterion 3 is a stretch
//! goal: it only runs with `BBLAB_STRETCH=1` and never fails the run.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bblab_core::deciders::{verify_proof, Pipeline};
use bblab_core::dsl::{bb_expression, EvalBudget, EvalOutcome, Evaluator};
use bblab_core::engine::{build_bb_oracle, compute_bb, BBResult, ResultsStore, SearchOptions};
use bblab_core::enumerate::{enumerate_raw, space_size, TnfEnumerator};
use bblab_core::machine::{run, run_traced};
use bblab_core::oracle::{
    oracle_run, oracle_run_traced, OracleMachineTable, OracleRunOutcome, OracleTable,
};
use bblab_core::rewrite::{
    check_deriv, compile_rules, compute_via_deriv, trace_certificate, AnyMachine, ConfigString,
    DerivationCertificate,
};
use bblab_core::{BitString, MachineTable, RunOutcome};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Verdict = Result<String, String>;

type Check = Box<dyn FnOnce(&mut Vec<BBResult>) -> Verdict>;

fn bblab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bblab"))
        .args(args)
        .env_remove("BBLAB_WORKERS")
        .output()
        .expect("run bblab");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
    )
}

fn ensure(ok: bool, message: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message.into())
    }
}

fn exact(input: &BitString, n: usize) -> Result<BBResult, String> {
    compute_bb(input, n, &SearchOptions::for_states(n), None).map_err(|e| e.to_string())
}

fn space_counts() -> Verdict {
    let start = Instant::now();
    for (n, want) in [(1usize, 25u128), (2, 6561)] {
        let (code, out) = bblab(&["count", "--n", &n.to_string()]);
        ensure(
            code == 0 && out.trim() == want.to_string(),
            format!("count --n {n} printed {out:?}"),
        )?;
        let formula = (4 * n as u128 + 1).pow(2 * n as u32);
        ensure(
            space_size(n) == formula.into(),
            format!("space_size({n}) differs from (4n+1)^(2n)"),
        )?;
        let distinct: HashSet<String> = enumerate_raw(n).unwrap().map(|m| m.to_string()).collect();
        ensure(
            distinct.len() as u128 == want,
            format!("enumerate_raw({n}) gave {} distinct", distinct.len()),
        )?;
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), format!("took {took:?}"))?;
    Ok(format!("25 and 6561, all distinct, {took:.2?}"))
}

fn order_zero_values(known: &mut Vec<BBResult>) -> Verdict {
    let mut parts = Vec::new();
    for (n, want) in [(1, 1), (2, 6), (3, 21)] {
        let start = Instant::now();
        let r = exact(&BitString::empty(), n)?;
        ensure(r.exact && r.value == want, r.summary())?;
        parts.push(format!(
            "BB(ε,0,{n})={} EXACT in {:.1?}",
            r.value,
            start.elapsed()
        ));
        known.push(r);
    }
    Ok(parts.join(", "))
}

fn stretch_four() -> Verdict {
    if std::env::var("BBLAB_STRETCH").as_deref() != Ok("1") {
        return Err("skipped; set BBLAB_STRETCH=1 (or run `bblab search --n 4` in release)".into());
    }
    let start = Instant::now();
    let mut o = SearchOptions::for_states(4);
    o.workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let r = compute_bb(&BitString::empty(), 4, &o, None).map_err(|e| e.to_string())?;
    let line = format!("{} in {:.0?}", r.summary(), start.elapsed());
    if r.exact && r.value == 107 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn non_blank_input() -> Verdict {
    let one = BitString::parse_or_epsilon("1").unwrap();
    let mut values = Vec::new();
    for n in 1..=2 {
        let r = exact(&one, n)?;
        ensure(r.exact, r.summary())?;
        values.push(r.value);
    }
    let (code, out) = bblab(&[
        "report", "--s", "", "--t", "1", "--n-min", "1", "--n-max", "2",
    ]);
    ensure(code == 0, format!("report exited {code}"))?;
    ensure(
        out.lines().all(|l| l.starts_with("EVIDENCE\t")),
        "unlabelled report row",
    )?;
    for (n, v) in (1..=2).zip(&values) {
        let row = format!("cross\tn={n}\tBB(ε,0,{n})=");
        let tail = format!("\tBB(1,0,{n})={v}\t");
        ensure(
            out.lines().any(|l| l.contains(&row) && l.contains(&tail)),
            format!("missing cross row for n={n}"),
        )?;
    }
    Ok(format!(
        "BB(1,0,1)={} BB(1,0,2)={} EXACT, {} EVIDENCE rows",
        values[0],
        values[1],
        out.lines().count()
    ))
}

/// Halting machines (with their steps) of the raw n <= 2 spaces on blank tape.
fn small_halting() -> Vec<(MachineTable, u64)> {
    (1..=2)
        .flat_map(|n| enumerate_raw(n).unwrap())
        .filter_map(|m| {
            let steps = run(&m, &BitString::empty(), 100).halted_steps()?;
            Some((m, steps))
        })
        .collect()
}

/// The simulator trace equals the chain of unique rule successors, and the
/// certificate checks.
fn rewrite_agrees(m: &MachineTable, steps: u64) -> Result<DerivationCertificate, String> {
    let x = BitString::empty();
    let machine = AnyMachine::Plain(m.clone());
    let rules = compile_rules(&machine);
    let (_, trace) = run_traced(m, &x, steps);
    let mut chain = vec![ConfigString::initial(&x, 0)];
    while let Some((_, next)) = rules
        .successor(chain.last().unwrap(), &[])
        .map_err(|e| format!("{m}: {e}"))?
    {
        chain.push(next);
        if chain.len() as u64 > steps + 1 {
            return Err(format!("{m}: rule chain outlives the run"));
        }
    }
    let simulated: Vec<ConfigString> = trace
        .iter()
        .take(steps as usize)
        .map(ConfigString::of_config)
        .collect();
    ensure(
        chain == simulated,
        format!("{m}: trace and rule chain differ"),
    )?;
    let d = trace_certificate(&machine, &x, steps, &[]).map_err(|e| format!("{m}: {e}"))?;
    check_deriv(&rules, &d, &x, &d.output, &[]).map_err(|e| format!("{m}: {e}"))?;
    ensure(
        d.configs.len() as u64 == steps + 1,
        format!("{m}: certificate length"),
    )?;
    Ok(d)
}

/// One-symbol change to a body line (`work | oracle | step`): flips a tape
/// symbol, bumps a rule-index digit, or moves a state marker right.
fn flip_one(text: &str, rng: &mut StdRng) -> Option<String> {
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let body = 4 + rng.gen_range(0..lines.len() - 4);
    let mut chars: Vec<char> = lines[body].chars().collect();
    let spots: Vec<usize> = (0..chars.len())
        .filter(|&i| chars[i].is_ascii_digit() || chars[i] == '[')
        .collect();
    let at = spots[rng.gen_range(0..spots.len())];
    match chars[at] {
        '[' => {
            let symbol = *chars.get(at + 3)?;
            if !matches!(symbol, '0' | '1') {
                return None;
            }
            chars.remove(at + 3);
            chars.insert(at, symbol);
        }
        d => {
            let in_step = chars[..at].iter().filter(|&&c| c == '|').count() == 2;
            chars[at] = match (d, in_step) {
                ('0', false) => '1',
                ('1', false) => '0',
                _ => char::from(b'0' + (d as u8 - b'0' + 1) % 10),
            };
        }
    }
    lines[body] = chars.into_iter().collect();
    Some(lines.join("\n") + "\n")
}

fn rewrite_equivalence(small: &[(MachineTable, u64)]) -> Verdict {
    let mut certs = Vec::new();
    for (m, steps) in small {
        certs.push(rewrite_agrees(m, *steps)?);
    }
    let pipeline = Pipeline::default_for(3);
    let mut sampled = 0;
    for m in TnfEnumerator::new(3, BitString::empty(), pipeline.halt_budget).unwrap() {
        if let Some(steps) = run(&m, &BitString::empty(), 100).halted_steps() {
            certs.push(rewrite_agrees(&m, steps)?);
            sampled += 1;
        }
    }
    ensure(
        sampled >= 1000,
        format!("only {sampled} halting 3-state machines"),
    )?;
    let mut rng = StdRng::seed_from_u64(0xB_B);
    let mut tried = 0;
    let mut rejected = 0;
    while tried < 10_000 {
        let d = &certs[rng.gen_range(0..certs.len())];
        let text = d.to_string();
        let Some(bad) = flip_one(&text, &mut rng) else {
            continue;
        };
        if bad == text {
            continue;
        }
        tried += 1;
        let machine = AnyMachine::parse(&d.machine, 0).unwrap();
        let rules = compile_rules(&machine);
        let ok = match bad.parse::<DerivationCertificate>() {
            Ok(parsed) => check_deriv(&rules, &parsed, &d.input, &d.output, &[]).is_ok(),
            Err(_) => false,
        };
        rejected += !ok as usize;
    }
    ensure(
        rejected == tried,
        format!("{} of {tried} mutations accepted", tried - rejected),
    )?;
    Ok(format!(
        "{} exhaustive + {sampled} three-state TNF chains agree; {rejected}/{tried} mutations rejected",
        small.len()
    ))
}

fn via_deriv() -> Verdict {
    let mut checked = 0;
    for input in ["", "1", "10"] {
        let x = BitString::parse_or_epsilon(input).unwrap();
        for m in (1..=2).flat_map(|n| enumerate_raw(n).unwrap()) {
            let (outcome, trace) = run_traced(&m, &x, 100);
            if outcome.halted_steps().is_none() {
                continue;
            }
            let y = BitString(trace.last().unwrap().tape.visited());
            let got = compute_via_deriv(&AnyMachine::Plain(m.clone()), &x, 100, &[]);
            ensure(
                got.as_ref() == Some(&y),
                format!("{m} on {input:?}: {got:?} vs {y}"),
            )?;
            checked += 1;
        }
    }
    Ok(format!("{checked} halting runs match"))
}

fn decider_soundness() -> Verdict {
    let mut tags = BTreeMap::new();
    for n in 1..=2 {
        let pipeline = Pipeline::default_for(n);
        let longest = pipeline
            .decider_budgets
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(pipeline.halt_budget);
        for m in enumerate_raw(n).unwrap() {
            let c = bblab_core::deciders::classify(&m, &BitString::empty(), &pipeline);
            if let RunOutcome::NonHaltingProven { proof } = c.outcome {
                ensure(
                    verify_proof(&m, &proof),
                    format!("{m}: proof does not replay"),
                )?;
                ensure(
                    run(&m, &BitString::empty(), 10 * longest)
                        .halted_steps()
                        .is_none(),
                    format!("{m}: halts within 10x budget"),
                )?;
                *tags.entry(proof.kind.tag()).or_insert(0) += 1;
            }
        }
    }
    let total: usize = tags.values().sum();
    Ok(format!("{total} proofs replayed, none halt: {tags:?}"))
}

fn expression_cross_check(known: &[BBResult]) -> Verdict {
    let mut parts = Vec::new();
    for (n, h) in [(1usize, 10u64), (2, 20)] {
        let want = known
            .iter()
            .find(|r| r.key.states == n)
            .ok_or("missing value")?
            .value;
        let expr = bb_expression(0, n).map_err(|e| e.to_string())?;
        let got = Evaluator::new(EvalBudget::new(h, h))
            .eval(&expr, &[0])
            .map_err(|e| e.to_string())?;
        ensure(
            got == EvalOutcome::Value(want),
            format!("n={n}: {got:?} vs {want}"),
        )?;
        parts.push(format!("n={n}: {want}"));
    }
    Ok(parts.join(", "))
}

fn fixture_field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("fixture lacks `{key}`"))
        .trim()
}

fn oracle_semantics(known: &[BBResult]) -> Verdict {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/oracle_fixture.txt");
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let m =
        OracleMachineTable::parse(fixture_field(&text, "machine"), 1).map_err(|e| e.to_string())?;
    let x = BitString::parse_or_epsilon(fixture_field(&text, "input")).unwrap();
    let steps: u64 = fixture_field(&text, "steps").parse().unwrap();
    let output = BitString::parse_or_epsilon(fixture_field(&text, "output")).unwrap();
    let query = BitString::parse_or_epsilon(fixture_field(&text, "query")).unwrap();
    let exact_two: Vec<BBResult> = known
        .iter()
        .filter(|r| r.key.states <= 2)
        .cloned()
        .collect();
    let table = build_bb_oracle(0, &exact_two, 2).map_err(|e| e.to_string())?;
    let (outcome, trace) = oracle_run_traced(&m, &x, 100, std::slice::from_ref(&table));
    ensure(
        outcome == OracleRunOutcome::Halted { steps },
        format!("{outcome:?}"),
    )?;
    let y = BitString(trace.last().unwrap().work.visited());
    ensure(y == output, format!("work tape {y}"))?;
    let empty = oracle_run(&m, &x, 100, &[OracleTable::empty(1)]);
    ensure(
        empty
            == OracleRunOutcome::Unresolved {
                oracle: 1,
                query: query.clone(),
            },
        format!("empty table: {empty:?}"),
    )?;
    Ok(format!(
        "Halted at {steps} with output {y}; empty table unresolved on query {query}"
    ))
}

fn store_bytes(dir: &Path) -> (Vec<u8>, Vec<u8>) {
    let s = ResultsStore::open(dir).unwrap();
    (
        fs::read(s.results_path()).unwrap(),
        fs::read(s.campaigns_path()).unwrap(),
    )
}

fn determinism() -> Verdict {
    let x = BitString::empty();
    let total = TnfEnumerator::new(2, x.clone(), Pipeline::default_for(2).halt_budget)
        .unwrap()
        .count() as u128;
    let base = tempfile::tempdir().unwrap();
    let reference = {
        let store = ResultsStore::open(base.path()).unwrap();
        compute_bb(
            &x,
            2,
            &SearchOptions {
                chunk: 8,
                ..SearchOptions::for_states(2)
            },
            Some(&store),
        )
        .map_err(|e| e.to_string())?
    };
    let want = store_bytes(base.path());
    for workers in [1, 4] {
        let dir = tempfile::tempdir().unwrap();
        let store = ResultsStore::open(dir.path()).unwrap();
        let o = SearchOptions {
            chunk: 8,
            workers,
            ..SearchOptions::for_states(2)
        };
        let cut = SearchOptions {
            stop_at: Some(total / 2),
            ..o.clone()
        };
        let half = compute_bb(&x, 2, &cut, Some(&store)).map_err(|e| e.to_string())?;
        ensure(
            !half.exact && half.summary().contains("LOWER-BOUND"),
            half.summary(),
        )?;
        let resumed = compute_bb(&x, 2, &o, Some(&store)).map_err(|e| e.to_string())?;
        ensure(
            resumed == reference,
            format!("workers={workers}: {}", resumed.summary()),
        )?;
        ensure(
            store_bytes(dir.path()) == want,
            format!("workers={workers}: store bytes differ"),
        )?;
    }
    let outputs: Vec<(i32, String)> = ["1", "4"]
        .iter()
        .map(|w| bblab(&["search", "--n", "2", "--workers", w]))
        .collect();
    ensure(
        outputs[0] == outputs[1],
        "stdout differs between worker counts",
    )?;
    Ok(format!(
        "killed at {}/{total}, resumed with 1 and 4 workers: identical store and result",
        total / 2
    ))
}

fn main() -> ExitCode {
    let mut known = Vec::new();
    let small = small_halting();
    let criteria: Vec<(u32, &str, bool, Check)> = vec![
        (1, "space counts", true, Box::new(|_| space_counts())),
        (2, "order-0 values", true, Box::new(order_zero_values)),
        (3, "BB(ε,0,4) stretch", false, Box::new(|_| stretch_four())),
        (4, "non-blank input", true, Box::new(|_| non_blank_input())),
        (
            5,
            "rewrite equivalence",
            true,
            Box::new(move |_| rewrite_equivalence(&small)),
        ),
        (6, "derivation output", true, Box::new(|_| via_deriv())),
        (
            7,
            "decider soundness",
            true,
            Box::new(|_| decider_soundness()),
        ),
        (
            8,
            "expression cross-check",
            true,
            Box::new(|k| expression_cross_check(k)),
        ),
        (
            9,
            "oracle semantics",
            true,
            Box::new(|k| oracle_semantics(k)),
        ),
        (
            10,
            "determinism and resumption",
            true,
            Box::new(|_| determinism()),
        ),
    ];
    let mut failed = 0;
    for (id, name, gating, check) in criteria {
        let verdict = check(&mut known);
        let (word, detail) = match (&verdict, gating) {
            (Ok(d), _) => ("PASS", d.clone()),
            (Err(d), true) => {
                failed += 1;
                ("FAIL", d.clone())
            }
            (Err(d), false) if d.starts_with("skipped") => ("SKIP (non-gating)", d.clone()),
            (Err(d), false) => ("FAIL (non-gating)", d.clone()),
        };
        println!("{word} criterion {id:>2} {name}: {detail}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
