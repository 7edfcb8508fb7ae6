//! Campaign determinism, resumption and exactness.

use std::fs;

use bblab_core::engine::{compute_bb, ratio_report, BBResult, ResultsStore, SearchOptions};
use bblab_core::BitString;
use proptest::prelude::*;

fn options(states: usize, workers: usize, chunk: u64) -> SearchOptions {
    SearchOptions {
        workers,
        chunk,
        raw_cross_check: false,
        ..SearchOptions::for_states(states)
    }
}

/// Runs a campaign, optionally interrupted at `stop` first; returns the
/// result and the bytes of both store files.
fn campaign(
    input: &BitString,
    states: usize,
    o: &SearchOptions,
    stop: Option<u128>,
) -> (BBResult, Vec<u8>, Vec<u8>) {
    let dir = tempfile::tempdir().unwrap();
    let store = ResultsStore::open(dir.path()).unwrap();
    if let Some(at) = stop {
        let cut = SearchOptions {
            stop_at: Some(at),
            ..o.clone()
        };
        let partial = compute_bb(input, states, &cut, Some(&store)).unwrap();
        assert!(!partial.exact);
    }
    let r = compute_bb(input, states, o, Some(&store)).unwrap();
    let results = fs::read(store.results_path()).unwrap();
    let campaigns = fs::read(store.campaigns_path()).unwrap();
    (r, results, campaigns)
}

#[test]
fn values_are_exact_on_blank_and_one() {
    for (input, expected) in [("", [1, 6]), ("1", [2, 7])] {
        let s = BitString::parse_or_epsilon(input).unwrap();
        for (n, want) in (1..=2).zip(expected) {
            let r = compute_bb(&s, n, &SearchOptions::for_states(n), None).unwrap();
            assert!(r.exact, "{}", r.summary());
            assert_eq!(r.value, want, "{}", r.summary());
            assert_eq!(r.raw_check, Some(want));
        }
    }
}

#[test]
fn report_rows_come_from_exact_values() {
    let e = BitString::empty();
    let one = BitString::parse_or_epsilon("1").unwrap();
    let mut known = Vec::new();
    for s in [&e, &one] {
        for n in 1..=3 {
            known.push(compute_bb(s, n, &options(n, 1, 4096), None).unwrap());
        }
    }
    let table = ratio_report(&e, Some(&one), 0, 1..=2, |k| {
        known.iter().find(|r| &r.key == k).cloned()
    })
    .unwrap();
    let text = table.to_string();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().all(|l| l.starts_with("EVIDENCE\t")));
    assert!(text.contains("BB(ε,0,2)=6\tBB(1,0,2)=7"));
}

#[test]
fn worker_count_does_not_change_the_store() {
    let s = BitString::empty();
    let (one, r1, c1) = campaign(&s, 2, &options(2, 1, 8), None);
    let (four, r4, c4) = campaign(&s, 2, &options(2, 4, 8), None);
    assert_eq!(one, four);
    assert_eq!(r1, r4);
    assert_eq!(c1, c4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn resumed_campaigns_match_uninterrupted_ones(
        stop in 1u128..59,
        chunk in 1u64..20,
        workers in prop_oneof![Just(1usize), Just(4)],
        input in prop_oneof![Just(""), Just("1"), Just("01")],
    ) {
        let s = BitString::parse_or_epsilon(input).unwrap();
        let o = options(2, workers, chunk);
        let whole = campaign(&s, 2, &o, None);
        let resumed = campaign(&s, 2, &o, Some(stop));
        prop_assert_eq!(&whole.0, &resumed.0);
        prop_assert!(whole.1 == resumed.1, "results files differ");
        prop_assert!(whole.2 == resumed.2, "checkpoint files differ");
    }
}
