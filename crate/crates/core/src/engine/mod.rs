//! Busy beaver search: exhaustive order-0 campaigns with exactness
//! accounting, lower-bound campaigns for oracle machines, and the ratio
//! reports built from their values.
//!
//! A campaign walks a deterministic stream in chunks. Each chunk is
//! classified in parallel, merged back in stream order, appended to the
//! store and followed by a checkpoint, so the store contents do not depend
//! on the number of workers or on where a run was interrupted.

pub mod report;
pub mod store;

use std::collections::BTreeSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::deciders::{classify, Pipeline};
use crate::enumerate::{enumerate_oracle, EnumerationError, RawEnumerator, TnfEnumerator};
use crate::machine::{MachineTable, RunOutcome};
use crate::oracle::{
    decide_oracle_cycler, encode_u64, oracle_run, OracleMachineTable, OracleRunOutcome, OracleTable,
};
use crate::tape::BitString;

pub use report::{ratio_report, RatioRow, ReportTable};
pub use store::{
    CampaignState, Checkpoint, QueryKey, Record, ResultsStore, Status, StoreError, Tally,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("tree normal form maximum {tnf} differs from raw maximum {raw}")]
    CrossCheck { tnf: u64, raw: u64 },
    #[error("no exact value for {0}")]
    NotExact(QueryKey),
    #[error("order-0 queries take no oracle; use compute_bb")]
    OrderZero,
}

/// Knobs shared by all campaigns.
#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub pipeline: Pipeline,
    pub workers: usize,
    /// Machines per checkpoint.
    pub chunk: u64,
    /// Stop once the cursor reaches this value, leaving the records of the
    /// unfinished chunk without a checkpoint (used to exercise resumption).
    pub stop_at: Option<u128>,
    /// Classify the raw space too when n is at most 2.
    pub raw_cross_check: bool,
}

impl SearchOptions {
    pub fn for_states(states: usize) -> Self {
        SearchOptions {
            pipeline: Pipeline::default_for(states),
            workers: 1,
            chunk: 1024,
            stop_at: None,
            raw_cross_check: true,
        }
    }
}

/// Outcome of a campaign.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BBResult {
    pub key: QueryKey,
    pub value: u64,
    /// True only for a complete stream with nothing unknown or unresolved.
    pub exact: bool,
    pub state: CampaignState,
    pub champion: String,
    pub machines: u128,
    pub halted: u128,
    pub nonhalting: u128,
    pub unknown_count: u128,
    pub unresolved_count: u128,
    /// Raw-space maximum when the cross-check ran.
    pub raw_check: Option<u64>,
    /// Where the oracle tables came from.
    pub provenance: Vec<String>,
    /// Distinct failed oracle queries seen in this run.
    pub unresolved_queries: BTreeSet<(u32, BitString)>,
}

impl BBResult {
    fn from_checkpoint(cp: &Checkpoint) -> Self {
        let t = &cp.tally;
        BBResult {
            key: cp.key.clone(),
            value: t.best,
            exact: cp.state == CampaignState::Complete && t.unknown == 0 && t.unresolved == 0,
            state: cp.state,
            champion: t.champion.clone().unwrap_or_else(|| "-".into()),
            machines: t.machines,
            halted: t.halted,
            nonhalting: t.nonhalting,
            unknown_count: t.unknown,
            unresolved_count: t.unresolved,
            raw_check: None,
            provenance: Vec::new(),
            unresolved_queries: BTreeSet::new(),
        }
    }

    /// One-line summary; anything inexact is marked `LOWER-BOUND`.
    pub fn summary(&self) -> String {
        let mut line = format!(
            "BB{} = {} {} champion={} machines={} halted={} nonhalting={} unknown={} unresolved={}",
            self.key,
            self.value,
            if self.exact { "EXACT" } else { "LOWER-BOUND" },
            self.champion,
            self.machines,
            self.halted,
            self.nonhalting,
            self.unknown_count,
            self.unresolved_count,
        );
        match self.state {
            CampaignState::Complete => {}
            CampaignState::Prefix => line.push_str(" stream=prefix"),
            CampaignState::Running => line.push_str(" stream=interrupted"),
        }
        if let Some(raw) = self.raw_check {
            line.push_str(&format!(" raw-max={raw}"));
        }
        line
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, EngineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EngineError::Pool(e.to_string()))
}

/// Record for one order-0 machine.
pub fn classify_record(key: &QueryKey, machine: &MachineTable, pipeline: &Pipeline) -> Record {
    let c = classify(machine, &key.input, pipeline);
    let (status, steps, proof) = match &c.outcome {
        RunOutcome::Halted { steps } => (Status::Halt, *steps, None),
        RunOutcome::NonHaltingProven { proof } => (Status::NonHalt, 0, Some(proof.kind.to_blob())),
        RunOutcome::Unknown { .. } => (Status::Unknown, 0, None),
    };
    Record {
        key: key.clone(),
        machine: machine.to_string(),
        status,
        steps,
        decider: c.settled_by.tag().to_string(),
        proof,
    }
}

/// Record for one oracle machine: simulate, try the dual-tape cycler, and
/// keep simulating to the largest decider budget before giving up.
pub fn classify_oracle_record(
    key: &QueryKey,
    machine: &OracleMachineTable,
    pipeline: &Pipeline,
    oracles: &[OracleTable],
) -> Record {
    let long = pipeline
        .decider_budgets
        .iter()
        .copied()
        .max()
        .unwrap_or(pipeline.halt_budget)
        .max(pipeline.halt_budget);
    let mut outcome = oracle_run(machine, &key.input, pipeline.halt_budget, oracles);
    let mut decider = "sim";
    if matches!(outcome, OracleRunOutcome::Unknown { .. }) {
        match decide_oracle_cycler(machine, &key.input, long, oracles) {
            Some(proof) => {
                outcome = OracleRunOutcome::NonHaltingProven { proof };
                decider = "cycler";
            }
            None => outcome = oracle_run(machine, &key.input, long, oracles),
        }
    }
    let (status, steps, proof, decider) = match outcome {
        OracleRunOutcome::Halted { steps } => (Status::Halt, steps, None, decider),
        OracleRunOutcome::NonHaltingProven { proof } => {
            (Status::NonHalt, 0, Some(proof.kind.to_blob()), decider)
        }
        OracleRunOutcome::Unknown { .. } => (Status::Unknown, 0, None, "-"),
        OracleRunOutcome::Unresolved { oracle, query } => (
            Status::Unresolved,
            0,
            Some(format!("oracle={oracle},query={query}")),
            "oracle",
        ),
    };
    Record {
        key: key.clone(),
        machine: machine.to_string(),
        status,
        steps,
        decider: decider.to_string(),
        proof,
    }
}

/// Chunked, checkpointed walk over `stream` (already positioned at the
/// resumed cursor).
fn campaign<M: Sync>(
    start: Checkpoint,
    mut stream: impl Iterator<Item = M>,
    end_state: CampaignState,
    options: &SearchOptions,
    store: Option<&ResultsStore>,
    classify_one: impl Fn(&M) -> Record + Sync,
) -> Result<(Checkpoint, Vec<Record>), EngineError> {
    let pool = pool(options.workers)?;
    let chunk = u128::from(options.chunk.max(1));
    let mut cp = start;
    let mut fresh = Vec::new();
    if cp.state != CampaignState::Running {
        return Ok((cp, fresh));
    }
    loop {
        let boundary = (cp.cursor / chunk + 1) * chunk;
        let stop = options.stop_at.filter(|&s| s < boundary);
        let take = (stop.unwrap_or(boundary).saturating_sub(cp.cursor)) as usize;
        let batch: Vec<M> = stream.by_ref().take(take).collect();
        let exhausted = batch.len() < take;
        let records: Vec<Record> = pool.install(|| batch.par_iter().map(&classify_one).collect());
        if let Some(store) = store {
            store.persist(&records)?;
        }
        for r in &records {
            cp.tally.add(r);
        }
        cp.cursor += records.len() as u128;
        fresh.extend(records);
        if exhausted {
            cp.state = end_state;
        } else if stop.is_some() {
            // interrupted: nothing confirms the partial chunk
            return Ok((cp, fresh));
        }
        if let Some(store) = store {
            store.write_checkpoint(&cp)?;
        }
        if cp.state != CampaignState::Running {
            return Ok((cp, fresh));
        }
    }
}

fn starting_point(key: &QueryKey, store: Option<&ResultsStore>) -> Result<Checkpoint, EngineError> {
    Ok(match store {
        Some(s) => s.resume(key)?,
        None => Checkpoint::start(key.clone()),
    })
}

/// Maximum halting steps over the raw space, with the unknown count.
pub fn raw_maximum(
    input: &BitString,
    states: usize,
    options: &SearchOptions,
) -> Result<(u64, u128), EngineError> {
    let key = QueryKey::new(input.clone(), 0, states);
    let machines: Vec<MachineTable> = RawEnumerator::new(states)?.collect();
    let pool = pool(options.workers)?;
    let records: Vec<Record> = pool.install(|| {
        machines
            .par_iter()
            .map(|m| classify_record(&key, m, &options.pipeline))
            .collect()
    });
    let mut tally = Tally::default();
    records.iter().for_each(|r| tally.add(r));
    Ok((tally.best, tally.unknown))
}

/// BB(s, 0, n) over the tree-normal-form stream for input `s`, exact when
/// every machine settles. With a store the campaign resumes from and
/// records into it.
pub fn compute_bb(
    input: &BitString,
    states: usize,
    options: &SearchOptions,
    store: Option<&ResultsStore>,
) -> Result<BBResult, EngineError> {
    let key = QueryKey::new(input.clone(), 0, states);
    let start = starting_point(&key, store)?;
    let stream = TnfEnumerator::new(states, input.clone(), options.pipeline.halt_budget)?;
    let stream = stream.starting_at(start.cursor as u64);
    let (cp, _) = campaign(
        start,
        stream,
        CampaignState::Complete,
        options,
        store,
        |m| classify_record(&key, m, &options.pipeline),
    )?;
    let mut result = BBResult::from_checkpoint(&cp);
    if options.raw_cross_check && states <= 2 && cp.state == CampaignState::Complete {
        let (raw, _) = raw_maximum(input, states, options)?;
        if raw != result.value {
            return Err(EngineError::CrossCheck {
                tnf: result.value,
                raw,
            });
        }
        result.raw_check = Some(raw);
    }
    Ok(result)
}

/// Oracle table for F(k+1, ·) = BB(ε, k, ·) on `1..=max_n`, from exact
/// results only.
pub fn build_bb_oracle(
    order: u32,
    results: &[BBResult],
    max_n: usize,
) -> Result<OracleTable, EngineError> {
    let mut table = OracleTable::empty(order + 1);
    for n in 1..=max_n {
        let key = QueryKey::new(BitString::empty(), order, n);
        let value = results
            .iter()
            .find(|r| r.key == key && r.exact)
            .ok_or_else(|| EngineError::NotExact(key.clone()))?
            .value;
        table
            .entries
            .insert(encode_u64(n as u64), encode_u64(value));
    }
    table.provenance = if max_n == 0 {
        "empty".to_string()
    } else {
        format!("exact BB(ε,{order},n) for n=1..{max_n}")
    };
    Ok(table)
}

/// Oracle tables F(1..=order) truncated at `depth`.
pub fn oracle_tables(
    order: u32,
    depth: usize,
    results: &[BBResult],
) -> Result<Vec<OracleTable>, EngineError> {
    (0..order)
        .map(|k| build_bb_oracle(k, results, depth))
        .collect()
}

/// Lower bound on BB(s, m, n) from the first `limit` tables of the oracle
/// stream plus any `seeds`. Oracle tables for orders below m are built
/// from `known` exact values up to `depth`.
#[allow(clippy::too_many_arguments)]
pub fn compute_bb_higher(
    input: &BitString,
    order: u32,
    states: usize,
    depth: usize,
    limit: Option<u128>,
    seeds: &[OracleMachineTable],
    known: &[BBResult],
    options: &SearchOptions,
    store: Option<&ResultsStore>,
) -> Result<BBResult, EngineError> {
    if order == 0 {
        return Err(EngineError::OrderZero);
    }
    let oracles = oracle_tables(order, depth, known)?;
    let key = QueryKey::new(input.clone(), order, states);
    let start = starting_point(&key, store)?;
    let base = enumerate_oracle(order, states, limit)?;
    let end_state = if base.is_complete() {
        CampaignState::Complete
    } else {
        CampaignState::Prefix
    };
    let end = limit.unwrap_or(base.total()).min(base.total());
    let stream = base.range(start.cursor, end);
    let (cp, fresh) = campaign(start, stream, end_state, options, store, |m| {
        classify_oracle_record(&key, m, &options.pipeline, &oracles)
    })?;
    let mut result = BBResult::from_checkpoint(&cp);
    let mut tally = cp.tally.clone();
    let mut queries = BTreeSet::new();
    let mut note = |r: &Record| {
        if let Some(q) = r
            .proof
            .as_deref()
            .filter(|_| r.status == Status::Unresolved)
        {
            if let Some((o, a)) = parse_query(q) {
                queries.insert((o, a));
            }
        }
    };
    fresh.iter().for_each(&mut note);
    for seed in seeds {
        let r = classify_oracle_record(&key, seed, &options.pipeline, &oracles);
        note(&r);
        if r.status == Status::Halt {
            tally.offer(r.steps, &r.machine);
        }
    }
    result.value = tally.best;
    result.champion = tally.champion.unwrap_or_else(|| "-".into());
    result.provenance = oracles
        .iter()
        .map(|t| format!("oracle {}: {}", t.index, t.provenance))
        .collect();
    result.unresolved_queries = queries;
    Ok(result)
}

fn parse_query(blob: &str) -> Option<(u32, BitString)> {
    let (o, q) = blob.split_once(',')?;
    let o = o.strip_prefix("oracle=")?.parse().ok()?;
    let q = q.strip_prefix("query=")?.parse().ok()?;
    Some((o, q))
}
