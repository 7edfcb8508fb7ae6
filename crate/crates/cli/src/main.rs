//! `bblab`: busy beaver searches, rewrite certificates and max-min
//! expression evaluation from the command line.
//!
//! Exit status: 0 for exact results and valid certificates, 2 for results
//! that are only lower bounds (or evaluations that ran out of budget),
//! 1 for data errors, 64 for usage errors.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bblab_core::deciders::Pipeline;
use bblab_core::dsl::{
    bb_expression, encode_input, parse_expr, EvalBudget, EvalOutcome, Evaluator,
};
use bblab_core::engine::{
    compute_bb, compute_bb_higher, oracle_tables, ratio_report, BBResult, QueryKey, ResultsStore,
    SearchOptions,
};
use bblab_core::enumerate::{oracle_space_size, space_size};
use bblab_core::oracle::{OracleMachineTable, OracleTable};
use bblab_core::rewrite::{
    check_deriv, compile_rules, trace_certificate, AnyMachine, CheckError, DerivationCertificate,
};
use bblab_core::BitString;

const EXIT_INEXACT: u8 = 2;
const EXIT_DATA: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "bblab", version, about = "Higher order busy beaver laboratory")]
struct Cli {
    /// Worker threads for searches.
    #[arg(long, global = true, env = "BBLAB_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Output layout.
    #[arg(long, global = true, env = "BBLAB_FORMAT", value_enum, default_value_t = Format::Lines)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Lines,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Table => "table",
            Format::Lines => "lines",
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exhaustive search for BB(s, 0, n).
    Search(SearchArgs),
    /// Lower bound for BB(s, m, n), m >= 1, over a prefix of the machine stream.
    SearchHigher(HigherArgs),
    /// Check a derivation certificate.
    VerifyCert(VerifyArgs),
    /// Write the derivation certificate of a halting run.
    MakeCert(MakeArgs),
    /// Evaluate a max-min expression.
    Eval(EvalArgs),
    /// Ratio tables over exact values, labelled EVIDENCE.
    Report(ReportArgs),
    /// Size of the machine space T(m, n).
    Count(CountArgs),
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Input string; `''` or `ε` for the blank tape.
    #[arg(long, env = "BBLAB_S", default_value = "")]
    s: String,
    /// Number of states.
    #[arg(long, env = "BBLAB_N")]
    n: usize,
    /// Simulation budget (defaults to a size-dependent value).
    #[arg(long, env = "BBLAB_BUDGET")]
    budget: Option<u64>,
    /// Directory of the results store; campaigns resume from it.
    #[arg(long, env = "BBLAB_STORE")]
    store: Option<PathBuf>,
    /// Machines per checkpoint.
    #[arg(long, env = "BBLAB_CHUNK", default_value_t = 1024)]
    chunk: u64,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[command(flatten)]
    query: QueryArgs,
    /// Order; `search` handles only 0.
    #[arg(long, env = "BBLAB_M", default_value_t = 0)]
    m: u32,
}

#[derive(Args, Debug)]
struct HigherArgs {
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, env = "BBLAB_M")]
    m: u32,
    /// Oracle tables hold exact values for n = 1..=depth.
    #[arg(long, env = "BBLAB_ORACLE_DEPTH", default_value_t = 2)]
    oracle_depth: usize,
    /// Tables of the stream to examine; the whole space if omitted.
    #[arg(long, env = "BBLAB_LIMIT")]
    limit: Option<u128>,
    /// Extra machines to examine besides the stream prefix.
    #[arg(long = "seed")]
    seeds: Vec<String>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Oracle table files (`oracle i` header); replaces the computed tables.
    #[arg(long = "oracle")]
    oracles: Vec<PathBuf>,
    /// Depth of computed busy beaver oracle tables.
    #[arg(long, env = "BBLAB_ORACLE_DEPTH", default_value_t = 2)]
    oracle_depth: usize,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    certificate: PathBuf,
    #[command(flatten)]
    oracles: OracleArgs,
}

#[derive(Args, Debug)]
struct MakeArgs {
    #[arg(long)]
    machine: String,
    #[arg(long, env = "BBLAB_M", default_value_t = 0)]
    m: u32,
    #[arg(long, env = "BBLAB_S", default_value = "")]
    s: String,
    #[arg(long, env = "BBLAB_BUDGET", default_value_t = 100_000)]
    budget: u64,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    oracles: OracleArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Inline expression.
    #[arg(required_unless_present_any = ["file", "bb"], conflicts_with_all = ["file", "bb"])]
    expr: Option<String>,
    /// Read the expression from a file.
    #[arg(long, conflicts_with = "bb")]
    file: Option<PathBuf>,
    /// Use the busy beaver expression for n states (order --m) on input --s.
    #[arg(long)]
    bb: Option<usize>,
    #[arg(long, env = "BBLAB_M", default_value_t = 0)]
    m: u32,
    #[arg(long, env = "BBLAB_S", default_value = "")]
    s: String,
    /// Comma-separated natural arguments.
    #[arg(long, value_delimiter = ',')]
    args: Vec<u64>,
    /// H: search horizon of min and max.
    #[arg(long, env = "BBLAB_HORIZON", default_value_t = 100)]
    horizon: u64,
    /// V: extra horizon checked before a max is accepted.
    #[arg(long, env = "BBLAB_VERIFY", default_value_t = 100)]
    verify: u64,
    /// Longest simulation a step predicate may run.
    #[arg(long, env = "BBLAB_BUDGET", default_value_t = 100_000)]
    budget: u64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, env = "BBLAB_S", default_value = "")]
    s: String,
    /// Second input for cross rows.
    #[arg(long)]
    t: Option<String>,
    #[arg(long, env = "BBLAB_M", default_value_t = 0)]
    m: u32,
    #[arg(long, default_value_t = 1)]
    n_min: usize,
    #[arg(long, default_value_t = 2)]
    n_max: usize,
    #[arg(long, env = "BBLAB_STORE")]
    store: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CountArgs {
    #[arg(long, env = "BBLAB_N")]
    n: usize,
    #[arg(long, env = "BBLAB_M", default_value_t = 0)]
    m: u32,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        error: anyhow::anyhow!(message.into()),
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure {
            code: EXIT_DATA,
            error: e.into(),
        }
    }
}

type Outcome = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let mut stdout = String::new();
    let result = run(&cli, &mut stdout);
    print!("{stdout}");
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn input(text: &str) -> std::result::Result<BitString, Failure> {
    BitString::parse_or_epsilon(text).map_err(|e| usage(format!("input {text:?}: {e}")))
}

fn open_store(dir: &Option<PathBuf>) -> Result<Option<ResultsStore>> {
    dir.as_ref()
        .map(|d| ResultsStore::open(d).with_context(|| format!("opening store {}", d.display())))
        .transpose()
}

fn options(cli: &Cli, q: &QueryArgs) -> SearchOptions {
    let mut o = SearchOptions::for_states(q.n);
    if let Some(b) = q.budget {
        o.pipeline = Pipeline::with_base(b);
    }
    o.workers = cli.workers;
    o.chunk = q.chunk.max(1);
    o
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or("-".into(), |p| p.display().to_string())
}

fn config(line: String) {
    eprintln!("# config {line}");
}

fn run(cli: &Cli, out: &mut String) -> Outcome {
    match &cli.command {
        Command::Search(a) => search(cli, a, out),
        Command::SearchHigher(a) => search_higher(cli, a, out),
        Command::VerifyCert(a) => verify_cert(a, out),
        Command::MakeCert(a) => make_cert(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Report(a) => report(cli, a, out),
        Command::Count(a) => count(a, out),
    }
}

fn print_result(format: Format, r: &BBResult, out: &mut String) -> u8 {
    match format {
        Format::Lines => {
            let _ = writeln!(out, "{}", r.summary());
        }
        Format::Table => {
            let exactness = if r.exact { "EXACT" } else { "LOWER-BOUND" };
            let rows = [
                ("query", format!("BB{}", r.key)),
                ("value", format!("{} {exactness}", r.value)),
                ("champion", r.champion.clone()),
                ("machines", r.machines.to_string()),
                ("halted", r.halted.to_string()),
                ("nonhalting", r.nonhalting.to_string()),
                ("unknown", r.unknown_count.to_string()),
                ("unresolved", r.unresolved_count.to_string()),
                ("stream", r.state.as_str().to_string()),
            ];
            for (k, v) in rows {
                let _ = writeln!(out, "{k:<12}{v}");
            }
            if let Some(raw) = r.raw_check {
                let _ = writeln!(out, "{:<12}{raw}", "raw-max");
            }
        }
    }
    for p in &r.provenance {
        let _ = writeln!(out, "provenance\t{p}");
    }
    for (o, q) in &r.unresolved_queries {
        let _ = writeln!(out, "unresolved\toracle={o}\tquery={q}");
    }
    if r.exact {
        0
    } else {
        EXIT_INEXACT
    }
}

fn search(cli: &Cli, a: &SearchArgs, out: &mut String) -> Outcome {
    if a.m != 0 {
        return Err(usage(
            "`search` computes order 0; use `search-higher` for --m >= 1",
        ));
    }
    let q = &a.query;
    let s = input(&q.s)?;
    let o = options(cli, q);
    config(format!(
        "command=search s={} m=0 n={} budget={} store={} chunk={} workers={} format={}",
        s.display_or_epsilon(),
        q.n,
        o.pipeline.halt_budget,
        show_path(&q.store),
        o.chunk,
        o.workers,
        cli.format.name()
    ));
    let store = open_store(&q.store)?;
    let r = compute_bb(&s, q.n, &o, store.as_ref())?;
    Ok(print_result(cli.format, &r, out))
}

/// Exact order-0 values for n = 1..=depth on the blank tape.
fn known_values(
    depth: usize,
    store: Option<&ResultsStore>,
    workers: usize,
) -> Result<Vec<BBResult>> {
    (1..=depth)
        .map(|n| {
            let mut o = SearchOptions::for_states(n);
            o.workers = workers;
            compute_bb(&BitString::empty(), n, &o, store).map_err(Into::into)
        })
        .collect()
}

fn search_higher(cli: &Cli, a: &HigherArgs, out: &mut String) -> Outcome {
    if a.m == 0 {
        return Err(usage(
            "`search-higher` needs --m >= 1; use `search` for order 0",
        ));
    }
    let q = &a.query;
    let s = input(&q.s)?;
    let o = options(cli, q);
    config(format!(
        "command=search-higher s={} m={} n={} oracle-depth={} limit={} seeds={} budget={} store={} chunk={} workers={} format={}",
        s.display_or_epsilon(),
        a.m,
        q.n,
        a.oracle_depth,
        a.limit.map_or("all".into(), |l| l.to_string()),
        a.seeds.len(),
        o.pipeline.halt_budget,
        show_path(&q.store),
        o.chunk,
        o.workers,
        cli.format.name()
    ));
    let seeds = a
        .seeds
        .iter()
        .map(|t| OracleMachineTable::parse(t, a.m).map_err(|e| usage(format!("seed {t}: {e}"))))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let store = open_store(&q.store)?;
    let known = known_values(a.oracle_depth, store.as_ref(), cli.workers)?;
    let r = compute_bb_higher(
        &s,
        a.m,
        q.n,
        a.oracle_depth,
        a.limit,
        &seeds,
        &known,
        &o,
        store.as_ref(),
    )?;
    Ok(print_result(cli.format, &r, out))
}

fn load_oracles(a: &OracleArgs, order: u32) -> Result<Vec<OracleTable>> {
    if !a.oracles.is_empty() {
        return a
            .oracles
            .iter()
            .map(|p| {
                let text =
                    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                OracleTable::from_file_str(&text)
                    .with_context(|| format!("parsing {}", p.display()))
            })
            .collect();
    }
    if order == 0 {
        return Ok(Vec::new());
    }
    let known = known_values(a.oracle_depth, None, 1)?;
    let mut tables = oracle_tables(1, a.oracle_depth, &known)?;
    tables.extend((2..=order).map(OracleTable::empty));
    Ok(tables)
}

fn verify_cert(a: &VerifyArgs, out: &mut String) -> Outcome {
    config(format!(
        "command=verify-cert certificate={} oracles={} oracle-depth={}",
        a.certificate.display(),
        a.oracles.oracles.len(),
        a.oracles.oracle_depth
    ));
    let text = fs::read_to_string(&a.certificate)
        .with_context(|| format!("reading {}", a.certificate.display()))?;
    let d: DerivationCertificate = match text.parse() {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(out, "MALFORMED line {}: {}", e.position + 1, e.message);
            return Ok(EXIT_DATA);
        }
    };
    let machine = match AnyMachine::parse(&d.machine, d.order) {
        Ok(m) => m,
        Err(e) => {
            let _ = writeln!(out, "MALFORMED machine {}: {e}", d.machine);
            return Ok(EXIT_DATA);
        }
    };
    let oracles = load_oracles(&a.oracles, d.order)?;
    let rules = compile_rules(&machine);
    match check_deriv(&rules, &d, &d.input, &d.output, &oracles) {
        Ok(()) => {
            let _ = writeln!(
                out,
                "VALID machine={} input={} output={} configurations={}",
                d.machine,
                d.input.display_or_epsilon(),
                d.output.display_or_epsilon(),
                d.configs.len()
            );
            Ok(0)
        }
        Err(CheckError::Structure(m)) => {
            let _ = writeln!(out, "MALFORMED {m}");
            Ok(EXIT_DATA)
        }
        Err(CheckError::Step { index, reason }) => {
            let _ = writeln!(out, "INVALID configuration {index}: {reason}");
            Ok(EXIT_DATA)
        }
    }
}

fn make_cert(a: &MakeArgs, out: &mut String) -> Outcome {
    let s = input(&a.s)?;
    config(format!(
        "command=make-cert machine={} m={} s={} budget={} out={}",
        a.machine,
        a.m,
        s.display_or_epsilon(),
        a.budget,
        show_path(&a.out)
    ));
    let machine = AnyMachine::parse(&a.machine, a.m).map_err(|e| usage(format!("machine: {e}")))?;
    let oracles = load_oracles(&a.oracles, a.m)?;
    let d = trace_certificate(&machine, &s, a.budget.max(1), &oracles)?;
    match &a.out {
        Some(p) => {
            fs::write(p, d.to_string()).with_context(|| format!("writing {}", p.display()))?;
            let _ = writeln!(
                out,
                "wrote {} configurations to {}",
                d.configs.len(),
                p.display()
            );
        }
        None => out.push_str(&d.to_string()),
    }
    Ok(0)
}

fn eval(a: &EvalArgs, out: &mut String) -> Outcome {
    let (source, expr, args) = if let Some(n) = a.bb {
        let s = input(&a.s)?;
        let code = encode_input(&s).ok_or_else(|| usage("input too long to encode"))?;
        (
            format!("bb m={} n={n} s={}", a.m, s.display_or_epsilon()),
            bb_expression(a.m, n)?,
            vec![code],
        )
    } else {
        let text = match (&a.expr, &a.file) {
            (Some(t), _) => t.clone(),
            (None, Some(p)) => {
                fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
            }
            (None, None) => return Err(usage("give an expression, --file or --bb")),
        };
        let expr = parse_expr(&text)?;
        (format!("{expr}"), expr, a.args.clone())
    };
    let budget = EvalBudget {
        step_cap: a.budget,
        ..EvalBudget::new(a.horizon, a.verify)
    };
    config(format!(
        "command=eval expr={source} args={:?} horizon={} verify={} step-cap={}",
        args, budget.horizon, budget.verify, budget.step_cap
    ));
    let mut oracles = Vec::new();
    if a.bb.is_some() && a.m > 0 {
        oracles = load_oracles(
            &OracleArgs {
                oracles: Vec::new(),
                oracle_depth: 2,
            },
            a.m,
        )?;
    }
    let mut e = Evaluator::with_oracles(budget, oracles);
    match e.eval(&expr, &args)? {
        EvalOutcome::Value(v) => {
            let _ = writeln!(out, "Value {v}");
            Ok(0)
        }
        EvalOutcome::Undefined => {
            let _ = writeln!(out, "Undefined");
            Ok(0)
        }
        EvalOutcome::BudgetExceeded { horizon } => {
            let _ = writeln!(out, "BudgetExceeded H={horizon} V={}", budget.verify);
            Ok(EXIT_INEXACT)
        }
    }
}

fn report(cli: &Cli, a: &ReportArgs, out: &mut String) -> Outcome {
    let s = input(&a.s)?;
    let t = a.t.as_deref().map(input).transpose()?;
    if a.n_min == 0 || a.n_min > a.n_max {
        return Err(usage("need 1 <= --n-min <= --n-max"));
    }
    config(format!(
        "command=report s={} t={} m={} n={}..={} store={} workers={}",
        s.display_or_epsilon(),
        t.as_ref().map_or("-".into(), BitString::display_or_epsilon),
        a.m,
        a.n_min,
        a.n_max,
        show_path(&a.store),
        cli.workers
    ));
    if a.m != 0 {
        let _ = writeln!(
            out,
            "LOWER-BOUND no exact values exist for order {}; ratio tables need exact values",
            a.m
        );
        return Ok(EXIT_INEXACT);
    }
    let store = open_store(&a.store)?;
    let mut results = Vec::new();
    let mut inputs = vec![s.clone()];
    inputs.extend(t.clone());
    for (i, x) in inputs.iter().enumerate() {
        // growth rows need one more value for s
        let top = if i == 0 { a.n_max + 1 } else { a.n_max };
        for n in 1..=top {
            let mut o = SearchOptions::for_states(n);
            o.workers = cli.workers;
            results.push(compute_bb(x, n, &o, store.as_ref())?);
        }
    }
    let lookup = |k: &QueryKey| results.iter().find(|r| &r.key == k).cloned();
    match ratio_report(&s, t.as_ref(), 0, a.n_min..=a.n_max, lookup) {
        Ok(table) => {
            out.push_str(&table.to_string());
            Ok(0)
        }
        Err(e) => {
            let _ = writeln!(out, "LOWER-BOUND {e}");
            Ok(EXIT_INEXACT)
        }
    }
}

fn count(a: &CountArgs, out: &mut String) -> Outcome {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    config(format!("command=count m={} n={}", a.m, a.n));
    let size = if a.m == 0 {
        space_size(a.n)
    } else {
        oracle_space_size(a.m, a.n)
    };
    let _ = writeln!(out, "{size}");
    Ok(0)
}
