//! `trace-styles`: ingest, fit, check, suite and synth commands.
//!
//! Exit codes: 0 ok, 2 input or parse failure, 3 fit failure, 4 property
//! failure, 5 some suite cells failed.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{parse_k_list, parse_pairs, resolve_seed, ConfigFile};
use output::write_atomic;
use trace_styles::gpam::{FitOptions, Gpam};
use trace_styles::ingest::{
    build_vocabulary, filter_min_sessions, parse_intervals, parse_traces, write_traces,
    RepairReport, TimeInterval, UserTrace, Vocabulary,
};
use trace_styles::pctl::Grouping;
use trace_styles::pipeline::{check_properties, fit_cell, run_pipeline, PipelineConfig};
use trace_styles::suite::SuiteParams;
use trace_styles::synth::{generate, GeneratorSpec, SessionCount};

/// Users with fewer sessions are dropped at ingest.
const MIN_SESSIONS: usize = 5;

#[derive(Debug, Parser)]
#[command(name = "trace-styles", version, about = "Interaction-style analytics over app usage traces")]
struct Cli {
    /// Flat JSON file with defaults for any long flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw trace file and report the repairs applied.
    Ingest(IngestArgs),
    /// Fit GPAM(K) models per interval.
    Fit(FitArgs),
    /// Model-check a property file against a fitted model.
    Check(CheckArgs),
    /// Fit and analyse every (interval, K) cell.
    Suite(SuiteArgs),
    /// Generate a synthetic corpus from a model.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for `traces.txt` and `ingest_report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
struct FitFlags {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Day intervals such as `0:1,0:7,30:60`; default is the whole trace.
    #[arg(long)]
    intervals: Option<String>,
    /// Comma-separated component counts.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
struct SuiteFlags {
    #[arg(long = "n-bound")]
    n_bound: Option<u64>,
    #[arg(long = "p-threshold")]
    p_threshold: Option<f64>,
    /// JSON object mapping group names to label lists.
    #[arg(long)]
    grouping: Option<PathBuf>,
    /// State pairs `from>to,...` for the between-state properties.
    #[arg(long)]
    btw: Option<String>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    fit: FitFlags,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// `model.json` from `fit` or `suite`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    props: Option<PathBuf>,
    #[command(flatten)]
    suite: SuiteFlags,
    /// Directory for `check.csv` and `check.json`; CSV goes to stdout
    /// when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SuiteArgs {
    #[command(flatten)]
    fit: FitFlags,
    #[command(flatten)]
    suite: SuiteFlags,
    /// Extra property file checked against every fitted model.
    #[arg(long)]
    props: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    traces: usize,
    /// Sessions per trace: `12` or a range `5..30`.
    #[arg(long, default_value = "5..30")]
    sessions: String,
    #[arg(long = "max-events", default_value_t = 1000)]
    max_events: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for `traces.txt` and `synth_report.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

const EXIT_PARSE: u8 = 2;
const EXIT_FIT: u8 = 3;
const EXIT_PROPERTY: u8 = 4;
const EXIT_PARTIAL: u8 = 5;

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", render_chain(&f.error));
            ExitCode::from(f.code)
        }
    }
}

/// `a: b: c`, skipping causes whose text the previous message already
/// contains.
fn render_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p).exit_with(EXIT_PARSE)?,
        None => ConfigFile::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .exit_with(EXIT_PARSE)?;
    }
    match cli.command {
        Command::Ingest(a) => cmd_ingest(a, &file),
        Command::Fit(a) => cmd_fit(a, &file),
        Command::Check(a) => cmd_check(a, &file),
        Command::Suite(a) => cmd_suite(a, &file),
        Command::Synth(a) => cmd_synth(a, &file),
    }
}

fn required(flag: Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| file.clone())
        .ok_or_else(|| anyhow!("--{name} is required"))
        .exit_with(EXIT_PARSE)
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    traces_read: usize,
    traces_kept: usize,
    min_sessions: usize,
    repairs: RepairReport,
    total_repairs: usize,
    repairs_by_user: std::collections::BTreeMap<String, RepairReport>,
}

/// Parses a trace file and drops users below the session minimum.
fn load_corpus(path: &Path) -> Result<(Vec<UserTrace>, IngestSummary), Failure> {
    let raw = std::fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .exit_with(EXIT_PARSE)?;
    let parsed = parse_traces(&raw)
        .with_context(|| format!("parsing {}", path.display()))
        .exit_with(EXIT_PARSE)?;
    let read = parsed.traces.len();
    let kept = filter_min_sessions(parsed.traces, MIN_SESSIONS);
    let summary = IngestSummary {
        traces_read: read,
        traces_kept: kept.len(),
        min_sessions: MIN_SESSIONS,
        total_repairs: parsed.repairs.total(),
        repairs: parsed.repairs,
        repairs_by_user: parsed.repairs_by_user,
    };
    Ok((kept, summary))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn cmd_ingest(a: IngestArgs, file: &ConfigFile) -> Result<(), Failure> {
    let input = required(a.input, &file.input, "input")?;
    let out = required(a.out, &file.out, "out")?;
    let (traces, summary) = load_corpus(&input)?;
    write_atomic(&out.join("traces.txt"), &write_traces(&traces)).exit_with(EXIT_PARSE)?;
    let report = pretty(&summary);
    write_atomic(&out.join("ingest_report.json"), &report).exit_with(EXIT_PARSE)?;
    print!("{report}");
    Ok(())
}

struct FitSetup {
    traces: Vec<UserTrace>,
    vocab: Vocabulary,
    intervals: Vec<TimeInterval>,
    ks: Vec<usize>,
    options: FitOptions,
    out: PathBuf,
}

fn fit_setup(flags: FitFlags, file: &ConfigFile) -> Result<FitSetup, Failure> {
    let input = required(flags.input, &file.input, "input")?;
    let out = required(flags.out, &file.out, "out")?;
    let intervals = match flags.intervals.or_else(|| file.intervals.as_ref().map(|i| i.joined())) {
        Some(s) => parse_intervals(&s).exit_with(EXIT_PARSE)?,
        None => Vec::new(),
    };
    let ks = match (flags.k, &file.k) {
        (Some(s), _) => parse_k_list(&s).exit_with(EXIT_PARSE)?,
        (None, Some(k)) => k.resolve().exit_with(EXIT_PARSE)?,
        (None, None) => vec![2],
    };
    if ks.is_empty() {
        return Err(anyhow!("no K given")).exit_with(EXIT_FIT);
    }
    if let Some(bad) = ks.iter().find(|&&k| k < 1) {
        return Err(anyhow!("invalid K = {bad}; K must be at least 1")).exit_with(EXIT_FIT);
    }
    let defaults = FitOptions::default();
    let options = FitOptions {
        restarts: flags.restarts.or(file.restarts).unwrap_or(defaults.restarts),
        max_iters: flags.max_iters.or(file.max_iters).unwrap_or(defaults.max_iters),
        seed: resolve_seed(flags.seed, file.seed).exit_with(EXIT_PARSE)?,
        parallel: true,
    };
    let (traces, _) = load_corpus(&input)?;
    if traces.is_empty() {
        return Err(anyhow!("no trace has at least {MIN_SESSIONS} sessions")).exit_with(EXIT_FIT);
    }
    let vocab = build_vocabulary(&traces);
    Ok(FitSetup {
        traces,
        vocab,
        intervals,
        ks,
        options,
        out,
    })
}

fn suite_params(flags: &SuiteFlags, file: &ConfigFile) -> Result<(SuiteParams, Grouping), Failure> {
    let defaults = SuiteParams::default();
    let btw = match flags.btw.as_ref().or(file.btw.as_ref()) {
        Some(s) => parse_pairs(s).exit_with(EXIT_PARSE)?,
        None => Vec::new(),
    };
    let params = SuiteParams {
        n_bound: flags.n_bound.or(file.n_bound).unwrap_or(defaults.n_bound),
        p_threshold: flags.p_threshold.or(file.p_threshold).unwrap_or(defaults.p_threshold),
        btw_pairs: btw,
    };
    params.validate(None).exit_with(EXIT_PROPERTY)?;
    let grouping = match flags.grouping.as_ref().or(file.grouping.as_ref()) {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .exit_with(EXIT_PARSE)?;
            Grouping::from_json(&text).exit_with(EXIT_PARSE)?
        }
        None => Grouping::default(),
    };
    Ok((params, grouping))
}

fn cmd_fit(a: FitArgs, file: &ConfigFile) -> Result<(), Failure> {
    let setup = fit_setup(a.fit, file)?;
    let intervals: Vec<Option<TimeInterval>> = if setup.intervals.is_empty() {
        vec![None]
    } else {
        setup.intervals.iter().copied().map(Some).collect()
    };
    for interval in intervals {
        for &k in &setup.ks {
            let cell = fit_cell(&setup.traces, &setup.vocab, interval, k, &setup.options)
                .exit_with(EXIT_FIT)?;
            let dir = setup.out.join(cell.dir());
            write_atomic(&dir.join("model.json"), &cell.model_json()).exit_with(EXIT_FIT)?;
            write_atomic(&dir.join("fitreport.json"), &cell.report_json()).exit_with(EXIT_FIT)?;
            println!(
                "{}: log-likelihood {:.6} (restart {}, {} iterations)",
                cell.dir().display(),
                cell.report.log_likelihood,
                cell.report.chosen_restart,
                cell.report.iterations
            );
        }
    }
    Ok(())
}

fn cmd_check(a: CheckArgs, file: &ConfigFile) -> Result<(), Failure> {
    let props = required(a.props, &file.props, "props")?;
    let model_text = std::fs::read_to_string(&a.model)
        .with_context(|| format!("reading {}", a.model.display()))
        .exit_with(EXIT_PARSE)?;
    let (model, _) = Gpam::from_json(&model_text).exit_with(EXIT_PARSE)?;
    let text = std::fs::read_to_string(&props)
        .with_context(|| format!("reading {}", props.display()))
        .exit_with(EXIT_PARSE)?;
    let (params, grouping) = suite_params(&a.suite, file)?;
    let report = check_properties(&model, &grouping, &params, &text)
        .with_context(|| props.display().to_string())
        .exit_with(EXIT_PROPERTY)?;
    match a.out.or_else(|| file.out.clone()) {
        Some(out) => {
            write_atomic(&out.join("check.csv"), &report.to_csv()).exit_with(EXIT_PROPERTY)?;
            write_atomic(&out.join("check.json"), &report.to_json()).exit_with(EXIT_PROPERTY)?;
        }
        None => print!("{}", report.to_csv()),
    }
    Ok(())
}

fn cmd_suite(a: SuiteArgs, file: &ConfigFile) -> Result<(), Failure> {
    let props_text = match a.props.or_else(|| file.props.clone()) {
        Some(p) => Some(
            std::fs::read_to_string(&p)
                .with_context(|| format!("reading {}", p.display()))
                .exit_with(EXIT_PARSE)?,
        ),
        None => None,
    };
    let (params, grouping) = suite_params(&a.suite, file)?;
    let setup = fit_setup(a.fit, file)?;
    let config = PipelineConfig {
        intervals: setup.intervals,
        ks: setup.ks,
        fit: setup.options,
        suite: params.clone(),
        grouping: grouping.clone(),
    };
    let outcome = run_pipeline(&setup.traces, &setup.vocab, &config);
    let mut files = outcome.files();
    if let Some(text) = &props_text {
        for cell in &outcome.cells {
            let report = check_properties(&cell.fit.model, &grouping, &params, text)
                .with_context(|| format!("{}", cell.fit.dir().display()))
                .exit_with(EXIT_PROPERTY)?;
            files.insert(cell.fit.dir().join("props.csv"), report.to_csv());
            files.insert(cell.fit.dir().join("props.json"), report.to_json());
        }
    }
    for (rel, contents) in &files {
        write_atomic(&setup.out.join(rel), contents).exit_with(EXIT_PARSE)?;
    }
    for cell in &outcome.cells {
        println!("{}: ok", cell.fit.dir().display());
    }
    if !outcome.failures.is_empty() {
        for f in &outcome.failures {
            eprintln!("{}/K{}: {}", f.interval, f.k, f.message);
        }
        return Err(anyhow!(
            "{} of {} cells failed",
            outcome.failures.len(),
            outcome.failures.len() + outcome.cells.len()
        ))
        .exit_with(EXIT_PARTIAL);
    }
    Ok(())
}

fn parse_sessions(s: &str) -> anyhow::Result<SessionCount> {
    let num = |v: &str| {
        v.trim()
            .parse::<usize>()
            .with_context(|| format!("invalid session count `{v}`"))
    };
    match s.split_once("..") {
        Some((lo, hi)) => Ok(SessionCount::Uniform {
            min: num(lo)?,
            max: num(hi)?,
        }),
        None => Ok(SessionCount::Fixed(num(s)?)),
    }
}

fn cmd_synth(a: SynthArgs, file: &ConfigFile) -> Result<(), Failure> {
    let out = required(a.out, &file.out, "out")?;
    let text = std::fs::read_to_string(&a.model)
        .with_context(|| format!("reading {}", a.model.display()))
        .exit_with(EXIT_PARSE)?;
    let (model, _) = Gpam::from_json(&text).exit_with(EXIT_PARSE)?;
    let mut spec = GeneratorSpec::new(model, a.traces, resolve_seed(a.seed, file.seed).exit_with(EXIT_PARSE)?);
    spec.sessions = parse_sessions(&a.sessions).exit_with(EXIT_PARSE)?;
    spec.max_events_per_session = a.max_events;
    let (traces, report) = generate(&spec).exit_with(EXIT_PARSE)?;
    write_atomic(&out.join("traces.txt"), &write_traces(&traces)).exit_with(EXIT_PARSE)?;
    let report = pretty(&report);
    write_atomic(&out.join("synth_report.json"), &report).exit_with(EXIT_PARSE)?;
    print!("{report}");
    Ok(())
}
