// SPDX-License-Identifier: Apache-2.0

//! `fuce` command-line front end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use fuce_core::clock::{Clock, VirtualClock, WallClock};
use fuce_core::corpus::{self, random_seeds, BenchmarkEntry, CycleScale};
use fuce_core::detector::{parse_table, witness_dump, GoldenModel};
use fuce_core::exec::DEFAULT_STEP_LIMIT;
use fuce_core::orchestrator::{run_campaign_detailed, CampaignConfig, Goal, Mode};
use fuce_core::report::{build_comparison, emit_report, emit_timeline, write_atomic, CampaignReport};
use fuce_core::testcase::load_seed_dir;
use fuce_core::{parse_design, Design};

#[derive(Parser)]
#[command(
    name = "fuce",
    version,
    about = "Hybrid fuzzing and concolic trojan hunting for DSL designs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one campaign on a design against its golden model.
    Run(RunArgs),
    /// Run the built-in benchmark suite and emit comparison tables.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct Timing {
    /// Stagnation limit in seconds before switching to concolic.
    #[arg(long, default_value_t = 5.0)]
    time_threshold: f64,
    /// Use a deterministic step-counting clock instead of wall time.
    #[arg(long)]
    virtual_clock: bool,
    #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
    step_limit: u64,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    design: PathBuf,
    /// Golden model: a `.fd` design or a `.table` of input/output pairs.
    #[arg(long)]
    golden: PathBuf,
    /// Directory of `.tc` or `.json` seed test cases.
    #[arg(long)]
    seeds: PathBuf,
    #[arg(long, default_value = "fuce")]
    mode: Mode,
    #[arg(long, default_value = "detect")]
    goal: Goal,
    #[arg(long, default_value_t = 7200.0)]
    time_cutoff: f64,
    #[arg(long, default_value_t = 1800.0)]
    time_budget: f64,
    #[command(flatten)]
    timing: Timing,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: PathBuf,
    /// Coverage timeline CSV.
    #[arg(long)]
    timeline: Option<PathBuf>,
    /// Persist the final queue into this directory.
    #[arg(long)]
    queue_dir: Option<PathBuf>,
    /// Write DUT and golden traces of the detection witness.
    #[arg(long)]
    witness: Option<PathBuf>,
    /// Write the concolic execution tree as Graphviz DOT.
    #[arg(long)]
    dump_tree: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "builtin")]
    suite: String,
    /// `fuce`, `fuzz`, `concolic` or `all`.
    #[arg(long, default_value = "all")]
    mode: String,
    #[arg(long, default_value = "detect")]
    goal: Goal,
    /// Output directory for reports and tables.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the built-in designs, goldens and trigger tests here and exit.
    #[arg(long)]
    export: Option<PathBuf>,
    #[arg(long, default_value_t = 120.0)]
    time_cutoff: f64,
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    #[command(flatten)]
    timing: Timing,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Only run benchmarks with these names.
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Use the 2^20 - 1 cycle threshold for the controller.
    #[arg(long)]
    faithful: bool,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Io(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(e) | Failure::Io(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}

fn seconds(s: f64, flag: &str) -> Result<Duration, Failure> {
    Duration::try_from_secs_f64(s).map_err(|_| usage(anyhow!("--{flag} must be a non-negative number of seconds")))
}

fn config(
    mode: Mode,
    goal: Goal,
    cutoff: f64,
    budget: f64,
    timing: &Timing,
    seed: u64,
) -> Result<CampaignConfig, Failure> {
    let c = CampaignConfig {
        time_cutoff: seconds(cutoff, "time-cutoff")?,
        time_threshold: seconds(timing.time_threshold, "time-threshold")?,
        time_budget: seconds(budget, "time-budget")?,
        rng_seed: seed,
        goal,
        mode,
        step_limit: timing.step_limit,
        ..CampaignConfig::default()
    };
    c.validate().map_err(usage)?;
    Ok(c)
}

fn make_clock(virtual_clock: bool) -> Box<dyn Clock> {
    if virtual_clock {
        Box::new(VirtualClock::new())
    } else {
        Box::new(WallClock::new())
    }
}

fn load_design(path: &Path) -> Result<Design, Failure> {
    let src = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(io)?;
    parse_design(&src)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(usage)
}

fn load_golden(path: &Path) -> Result<GoldenModel, Failure> {
    if path.extension().is_some_and(|e| e == "table") {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .map_err(io)?;
        let table = parse_table(&text)
            .with_context(|| format!("parsing {}", path.display()))
            .map_err(usage)?;
        Ok(GoldenModel::Table(table))
    } else {
        load_design(path).map(GoldenModel::Reference)
    }
}

fn summary(r: &CampaignReport) -> String {
    format!(
        "{} {} {}: {} phases={} coverage={:.2}% tests={} seconds={:.3}",
        r.design,
        r.mode,
        r.goal,
        r.outcome.as_str(),
        r.phase_sequence(),
        r.branch_coverage_pct,
        r.total_tests,
        r.total_seconds
    )
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let cfg = config(a.mode, a.goal, a.time_cutoff, a.time_budget, &a.timing, a.seed)?;
    let design = load_design(&a.design)?;
    let golden = load_golden(&a.golden)?;
    let seeds = load_seed_dir(&a.seeds).map_err(io)?;
    if seeds.is_empty() {
        return Err(usage(anyhow!("no seed test cases in {}", a.seeds.display())));
    }
    let clock = make_clock(a.timing.virtual_clock);
    let out = run_campaign_detailed(&design, &golden, &seeds, &cfg, clock.as_ref()).map_err(usage)?;
    emit_report(&out.report, &a.report).map_err(io)?;
    if let Some(p) = &a.timeline {
        emit_timeline(&out.report.timeline, p).map_err(io)?;
    }
    if let Some(dir) = &a.queue_dir {
        out.queue
            .persist(dir)
            .with_context(|| format!("writing queue to {}", dir.display()))
            .map_err(io)?;
    }
    if let (Some(p), Some(w)) = (&a.witness, &out.report.witness) {
        let dump = witness_dump(&design, &golden, w, cfg.step_limit).map_err(usage)?;
        let json = serde_json::to_string_pretty(&dump).expect("witness dumps serialize");
        write_atomic(p, json.as_bytes()).map_err(io)?;
    }
    if let Some(p) = &a.dump_tree {
        write_atomic(p, out.tree.to_dot().as_bytes()).map_err(io)?;
    }
    println!("{}", summary(&out.report));
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    if a.suite != "builtin" {
        return Err(usage(anyhow!("unknown suite `{}`; only `builtin` exists", a.suite)));
    }
    let mut suite: Vec<BenchmarkEntry> = corpus::builtin_suite();
    if a.faithful {
        suite[0] = corpus::controller(CycleScale::Faithful);
    }
    if let Some(dir) = &a.export {
        corpus::export(&suite, dir)
            .with_context(|| format!("exporting to {}", dir.display()))
            .map_err(io)?;
        println!("exported {} designs to {}", suite.len(), dir.display());
        return Ok(());
    }
    if !a.only.is_empty() {
        suite.retain(|e| a.only.iter().any(|n| n == e.name));
    }
    let modes: Vec<Mode> = if a.mode == "all" {
        Mode::ALL.to_vec()
    } else {
        vec![a.mode.parse::<Mode>().map_err(|e| usage(anyhow!(e)))?]
    };
    let dir = a.report.clone().unwrap_or_else(|| PathBuf::from("bench-reports"));
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(io)?;

    let mut reports = Vec::new();
    for entry in &suite {
        let seeds = random_seeds(&entry.dut, 4, a.seed);
        for &mode in &modes {
            let cfg = config(mode, a.goal, a.time_cutoff, a.time_budget, &a.timing, a.seed)?;
            let clock = make_clock(a.timing.virtual_clock);
            let out = run_campaign_detailed(&entry.dut, &entry.golden, &seeds, &cfg, clock.as_ref()).map_err(usage)?;
            emit_report(&out.report, &dir.join(format!("{}.{}.json", entry.name, mode))).map_err(io)?;
            eprintln!("{}", summary(&out.report));
            reports.push(out.report);
        }
    }
    let table = build_comparison(&reports).map_err(usage)?;
    write_atomic(&dir.join("comparison.csv"), table.to_csv().map_err(io)?.as_bytes()).map_err(io)?;
    let text = table.to_text();
    write_atomic(&dir.join("comparison.txt"), text.as_bytes()).map_err(io)?;
    print!("{text}");
    Ok(())
}
