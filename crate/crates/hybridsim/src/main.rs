use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hybridsim::batch::{run_batch, BatchOptions};
use hybridsim::core::beam::{sample_pattern, ArrayConfig, Pointing};
use hybridsim::output::num;

#[derive(Parser)]
#[command(name = "hybridsim", version, about = "Coupled vehicle mobility and wireless network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for one or more seeds.
    Run(RunArgs),
    /// Parse and validate a scenario and its map without running it.
    Check {
        #[arg(long)]
        scenario: PathBuf,
        /// Treat unknown keys as errors.
        #[arg(long)]
        strict: bool,
    },
    /// Export the relative gain pattern of a steered planar array as CSV.
    Pattern(PatternArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Single seed; defaults to the scenario's seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Inclusive seed range, e.g. 1..50.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Simulated duration override, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Snapshot times, s, comma separated.
    #[arg(long, value_delimiter = ',')]
    snapshot_at: Option<Vec<f64>>,
    /// Treat unknown keys as errors.
    #[arg(long)]
    strict: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Width of SVG snapshots, px.
    #[arg(long, default_value_t = 1000.0)]
    snapshot_width: f64,
}

#[derive(clap::Args)]
struct PatternArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    rows: u32,
    #[arg(long, default_value_t = 8)]
    cols: u32,
    /// Steering azimuth, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    steer_az: f64,
    /// Steering elevation, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    steer_el: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let (a, b) = s.split_once("..").context("expected a range like 1..50")?;
    let a: u64 = a.trim().parse().with_context(|| format!("bad seed {:?}", a))?;
    let b: u64 = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad seed {:?}", b))?;
    if b < a {
        bail!("empty seed range {}", s);
    }
    Ok((a..=b).collect())
}

fn run(args: RunArgs) -> Result<()> {
    let mut p = hybridsim::prepare(&args.scenario, args.strict)?;
    for w in &p.warnings {
        eprintln!("warning: {}: {}", args.scenario.display(), w);
    }
    if let Some(d) = args.duration {
        p.scenario.duration_s = d;
    }
    if let Some(t) = args.snapshot_at {
        p.scenario.trace.snapshots_s = t;
    }
    let issues = p.scenario.validate();
    if !issues.is_empty() {
        let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
        bail!("{}", lines.join("\n"));
    }
    let seeds = match (&args.seeds, args.seed) {
        (Some(r), _) => parse_seeds(r)?,
        (None, Some(s)) => vec![s],
        (None, None) => vec![p.scenario.seed],
    };
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let opts = BatchOptions {
        out: args.out.clone(),
        snapshot_width: args.snapshot_width,
    };
    let started = Instant::now();
    let outcomes = run_batch(&p.scenario, &p.world, &seeds, &opts)?;
    let failed: Vec<_> = outcomes.iter().filter(|o| o.result.is_err()).collect();
    eprintln!(
        "{} run(s) in {:.1} s, output in {}",
        outcomes.len(),
        started.elapsed().as_secs_f64(),
        args.out.display()
    );
    for o in &failed {
        eprintln!("seed {} {}: {}", o.seed, o.variant, o.result.as_ref().unwrap_err());
    }
    if !failed.is_empty() {
        bail!("{} of {} runs failed", failed.len(), outcomes.len());
    }
    Ok(())
}

fn check(scenario: PathBuf, strict: bool) -> Result<()> {
    let p = hybridsim::prepare(&scenario, strict)?;
    for w in &p.warnings {
        eprintln!("warning: {}: {}", scenario.display(), w);
    }
    for w in p.world.warnings() {
        eprintln!("warning: map: {}", w);
    }
    println!(
        "ok: {} intersections, {} road segments, {} buildings, {} variant(s)",
        p.world.nodes().len(),
        p.world.segments().len(),
        p.world.buildings().len(),
        p.scenario.variants().len()
    );
    Ok(())
}

fn pattern(a: PatternArgs) -> Result<()> {
    let cfg = ArrayConfig {
        rows: a.rows,
        cols: a.cols,
        ..ArrayConfig::default()
    };
    let samples = sample_pattern(&cfg, Pointing::new(a.steer_az, a.steer_el), (-90.0, 90.0), (-90.0, 90.0), a.step)
        .map_err(|e| anyhow::anyhow!("{}", e))?;
    let mut w = csv::Writer::from_path(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    w.write_record(["azimuth_deg", "elevation_deg", "gain_db"])?;
    for s in samples {
        w.write_record([num(s.azimuth_deg)?, num(s.elevation_deg)?, num(s.gain_db)?])?;
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Run(a) => run(a),
        Command::Check { scenario, strict } => check(scenario, strict),
        Command::Pattern(a) => pattern(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::FAILURE
        }
    }
}
