//! Multi-seed execution and across-seed aggregation.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use hybridsim_core::math::percentile_sorted;
use hybridsim_core::{RunOutput, Scenario, Simulation, World};
use rayon::prelude::*;

use crate::output::{self, num, opt};
use crate::svg::render_snapshot;

/// Per-flow values of one seed, as written to `seeds.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRow {
    pub flow: String,
    pub technology: String,
    pub pdr: Option<f64>,
    pub delay_mean_s: Option<f64>,
    pub delay_median_s: Option<f64>,
    pub delay_p95_s: Option<f64>,
    pub mean_rate_bps: f64,
}

impl FlowRow {
    pub const METRICS: [&'static str; 5] = ["pdr", "delay_mean_s", "delay_median_s", "delay_p95_s", "mean_rate_bps"];

    pub fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "pdr" => self.pdr,
            "delay_mean_s" => self.delay_mean_s,
            "delay_median_s" => self.delay_median_s,
            "delay_p95_s" => self.delay_p95_s,
            "mean_rate_bps" => Some(self.mean_rate_bps),
            _ => None,
        }
    }

    pub fn from_output(out: &RunOutput) -> Vec<FlowRow> {
        out.summaries
            .iter()
            .map(|s| {
                let f = &out.flows[s.flow as usize];
                FlowRow {
                    flow: f.name.clone(),
                    technology: f.technology.clone(),
                    pdr: s.pdr,
                    delay_mean_s: s.delay_mean_s,
                    delay_median_s: s.delay_median_s,
                    delay_p95_s: s.delay_p95_s,
                    mean_rate_bps: s.mean_rate_bps,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub variant: String,
    pub seed: u64,
    pub dir: PathBuf,
    pub result: Result<Vec<FlowRow>, String>,
}

/// Box-plot statistics of a sample. Quartiles interpolate linearly between
/// order statistics; whiskers are the most extreme samples within 1.5 IQR of
/// the quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Describe {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; absent for a single value.
    pub stddev: Option<f64>,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

pub fn describe(values: &[f64]) -> Option<Describe> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean = v.iter().sum::<f64>() / n as f64;
    let stddev = (n > 1).then(|| (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt());
    let q1 = percentile_sorted(&v, 0.25);
    let q3 = percentile_sorted(&v, 0.75);
    let iqr = q3 - q1;
    let lo = q1 - 1.5 * iqr;
    let hi = q3 + 1.5 * iqr;
    Some(Describe {
        n,
        mean,
        stddev,
        min: v[0],
        q1,
        median: percentile_sorted(&v, 0.5),
        q3,
        max: v[n - 1],
        whisker_low: *v.iter().find(|&&x| x >= lo).expect("q1 itself qualifies"),
        whisker_high: *v.iter().rev().find(|&&x| x <= hi).expect("q3 itself qualifies"),
    })
}

/// Name of the pooled group of all flows of one technology.
pub const ALL_FLOWS: &str = "*";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub variant: String,
    pub technology: String,
    pub flow: String,
    pub metric: &'static str,
    pub stats: Describe,
}

/// Across-seed statistics per flow and per technology (all flows pooled).
pub fn aggregate(outcomes: &[SeedOutcome]) -> Vec<AggregateRow> {
    let mut groups: Vec<(String, String, String)> = Vec::new();
    for o in outcomes {
        if let Ok(rows) = &o.result {
            for r in rows {
                for key in [
                    (o.variant.clone(), r.technology.clone(), r.flow.clone()),
                    (o.variant.clone(), r.technology.clone(), ALL_FLOWS.to_string()),
                ] {
                    if !groups.contains(&key) {
                        groups.push(key);
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for (variant, tech, flow) in groups {
        for metric in FlowRow::METRICS {
            let values: Vec<f64> = outcomes
                .iter()
                .filter(|o| o.variant == variant)
                .filter_map(|o| o.result.as_ref().ok())
                .flatten()
                .filter(|r| r.technology == tech && (flow == ALL_FLOWS || r.flow == flow))
                .filter_map(|r| r.metric(metric))
                .collect();
            if let Some(stats) = describe(&values) {
                out.push(AggregateRow {
                    variant: variant.clone(),
                    technology: tech.clone(),
                    flow: flow.clone(),
                    metric,
                    stats,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub out: PathBuf,
    /// Width of SVG snapshots, px.
    pub snapshot_width: f64,
}

fn panic_text(p: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".to_string()
    }
}

/// Runs one seed and writes its directory.
pub fn run_seed(scenario: &Scenario, world: &World, seed: u64, dir: &Path, opts: &BatchOptions) -> Result<RunOutput, String> {
    let mut sim = Simulation::new(scenario, world, seed).map_err(|e| e.to_string())?;
    let horizon = sim.horizon();
    catch_unwind(AssertUnwindSafe(|| sim.run_until(horizon)))
        .map_err(|p| format!("simulation failed at t = {}: {}", sim.now(), panic_text(p.as_ref())))?;
    let out = sim.finish();
    write_seed(&out, world, scenario.trace.packets, dir, opts).map_err(|e| format!("{:#}", e))?;
    Ok(out)
}

fn write_seed(out: &RunOutput, world: &World, packets: bool, dir: &Path, opts: &BatchOptions) -> Result<()> {
    output::write_run_dir(out, dir, packets)?;
    for snap in &out.snapshots {
        let name = format!("snapshot_{}s.svg", snap.time.as_secs_f64());
        let path = dir.join(name);
        std::fs::write(&path, render_snapshot(world, &out.nodes, snap, opts.snapshot_width))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Directory of one (variant, seed) run below `out`.
pub fn seed_dir(out: &Path, variant: &str, seed: u64) -> PathBuf {
    let d = if variant.is_empty() { out.to_path_buf() } else { out.join(variant) };
    d.join(format!("seed_{}", seed))
}

/// Runs every sweep variant of `scenario` for every seed in parallel, then
/// writes `seeds.csv`, `aggregate.csv` and `failures.csv` into the output
/// directory. A failing seed is recorded and does not stop the others.
pub fn run_batch(scenario: &Scenario, world: &World, seeds: &[u64], opts: &BatchOptions) -> Result<Vec<SeedOutcome>> {
    let jobs: Vec<(String, Scenario, u64)> = scenario
        .variants()
        .into_iter()
        .flat_map(|(label, s)| seeds.iter().map(move |&seed| (label.clone(), s.clone(), seed)))
        .collect();
    let outcomes: Vec<SeedOutcome> = jobs
        .par_iter()
        .map(|(variant, s, seed)| {
            let dir = seed_dir(&opts.out, variant, *seed);
            let result = run_seed(s, world, *seed, &dir, opts).map(|o| FlowRow::from_output(&o));
            SeedOutcome {
                variant: variant.clone(),
                seed: *seed,
                dir,
                result,
            }
        })
        .collect();
    write_batch_files(&outcomes, &opts.out)?;
    Ok(outcomes)
}

pub fn write_batch_files(outcomes: &[SeedOutcome], out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut w = csv::Writer::from_path(out.join("seeds.csv"))?;
    w.write_record([
        "variant",
        "seed",
        "technology",
        "flow",
        "pdr",
        "delay_mean_s",
        "delay_median_s",
        "delay_p95_s",
        "mean_rate_bps",
    ])?;
    for o in outcomes {
        if let Ok(rows) = &o.result {
            for r in rows {
                w.write_record([
                    o.variant.clone(),
                    o.seed.to_string(),
                    r.technology.clone(),
                    r.flow.clone(),
                    opt(r.pdr)?,
                    opt(r.delay_mean_s)?,
                    opt(r.delay_median_s)?,
                    opt(r.delay_p95_s)?,
                    num(r.mean_rate_bps)?,
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("aggregate.csv"))?;
    w.write_record([
        "variant",
        "technology",
        "flow",
        "metric",
        "n",
        "mean",
        "stddev",
        "min",
        "q1",
        "median",
        "q3",
        "max",
        "whisker_low",
        "whisker_high",
    ])?;
    for a in aggregate(outcomes) {
        let s = a.stats;
        w.write_record([
            a.variant,
            a.technology,
            a.flow,
            a.metric.to_string(),
            s.n.to_string(),
            num(s.mean)?,
            opt(s.stddev)?,
            num(s.min)?,
            num(s.q1)?,
            num(s.median)?,
            num(s.q3)?,
            num(s.max)?,
            num(s.whisker_low)?,
            num(s.whisker_high)?,
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("failures.csv"))?;
    w.write_record(["variant", "seed", "error"])?;
    for o in outcomes {
        if let Err(e) = &o.result {
            w.write_record([o.variant.clone(), o.seed.to_string(), e.clone()])?;
        }
    }
    w.flush()?;
    Ok(())
}
