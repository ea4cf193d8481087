//! CSV writers for run outputs. Every numeric field is checked to be finite.

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hybridsim_core::engine::{RunOutput, VehicleSummary};
use hybridsim_core::net::{FlowSummary, Outcome};
use hybridsim_core::SimTime;

/// Shortest round-trip representation of a finite value.
pub fn num(v: f64) -> Result<String> {
    if !v.is_finite() {
        bail!("refusing to write non-finite value {}", v);
    }
    Ok(format!("{}", v))
}

/// Empty field for absent values.
pub fn opt(v: Option<f64>) -> Result<String> {
    v.map(num).transpose().map(Option::unwrap_or_default)
}

pub fn secs(t: SimTime) -> String {
    format!("{}", t.as_secs_f64())
}

pub fn write_trace<W: Write>(out: &RunOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["time_s", "subject", "metric", "value"])?;
    for r in &out.trace {
        w.write_record([
            secs(r.time),
            out.subjects[r.subject as usize].clone(),
            r.metric.name().to_string(),
            num(r.value).with_context(|| format!("{} of {}", r.metric.name(), out.subjects[r.subject as usize]))?,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_packets<W: Write>(out: &RunOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["packet", "flow", "size_bytes", "created_s", "outcome", "resolved_s", "reason", "delay_s"])?;
    for r in &out.packets {
        let p = &r.packet;
        let (outcome, at, reason) = match r.outcome {
            Outcome::Delivered(t) => ("delivered", secs(t), ""),
            Outcome::Lost(t, why) => ("lost", secs(t), why.label()),
            Outcome::Pending => ("pending", String::new(), ""),
        };
        w.write_record([
            p.id.to_string(),
            out.flows[p.flow as usize].name.clone(),
            p.size.to_string(),
            secs(p.created),
            outcome.to_string(),
            at,
            reason.to_string(),
            r.delay().map(secs).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const SUMMARY_HEADER: [&str; 13] = [
    "flow",
    "technology",
    "src",
    "dst",
    "sent",
    "delivered",
    "lost",
    "pdr",
    "delay_mean_s",
    "delay_median_s",
    "delay_p95_s",
    "mean_rate_bps",
    "kind",
];

pub fn summary_fields(out: &RunOutput, s: &FlowSummary) -> Result<Vec<String>> {
    let f = &out.flows[s.flow as usize];
    Ok(vec![
        f.name.clone(),
        f.technology.clone(),
        f.src.clone(),
        f.dst.clone(),
        s.sent.to_string(),
        s.delivered.to_string(),
        s.lost.to_string(),
        opt(s.pdr)?,
        opt(s.delay_mean_s)?,
        opt(s.delay_median_s)?,
        opt(s.delay_p95_s)?,
        num(s.mean_rate_bps)?,
        f.kind.label().to_string(),
    ])
}

pub fn write_summary<W: Write>(out: &RunOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(SUMMARY_HEADER)?;
    for s in &out.summaries {
        w.write_record(summary_fields(out, s)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rates<W: Write>(out: &RunOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["window_start_s", "flow", "rate_bps"])?;
    for r in &out.rates {
        w.write_record([secs(r.window_start), out.flows[r.flow as usize].name.clone(), num(r.bits_per_s)?])?;
    }
    w.flush()?;
    Ok(())
}

fn vehicle_row(v: &VehicleSummary) -> Result<[String; 5]> {
    Ok([
        v.name.clone(),
        match v.kind {
            hybridsim_core::net::NodeKind::Car => "car",
            hybridsim_core::net::NodeKind::Uav => "uav",
            hybridsim_core::net::NodeKind::BaseStation => "base_station",
        }
        .to_string(),
        num(v.distance_m)?,
        opt(v.energy_j)?,
        v.collisions.to_string(),
    ])
}

pub fn write_vehicles<W: Write>(out: &RunOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["vehicle", "kind", "distance_m", "energy_j", "collisions"])?;
    for v in &out.vehicles {
        w.write_record(vehicle_row(v)?)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_run<W: Write>(out: &RunOutput, w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    w.write_record(["seed", "duration_s", "events", "cache_hits", "cache_misses", "cache_hit_rate"])?;
    w.write_record([
        out.seed.to_string(),
        secs(out.duration),
        out.events.to_string(),
        out.cache.hits.to_string(),
        out.cache.misses.to_string(),
        opt(out.cache.hit_rate())?,
    ])?;
    w.flush()?;
    Ok(())
}

/// Writes every CSV of one run into `dir`. Packet rows are skipped when
/// `packets` is false.
pub fn write_run_dir(out: &RunOutput, dir: &Path, packets: bool) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let file = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        let p = dir.join(name);
        Ok(std::io::BufWriter::new(
            std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?,
        ))
    };
    write_trace(out, file("trace.csv")?)?;
    if packets {
        write_packets(out, file("packets.csv")?)?;
    }
    write_summary(out, file("summary.csv")?)?;
    write_rates(out, file("rates.csv")?)?;
    write_vehicles(out, file("vehicles.csv")?)?;
    write_run(out, file("run.csv")?)?;
    if !out.warnings.is_empty() {
        let mut w = file("warnings.txt")?;
        for line in &out.warnings {
            writeln!(w, "{}", line)?;
        }
    }
    Ok(())
}
