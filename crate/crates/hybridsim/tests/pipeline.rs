use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hybridsim::batch::{run_batch, BatchOptions};
use hybridsim::config::{parse_scenario, serialize_scenario};
use hybridsim::core::scenario::StrategyKind;
use hybridsim::core::Simulation;
use hybridsim::{prepare, Prepared};
use proptest::prelude::*;

fn scenario_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name).join("scenario.toml")
}

fn smoke() -> Prepared {
    let mut p = prepare(&scenario_file("smoke"), true).unwrap();
    p.scenario.duration_s = 20.0;
    p.scenario.trace.packets = true;
    p.scenario.trace.snapshots_s = vec![10.0];
    p
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn every_shipped_scenario_loads_strictly() {
    for name in ["case-study-1", "case-study-2", "smoke", "stationary-stress"] {
        let p = prepare(&scenario_file(name), true).unwrap_or_else(|e| panic!("{name}: {e:#}"));
        assert!(p.warnings.is_empty());
        assert!(!p.world.segments().is_empty());
        assert!(!p.world.buildings().is_empty());
    }
}

#[test]
fn shipped_scenarios_round_trip() {
    for name in ["case-study-1", "case-study-2", "smoke", "stationary-stress"] {
        let p = prepare(&scenario_file(name), true).unwrap();
        let text = serialize_scenario(&p.scenario).unwrap();
        let back = parse_scenario(&text, true).unwrap_or_else(|e| panic!("{name}: {e}\n{text}"));
        assert_eq!(back.scenario, p.scenario, "{name}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn edited_scenarios_round_trip(
        duration in 1.0f64..5_000.0,
        seed in any::<u64>(),
        v0 in 5.0f64..40.0,
        sigma in 0.0f64..12.0,
        interval in 0.01f64..2.0,
        height in 5.0f64..120.0,
        fixed in any::<bool>(),
    ) {
        let mut s = prepare(&scenario_file("case-study-1"), true).unwrap().scenario;
        s.duration_s = duration;
        s.seed = seed;
        s.idm.v0 = v0;
        s.channel.shadowing_sigma_nlos_db = sigma;
        s.flows[0].interval_s = Some(interval);
        s.uav_defaults.operating_height = height;
        if fixed {
            s.cars[0].strategy = StrategyKind::FixedRoute;
            s.cars[0].route = vec![9, 12, 33];
        }
        let text = serialize_scenario(&s).unwrap();
        let back = parse_scenario(&text, true).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back.scenario, s);
    }
}

#[test]
fn summaries_conserve_packets() {
    let p = smoke();
    for seed in 1..=3 {
        let out = Simulation::new(&p.scenario, &p.world, seed).unwrap().run();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        for s in &out.summaries {
            let records: Vec<_> = out.packets.iter().filter(|r| r.packet.flow == s.flow).collect();
            assert_eq!(records.len() as u64, s.sent);
            assert_eq!(s.delivered + s.lost, s.sent);
            let delivered = records.iter().filter(|r| r.delay().is_some()).count() as u64;
            assert_eq!(delivered, s.delivered);
            assert!(records.iter().filter_map(|r| r.delay()).all(|d| d.as_secs_f64() >= 0.0));
        }
        for v in &out.vehicles {
            assert_eq!(v.collisions, 0, "{}", v.name);
        }
    }
}

#[test]
fn same_seed_same_output_different_seed_different_output() {
    let p = smoke();
    let run = |seed| Simulation::new(&p.scenario, &p.world, seed).unwrap().run();
    let (a, b, c) = (run(4), run(4), run(5));
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.packets, b.packets);
    assert_eq!(a.summaries, b.summaries);
    assert_ne!(a.trace, c.trace);
}

/// Linear-interpolation quantile of a sorted sample.
fn quantile(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn batch_files_agree_with_an_independent_recomputation() {
    let p = smoke();
    let tmp = tempfile::tempdir().unwrap();
    let opts = BatchOptions {
        out: tmp.path().to_path_buf(),
        snapshot_width: 600.0,
    };
    let seeds = [1, 2, 3, 4, 5];
    let outcomes = run_batch(&p.scenario, &p.world, &seeds, &opts).unwrap();
    assert!(outcomes.iter().all(|o| o.result.is_ok()));

    // Per-seed summaries recomputed from the packet files.
    let mut per_group: BTreeMap<(String, String, String), Vec<f64>> = BTreeMap::new();
    for seed in seeds {
        let dir = tmp.path().join(format!("seed_{seed}"));
        let (ph, packets) = read_csv(&dir.join("packets.csv"));
        let (sh, summary) = read_csv(&dir.join("summary.csv"));
        for row in &summary {
            let flow = &row[column(&sh, "flow")];
            let tech = &row[column(&sh, "technology")];
            let mine: Vec<&Vec<String>> = packets.iter().filter(|r| &r[column(&ph, "flow")] == flow).collect();
            let mut delays: Vec<f64> = mine
                .iter()
                .filter(|r| r[column(&ph, "outcome")] == "delivered")
                .map(|r| r[column(&ph, "delay_s")].parse().unwrap())
                .collect();
            delays.sort_by(f64::total_cmp);
            let sent: u64 = row[column(&sh, "sent")].parse().unwrap();
            assert_eq!(sent as usize, mine.len());
            let pdr = delays.len() as f64 / sent as f64;
            let written: f64 = row[column(&sh, "pdr")].parse().unwrap();
            assert!(close(pdr, written), "{flow}: pdr {pdr} vs {written}");
            if !delays.is_empty() {
                let median: f64 = row[column(&sh, "delay_median_s")].parse().unwrap();
                assert!((quantile(&delays, 0.5) - median).abs() < 1e-9, "{flow}");
            }
            per_group.entry((tech.clone(), flow.clone(), "pdr".into())).or_default().push(written);
            per_group.entry((tech.clone(), "*".into(), "pdr".into())).or_default().push(written);
        }
    }

    let (ah, agg) = read_csv(&tmp.path().join("aggregate.csv"));
    let mut checked = 0;
    for ((tech, flow, metric), mut values) in per_group {
        let row = agg
            .iter()
            .find(|r| r[column(&ah, "technology")] == tech && r[column(&ah, "flow")] == flow && r[column(&ah, "metric")] == metric)
            .unwrap_or_else(|| panic!("no aggregate row for {tech} {flow} {metric}"));
        let get = |c: &str| -> f64 { row[column(&ah, c)].parse().unwrap() };
        values.sort_by(f64::total_cmp);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(get("n"), n);
        assert!(close(get("mean"), mean) || (get("mean") - mean).abs() < 1e-15);
        assert!((get("stddev") - sd).abs() < 1e-12);
        assert_eq!(get("min"), values[0]);
        assert_eq!(get("max"), values[values.len() - 1]);
        for (c, q) in [("q1", 0.25), ("median", 0.5), ("q3", 0.75)] {
            assert!((get(c) - quantile(&values, q)).abs() < 1e-12, "{tech} {flow} {c}");
        }
        checked += 1;
    }
    assert!(checked >= 9);
    let (fh, failures) = read_csv(&tmp.path().join("failures.csv"));
    assert_eq!(fh, ["variant", "seed", "error"]);
    assert!(failures.is_empty());
}

#[test]
fn snapshot_is_well_formed_svg() {
    let p = smoke();
    let tmp = tempfile::tempdir().unwrap();
    let opts = BatchOptions {
        out: tmp.path().to_path_buf(),
        snapshot_width: 600.0,
    };
    run_batch(&p.scenario, &p.world, &[1], &opts).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("seed_1").join("snapshot_10s.svg")).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let root = doc.root_element();
    assert_eq!(root.tag_name().name(), "svg");
    let polygons = doc.descendants().filter(|n| n.has_tag_name("polygon")).count();
    assert!(polygons >= p.world.buildings().len());
    for name in ["car1", "car2", "uav1", "uav2"] {
        assert!(text.contains(name), "{name} missing from snapshot");
    }
}
