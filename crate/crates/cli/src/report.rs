use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use vbspca::diagnosis::IndexKind;
use vbspca::monitor::{alarm_metrics, AlarmMetrics, DetectionSummary};
use vbspca::sim::GroundTruth;

use crate::artifacts::{top_sensors, RbcDocument, SensorScore, TOP_SENSORS};
use crate::failure::{Failure, Outcome};
use crate::output::{read_text, write_atomic, write_json};
use crate::ReportArgs;

pub const REPORT_SCHEMA: &str = "vbspca-report/1";

#[derive(Debug, Serialize)]
struct PhaseTop {
    kind: IndexKind,
    sensors: Vec<SensorScore>,
}

/// A stretch of samples between consecutive fault onsets (1-based,
/// inclusive).
#[derive(Debug, Serialize)]
struct Phase {
    start: usize,
    end: usize,
    top: Vec<PhaseTop>,
}

#[derive(Debug, Serialize)]
struct Report {
    schema: String,
    onset: usize,
    samples: usize,
    far: Option<f64>,
    fdr: Option<f64>,
    delay: i64,
    t2: AlarmMetrics,
    spe: AlarmMetrics,
    either: AlarmMetrics,
    /// Whether the metrics recomputed from detection.csv equal
    /// detection.json.
    matches_summary: bool,
    faulty_sensors: Option<Vec<usize>>,
    phases: Vec<Phase>,
}

struct Alarms {
    warmup: usize,
    t2: Vec<bool>,
    spe: Vec<bool>,
}

fn parse_flag(field: &str, row: usize) -> Outcome<bool> {
    match field {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(Failure::input(format!("detection.csv row {row}: bad alarm value {other:?}"))),
    }
}

fn read_alarms(path: &Path) -> Outcome<Alarms> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Failure::io(path, e))?;
    let mut alarms = Alarms {
        warmup: 0,
        t2: Vec::new(),
        spe: Vec::new(),
    };
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Failure::io(path, e))?;
        if rec.len() != 7 {
            return Err(Failure::input(format!("{}: row {} has {} fields", path.display(), i + 2, rec.len())));
        }
        if rec[5].is_empty() {
            alarms.warmup += 1;
            alarms.t2.push(false);
            alarms.spe.push(false);
        } else {
            alarms.t2.push(parse_flag(&rec[5], i + 2)?);
            alarms.spe.push(parse_flag(&rec[6], i + 2)?);
        }
    }
    Ok(alarms)
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Outcome<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn run(args: ReportArgs) -> Outcome<()> {
    let dir = &args.run;
    let summary_path = dir.join("detection.json");
    let csv_path = dir.join("detection.csv");
    if !summary_path.is_file() || !csv_path.is_file() {
        return Err(Failure::input(format!(
            "{}: detection.json and detection.csv are required (run detect first)",
            dir.display()
        )));
    }
    let summary: DetectionSummary = load_json(&summary_path)?;
    let alarms = read_alarms(&csv_path)?;
    let mut rbc = Vec::new();
    for kind in [IndexKind::T2, IndexKind::Spe] {
        let path = dir.join(format!("rbc_{kind}.json"));
        if path.is_file() {
            rbc.push(load_json::<RbcDocument>(&path)?);
        }
    }
    if rbc.is_empty() {
        return Err(Failure::input(format!(
            "{}: no rbc_t2.json or rbc_spe.json (run diagnose first)",
            dir.display()
        )));
    }
    let truth_path = args.truth.clone().unwrap_or_else(|| dir.join("truth.json"));
    let truth: Option<GroundTruth> = if truth_path.is_file() {
        Some(load_json(&truth_path)?)
    } else if args.truth.is_some() {
        return Err(Failure::input(format!("{}: not found", truth_path.display())));
    } else {
        None
    };

    let n = alarms.t2.len();
    if n != summary.samples {
        return Err(Failure::input("detection.csv and detection.json disagree on the sample count"));
    }
    let onset = summary.onset;
    let either: Vec<bool> = alarms.t2.iter().zip(&alarms.spe).map(|(a, b)| *a || *b).collect();
    let t2 = alarm_metrics(&alarms.t2, alarms.warmup, onset);
    let spe = alarm_metrics(&alarms.spe, alarms.warmup, onset);
    let either = alarm_metrics(&either, alarms.warmup, onset);
    let far = match (t2.far, spe.far) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    let matches_summary = same(far, summary.far) && same(either.fdr, summary.fdr) && either.delay == summary.delay;

    let mut bounds: Vec<usize> = match &truth {
        Some(t) => t.faults.iter().map(|f| f.onset).collect(),
        None => vec![onset],
    };
    bounds.sort_unstable();
    bounds.dedup();
    bounds.retain(|&b| b >= 1 && b <= n);
    let phases = bounds
        .iter()
        .enumerate()
        .map(|(i, &start)| {
            let end = bounds.get(i + 1).map_or(n, |next| next - 1);
            let top = rbc
                .iter()
                .map(|doc| PhaseTop {
                    kind: doc.kind,
                    sensors: top_sensors(&doc.values, &doc.tags, start - 1, end, TOP_SENSORS),
                })
                .collect();
            Phase { start, end, top }
        })
        .collect();

    let report = Report {
        schema: REPORT_SCHEMA.into(),
        onset,
        samples: n,
        far,
        fdr: either.fdr,
        delay: either.delay,
        t2,
        spe,
        either,
        matches_summary,
        faulty_sensors: truth.as_ref().map(|t| t.faulty_sensors.clone()),
        phases,
    };
    if !matches_summary {
        log::warn!("metrics recomputed from detection.csv differ from detection.json");
    }
    write_json(&dir.join("report.json"), &report)?;
    write_atomic(&dir.join("report.md"), markdown(&report).as_bytes())?;
    Ok(())
}

fn rate(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn markdown(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Monitoring report\n");
    let _ = writeln!(s, "Fault onset: sample {} of {}.\n", r.onset, r.samples);
    let _ = writeln!(s, "| metric | value |\n|---|---|");
    let _ = writeln!(s, "| far | {} |", rate(r.far));
    let _ = writeln!(s, "| fdr | {} |", rate(r.fdr));
    let _ = writeln!(s, "| detection delay | {} |", r.delay);
    let _ = writeln!(s);
    let _ = writeln!(s, "| index | far | fdr | delay |\n|---|---|---|---|");
    for (name, m) in [("T²", &r.t2), ("SPE", &r.spe), ("either", &r.either)] {
        let _ = writeln!(s, "| {name} | {} | {} | {} |", rate(m.far), rate(m.fdr), m.delay);
    }
    if let Some(sensors) = &r.faulty_sensors {
        let list: Vec<String> = sensors.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(s, "\nGround-truth faulty sensors: {}.", list.join(", "));
    }
    for p in &r.phases {
        let _ = writeln!(s, "\n## Samples {} to {}\n", p.start, p.end);
        for top in &p.top {
            let names: Vec<String> = top
                .sensors
                .iter()
                .map(|x| format!("{} (#{}, {:.3})", x.tag, x.sensor, x.mean_rbc))
                .collect();
            let _ = writeln!(s, "- {} RBC: {}", top.kind, names.join(", "));
        }
    }
    s
}
