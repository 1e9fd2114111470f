use std::path::{Path, PathBuf};

use vbspca::data::{load_csv, DataMatrix};
use vbspca::diagnosis::IndexKind;
use vbspca::monitor::DetectionResult;
use vbspca::pipeline::{self, Pipeline, TrainConfig};
use vbspca::sim::{preset, Scenario, PRESETS};

use crate::artifacts::RbcDocument;
use crate::config::{require, RunConfig};
use crate::failure::{Failure, Outcome, NOT_CONVERGED};
use crate::output::{read_text, write_atomic, write_json};
use crate::{DetectArgs, DiagnoseArgs, SimulateArgs, TrainArgs};

pub const DEFAULT_ONSET: usize = 201;

fn csv_bytes(data: &DataMatrix) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    Ok(buf)
}

fn load_data(path: &Path) -> Outcome<DataMatrix> {
    Ok(load_csv(path)?)
}

fn load_model(path: &Path) -> Outcome<Pipeline> {
    let text = read_text(path)?;
    Pipeline::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

pub fn simulate(args: SimulateArgs) -> Outcome<()> {
    let mut scenario = match (&args.scenario, &args.preset) {
        (Some(path), None) => {
            let text = read_text(path)?;
            Scenario::from_json(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => preset(name, 0).ok_or_else(|| {
            Failure::input(format!("unknown preset {name:?}, expected one of {}", PRESETS.join(", ")))
        })?,
        _ => return Err(Failure::input("give exactly one of --scenario or --preset")),
    };
    if let Some(seed) = args.seed {
        scenario.process.seed = seed;
    }
    let data = scenario.generate()?;
    write_atomic(&args.out.join("normal.csv"), &csv_bytes(&data.train)?)?;
    write_atomic(&args.out.join("faulty.csv"), &csv_bytes(&data.test_faulty)?)?;
    write_json(&args.out.join("truth.json"), &data.truth)?;
    Ok(())
}

fn report_path(model: &Path) -> PathBuf {
    let stem = model.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    model.with_file_name(format!("{stem}.report.json"))
}

pub fn train(args: TrainArgs) -> Outcome<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let train_path = require(args.train, &cfg.train, "train")?;
    let model_path = require(args.model, &cfg.model, "model")?;
    let mut tc = TrainConfig {
        variant: args.variant.or(cfg.variant).unwrap_or(TrainConfig::default().variant),
        gaussian: cfg.gaussian.clone(),
        laplace: cfg.laplace.clone(),
        var: cfg.var.to_config(),
        alpha: args.alpha.or(cfg.alpha).unwrap_or(0.95),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
    };
    if let Some(tau) = args.tau {
        tc.var.tau = tau;
    }
    if let Some(lambda) = args.lambda {
        let mut settings = cfg.var.clone();
        settings.lambda = lambda;
        tc.var.lambda = settings.to_config().lambda;
    }
    if let Some(rank) = args.rank {
        tc.gaussian.r_max = rank;
        tc.laplace.r = rank;
    }
    if !(tc.alpha > 0.0 && tc.alpha < 1.0) {
        return Err(Failure::input(format!("alpha = {} must lie in (0, 1)", tc.alpha)));
    }
    let raw = load_data(&train_path)?;
    let pipeline = pipeline::train(&raw, &tc)?;
    let report = pipeline.report();
    write_atomic(&model_path, (pipeline.to_json()? + "\n").as_bytes())?;
    write_json(&args.report.unwrap_or_else(|| report_path(&model_path)), &report)?;
    if !report.converged {
        return Err(Failure {
            code: NOT_CONVERGED,
            message: format!(
                "{} fit did not converge in {} sweeps; model written and flagged",
                report.variant, report.iterations
            ),
        });
    }
    Ok(())
}

fn detection_csv(result: &DetectionResult) -> Outcome<Vec<u8>> {
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    Ok(buf)
}

pub fn detect(args: DetectArgs) -> Outcome<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let model = load_model(&require(args.model, &cfg.model, "model")?)?;
    let test = load_data(&require(args.test, &cfg.test, "test")?)?;
    let out = args.out.or(cfg.out_dir).unwrap_or_else(|| PathBuf::from("."));
    let onset = args.onset.or(cfg.onset).unwrap_or(DEFAULT_ONSET);
    let result = model.detect(&test, onset)?;
    write_atomic(&out.join("detection.csv"), &detection_csv(&result)?)?;
    write_json(&out.join("detection.json"), &result.summary())?;
    Ok(())
}

pub fn diagnose(args: DiagnoseArgs) -> Outcome<()> {
    let cfg = RunConfig::load(args.config.as_deref())?;
    let model = load_model(&require(args.model, &cfg.model, "model")?)?;
    let test = load_data(&require(args.test, &cfg.test, "test")?)?;
    let out = args.out.or(cfg.out_dir).unwrap_or_else(|| PathBuf::from("."));
    let kind = args.kind.or(cfg.kind).unwrap_or(IndexKind::Spe);
    let onset = args.onset.or(cfg.onset).unwrap_or(DEFAULT_ONSET);
    let map = model.diagnose(&test, kind)?;
    let doc = RbcDocument::new(&map, onset);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Failure::input(e.to_string());
    w.write_record(["sample_index", "sensor_index", "tag", "rbc"]).map_err(csv_err)?;
    for (i, row) in doc.values.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let value = v.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([(i + 1).to_string(), (k + 1).to_string(), doc.tags[k].clone(), value])
                .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::input(e.to_string()))?;
    write_atomic(&out.join(format!("rbc_{kind}.csv")), &bytes)?;
    write_json(&out.join(format!("rbc_{kind}.json")), &doc)?;
    Ok(())
}
