use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use intermob::geo_flows::{aggregate_total, load_flows, load_zones, write_flows, write_stringency, write_zones};
use intermob::metrics::{synchronicity, LocalSync};
use intermob::synthgen::{generate, SynthConfig};
use intermob::FlowModel;
use serde::Serialize;

use crate::args::{GenArgs, RunConfig};
use crate::error::{write_err, CliError, CliResult};
use crate::pipeline::{fit_all, score_all, Inputs, ParamsFile};
use crate::report::{create_dir, csv_writer, resolve_split, summarize, write_json, write_scores};

pub const PARAMS_FILE: &str = "params.json";
pub const SCORES_FILE: &str = "scores.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SYNC_FILE: &str = "sync.json";
pub const SYNC_LOCAL_FILE: &str = "sync_local.csv";
pub const SYNC_SERIES_FILE: &str = "sync_series.csv";

fn needs_stringency(cfg: &RunConfig) -> bool {
    cfg.models.iter().any(|m| m.is_cgm())
}

pub fn cmd_fit(cfg: &RunConfig) -> CliResult<ParamsFile> {
    let inputs = Inputs::load(cfg, needs_stringency(cfg))?;
    let params = fit_all(cfg, &inputs)?;
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join(PARAMS_FILE), &params)?;
    Ok(params)
}

fn read_params(path: &Path) -> CliResult<ParamsFile> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn cmd_evaluate(cfg: &RunConfig) -> CliResult<()> {
    let inputs = Inputs::load(cfg, needs_stringency(cfg))?;
    let dates = inputs.dates();
    let split = resolve_split(&dates, cfg.split_date)?;
    let params = match &cfg.params {
        Some(path) => read_params(path)?,
        None => fit_all(cfg, &inputs)?,
    };
    let scores = score_all(cfg, &inputs, &params)?;
    let summary = summarize(&scores, &cfg.models, &dates, split, cfg.improvement_convention);
    create_dir(&cfg.out)?;
    if cfg.params.is_none() {
        write_json(&cfg.out.join(PARAMS_FILE), &params)?;
    }
    write_scores(&cfg.out.join(SCORES_FILE), &scores)?;
    write_json(&cfg.out.join(SUMMARY_FILE), &summary)
}

/// Reads a `date,value` series.
pub fn read_reference(path: &Path) -> CliResult<BTreeMap<NaiveDate, f64>> {
    let label = path.display();
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::input(format!("cannot read {label}: {e}")))?;
    let header = reader.headers().map_err(|e| CliError::input(format!("{label}: {e}")))?.clone();
    let names: Vec<&str> = header.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if names != ["date", "value"] {
        return Err(CliError::input(format!("{label}: expected header `date,value`, found `{}`", names.join(","))));
    }
    let mut series = BTreeMap::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| CliError::input(format!("{label}:{line}: {e}")))?;
        let date: NaiveDate = rec[0]
            .parse()
            .map_err(|e| CliError::input(format!("{label}:{line}: invalid date `{}`: {e}", &rec[0])))?;
        let value: f64 = rec[1]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| CliError::input(format!("{label}:{line}: invalid value `{}`", &rec[1])))?;
        if series.insert(date, value).is_some() {
            return Err(CliError::input(format!("{label}:{line}: duplicate date {date}")));
        }
    }
    Ok(series)
}

#[derive(Debug, Serialize)]
struct SyncOutput {
    n: usize,
    first_date: NaiveDate,
    last_date: NaiveDate,
    rho_g: f64,
    local: Vec<LocalSync<f64>>,
}

pub fn cmd_sync(cfg: &RunConfig) -> CliResult<()> {
    let reference_path = cfg.reference.as_ref().ok_or_else(|| CliError::input("missing required input --reference"))?;
    let registry = load_zones(&cfg.zones).map_err(|e| CliError::input(e.to_string()))?;
    let panel = load_flows(&cfg.flows, &registry).map_err(|e| CliError::input(e.to_string()))?;
    let observed: Vec<(NaiveDate, f64)> = match &cfg.focus {
        Some(focus) => aggregate_total(&panel, &registry, focus, cfg.direction)
            .map_err(|e| CliError::input(format!("--focus: {e}")))?,
        None => panel.iter().map(|d| (d.date(), d.total())).collect(),
    };
    let reference = read_reference(reference_path)?;
    let aligned: Vec<(NaiveDate, f64, f64)> =
        observed.iter().filter_map(|&(d, v)| reference.get(&d).map(|&r| (d, v, r))).collect();
    if aligned.is_empty() {
        return Err(CliError::input("flows and reference series share no dates"));
    }
    let x: Vec<f64> = aligned.iter().map(|a| a.1).collect();
    let y: Vec<f64> = aligned.iter().map(|a| a.2).collect();
    let (report, rolling) =
        synchronicity(&x, &y, &cfg.windows).map_err(|e| CliError::input(format!("synchronicity: {e}")))?;

    create_dir(&cfg.out)?;
    let out = SyncOutput {
        n: aligned.len(),
        first_date: aligned[0].0,
        last_date: aligned[aligned.len() - 1].0,
        rho_g: report.rho_g,
        local: report.local,
    };
    write_json(&cfg.out.join(SYNC_FILE), &out)?;

    let path = cfg.out.join(SYNC_LOCAL_FILE);
    let mut w = csv_writer(&path)?;
    let result = (|| -> csv::Result<()> {
        w.write_record(["w", "start_date", "end_date", "rho"])?;
        for r in &rolling {
            for (t, v) in r.values.iter().enumerate() {
                let rho = v.map(|v| v.to_string()).unwrap_or_default();
                w.write_record([
                    r.window.to_string(),
                    aligned[t].0.to_string(),
                    aligned[t + r.window - 1].0.to_string(),
                    rho,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })();
    result.map_err(|e| write_err(&path, e))?;

    let path = cfg.out.join(SYNC_SERIES_FILE);
    let mut w = csv_writer(&path)?;
    let result = (|| -> csv::Result<()> {
        w.write_record(["date", "observed", "reference"])?;
        for (d, v, r) in &aligned {
            w.write_record([d.to_string(), v.to_string(), r.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })();
    result.map_err(|e| write_err(&path, e))
}

#[derive(Debug, Serialize)]
struct TruthFile<'a> {
    model: &'a FlowModel,
    config: &'a SynthConfig,
}

pub fn load_synth_config(path: Option<&Path>) -> CliResult<SynthConfig> {
    match path {
        None => Ok(SynthConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
        }
    }
}

pub fn cmd_gen(args: &GenArgs) -> CliResult<()> {
    let out = args.out.as_ref().ok_or_else(|| CliError::input("missing required input --out"))?;
    let mut cfg = load_synth_config(args.synth_config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let data = generate(&cfg).map_err(|e| CliError::input(e.to_string()))?;
    create_dir(out)?;

    let file = |name: &str| {
        let path = out.join(name);
        fs::File::create(&path).map(std::io::BufWriter::new).map_err(|e| write_err(&path, e))
    };
    write_zones(file("zones.csv")?, &data.registry).map_err(|e| write_err(&out.join("zones.csv"), e))?;
    write_flows(file("flows.csv")?, &data.registry, &data.flows).map_err(|e| write_err(&out.join("flows.csv"), e))?;
    write_stringency(file("stringency.csv")?, &data.stringency)
        .map_err(|e| write_err(&out.join("stringency.csv"), e))?;
    write_json(&out.join("truth.json"), &TruthFile { model: &data.truth, config: &cfg })
}
