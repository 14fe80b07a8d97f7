use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use intermob::metrics::{mean_relative_improvement, ImprovementConvention};
use serde::{Deserialize, Serialize};

use crate::args::ModelName;
use crate::error::{write_err, CliError, CliResult};
use crate::pipeline::Score;

pub const SCORES_HEADER: [&str; 4] = ["date", "model", "cpc", "ig"];

/// Day index of the default period split (the 16th day).
pub const DEFAULT_SPLIT_OFFSET: u64 = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: ModelName,
    pub days: usize,
    pub mean_cpc: f64,
    pub max_cpc: f64,
    pub min_cpc: f64,
    /// `None` when the period has no days.
    pub mean_cpc_p1: Option<f64>,
    pub mean_cpc_p2: Option<f64>,
    pub mean_ig: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub model: ModelName,
    pub baseline: ModelName,
    /// Mean relative CPC improvement; `None` if a baseline day scored zero.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    /// First day of the second period.
    pub split_date: NaiveDate,
    pub improvement_convention: ImprovementConvention,
    pub models: Vec<ModelSummary>,
    pub relative_improvement: Vec<Improvement>,
}

pub fn resolve_split(dates: &[NaiveDate], split: Option<NaiveDate>) -> CliResult<NaiveDate> {
    let (first, last) = (dates[0], *dates.last().expect("nonempty panel"));
    match split {
        Some(d) if d < first || d > last => {
            Err(CliError::input(format!("--split-date {d} lies outside the data range {first}..{last}")))
        }
        Some(d) => Ok(d),
        None => Ok(first + Days::new(DEFAULT_SPLIT_OFFSET)),
    }
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Summary statistics; every number is recomputable from the score rows.
pub fn summarize(
    scores: &[Score],
    models: &[ModelName],
    dates: &[NaiveDate],
    split: NaiveDate,
    convention: ImprovementConvention,
) -> Summary {
    let of = |m: ModelName| scores.iter().filter(move |s| s.model == m);
    let summaries = models
        .iter()
        .map(|&m| {
            let cpc: Vec<f64> = of(m).map(|s| s.cpc).collect();
            let p1: Vec<f64> = of(m).filter(|s| s.date < split).map(|s| s.cpc).collect();
            let p2: Vec<f64> = of(m).filter(|s| s.date >= split).map(|s| s.cpc).collect();
            let ig: Vec<f64> = of(m).map(|s| s.ig).collect();
            ModelSummary {
                model: m,
                days: cpc.len(),
                mean_cpc: mean(&cpc).unwrap_or(f64::NAN),
                max_cpc: cpc.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min_cpc: cpc.iter().copied().fold(f64::INFINITY, f64::min),
                mean_cpc_p1: mean(&p1),
                mean_cpc_p2: mean(&p2),
                mean_ig: mean(&ig).unwrap_or(f64::NAN),
            }
        })
        .collect();

    let baselines = [ModelName::Radiation, ModelName::GravityExp, ModelName::GravityPow];
    let mut improvements = Vec::new();
    for &m in models.iter().filter(|m| m.is_cgm()) {
        for &b in baselines.iter().filter(|b| models.contains(b)) {
            let pairs: Vec<(f64, f64)> = of(m).zip(of(b)).map(|(x, y)| (x.cpc, y.cpc)).collect();
            let mean = mean_relative_improvement(&pairs, convention).ok();
            improvements.push(Improvement { model: m, baseline: b, mean });
        }
    }

    Summary {
        first_date: dates[0],
        last_date: *dates.last().expect("nonempty panel"),
        split_date: split,
        improvement_convention: convention,
        models: summaries,
        relative_improvement: improvements,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| write_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| write_err(path, e))
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| write_err(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

pub fn write_scores(path: &Path, scores: &[Score]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    let result = (|| -> csv::Result<()> {
        w.write_record(SCORES_HEADER)?;
        for s in scores {
            w.write_record([s.date.to_string(), s.model.to_string(), s.cpc.to_string(), s.ig.to_string()])?;
        }
        w.flush()?;
        Ok(())
    })();
    result.map_err(|e| write_err(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| CliError::input(format!("cannot create {}: {e}", path.display())))
}
