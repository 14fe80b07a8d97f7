//! Data loading, per-(model, day) fitting and scoring shared by `fit` and
//! `evaluate`.

use chrono::NaiveDate;
use intermob::fitting::{fit_cgm_with, fit_gravity_with, CgmFitOptions, FitError, GravityFitOptions, CGM_COLUMNS};
use intermob::geo_flows::{load_flows, load_stringency, load_zones, CellSelection, Direction, IngestError};
use intermob::metrics::{cpc_values, information_gain_values};
use intermob::models::{predict_day, RadiationVariant};
use intermob::{CgmParams, FlowModel, GravityParams};
use intermob::{DailyFlowMatrix, Geography, StringencyPanel};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{ModelName, RunConfig};
use crate::error::{CliError, CliResult};

pub struct Inputs {
    pub geo: Geography,
    pub panel: Vec<DailyFlowMatrix>,
    pub stringency: Option<StringencyPanel>,
    pub selection: CellSelection,
}

fn ingest(e: IngestError) -> CliError {
    CliError::input(e.to_string())
}

impl Inputs {
    pub fn load(cfg: &RunConfig, need_stringency: bool) -> CliResult<Self> {
        let registry = load_zones(&cfg.zones).map_err(ingest)?;
        let panel = load_flows(&cfg.flows, &registry).map_err(ingest)?;
        if panel.is_empty() {
            return Err(CliError::input(format!("{}: no flow records", cfg.flows.display())));
        }
        let stringency = match (&cfg.stringency, need_stringency) {
            (Some(path), _) => Some(load_stringency(path, &registry).map_err(ingest)?),
            (None, true) => {
                return Err(CliError::input("cgm models need a stringency file: missing required input --stringency"))
            }
            (None, false) => None,
        };
        let focus = match &cfg.focus {
            Some(id) => Some(registry.position(id).map_err(|e| CliError::input(format!("--focus: {e}")))?),
            None => None,
        };
        let selection = match (cfg.direction, focus) {
            (Direction::Full, None) => CellSelection::All,
            (Direction::Full, Some(_)) => {
                return Err(CliError::input("--focus needs --direction incoming or outgoing"));
            }
            (d, None) => return Err(CliError::input(format!("--direction {d} needs --focus"))),
            (d, f) => CellSelection::from_direction(d, f),
        };
        Ok(Self { geo: Geography::new(registry), panel, stringency, selection })
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.panel.iter().map(|d| d.date()).collect()
    }
}

/// One entry of params.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub model: ModelName,
    /// `None` for pooled fits and for radiation.
    pub date: Option<NaiveDate>,
    /// Model parameters; empty for radiation, which has none.
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<Diagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub gradient_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispersion: Option<f64>,
    pub observations: usize,
    /// CGM coefficients held fixed because their design column was degenerate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub direction: Direction,
    pub focus: Option<String>,
    pub pooled: bool,
    pub records: Vec<FitRecord>,
}

fn fit_failure(model: ModelName, date: Option<NaiveDate>, e: FitError) -> CliError {
    let at = date.map(|d| format!(" on {d}")).unwrap_or_default();
    let msg = format!("{model}{at}: {e}");
    match e {
        FitError::Key(_) => CliError::input(msg),
        _ => CliError::failure(msg),
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("parameters serialise")
}

/// Fits CGM, holding fixed (mass exponents at 1, other slopes at 0) any
/// column the design reports as collinear, such as the destination columns
/// when every selected cell flows into one zone.
fn fit_cgm_adaptive(
    days: &[DailyFlowMatrix],
    inputs: &Inputs,
    decay: intermob::models::DecayKind,
) -> Result<(intermob::CgmFit, Vec<String>), FitError> {
    let si = inputs.stringency.as_ref().expect("checked at load");
    let mut opts = CgmFitOptions { selection: inputs.selection, ..CgmFitOptions::default() };
    let mut fixed = Vec::new();
    loop {
        match fit_cgm_with(days, inputs.geo.distances(), inputs.geo.registry(), si, decay, &opts) {
            Err(FitError::Collinear { column }) if column != CGM_COLUMNS[0] && fixed.len() < CGM_COLUMNS.len() - 1 => {
                let k = CGM_COLUMNS.iter().position(|c| *c == column).expect("known column");
                opts.fixed[k] = Some(if k == 1 || k == 2 { 1.0 } else { 0.0 });
                fixed.push(column.to_string());
            }
            other => return other.map(|fit| (fit, fixed)),
        }
    }
}

fn fit_one(model: ModelName, date: Option<NaiveDate>, days: &[DailyFlowMatrix], inputs: &Inputs) -> CliResult<FitRecord> {
    let masses = inputs.geo.masses();
    let record = match model {
        ModelName::Radiation => FitRecord { model, date: None, params: Value::Object(Default::default()), diagnostics: None },
        ModelName::GravityExp | ModelName::GravityPow => {
            let opts = GravityFitOptions { selection: inputs.selection, ..GravityFitOptions::default() };
            let fit = fit_gravity_with(days, inputs.geo.distances(), masses, model.decay().unwrap(), &opts)
                .map_err(|e| fit_failure(model, date, e))?;
            FitRecord {
                model,
                date,
                params: to_value(&fit.params),
                diagnostics: Some(Diagnostics {
                    iterations: fit.iterations,
                    converged: fit.converged,
                    objective: fit.objective,
                    gradient_norm: fit.gradient_norm,
                    dispersion: None,
                    observations: fit.observations,
                    fixed: Vec::new(),
                }),
            }
        }
        ModelName::CgmExp | ModelName::CgmPow => {
            let (fit, fixed) =
                fit_cgm_adaptive(days, inputs, model.decay().unwrap()).map_err(|e| fit_failure(model, date, e))?;
            FitRecord {
                model,
                date,
                params: to_value(&fit.params),
                diagnostics: Some(Diagnostics {
                    iterations: fit.iterations,
                    converged: fit.converged,
                    objective: fit.objective,
                    gradient_norm: fit.gradient_norm,
                    dispersion: fit.dispersion,
                    observations: fit.observations,
                    fixed,
                }),
            }
        }
    };
    Ok(record)
}

/// Fits every requested model, per day or pooled, in parallel. Records are
/// ordered by model (as requested) then date.
pub fn fit_all(cfg: &RunConfig, inputs: &Inputs) -> CliResult<ParamsFile> {
    let mut tasks: Vec<(ModelName, Option<usize>)> = Vec::new();
    for &m in &cfg.models {
        if m == ModelName::Radiation || cfg.pooled {
            tasks.push((m, None));
        } else {
            tasks.extend((0..inputs.panel.len()).map(|t| (m, Some(t))));
        }
    }
    let results: Vec<CliResult<FitRecord>> = tasks
        .par_iter()
        .map(|&(m, t)| match t {
            Some(t) => fit_one(m, Some(inputs.panel[t].date()), std::slice::from_ref(&inputs.panel[t]), inputs),
            None => fit_one(m, None, &inputs.panel, inputs),
        })
        .collect();
    let records = results.into_iter().collect::<CliResult<Vec<_>>>()?;
    Ok(ParamsFile { direction: cfg.direction, focus: cfg.focus.clone(), pooled: cfg.pooled, records })
}

fn decode<T: for<'de> Deserialize<'de>>(record: &FitRecord) -> CliResult<T> {
    serde_json::from_value(record.params.clone())
        .map_err(|e| CliError::input(format!("params for {}: {e}", record.model)))
}

/// Resolves the concrete model to evaluate `model` on `date`.
pub fn model_for(params: &ParamsFile, model: ModelName, date: NaiveDate, variant: RadiationVariant) -> CliResult<FlowModel> {
    if model == ModelName::Radiation {
        return Ok(FlowModel::Radiation { variant });
    }
    let record = params
        .records
        .iter()
        .find(|r| r.model == model && (r.date == Some(date) || r.date.is_none()))
        .ok_or_else(|| CliError::input(format!("params file has no {model} record for {date}")))?;
    Ok(if model.is_gravity() {
        FlowModel::Gravity(decode::<GravityParams>(record)?)
    } else {
        FlowModel::Cgm(decode::<CgmParams>(record)?)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub date: NaiveDate,
    pub model: ModelName,
    pub cpc: f64,
    pub ig: f64,
}

fn score_one(
    cfg: &RunConfig,
    inputs: &Inputs,
    params: &ParamsFile,
    model: ModelName,
    day: &DailyFlowMatrix,
) -> CliResult<Score> {
    let date = day.date();
    let flow_model = model_for(params, model, date, cfg.radiation_denominator)?;
    let outflows = day.outflows();
    let predicted = predict_day(&flow_model, &inputs.geo, date, inputs.stringency.as_ref(), Some(&outflows))
        .map_err(|e| {
            let msg = format!("{model} on {date}: {e}");
            match e {
                intermob::models::ModelError::Key(_) | intermob::models::ModelError::MissingStringency => {
                    CliError::input(msg)
                }
                _ => CliError::failure(msg),
            }
        })?;
    let real = inputs.selection.extract(day);
    let mut generated = inputs.selection.extract(&predicted);
    if cfg.normalize_totals && model.is_gravity() {
        let (g, r): (f64, f64) = (generated.iter().sum(), real.iter().sum());
        if g > 0.0 {
            generated.iter_mut().for_each(|v| *v *= r / g);
        }
    }
    let metric = |e: intermob::metrics::MetricError| CliError::failure(format!("{model} on {date}: {e}"));
    let cpc = cpc_values(&generated, &real).map_err(metric)?;
    let ig = information_gain_values(&real, &generated).map_err(metric)?;
    Ok(Score { date, model, cpc, ig })
}

/// Scores ordered by date, then model in requested order.
pub fn score_all(cfg: &RunConfig, inputs: &Inputs, params: &ParamsFile) -> CliResult<Vec<Score>> {
    if params.direction != cfg.direction || params.focus != cfg.focus {
        return Err(CliError::input(format!(
            "params were fitted for direction {} focus {:?}, not direction {} focus {:?}",
            params.direction, params.focus, cfg.direction, cfg.focus
        )));
    }
    let tasks: Vec<(usize, ModelName)> =
        (0..inputs.panel.len()).flat_map(|t| cfg.models.iter().map(move |&m| (t, m))).collect();
    let results: Vec<CliResult<Score>> =
        tasks.par_iter().map(|&(t, m)| score_one(cfg, inputs, params, m, &inputs.panel[t])).collect();
    results.into_iter().collect()
}
