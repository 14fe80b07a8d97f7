//! Seeded synthetic datasets drawn from known model parameters.
//!
//! Every random draw comes from its own ChaCha stream keyed by the seed and
//! the draw's coordinates (zone, date, cell), so outputs do not depend on
//! evaluation order or thread count.

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo_flows::{DailyFlowMatrix, StringencyPanel, Zone, ZoneRegistry};
use crate::models::{predict_day, CgmParams, DecayKind, FlowModel, Geography, GravityParams};
use crate::scalar::SquareMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Invalid(String),
}

/// Generating model. CGM's exponential distance scale is taken from the
/// generated zones (mean pairwise distance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum TruthSpec {
    Gravity { scale: f64, beta: f64, decay: DecayKind },
    Cgm { epsilon: f64, alpha: f64, beta: f64, gamma: f64, delta1: f64, delta2: f64, decay: DecayKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// Cells equal the model expectation.
    #[default]
    None,
    Poisson,
    /// NB2 with variance `mu + mu^2 / dispersion`.
    NegativeBinomial { dispersion: f64 },
}

/// Per-zone stringency trajectory: flat baseline, linear ramp, plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StringencyRamp {
    pub baseline: [f64; 2],
    pub plateau: [f64; 2],
    /// Ramp start as a fraction of the date range.
    pub onset: [f64; 2],
    /// Ramp length in days.
    pub ramp_days: [f64; 2],
}

impl Default for StringencyRamp {
    fn default() -> Self {
        Self { baseline: [0.0, 15.0], plateau: [40.0, 95.0], onset: [0.15, 0.5], ramp_days: [3.0, 15.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub zones: usize,
    /// Population range (persons); draws are log-uniform and rounded.
    pub population: [f64; 2],
    pub lat: [f64; 2],
    pub lon: [f64; 2],
    pub start_date: NaiveDate,
    pub days: usize,
    pub truth: TruthSpec,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub stringency: StringencyRamp,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            zones: 25,
            population: [1.0e6, 8.0e7],
            lat: [36.0, 60.0],
            lon: [-10.0, 30.0],
            start_date: NaiveDate::from_ymd_opt(2020, 3, 5).expect("valid date"),
            days: 40,
            truth: TruthSpec::Cgm {
                epsilon: -20.0,
                alpha: 0.9,
                beta: 0.8,
                gamma: 1.2,
                delta1: -0.03,
                delta2: -0.03,
                decay: DecayKind::Exponential,
            },
            noise: Noise::Poisson,
            stringency: StringencyRamp::default(),
            seed: 2020,
        }
    }
}

fn range_ok(r: [f64; 2]) -> bool {
    r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.zones < 2 {
            return bad("zone count must be at least 2");
        }
        if self.days == 0 {
            return bad("date range must be nonempty");
        }
        if !range_ok(self.population) || self.population[0] < 1.0 {
            return bad("population range must satisfy 1 <= low <= high");
        }
        if !range_ok(self.lat) || self.lat[0] < -90.0 || self.lat[1] > 90.0 {
            return bad("latitude range must lie in [-90, 90] with low <= high");
        }
        if !range_ok(self.lon) || self.lon[0] < -180.0 || self.lon[1] > 180.0 {
            return bad("longitude range must lie in [-180, 180] with low <= high");
        }
        let s = &self.stringency;
        for (name, r) in [("baseline", s.baseline), ("plateau", s.plateau)] {
            if !range_ok(r) || r[0] < 0.0 || r[1] > 100.0 {
                return bad(&format!("stringency {name} range must lie in [0, 100] with low <= high"));
            }
        }
        if !range_ok(s.onset) || s.onset[0] < 0.0 || s.onset[1] > 1.0 {
            return bad("stringency onset range must lie in [0, 1]");
        }
        if !range_ok(s.ramp_days) || s.ramp_days[0] < 1.0 {
            return bad("stringency ramp length must be at least 1 day");
        }
        if let Noise::NegativeBinomial { dispersion } = self.noise {
            if !(dispersion > 0.0 && dispersion.is_finite()) {
                return bad("negative binomial dispersion must be positive");
            }
        }
        let finite = match self.truth {
            TruthSpec::Gravity { scale, beta, .. } => {
                if !(scale > 0.0) {
                    return bad("gravity scale must be positive");
                }
                beta.is_finite() && scale.is_finite()
            }
            TruthSpec::Cgm { epsilon, alpha, beta, gamma, delta1, delta2, .. } => {
                [epsilon, alpha, beta, gamma, delta1, delta2].iter().all(|v| v.is_finite())
            }
        };
        if !finite {
            return bad("truth parameters must be finite");
        }
        if self.start_date.checked_add_days(Days::new(self.days as u64)).is_none() {
            return bad("date range overflows the calendar");
        }
        Ok(())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        (0..self.days as u64).map(|t| self.start_date + Days::new(t)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub registry: ZoneRegistry<f64>,
    pub stringency: StringencyPanel<f64>,
    /// Observed (possibly noisy) flows, one matrix per date.
    pub flows: Vec<DailyFlowMatrix<f64>>,
    /// Noise-free model expectations behind `flows`.
    pub expected: Vec<DailyFlowMatrix<f64>>,
    pub truth: FlowModel<f64>,
}

const STREAM_ZONES: u64 = 0x5a4f_4e45;
const STREAM_STRINGENCY: u64 = 0x5349;
const STREAM_NOISE: u64 = 0x4e4f_4953;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent RNG for the draw identified by `parts` under `seed`.
pub fn keyed_rng(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let key = parts.iter().fold(splitmix64(seed), |h, &p| splitmix64(h ^ splitmix64(p)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Draws one cell value with mean `mu`.
pub fn sample_cell(mu: f64, noise: Noise, rng: &mut ChaCha8Rng) -> f64 {
    if !(mu > 0.0) {
        return 0.0;
    }
    match noise {
        Noise::None => mu,
        Noise::Poisson => Poisson::new(mu).expect("positive mean").sample(rng),
        Noise::NegativeBinomial { dispersion } => {
            let lambda = Gamma::new(dispersion, mu / dispersion).expect("positive shape and scale").sample(rng);
            if lambda > 0.0 {
                Poisson::new(lambda).expect("positive rate").sample(rng)
            } else {
                0.0
            }
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.gen_range(r[0]..r[1])
    }
}

fn registry(cfg: &SynthConfig) -> ZoneRegistry<f64> {
    let mut rng = keyed_rng(cfg.seed, &[STREAM_ZONES]);
    let width = (cfg.zones - 1).to_string().len().max(2);
    let (lo, hi) = (cfg.population[0].ln(), cfg.population[1].ln());
    let zones = (0..cfg.zones)
        .map(|k| {
            let lat = uniform(&mut rng, cfg.lat);
            let lon = uniform(&mut rng, cfg.lon);
            let pop = uniform(&mut rng, [lo, hi]).exp().round().max(1.0);
            Zone::new(format!("Z{k:0width$}"), format!("Zone {k:0width$}"), pop, lat, lon)
        })
        .collect();
    ZoneRegistry::new(zones).expect("generated zones are valid")
}

fn stringency(cfg: &SynthConfig, registry: &ZoneRegistry<f64>, dates: &[NaiveDate]) -> StringencyPanel<f64> {
    let ramp = &cfg.stringency;
    let mut panel = StringencyPanel::new();
    for (k, zone) in registry.zones().iter().enumerate() {
        let mut rng = keyed_rng(cfg.seed, &[STREAM_STRINGENCY, k as u64]);
        let base = uniform(&mut rng, ramp.baseline);
        let plateau = uniform(&mut rng, ramp.plateau);
        let onset = (uniform(&mut rng, ramp.onset) * dates.len() as f64).floor();
        let length = uniform(&mut rng, ramp.ramp_days);
        for (t, &date) in dates.iter().enumerate() {
            let progress = ((t as f64 - onset) / length).clamp(0.0, 1.0);
            let si = base + (plateau - base) * progress;
            let si = ((si * 100.0).round() / 100.0).clamp(0.0, 100.0);
            panel.insert(&zone.id, date, si).expect("clamped into range");
        }
    }
    panel
}

fn truth_model(spec: TruthSpec, geo: &Geography<f64>) -> FlowModel<f64> {
    match spec {
        TruthSpec::Gravity { scale, beta, decay } => {
            FlowModel::Gravity(GravityParams::new(scale, beta, decay).expect("validated"))
        }
        TruthSpec::Cgm { epsilon, alpha, beta, gamma, delta1, delta2, decay } => {
            let distance_scale = match decay {
                DecayKind::Exponential => geo.mean_distance(),
                DecayKind::PowerLaw => 1.0,
            };
            FlowModel::Cgm(CgmParams::from_coefficients([epsilon, alpha, beta, gamma, delta1, delta2], decay, distance_scale))
        }
    }
}

/// Builds zones, stringency, expected flows from the truth model and noisy
/// observations. Fully determined by `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<SyntheticData, SynthError> {
    cfg.validate()?;
    let registry = registry(cfg);
    let geo = Geography::new(registry.clone());
    let dates = cfg.dates();
    let stringency = stringency(cfg, &registry, &dates);
    let truth = truth_model(cfg.truth, &geo);
    let n = registry.len();

    let expected = dates
        .iter()
        .map(|&date| predict_day(&truth, &geo, date, Some(&stringency), None))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| SynthError::Invalid(format!("truth model cannot be evaluated: {e}")))?;

    let flows = expected
        .par_iter()
        .map(|day| {
            let ordinal = day.date().num_days_from_ce() as u64;
            let counts = SquareMatrix::from_fn(n, |i, j| {
                if i == j {
                    return 0.0;
                }
                let mut rng = keyed_rng(cfg.seed, &[STREAM_NOISE, ordinal, i as u64, j as u64]);
                sample_cell(day.get(i, j), cfg.noise, &mut rng)
            });
            DailyFlowMatrix::new(day.date(), day.direction(), counts).expect("samples are finite and non-negative")
        })
        .collect();

    Ok(SyntheticData { registry, stringency, flows, expected, truth })
}
