//! Forward evaluation of the gravity, radiation and stringency-aware gravity
//! (CGM) flow laws.
//!
//! Gravity: `T_ij = K m_i m_j f(r_ij)` with `f(r) = exp(-beta r)` or `r^-beta`.
//!
//! Radiation: `T_ij = O_i m_i m_j / ((m_i + s_ij)(m_i + m_j + s_ij))`, where
//! `s_ij` is the population strictly closer to `i` than `j` is.
//!
//! CGM: `T_ij = exp(eps + alpha ln m_i + beta ln m_j + gamma ln f(r_ij) + delta1 SI_i + delta2 SI_j)`.
//! The deterrence inside the logarithm has a fixed rate so that `gamma`
//! carries the distance effect: `ln f(r) = -r / r_scale` for exponential
//! decay (with `r_scale` the mean pairwise distance) and `ln f(r) = -ln r`
//! for power-law decay.

mod predict;
mod radiation;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use predict::{predict_day, rescale_to_total, FlowModel, Geography, ModelError};
pub use radiation::{compute_sij, radiation_flow, OpportunityMatrix, RadiationVariant};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("power-law deterrence is singular at zero distance")]
    ZeroDistancePowerLaw,
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("{what} must be finite, got {value}")]
    NonFinite { what: &'static str, value: f64 },
}

/// Shape of the distance-decay factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayKind {
    Exponential,
    PowerLaw,
}

impl fmt::Display for DecayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecayKind::Exponential => "exponential",
            DecayKind::PowerLaw => "power_law",
        })
    }
}

impl FromStr for DecayKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exponential" | "exp" => Ok(DecayKind::Exponential),
            "power_law" | "pow" | "power" => Ok(DecayKind::PowerLaw),
            other => Err(format!("unknown decay `{other}`")),
        }
    }
}

/// `exp(-beta r)` or `r^-beta`.
pub fn deterrence<T: Scalar>(r: T, beta: T, decay: DecayKind) -> Result<T, DomainError> {
    match decay {
        DecayKind::Exponential => Ok((-beta * r).exp()),
        DecayKind::PowerLaw => {
            if !(r > T::zero()) {
                return Err(DomainError::ZeroDistancePowerLaw);
            }
            Ok(r.powf(-beta))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityParams<T> {
    /// Proportionality constant `K`.
    pub scale: T,
    pub beta: T,
    pub decay: DecayKind,
}

impl<T: Scalar> GravityParams<T> {
    pub fn new(scale: T, beta: T, decay: DecayKind) -> Result<Self, DomainError> {
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(DomainError::NonPositive { what: "gravity scale", value: scale.as_f64() });
        }
        if !beta.is_finite() {
            return Err(DomainError::NonFinite { what: "gravity beta", value: beta.as_f64() });
        }
        Ok(Self { scale, beta, decay })
    }
}

/// `K m_i m_j f(r_ij)`.
pub fn gravity_flow<T: Scalar>(m_i: T, m_j: T, r_ij: T, p: &GravityParams<T>) -> Result<T, DomainError> {
    Ok(p.scale * (m_i * m_j) * deterrence(r_ij, p.beta, p.decay)?)
}

/// Coefficients of the log-linear CGM plus the fixed deterrence scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgmParams<T> {
    pub epsilon: T,
    /// Origin population elasticity.
    pub alpha: T,
    /// Destination population elasticity.
    pub beta: T,
    pub gamma: T,
    /// Origin stringency effect.
    pub delta1: T,
    /// Destination stringency effect.
    pub delta2: T,
    pub decay: DecayKind,
    /// Distance (km) that divides `r` in the exponential log-deterrence.
    /// Unused for power-law decay.
    pub distance_scale: T,
}

impl<T: Scalar> CgmParams<T> {
    pub const COEFFICIENT_NAMES: [&'static str; 6] = ["epsilon", "alpha", "beta", "gamma", "delta1", "delta2"];

    pub fn from_coefficients(c: [T; 6], decay: DecayKind, distance_scale: T) -> Self {
        Self {
            epsilon: c[0],
            alpha: c[1],
            beta: c[2],
            gamma: c[3],
            delta1: c[4],
            delta2: c[5],
            decay,
            distance_scale,
        }
    }

    pub fn coefficients(&self) -> [T; 6] {
        [self.epsilon, self.alpha, self.beta, self.gamma, self.delta1, self.delta2]
    }

    /// `ln f(r)` with the fixed deterrence rate.
    pub fn log_deterrence(&self, r: T) -> Result<T, DomainError> {
        log_deterrence(r, self.decay, self.distance_scale)
    }
}

/// `-r / scale` (exponential) or `-ln r` (power law).
pub fn log_deterrence<T: Scalar>(r: T, decay: DecayKind, distance_scale: T) -> Result<T, DomainError> {
    match decay {
        DecayKind::Exponential => {
            if !(distance_scale > T::zero()) {
                return Err(DomainError::NonPositive { what: "distance scale", value: distance_scale.as_f64() });
            }
            Ok(-r / distance_scale)
        }
        DecayKind::PowerLaw => {
            if !(r > T::zero()) {
                return Err(DomainError::ZeroDistancePowerLaw);
            }
            Ok(-r.ln())
        }
    }
}

/// Linear predictor of the CGM (natural logarithm of the expected flow).
pub fn cgm_log_flow<T: Scalar>(m_i: T, m_j: T, r_ij: T, si_i: T, si_j: T, p: &CgmParams<T>) -> Result<T, DomainError> {
    Ok(p.epsilon
        + p.alpha * m_i.ln()
        + p.beta * m_j.ln()
        + p.gamma * p.log_deterrence(r_ij)?
        + p.delta1 * si_i
        + p.delta2 * si_j)
}

pub fn cgm_flow<T: Scalar>(m_i: T, m_j: T, r_ij: T, si_i: T, si_j: T, p: &CgmParams<T>) -> Result<T, DomainError> {
    cgm_log_flow(m_i, m_j, r_ij, si_i, si_j, p).map(T::exp)
}
