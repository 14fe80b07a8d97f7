//! Parameter estimation from observed daily flows.
//!
//! Gravity `(K, beta)` is fitted by Levenberg–Marquardt least squares on raw
//! counts. CGM coefficients are fitted by maximum likelihood under a
//! negative binomial (NB2, variance `mu + mu^2 / theta`) log-link model,
//! alternating IRLS steps for the coefficients with Newton steps for
//! `theta`.

mod cgm;
mod gravity;
pub mod linalg;
pub mod special;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo_flows::KeyError;
use crate::models::DomainError;

pub use cgm::{fit_cgm, fit_cgm_with, nb_log_likelihood, CgmFitOptions, CGM_COLUMNS};
pub use gravity::{fit_gravity, fit_gravity_with, GravityFitOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("all observed flows are zero")]
    Degenerate,
    #[error("need at least {needed} observations, got {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("design column `{column}` is collinear with the preceding columns")]
    Collinear { column: &'static str },
    #[error("normal equations are numerically singular")]
    Singular,
    #[error("invalid fit options: {0}")]
    Options(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Key(#[from] KeyError),
}

/// Outcome of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport<T, P> {
    pub params: P,
    /// Outer iterations performed.
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the minimised objective: the residual sum of squares
    /// for gravity, the negative log-likelihood for CGM.
    pub objective: T,
    /// Infinity norm of the (scaled) gradient at the returned parameters.
    pub gradient_norm: T,
    /// NB2 size parameter `theta` (CGM only).
    pub dispersion: Option<T>,
    /// Objective after initialisation and after every accepted step.
    pub trace: Vec<T>,
    pub observations: usize,
}
