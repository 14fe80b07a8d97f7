//! Model quality and synchronicity measures.
//!
//! * [`cpc`]: common part of commuters (Sørensen–Dice overlap) of two flow sets.
//! * [`information_gain`]: KL divergence of the normalised observed flows from
//!   the normalised generated flows.
//! * [`pearson`], [`rolling_pearson`], [`synchronicity`]: global and
//!   sliding-window correlation of two daily series.
//! * [`relative_improvement`] and [`mean_relative_improvement`].

mod flow;
mod sync;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use flow::{cpc, cpc_values, information_gain, information_gain_values, IG_SMOOTHING};
pub use sync::{
    mean_relative_improvement, median, pearson, relative_improvement, rolling_pearson, synchronicity,
    ImprovementConvention, LocalSync, RollingPearson, SyncReport,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("both flow sets sum to zero; CPC is undefined")]
    ZeroTotals,
    #[error("observed flows sum to zero; information gain is undefined")]
    EmptyObserved,
    #[error("observed mass on cell {cell} where the generated flow is zero")]
    UnsupportedCell { cell: usize },
    #[error("value {value} at index {index} is negative or not finite")]
    InvalidValue { index: usize, value: f64 },
    #[error("inputs have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("series of length {len} is too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },
    #[error("window size {0} is smaller than 2")]
    WindowTooSmall(usize),
    #[error("series is constant; correlation is undefined")]
    ZeroVariance,
    #[error("relative improvement over a zero baseline is undefined")]
    ZeroBaseline,
    #[error("no values to average")]
    Empty,
}

/// CPC and information gain of one model on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyScore<T> {
    pub date: NaiveDate,
    pub model: String,
    pub cpc: T,
    pub ig: T,
}
