//! Origin-destination mobility flow models: gravity (exponential and
//! power-law deterrence), radiation with intervening opportunities, and a
//! stringency-aware log-linear gravity variant (CGM) fitted by negative
//! binomial regression. Includes fitting, evaluation metrics (CPC,
//! information gain, global and sliding-window Pearson synchronicity) and a
//! seeded synthetic data generator.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

// `!(x > 0)` is used on purpose: it also rejects NaN. Index loops over
// several parallel arrays read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod fitting;
pub mod geo_flows;
pub mod metrics;
pub mod models;
pub mod scalar;
pub mod synthgen;

pub use scalar::{Scalar, SquareMatrix};

pub type Zone = geo_flows::Zone<f64>;
pub type ZoneRegistry = geo_flows::ZoneRegistry<f64>;
pub type DistanceMatrix = geo_flows::DistanceMatrix<f64>;
pub type DailyFlowMatrix = geo_flows::DailyFlowMatrix<f64>;
pub type StringencyPanel = geo_flows::StringencyPanel<f64>;
pub type GravityParams = models::GravityParams<f64>;
pub type CgmParams = models::CgmParams<f64>;
pub type FlowModel = models::FlowModel<f64>;
pub type Geography = models::Geography<f64>;
pub type OpportunityMatrix = models::OpportunityMatrix<f64>;
pub type GravityFit = fitting::FitReport<f64, models::GravityParams<f64>>;
pub type CgmFit = fitting::FitReport<f64, models::CgmParams<f64>>;
pub type SyncReport = metrics::SyncReport<f64>;
