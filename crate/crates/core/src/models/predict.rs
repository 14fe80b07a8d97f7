use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{cgm_flow, gravity_flow, radiation_flow, CgmParams, DomainError, GravityParams, RadiationVariant};
use super::radiation::{compute_sij, OpportunityMatrix};
use crate::geo_flows::{distance_matrix, DailyFlowMatrix, Direction, DistanceMatrix, KeyError, StringencyPanel, ZoneRegistry};
use crate::scalar::{Scalar, SquareMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error("radiation prediction needs observed outflows for {expected} zones, got {found}")]
    Outflows { expected: usize, found: usize },
    #[error("CGM prediction needs a stringency panel")]
    MissingStringency,
}

/// A fully specified flow model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FlowModel<T> {
    Gravity(GravityParams<T>),
    Radiation { variant: RadiationVariant },
    Cgm(CgmParams<T>),
}

/// Registry plus the derived per-pair quantities every model needs.
#[derive(Debug, Clone)]
pub struct Geography<T> {
    registry: ZoneRegistry<T>,
    distances: DistanceMatrix<T>,
    opportunities: OpportunityMatrix<T>,
    masses: Vec<T>,
    mean_distance: T,
}

impl<T: Scalar> Geography<T> {
    pub fn new(registry: ZoneRegistry<T>) -> Self {
        let distances = distance_matrix(&registry);
        Self::with_distances(registry, distances)
    }

    pub fn with_distances(registry: ZoneRegistry<T>, distances: DistanceMatrix<T>) -> Self {
        assert_eq!(registry.len(), distances.dim(), "distance matrix must match the registry");
        let opportunities = compute_sij(&registry, &distances);
        let masses = registry.masses();
        let mean_distance = distances.mean_offdiag();
        Self { registry, distances, opportunities, masses, mean_distance }
    }

    pub fn registry(&self) -> &ZoneRegistry<T> {
        &self.registry
    }

    pub fn distances(&self) -> &DistanceMatrix<T> {
        &self.distances
    }

    pub fn opportunities(&self) -> &OpportunityMatrix<T> {
        &self.opportunities
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    /// Mean distance over ordered off-diagonal pairs.
    pub fn mean_distance(&self) -> T {
        self.mean_distance
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::with_distances(self.registry.permuted(perm), self.distances.permuted(perm))
    }
}

/// Evaluates a model on every off-diagonal pair for one day.
///
/// `outflows` (observed total outflow per zone that day) is required for
/// radiation; `stringency` for CGM.
pub fn predict_day<T: Scalar>(
    model: &FlowModel<T>,
    geo: &Geography<T>,
    date: NaiveDate,
    stringency: Option<&StringencyPanel<T>>,
    outflows: Option<&[T]>,
) -> Result<DailyFlowMatrix<T>, ModelError> {
    let n = geo.len();
    let m = geo.masses();
    let d = geo.distances();
    let cell: Box<dyn Fn(usize, usize) -> Result<T, ModelError> + Sync> = match model {
        FlowModel::Gravity(p) => Box::new(move |i, j| Ok(gravity_flow(m[i], m[j], d.get(i, j), p)?)),
        FlowModel::Radiation { variant } => {
            let o = outflows.ok_or(ModelError::Outflows { expected: n, found: 0 })?;
            if o.len() != n {
                return Err(ModelError::Outflows { expected: n, found: o.len() });
            }
            let s = geo.opportunities();
            let variant = *variant;
            Box::new(move |i, j| Ok(radiation_flow(o[i], m[i], m[j], s.get(i, j), variant)))
        }
        FlowModel::Cgm(p) => {
            let si = stringency.ok_or(ModelError::MissingStringency)?.for_date(geo.registry(), date)?;
            Box::new(move |i, j| Ok(cgm_flow(m[i], m[j], d.get(i, j), si[i], si[j], p)?))
        }
    };
    let rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| if i == j { Ok(T::zero()) } else { cell(i, j) }).collect())
        .collect::<Result<_, ModelError>>()?;
    let counts = SquareMatrix::from_row_major(n, rows.into_iter().flatten().collect()).expect("n x n cells");
    if let Some(v) = counts.as_slice().iter().find(|v| !v.is_finite() || **v < T::zero()) {
        return Err(DomainError::NonFinite { what: "predicted flow", value: v.as_f64() }.into());
    }
    Ok(DailyFlowMatrix::new(date, Direction::Full, counts).expect("cells checked above"))
}

/// Scales `predicted` so its total matches `target_total`. A zero prediction is
/// returned unchanged.
pub fn rescale_to_total<T: Scalar>(predicted: &DailyFlowMatrix<T>, target_total: T) -> DailyFlowMatrix<T> {
    let total = predicted.total();
    if total > T::zero() {
        predicted.scaled(target_total / total)
    } else {
        predicted.clone()
    }
}
