use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geo_flows::{DistanceMatrix, ZoneRegistry};
use crate::scalar::{Scalar, SquareMatrix};

/// First denominator factor of the radiation law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadiationVariant {
    /// `(m_i + s_ij)`, the original formulation.
    #[default]
    Canonical,
    /// `(m_j + s_ij)`, as sometimes printed.
    Paper,
}

impl fmt::Display for RadiationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RadiationVariant::Canonical => "canonical",
            RadiationVariant::Paper => "paper",
        })
    }
}

impl FromStr for RadiationVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(RadiationVariant::Canonical),
            "paper" => Ok(RadiationVariant::Paper),
            other => Err(format!("unknown radiation denominator `{other}` (expected canonical or paper)")),
        }
    }
}

/// Intervening-opportunity masses `s_ij`, zero on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct OpportunityMatrix<T>(SquareMatrix<T>);

impl<T: Scalar> OpportunityMatrix<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.0.get(i, j)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.0
    }
}

/// `s_ij`: total population of zones `k != i, j` with `d_ik < d_ij`.
/// Zones tied with `j` (`d_ik == d_ij`) are excluded.
pub fn compute_sij<T: Scalar>(registry: &ZoneRegistry<T>, distances: &DistanceMatrix<T>) -> OpportunityMatrix<T> {
    let n = registry.len();
    let masses = registry.masses();
    let mut s = SquareMatrix::zeros(n);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut prefix: Vec<T> = Vec::with_capacity(n + 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&k| k != i));
        order.sort_by(|&a, &b| distances.get(i, a).partial_cmp(&distances.get(i, b)).expect("finite distances"));
        prefix.clear();
        prefix.push(T::zero());
        for &k in &order {
            let last = *prefix.last().unwrap();
            prefix.push(last + masses[k]);
        }
        for j in (0..n).filter(|&j| j != i) {
            let dij = distances.get(i, j);
            // zones strictly closer than j; j itself is never strictly closer
            let closer = order.partition_point(|&k| distances.get(i, k) < dij);
            s.set(i, j, prefix[closer]);
        }
    }
    OpportunityMatrix(s)
}

/// Expected trips from `i` to `j` given the origin's total outflow.
pub fn radiation_flow<T: Scalar>(outflow_i: T, m_i: T, m_j: T, s_ij: T, variant: RadiationVariant) -> T {
    let first = match variant {
        RadiationVariant::Canonical => m_i + s_ij,
        RadiationVariant::Paper => m_j + s_ij,
    };
    outflow_i * m_i * m_j / (first * (m_i + m_j + s_ij))
}
