//! Zones, distances, daily origin-destination flow matrices and stringency series.
//!
//! Every matrix in a run is indexed by position in a [`ZoneRegistry`]; the
//! registry order is the file order of the zones table and never changes.

mod distance;
mod io;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Scalar, SquareMatrix};

pub use distance::{distance_matrix, haversine, DistanceMatrix, EARTH_RADIUS_KM};
pub use io::{
    load_flows, load_stringency, load_zones, read_flows, read_stringency, read_zones, write_flows,
    write_stringency, write_zones, FLOWS_HEADER, STRINGENCY_HEADER, ZONES_HEADER,
};

/// Invariant violation in an in-memory zone, flow or stringency value.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("zone at position {position} has an empty id")]
    MissingId { position: usize },
    #[error("duplicate zone id `{id}` at position {position}")]
    DuplicateId { id: String, position: usize },
    #[error("zone `{id}` has non-positive population {population}")]
    NonPositivePopulation { id: String, population: f64 },
    #[error("zone `{id}` has coordinates out of range (lat {lat}, lon {lon})")]
    CoordinatesOutOfRange { id: String, lat: f64, lon: f64 },
    #[error("a registry needs at least 2 zones, got {count}")]
    TooFewZones { count: usize },
    #[error("flow matrix is {found}x{found} but the registry has {expected} zones")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("flow cell ({origin}, {destination}) is {value}; counts must be finite and >= 0")]
    InvalidCount { origin: usize, destination: usize, value: f64 },
    #[error("self-flow for zone position {zone} is {value}; the diagonal must be 0")]
    SelfFlow { zone: usize, value: f64 },
    #[error("stringency value {value} for `{zone}` on {date} is outside [0, 100]")]
    StringencyOutOfRange { zone: String, date: NaiveDate, value: f64 },
}

/// Lookup of a zone id or a (zone, date) pair that is not present.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KeyError {
    #[error("unknown zone id `{0}`")]
    Zone(String),
    #[error("no stringency value for zone `{zone}` on {date}")]
    Stringency { zone: String, date: NaiveDate },
}

/// File-level ingestion failure. Line numbers are 1-based and count the header.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: String, expected: &'static str, found: String },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{path} line {line}: {source}")]
    Invalid {
        path: String,
        line: u64,
        #[source]
        source: DataError,
    },
    #[error("{path} line {line}: {source}")]
    UnknownZone {
        path: String,
        line: u64,
        #[source]
        source: KeyError,
    },
    #[error("{path} line {line}: duplicate record for {what}")]
    Duplicate { path: String, line: u64, what: String },
    #[error("{path}: {source}")]
    Registry {
        path: String,
        #[source]
        source: DataError,
    },
}

/// A country or region with its population mass and centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone<T> {
    pub id: String,
    pub name: String,
    pub population: T,
    pub lat: T,
    pub lon: T,
}

impl<T: Scalar> Zone<T> {
    pub fn new(id: impl Into<String>, name: impl Into<String>, population: T, lat: T, lon: T) -> Self {
        Self { id: id.into(), name: name.into(), population, lat, lon }
    }

    fn validate(&self, position: usize) -> Result<(), DataError> {
        if self.id.trim().is_empty() {
            return Err(DataError::MissingId { position });
        }
        if !(self.population > T::zero()) || !self.population.is_finite() {
            return Err(DataError::NonPositivePopulation {
                id: self.id.clone(),
                population: self.population.as_f64(),
            });
        }
        let lat_ok = self.lat >= T::lit(-90.0) && self.lat <= T::lit(90.0);
        let lon_ok = self.lon >= T::lit(-180.0) && self.lon <= T::lit(180.0);
        if !lat_ok || !lon_ok {
            return Err(DataError::CoordinatesOutOfRange {
                id: self.id.clone(),
                lat: self.lat.as_f64(),
                lon: self.lon.as_f64(),
            });
        }
        Ok(())
    }
}

/// Ordered set of zones. Positions are stable for the life of the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneRegistry<T> {
    zones: Vec<Zone<T>>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> ZoneRegistry<T> {
    pub fn new(zones: Vec<Zone<T>>) -> Result<Self, DataError> {
        let mut index = HashMap::with_capacity(zones.len());
        for (position, zone) in zones.iter().enumerate() {
            zone.validate(position)?;
            if index.insert(zone.id.clone(), position).is_some() {
                return Err(DataError::DuplicateId { id: zone.id.clone(), position });
            }
        }
        if zones.len() < 2 {
            return Err(DataError::TooFewZones { count: zones.len() });
        }
        Ok(Self { zones, index })
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn zones(&self) -> &[Zone<T>] {
        &self.zones
    }

    pub fn zone(&self, position: usize) -> &Zone<T> {
        &self.zones[position]
    }

    pub fn position(&self, id: &str) -> Result<usize, KeyError> {
        self.index.get(id).copied().ok_or_else(|| KeyError::Zone(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.zones.iter().map(|z| z.id.as_str())
    }

    /// Population masses in registry order.
    pub fn masses(&self) -> Vec<T> {
        self.zones.iter().map(|z| z.population).collect()
    }

    /// Reorders zones: position `a` of the result holds zone `perm[a]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let zones = perm.iter().map(|&p| self.zones[p].clone()).collect();
        Self::new(zones).expect("a permutation of a valid registry is valid")
    }
}

/// Which cells of an origin-destination matrix a series or evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Flows arriving at a focus zone.
    Incoming,
    /// Flows leaving a focus zone.
    Outgoing,
    #[default]
    Full,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Incoming => "incoming",
            Direction::Outgoing => "outgoing",
            Direction::Full => "full",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "incoming" => Ok(Direction::Incoming),
            "outgoing" => Ok(Direction::Outgoing),
            "full" => Ok(Direction::Full),
            other => Err(format!("unknown direction `{other}` (expected incoming, outgoing or full)")),
        }
    }
}

/// Observed or generated trip counts for one calendar day.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyFlowMatrix<T> {
    date: NaiveDate,
    direction: Direction,
    counts: SquareMatrix<T>,
}

impl<T: Scalar> DailyFlowMatrix<T> {
    pub fn new(date: NaiveDate, direction: Direction, counts: SquareMatrix<T>) -> Result<Self, DataError> {
        let n = counts.dim();
        for i in 0..n {
            for j in 0..n {
                let v = counts.get(i, j);
                if !v.is_finite() || v < T::zero() {
                    return Err(DataError::InvalidCount { origin: i, destination: j, value: v.as_f64() });
                }
            }
            let d = counts.get(i, i);
            if d != T::zero() {
                return Err(DataError::SelfFlow { zone: i, value: d.as_f64() });
            }
        }
        Ok(Self { date, direction, counts })
    }

    pub fn zeros(date: NaiveDate, n: usize) -> Self {
        Self { date, direction: Direction::Full, counts: SquareMatrix::zeros(n) }
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn counts(&self) -> &SquareMatrix<T> {
        &self.counts
    }

    pub fn dim(&self) -> usize {
        self.counts.dim()
    }

    #[inline]
    pub fn get(&self, origin: usize, destination: usize) -> T {
        self.counts.get(origin, destination)
    }

    pub fn total(&self) -> T {
        self.counts.total()
    }

    /// Total outflow of each zone (row sums).
    pub fn outflows(&self) -> Vec<T> {
        self.counts.row_sums()
    }

    /// Total inflow of each zone (column sums).
    pub fn inflows(&self) -> Vec<T> {
        self.counts.col_sums()
    }

    /// Multiplies every cell by `factor`, which must be finite and non-negative.
    pub fn scaled(&self, factor: T) -> Self {
        Self { date: self.date, direction: self.direction, counts: self.counts.map(|v| v * factor) }
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { date: self.date, direction: self.direction, counts: self.counts.permuted(perm) }
    }
}

/// Off-diagonal cells an analysis looks at: the whole matrix, or the
/// column/row of a focus zone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellSelection {
    All,
    /// Flows into the zone at this position.
    Into(usize),
    /// Flows out of the zone at this position.
    OutOf(usize),
}

impl CellSelection {
    /// `Full` (or no focus) selects everything.
    pub fn from_direction(direction: Direction, focus: Option<usize>) -> Self {
        match (direction, focus) {
            (Direction::Incoming, Some(f)) => CellSelection::Into(f),
            (Direction::Outgoing, Some(f)) => CellSelection::OutOf(f),
            _ => CellSelection::All,
        }
    }

    /// (origin, destination) pairs in row-major order, excluding the diagonal.
    pub fn cells(&self, n: usize) -> Vec<(usize, usize)> {
        match *self {
            CellSelection::All => (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect(),
            CellSelection::Into(f) => (0..n).filter(|&o| o != f).map(|o| (o, f)).collect(),
            CellSelection::OutOf(f) => (0..n).filter(|&d| d != f).map(|d| (f, d)).collect(),
        }
    }

    pub fn extract<T: Scalar>(&self, m: &DailyFlowMatrix<T>) -> Vec<T> {
        self.cells(m.dim()).into_iter().map(|(i, j)| m.get(i, j)).collect()
    }
}

/// Per-zone daily stringency index values in [0, 100].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StringencyPanel<T> {
    series: BTreeMap<String, BTreeMap<NaiveDate, T>>,
}

impl<T: Scalar> StringencyPanel<T> {
    pub fn new() -> Self {
        Self { series: BTreeMap::new() }
    }

    /// Inserts or replaces a value.
    pub fn insert(&mut self, zone: &str, date: NaiveDate, si: T) -> Result<(), DataError> {
        if !(si >= T::zero() && si <= T::lit(100.0)) {
            return Err(DataError::StringencyOutOfRange { zone: zone.to_string(), date, value: si.as_f64() });
        }
        self.series.entry(zone.to_string()).or_default().insert(date, si);
        Ok(())
    }

    pub fn get(&self, zone: &str, date: NaiveDate) -> Result<T, KeyError> {
        self.series
            .get(zone)
            .and_then(|s| s.get(&date))
            .copied()
            .ok_or_else(|| KeyError::Stringency { zone: zone.to_string(), date })
    }

    /// Values for every registry zone on `date`, in registry order.
    pub fn for_date(&self, registry: &ZoneRegistry<T>, date: NaiveDate) -> Result<Vec<T>, KeyError> {
        registry.ids().map(|id| self.get(id, date)).collect()
    }

    pub fn zones(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn series(&self, zone: &str) -> Option<&BTreeMap<NaiveDate, T>> {
        self.series.get(zone)
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// All (zone, date, value) triples sorted by date then zone id.
    pub fn records(&self) -> Vec<(NaiveDate, &str, T)> {
        let mut out: Vec<_> = self
            .series
            .iter()
            .flat_map(|(z, s)| s.iter().map(move |(d, v)| (*d, z.as_str(), *v)))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        out
    }
}

/// Daily aggregate flow into (incoming) or out of (outgoing) a focus zone.
/// `Full` sums both directions.
pub fn aggregate_total<T: Scalar>(
    panel: &[DailyFlowMatrix<T>],
    registry: &ZoneRegistry<T>,
    focus: &str,
    direction: Direction,
) -> Result<Vec<(NaiveDate, T)>, KeyError> {
    let f = registry.position(focus)?;
    Ok(panel
        .iter()
        .map(|day| {
            let n = day.dim();
            let incoming = || (0..n).map(|o| day.get(o, f)).sum::<T>();
            let outgoing = || (0..n).map(|d| day.get(f, d)).sum::<T>();
            let total = match direction {
                Direction::Incoming => incoming(),
                Direction::Outgoing => outgoing(),
                Direction::Full => incoming() + outgoing(),
            };
            (day.date(), total)
        })
        .collect())
}
