//! CSV ingestion and emission for zones, flows and stringency tables.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same value, so a write/read cycle is lossless.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{DailyFlowMatrix, DataError, Direction, IngestError, StringencyPanel, Zone, ZoneRegistry};
use crate::scalar::{Scalar, SquareMatrix};

pub const ZONES_HEADER: &str = "id,name,population,lat,lon";
pub const FLOWS_HEADER: &str = "date,origin,destination,count";
pub const STRINGENCY_HEADER: &str = "date,zone,si";

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

struct Table<R: Read> {
    label: String,
    reader: csv::Reader<R>,
}

impl<R: Read> Table<R> {
    fn new(input: R, label: &str, expected: &'static str) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(input);
        let found = reader
            .headers()
            .map_err(|e| IngestError::Parse { path: label.to_string(), line: 1, message: e.to_string() })?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        let found = found.trim_start_matches('\u{feff}').to_string();
        if found != expected {
            return Err(IngestError::Header { path: label.to_string(), expected, found });
        }
        Ok(Self { label: label.to_string(), reader })
    }

    /// Yields (line, record) pairs.
    fn rows(&mut self) -> impl Iterator<Item = Result<(u64, csv::StringRecord), IngestError>> + '_ {
        let label = self.label.clone();
        self.reader.records().map(move |r| {
            r.map(|rec| (rec.position().map_or(0, |p| p.line()), rec)).map_err(|e| IngestError::Parse {
                path: label.clone(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
    }

    fn parse_err(&self, line: u64, message: String) -> IngestError {
        IngestError::Parse { path: self.label.clone(), line, message }
    }
}

fn num<T: Scalar>(field: &str, what: &str) -> Result<T, String> {
    field
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .and_then(T::from_f64)
        .ok_or_else(|| format!("invalid {what} `{field}`"))
}

fn date(field: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|_| format!("invalid ISO-8601 date `{field}`"))
}

/// Reads a zones table. `label` names the source in diagnostics.
pub fn read_zones<T: Scalar, R: Read>(input: R, label: &str) -> Result<ZoneRegistry<T>, IngestError> {
    let mut table = Table::new(input, label, ZONES_HEADER)?;
    let mut zones: Vec<Zone<T>> = Vec::new();
    let mut seen = HashSet::new();
    let rows: Vec<_> = table.rows().collect();
    for row in rows {
        let (line, rec) = row?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let parsed = (|| {
            Ok::<_, String>(Zone::new(
                field(0),
                field(1),
                num(field(2), "population")?,
                num(field(3), "latitude")?,
                num(field(4), "longitude")?,
            ))
        })()
        .map_err(|m| table.parse_err(line, m))?;
        let position = zones.len();
        let invalid = |source| IngestError::Invalid { path: label.to_string(), line, source };
        parsed.validate(position).map_err(invalid)?;
        if !seen.insert(parsed.id.clone()) {
            return Err(invalid(DataError::DuplicateId { id: parsed.id.clone(), position }));
        }
        zones.push(parsed);
    }
    ZoneRegistry::new(zones).map_err(|source| IngestError::Registry { path: label.to_string(), source })
}

pub fn load_zones<T: Scalar>(path: impl AsRef<Path>) -> Result<ZoneRegistry<T>, IngestError> {
    let path = path.as_ref();
    read_zones(open(path)?, &path.display().to_string())
}

/// Reads a long-format flows table into one matrix per date, sorted by date.
/// Cells without a row are zero.
pub fn read_flows<T: Scalar, R: Read>(
    input: R,
    label: &str,
    registry: &ZoneRegistry<T>,
) -> Result<Vec<DailyFlowMatrix<T>>, IngestError> {
    let n = registry.len();
    let mut table = Table::new(input, label, FLOWS_HEADER)?;
    let mut days: BTreeMap<NaiveDate, SquareMatrix<T>> = BTreeMap::new();
    let mut seen = HashSet::new();
    let rows: Vec<_> = table.rows().collect();
    for row in rows {
        let (line, rec) = row?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let day = date(field(0)).map_err(|m| table.parse_err(line, m))?;
        let unknown = |source| IngestError::UnknownZone { path: label.to_string(), line, source };
        let o = registry.position(field(1)).map_err(unknown)?;
        let d = registry.position(field(2)).map_err(unknown)?;
        let count: T = num(field(3), "count").map_err(|m| table.parse_err(line, m))?;
        let invalid = |source| IngestError::Invalid { path: label.to_string(), line, source };
        if count < T::zero() {
            return Err(invalid(DataError::InvalidCount { origin: o, destination: d, value: count.as_f64() }));
        }
        if o == d {
            if count != T::zero() {
                return Err(invalid(DataError::SelfFlow { zone: o, value: count.as_f64() }));
            }
            continue;
        }
        if !seen.insert((day, o, d)) {
            return Err(IngestError::Duplicate {
                path: label.to_string(),
                line,
                what: format!("{day} {}->{}", field(1), field(2)),
            });
        }
        days.entry(day).or_insert_with(|| SquareMatrix::zeros(n)).set(o, d, count);
    }
    Ok(days
        .into_iter()
        .map(|(day, counts)| {
            DailyFlowMatrix::new(day, Direction::Full, counts).expect("cells validated while reading")
        })
        .collect())
}

pub fn load_flows<T: Scalar>(
    path: impl AsRef<Path>,
    registry: &ZoneRegistry<T>,
) -> Result<Vec<DailyFlowMatrix<T>>, IngestError> {
    let path = path.as_ref();
    read_flows(open(path)?, &path.display().to_string(), registry)
}

/// Reads a stringency table. Rows for zones outside the registry are skipped.
pub fn read_stringency<T: Scalar, R: Read>(
    input: R,
    label: &str,
    registry: &ZoneRegistry<T>,
) -> Result<StringencyPanel<T>, IngestError> {
    let mut table = Table::new(input, label, STRINGENCY_HEADER)?;
    let mut panel = StringencyPanel::new();
    let mut seen = HashSet::new();
    let rows: Vec<_> = table.rows().collect();
    for row in rows {
        let (line, rec) = row?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let day = date(field(0)).map_err(|m| table.parse_err(line, m))?;
        let zone = field(1);
        if registry.position(zone).is_err() {
            continue;
        }
        let si: T = num(field(2), "stringency").map_err(|m| table.parse_err(line, m))?;
        if !seen.insert((day, zone.to_string())) {
            return Err(IngestError::Duplicate { path: label.to_string(), line, what: format!("{day} {zone}") });
        }
        panel
            .insert(zone, day, si)
            .map_err(|source| IngestError::Invalid { path: label.to_string(), line, source })?;
    }
    Ok(panel)
}

pub fn load_stringency<T: Scalar>(
    path: impl AsRef<Path>,
    registry: &ZoneRegistry<T>,
) -> Result<StringencyPanel<T>, IngestError> {
    let path = path.as_ref();
    read_stringency(open(path)?, &path.display().to_string(), registry)
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_zones<T: Scalar, W: Write>(out: W, registry: &ZoneRegistry<T>) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(ZONES_HEADER.split(','))?;
    for z in registry.zones() {
        w.write_record([
            z.id.clone(),
            z.name.clone(),
            z.population.to_string(),
            z.lat.to_string(),
            z.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes one row per nonzero cell, ordered by date, origin and destination position.
pub fn write_flows<T: Scalar, W: Write>(
    out: W,
    registry: &ZoneRegistry<T>,
    panel: &[DailyFlowMatrix<T>],
) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(FLOWS_HEADER.split(','))?;
    let mut days: Vec<&DailyFlowMatrix<T>> = panel.iter().collect();
    days.sort_by_key(|d| d.date());
    for day in days {
        let date = day.date().format("%Y-%m-%d").to_string();
        for o in 0..day.dim() {
            for d in 0..day.dim() {
                let v = day.get(o, d);
                if v != T::zero() {
                    w.write_record([
                        date.as_str(),
                        registry.zone(o).id.as_str(),
                        registry.zone(d).id.as_str(),
                        v.to_string().as_str(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_stringency<T: Scalar, W: Write>(out: W, panel: &StringencyPanel<T>) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(STRINGENCY_HEADER.split(','))?;
    for (date, zone, si) in panel.records() {
        w.write_record([date.format("%Y-%m-%d").to_string(), zone.to_string(), si.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZONES: &str = "id,name,population,lat,lon\nUK,United Kingdom,66000000,54.0,-2.0\nFR,France,67000000,46.6,2.2\nIT,Italy,60000000,42.8,12.6\n";

    #[test]
    fn zones_preserve_file_order() {
        let reg: ZoneRegistry<f64> = read_zones(ZONES.as_bytes(), "zones.csv").unwrap();
        assert_eq!(reg.ids().collect::<Vec<_>>(), ["UK", "FR", "IT"]);
        assert_eq!(reg.zone(2).population, 6.0e7);
    }

    #[test]
    fn duplicate_zone_names_row() {
        let text = "id,name,population,lat,lon\nFR,France,1,0,0\nDE,Germany,1,0,0\nFR,France,1,0,0\n";
        let err = read_zones::<f64, _>(text.as_bytes(), "zones.csv").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("FR") && msg.contains("line 4"), "{msg}");
    }

    #[test]
    fn zero_population_is_rejected() {
        let text = "id,name,population,lat,lon\nFR,France,0,0,0\nDE,Germany,1,0,0\n";
        let err = read_zones::<f64, _>(text.as_bytes(), "zones.csv").unwrap_err();
        assert!(matches!(err, IngestError::Invalid { source: DataError::NonPositivePopulation { .. }, line: 2, .. }));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let text = "id,population,name,lat,lon\nFR,1,France,0,0\n";
        assert!(matches!(
            read_zones::<f64, _>(text.as_bytes(), "zones.csv"),
            Err(IngestError::Header { .. })
        ));
    }

    #[test]
    fn flows_group_by_date() {
        let reg: ZoneRegistry<f64> = read_zones(ZONES.as_bytes(), "zones.csv").unwrap();
        let flows = "date,origin,destination,count\n2020-03-06,FR,UK,4\n2020-03-05,FR,UK,3\n2020-03-05,IT,UK,5\n";
        let panel = read_flows(flows.as_bytes(), "flows.csv", &reg).unwrap();
        assert_eq!(panel.len(), 2);
        assert_eq!(panel[0].date(), "2020-03-05".parse::<NaiveDate>().unwrap());
        assert_eq!(panel[0].get(1, 0), 3.0);
        assert_eq!(panel[0].get(2, 0), 5.0);
        assert_eq!(panel[1].get(1, 0), 4.0);
    }

    #[test]
    fn flows_reject_unknown_zone_and_duplicates() {
        let reg: ZoneRegistry<f64> = read_zones(ZONES.as_bytes(), "zones.csv").unwrap();
        let bad = "date,origin,destination,count\n2020-03-05,XX,UK,4\n";
        assert!(matches!(read_flows(bad.as_bytes(), "f", &reg), Err(IngestError::UnknownZone { line: 2, .. })));
        let dup = "date,origin,destination,count\n2020-03-05,FR,UK,4\n2020-03-05,FR,UK,1\n";
        assert!(matches!(read_flows(dup.as_bytes(), "f", &reg), Err(IngestError::Duplicate { line: 3, .. })));
        let selfie = "date,origin,destination,count\n2020-03-05,FR,FR,4\n";
        assert!(read_flows(selfie.as_bytes(), "f", &reg).is_err());
    }

    #[test]
    fn stringency_range_checked() {
        let reg: ZoneRegistry<f64> = read_zones(ZONES.as_bytes(), "zones.csv").unwrap();
        let bad = "date,zone,si\n2020-03-05,FR,101\n";
        assert!(read_stringency(bad.as_bytes(), "s", &reg).is_err());
        let ok = "date,zone,si\n2020-03-05,FR,11.11\n2020-03-05,ZZ,50\n";
        let p = read_stringency(ok.as_bytes(), "s", &reg).unwrap();
        assert_eq!(p.get("FR", "2020-03-05".parse().unwrap()).unwrap(), 11.11);
        assert!(p.series("ZZ").is_none());
    }
}
