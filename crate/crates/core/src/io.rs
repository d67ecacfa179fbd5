//! Unit table ingest and the CSV/JSON artifacts passed between stages.
//!
//! Floats are written in shortest round-trip form, so reading an artifact
//! and writing it back reproduces it byte for byte.

use std::collections::HashSet;
use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::conformal::{AdaptivityClass, PredictionInterval};
use crate::error::Error;
use crate::indices::{CompositeIndexVector, IndicatorSpec, IndicatorTable};
use crate::network::{AttributeProfile, Edge, InteractionGraph, ATTRIBUTE_COLUMNS};
use crate::sampler::{MarginalEstimate, SpinConfiguration, TracePoint};

#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}, column `{column}`: cannot parse `{value}`")]
    ParseError { line: u64, column: String, value: String },
    #[error("line {line}: class label `{value}` is not -1 or +1")]
    InvalidClassLabel { line: u64, value: String },
    #[error("line {line}: unit `{id}` appears twice")]
    DuplicateUnit { line: u64, id: String },
    #[error("unit table has no rows")]
    Empty,
}

/// Everything read from the unit table, rows in file order.
#[derive(Debug, Clone)]
pub struct Roster {
    pub table: IndicatorTable,
    pub profiles: Vec<AttributeProfile>,
    /// Observed hub/periphery labels.
    pub reference: SpinConfiguration,
}

impl Roster {
    pub fn unit_ids(&self) -> &[String] {
        self.table.unit_ids()
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn reader(path: &Path) -> Result<csv::Reader<File>, Error> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<File>, Error> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, IngestError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
}

fn parse_cell<T: std::str::FromStr>(raw: &str, line: u64, column: &str) -> Result<T, IngestError> {
    raw.parse().map_err(|_| IngestError::ParseError { line, column: column.into(), value: raw.into() })
}

/// Reads the unit table: first column unit id, then the configured indicator
/// columns, the five territorial attributes and the class column, in any
/// order after the id.
pub fn ingest(path: &Path, specs: &[IndicatorSpec], class_column: &str) -> Result<Roster, Error> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.is_empty() {
        return Err(IngestError::MissingColumn("unit_id".into()).into());
    }
    let ind_cols: Vec<usize> = specs.iter().map(|s| column(&headers, &s.name)).collect::<Result<_, _>>()?;
    let attr_cols: Vec<usize> = ATTRIBUTE_COLUMNS.iter().map(|c| column(&headers, c)).collect::<Result<_, _>>()?;
    let class_col = column(&headers, class_column)?;

    let mut ids = Vec::new();
    let mut seen = HashSet::new();
    let mut values = Vec::new();
    let mut profiles = Vec::new();
    let mut spins = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(IngestError::DuplicateUnit { line, id }.into());
        }
        for (spec, &c) in specs.iter().zip(&ind_cols) {
            let v: f64 = parse_cell(&record[c], line, &spec.name)?;
            if !v.is_finite() {
                return Err(IngestError::ParseError { line, column: spec.name.clone(), value: record[c].into() }.into());
            }
            values.push(v);
        }
        let mut codes = [0i64; 5];
        for (k, &c) in attr_cols.iter().enumerate() {
            codes[k] = parse_cell(&record[c], line, ATTRIBUTE_COLUMNS[k])?;
        }
        profiles.push(AttributeProfile::from_codes(ids.len(), codes)?);
        let label = &record[class_col];
        spins.push(match label {
            "1" | "+1" => 1,
            "-1" => -1,
            _ => return Err(IngestError::InvalidClassLabel { line, value: label.into() }.into()),
        });
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(IngestError::Empty.into());
    }
    let values = DMatrix::from_row_slice(ids.len(), specs.len(), &values);
    let table = IndicatorTable::new(ids, values, specs.to_vec())?;
    Ok(Roster { table, profiles, reference: SpinConfiguration::new(spins)? })
}

fn expect_header(path: &Path, headers: &csv::StringRecord, expected: &[&str]) -> Result<(), Error> {
    if headers.iter().ne(expected.iter().copied()) {
        return Err(Error::format(
            path,
            format!("expected header `{}`, found `{}`", expected.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

fn parse_in(path: &Path, raw: &str, what: &str) -> Result<f64, Error> {
    raw.parse().map_err(|_| Error::format(path, format!("cannot parse {what} `{raw}`")))
}

/// Composite indices, one column per group.
pub fn write_composite_indices(path: &Path, indices: &[CompositeIndexVector]) -> Result<(), Error> {
    let mut w = writer(path)?;
    let mut header = vec!["unit_id".to_string()];
    header.extend(indices.iter().map(|c| c.name.clone()));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    let ids = indices.first().map_or(&[][..], |c| &c.unit_ids[..]);
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(indices.iter().map(|c| fmt_f64(c.scores[i])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// A wide table keyed by unit id: `(ids, column names, values)`.
pub fn read_unit_matrix(path: &Path) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>), Error> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let names: Vec<String> = headers.iter().skip(1).map(String::from).collect();
    let mut ids = Vec::new();
    let mut vals = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        ids.push(record[0].to_string());
        for raw in record.iter().skip(1) {
            vals.push(parse_in(path, raw, "value")?);
        }
    }
    Ok((ids.clone(), names.clone(), DMatrix::from_row_slice(ids.len(), names.len(), &vals)))
}

/// Square matrix with row and column labels.
pub fn write_labeled_matrix(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<(), Error> {
    let mut w = writer(path)?;
    let mut header = vec![String::new()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for (r, name) in names.iter().enumerate() {
        let mut row = vec![name.clone()];
        row.extend((0..m.ncols()).map(|c| fmt_f64(m[(r, c)])));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `unit_id,value` pairs.
pub fn write_unit_values(path: &Path, ids: &[String], values: &[f64]) -> Result<(), Error> {
    let mut w = writer(path)?;
    w.write_record(["unit_id", "value"]).map_err(|e| csv_err(path, e))?;
    for (id, v) in ids.iter().zip(values) {
        w.write_record([id.as_str(), &fmt_f64(*v)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_unit_values(path: &Path) -> Result<(Vec<String>, Vec<f64>), Error> {
    let mut rdr = reader(path)?;
    expect_header(path, &rdr.headers().map_err(|e| csv_err(path, e))?.clone(), &["unit_id", "value"])?;
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        ids.push(record[0].to_string());
        values.push(parse_in(path, &record[1], "value")?);
    }
    Ok((ids, values))
}

/// Edge list with zero-based node indices in roster order.
pub fn write_edges(path: &Path, graph: &InteractionGraph) -> Result<(), Error> {
    let mut w = writer(path)?;
    w.write_record(["i", "j", "weight"]).map_err(|e| csv_err(path, e))?;
    for e in graph.edges() {
        w.write_record([e.i.to_string(), e.j.to_string(), fmt_f64(e.weight)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_edges(path: &Path, n: usize) -> Result<InteractionGraph, Error> {
    let mut rdr = reader(path)?;
    expect_header(path, &rdr.headers().map_err(|e| csv_err(path, e))?.clone(), &["i", "j", "weight"])?;
    let mut edges = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let idx = |k: usize| record[k].parse::<usize>().map_err(|_| Error::format(path, format!("bad node `{}`", &record[k])));
        edges.push(Edge { i: idx(0)?, j: idx(1)?, weight: parse_in(path, &record[2], "weight")? });
    }
    Ok(InteractionGraph::from_edges(n, edges)?)
}

pub fn write_marginals(path: &Path, est: &MarginalEstimate) -> Result<(), Error> {
    let mut w = writer(path)?;
    w.write_record(["unit_id", "p_hat", "sigma"]).map_err(|e| csv_err(path, e))?;
    for i in 0..est.len() {
        w.write_record([est.unit_ids[i].clone(), fmt_f64(est.p_hat[i]), fmt_f64(est.sigma[i])])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Marginals as `(ids, p_hat, sigma)`.
pub fn read_marginals(path: &Path) -> Result<(Vec<String>, Vec<f64>, Vec<f64>), Error> {
    let mut rdr = reader(path)?;
    expect_header(path, &rdr.headers().map_err(|e| csv_err(path, e))?.clone(), &["unit_id", "p_hat", "sigma"])?;
    let (mut ids, mut p, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        ids.push(record[0].to_string());
        p.push(parse_in(path, &record[1], "p_hat")?);
        s.push(parse_in(path, &record[2], "sigma")?);
    }
    Ok((ids, p, s))
}

/// Per-replicate estimates, one row per replicate.
pub fn write_replicates(path: &Path, est: &MarginalEstimate) -> Result<(), Error> {
    let mut w = writer(path)?;
    let mut header = vec!["replicate".to_string()];
    header.extend(est.unit_ids.iter().cloned());
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in 0..est.replicates.k {
        let mut row = vec![r.to_string()];
        row.extend(est.replicates.row(r).iter().map(|&v| fmt_f64(v)));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_trace(path: &Path, trace: &[TracePoint]) -> Result<(), Error> {
    let mut w = writer(path)?;
    w.write_record(["iteration", "energy"]).map_err(|e| csv_err(path, e))?;
    for p in trace {
        w.write_record([p.iteration.to_string(), fmt_f64(p.energy)]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line of `intervals.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub unit_id: String,
    pub y_true: f64,
    pub interval: PredictionInterval,
    pub covered: bool,
    /// `calibration` or `test`.
    pub split: String,
}

const INTERVAL_HEADER: [&str; 9] =
    ["unit_id", "y_true", "y_hat", "sigma", "lower", "upper", "covered", "adaptivity_class", "split"];

pub fn write_intervals(path: &Path, rows: &[IntervalRow]) -> Result<(), Error> {
    let mut w = writer(path)?;
    w.write_record(INTERVAL_HEADER).map_err(|e| csv_err(path, e))?;
    for r in rows {
        let iv = &r.interval;
        w.write_record([
            r.unit_id.clone(),
            fmt_f64(r.y_true),
            fmt_f64(iv.center),
            fmt_f64(iv.sigma),
            fmt_f64(iv.lower),
            fmt_f64(iv.upper),
            u8::from(r.covered).to_string(),
            iv.adaptivity_class.as_str().to_string(),
            r.split.clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads intervals back. Unclamped bounds are not stored and come back equal
/// to the clamped ones.
pub fn read_intervals(path: &Path) -> Result<Vec<IntervalRow>, Error> {
    let mut rdr = reader(path)?;
    expect_header(path, &rdr.headers().map_err(|e| csv_err(path, e))?.clone(), &INTERVAL_HEADER)?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let f = |k: usize| parse_in(path, &record[k], INTERVAL_HEADER[k]);
        let class = AdaptivityClass::parse(&record[7])
            .ok_or_else(|| Error::format(path, format!("unknown adaptivity class `{}`", &record[7])))?;
        let (lower, upper) = (f(4)?, f(5)?);
        rows.push(IntervalRow {
            unit_id: record[0].to_string(),
            y_true: f(1)?,
            interval: PredictionInterval {
                center: f(2)?,
                sigma: f(3)?,
                lower_raw: lower,
                upper_raw: upper,
                lower,
                upper,
                adaptivity_class: class,
            },
            covered: &record[6] == "1",
            split: record[8].to_string(),
        });
    }
    Ok(rows)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<serde_json::Value, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::indices::Polarity;

    fn specs() -> Vec<IndicatorSpec> {
        vec![
            IndicatorSpec { name: "a".into(), polarity: Polarity::Positive, group: "G".into() },
            IndicatorSpec { name: "b".into(), polarity: Polarity::Negative, group: "G".into() },
        ]
    }

    fn write(dir: &Path, text: &str) -> std::path::PathBuf {
        let p = dir.join("units.csv");
        std::fs::write(&p, text).unwrap();
        p
    }

    const HEADER: &str = "unit_id,b,ALT,POP,SUP,CLITO,DEGURB,a,CLASS\n";

    #[test]
    fn ingest_keeps_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &format!("{HEADER}z,1.5,1,2,3,0,1,4,+1\ny,2.5,2,2,3,1,3,5,-1\n"));
        let r = ingest(&p, &specs(), "CLASS").unwrap();
        assert_eq!(r.unit_ids(), ["z", "y"]);
        assert_eq!(r.table.values()[(0, 0)], 4.0);
        assert_eq!(r.table.values()[(1, 1)], 2.5);
        assert_eq!(r.reference.spins(), [1, -1]);
        assert_eq!(r.profiles[1].codes(), [2, 2, 3, 1, 3]);
    }

    #[test]
    fn ingest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("unit_id,a,ALT,POP,SUP,CLITO,DEGURB,CLASS\nz,1,1,1,1,0,1,1\n", "missing column `b`"),
            (&*format!("{HEADER}z,x,1,2,3,0,1,4,1\n"), "line 2, column `b`"),
            (&*format!("{HEADER}z,1,1,2,3,0,1,4,0\n"), "class label `0`"),
            (&*format!("{HEADER}z,1,1,2,3,0,1,4,1\nz,1,1,2,3,0,1,4,1\n"), "unit `z` appears twice"),
            (&*format!("{HEADER}z,1,4,2,3,0,1,4,1\n"), "ALT"),
            (HEADER, "no rows"),
        ];
        for (text, needle) in cases {
            let p = write(dir.path(), text);
            let msg = ingest(&p, &specs(), "CLASS").unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg} lacks {needle}");
        }
    }

    #[test]
    fn float_artifacts_round_trip_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("field.csv");
        let ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        write_unit_values(&p, &ids, &[0.1 + 0.2, -1e-300, f64::INFINITY]).unwrap();
        let first = std::fs::read(&p).unwrap();
        let (rids, vals) = read_unit_values(&p).unwrap();
        assert_eq!(vals[0], 0.1 + 0.2);
        write_unit_values(&p, &rids, &vals).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), first);
    }

    #[test]
    fn edges_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("edges.csv");
        let g = InteractionGraph::from_edges(4, [Edge { i: 2, j: 0, weight: 1.0 }, Edge { i: 1, j: 3, weight: 0.5 }])
            .unwrap();
        write_edges(&p, &g).unwrap();
        assert_eq!(read_edges(&p, 4).unwrap(), g);
    }
}
