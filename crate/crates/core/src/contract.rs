//! Contract records: CSV ingest, validation and binning.

use std::io::{Read, Write};

use chrono::{DateTime, NaiveDateTime};

use crate::error::{Error, Result};
use crate::grid::{DemandTensor, GridSpec};

pub const CSV_HEADER: [&str; 8] = [
    "rider_id",
    "bike_id",
    "start_time",
    "start_lon",
    "start_lat",
    "end_time",
    "end_lon",
    "end_lat",
];

const TIME_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// One rental. Times are UTC unix seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractRecord {
    pub rider_id: String,
    pub bike_id: String,
    pub start_time: i64,
    pub start_lon: f64,
    pub start_lat: f64,
    pub end_time: i64,
    pub end_lon: f64,
    pub end_lat: f64,
}

impl ContractRecord {
    pub fn validate(&self) -> std::result::Result<(), &'static str> {
        if !(-180.0..=180.0).contains(&self.start_lon) || !(-180.0..=180.0).contains(&self.end_lon) {
            return Err("longitude out of range");
        }
        if !(-90.0..=90.0).contains(&self.start_lat) || !(-90.0..=90.0).contains(&self.end_lat) {
            return Err("latitude out of range");
        }
        if self.end_time < self.start_time {
            return Err("negative duration");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutcome {
    pub records: Vec<ContractRecord>,
    pub rejections: Vec<Rejection>,
}

pub fn parse_timestamp(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s, TIME_FORMAT)
        .ok()
        .map(|t| t.and_utc().timestamp())
}

pub fn format_timestamp(t: i64) -> String {
    DateTime::from_timestamp(t, 0)
        .map(|d| d.format(TIME_FORMAT).to_string())
        .unwrap_or_else(|| t.to_string())
}

fn parse_row(row: &csv::StringRecord) -> std::result::Result<ContractRecord, String> {
    if row.len() != CSV_HEADER.len() {
        return Err(format!("expected {} fields, found {}", CSV_HEADER.len(), row.len()));
    }
    let time = |i: usize| parse_timestamp(&row[i]).ok_or_else(|| format!("bad timestamp `{}`", &row[i]));
    let num = |i: usize| {
        row[i]
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("bad {} `{}`", CSV_HEADER[i], &row[i]))
    };
    let rec = ContractRecord {
        rider_id: row[0].to_string(),
        bike_id: row[1].to_string(),
        start_time: time(2)?,
        start_lon: num(3)?,
        start_lat: num(4)?,
        end_time: time(5)?,
        end_lon: num(6)?,
        end_lat: num(7)?,
    };
    rec.validate().map_err(str::to_string)?;
    Ok(rec)
}

/// Reads contract CSV. Invalid rows land in the rejection log with their line
/// number; in `strict` mode the first invalid row aborts the parse.
pub fn parse_contracts<R: Read>(source: R, strict: bool) -> Result<ParseOutcome> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = reader.headers()?.clone();
    if header.iter().map(str::trim).ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Header {
            expected: CSV_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = ParseOutcome::default();
    let mut row = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(0, |p| p.line());
                match parse_row(&row) {
                    Ok(rec) => out.records.push(rec),
                    Err(reason) if strict => return Err(Error::Row { line, reason }),
                    Err(reason) => out.rejections.push(Rejection { line, reason }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if strict || matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(e.into());
                }
                out.rejections.push(Rejection { line, reason: e.to_string() });
            }
        }
    }
    Ok(out)
}

pub fn write_contracts<W: Write>(dest: W, records: &[ContractRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(dest);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.rider_id.clone(),
            r.bike_id.clone(),
            format_timestamp(r.start_time),
            r.start_lon.to_string(),
            r.start_lat.to_string(),
            format_timestamp(r.end_time),
            r.end_lon.to_string(),
            r.end_lat.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BinOutcome {
    pub tensor: DemandTensor,
    pub out_of_bounds: usize,
}

/// Counts contract start points per cell. Records whose start lies outside
/// the grid box are counted, not binned.
pub fn bin_contracts(records: &[ContractRecord], spec: &GridSpec) -> Result<BinOutcome> {
    spec.validate()?;
    let mut tensor = DemandTensor::zeros(*spec);
    let mut out_of_bounds = 0;
    for r in records {
        match spec.cell(r.start_lon, r.start_lat, r.start_time) {
            Some((x, y, t)) => tensor.counts.add(x, y, t, 1.0),
            None => out_of_bounds += 1,
        }
    }
    Ok(BinOutcome { tensor, out_of_bounds })
}
