//! Panel CSV reader and writer.
//!
//! Layout: `item_id,day,sales,<feature_1>,...,<feature_k>`, ISO dates, no
//! quoting. Rows are written in canonical (item, day) order with floats at
//! 12 significant digits.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::domain::{SalesObservation, SalesPanel};
use crate::error::{Error, Result};
use crate::numfmt::fmt_sig;

const FIXED_COLUMNS: [&str; 3] = ["item_id", "day", "sales"];

pub fn read_panel(path: impl AsRef<Path>) -> Result<SalesPanel> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_panel_from(BufReader::new(file))
}

pub fn read_panel_from(reader: impl Read) -> Result<SalesPanel> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| malformed(1, e.to_string()))?,
        None => return Err(malformed(1, "missing header".into())),
    };
    if header.len() < 3 || header.iter().take(3).ne(FIXED_COLUMNS.iter().copied()) {
        return Err(malformed(1, "header must start with item_id,day,sales".into()));
    }
    let feature_names: Vec<String> = header.iter().skip(3).map(str::to_owned).collect();
    let width = header.len();

    let mut seen = HashSet::new();
    let mut observations = Vec::new();
    for (idx, rec) in records.enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| malformed(line, e.to_string()))?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(malformed(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let item_id = rec[0].to_owned();
        if item_id.is_empty() || item_id.contains('"') {
            return Err(malformed(line, format!("invalid item_id {item_id:?}")));
        }
        let day = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
            .map_err(|e| malformed(line, format!("bad day {:?}: {e}", &rec[1])))?;
        let sales = parse_float(&rec[2], line)?;
        if sales < 0.0 {
            return Err(Error::NegativeSales { line });
        }
        let features = rec
            .iter()
            .skip(3)
            .map(|s| parse_float(s, line))
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert((item_id.clone(), day)) {
            return Err(Error::DuplicateKey { item: item_id, day });
        }
        observations.push(SalesObservation {
            item_id,
            day,
            sales,
            features,
        });
    }
    SalesPanel::new(feature_names, observations)
}

pub fn write_panel(panel: &SalesPanel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_panel_to(panel, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_panel_to(panel: &SalesPanel, out: &mut impl Write) -> std::io::Result<()> {
    write!(out, "item_id,day,sales")?;
    for name in panel.feature_names() {
        write!(out, ",{name}")?;
    }
    writeln!(out)?;
    for obs in panel.observations() {
        write!(
            out,
            "{},{},{}",
            obs.item_id,
            obs.day.format("%Y-%m-%d"),
            fmt_sig(obs.sales)
        )?;
        for f in &obs.features {
            write!(out, ",{}", fmt_sig(*f))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Panel serialized to an in-memory CSV string.
pub fn panel_to_csv(panel: &SalesPanel) -> String {
    let mut buf = Vec::new();
    write_panel_to(panel, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("panel CSV is ASCII")
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(malformed(line, format!("not a finite number: {s:?}"))),
    }
}

fn malformed(line: usize, reason: String) -> Error {
    Error::MalformedRow { line, reason }
}
