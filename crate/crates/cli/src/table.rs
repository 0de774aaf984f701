//! CSV reading and writing with unit-suffixed headers.
//!
//! A column is declared by its quantity name and unit, and its header must be
//! `name_unit` (`power_W`, `rate_Hz`). Identifier and dimensionless columns
//! have no unit (`crystal_id`, `weight`). A header naming a known quantity with
//! a missing or different unit is rejected, as is any undeclared column.

use std::path::Path;

use nvphot::sizing::ObservationRow;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy)]
pub struct Column {
    pub name: &'static str,
    pub unit: Option<&'static str>,
    pub required: bool,
}

impl Column {
    pub const fn req(name: &'static str, unit: &'static str) -> Self {
        Self {
            name,
            unit: Some(unit),
            required: true,
        }
    }

    pub const fn opt(name: &'static str, unit: &'static str) -> Self {
        Self {
            name,
            unit: Some(unit),
            required: false,
        }
    }

    pub const fn plain(name: &'static str, required: bool) -> Self {
        Self {
            name,
            unit: None,
            required,
        }
    }

    pub fn header(&self) -> String {
        match self.unit {
            Some(u) => format!("{}_{u}", self.name),
            None => self.name.to_string(),
        }
    }
}

pub const OBSERVATIONS: &[Column] = &[
    Column::plain("crystal_id", true),
    Column::req("x", "um"),
    Column::req("y", "um"),
    Column::req("power", "W"),
    Column::req("rate", "Hz"),
    Column::opt("dwell", "s"),
];

pub const DLS: &[Column] = &[Column::req("diameter", "nm"), Column::plain("weight", false)];

/// Per-crystal sizing output; only the diameter is needed downstream.
pub const SIZED: &[Column] = &[
    Column::plain("crystal_id", false),
    Column::opt("r_det", "Hz"),
    Column::opt("p_s", "W"),
    Column::opt("volume", "nm3"),
    Column::req("diameter", "nm"),
];

pub const SPECTRUM: &[Column] = &[
    Column::opt("wavenumber", "cm1"),
    Column::opt("wavelength", "nm"),
    Column::plain("value", true),
];

pub const IRRADIANCE_MAP: &[Column] = &[
    Column::req("x", "um"),
    Column::req("y", "um"),
    Column::req("irradiance", "rel"),
];

/// Parsed CSV with validated headers. `lines[i]` is the 1-based file line of row `i`.
#[derive(Debug)]
pub struct Table {
    source: String,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
    lines: Vec<u64>,
}

fn check_headers(headers: &[String], schema: &[Column], source: &str) -> Result<()> {
    for (i, h) in headers.iter().enumerate() {
        if headers[..i].contains(h) {
            return Err(CliError::input(format!("{source}, line 1: duplicate column '{h}'")));
        }
        if schema.iter().any(|c| c.header() == *h) {
            continue;
        }
        let quantity = schema
            .iter()
            .find(|c| c.unit.is_some() && (h == c.name || h.starts_with(&format!("{}_", c.name))));
        return Err(CliError::input(match quantity {
            Some(c) => format!(
                "{source}, line 1: column '{h}' has a missing or wrong unit suffix (expected '{}')",
                c.header()
            ),
            None => format!(
                "{source}, line 1: unexpected column '{h}' (allowed: {})",
                schema.iter().map(Column::header).collect::<Vec<_>>().join(", ")
            ),
        }));
    }
    for c in schema.iter().filter(|c| c.required) {
        if !headers.contains(&c.header()) {
            return Err(CliError::input(format!(
                "{source}, line 1: missing column '{}'",
                c.header()
            )));
        }
    }
    Ok(())
}

/// 1-based line of the record read from `offset`. The reader's own line
/// count ignores blank lines, and its offset precedes any skipped blank or
/// comment lines.
fn record_line(bytes: &[u8], offset: usize) -> u64 {
    let mut start = offset.min(bytes.len());
    let mut line = 1 + bytes[..start].iter().filter(|&&b| b == b'\n').count() as u64;
    while let Some(len) = bytes[start..].iter().position(|&b| b == b'\n') {
        let text = &bytes[start..start + len];
        if !(text.iter().all(u8::is_ascii_whitespace) || text.first() == Some(&b'#')) {
            break;
        }
        start += len + 1;
        line += 1;
    }
    line
}

impl Table {
    pub fn parse(bytes: &[u8], schema: &[Column], source: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(bytes);
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::input(format!("{source}: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        check_headers(&headers, schema, source)?;
        let mut rows = Vec::new();
        let mut lines = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CliError::input(format!("{source}: {e}")))?;
            lines.push(record_line(bytes, record.position().map_or(0, |p| p.byte() as usize)));
            rows.push(record.iter().map(str::to_string).collect());
        }
        Ok(Self {
            source: source.to_string(),
            headers,
            rows,
            lines,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn has(&self, column: &Column) -> bool {
        self.headers.contains(&column.header())
    }

    fn index(&self, column: &Column) -> Option<usize> {
        let h = column.header();
        self.headers.iter().position(|x| *x == h)
    }

    fn cell(&self, row: usize, column: &Column) -> Option<&str> {
        self.index(column)
            .map(|i| self.rows[row][i].as_str())
            .filter(|s| !s.is_empty())
    }

    fn err(&self, row: usize, column: &Column, msg: &str) -> CliError {
        CliError::input(format!(
            "{}, line {}, column '{}': {msg}",
            self.source,
            self.lines[row],
            column.header()
        ))
    }

    pub fn text(&self, row: usize, column: &Column) -> Result<String> {
        self.cell(row, column)
            .map(str::to_string)
            .ok_or_else(|| self.err(row, column, "empty value"))
    }

    pub fn opt_number(&self, row: usize, column: &Column) -> Result<Option<f64>> {
        self.cell(row, column)
            .map(|s| match s.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.err(row, column, &format!("'{s}' is not a finite number"))),
            })
            .transpose()
    }

    pub fn number(&self, row: usize, column: &Column) -> Result<f64> {
        self.opt_number(row, column)?
            .ok_or_else(|| self.err(row, column, "empty value"))
    }
}

pub fn read_table(path: &Path, schema: &[Column]) -> Result<(Table, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let table = Table::parse(&bytes, schema, &path.display().to_string())?;
    if table.len() == 0 {
        return Err(CliError::input(format!("{}: no data rows", path.display())));
    }
    Ok((table, bytes))
}

pub fn observations(t: &Table) -> Result<Vec<ObservationRow>> {
    let [id, x, y, power, rate, dwell] = [0, 1, 2, 3, 4, 5].map(|i| &OBSERVATIONS[i]);
    (0..t.len())
        .map(|i| {
            Ok(ObservationRow {
                crystal_id: t.text(i, id)?,
                x_um: t.number(i, x)?,
                y_um: t.number(i, y)?,
                power_w: t.number(i, power)?,
                rate_hz: t.number(i, rate)?,
                dwell_s: t.opt_number(i, dwell)?,
            })
        })
        .collect()
}

/// `(diameter_nm, weight)`; weight defaults to 1.
pub fn weighted_diameters(t: &Table, schema: &[Column]) -> Result<Vec<(f64, f64)>> {
    let d = schema.iter().find(|c| c.name == "diameter").expect("schema has a diameter column");
    let w = schema.iter().find(|c| c.name == "weight");
    (0..t.len())
        .map(|i| {
            let weight = match w {
                Some(w) => t.opt_number(i, w)?.unwrap_or(1.0),
                None => 1.0,
            };
            Ok((t.number(i, d)?, weight))
        })
        .collect()
}

/// Spectrum samples and whether the abscissa is a wavelength (nm) rather than a wavenumber (cm⁻¹).
pub fn spectrum_samples(t: &Table) -> Result<(Vec<(f64, f64)>, bool)> {
    let [nu, lambda, value] = [0, 1, 2].map(|i| &SPECTRUM[i]);
    let axis = match (t.has(nu), t.has(lambda)) {
        (true, false) => nu,
        (false, true) => lambda,
        _ => {
            return Err(CliError::input(format!(
                "{}, line 1: need exactly one of 'wavenumber_cm1' or 'wavelength_nm'",
                t.source
            )))
        }
    };
    let samples = (0..t.len())
        .map(|i| Ok((t.number(i, axis)?, t.number(i, value)?)))
        .collect::<Result<_>>()?;
    Ok((samples, axis.name == "wavelength"))
}

pub fn irradiance_points(t: &Table) -> Result<Vec<(f64, f64, f64)>> {
    let [x, y, v] = [0, 1, 2].map(|i| &IRRADIANCE_MAP[i]);
    (0..t.len())
        .map(|i| Ok((t.number(i, x)?, t.number(i, y)?, t.number(i, v)?)))
        .collect()
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Builds a CSV document from a header and pre-formatted rows.
pub fn write_csv(headers: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn observations_csv(rows: &[ObservationRow]) -> Vec<u8> {
    let headers: Vec<String> = OBSERVATIONS.iter().map(Column::header).collect();
    write_csv(
        &headers,
        rows.iter().map(|r| {
            vec![
                r.crystal_id.clone(),
                fmt_f64(r.x_um),
                fmt_f64(r.y_um),
                fmt_f64(r.power_w),
                fmt_f64(r.rate_hz),
                fmt_opt(r.dwell_s),
            ]
        }),
    )
}
