//! File formats. CSV files start with `# key=value` metadata lines followed
//! by a header row; JSON files wrap the payload as `{"metadata": {..}, "data": ..}`.
//! Frequencies are written in Hz.

use crate::circuit::{split_complex, MicrowaveModeSet};
use crate::ringdown::RingdownRecord;
use crate::spectra::{ComplexTrace, Psd};
use crate::units::{hz_to_rad, rad_to_hz};
use crate::{Error, Result};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fmt::Display;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

/// Ordered key/value provenance attached to every output.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    pub entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, value: impl Display) -> Self {
        self.set(key, value);
        self
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn to_json(&self) -> Value {
        Value::Object(self.entries.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect::<Map<_, _>>())
    }
}

/// A CSV cell: numbers are written with full precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Num(v) => write!(f, "{v:e}"),
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Text(s) => write!(f, "{s}"),
        }
    }
}

pub fn write_csv(path: impl AsRef<Path>, meta: &Metadata, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for (k, v) in &meta.entries {
        writeln!(out, "# {k}={v}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        if r.len() != header.len() {
            return Err(Error::Dimension(format!("row of {} cells for {} columns", r.len(), header.len())));
        }
        w.write_record(r.iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed CSV: metadata, header and raw string records.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub meta: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidParameter(format!("missing column '{name}' (have {:?})", self.header)))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[k].trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidParameter(format!("row {}: '{}' in column '{name}' is not a number", i + 1, r[k])))
            })
            .collect()
    }
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Table> {
    let mut meta = Metadata::new();
    let reader = BufReader::new(File::open(path)?);
    let mut body = String::new();
    for line in reader.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.trim().split_once('=') {
                meta.set(k.trim(), v.trim());
            }
        } else if !line.trim().is_empty() {
            body.push_str(&line);
            body.push('\n');
        }
    }
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(String::from).collect())).collect::<std::result::Result<_, _>>()?;
    Ok(Table { meta, header, rows })
}

pub fn write_json<T: Serialize + ?Sized>(path: impl AsRef<Path>, meta: &Metadata, data: &T) -> Result<()> {
    let doc = json!({ "metadata": meta.to_json(), "data": serde_json::to_value(data)? });
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    Ok(())
}

/// Payload and metadata of a file written by [`write_json`].
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(Metadata, T)> {
    let doc: Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let mut meta = Metadata::new();
    if let Some(Value::Object(m)) = doc.get("metadata") {
        for (k, v) in m {
            meta.set(k, v.as_str().map(String::from).unwrap_or_else(|| v.to_string()));
        }
    }
    let data = doc.get("data").cloned().ok_or_else(|| Error::InvalidParameter("JSON file has no 'data' field".into()))?;
    Ok((meta, serde_json::from_value(data)?))
}

pub fn write_complex_trace(path: impl AsRef<Path>, meta: &Metadata, t: &ComplexTrace) -> Result<()> {
    let rows: Vec<Vec<Cell>> =
        t.omega.iter().zip(&t.values).map(|(w, z)| vec![rad_to_hz(*w).into(), z.re.into(), z.im.into()]).collect();
    write_csv(path, meta, &["freq_hz", "re", "im"], &rows)
}

pub fn read_complex_trace(path: impl AsRef<Path>) -> Result<(Metadata, ComplexTrace)> {
    let t = read_csv(path)?;
    let (f, re, im) = (t.column("freq_hz")?, t.column("re")?, t.column("im")?);
    let trace = ComplexTrace {
        omega: f.into_iter().map(hz_to_rad).collect(),
        values: re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect(),
    };
    Ok((t.meta, trace))
}

pub fn write_psd(path: impl AsRef<Path>, meta: &Metadata, p: &Psd) -> Result<()> {
    let rows: Vec<Vec<Cell>> = p.omega.iter().zip(&p.values).map(|(w, s)| vec![rad_to_hz(*w).into(), (*s).into()]).collect();
    write_csv(path, meta, &["freq_hz", "psd"], &rows)
}

pub fn read_psd(path: impl AsRef<Path>) -> Result<(Metadata, Psd)> {
    let t = read_csv(path)?;
    let psd = Psd { omega: t.column("freq_hz")?.into_iter().map(hz_to_rad).collect(), values: t.column("psd")? };
    Ok((t.meta, psd))
}

pub fn write_ringdown(path: impl AsRef<Path>, meta: &Metadata, r: &RingdownRecord) -> Result<()> {
    let rows: Vec<Vec<Cell>> = r.times().zip(&r.samples).map(|(t, z)| vec![t.into(), z.re.into(), z.im.into()]).collect();
    write_csv(path, meta, &["t_s", "i", "q"], &rows)
}

pub fn read_ringdown(path: impl AsRef<Path>) -> Result<(Metadata, RingdownRecord)> {
    let t = read_csv(path)?;
    let ts = t.column("t_s")?;
    if ts.len() < 2 {
        return Err(Error::InvalidParameter("ringdown record needs at least two samples".into()));
    }
    let dt = ts[1] - ts[0];
    if !(dt > 0.0) || ts.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InvalidParameter("ringdown samples must be uniformly spaced".into()));
    }
    let samples = t.column("i")?.into_iter().zip(t.column("q")?).map(|(a, b)| Complex64::new(a, b)).collect();
    Ok((t.meta, RingdownRecord { dt, samples }))
}

/// `{frequencies_hz, modeshape_re, modeshape_im, mode_rates_hz}`.
pub fn modeset_json(m: &MicrowaveModeSet) -> Value {
    let (re, im) = split_complex(&m.modeshapes);
    json!({
        "frequencies_hz": m.frequencies.iter().map(|w| rad_to_hz(*w)).collect::<Vec<_>>(),
        "modeshape_re": re,
        "modeshape_im": im,
        "mode_rates_hz": m.rates.iter().map(|w| rad_to_hz(*w)).collect::<Vec<_>>(),
    })
}
