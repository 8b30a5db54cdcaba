//! Delimited-text output files.
//!
//! Every file opens with one comment line
//! `# bie-operator <kind> format=1 seed=<seed> config=<hash> [key=value ...]`
//! followed by a header row and comma-separated records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct FileTag {
    pub kind: String,
    pub seed: u64,
    pub config_hash: String,
    pub extra: Vec<(String, String)>,
}

impl FileTag {
    pub fn new(kind: &str, seed: u64, config_hash: &str) -> Self {
        Self {
            kind: kind.into(),
            seed,
            config_hash: config_hash.into(),
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.into(), value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "# bie-operator {} format={} seed={} config={}",
            self.kind, FORMAT_VERSION, self.seed, self.config_hash
        );
        for (k, v) in &self.extra {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Argument(format!("malformed delimited file: {other:?}")),
    }
}

/// Integral values up to 2^53 print as integers, everything else in
/// shortest round-trip exponent form.
pub fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 9.007_199_254_740_992e15 {
        format!("{v:.0}")
    } else {
        format!("{v:e}")
    }
}

/// Writer that emits the tag line and header before the first record.
pub struct TableWriter {
    inner: csv::Writer<BufWriter<File>>,
}

impl TableWriter {
    pub fn create(path: &Path, tag: &FileTag, header: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{}", tag.line())?;
        let mut inner = csv::Writer::from_writer(file);
        inner.write_record(header).map_err(csv_error)?;
        Ok(Self { inner })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let fields: Vec<String> = values.iter().map(|&v| format_value(v)).collect();
        self.inner.write_record(&fields).map_err(csv_error)
    }

    pub fn text_row(&mut self, values: &[String]) -> Result<()> {
        self.inner.write_record(values).map_err(csv_error)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

/// Header and numeric records of a file written by [`TableWriter`].
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub tag: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// `re + i im` columns as complex values.
    pub fn complex(&self, re: &str, im: &str) -> Option<Vec<Complex64>> {
        let r = self.column(re)?;
        let i = self.column(im)?;
        Some(r.into_iter().zip(i).map(|(a, b)| Complex64::new(a, b)).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    let tag = text.lines().next().unwrap_or_default().to_string();
    if !tag.starts_with("# bie-operator ") {
        return Err(Error::Argument(format!("{} has no bie-operator tag line", path.display())));
    }
    let body = &text[tag.len()..];
    let mut reader = csv::ReaderBuilder::new().from_reader(body.trim_start().as_bytes());
    let header = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_error)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Argument(format!("non-numeric field {f:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { tag, header, rows })
}

/// `x,y[,z],re,im[,truth_re,truth_im]`.
pub fn write_field_file(
    path: &Path,
    tag: &FileTag,
    dim: usize,
    points: &[f64],
    values: &[Complex64],
    truth: Option<&[Complex64]>,
) -> Result<()> {
    let mut header: Vec<&str> = ["x", "y", "z"][..dim].to_vec();
    header.extend(["re", "im"]);
    if truth.is_some() {
        header.extend(["truth_re", "truth_im"]);
    }
    let mut w = TableWriter::create(path, tag, &header)?;
    for (i, v) in values.iter().enumerate() {
        let mut row = points[i * dim..(i + 1) * dim].to_vec();
        row.extend([v.re, v.im]);
        if let Some(tr) = truth {
            row.extend([tr[i].re, tr[i].im]);
        }
        w.row(&row)?;
    }
    w.finish()
}

/// `theta,phi,re,im`.
pub fn write_far_field_file(path: &Path, tag: &FileTag, angles: &[(f64, f64)], values: &[Complex64]) -> Result<()> {
    let mut w = TableWriter::create(path, tag, &["theta", "phi", "re", "im"])?;
    for ((theta, phi), v) in angles.iter().zip(values) {
        w.row(&[*theta, *phi, v.re, v.im])?;
    }
    w.finish()
}
