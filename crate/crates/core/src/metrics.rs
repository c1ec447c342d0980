//! Rate primitives, order-independent aggregation and CSV output.

use serde::Serialize;
use std::io::Write;
use std::path::Path;
use thiserror::Error;

/// z-score of a two-sided 95% normal interval.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Significant digits written to CSV.
pub const CSV_SIGNIFICANT_DIGITS: usize = 9;

#[derive(Error, Debug)]
pub enum MetricsError {
    #[error("SINR must be finite and >= 0, got {0}")]
    InvalidSinr(f64),
    #[error("rate must be finite and >= 0, got {0}")]
    InvalidRate(f64),
    #[error("non-finite sample value {0}")]
    NonFinite(f64),
    #[error("no samples for sweep value {0}")]
    EmptyGroup(f64),
    #[error("nothing to aggregate")]
    NoSamples,
    #[error("row has {got} fields, header has {expected}")]
    RowWidth { expected: usize, got: usize },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// `log2(1 + sinr)` in bits/s/Hz.
pub fn shannon_rate(sinr: f64) -> Result<f64, MetricsError> {
    if !(sinr.is_finite() && sinr >= 0.0) {
        return Err(MetricsError::InvalidSinr(sinr));
    }
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateSample {
    pub trial: u64,
    pub entity: u64,
    pub rate: f64,
}

impl RateSample {
    pub fn new(trial: u64, entity: u64, rate: f64) -> Result<Self, MetricsError> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(MetricsError::InvalidRate(rate));
        }
        Ok(Self { trial, entity, rate })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator, 0 for one sample).
    pub std: f64,
    /// Normal-approximation 95% half-width.
    pub ci_half_width: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSeries {
    pub variable: String,
    /// Strictly increasing in `value`.
    pub points: Vec<SweepPoint>,
}

/// Summarises one group of observations. Values are sorted before any
/// reduction so the result does not depend on input order.
pub fn summarize(value: f64, samples: &[f64]) -> Result<SweepPoint, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptyGroup(value));
    }
    if let Some(&bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite(bad));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let std = if n > 1 { (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    let ci_half_width = Z_95 * std / (n as f64).sqrt();
    Ok(SweepPoint { value, mean, std, ci_half_width, trials: n })
}

/// Groups `(sweep value, observation)` pairs by sweep value.
pub fn aggregate<I>(variable: &str, samples: I) -> Result<SweepSeries, MetricsError>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut pairs: Vec<(f64, f64)> = samples.into_iter().collect();
    if pairs.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    if let Some(&(k, _)) = pairs.iter().find(|(k, _)| !k.is_finite()) {
        return Err(MetricsError::NonFinite(k));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut points = Vec::new();
    for group in pairs.chunk_by(|a, b| a.0 == b.0) {
        let values: Vec<f64> = group.iter().map(|p| p.1).collect();
        points.push(summarize(group[0].0, &values)?);
    }
    Ok(SweepSeries { variable: variable.to_string(), points })
}

/// Like [`aggregate`] but every value in `expected` must have samples.
pub fn aggregate_expecting<I>(variable: &str, expected: &[f64], samples: I) -> Result<SweepSeries, MetricsError>
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let series = aggregate(variable, samples)?;
    for &v in expected {
        if !series.points.iter().any(|p| p.value == v) {
            return Err(MetricsError::EmptyGroup(v));
        }
    }
    Ok(series)
}

/// Plain decimal with [`CSV_SIGNIFICANT_DIGITS`] significant digits;
/// scientific notation outside `[1e-6, 1e15)`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = CSV_SIGNIFICANT_DIGITS;
    let mag = x.abs();
    if !(1e-6..1e15).contains(&mag) {
        return format!("{:.*e}", digits - 1, x);
    }
    // round first so 9.9999999996 lands on 10.0000000 rather than 9.99999999
    let rounded: f64 = format!("{:.*e}", digits - 1, x).parse().unwrap_or(x);
    let exp = rounded.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Small in-memory table serialised with a fixed column order.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<(), MetricsError> {
        if row.len() != self.header.len() {
            return Err(MetricsError::RowWidth { expected: self.header.len(), got: row.len() });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, MetricsError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| MetricsError::Io(e.into_error()))
    }

    pub fn write_to(&self, path: &Path) -> Result<(), MetricsError> {
        let bytes = self.to_bytes()?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        Ok(())
    }
}
