//! CSV files: per-round metrics and sample dumps.

use std::io::{Read, Write};

use fedsim_core::Sample;

use crate::runtime::RoundMetrics;

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {detail}")]
    Parse { line: u64, detail: String },
}

pub const METRICS_HEADER: [&str; 4] = ["round", "elapsed_s", "epochs", "mse"];

/// Plain decimal rendering of `v` rounded to `digits` significant digits.
pub fn format_significant(v: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let mut digit_str: String = mantissa.chars().filter(|c| *c != '.').collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digit_str)
    } else if point as usize >= digit_str.len() {
        digit_str.push_str(&"0".repeat(point as usize - digit_str.len()));
        digit_str
    } else {
        let (int, frac) = digit_str.split_at(point as usize);
        format!("{int}.{frac}")
    };
    format!("{sign}{body}")
}

/// Writes metrics one row at a time, flushing after every row.
pub struct MetricsWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W) -> Result<Self, CsvError> {
        let mut inner = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        inner.write_record(METRICS_HEADER)?;
        inner.flush()?;
        Ok(MetricsWriter { inner })
    }

    pub fn write(&mut self, m: &RoundMetrics) -> Result<(), CsvError> {
        self.inner.write_record([
            m.round.to_string(),
            format_significant(m.elapsed_s, 9),
            m.epochs.to_string(),
            format_significant(m.mse, 9),
        ])?;
        self.inner.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W, CsvError> {
        self.inner
            .into_inner()
            .map_err(|e| CsvError::Io(std::io::Error::other(e.to_string())))
    }
}

fn field<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize) -> Result<T, CsvError> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).ok_or_else(|| CsvError::Parse {
        line,
        detail: format!("missing column {idx}"),
    })?;
    raw.trim().parse().map_err(|_| CsvError::Parse {
        line,
        detail: format!("cannot parse {raw:?}"),
    })
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<RoundMetrics>, CsvError> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(METRICS_HEADER) {
        return Err(CsvError::Parse {
            line: 1,
            detail: format!("unexpected header {headers:?}"),
        });
    }
    reader
        .records()
        .map(|r| {
            let r = r?;
            Ok(RoundMetrics {
                round: field(&r, 0)?,
                elapsed_s: field(&r, 1)?,
                epochs: field(&r, 2)?,
                mse: field(&r, 3)?,
            })
        })
        .collect()
}

/// One line per sample, `x,y,t1,t2`, 17 significant digits, no header.
pub fn write_samples<W: Write>(out: W, samples: &[Sample]) -> Result<(), CsvError> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    for s in samples {
        w.write_record(
            s.input
                .iter()
                .chain(&s.target)
                .map(|v| format_significant(*v, 17)),
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples<R: Read>(input: R) -> Result<Vec<Sample>, CsvError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    reader
        .records()
        .map(|r| {
            let r = r?;
            if r.len() != 4 {
                return Err(CsvError::Parse {
                    line: r.position().map_or(0, |p| p.line()),
                    detail: format!("expected 4 columns, found {}", r.len()),
                });
            }
            Ok(Sample::new(
                [field(&r, 0)?, field(&r, 1)?],
                [field(&r, 2)?, field(&r, 3)?],
            ))
        })
        .collect()
}
