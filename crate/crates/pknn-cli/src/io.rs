//! Dataset CSV ingestion, feature standardization, and density-dump files.
//!
//! Dataset CSVs carry one observation per row: numeric feature columns plus
//! one label column (by default the last column; selectable by name or
//! index). Label strings map to 0-based class indices in first-appearance
//! order.
//!
//! Density dumps are plain CSVs with headers `k,weight` (1-D) and
//! `k,beta,weight` (2-D, row-major in k). Values are written with Rust's
//! shortest round-trip float formatting, so re-reading a dump reproduces the
//! in-memory grid exactly.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use pknn::metrics::DensityGrid;
use pknn::LabeledDataset;

use crate::error::from_csv_error;
use crate::{HarnessError, Result};

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
}

/// Options for [`load_csv`] / [`parse_dataset_csv`].
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub has_header: bool,
    /// Defaults to the last column when `None`.
    pub label_column: Option<LabelColumn>,
    /// Z-score the features using this file's own statistics. Fold-aware
    /// pipelines should leave this off and use [`Standardizer`] with
    /// training-fold statistics instead.
    pub standardize: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            label_column: None,
            standardize: false,
        }
    }
}

/// A parsed dataset plus the label/feature names from the file.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub data: LabeledDataset,
    /// Class index -> original label string.
    pub label_names: Vec<String>,
    pub feature_names: Vec<String>,
}

/// Parse a dataset CSV from any reader.
pub fn parse_dataset_csv<R: Read>(reader: R, options: &LoadOptions) -> Result<LoadedDataset> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let headers: Vec<String> = if options.has_header {
        csv_reader
            .headers()
            .map_err(|e| from_csv_error(e, None))?
            .iter()
            .map(str::to_owned)
            .collect()
    } else {
        Vec::new()
    };

    let mut label_index: Option<usize> = match &options.label_column {
        Some(LabelColumn::Index(i)) => Some(*i),
        Some(LabelColumn::Name(name)) => {
            if !options.has_header {
                return Err(HarnessError::Config(
                    "label column by name requires a header row".into(),
                ));
            }
            let idx = headers.iter().position(|h| h == name).ok_or_else(|| {
                HarnessError::Config(format!("label column '{name}' not found in header"))
            })?;
            Some(idx)
        }
        None => None,
    };

    let mut width: Option<usize> = if headers.is_empty() {
        None
    } else {
        Some(headers.len())
    };
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    for record in csv_reader.records() {
        let record = record.map_err(|e| from_csv_error(e, None))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.is_empty() || (record.len() == 1 && record[0].is_empty()) {
            continue; // blank line
        }
        let w = *width.get_or_insert(record.len());
        if record.len() != w {
            return Err(HarnessError::parse(
                line,
                format!("expected {w} columns, found {}", record.len()),
            ));
        }
        let label_col = *label_index.get_or_insert(w - 1);
        if label_col >= w {
            return Err(HarnessError::Config(format!(
                "label column index {label_col} out of range for {w} columns"
            )));
        }
        let mut features = Vec::with_capacity(w - 1);
        for (col, field) in record.iter().enumerate() {
            if col == label_col {
                raw_labels.push(field.to_owned());
            } else {
                let value: f64 = field.parse().map_err(|_| {
                    HarnessError::parse(
                        line,
                        format!("column {} is not numeric: '{field}'", col + 1),
                    )
                })?;
                features.push(value);
            }
        }
        points.push(features);
    }
    if points.is_empty() {
        return Err(HarnessError::parse(0, "no data rows".to_string()));
    }

    // label strings -> 0-based indices in first-appearance order
    let mut label_names: Vec<String> = Vec::new();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|raw| {
            if let Some(i) = label_names.iter().position(|n| n == raw) {
                i
            } else {
                label_names.push(raw.clone());
                label_names.len() - 1
            }
        })
        .collect();

    let mut data = LabeledDataset::new(points, labels, label_names.len())?;
    if options.standardize {
        data = Standardizer::fit(&data).apply(&data);
    }

    let label_col = label_index.unwrap_or(0);
    let feature_names = if headers.is_empty() {
        (0..data.dim()).map(|i| format!("f{}", i + 1)).collect()
    } else {
        headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != label_col)
            .map(|(_, h)| h.clone())
            .collect()
    };
    Ok(LoadedDataset {
        data,
        label_names,
        feature_names,
    })
}

/// Load a dataset CSV from disk.
pub fn load_csv(path: &Path, options: &LoadOptions) -> Result<LoadedDataset> {
    let file = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    parse_dataset_csv(file, options)
}

/// Per-feature z-score transform fitted on a training set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &LabeledDataset) -> Self {
        let n = data.len() as f64;
        let d = data.dim();
        let mut mean = vec![0.0; d];
        for p in data.points() {
            for (m, x) in mean.iter_mut().zip(p) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        let mut std = vec![0.0; d];
        for p in data.points() {
            for (s, (x, m)) in std.iter_mut().zip(p.iter().zip(&mean)) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0; // constant feature: leave it centred
            }
        }
        Self { mean, std }
    }

    pub fn apply_point(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn apply(&self, data: &LabeledDataset) -> LabeledDataset {
        let points = data.points().iter().map(|p| self.apply_point(p)).collect();
        LabeledDataset::new(points, data.labels().to_vec(), data.class_count())
            .expect("standardization preserves validity")
    }
}

/// Write a 1-D density as `k,weight` rows.
pub fn write_density_1d<W: Write>(mut w: W, grid: &DensityGrid) -> std::io::Result<()> {
    writeln!(w, "k,weight")?;
    for (k, v) in grid.k_axis().iter().zip(grid.values()) {
        writeln!(w, "{k},{v}")?;
    }
    Ok(())
}

/// Write a 2-D density as `k,beta,weight` rows, k-major.
pub fn write_density_2d<W: Write>(mut w: W, grid: &DensityGrid) -> std::io::Result<()> {
    writeln!(w, "k,beta,weight")?;
    let m = grid.beta_axis().len();
    for (ki, k) in grid.k_axis().iter().enumerate() {
        for (bi, beta) in grid.beta_axis().iter().enumerate() {
            writeln!(w, "{k},{beta},{}", grid.values()[ki * m + bi])?;
        }
    }
    Ok(())
}

fn read_csv_rows<R: Read>(reader: R, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|e| from_csv_error(e, None))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != expected_header {
        return Err(HarnessError::parse(
            1,
            format!("expected header '{expected_header}', found '{headers}'"),
        ));
    }
    let width = expected_header.split(',').count();
    let mut rows = Vec::new();
    for record in csv_reader.records() {
        let record = record.map_err(|e| from_csv_error(e, None))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(HarnessError::parse(
                line,
                format!("expected {width} columns, found {}", record.len()),
            ));
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

fn parse_field<T: std::str::FromStr>(row_index: usize, field: &str, what: &str) -> Result<T> {
    field.parse().map_err(|_| {
        HarnessError::parse(
            row_index as u64 + 2, // 1-based, after the header
            format!("invalid {what}: '{field}'"),
        )
    })
}

/// Parse a `k,weight` density dump.
pub fn parse_density_1d<R: Read>(reader: R) -> Result<DensityGrid> {
    let rows = read_csv_rows(reader, "k,weight")?;
    let mut k_axis = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        k_axis.push(parse_field::<usize>(i, &row[0], "k")?);
        values.push(parse_field::<f64>(i, &row[1], "weight")?);
    }
    DensityGrid::new_1d(k_axis, values).map_err(Into::into)
}

/// Parse a `k,beta,weight` density dump; rows must form a full k-major grid
/// with a consistent beta axis.
pub fn parse_density_2d<R: Read>(reader: R) -> Result<DensityGrid> {
    let rows = read_csv_rows(reader, "k,beta,weight")?;
    if rows.is_empty() {
        return Err(HarnessError::parse(0, "empty density dump".to_string()));
    }
    let mut k_axis: Vec<usize> = Vec::new();
    let mut beta_axis: Vec<f64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let k = parse_field::<usize>(i, &row[0], "k")?;
        let beta = parse_field::<f64>(i, &row[1], "beta")?;
        let weight = parse_field::<f64>(i, &row[2], "weight")?;
        if k_axis.last() != Some(&k) {
            k_axis.push(k);
        }
        let row_in_block = values.len() % beta_axis.len().max(1);
        if k_axis.len() == 1 {
            beta_axis.push(beta);
        } else if (beta - beta_axis[row_in_block]).abs() > 0.0 {
            return Err(HarnessError::parse(
                i as u64 + 2,
                format!(
                    "beta axis mismatch: expected {}, found {beta}",
                    beta_axis[row_in_block]
                ),
            ));
        }
        values.push(weight);
    }
    DensityGrid::new_2d(k_axis, beta_axis, values).map_err(Into::into)
}
