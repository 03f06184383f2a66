//! CSV to normalised sliding windows.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericColumn {
    pub column: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CategoricalColumn {
    pub column: String,
    pub categories: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutOfRange {
    Clamp,
    Error,
}

/// Declared normalisation bounds; nothing is inferred from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrangleSpec {
    pub numeric: Vec<NumericColumn>,
    #[serde(default)]
    pub categorical: Vec<CategoricalColumn>,
    pub target: NumericColumn,
    pub window_length: usize,
    #[serde(default = "default_out_of_range")]
    pub out_of_range: OutOfRange,
}

fn default_out_of_range() -> OutOfRange {
    OutOfRange::Error
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum WrangleError {
    #[error("csv: {0}")]
    Csv(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("row {row}: `{value}` in column `{column}` is not a number")]
    NotNumeric { row: usize, column: String, value: String },
    #[error("row {row}: {value} in column `{column}` is outside [{min}, {max}]")]
    OutOfRange {
        row: usize,
        column: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("row {row}: unknown category `{value}` in column `{column}`")]
    UnknownCategory { row: usize, column: String, value: String },
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
}

/// One training or inference example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    /// `rows[t][feature]`, every value in `[0, 1]`.
    pub rows: Vec<Vec<f64>>,
    /// Normalised target at the last row of the window.
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wrangled {
    pub feature_names: Vec<String>,
    pub window_length: usize,
    pub target: NumericColumn,
    pub windows: Vec<Window>,
}

impl Wrangled {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }
}

impl WrangleSpec {
    pub fn validate(&self) -> Result<(), WrangleError> {
        if self.window_length == 0 {
            return Err(WrangleError::InvalidSpec("window_length must be at least 1".into()));
        }
        for c in self.numeric.iter().chain([&self.target]) {
            if !(c.min < c.max) {
                return Err(WrangleError::InvalidSpec(format!("min must be below max for `{}`", c.column)));
            }
        }
        for c in &self.categorical {
            if c.categories.is_empty() {
                return Err(WrangleError::InvalidSpec(format!("`{}` has no categories", c.column)));
            }
        }
        Ok(())
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.numeric.iter().map(|c| c.column.clone()).collect();
        for c in &self.categorical {
            names.extend(c.categories.iter().map(|v| format!("{}={v}", c.column)));
        }
        names
    }

    fn scale(&self, col: &NumericColumn, row: usize, raw: &str) -> Result<f64, WrangleError> {
        let value: f64 = raw.trim().parse().map_err(|_| WrangleError::NotNumeric {
            row,
            column: col.column.clone(),
            value: raw.to_string(),
        })?;
        if !value.is_finite() {
            return Err(WrangleError::NotNumeric {
                row,
                column: col.column.clone(),
                value: raw.to_string(),
            });
        }
        if (value < col.min || value > col.max) && self.out_of_range == OutOfRange::Error {
            return Err(WrangleError::OutOfRange {
                row,
                column: col.column.clone(),
                value,
                min: col.min,
                max: col.max,
            });
        }
        Ok(((value - col.min) / (col.max - col.min)).clamp(0.0, 1.0))
    }
}

/// Normalises every row, then slides a window of `window_length` rows down
/// the series one row at a time. Row numbers in errors are 1-based data rows.
pub fn wrangle(csv_text: &str, spec: &WrangleSpec) -> Result<Wrangled, WrangleError> {
    spec.validate()?;
    let mut reader = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = reader.headers().map_err(|e| WrangleError::Csv(e.to_string()))?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let find = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| WrangleError::UnknownColumn(name.to_string()))
    };
    let numeric: Vec<usize> = spec.numeric.iter().map(|c| find(&c.column)).collect::<Result<_, _>>()?;
    let categorical: Vec<usize> = spec.categorical.iter().map(|c| find(&c.column)).collect::<Result<_, _>>()?;
    let target_at = find(&spec.target.column)?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| WrangleError::Csv(e.to_string()))?;
        let field = |at: usize| record.get(at).unwrap_or("");
        let mut x = Vec::with_capacity(spec.feature_names().len());
        for (col, &at) in spec.numeric.iter().zip(&numeric) {
            x.push(spec.scale(col, row, field(at))?);
        }
        for (col, &at) in spec.categorical.iter().zip(&categorical) {
            let value = field(at).trim();
            let hit = col.categories.iter().position(|c| c == value).ok_or_else(|| {
                WrangleError::UnknownCategory {
                    row,
                    column: col.column.clone(),
                    value: value.to_string(),
                }
            })?;
            x.extend((0..col.categories.len()).map(|k| if k == hit { 1.0 } else { 0.0 }));
        }
        features.push(x);
        targets.push(spec.scale(&spec.target, row, field(target_at))?);
    }
    let windows = if features.len() < spec.window_length {
        Vec::new()
    } else {
        (0..=features.len() - spec.window_length)
            .map(|start| {
                let end = start + spec.window_length;
                Window {
                    rows: features[start..end].to_vec(),
                    target: targets[end - 1],
                }
            })
            .collect()
    };
    Ok(Wrangled {
        feature_names: spec.feature_names(),
        window_length: spec.window_length,
        target: spec.target.clone(),
        windows,
    })
}

/// Maps a normalised target back to its original unit.
pub fn denormalize(target: &NumericColumn, value: f64) -> f64 {
    target.min + value * (target.max - target.min)
}
