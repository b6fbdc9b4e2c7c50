use std::path::Path;

use super::{FeatureKind, SchemaConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    /// `None` marks a missing cell.
    Continuous(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
}

/// Typed columns in schema order, plus raw label strings.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub names: Vec<String>,
    pub columns: Vec<RawColumn>,
    pub labels: Vec<String>,
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                RawColumn::Continuous(v) => v.iter().filter(|x| x.is_none()).count(),
                RawColumn::Categorical(v) => v.iter().filter(|x| x.is_none()).count(),
            })
            .sum()
    }
}

/// Read the schema's feature and label columns from a headed CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &SchemaConfig) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, &path.display().to_string())
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, schema: &SchemaConfig, source: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            location: format!("{source}:1"),
            message: e.to_string(),
        })?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in {source}")))
    };
    let label_idx = find(&schema.label_column)?;
    let feature_idx: Vec<usize> = schema
        .features
        .iter()
        .map(|f| find(&f.name))
        .collect::<Result<_>>()?;

    let mut columns: Vec<RawColumn> = schema
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Continuous => RawColumn::Continuous(Vec::new()),
            FeatureKind::Categorical => RawColumn::Categorical(Vec::new()),
        })
        .collect();
    let mut labels = Vec::new();
    let is_missing = |cell: &str| schema.missing_tokens.iter().any(|t| t == cell);

    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            location: format!(
                "{source}:{}",
                e.position().map(|p| p.line()).unwrap_or_default()
            ),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or_default();
        let label = record.get(label_idx).unwrap_or("").trim();
        if is_missing(label) {
            return Err(Error::Parse {
                location: format!("{source}:{line}, column `{}`", schema.label_column),
                message: "missing label".into(),
            });
        }
        labels.push(label.to_string());
        for ((config, &idx), column) in schema.features.iter().zip(&feature_idx).zip(columns.iter_mut()) {
            let cell = record.get(idx).unwrap_or("").trim();
            match column {
                RawColumn::Continuous(values) => {
                    if is_missing(cell) {
                        values.push(None);
                    } else {
                        let v: f64 = cell.parse().map_err(|_| Error::Parse {
                            location: format!("{source}:{line}, column `{}`", config.name),
                            message: format!("cannot parse `{cell}` as a number"),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                location: format!("{source}:{line}, column `{}`", config.name),
                                message: format!("non-finite value `{cell}`"),
                            });
                        }
                        values.push(Some(v));
                    }
                }
                RawColumn::Categorical(values) => {
                    values.push((!is_missing(cell)).then(|| cell.to_string()));
                }
            }
        }
    }

    Ok(RawTable {
        names: schema.features.iter().map(|f| f.name.clone()).collect(),
        columns,
        labels,
    })
}
