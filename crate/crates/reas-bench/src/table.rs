//! Column extraction from arbitrary CSV files for the `fit` command.

use std::collections::BTreeMap;
use std::io::Read;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("no column named {0:?}")]
    MissingColumn(String),
    #[error("row {row}: {column} = {text:?} is not a number")]
    NotNumeric { row: usize, column: String, text: String },
    #[error("filter {0:?} is not of the form column=value")]
    BadFilter(String),
    #[error("unknown aggregation {0:?}; expected none, mean or rms")]
    BadAggregation(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// Every row is a point.
    #[default]
    None,
    /// Mean of `y` per distinct `x`.
    Mean,
    /// Root mean square of `y` per distinct `x`.
    Rms,
}

impl FromStr for Aggregation {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Aggregation::None),
            "mean" => Ok(Aggregation::Mean),
            "rms" => Ok(Aggregation::Rms),
            other => Err(TableError::BadAggregation(other.into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub column: String,
    pub value: String,
}

impl FromStr for Filter {
    type Err = TableError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once('=') {
            Some((c, v)) if !c.is_empty() => Ok(Filter { column: c.into(), value: v.into() }),
            _ => Err(TableError::BadFilter(s.into())),
        }
    }
}

/// `(x, y)` pairs from the rows matching every filter, sorted by `x`.
pub fn read_points<R: Read>(
    reader: R,
    x: &str,
    y: &str,
    filters: &[Filter],
    aggregation: Aggregation,
) -> Result<Vec<(f64, f64)>, TableError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| TableError::MissingColumn(name.into()));
    let (xi, yi) = (col(x)?, col(y)?);
    let fi: Vec<(usize, &str)> =
        filters.iter().map(|f| Ok((col(&f.column)?, f.value.as_str()))).collect::<Result<_, TableError>>()?;
    let mut points = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if !fi.iter().all(|&(i, v)| rec.get(i) == Some(v)) {
            continue;
        }
        let num = |i: usize, name: &str| {
            let text = rec.get(i).unwrap_or("");
            text.trim().parse::<f64>().map_err(|_| TableError::NotNumeric {
                row: row + 1,
                column: name.into(),
                text: text.into(),
            })
        };
        points.push((num(xi, x)?, num(yi, y)?));
    }
    let mut out = match aggregation {
        Aggregation::None => points,
        Aggregation::Mean | Aggregation::Rms => {
            let mut groups: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
            for (px, py) in points {
                let e = groups.entry(px.to_bits()).or_insert((px, 0.0, 0));
                e.1 += if aggregation == Aggregation::Rms { py * py } else { py };
                e.2 += 1;
            }
            groups
                .into_values()
                .map(|(px, s, n)| {
                    let m = s / n as f64;
                    (px, if aggregation == Aggregation::Rms { m.sqrt() } else { m })
                })
                .collect()
        }
    };
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}
