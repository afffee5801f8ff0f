//! Per-draw CSV rows, aggregates and the summary document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::fit::ScalingFit;

/// One measured value. `sample` is the joint noise/twirl draw and `index`
/// distinguishes several values taken from one draw (e.g. one per qubit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub quantity: String,
    pub method: String,
    pub x: f64,
    pub sample: usize,
    pub index: usize,
    pub value: f64,
}

impl Row {
    pub fn new(quantity: &str, method: &str, x: f64, sample: usize, index: usize, value: f64) -> Self {
        Row { quantity: quantity.into(), method: method.into(), x, sample, index, value }
    }
}

/// Statistics of all rows sharing `(quantity, method, x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub quantity: String,
    pub method: String,
    pub x: f64,
    pub count: usize,
    pub mean: f64,
    pub std_err: f64,
    /// `sqrt(mean(value²))`.
    pub rms: f64,
}

/// Groups rows in first-seen order.
pub fn aggregate(rows: &[Row]) -> Vec<Aggregate> {
    let mut order: Vec<(String, String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, String, u64), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.quantity.clone(), r.method.clone(), r.x.to_bits());
        groups
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r.value);
    }
    order
        .into_iter()
        .map(|key| {
            let v = &groups[&key];
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let rms = (v.iter().map(|x| x * x).sum::<f64>() / n).sqrt();
            Aggregate {
                quantity: key.0,
                method: key.1,
                x: f64::from_bits(key.2),
                count: v.len(),
                mean,
                std_err: (var / n).sqrt(),
                rms,
            }
        })
        .collect()
}

/// Picks `(x, stat)` pairs for one `(quantity, method)` curve, sorted by `x`.
pub fn curve(aggs: &[Aggregate], quantity: &str, method: &str, stat: impl Fn(&Aggregate) -> f64) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> =
        aggs.iter().filter(|a| a.quantity == quantity && a.method == method).map(|a| (a.x, stat(a))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

pub fn find<'a>(aggs: &'a [Aggregate], quantity: &str, method: &str, x: f64) -> Option<&'a Aggregate> {
    aggs.iter().find(|a| a.quantity == quantity && a.method == method && a.x == x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedFit {
    pub method: String,
    pub quantity: String,
    pub statistic: String,
    #[serde(flatten)]
    pub fit: Option<ScalingFit>,
    pub error: Option<String>,
}

/// A pass/fail property evaluated on the scenario's own output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.into(), passed, detail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub version: String,
    pub scenario: String,
    pub config_hash: String,
    pub seed: u64,
    pub samples: usize,
    pub aggregates: Vec<Aggregate>,
    pub fits: Vec<NamedFit>,
    pub checks: Vec<Check>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig, name: &str, rows: &[Row]) -> Self {
        Summary {
            version: env!("CARGO_PKG_VERSION").into(),
            scenario: name.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            samples: cfg.samples,
            aggregates: aggregate(rows),
            fits: Vec::new(),
            checks: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn fit(&self, method: &str) -> Option<&ScalingFit> {
        self.fits.iter().find(|f| f.method == method).and_then(|f| f.fit.as_ref())
    }

    pub fn meta(&mut self, key: &str, value: impl Serialize) {
        self.metadata.insert(key.into(), serde_json::to_value(value).expect("metadata serialises"));
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub rows: Vec<Row>,
    pub summary: Summary,
}

impl ScenarioOutput {
    pub fn csv_bytes(&self) -> csv::Result<Vec<u8>> {
        rows_to_csv(&self.rows)
    }

    /// Writes `<stem>.csv` and `<stem>.summary.json` under `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.summary.json"));
        std::fs::write(&csv_path, self.csv_bytes().map_err(std::io::Error::other)?)?;
        let json = serde_json::to_string_pretty(&self.summary).map_err(std::io::Error::other)?;
        std::fs::write(&json_path, json + "\n")?;
        Ok((csv_path, json_path))
    }
}

pub fn rows_to_csv(rows: &[Row]) -> csv::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates_keep_first_seen_order() {
        let rows = vec![
            Row::new("q", "b", 2.0, 0, 0, 3.0),
            Row::new("q", "a", 1.0, 0, 0, 1.0),
            Row::new("q", "b", 2.0, 1, 0, -3.0),
        ];
        let a = aggregate(&rows);
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].method, "b");
        assert_eq!(a[0].mean, 0.0);
        assert_eq!(a[0].rms, 3.0);
        assert!((a[0].std_err - 3.0).abs() < 1e-12);
        assert_eq!(curve(&a, "q", "a", |g| g.mean), vec![(1.0, 1.0)]);
    }

    #[test]
    fn csv_has_a_header_and_quotes_only_when_needed() {
        let rows = vec![Row::new("td", "reas,spt", 0.5, 1, 0, 0.25)];
        let text = String::from_utf8(rows_to_csv(&rows).unwrap()).unwrap();
        assert_eq!(text, "quantity,method,x,sample,index,value\ntd,\"reas,spt\",0.5,1,0,0.25\n");
    }
}
