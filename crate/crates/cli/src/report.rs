use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Where and with what a report was produced. Holds no timestamps so
/// reruns stay byte-identical.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub tool: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

/// One grid cell. Metrics are empty when the cell failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub kind: String,
    pub config_id: String,
    /// Percent of training dialogs withheld.
    pub exclusion: f64,
    pub seed: u64,
    pub train_size: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub correct_stories: Option<usize>,
    pub stories: Option<usize>,
    pub status: String,
}

impl ReportRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Seed-averaged metrics of one (kind, config, exclusion) group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub kind: String,
    pub config_id: String,
    pub exclusion: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub kind: String,
    pub metric: String,
    pub config_id: String,
    pub exclusion: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub environment: Environment,
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            environment: Environment::current(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    /// Groups in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut order: Vec<(String, String, u64)> = Vec::new();
        let mut groups: BTreeMap<(String, String, u64), Vec<&ReportRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.kind.clone(), r.config_id.clone(), r.exclusion.to_bits());
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let ok: Vec<&&ReportRow> = rows.iter().filter(|r| r.ok()).collect();
                let mean = |f: fn(&ReportRow) -> Option<f64>| {
                    let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                    if v.is_empty() {
                        0.0
                    } else {
                        v.iter().sum::<f64>() / v.len() as f64
                    }
                };
                SummaryRow {
                    kind: key.0,
                    config_id: key.1,
                    exclusion: f64::from_bits(key.2),
                    runs: rows.len(),
                    failures: rows.len() - ok.len(),
                    mean_precision: mean(|r| r.precision),
                    mean_recall: mean(|r| r.recall),
                    mean_f1: mean(|r| r.f1),
                }
            })
            .collect()
    }

    /// Highest seed-averaged value per kind and metric; earlier groups win ties.
    pub fn best(&self) -> Vec<Best> {
        let summary = self.summary();
        let mut kinds: Vec<&str> = Vec::new();
        for s in &summary {
            if !kinds.contains(&s.kind.as_str()) {
                kinds.push(&s.kind);
            }
        }
        let metrics: [(&str, fn(&SummaryRow) -> f64); 3] = [
            ("precision", |s| s.mean_precision),
            ("recall", |s| s.mean_recall),
            ("f1", |s| s.mean_f1),
        ];
        let mut out = Vec::new();
        for kind in kinds {
            for (name, get) in metrics {
                let best = summary
                    .iter()
                    .filter(|s| s.kind == kind)
                    .fold(None::<&SummaryRow>, |b, s| match b {
                        Some(b) if get(b) >= get(s) => Some(b),
                        _ => Some(s),
                    })
                    .expect("kind has rows");
                out.push(Best {
                    kind: kind.to_string(),
                    metric: name.to_string(),
                    config_id: best.config_id.clone(),
                    exclusion: best.exclusion,
                    value: get(best),
                });
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| CliError::Usage(format!("report: {e}")))
    }

    pub fn rows_csv(&self) -> String {
        to_csv(&self.rows)
    }

    pub fn summary_csv(&self) -> String {
        to_csv(&self.summary())
    }

    /// Writes `report.json`, `report.csv`, `summary.csv` and `best.json`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let best = serde_json::to_string_pretty(&self.best()).expect("summary serializes");
        for (name, body) in [
            ("report.json", self.to_json()),
            ("report.csv", self.rows_csv()),
            ("summary.csv", self.summary_csv()),
            ("best.json", best),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| CliError::io(&p, e))?;
        }
        Ok(())
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("flat rows serialize");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Parses `report.csv` back into rows.
pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("report csv: {e}")))
}
