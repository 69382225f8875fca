use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// Precomputed sentence vectors keyed by exact utterance text.
///
/// File format: a `DIM n` header, then one record per line made of `n`
/// tab-separated floats followed by a tab and the utterance text.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalEmbeddingTable {
    pub dimension: usize,
    entries: BTreeMap<String, Vec<f64>>,
    mean: Vec<f64>,
}

impl ExternalEmbeddingTable {
    pub fn new(dimension: usize, entries: BTreeMap<String, Vec<f64>>) -> Result<Self, FeatureError> {
        if dimension == 0 {
            return Err(FeatureError::Config("embedding dimension must be positive".into()));
        }
        if let Some((k, v)) = entries.iter().find(|(_, v)| v.len() != dimension) {
            return Err(FeatureError::Config(format!(
                "vector for {k:?} has length {}, expected {dimension}",
                v.len()
            )));
        }
        let mut mean = vec![0.0; dimension];
        for v in entries.values() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        if !entries.is_empty() {
            let n = entries.len() as f64;
            mean.iter_mut().for_each(|m| *m /= n);
        }
        Ok(Self {
            dimension,
            entries,
            mean,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, text: &str) -> Option<&[f64]> {
        self.entries.get(text).map(Vec::as_slice)
    }

    /// Stored vector, or the table mean for unseen text.
    pub fn lookup(&self, text: &str) -> &[f64] {
        self.get(text).unwrap_or(&self.mean)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn to_file_string(&self) -> String {
        let mut out = format!("DIM {}\n", self.dimension);
        for (text, v) in &self.entries {
            for x in v {
                let _ = write!(out, "{x}\t");
            }
            out.push_str(text);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_file_string()).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn parse_external_embeddings(text: &str) -> Result<ExternalEmbeddingTable, FeatureError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or(FeatureError::Format {
        line: 1,
        msg: "missing DIM header".into(),
    })?;
    let dim: usize = header
        .trim()
        .strip_prefix("DIM ")
        .and_then(|n| n.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or(FeatureError::Format {
            line: hline + 1,
            msg: format!("expected `DIM <positive int>`, got {header:?}"),
        })?;
    let mut entries = BTreeMap::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != dim + 1 {
            return Err(FeatureError::Format {
                line: lineno,
                msg: format!("expected {dim} values and a text field, found {} fields", fields.len()),
            });
        }
        let v = fields[..dim]
            .iter()
            .map(|f| f.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| FeatureError::Format {
                line: lineno,
                msg: "non-numeric or non-finite value".into(),
            })?;
        let text = fields[dim].to_string();
        if entries.insert(text.clone(), v).is_some() {
            return Err(FeatureError::Format {
                line: lineno,
                msg: format!("duplicate entry {text:?}"),
            });
        }
    }
    ExternalEmbeddingTable::new(dim, entries)
}

pub fn load_external_embeddings(path: &Path) -> Result<ExternalEmbeddingTable, FeatureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_external_embeddings(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROWS: &str = "DIM 4\n1\t2\t3\t4\thello\n3\t2\t1\t0\tbye now\n";

    #[test]
    fn loads_dimension_and_rows() {
        let t = parse_external_embeddings(TWO_ROWS).unwrap();
        assert_eq!(t.dimension, 4);
        assert_eq!(t.lookup("hello"), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(t.lookup("never seen"), &[2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn bad_row_reports_line_number() {
        let err = parse_external_embeddings("DIM 2\n1\t2\tok\n1\t2\t3\tbad\n").unwrap_err();
        assert!(matches!(err, FeatureError::Format { line: 3, .. }), "{err}");
        let err = parse_external_embeddings("DIM x\n").unwrap_err();
        assert!(matches!(err, FeatureError::Format { line: 1, .. }));
        assert!(parse_external_embeddings("DIM 1\nnan\ttext\n").is_err());
    }

    #[test]
    fn file_round_trip_is_exact() {
        let t = parse_external_embeddings("DIM 2\n0.1\t-3.3333333333333335\ta b\n1e-300\t7\tc\n").unwrap();
        let back = parse_external_embeddings(&t.to_file_string()).unwrap();
        assert_eq!(t, back);
        let missing = load_external_embeddings(Path::new("/nonexistent/emb.tsv"));
        assert!(matches!(missing, Err(FeatureError::Io { .. })));
    }
}
