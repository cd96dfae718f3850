use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{extract_feature_vector, feature_names, FeatureConfig, FeatureError, Representation};
use crate::chat::{Label, Transcript};

/// Identity of the transcript a feature row came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TranscriptRef {
    pub subject_id: String,
    pub session_id: u32,
    pub label: Label,
    pub source: String,
}

impl TranscriptRef {
    pub fn of(t: &Transcript) -> Self {
        TranscriptRef {
            subject_id: t.subject_id.clone(),
            session_id: t.session_id,
            label: t.label,
            source: t.source_path.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: TranscriptRef,
    /// `None` is a missing value.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub representation: Representation,
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureRow>,
    /// Columns removed because every row was missing.
    pub dropped_columns: Vec<String>,
}

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

/// Extract one row per transcript. Rows are ordered by subject, session and
/// source path regardless of input order; all-missing columns are dropped.
pub fn build_feature_matrix(
    corpus: &[Transcript],
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<FeatureMatrix, FeatureError> {
    if corpus.len() < 2 {
        return Err(FeatureError::InsufficientData(format!(
            "{} transcript(s), need at least 2",
            corpus.len()
        )));
    }
    let first = corpus[0].label;
    if corpus.iter().all(|t| t.label == first) {
        return Err(FeatureError::InsufficientData(format!(
            "all transcripts are labelled {first}"
        )));
    }
    let mut rows: Vec<FeatureRow> = corpus
        .par_iter()
        .map(|t| {
            extract_feature_vector(t, r, cfg).map(|v| FeatureRow {
                id: v.transcript,
                values: v.values,
            })
        })
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let names = feature_names(r);
    let keep: Vec<bool> = (0..names.len())
        .map(|j| rows.iter().any(|row| row.values[j].is_some()))
        .collect();
    let dropped_columns = names
        .iter()
        .zip(&keep)
        .filter(|(_, k)| !**k)
        .map(|(n, _)| n.clone())
        .collect();
    let feature_names = names
        .into_iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(n, _)| n)
        .collect();
    for row in &mut rows {
        row.values = row
            .values
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(v, _)| *v)
            .collect();
    }
    Ok(FeatureMatrix {
        representation: r,
        feature_names,
        rows,
        dropped_columns,
    })
}

const ID_COLUMNS: [&str; 4] = ["subject_id", "session_id", "label", "source"];

impl FeatureMatrix {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.values[j]).collect()
    }

    /// Class per row, dementia = 1.
    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.id.label.as_class()).collect()
    }

    pub fn subjects(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.id.subject_id.clone()).collect()
    }

    /// Serialise as CSV. Each `meta` pair becomes a leading `# key=value`
    /// line; representation and dropped columns are always recorded.
    pub fn to_csv(&self, meta: &[(String, String)]) -> Result<String, MatrixIoError> {
        let mut out = String::new();
        for (k, v) in meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&format!("# representation={}\n", self.representation));
        out.push_str(&format!(
            "# dropped_columns={}\n",
            self.dropped_columns.join(";")
        ));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(
            ID_COLUMNS
                .iter()
                .copied()
                .chain(self.feature_names.iter().map(String::as_str)),
        )?;
        for row in &self.rows {
            let mut rec = vec![
                row.id.subject_id.clone(),
                row.id.session_id.to_string(),
                row.id.label.to_string(),
                row.id.source.clone(),
            ];
            rec.extend(
                row.values
                    .iter()
                    .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| MatrixIoError::Syntax {
            line: 0,
            reason: e.to_string(),
        })?;
        out.push_str(&String::from_utf8_lossy(&bytes));
        Ok(out)
    }

    /// Parse CSV written by [`FeatureMatrix::to_csv`]. Returns the matrix and
    /// the `# key=value` metadata lines.
    pub fn from_csv(
        text: &str,
    ) -> Result<(FeatureMatrix, BTreeMap<String, String>), MatrixIoError> {
        let mut meta = BTreeMap::new();
        let mut body_start = 0;
        let mut n_comment = 0;
        for line in text.split_inclusive('\n') {
            let Some(c) = line.strip_prefix('#') else {
                break;
            };
            n_comment += 1;
            body_start += line.len();
            if let Some((k, v)) = c.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let syntax = |line: usize, reason: String| MatrixIoError::Syntax { line, reason };
        let representation: Representation = meta
            .get("representation")
            .ok_or_else(|| syntax(1, "missing `# representation=` line".into()))?
            .parse()
            .map_err(|e: String| syntax(1, e))?;
        let dropped_columns = meta
            .get("dropped_columns")
            .map(|s| {
                s.split(';')
                    .filter(|x| !x.is_empty())
                    .map(String::from)
                    .collect()
            })
            .unwrap_or_default();

        let mut rdr = csv::ReaderBuilder::new().from_reader(&text.as_bytes()[body_start..]);
        let header = rdr.headers()?.clone();
        if header.len() < ID_COLUMNS.len() || header.iter().take(4).ne(ID_COLUMNS.iter().copied()) {
            return Err(syntax(
                n_comment + 1,
                "header must start with subject_id,session_id,label,source".into(),
            ));
        }
        let feature_names: Vec<String> = header.iter().skip(4).map(String::from).collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = n_comment + 2 + i;
            let session_id = rec[1]
                .parse()
                .map_err(|_| syntax(line, format!("bad session id `{}`", &rec[1])))?;
            let label = rec[2]
                .parse()
                .map_err(|_| syntax(line, format!("bad label `{}`", &rec[2])))?;
            let values = rec
                .iter()
                .skip(4)
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|_| syntax(line, format!("bad number `{cell}`")))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(FeatureRow {
                id: TranscriptRef {
                    subject_id: rec[0].to_string(),
                    session_id,
                    label,
                    source: rec[3].to_string(),
                },
                values,
            });
        }
        Ok((
            FeatureMatrix {
                representation,
                feature_names,
                rows,
                dropped_columns,
            },
            meta,
        ))
    }
}
