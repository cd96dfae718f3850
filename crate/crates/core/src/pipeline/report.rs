use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::features::{AnnotationSummary, MatrixMeta};
use super::io::read_stamped_json;
use super::{
    level_name, write_atomic, IngestSummary, Layout, PipelineError, ProtocolKind, RunConfig,
};
use crate::eval::EvaluationResult;
use crate::stats::AssociationTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub path: PathBuf,
    /// Inputs that were absent; the report states each one.
    pub gaps: Vec<PathBuf>,
}

fn rel(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).display().to_string()
}

/// `Ok(None)` for a missing file; hash mismatches stay errors.
fn load<T: DeserializeOwned>(
    path: &Path,
    hash: &str,
    gaps: &mut Vec<PathBuf>,
) -> Result<Option<T>, PipelineError> {
    match read_stamped_json(path, hash) {
        Ok(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| PipelineError::Io {
                path: path.to_path_buf(),
                message: e.to_string(),
            }),
        Err(PipelineError::MissingInputs(_)) => {
            gaps.push(path.to_path_buf());
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

fn sci(p: f64) -> String {
    if p == 0.0 {
        "0".into()
    } else if p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.1e}")
    }
}

fn metric_cell(res: &EvaluationResult, name: &str) -> String {
    match &res.aggregate {
        Some(a) => format!("{:.4} ± {:.4}", a.metrics[name].mean, a.metrics[name].std),
        None => format!(
            "{:.4}",
            res.folds[0].metrics.get(name).expect("known metric")
        ),
    }
}

/// Assemble every available artifact into `report.md`.
pub fn run_report(cfg: &RunConfig) -> Result<ReportSummary, PipelineError> {
    let root = cfg.out_dir.as_path();
    let layout = Layout(root);
    let mut gaps = Vec::new();
    let mut md = format!(
        "<!-- config_hash={} -->\n# Linguistic marker report\n\n",
        cfg.report_hash()
    );

    md.push_str("## Corpus\n\n");
    let corpus: Option<IngestSummary> =
        load(&layout.corpus_summary(), &cfg.ingest_hash(), &mut gaps)?;
    match &corpus {
        Some(c) => {
            md.push_str("| Class | Transcripts | Subjects |\n|---|---|---|\n");
            for (class, n) in &c.transcripts {
                md.push_str(&format!(
                    "| {class} | {n} | {} |\n",
                    c.subjects.get(class).copied().unwrap_or(0)
                ));
            }
            md.push_str(&format!(
                "| total | {} | {} |\n\n",
                c.total_transcripts,
                c.subjects.values().sum::<usize>()
            ));
            if !c.skipped.is_empty() {
                md.push_str(&format!("{} file(s) skipped:\n\n", c.skipped.len()));
                for f in &c.skipped {
                    md.push_str(&format!("- `{}`: {}\n", f.path, f.message));
                }
                md.push('\n');
            }
        }
        None => md.push_str("Corpus summary not available.\n\n"),
    }

    md.push_str("## Annotation\n\n");
    let fhash = cfg.features_hash();
    match load::<AnnotationSummary>(&layout.annotation(), &fhash, &mut gaps)? {
        Some(a) => {
            md.push_str(&format!(
                "Tagger `{}`{}. X rate {:.4} ({} of {} tokens, limit {}). {} transcript(s) with misaligned utterances.\n",
                a.tagger,
                a.mapping_version.map(|v| format!(" (mapping {v})")).unwrap_or_default(),
                a.x_rate,
                a.x_tokens,
                a.gated_tokens,
                a.max_x_rate,
                a.misaligned.len()
            ));
            if !a.unknown_categories.is_empty() {
                let cats: Vec<String> = a
                    .unknown_categories
                    .iter()
                    .map(|(k, v)| format!("`{k}` ×{v}"))
                    .collect();
                md.push_str(&format!("Unmapped MOR categories: {}.\n", cats.join(", ")));
            }
            md.push('\n');
        }
        None => md.push_str("Annotation report not available.\n\n"),
    }
    for &r in &cfg.representations {
        if let Some(m) = load::<MatrixMeta>(&layout.matrix_meta(r), &fhash, &mut gaps)? {
            md.push_str(&format!(
                "- `{}`: {} rows, {} features",
                rel(root, &layout.matrix(r)),
                m.rows,
                m.feature_names.len()
            ));
            if !m.dropped_columns.is_empty() {
                md.push_str(&format!(
                    "; all-missing columns dropped: {}",
                    m.dropped_columns.join(", ")
                ));
            }
            md.push('\n');
        }
    }
    md.push('\n');

    let ehash = cfg.experiment_hash();
    let mut results = Vec::new();
    for &p in &cfg.protocols {
        for &r in &cfg.representations {
            for &m in &cfg.models {
                if let Some(res) =
                    load::<EvaluationResult>(&layout.experiment(r, m, p), &ehash, &mut gaps)?
                {
                    results.push((p, r, m, res));
                }
            }
        }
    }
    for &p in &cfg.protocols {
        let title = match p {
            ProtocolKind::TranscriptSplit => "Classification, transcript-level stratified split",
            ProtocolKind::SubjectCv => "Classification, subject-level grouped cross-validation",
        };
        md.push_str(&format!("## {title}\n\n"));
        let rows: Vec<_> = results.iter().filter(|x| x.0 == p).collect();
        if rows.is_empty() {
            md.push_str("No results available.\n\n");
            continue;
        }
        md.push_str("| Representation | Model | Accuracy | Precision (macro) | Recall (macro) | F1 (macro) |\n|---|---|---|---|---|---|\n");
        for (_, r, m, res) in &rows {
            md.push_str(&format!(
                "| {r} | {} | {} | {} | {} | {} |\n",
                m.as_str(),
                metric_cell(res, "accuracy"),
                metric_cell(res, "macro_precision"),
                metric_cell(res, "macro_recall"),
                metric_cell(res, "macro_f1")
            ));
        }
        md.push('\n');
    }

    if !results.is_empty() {
        md.push_str(&format!("## Feature importance (top {})\n\n", cfg.top_k));
        for (p, r, m, res) in &results {
            md.push_str(&format!(
                "### {r}, {}, {}\n\nData: `{}`\n\n",
                m.as_str(),
                p.as_str(),
                rel(root, &layout.importance(*r, *m, *p))
            ));
            match &res.aggregate {
                Some(a) => {
                    md.push_str("| Rank | Feature | Mean | Std |\n|---|---|---|---|\n");
                    for (i, s) in a.importances.iter().take(cfg.top_k).enumerate() {
                        md.push_str(&format!(
                            "| {} | {} | {:.4} | {:.4} |\n",
                            i + 1,
                            s.feature,
                            s.mean,
                            s.std
                        ));
                    }
                }
                None => {
                    md.push_str("| Rank | Feature | Score |\n|---|---|---|\n");
                    for (i, e) in res.folds[0].importance.top().iter().enumerate() {
                        md.push_str(&format!("| {} | {} | {:.4} |\n", i + 1, e.feature, e.score));
                    }
                }
            }
            md.push('\n');
        }
    }

    let shash = cfg.stats_hash();
    for &level in &cfg.stats_levels {
        md.push_str(&format!(
            "## Statistical association, {} level\n\n",
            level_name(level)
        ));
        match load::<AssociationTable>(&layout.association_json(level), &shash, &mut gaps)? {
            Some(t) => {
                md.push_str(&format!(
                    "Representation `{}`. Plot data: `{}`\n\n",
                    cfg.stats_representation,
                    rel(root, &layout.plot(level))
                ));
                md.push_str("| Feature | Mean Control | Mean Dementia | Cliff's δ | p-value | p_adj |\n|---|---|---|---|---|---|\n");
                for row in t.rows.iter().take(cfg.top_k) {
                    md.push_str(&format!(
                        "| {} | {:.4} | {:.4} | {:.2} | {} | {} |\n",
                        row.feature,
                        row.mean_control,
                        row.mean_dementia,
                        row.cliffs_delta,
                        sci(row.p_value),
                        sci(row.p_adjusted)
                    ));
                }
                md.push('\n');
            }
            None => md.push_str("No association table available.\n\n"),
        }
    }

    if !gaps.is_empty() {
        md.push_str("## Gaps\n\n");
        for g in &gaps {
            md.push_str(&format!("- missing `{}`\n", rel(root, g)));
        }
        md.push('\n');
        if cfg.strict {
            return Err(PipelineError::MissingInputs(gaps));
        }
    }
    write_atomic(&layout.report(), md.as_bytes())?;
    Ok(ReportSummary {
        path: layout.report(),
        gaps,
    })
}
