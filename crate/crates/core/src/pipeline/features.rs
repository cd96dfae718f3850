use std::collections::BTreeMap;
use std::fs;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::io::io_err;
use super::{read_corpus, stamped_json, write_atomic, Layout, PipelineError, RunConfig, TagSource};
use crate::chat::{TokenKind, Transcript};
use crate::features::{build_feature_matrix, FeatureError, Representation};
use crate::pos::{
    annotate_transcript, load_external_tags, parse_tag_file, AnnotationReport, MorMappingTable,
    Upos,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateFailure {
    pub source: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSummary {
    pub tagger: String,
    pub mapping_version: Option<String>,
    pub x_rate: f64,
    pub max_x_rate: f64,
    pub x_tokens: usize,
    pub gated_tokens: usize,
    pub unknown_categories: BTreeMap<String, usize>,
    /// Source path to misaligned utterance indices.
    pub misaligned: BTreeMap<String, Vec<usize>>,
    pub failures: Vec<GateFailure>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixMeta {
    pub representation: Representation,
    pub feature_names: Vec<String>,
    pub dropped_columns: Vec<String>,
    pub rows: usize,
    pub control_rows: usize,
    pub dementia_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturesSummary {
    pub annotation: AnnotationSummary,
    pub matrices: Vec<MatrixMeta>,
}

fn tag_path(cfg: &RunConfig, source: &str) -> std::path::PathBuf {
    let stem = source.strip_suffix(".cha").unwrap_or(source);
    cfg.tag_dir
        .as_ref()
        .expect("validated")
        .join(format!("{stem}.tags"))
}

fn tag_corpus(
    cfg: &RunConfig,
    corpus: &[Transcript],
) -> Result<(Vec<Transcript>, AnnotationSummary), PipelineError> {
    let table = match &cfg.mor_table {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            MorMappingTable::parse(&text)
                .map_err(|e| PipelineError::Usage(format!("{}: {e}", p.display())))?
        }
        None => MorMappingTable::bundled(),
    };
    let results: Vec<Result<(Transcript, AnnotationReport), String>> = corpus
        .par_iter()
        .map(|t| match cfg.tagger {
            TagSource::Mor => annotate_transcript(t, &table).map_err(|e| e.to_string()),
            TagSource::External => {
                let p = tag_path(cfg, &t.source_path);
                let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
                let recs = parse_tag_file(&text).map_err(|e| format!("{}: {e}", p.display()))?;
                let tagged =
                    load_external_tags(t, &recs).map_err(|e| format!("{}: {e}", p.display()))?;
                let mut rep = AnnotationReport::default();
                for tok in tagged.tokens() {
                    if matches!(tok.kind, TokenKind::Word | TokenKind::Terminator) {
                        rep.gated_tokens += 1;
                        rep.x_tokens += (tok.upos == Some(Upos::X)) as usize;
                    }
                }
                Ok((tagged, rep))
            }
        })
        .collect();
    let mut tagged = Vec::new();
    let mut total = AnnotationReport::default();
    let mut misaligned = BTreeMap::new();
    let mut failures = Vec::new();
    for (t, r) in corpus.iter().zip(results) {
        match r {
            Ok((tt, rep)) => {
                total.merge(&rep);
                if !rep.misaligned_utterances.is_empty() {
                    misaligned.insert(t.source_path.clone(), rep.misaligned_utterances.clone());
                }
                tagged.push(tt);
            }
            Err(error) => failures.push(GateFailure {
                source: t.source_path.clone(),
                error,
            }),
        }
    }
    let x_rate = total.x_rate();
    let summary = AnnotationSummary {
        tagger: match cfg.tagger {
            TagSource::Mor => "mor".into(),
            TagSource::External => "external".into(),
        },
        mapping_version: (cfg.tagger == TagSource::Mor).then(|| table.version.clone()),
        x_rate,
        max_x_rate: cfg.max_x_rate,
        x_tokens: total.x_tokens,
        gated_tokens: total.gated_tokens,
        unknown_categories: total.unknown_categories,
        misaligned,
        passed: failures.is_empty() && x_rate <= cfg.max_x_rate,
        failures,
    };
    Ok((tagged, summary))
}

/// Tag the cleaned corpus, enforce the quality gate and write one feature
/// matrix per configured representation.
pub fn run_features(cfg: &RunConfig) -> Result<FeaturesSummary, PipelineError> {
    let corpus = read_corpus(cfg)?;
    let hash = cfg.features_hash();
    let layout = Layout(&cfg.out_dir);
    let (tagged, annotation) = tag_corpus(cfg, &corpus)?;
    write_atomic(&layout.annotation(), &stamped_json(&hash, &annotation)?)?;
    if !annotation.passed {
        let mut why = Vec::new();
        if !annotation.failures.is_empty() {
            why.push(format!(
                "{} transcript(s) could not be tagged (first: {}: {})",
                annotation.failures.len(),
                annotation.failures[0].source,
                annotation.failures[0].error
            ));
        }
        if annotation.x_rate > annotation.max_x_rate {
            why.push(format!(
                "X rate {:.4} exceeds {}",
                annotation.x_rate, annotation.max_x_rate
            ));
        }
        return Err(PipelineError::AnnotationGate(format!(
            "{}; see {}",
            why.join("; "),
            layout.annotation().display()
        )));
    }
    let mut matrices = Vec::new();
    for &r in &cfg.representations {
        let m = build_feature_matrix(&tagged, r, &cfg.features).map_err(|e| match e {
            FeatureError::NotTagged => PipelineError::AnnotationGate(e.to_string()),
            other => PipelineError::Corpus(other.to_string()),
        })?;
        let csv = m
            .to_csv(&[("config_hash".into(), hash.clone())])
            .map_err(|e| PipelineError::Corpus(e.to_string()))?;
        let labels = m.labels();
        let meta = MatrixMeta {
            representation: r,
            feature_names: m.feature_names.clone(),
            dropped_columns: m.dropped_columns.clone(),
            rows: m.rows.len(),
            control_rows: labels.iter().filter(|&&c| c == 0).count(),
            dementia_rows: labels.iter().filter(|&&c| c == 1).count(),
        };
        write_atomic(&layout.matrix(r), csv.as_bytes())?;
        write_atomic(&layout.matrix_meta(r), &stamped_json(&hash, &meta)?)?;
        matrices.push(meta);
    }
    Ok(FeaturesSummary {
        annotation,
        matrices,
    })
}
