use serde::{Deserialize, Serialize};

use super::io::{hash_line, io_err, read_stamped_text};
use super::{stamped_json, write_atomic, Layout, PipelineError, ProtocolKind, RunConfig};
use crate::eval::{evaluate, EvalError, EvaluationResult, ModelSpec, METRIC_NAMES};
use crate::features::{FeatureMatrix, Representation};
use crate::models::ModelKind;

pub(crate) fn load_matrix(
    cfg: &RunConfig,
    r: Representation,
) -> Result<FeatureMatrix, PipelineError> {
    let path = Layout(&cfg.out_dir).matrix(r);
    let text = read_stamped_text(&path, &cfg.features_hash())?;
    let (m, _) = FeatureMatrix::from_csv(&text).map_err(|e| io_err(&path, e))?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub representation: Representation,
    pub model: ModelKind,
    pub protocol: ProtocolKind,
    /// `(metric, mean, std)`; std is 0 for a single split.
    pub metrics: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub runs: Vec<RunSummary>,
}

fn eval_err(e: EvalError) -> PipelineError {
    match e {
        EvalError::Leakage(m) => PipelineError::Leakage(m),
        other => PipelineError::Corpus(other.to_string()),
    }
}

fn summarise(
    res: &EvaluationResult,
    r: Representation,
    m: ModelKind,
    p: ProtocolKind,
) -> RunSummary {
    let metrics = METRIC_NAMES
        .iter()
        .map(|&name| match &res.aggregate {
            Some(a) => (name.to_string(), a.metrics[name].mean, a.metrics[name].std),
            None => (
                name.to_string(),
                res.folds[0].metrics.get(name).expect("known metric"),
                0.0,
            ),
        })
        .collect();
    RunSummary {
        representation: r,
        model: m,
        protocol: p,
        metrics,
    }
}

fn importance_tsv(hash: &str, res: &EvaluationResult, top_k: usize) -> String {
    let mut out = hash_line(hash);
    match &res.aggregate {
        Some(a) => {
            out.push_str("rank\tfeature\tmean\tstd\n");
            for (i, s) in a.importances.iter().take(top_k).enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    i + 1,
                    s.feature,
                    s.mean,
                    s.std
                ));
            }
        }
        None => {
            out.push_str("rank\tfeature\tscore\tsign\n");
            for (i, e) in res.folds[0].importance.top().iter().enumerate() {
                let sign = e.sign.map(|s| s.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\n",
                    i + 1,
                    e.feature,
                    e.score,
                    sign
                ));
            }
        }
    }
    out
}

/// Train and evaluate every configured representation, model and protocol.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentSummary, PipelineError> {
    let hash = cfg.experiment_hash();
    let layout = Layout(&cfg.out_dir);
    let spec = ModelSpec {
        logistic: cfg.logistic.clone(),
        forest: cfg.forest_config(),
        top_k: cfg.top_k,
    };
    let mut runs = Vec::new();
    for &r in &cfg.representations {
        let matrix = load_matrix(cfg, r)?;
        if let Some(row) = matrix
            .rows
            .iter()
            .find(|row| row.id.subject_id.trim().is_empty())
        {
            if cfg.protocols.contains(&ProtocolKind::SubjectCv) {
                return Err(PipelineError::Leakage(format!(
                    "row from {} has no subject id; grouped folds cannot be formed",
                    row.id.source
                )));
            }
        }
        for &m in &cfg.models {
            for &p in &cfg.protocols {
                let res = evaluate(&matrix, &cfg.protocol(p), m, &spec).map_err(eval_err)?;
                write_atomic(&layout.experiment(r, m, p), &stamped_json(&hash, &res)?)?;
                write_atomic(
                    &layout.importance(r, m, p),
                    importance_tsv(&hash, &res, cfg.top_k).as_bytes(),
                )?;
                runs.push(summarise(&res, r, m, p));
            }
        }
    }
    let mut tsv = hash_line(&hash);
    tsv.push_str("representation\tmodel\tprotocol");
    for n in METRIC_NAMES {
        tsv.push_str(&format!("\t{n}\t{n}_std"));
    }
    tsv.push('\n');
    for run in &runs {
        tsv.push_str(&format!(
            "{}\t{}\t{}",
            run.representation,
            run.model.as_str(),
            run.protocol.as_str()
        ));
        for (_, mean, std) in &run.metrics {
            tsv.push_str(&format!("\t{mean}\t{std}"));
        }
        tsv.push('\n');
    }
    write_atomic(&layout.experiment_summary(), tsv.as_bytes())?;
    Ok(ExperimentSummary { runs })
}
