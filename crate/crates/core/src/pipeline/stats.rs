use serde::{Deserialize, Serialize};

use super::experiment::load_matrix;
use super::io::hash_line;
use super::{stamped_json, write_atomic, Layout, PipelineError, RunConfig};
use crate::stats::{association_table, AssociationTable, StatsError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub tables: Vec<AssociationTable>,
}

/// Delimited table with the columns feature, mean_control, mean_dementia,
/// cliffs_delta, p_value, p_adj.
pub fn association_tsv(hash: &str, t: &AssociationTable) -> String {
    let mut out = hash_line(hash);
    out.push_str("feature\tmean_control\tmean_dementia\tcliffs_delta\tp_value\tp_adj\n");
    for r in &t.rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.feature, r.mean_control, r.mean_dementia, r.cliffs_delta, r.p_value, r.p_adjusted
        ));
    }
    out
}

/// Bar-chart data: each delta and the delta divided by the largest |delta|.
pub fn plot_tsv(hash: &str, t: &AssociationTable) -> String {
    let max = t
        .rows
        .iter()
        .map(|r| r.cliffs_delta.abs())
        .fold(0.0, f64::max);
    let mut out = hash_line(hash);
    out.push_str("feature\tdelta\tdelta_over_max_abs\n");
    for r in &t.rows {
        let norm = if max > 0.0 { r.cliffs_delta / max } else { 0.0 };
        out.push_str(&format!("{}\t{}\t{}\n", r.feature, r.cliffs_delta, norm));
    }
    out
}

/// Association tables at every configured level.
pub fn run_stats(cfg: &RunConfig) -> Result<StatsSummary, PipelineError> {
    let matrix = load_matrix(cfg, cfg.stats_representation)?;
    let hash = cfg.stats_hash();
    let layout = Layout(&cfg.out_dir);
    let mut tables = Vec::new();
    for &level in &cfg.stats_levels {
        let t =
            association_table(&matrix, level, cfg.subject_aggregation).map_err(|e| match e {
                StatsError::EmptyClass(_) | StatsError::InconsistentLabel(_) => {
                    PipelineError::StatsPrecondition(e.to_string())
                }
                other => PipelineError::Corpus(other.to_string()),
            })?;
        write_atomic(
            &layout.association(level),
            association_tsv(&hash, &t).as_bytes(),
        )?;
        write_atomic(&layout.plot(level), plot_tsv(&hash, &t).as_bytes())?;
        write_atomic(&layout.association_json(level), &stamped_json(&hash, &t)?)?;
        tables.push(t);
    }
    Ok(StatsSummary { tables })
}
