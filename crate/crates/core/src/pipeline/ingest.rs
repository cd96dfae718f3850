use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::io::{hash_line, io_err, read_stamped_text};
use super::{stamped_json, write_atomic, Layout, PipelineError, RunConfig};
use crate::chat::{
    clean_transcript, parse_chat, read_transcript, resolve_identity, write_transcript, Label,
    LabelManifest, Transcript,
};

const CONTAINER_MAGIC: &str = "#lingmark-transcript 1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileError {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub files_found: usize,
    pub transcripts: BTreeMap<String, usize>,
    pub subjects: BTreeMap<String, usize>,
    pub total_transcripts: usize,
    pub skipped: Vec<FileError>,
}

fn rel_path(root: &Path, p: &Path) -> String {
    let rel = p.strip_prefix(root).unwrap_or(p);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

fn ingest_file(
    path: &Path,
    rel: &str,
    cfg: &RunConfig,
    manifest: Option<&LabelManifest>,
) -> Result<Transcript, String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let raw = parse_chat(&bytes).map_err(|e| e.to_string())?;
    let id = resolve_identity(&raw, rel, &cfg.cleaning.target_speaker, manifest)
        .map_err(|e| e.to_string())?;
    let mut t = clean_transcript(&raw, &id, &cfg.cleaning).map_err(|e| e.to_string())?;
    t.source_path = rel.to_string();
    Ok(t)
}

/// Parse, identify and clean every `.cha` file under the input directory.
pub fn run_ingest(cfg: &RunConfig) -> Result<IngestSummary, PipelineError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| PipelineError::Usage("ingest needs an input directory".into()))?;
    if !input.is_dir() {
        return Err(PipelineError::Corpus(format!(
            "{} is not a directory",
            input.display()
        )));
    }
    let manifest = match &cfg.labels {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            Some(
                LabelManifest::parse(&text)
                    .map_err(|e| PipelineError::Corpus(format!("{}: {e}", p.display())))?,
            )
        }
        None => None,
    };
    let mut files: Vec<_> = WalkDir::new(input)
        .sort_by_file_name()
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            e.path()
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("cha"))
        })
        .map(|e| e.into_path())
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(PipelineError::Corpus(format!(
            "no .cha files under {}",
            input.display()
        )));
    }

    let results: Vec<(String, Result<Transcript, String>)> = files
        .par_iter()
        .map(|p| {
            let rel = rel_path(input, p);
            let r = ingest_file(p, &rel, cfg, manifest.as_ref());
            (rel, r)
        })
        .collect();

    let mut corpus = Vec::new();
    let mut errors = Vec::new();
    let mut seen: BTreeMap<(String, u32), String> = BTreeMap::new();
    for (rel, r) in results {
        match r {
            Ok(t) => {
                let key = (t.subject_id.clone(), t.session_id);
                if let Some(first) = seen.get(&key) {
                    errors.push(FileError {
                        path: rel,
                        message: format!(
                            "subject {} session {} already read from {first}",
                            key.0, key.1
                        ),
                    });
                } else {
                    seen.insert(key, rel);
                    corpus.push(t);
                }
            }
            Err(message) => errors.push(FileError { path: rel, message }),
        }
    }
    if !errors.is_empty() && !cfg.skip_bad {
        return Err(PipelineError::BadFiles(errors));
    }
    if corpus.is_empty() {
        return Err(PipelineError::Corpus("no usable transcripts".into()));
    }
    corpus.sort_by(|a, b| {
        (&a.subject_id, a.session_id, &a.source_path).cmp(&(
            &b.subject_id,
            b.session_id,
            &b.source_path,
        ))
    });

    let hash = cfg.ingest_hash();
    let layout = Layout(&cfg.out_dir);
    let mut container = hash_line(&hash);
    for t in &corpus {
        let text = write_transcript(t)
            .map_err(|e| PipelineError::Corpus(format!("{}: {e}", t.source_path)))?;
        container.push_str(&text);
    }
    let mut manifest_tsv = hash_line(&hash);
    manifest_tsv.push_str("subject_id\tsession_id\tlabel\tsource\tutterances\ttokens\tpauses\n");
    for t in &corpus {
        manifest_tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            t.subject_id,
            t.session_id,
            t.label,
            t.source_path,
            t.utterances.len(),
            t.token_count(),
            t.pause_count()
        ));
    }
    let mut transcripts = BTreeMap::new();
    let mut subjects: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for l in [Label::Control, Label::Dementia] {
        transcripts.insert(l.to_string(), 0);
        subjects.insert(l.to_string(), BTreeSet::new());
    }
    for t in &corpus {
        *transcripts
            .get_mut(t.label.as_str())
            .expect("both labels present") += 1;
        subjects
            .get_mut(t.label.as_str())
            .expect("both labels present")
            .insert(&t.subject_id);
    }
    let summary = IngestSummary {
        files_found: files.len(),
        total_transcripts: corpus.len(),
        transcripts,
        subjects: subjects.into_iter().map(|(k, v)| (k, v.len())).collect(),
        skipped: errors,
    };
    write_atomic(&layout.transcripts(), container.as_bytes())?;
    write_atomic(&layout.manifest(), manifest_tsv.as_bytes())?;
    write_atomic(&layout.corpus_summary(), &stamped_json(&hash, &summary)?)?;
    Ok(summary)
}

/// Load the cleaned corpus written by [`run_ingest`].
pub fn read_corpus(cfg: &RunConfig) -> Result<Vec<Transcript>, PipelineError> {
    let path = Layout(&cfg.out_dir).transcripts();
    let text = read_stamped_text(&path, &cfg.ingest_hash())?;
    let mut out = Vec::new();
    let mut current = String::new();
    for line in text.lines().skip(1) {
        if line == CONTAINER_MAGIC && !current.is_empty() {
            out.push(read_transcript(&current).map_err(|e| io_err(&path, e))?);
            current.clear();
        }
        current.push_str(line);
        current.push('\n');
    }
    if !current.is_empty() {
        out.push(read_transcript(&current).map_err(|e| io_err(&path, e))?);
    }
    Ok(out)
}
