use thiserror::Error;

use super::Upos;
use crate::chat::Transcript;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TagFileError {
    #[error("line {0}: expected `token<TAB>TAG`")]
    Syntax(usize),
    #[error("line {line}: unknown tag name `{tag}`")]
    UnknownTagName { line: usize, tag: String },
    #[error("tag file has {found} {what}, transcript has {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("utterance {utterance}: terminator `{surface}` tagged {tag}, expected PUNCT")]
    TerminatorNotPunct {
        utterance: usize,
        surface: String,
        tag: Upos,
    },
}

/// One block of `(token, tag)` records per utterance.
pub type TagRecords = Vec<Vec<(String, Upos)>>;

/// Parse `token<TAB>TAG` lines; blank lines separate utterances.
pub fn parse_tag_file(text: &str) -> Result<TagRecords, TagFileError> {
    let mut blocks: TagRecords = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (tok, tag) = line.split_once('\t').ok_or(TagFileError::Syntax(i + 1))?;
        let tag = tag.trim();
        let upos = tag
            .parse::<Upos>()
            .map_err(|_| TagFileError::UnknownTagName {
                line: i + 1,
                tag: tag.to_string(),
            })?;
        current.push((tok.to_string(), upos));
    }
    if !current.is_empty() {
        blocks.push(current);
    }
    Ok(blocks)
}

/// Attach externally produced tags positionally. Token text in the file is
/// not compared with the transcript; only counts must agree.
pub fn load_external_tags(
    t: &Transcript,
    records: &TagRecords,
) -> Result<Transcript, TagFileError> {
    if records.len() != t.utterances.len() {
        return Err(TagFileError::LengthMismatch {
            what: "utterances",
            expected: t.utterances.len(),
            found: records.len(),
        });
    }
    let mut out = t.clone();
    for (ui, (u, block)) in out.utterances.iter_mut().zip(records).enumerate() {
        if block.len() != u.tokens.len() {
            return Err(TagFileError::LengthMismatch {
                what: "tokens",
                expected: u.tokens.len(),
                found: block.len(),
            });
        }
        for (tok, (_, tag)) in u.tokens.iter_mut().zip(block) {
            if tok.is_terminator() && *tag != Upos::Punct {
                return Err(TagFileError::TerminatorNotPunct {
                    utterance: ui,
                    surface: tok.surface.clone(),
                    tag: *tag,
                });
            }
            tok.upos = Some(*tag);
        }
    }
    Ok(out)
}
