use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mor::category_of;
use super::{MorMappingTable, Upos};
use crate::chat::{TokenKind, Transcript};

/// `%mor` items for CHAT separators that cleaning strips from the main tier.
const SEPARATOR_CATEGORIES: &[&str] = &["cm", "end", "beg", "bq", "eq"];

/// Minimum share of utterances carrying a `%mor` tier.
pub const MIN_MOR_COVERAGE: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotateError {
    #[error("transcript has no tokens")]
    EmptyTranscript,
    #[error("%mor tier present on {covered} of {total} utterances (need {min:.0}%)", min = MIN_MOR_COVERAGE * 100.0)]
    MissingMorTier { covered: usize, total: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationReport {
    /// Utterances whose alignable tokens and `%mor` items differ in number,
    /// or that have no `%mor` tier. Their words are tagged `X`.
    pub misaligned_utterances: Vec<usize>,
    /// MOR categories missing from the mapping table, with counts.
    pub unknown_categories: BTreeMap<String, usize>,
    /// Word and terminator tokens tagged `X`.
    pub x_tokens: usize,
    /// Word and terminator tokens in total.
    pub gated_tokens: usize,
}

impl AnnotationReport {
    pub fn x_rate(&self) -> f64 {
        if self.gated_tokens == 0 {
            0.0
        } else {
            self.x_tokens as f64 / self.gated_tokens as f64
        }
    }

    pub fn merge(&mut self, other: &AnnotationReport) {
        self.x_tokens += other.x_tokens;
        self.gated_tokens += other.gated_tokens;
        for (k, v) in &other.unknown_categories {
            *self.unknown_categories.entry(k.clone()).or_default() += v;
        }
    }
}

fn alignable(kind: TokenKind, retraced: bool) -> bool {
    !retraced && matches!(kind, TokenKind::Word | TokenKind::Terminator)
}

/// Tag every token of a cleaned transcript from its `%mor` tiers.
///
/// Fillers are tagged `INTJ`, fragments and placeholders `X`, terminators
/// `PUNCT`. Remaining words align one-to-one with the `%mor` items (separator
/// items excluded). Retraced words, which `%mor` does not analyse, take the
/// most frequent tag their surface received elsewhere in the transcript, or
/// `X` if it never appears aligned.
pub fn annotate_transcript(
    t: &Transcript,
    table: &MorMappingTable,
) -> Result<(Transcript, AnnotationReport), AnnotateError> {
    if t.token_count() == 0 {
        return Err(AnnotateError::EmptyTranscript);
    }
    let covered = t
        .utterances
        .iter()
        .filter(|u| u.mor_items.is_some())
        .count();
    if (covered as f64) < MIN_MOR_COVERAGE * t.utterances.len() as f64 {
        return Err(AnnotateError::MissingMorTier {
            covered,
            total: t.utterances.len(),
        });
    }

    let mut out = t.clone();
    let mut report = AnnotationReport::default();
    let mut lexicon: HashMap<String, [usize; 17]> = HashMap::new();

    for (ui, u) in out.utterances.iter_mut().enumerate() {
        let items: Vec<&str> = u
            .mor_items
            .iter()
            .flatten()
            .map(String::as_str)
            .filter(|m| !category_of(m).is_some_and(|c| SEPARATOR_CATEGORIES.contains(&c)))
            .collect();
        let n_alignable = u
            .tokens
            .iter()
            .filter(|tok| alignable(tok.kind, tok.retraced))
            .count();
        let aligned = u.mor_items.is_some() && items.len() == n_alignable;
        if !aligned {
            report.misaligned_utterances.push(ui);
        }

        let mut next_item = items.iter();
        for tok in &mut u.tokens {
            let tag = match tok.kind {
                TokenKind::Filler => Upos::Intj,
                TokenKind::Fragment | TokenKind::Placeholder => Upos::X,
                TokenKind::Terminator => {
                    if aligned && !tok.retraced {
                        next_item.next();
                    }
                    Upos::Punct
                }
                TokenKind::Word if tok.retraced => continue,
                TokenKind::Word if !aligned => Upos::X,
                TokenKind::Word => {
                    let item = next_item.next().copied().unwrap_or("");
                    match table.lookup(item) {
                        Some(tag) => {
                            lexicon.entry(tok.surface.to_lowercase()).or_insert([0; 17])
                                [tag.index()] += 1;
                            tag
                        }
                        None => {
                            let cat = category_of(item).unwrap_or(item).to_string();
                            *report.unknown_categories.entry(cat).or_default() += 1;
                            Upos::X
                        }
                    }
                }
            };
            tok.upos = Some(tag);
        }
    }

    for u in &mut out.utterances {
        for tok in &mut u.tokens {
            if tok.upos.is_none() {
                let tag = lexicon
                    .get(&tok.surface.to_lowercase())
                    .and_then(|counts| {
                        // First maximum in tag order keeps ties deterministic.
                        let best =
                            counts
                                .iter()
                                .enumerate()
                                .fold(
                                    (0usize, 0usize),
                                    |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc },
                                );
                        (best.1 > 0).then(|| Upos::ALL[best.0])
                    })
                    .unwrap_or(Upos::X);
                tok.upos = Some(tag);
            }
            if matches!(tok.kind, TokenKind::Word | TokenKind::Terminator) {
                report.gated_tokens += 1;
                if tok.upos == Some(Upos::X) {
                    report.x_tokens += 1;
                }
            }
        }
    }
    Ok((out, report))
}
