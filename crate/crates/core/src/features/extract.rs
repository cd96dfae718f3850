use std::collections::{BTreeMap, HashMap};

use super::{
    compute_mattr, compute_ttr, feature_names, FeatureConfig, FeatureError, FeatureVector,
    Representation, TranscriptRef,
};
use crate::chat::{Token, Transcript};
use crate::pos::Upos;

struct StreamItem {
    text: String,
    punct: bool,
}

fn is_punct(tok: &Token) -> bool {
    tok.is_terminator() || tok.upos == Some(Upos::Punct)
}

fn stream_item(
    tok: &Token,
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<StreamItem, FeatureError> {
    let punct = is_punct(tok);
    let text = match r {
        Representation::Raw => tok.surface.to_lowercase(),
        Representation::PosEnhanced => {
            let tag = tok.upos.ok_or(FeatureError::NotTagged)?;
            if cfg.is_content(tag) {
                tok.surface.to_lowercase()
            } else {
                tag.as_str().to_string()
            }
        }
        Representation::PosOnly => tok
            .upos
            .ok_or(FeatureError::NotTagged)?
            .as_str()
            .to_string(),
    };
    Ok(StreamItem { text, punct })
}

fn stream(
    t: &Transcript,
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<Vec<StreamItem>, FeatureError> {
    t.tokens().map(|tok| stream_item(tok, r, cfg)).collect()
}

fn word_stream(
    t: &Transcript,
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<Vec<String>, FeatureError> {
    Ok(stream(t, r, cfg)?
        .into_iter()
        .filter(|i| !i.punct)
        .map(|i| i.text)
        .collect())
}

/// Token stream of a transcript under a representation.
///
/// RAW drops terminators (they only delimit sentences); the tag-based
/// representations keep them as `PUNCT`.
pub fn build_token_stream(
    t: &Transcript,
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<Vec<String>, FeatureError> {
    if t.token_count() == 0 {
        return Err(FeatureError::EmptyTranscript);
    }
    let items = stream(t, r, cfg)?;
    Ok(match r {
        Representation::Raw => items
            .into_iter()
            .filter(|i| !i.punct)
            .map(|i| i.text)
            .collect(),
        _ => items.into_iter().map(|i| i.text).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Structural {
    pub num_tokens: usize,
    pub num_types: usize,
    pub num_sentences: usize,
    pub mean_sent_len: f64,
}

/// Sentences end at terminators or at the end of an utterance; a sentence
/// needs at least one non-punctuation token to count.
fn count_sentences(t: &Transcript) -> usize {
    let mut sentences = 0;
    for u in &t.utterances {
        let mut open = false;
        for tok in &u.tokens {
            if tok.is_terminator() {
                if open {
                    sentences += 1;
                }
                open = false;
            } else if !is_punct(tok) {
                open = true;
            }
        }
        if open {
            sentences += 1;
        }
    }
    sentences
}

pub fn compute_structural(
    t: &Transcript,
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<Structural, FeatureError> {
    let words = word_stream(t, r, cfg)?;
    if words.is_empty() {
        return Err(FeatureError::EmptyTranscript);
    }
    let mut distinct: Vec<&String> = words.iter().collect();
    distinct.sort();
    distinct.dedup();
    let num_sentences = count_sentences(t);
    Ok(Structural {
        num_tokens: words.len(),
        num_types: distinct.len(),
        num_sentences,
        mean_sent_len: words.len() as f64 / num_sentences as f64,
    })
}

fn tag_counts(t: &Transcript) -> Result<([usize; 17], usize), FeatureError> {
    let mut counts = [0usize; 17];
    let mut total = 0;
    for tok in t.tokens() {
        counts[tok.upos.ok_or(FeatureError::NotTagged)?.index()] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(FeatureError::EmptyTranscript);
    }
    Ok((counts, total))
}

/// Share of each tag among all tokens, punctuation included. All 17 tags are present.
pub fn compute_pos_proportions(t: &Transcript) -> Result<BTreeMap<Upos, f64>, FeatureError> {
    let (counts, total) = tag_counts(t)?;
    Ok(Upos::ALL
        .iter()
        .map(|tag| (*tag, counts[tag.index()] as f64 / total as f64))
        .collect())
}

pub fn compute_content_word_ratio(
    t: &Transcript,
    cfg: &FeatureConfig,
) -> Result<f64, FeatureError> {
    let mut words = 0usize;
    let mut content = 0usize;
    for tok in t.tokens() {
        let tag = tok.upos.ok_or(FeatureError::NotTagged)?;
        if is_punct(tok) {
            continue;
        }
        words += 1;
        if cfg.is_content(tag) {
            content += 1;
        }
    }
    if words == 0 {
        return Err(FeatureError::NoWordTokens);
    }
    Ok(content as f64 / words as f64)
}

fn cosine(a: &HashMap<String, f64>, b: &HashMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(0.0, 1.0)
}

/// Mean cosine similarity of content-word term-frequency vectors of adjacent
/// utterances. Pairs with an empty side are skipped; `None` when no pair remains.
pub fn compute_semantic_coherence(
    t: &Transcript,
    cfg: &FeatureConfig,
) -> Result<Option<f64>, FeatureError> {
    let mut vectors = Vec::with_capacity(t.utterances.len());
    for u in &t.utterances {
        let mut tf: HashMap<String, f64> = HashMap::new();
        for tok in &u.tokens {
            let tag = tok.upos.ok_or(FeatureError::NotTagged)?;
            if cfg.is_content(tag) && !is_punct(tok) {
                *tf.entry(tok.surface.to_lowercase()).or_default() += 1.0;
            }
        }
        vectors.push(tf);
    }
    let sims: Vec<f64> = vectors
        .windows(2)
        .filter(|w| !w[0].is_empty() && !w[1].is_empty())
        .map(|w| cosine(&w[0], &w[1]))
        .collect();
    if sims.is_empty() {
        return Ok(None);
    }
    Ok(Some(sims.iter().sum::<f64>() / sims.len() as f64))
}

/// Shannon entropy of the tag distribution normalised by `ln 17`.
pub fn compute_pos_diversity(t: &Transcript) -> Result<f64, FeatureError> {
    let (counts, total) = tag_counts(t)?;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total as f64;
            -p * p.ln()
        })
        .sum();
    Ok((h / (Upos::ALL.len() as f64).ln()).clamp(0.0, 1.0))
}

/// Full feature vector; column order follows [`feature_names`].
///
/// POS_ONLY has no lexical identity, so `content_word_ratio` and
/// `semantic_coherence` are emitted as missing there.
pub fn extract_feature_vector(
    t: &Transcript,
    r: Representation,
    cfg: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    if !t.is_tagged() {
        return Err(FeatureError::NotTagged);
    }
    let s = compute_structural(t, r, cfg)?;
    let words = word_stream(t, r, cfg)?;
    let ttr = compute_ttr(&words)?;
    let mattr = compute_mattr(&words, cfg.mattr_window)?;
    let (cwr, coherence) = match r {
        Representation::PosOnly => (None, None),
        _ => (
            Some(compute_content_word_ratio(t, cfg)?),
            compute_semantic_coherence(t, cfg)?,
        ),
    };
    let mut values = vec![
        Some(s.num_tokens as f64),
        Some(s.num_types as f64),
        Some(ttr),
        Some(mattr),
        Some(s.num_sentences as f64),
        Some(s.mean_sent_len),
        cwr,
        coherence,
        Some(compute_pos_diversity(t)?),
    ];
    if r != Representation::Raw {
        let props = compute_pos_proportions(t)?;
        values.extend(Upos::ALL.iter().map(|tag| Some(props[tag])));
    }
    Ok(FeatureVector {
        names: feature_names(r),
        values,
        transcript: TranscriptRef::of(t),
    })
}
