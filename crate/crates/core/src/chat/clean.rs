use serde::{Deserialize, Serialize};

use super::{
    ChatError, Identity, RawChatFile, Terminator, Token, TokenKind, Transcript, Utterance,
};

/// Which CHAT marker classes survive cleaning.
///
/// Always stripped regardless of policy: event codes (`&=laughs`),
/// interposed words of other speakers (`&*INV:yeah`), omitted words (`0is`),
/// bracketed annotations (`[% ...]`, `[* ...]`, `[+ ...]`, `[= ...]`, ...),
/// utterance linkers (`+<`, `+^`), separators (`,` `;` `„` `‡`) and media bullets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningPolicy {
    /// `&-uh` (and legacy `&uh`) become filler tokens.
    pub keep_fillers: bool,
    /// Material scoped by `[/]` is kept as spoken.
    pub keep_repetitions: bool,
    /// Material scoped by `[//]`, `[///]`, `[/-]`, `[/?]` is kept as spoken.
    pub keep_retracings: bool,
    /// `xxx`, `yyy`, `www` are removed instead of becoming placeholder tokens.
    pub drop_unintelligible: bool,
    /// `(.)`, `(..)`, `(...)`, `(1.5)` increment the utterance pause counter.
    pub count_pauses: bool,
    /// Substitute the target of `[: target]` for the spoken form.
    pub apply_replacements: bool,
    pub target_speaker: String,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        CleaningPolicy {
            keep_fillers: true,
            keep_repetitions: true,
            keep_retracings: true,
            drop_unintelligible: true,
            count_pauses: true,
            apply_replacements: false,
            target_speaker: "PAR".to_string(),
        }
    }
}

const LEGACY_FILLERS: &[&str] = &[
    "ah", "ahh", "eh", "er", "erm", "hm", "hmm", "huh", "mhm", "mm", "uh", "uhhuh", "uhm", "uhuh",
    "um", "umm",
];

const UNINTELLIGIBLE: &[&str] = &["xxx", "yyy", "www", "xx", "yy"];

/// Keep only the target speaker's utterances and normalise their markers.
///
/// Utterances left with nothing but a terminator (for example `xxx .` with
/// unintelligible material dropped) are removed.
pub fn clean_transcript(
    raw: &RawChatFile,
    identity: &Identity,
    policy: &CleaningPolicy,
) -> Result<Transcript, ChatError> {
    let mut utterances = Vec::new();
    for tier in raw.main_tiers() {
        if tier.speaker != policy.target_speaker {
            continue;
        }
        let (tokens, pauses) = clean_main_tier(tier.content, policy);
        if !tokens.iter().any(|t| !t.is_terminator()) {
            continue;
        }
        let mor_items = tier
            .dependent("mor")
            .map(|m| m.split_whitespace().map(str::to_string).collect());
        utterances.push(Utterance {
            speaker: tier.speaker.to_string(),
            tokens,
            mor_items,
            pauses,
        });
    }
    if utterances.is_empty() {
        return Err(ChatError::NoParticipantSpeech(
            policy.target_speaker.clone(),
        ));
    }
    Ok(Transcript {
        subject_id: identity.subject_id.clone(),
        session_id: identity.session_id,
        label: identity.label,
        utterances,
        source_path: raw.path.clone(),
    })
}

enum Lexeme<'a> {
    Word(&'a str),
    Code(&'a str),
    Open,
    Close,
}

fn lex(content: &str) -> Vec<Lexeme<'_>> {
    let mut out = Vec::new();
    let mut rest = content;
    loop {
        rest = rest.trim_start();
        let Some(c) = rest.chars().next() else { break };
        match c {
            '\u{15}' => {
                let after = &rest[c.len_utf8()..];
                rest = match after.find('\u{15}') {
                    Some(end) => &after[end + 1..],
                    None => "",
                };
            }
            '[' => {
                let after = &rest[1..];
                match after.find(']') {
                    Some(end) => {
                        out.push(Lexeme::Code(after[..end].trim()));
                        rest = &after[end + 1..];
                    }
                    None => {
                        out.push(Lexeme::Code(after.trim()));
                        rest = "";
                    }
                }
            }
            '<' => {
                out.push(Lexeme::Open);
                rest = &rest[1..];
            }
            '>' => {
                out.push(Lexeme::Close);
                rest = &rest[1..];
            }
            ']' => rest = &rest[1..],
            _ => {
                let end = if c == '+' {
                    rest.find(char::is_whitespace).unwrap_or(rest.len())
                } else {
                    rest.find(|ch: char| {
                        ch.is_whitespace() || matches!(ch, '[' | ']' | '<' | '>' | '\u{15}')
                    })
                    .unwrap_or(rest.len())
                };
                out.push(Lexeme::Word(&rest[..end]));
                rest = &rest[end..];
            }
        }
    }
    out
}

enum WordClass {
    Keep(Token),
    Pause,
    Drop,
}

fn normalize_surface(s: &str) -> String {
    let base = s.split('@').next().unwrap_or("");
    let kept: String = base
        .chars()
        .filter(|c| c.is_alphanumeric() || matches!(c, '\'' | '-' | '_' | '+'))
        .collect();
    kept.trim_matches(|c| matches!(c, '-' | '+' | '_'))
        .to_string()
}

fn is_pause(w: &str) -> bool {
    w.len() > 2
        && w.starts_with('(')
        && w.ends_with(')')
        && w[1..w.len() - 1]
            .chars()
            .all(|c| c == '.' || c == ':' || c.is_ascii_digit())
}

fn classify_word(w: &str, policy: &CleaningPolicy) -> WordClass {
    if let Some(rest) = w.strip_prefix('&') {
        if rest.starts_with('=') || rest.starts_with('*') {
            return WordClass::Drop;
        }
        let (kind, body) = if let Some(b) = rest.strip_prefix('-') {
            (TokenKind::Filler, b)
        } else if let Some(b) = rest.strip_prefix('+').or_else(|| rest.strip_prefix('~')) {
            (TokenKind::Fragment, b)
        } else {
            let norm = normalize_surface(rest).to_lowercase();
            if LEGACY_FILLERS.contains(&norm.as_str()) {
                (TokenKind::Filler, rest)
            } else {
                (TokenKind::Fragment, rest)
            }
        };
        let surface = normalize_surface(body);
        if surface.is_empty() || (kind == TokenKind::Filler && !policy.keep_fillers) {
            return WordClass::Drop;
        }
        return WordClass::Keep(Token::new(surface, kind));
    }
    if Terminator::from_mark(w).is_some() {
        return WordClass::Keep(Token::new(w, TokenKind::Terminator));
    }
    if w.starts_with('+') || w.starts_with('0') {
        return WordClass::Drop;
    }
    if is_pause(w) {
        return WordClass::Pause;
    }
    let surface = normalize_surface(w);
    if surface.is_empty() || surface.starts_with('0') {
        return WordClass::Drop;
    }
    if UNINTELLIGIBLE.contains(&surface.to_lowercase().as_str()) {
        return if policy.drop_unintelligible {
            WordClass::Drop
        } else {
            WordClass::Keep(Token::new(surface.to_lowercase(), TokenKind::Placeholder))
        };
    }
    WordClass::Keep(Token::word(surface))
}

enum ScopeCode<'a> {
    Repetition,
    Retracing,
    Replacement(&'a str),
    Other,
}

fn scope_code(code: &str) -> ScopeCode<'_> {
    match code {
        "/" => ScopeCode::Repetition,
        "//" | "///" | "/-" | "/?" => ScopeCode::Retracing,
        _ => match code.strip_prefix(':') {
            Some(target) if !target.starts_with(':') => ScopeCode::Replacement(target.trim()),
            _ => ScopeCode::Other,
        },
    }
}

/// Clean one main-tier line. Returns the surviving tokens and the pause count.
pub(crate) fn clean_main_tier(content: &str, policy: &CleaningPolicy) -> (Vec<Token>, u32) {
    let mut out: Vec<Token> = Vec::new();
    let mut pauses = 0u32;
    let mut groups: Vec<usize> = Vec::new();
    // Token range the next bracketed code applies to.
    let mut scope: Option<(usize, usize)> = None;

    for lexeme in lex(content) {
        match lexeme {
            Lexeme::Open => {
                groups.push(out.len());
                scope = None;
            }
            Lexeme::Close => {
                scope = groups.pop().map(|start| (start.min(out.len()), out.len()));
            }
            Lexeme::Word(w) => match classify_word(w, policy) {
                WordClass::Keep(tok) => {
                    out.push(tok);
                    scope = Some((out.len() - 1, out.len()));
                }
                WordClass::Pause => {
                    if policy.count_pauses {
                        pauses += 1;
                    }
                }
                WordClass::Drop => scope = None,
            },
            Lexeme::Code(code) => {
                let Some((start, end)) = scope else { continue };
                if end != out.len() {
                    continue;
                }
                match scope_code(code) {
                    ScopeCode::Repetition | ScopeCode::Retracing => {
                        let keep = match scope_code(code) {
                            ScopeCode::Repetition => policy.keep_repetitions,
                            _ => policy.keep_retracings,
                        };
                        if keep {
                            for t in &mut out[start..end] {
                                if !t.is_terminator() {
                                    t.retraced = true;
                                }
                            }
                        } else {
                            out.truncate(start);
                            scope = None;
                        }
                    }
                    ScopeCode::Replacement(target) if policy.apply_replacements => {
                        out.truncate(start);
                        for w in target.split_whitespace() {
                            if let WordClass::Keep(tok) = classify_word(w, policy) {
                                out.push(tok);
                            }
                        }
                        scope = Some((start.min(out.len()), out.len()));
                    }
                    _ => {}
                }
            }
        }
    }
    (out, pauses)
}
