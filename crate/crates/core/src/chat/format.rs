//! Line-oriented canonical format for cleaned transcripts.
//!
//! ```text
//! #lingmark-transcript 1
//! @subject	001
//! @session	2
//! @label	dementia
//! @source	Pitt/dementia/001-2.cha
//! *PAR	~uh <the <boy the boy $.
//! %mor	det:art|the n|boy .
//! %upos	INTJ DET NOUN DET NOUN PUNCT
//! %pauses	1
//! ```
//!
//! One utterance per `*` line, tokens separated by single spaces. Token
//! prefixes: `<` retraced, then `~` filler, `^` fragment, `#` placeholder,
//! `$` terminator. A word starting with a reserved character is escaped
//! with `\`. `%mor`, `%upos` and `%pauses` lines belong to the preceding
//! utterance; `_` marks an untagged token.
#![allow(clippy::tabs_in_doc_comments)]

use std::fmt::Write as _;

use thiserror::Error;

use super::{Label, Token, TokenKind, Transcript, Utterance};
use crate::pos::Upos;

const MAGIC: &str = "#lingmark-transcript 1";
const RESERVED: &[char] = &['<', '~', '^', '#', '$', '\\'];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("token `{0}` cannot be written (empty or contains whitespace)")]
    Unwritable(String),
}

fn syntax(line: usize, reason: impl Into<String>) -> FormatError {
    FormatError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn encode_token(t: &Token) -> Result<String, FormatError> {
    if t.surface.is_empty() || t.surface.chars().any(char::is_whitespace) {
        return Err(FormatError::Unwritable(t.surface.clone()));
    }
    let mut s = String::new();
    if t.retraced {
        s.push('<');
    }
    match t.kind {
        TokenKind::Filler => s.push('~'),
        TokenKind::Fragment => s.push('^'),
        TokenKind::Placeholder => s.push('#'),
        TokenKind::Terminator => s.push('$'),
        TokenKind::Word => {
            if t.surface.starts_with(RESERVED) {
                s.push('\\');
            }
        }
    }
    s.push_str(&t.surface);
    Ok(s)
}

fn decode_token(s: &str) -> Option<Token> {
    let (retraced, s) = match s.strip_prefix('<') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let mut chars = s.chars();
    let (kind, surface) = match chars.next()? {
        '~' => (TokenKind::Filler, chars.as_str()),
        '^' => (TokenKind::Fragment, chars.as_str()),
        '#' => (TokenKind::Placeholder, chars.as_str()),
        '$' => (TokenKind::Terminator, chars.as_str()),
        '\\' => (TokenKind::Word, chars.as_str()),
        _ => (TokenKind::Word, s),
    };
    if surface.is_empty() {
        return None;
    }
    Some(Token {
        surface: surface.to_string(),
        kind,
        retraced,
        upos: None,
    })
}

pub fn write_transcript(t: &Transcript) -> Result<String, FormatError> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "@subject\t{}", t.subject_id);
    let _ = writeln!(out, "@session\t{}", t.session_id);
    let _ = writeln!(out, "@label\t{}", t.label);
    let _ = writeln!(out, "@source\t{}", t.source_path);
    for u in &t.utterances {
        let toks: Result<Vec<String>, _> = u.tokens.iter().map(encode_token).collect();
        let _ = writeln!(out, "*{}\t{}", u.speaker, toks?.join(" "));
        if let Some(mor) = &u.mor_items {
            let _ = writeln!(out, "%mor\t{}", mor.join(" "));
        }
        if u.tokens.iter().any(|t| t.upos.is_some()) {
            let tags: Vec<&str> = u
                .tokens
                .iter()
                .map(|t| t.upos.map(Upos::as_str).unwrap_or("_"))
                .collect();
            let _ = writeln!(out, "%upos\t{}", tags.join(" "));
        }
        if u.pauses > 0 {
            let _ = writeln!(out, "%pauses\t{}", u.pauses);
        }
    }
    Ok(out)
}

pub fn read_transcript(text: &str) -> Result<Transcript, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        _ => return Err(syntax(1, "missing format header")),
    }
    let mut subject = None;
    let mut session = None;
    let mut label = None;
    let mut source = None;
    let mut utterances: Vec<Utterance> = Vec::new();

    for (no, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('\t').unwrap_or((line, ""));
        if let Some(field) = key.strip_prefix('@') {
            match field {
                "subject" => subject = Some(value.to_string()),
                "session" => {
                    session = Some(
                        value
                            .parse::<u32>()
                            .map_err(|_| syntax(no, "bad session"))?,
                    )
                }
                "label" => label = Some(value.parse::<Label>().map_err(|e| syntax(no, e))?),
                "source" => source = Some(value.to_string()),
                other => return Err(syntax(no, format!("unknown field @{other}"))),
            }
        } else if let Some(speaker) = key.strip_prefix('*') {
            let tokens = value
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| decode_token(s).ok_or_else(|| syntax(no, format!("bad token `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            utterances.push(Utterance {
                speaker: speaker.to_string(),
                tokens,
                mor_items: None,
                pauses: 0,
            });
        } else if let Some(dep) = key.strip_prefix('%') {
            let u = utterances
                .last_mut()
                .ok_or_else(|| syntax(no, "dependent line before any utterance"))?;
            match dep {
                "mor" => u.mor_items = Some(value.split_whitespace().map(str::to_string).collect()),
                "upos" => {
                    let tags: Vec<&str> = value.split_whitespace().collect();
                    if tags.len() != u.tokens.len() {
                        return Err(syntax(no, "tag count differs from token count"));
                    }
                    for (tok, tag) in u.tokens.iter_mut().zip(tags) {
                        tok.upos = if tag == "_" {
                            None
                        } else {
                            Some(tag.parse::<Upos>().map_err(|e| syntax(no, e.to_string()))?)
                        };
                    }
                }
                "pauses" => {
                    u.pauses = value.parse().map_err(|_| syntax(no, "bad pause count"))?;
                }
                other => return Err(syntax(no, format!("unknown dependent line %{other}"))),
            }
        } else {
            return Err(syntax(no, "unrecognised line"));
        }
    }

    Ok(Transcript {
        subject_id: subject.ok_or_else(|| syntax(0, "missing @subject"))?,
        session_id: session.ok_or_else(|| syntax(0, "missing @session"))?,
        label: label.ok_or_else(|| syntax(0, "missing @label"))?,
        utterances,
        source_path: source.unwrap_or_default(),
    })
}
