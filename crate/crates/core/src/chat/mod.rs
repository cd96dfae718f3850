//! CHAT (`.cha`) transcript parsing and cleaning.
//!
//! Parsing ([`parse_chat`]) only splits a file into header records and tier
//! lines; everything speaker- or marker-related happens in
//! [`clean_transcript`], which turns a [`RawChatFile`] into a [`Transcript`]
//! holding only the target speaker's tokens.

mod clean;
mod format;
mod identity;
mod parse;

pub use clean::{clean_transcript, CleaningPolicy};
pub use format::{read_transcript, write_transcript, FormatError};
pub use identity::{resolve_identity, Identity, LabelManifest};
pub use parse::parse_chat;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pos::Upos;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChatError {
    #[error("input is not valid UTF-8 (byte offset {0})")]
    InvalidUtf8(usize),
    #[error("missing @Begin header")]
    MissingBegin,
    #[error("missing @End header")]
    MissingEnd,
    #[error("malformed line {line}: {reason}")]
    MalformedTier { line: usize, reason: String },
    #[error("no utterances from speaker {0} after cleaning")]
    NoParticipantSpeech(String),
    #[error("cannot resolve subject id for {0}")]
    UnresolvableSubject(String),
    #[error("cannot resolve diagnosis label for {0}")]
    UnresolvableLabel(String),
}

/// A `@Name:\tvalue` header record. Value is empty for bare headers such as `@Begin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderLine {
    pub name: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TierCode {
    /// `*PAR`, `*INV`, ... (stored without the `*`).
    Main(String),
    /// `%mor`, `%gra`, ... (stored without the `%`).
    Dependent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TierLine {
    pub code: TierCode,
    pub content: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawChatFile {
    pub path: String,
    pub headers: Vec<HeaderLine>,
    /// Tier lines in file order. A dependent tier always follows a main tier.
    pub tiers: Vec<TierLine>,
}

/// A main tier together with the dependent tiers that follow it.
#[derive(Debug, Clone, Copy)]
pub struct MainTier<'a> {
    pub speaker: &'a str,
    pub content: &'a str,
    pub line: usize,
    pub dependents: &'a [TierLine],
}

impl<'a> MainTier<'a> {
    pub fn dependent(&self, code: &str) -> Option<&'a str> {
        self.dependents.iter().find_map(|t| match &t.code {
            TierCode::Dependent(c) if c == code => Some(t.content.as_str()),
            _ => None,
        })
    }
}

impl RawChatFile {
    pub fn header(&self, name: &str) -> impl Iterator<Item = &HeaderLine> {
        let name = name.to_string();
        self.headers.iter().filter(move |h| h.name == name)
    }

    pub fn main_tiers(&self) -> Vec<MainTier<'_>> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.tiers.len() {
            let t = &self.tiers[i];
            let mut j = i + 1;
            while j < self.tiers.len() && matches!(self.tiers[j].code, TierCode::Dependent(_)) {
                j += 1;
            }
            if let TierCode::Main(speaker) = &t.code {
                out.push(MainTier {
                    speaker,
                    content: &t.content,
                    line: t.line,
                    dependents: &self.tiers[i + 1..j],
                });
            }
            i = j;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Word,
    Filler,
    Fragment,
    Terminator,
    /// Unintelligible or untranscribed material (`xxx`, `yyy`, `www`) kept by policy.
    Placeholder,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub kind: TokenKind,
    /// Inside a repetition or retracing scope (`[/]`, `[//]`). Such material
    /// is spoken but not analysed on `%mor`.
    pub retraced: bool,
    pub upos: Option<Upos>,
}

impl Token {
    pub fn new(surface: impl Into<String>, kind: TokenKind) -> Self {
        Token {
            surface: surface.into(),
            kind,
            retraced: false,
            upos: None,
        }
    }

    pub fn word(surface: impl Into<String>) -> Self {
        Token::new(surface, TokenKind::Word)
    }

    pub fn tagged(mut self, upos: Upos) -> Self {
        self.upos = Some(upos);
        self
    }

    pub fn is_terminator(&self) -> bool {
        self.kind == TokenKind::Terminator
    }
}

/// Sentence-final mark category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminator {
    Period,
    Question,
    Exclamation,
    TrailingOff,
    Interruption,
    SelfInterruption,
    Other,
}

impl Terminator {
    pub fn from_mark(mark: &str) -> Option<Terminator> {
        use Terminator::*;
        Some(match mark {
            "." => Period,
            "?" => Question,
            "!" => Exclamation,
            "+..." | "+..?" => TrailingOff,
            "+/." | "+/?" | "+!?" | "+\"/." => Interruption,
            "+//." | "+//?" => SelfInterruption,
            "+\"." | "+." | "+=." => Other,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub speaker: String,
    pub tokens: Vec<Token>,
    /// Whitespace-split `%mor` items, when the tier was present.
    pub mor_items: Option<Vec<String>>,
    /// Pauses seen on the main tier when `count_pauses` is set. Never emitted as tokens.
    pub pauses: u32,
}

impl Utterance {
    pub fn terminator(&self) -> Option<Terminator> {
        self.tokens
            .iter()
            .rev()
            .find(|t| t.is_terminator())
            .and_then(|t| Terminator::from_mark(&t.surface))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Control,
    Dementia,
}

impl Label {
    /// Binary encoding used by the classifiers: dementia is the positive class.
    pub fn as_class(self) -> u8 {
        match self {
            Label::Control => 0,
            Label::Dementia => 1,
        }
    }

    pub fn from_class(c: u8) -> Label {
        if c == 0 {
            Label::Control
        } else {
            Label::Dementia
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Control => "control",
            Label::Dementia => "dementia",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "control" => Ok(Label::Control),
            "dementia" => Ok(Label::Dementia),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transcript {
    pub subject_id: String,
    pub session_id: u32,
    pub label: Label,
    pub utterances: Vec<Utterance>,
    pub source_path: String,
}

impl Transcript {
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.utterances.iter().flat_map(|u| u.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.utterances.iter().map(|u| u.tokens.len()).sum()
    }

    pub fn pause_count(&self) -> u64 {
        self.utterances.iter().map(|u| u.pauses as u64).sum()
    }

    pub fn is_tagged(&self) -> bool {
        self.tokens().all(|t| t.upos.is_some())
    }

    /// Render the token stream back to CHAT main-tier syntax wrapped in a
    /// minimal file. Cleaning the result with the same policy reproduces the
    /// token stream.
    pub fn to_chat(&self) -> String {
        let mut out = String::from("@UTF8\n@Begin\n");
        let speakers: std::collections::BTreeSet<&str> =
            self.utterances.iter().map(|u| u.speaker.as_str()).collect();
        let participants: Vec<String> = speakers
            .iter()
            .map(|s| format!("{s} Participant"))
            .collect();
        out.push_str(&format!("@Participants:\t{}\n", participants.join(", ")));
        for u in &self.utterances {
            out.push('*');
            out.push_str(&u.speaker);
            out.push_str(":\t");
            let mut parts: Vec<String> = Vec::new();
            let mut i = 0;
            while i < u.tokens.len() {
                if u.tokens[i].retraced {
                    let start = i;
                    while i < u.tokens.len() && u.tokens[i].retraced {
                        i += 1;
                    }
                    let inner: Vec<String> =
                        u.tokens[start..i].iter().map(render_chat_token).collect();
                    parts.push(format!("<{}> [/]", inner.join(" ")));
                } else {
                    parts.push(render_chat_token(&u.tokens[i]));
                    i += 1;
                }
            }
            for _ in 0..u.pauses {
                parts.push("(.)".to_string());
            }
            out.push_str(&parts.join(" "));
            out.push('\n');
            if let Some(mor) = &u.mor_items {
                out.push_str("%mor:\t");
                out.push_str(&mor.join(" "));
                out.push('\n');
            }
        }
        out.push_str("@End\n");
        out
    }
}

fn render_chat_token(t: &Token) -> String {
    match t.kind {
        TokenKind::Filler => format!("&-{}", t.surface),
        TokenKind::Fragment => format!("&+{}", t.surface),
        _ => t.surface.clone(),
    }
}
