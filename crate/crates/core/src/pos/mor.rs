use thiserror::Error;

use super::Upos;
use crate::chat::Terminator;

const BUNDLED: &str = include_str!("../../resources/mor_upos.tsv");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MorTableError {
    #[error("line {0}: expected `category<TAB>TAG`")]
    Syntax(usize),
    #[error("line {line}: {tag}")]
    Tag { line: usize, tag: String },
    #[error("category `{0}` is mapped more than once")]
    Duplicate(String),
    #[error("missing `version` line")]
    NoVersion,
}

/// MOR category → UPOS table, matched longest-prefix-first on `:` boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MorMappingTable {
    pub version: String,
    /// Sorted by descending pattern length so the first hit is the longest.
    entries: Vec<(String, Upos)>,
}

impl MorMappingTable {
    /// The table shipped with the crate (`resources/mor_upos.tsv`).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled MOR table is well-formed")
    }

    pub fn parse(text: &str) -> Result<Self, MorTableError> {
        let mut version = None;
        let mut entries: Vec<(String, Upos)> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t').map(str::trim);
            let (Some(key), Some(val), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(MorTableError::Syntax(i + 1));
            };
            if key == "version" {
                version = Some(val.to_string());
                continue;
            }
            let tag = val.parse::<Upos>().map_err(|e| MorTableError::Tag {
                line: i + 1,
                tag: e.to_string(),
            })?;
            if entries.iter().any(|(k, _)| k == key) {
                return Err(MorTableError::Duplicate(key.to_string()));
            }
            entries.push((key.to_string(), tag));
        }
        entries.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        Ok(MorMappingTable {
            version: version.ok_or(MorTableError::NoVersion)?,
            entries,
        })
    }

    pub fn entries(&self) -> &[(String, Upos)] {
        &self.entries
    }

    /// Tag for a MOR item, or `None` when its category is not in the table.
    pub fn lookup(&self, mor_code: &str) -> Option<Upos> {
        let code = mor_code.trim();
        if Terminator::from_mark(code).is_some() {
            return Some(Upos::Punct);
        }
        let category = category_of(code)?;
        self.entries
            .iter()
            .find(|(pat, _)| {
                category == pat
                    || (category.len() > pat.len()
                        && category.starts_with(pat.as_str())
                        && category.as_bytes()[pat.len()] == b':')
            })
            .map(|(_, tag)| *tag)
    }
}

/// Category part of a MOR item: `pro:sub|he~aux|be&3S` → `pro:sub`.
/// Post-clitics after `~` are ignored; the host word decides the tag.
pub(crate) fn category_of(code: &str) -> Option<&str> {
    let host = code.split('~').next()?;
    let host = host.trim_start_matches('+');
    let (cat, _) = host.split_once('|')?;
    if cat.is_empty() {
        None
    } else {
        Some(cat)
    }
}

/// Map one MOR item to a UPOS tag; unknown categories become `X`.
pub fn map_mor_to_upos(mor_code: &str, table: &MorMappingTable) -> Upos {
    table.lookup(mor_code).unwrap_or(Upos::X)
}
