use std::collections::BTreeMap;
use std::path::Path;

use super::{ChatError, Label, RawChatFile};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Identity {
    pub subject_id: String,
    pub session_id: u32,
    pub label: Label,
}

/// Explicit label assignments keyed by file stem (`001-2`) or by the path
/// as given. Entries here take precedence over the directory layout.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelManifest {
    entries: BTreeMap<String, Label>,
}

impl LabelManifest {
    pub fn insert(&mut self, key: impl Into<String>, label: Label) {
        self.entries.insert(key.into(), label);
    }

    /// Parse `key<TAB or comma>label` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut m = LabelManifest::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, label) = line
                .split_once('\t')
                .or_else(|| line.split_once(','))
                .ok_or_else(|| format!("line {}: expected `file<TAB>label`", i + 1))?;
            let label = label
                .parse::<Label>()
                .map_err(|e| format!("line {}: {e}", i + 1))?;
            m.insert(key.trim(), label);
        }
        Ok(m)
    }

    pub fn lookup(&self, path: &str) -> Option<Label> {
        if let Some(l) = self.entries.get(path) {
            return Some(*l);
        }
        let stem = Path::new(path).file_stem()?.to_str()?;
        self.entries.get(stem).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Subject id from the `@ID` record of the target speaker.
///
/// `@ID` fields are `lang|corpus|code|age|sex|group|SES|role|education|custom|`.
/// The speaker code (`PAR`) names a role, not a person, so the subject id is
/// read from the trailing custom field.
fn subject_from_id_header(raw: &RawChatFile, target_speaker: &str) -> Option<String> {
    raw.header("ID").find_map(|h| {
        let fields: Vec<&str> = h.value.split('|').map(str::trim).collect();
        if fields.get(2) != Some(&target_speaker) {
            return None;
        }
        fields
            .get(9)
            .filter(|s| !s.is_empty())
            .map(|s| s.to_string())
    })
}

fn label_from_path(path: &str) -> Option<Label> {
    Path::new(path)
        .parent()?
        .components()
        .rev()
        .find_map(|c| c.as_os_str().to_str()?.parse::<Label>().ok())
}

/// Resolve subject, session and diagnosis label for one file.
///
/// Subject: `@ID` custom field when present, else the file stem before the
/// first `-`. Session: the stem suffix after the `-` (0 when absent).
/// Label: manifest entry, else the nearest `control`/`dementia` directory.
pub fn resolve_identity(
    raw: &RawChatFile,
    path: &str,
    target_speaker: &str,
    manifest: Option<&LabelManifest>,
) -> Result<Identity, ChatError> {
    let stem = Path::new(path)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("");
    let (stem_subject, stem_session) = match stem.split_once('-') {
        Some((s, rest)) => (s, rest.parse::<u32>().ok()),
        None => (stem, None),
    };
    let subject_id = match subject_from_id_header(raw, target_speaker) {
        Some(s) => s,
        None if !stem_subject.is_empty() => stem_subject.to_string(),
        None => return Err(ChatError::UnresolvableSubject(path.to_string())),
    };
    let label = manifest
        .and_then(|m| m.lookup(path))
        .or_else(|| label_from_path(path))
        .ok_or_else(|| ChatError::UnresolvableLabel(path.to_string()))?;
    Ok(Identity {
        subject_id,
        session_id: stem_session.unwrap_or(0),
        label,
    })
}
