use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use super::PipelineError;

pub(crate) fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), PipelineError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(contents).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub(crate) fn read_text(path: &Path) -> Result<String, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingInputs(vec![path.to_path_buf()]));
    }
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Prefix for delimited text artifacts.
pub(crate) fn hash_line(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

/// Read a text artifact whose first line is `# config_hash=...` and check the hash.
pub fn read_stamped_text(path: &Path, expected: &str) -> Result<String, PipelineError> {
    let text = read_text(path)?;
    let found = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .map(|h| h.trim().to_string())
        .unwrap_or_default();
    check_hash(path, expected, &found)?;
    Ok(text)
}

/// Serialise `value` with a leading `config_hash` field.
pub fn stamped_json<T: Serialize>(hash: &str, value: &T) -> Result<Vec<u8>, PipelineError> {
    let mut v = serde_json::to_value(value).map_err(|e| PipelineError::Corpus(e.to_string()))?;
    let mut obj = serde_json::Map::new();
    obj.insert("config_hash".into(), Value::String(hash.to_string()));
    match v.as_object_mut() {
        Some(m) => obj.append(m),
        None => {
            obj.insert("value".into(), v);
        }
    }
    let mut out = serde_json::to_vec_pretty(&Value::Object(obj)).expect("json value serialises");
    out.push(b'\n');
    Ok(out)
}

pub fn read_stamped_json(path: &Path, expected: &str) -> Result<Value, PipelineError> {
    let text = read_text(path)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| io_err(path, e))?;
    let found = v
        .get("config_hash")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    check_hash(path, expected, &found)?;
    Ok(v)
}

fn check_hash(path: &Path, expected: &str, found: &str) -> Result<(), PipelineError> {
    if found != expected {
        return Err(PipelineError::ConfigMismatch {
            artifact: path.to_path_buf(),
            expected: expected.to_string(),
            found: if found.is_empty() {
                "none".into()
            } else {
                found.to_string()
            },
        });
    }
    Ok(())
}
