//! Report files: atomic writes and 9-significant-digit JSON.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dynup::sim::round9;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// When set, the process aborts after writing a temporary file and before
/// renaming it into place. Used to test that interrupted runs leave no
/// final report behind.
pub const ABORT_BEFORE_RENAME_ENV: &str = "DYNUP_ABORT_BEFORE_RENAME";

/// Output directory with write-then-rename semantics.
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Io {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    /// Writes `contents` to `<root>/<name>` through a temporary sibling.
    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let target = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let io = |source| CliError::Io {
            path: tmp.clone(),
            source,
        };
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(contents.as_bytes()).map_err(io)?;
        f.sync_all().map_err(io)?;
        drop(f);
        if std::env::var_os(ABORT_BEFORE_RENAME_ENV).is_some() {
            std::process::abort();
        }
        fs::rename(&tmp, &target).map_err(|source| CliError::Io {
            path: target.clone(),
            source,
        })?;
        Ok(target)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        self.write(name, &json9(value))
    }
}

/// Pretty JSON with every non-integer number rounded to 9 significant digits.
pub fn json9<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).expect("value serializes");
    s.push('\n');
    s
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().and_then(|x| serde_json::Number::from_f64(round9(x))) {
                *n = r;
            }
        }
        Value::Array(xs) => xs.iter_mut().for_each(round_value),
        Value::Object(m) => m.values_mut().for_each(round_value),
        _ => {}
    }
}

/// File-name-safe form of a policy label.
pub fn tag(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
        .collect()
}
