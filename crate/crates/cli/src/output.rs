//! Artifact assembly helpers.
//!
//! Artifacts are built fully in memory and written in one shot at the end of
//! each command, so a computation that fails midway leaves no partial files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

/// CSV float field with 17 significant digits; round-trips exactly.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> serde_json::Result<String> {
    serde_json::to_string_pretty(value).map(|mut s| {
        s.push('\n');
        s
    })
}

/// One assembled artifact awaiting the final write-out.
pub struct Artifact {
    pub path: PathBuf,
    pub contents: String,
}

impl Artifact {
    pub fn new(dir: &Path, name: &str, contents: String) -> Self {
        Artifact {
            path: dir.join(name),
            contents,
        }
    }
}

/// Write every artifact, creating the output directory if needed.
pub fn write_all(artifacts: &[Artifact]) -> io::Result<()> {
    for artifact in artifacts {
        if let Some(parent) = artifact.path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(&artifact.path, &artifact.contents)?;
    }
    Ok(())
}
