//! Output directory handling: every command writes its artifacts atomically
//! (temp file in the same directory, then rename) and finishes with a
//! `manifest.json` recording the command, seed, config hash, git revision,
//! and the files it produced. Artifacts contain no wall-clock data, so a
//! re-run with the same seed is byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub const GIT_REVISION: &str = env!("ECORL_GIT_REVISION");

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub config_sha256: String,
    pub git_revision: String,
    pub outputs: Vec<String>,
    /// Small command-specific summary values (final returns, fold locations,
    /// fitted thresholds, ...). Keys are sorted on serialization.
    pub details: serde_json::Map<String, serde_json::Value>,
}

/// Writes `contents` to `dir/name` via a temp file and rename, so readers
/// never observe a half-written artifact.
pub fn atomic_write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let tmp = dir.join(format!("{name}.tmp"));
    let target = dir.join(name);
    fs::write(&tmp, contents)
        .map_err(|e| CliError::runtime(format!("write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, &target)
        .map_err(|e| CliError::runtime(format!("rename to {}: {e}", target.display())))?;
    Ok(())
}

/// Accumulates artifacts for one command run.
pub struct OutDir {
    root: PathBuf,
    outputs: Vec<String>,
    details: serde_json::Map<String, serde_json::Value>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::validation(format!("create {}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf(), outputs: Vec::new(), details: Default::default() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        atomic_write(&self.root, name, contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.details.insert(key.to_string(), value.into());
    }

    /// Writes the resolved config echo and the manifest. Call last.
    pub fn finish(mut self, command: &str, seed: u64, config: &RunConfig) -> Result<(), CliError> {
        self.write("config.toml", &config.canonical_toml())?;
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            config_sha256: config.sha256(),
            git_revision: GIT_REVISION.to_string(),
            outputs: std::mem::take(&mut self.outputs),
            details: std::mem::take(&mut self.details),
        };
        let text = serde_json::to_string_pretty(&manifest)
            .expect("manifest serializes")
            + "\n";
        atomic_write(&self.root, "manifest.json", &text)
    }
}

/// Formats one CSV row; floats use Rust's shortest round-trip notation so
/// output is platform-stable and diff-friendly.
pub fn csv_row<T: std::fmt::Display>(cells: &[T]) -> String {
    let mut line = String::new();
    for (i, cell) in cells.iter().enumerate() {
        if i > 0 {
            line.push(',');
        }
        line.push_str(&cell.to_string());
    }
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        atomic_write(dir.path(), "a.csv", "x,y\n1,2\n").unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("a.csv")).unwrap(), "x,y\n1,2\n");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        assert_eq!(names, vec!["a.csv"]);
    }

    #[test]
    fn manifest_lists_outputs_in_write_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(dir.path()).unwrap();
        out.write("first.csv", "a\n").unwrap();
        out.write("second.csv", "b\n").unwrap();
        out.detail("answer", 42);
        out.finish("demo", 7, &RunConfig::default()).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap())
                .unwrap();
        assert_eq!(manifest["command"], "demo");
        assert_eq!(manifest["seed"], 7);
        assert_eq!(manifest["details"]["answer"], 42);
        assert_eq!(
            manifest["outputs"],
            serde_json::json!(["first.csv", "second.csv", "config.toml"])
        );
        assert_eq!(manifest["git_revision"], GIT_REVISION);
    }

    #[test]
    fn csv_rows_join_with_commas() {
        assert_eq!(csv_row(&[1.5, 0.25]), "1.5,0.25\n");
        assert_eq!(csv_row(&["a", "b"]), "a,b\n");
    }
}
