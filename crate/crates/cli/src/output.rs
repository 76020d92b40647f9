use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        let mut f = fs::File::create(&path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        f.write_all(bytes)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Full-precision float formatting that round-trips.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

/// Everything needed to rerun a command; the only file with wall-clock data.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub version: &'static str,
    pub duration_seconds: f64,
    pub leaked_mass: Option<f64>,
    pub trials: Option<u64>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            config: serde_json::Map::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION"),
            duration_seconds: 0.0,
            leaked_mass: None,
            trials: None,
            outputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.config.insert(
            key.to_string(),
            serde_json::to_value(value).expect("plain values serialize"),
        );
    }

    pub fn finish(mut self, out: &mut OutDir, elapsed: Duration) -> Result<(), CliError> {
        self.duration_seconds = elapsed.as_secs_f64();
        self.outputs = out
            .written()
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect();
        out.json("manifest.json", &self)
    }
}
