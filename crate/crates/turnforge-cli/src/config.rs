//! Shared flags and the optional key=value config file. Flags win over file
//! values; the file uses flat TOML keys named after the long flags
//! (`model = "backbiter"`, `grid_ms = 10`, ...).

use std::path::{Path, PathBuf};

use clap::Args;
use turnforge::turns::CueLists;

pub const CUES_ENV_VAR: &str = "TURNFORGE_CUES";

#[derive(Args, Debug, Clone)]
pub struct CommonOpts {
    /// Input transcript files or directories (CSV or JSONL)
    #[arg(long = "input", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,

    /// Output directory (created if missing)
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,

    /// Optional key=value config file; explicit flags take precedence
    #[arg(long = "config")]
    pub config: Option<PathBuf>,

    /// Worker threads for per-conversation parallelism
    #[arg(long = "jobs")]
    pub jobs: Option<usize>,

    /// Suppress progress logging on stderr
    #[arg(long = "quiet", default_value_t = false)]
    pub quiet: bool,

    /// Override the bundled cue lists (also via TURNFORGE_CUES)
    #[arg(long = "cues")]
    pub cues: Option<PathBuf>,

    /// Drop tokens before the moment both speakers are present
    #[arg(long = "trim-downtime", default_value_t = false)]
    pub trim_downtime: bool,
}

/// Flat key=value file lookup with typed getters.
pub struct FileConfig {
    table: toml::Table,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let table = match path {
            None => toml::Table::new(),
            Some(p) => {
                let raw = std::fs::read_to_string(p)
                    .map_err(|e| format!("config {}: {e}", p.display()))?;
                raw.parse::<toml::Table>()
                    .map_err(|e| format!("config {}: {e}", p.display()))?
            }
        };
        Ok(FileConfig { table })
    }

    pub fn string(&self, key: &str) -> Option<String> {
        self.table
            .get(key)
            .and_then(|v| v.as_str())
            .map(str::to_string)
    }

    pub fn integer(&self, key: &str) -> Option<i64> {
        self.table.get(key).and_then(|v| v.as_integer())
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        self.table
            .get(key)
            .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
    }

    pub fn boolean(&self, key: &str) -> Option<bool> {
        self.table.get(key).and_then(|v| v.as_bool())
    }
}

/// Resolve the cue lists: flag, then config file, then env var, then the
/// bundled defaults.
pub fn resolve_cues(flag: Option<&Path>, file: &FileConfig) -> Result<CueLists, String> {
    let path = flag
        .map(|p| p.to_path_buf())
        .or_else(|| file.string("cues").map(PathBuf::from))
        .or_else(|| std::env::var(CUES_ENV_VAR).ok().map(PathBuf::from));
    match path {
        None => Ok(CueLists::builtin()),
        Some(p) => {
            let raw = std::fs::read(&p).map_err(|e| format!("cues {}: {e}", p.display()))?;
            CueLists::from_json(&raw).map_err(|e| e.to_string())
        }
    }
}
