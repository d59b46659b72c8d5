//! Shared batch machinery: input discovery, per-conversation isolation,
//! deterministic ordering, and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use turnforge::transcript::{parse_streams, TranscriptFormat, TranscriptStream};

pub enum RunStatus {
    Clean,
    PartialFailure,
}

/// Per-conversation outcome retained for the manifest.
pub struct ConversationOutcome<T> {
    pub conversation_id: String,
    pub result: Result<T, String>,
}

#[derive(Serialize)]
struct ManifestEntry {
    conversation_id: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
pub struct Manifest {
    tool_version: &'static str,
    command: String,
    config: serde_json::Value,
    conversations: Vec<ManifestEntry>,
    wall_time_ms: u128,
}

/// Sidecars this tool writes next to transcripts; never transcripts
/// themselves.
const RESERVED_NAMES: &[&str] = &["ground_truth.json", "grouping.csv", "manifest.json"];

/// Collect transcript files from the given paths; directories contribute
/// their (non-recursive) .csv/.jsonl entries in sorted order, skipping this
/// tool's own sidecar files.
pub fn discover_inputs(paths: &[PathBuf]) -> Result<Vec<PathBuf>, String> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(|e| format!("{}: {e}", path.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|x| x.to_str()),
                        Some("csv") | Some("jsonl")
                    )
                })
                .filter(|p| {
                    p.file_name()
                        .and_then(|n| n.to_str())
                        .map(|n| !RESERVED_NAMES.contains(&n))
                        .unwrap_or(true)
                })
                .collect();
            entries.sort();
            files.extend(entries);
        } else if path.is_file() {
            files.push(path.clone());
        } else {
            return Err(format!("{}: no such file or directory", path.display()));
        }
    }
    if files.is_empty() {
        return Err("no input transcripts found".into());
    }
    Ok(files)
}

/// Parse every input file and index conversations by id. Parse failures and
/// duplicate conversation ids become per-conversation failures rather than
/// aborting the batch.
pub fn load_conversations(
    files: &[PathBuf],
) -> (Vec<(String, TranscriptStream)>, Vec<(String, String)>) {
    let mut streams: BTreeMap<String, TranscriptStream> = BTreeMap::new();
    let mut failures: Vec<(String, String)> = Vec::new();
    for file in files {
        let bytes = match std::fs::read(file) {
            Ok(b) => b,
            Err(e) => {
                failures.push((file.display().to_string(), e.to_string()));
                continue;
            }
        };
        let format = TranscriptFormat::from_path(file);
        match parse_streams(&bytes, format) {
            Ok(parsed) => {
                for stream in parsed {
                    let id = stream.conversation_id.clone();
                    match streams.entry(id) {
                        std::collections::btree_map::Entry::Occupied(slot) => failures.push((
                            slot.key().clone(),
                            "duplicate conversation_id across inputs".into(),
                        )),
                        std::collections::btree_map::Entry::Vacant(slot) => {
                            slot.insert(stream);
                        }
                    }
                }
            }
            Err(e) => failures.push((file.display().to_string(), e.to_string())),
        }
    }
    (streams.into_iter().collect(), failures)
}

/// Run `work` over conversations in parallel, keeping output order sorted by
/// conversation id so results are byte-identical at any parallelism degree.
pub fn map_conversations<T: Send, F>(
    conversations: Vec<(String, TranscriptStream)>,
    jobs: usize,
    work: F,
) -> Vec<ConversationOutcome<T>>
where
    F: Fn(&TranscriptStream) -> Result<T, String> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        conversations
            .par_iter()
            .map(|(id, stream)| ConversationOutcome {
                conversation_id: id.clone(),
                result: work(stream),
            })
            .collect()
    })
}

pub struct ManifestBuilder {
    command: String,
    config: serde_json::Value,
    started: Instant,
    entries: Vec<ManifestEntry>,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            config,
            started: Instant::now(),
            entries: Vec::new(),
        }
    }

    pub fn record_ok(&mut self, conversation_id: &str) {
        self.entries.push(ManifestEntry {
            conversation_id: conversation_id.to_string(),
            status: "ok",
            error: None,
        });
    }

    pub fn record_error(&mut self, conversation_id: &str, error: &str) {
        self.entries.push(ManifestEntry {
            conversation_id: conversation_id.to_string(),
            status: "error",
            error: Some(error.to_string()),
        });
    }

    /// Write manifest.json and return the overall run status.
    pub fn finish(mut self, out_dir: &Path) -> Result<RunStatus, String> {
        self.entries
            .sort_by(|a, b| a.conversation_id.cmp(&b.conversation_id));
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: self.config,
            conversations: self.entries,
            wall_time_ms: self.started.elapsed().as_millis(),
        };
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| e.to_string())?;
        std::fs::write(&path, json).map_err(|e| format!("{}: {e}", path.display()))?;
        if manifest.conversations.iter().any(|e| e.status == "error") {
            Ok(RunStatus::PartialFailure)
        } else {
            Ok(RunStatus::Clean)
        }
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))
}

pub fn log(quiet: bool, message: &str) {
    if !quiet {
        eprintln!("{message}");
    }
}
