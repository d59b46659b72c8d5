//! `features`: turn-level feature table with corpus-level weights and
//! decile columns, plus optional keyword topic counts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use turnforge::features::{
    conversation_weights, decile_bin, topic_frequency, turn_features, BackchannelUnit,
};
use turnforge::transcript::{validate_dyad, TranscriptStream};
use turnforge::turns::{CueLists, Turn, TurnModel};

use crate::config::{resolve_cues, CommonOpts, FileConfig};
use crate::pipeline::{self, RunStatus};

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub common: CommonOpts,

    /// Turn model: audiophile, cliffhanger, or backbiter
    #[arg(long = "model")]
    pub model: Option<String>,

    /// Embedding sidecar JSONL: {conversation_id, turn_id, vector: [...]}
    #[arg(long = "embeddings")]
    pub embeddings: Option<PathBuf>,

    /// Count back-channel activity as registry events or words
    #[arg(long = "bc-unit", value_parser = ["events", "words"])]
    pub bc_unit: Option<String>,

    /// Topic dictionary JSON: {"topic": ["keyword", ...], ...}
    #[arg(long = "topics")]
    pub topics: Option<PathBuf>,

    /// Topic bucket width in milliseconds
    #[arg(long = "topic-window-ms")]
    pub topic_window_ms: Option<i64>,

    /// Match topic keywords as substrings instead of whole words
    #[arg(long = "substring", default_value_t = false)]
    pub substring: bool,
}

/// One row of the feature table.
#[derive(Clone)]
pub struct FeatureRow {
    pub conversation_id: String,
    pub speaker_id: String,
    pub turn_id: i64,
    pub pause_s: Option<f64>,
    pub duration_s: f64,
    pub words_per_second: f64,
    pub backchannel_rate: f64,
    pub cosine_sim_prior: Option<f64>,
    pub euclid_dist_prior: Option<f64>,
    pub weight: f64,
}

pub const FEATURE_NAMES: [&str; 6] = [
    "pause_s",
    "duration_s",
    "words_per_second",
    "backchannel_rate",
    "cosine_sim_prior",
    "euclid_dist_prior",
];

impl FeatureRow {
    pub fn value(&self, feature: &str) -> Option<f64> {
        match feature {
            "pause_s" => self.pause_s,
            "duration_s" => Some(self.duration_s),
            "words_per_second" => Some(self.words_per_second),
            "backchannel_rate" => Some(self.backchannel_rate),
            "cosine_sim_prior" => self.cosine_sim_prior,
            "euclid_dist_prior" => self.euclid_dist_prior,
            _ => None,
        }
    }
}

pub type EmbeddingMap = BTreeMap<(String, i64), Vec<f64>>;

pub fn load_embeddings(path: &Path) -> Result<EmbeddingMap, String> {
    #[derive(serde::Deserialize)]
    struct Line {
        conversation_id: String,
        turn_id: i64,
        vector: Vec<f64>,
    }
    let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut map = EmbeddingMap::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(line)
            .map_err(|e| format!("{} line {}: {e}", path.display(), i + 1))?;
        map.insert((parsed.conversation_id, parsed.turn_id), parsed.vector);
    }
    Ok(map)
}

pub struct FeaturePipeline<'a> {
    pub model: &'a dyn TurnModel,
    pub bc_unit: BackchannelUnit,
    pub embeddings: Option<&'a EmbeddingMap>,
    pub trim: bool,
}

impl FeaturePipeline<'_> {
    /// Segment one conversation and compute its feature rows (weights are a
    /// corpus-level pass, filled later).
    pub fn conversation_rows(
        &self,
        stream: &TranscriptStream,
    ) -> Result<(Vec<FeatureRow>, Vec<Turn>), String> {
        let stream = if self.trim {
            stream.clone().trim_downtime()
        } else {
            stream.clone()
        };
        let stream = validate_dyad(stream).map_err(|e| e.to_string())?;
        let turns = self.model.segment(&stream);
        let per_turn_embeddings: Option<BTreeMap<i64, Vec<f64>>> = self.embeddings.map(|map| {
            turns
                .iter()
                .filter_map(|t| {
                    map.get(&(stream.conversation_id.clone(), t.turn_id))
                        .map(|v| (t.turn_id, v.clone()))
                })
                .collect()
        });
        let features = turn_features(&turns, per_turn_embeddings.as_ref(), self.bc_unit)
            .map_err(|e| e.to_string())?;
        let rows = features
            .into_iter()
            .map(|f| FeatureRow {
                conversation_id: stream.conversation_id.clone(),
                speaker_id: f.speaker_id,
                turn_id: f.turn_id,
                pause_s: f.pause_s,
                duration_s: f.duration_s,
                words_per_second: f.words_per_second,
                backchannel_rate: f.backchannel_rate,
                cosine_sim_prior: f.cosine_sim_prior,
                euclid_dist_prior: f.euclid_dist_prior,
                weight: 0.0,
            })
            .collect();
        Ok((rows, turns))
    }
}

/// Fill per-row weights so each (conversation, speaker) sums to one.
pub fn fill_weights(rows: &mut [FeatureRow]) {
    let keys: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r.conversation_id.clone(), r.speaker_id.clone()))
        .collect();
    for (row, w) in rows.iter_mut().zip(conversation_weights(&keys)) {
        row.weight = w;
    }
}

/// Corpus-level decile assignments per feature, aligned to `rows`; `None`
/// where the feature value is absent.
pub fn corpus_deciles(rows: &[FeatureRow]) -> BTreeMap<String, Vec<Option<u8>>> {
    let mut out = BTreeMap::new();
    for feature in FEATURE_NAMES {
        let mut values = Vec::new();
        let mut weights = Vec::new();
        let mut present = Vec::with_capacity(rows.len());
        for row in rows {
            match row.value(feature) {
                Some(v) => {
                    values.push(v);
                    weights.push(row.weight);
                    present.push(true);
                }
                None => present.push(false),
            }
        }
        if values.is_empty() {
            continue;
        }
        let binning = match decile_bin(&values, &weights) {
            Ok(b) => b,
            Err(_) => continue,
        };
        let mut assignments = Vec::with_capacity(rows.len());
        let mut cursor = 0;
        for &has in &present {
            if has {
                assignments.push(Some(binning.assignments[cursor]));
                cursor += 1;
            } else {
                assignments.push(None);
            }
        }
        out.insert(feature.to_string(), assignments);
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn run(args: FeaturesArgs) -> Result<RunStatus, String> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let model_name = args
        .model
        .or_else(|| file.string("model"))
        .unwrap_or_else(|| "backbiter".to_string());
    let cues: CueLists = resolve_cues(args.common.cues.as_deref(), &file)?;
    let model = turnforge::turns::by_name(&model_name, &cues)
        .ok_or_else(|| format!("unknown model {model_name:?}"))?;
    let bc_unit = match args
        .bc_unit
        .or_else(|| file.string("bc_unit"))
        .unwrap_or_else(|| "events".into())
        .as_str()
    {
        "words" => BackchannelUnit::Words,
        _ => BackchannelUnit::Events,
    };
    let jobs = args
        .common
        .jobs
        .or_else(|| file.integer("jobs").map(|j| j as usize))
        .unwrap_or(1);
    let trim = args.common.trim_downtime || file.boolean("trim_downtime").unwrap_or(false);
    let topic_window = args
        .topic_window_ms
        .or_else(|| file.integer("topic_window_ms"))
        .unwrap_or(60_000);

    let embeddings = match &args.embeddings {
        Some(p) => Some(load_embeddings(p)?),
        None => None,
    };
    let topics: Option<BTreeMap<String, Vec<String>>> = match &args.topics {
        Some(p) => {
            let raw = std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))?;
            Some(serde_json::from_slice(&raw).map_err(|e| format!("{}: {e}", p.display()))?)
        }
        None => None,
    };

    pipeline::ensure_out_dir(&args.common.out_dir)?;
    let files = pipeline::discover_inputs(&args.common.input)?;
    let (conversations, failures) = pipeline::load_conversations(&files);

    let mut manifest = pipeline::ManifestBuilder::new(
        "features",
        serde_json::json!({
            "model": model_name,
            "bc_unit": match bc_unit { BackchannelUnit::Events => "events", BackchannelUnit::Words => "words" },
            "jobs": jobs,
            "trim_downtime": trim,
            "topic_window_ms": topic_window,
            "substring": args.substring,
        }),
    );
    for (id, error) in &failures {
        manifest.record_error(id, error);
    }

    let pipeline_cfg = FeaturePipeline {
        model: model.as_ref(),
        bc_unit,
        embeddings: embeddings.as_ref(),
        trim,
    };
    let outcomes = pipeline::map_conversations(conversations, jobs, |stream| {
        pipeline_cfg.conversation_rows(stream)
    });

    let mut rows: Vec<FeatureRow> = Vec::new();
    let mut topic_counts: BTreeMap<(i64, String), u64> = BTreeMap::new();
    let mut turn_sets: Vec<(String, Vec<turnforge::turns::Turn>)> = Vec::new();
    for outcome in &outcomes {
        match &outcome.result {
            Ok((conv_rows, turns)) => {
                rows.extend(conv_rows.iter().cloned());
                if let Some(dictionary) = &topics {
                    for ((bucket, topic), count) in
                        topic_frequency(turns, dictionary, topic_window, args.substring)
                    {
                        *topic_counts.entry((bucket, topic)).or_insert(0) += count;
                    }
                }
                if model_name == "backbiter" {
                    turn_sets.push((outcome.conversation_id.clone(), turns.clone()));
                }
                manifest.record_ok(&outcome.conversation_id);
            }
            Err(e) => manifest.record_error(&outcome.conversation_id, e),
        }
    }
    fill_weights(&mut rows);
    let deciles = corpus_deciles(&rows);

    let mut csv = String::from(
        "conversation_id,speaker_id,turn_id,pause_s,duration_s,words_per_second,backchannel_rate,cosine_sim_prior,euclid_dist_prior,weight",
    );
    for feature in FEATURE_NAMES {
        csv.push_str(",decile_");
        csv.push_str(feature);
    }
    csv.push('\n');
    for (i, row) in rows.iter().enumerate() {
        write!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            row.conversation_id,
            row.speaker_id,
            row.turn_id,
            fmt_opt(row.pause_s),
            row.duration_s,
            row.words_per_second,
            row.backchannel_rate,
            fmt_opt(row.cosine_sim_prior),
            fmt_opt(row.euclid_dist_prior),
            row.weight
        )
        .expect("string write");
        for feature in FEATURE_NAMES {
            let cell = deciles
                .get(feature)
                .and_then(|a| a[i])
                .map(|b| b.to_string())
                .unwrap_or_default();
            csv.push(',');
            csv.push_str(&cell);
        }
        csv.push('\n');
    }
    std::fs::write(args.common.out_dir.join("features.csv"), csv).map_err(|e| e.to_string())?;

    if topics.is_some() {
        let mut csv = String::from("bucket_left_ms,topic,count\n");
        for ((bucket, topic), count) in &topic_counts {
            writeln!(csv, "{},{},{}", bucket * topic_window, topic, count).expect("string write");
        }
        std::fs::write(args.common.out_dir.join("topics.csv"), csv).map_err(|e| e.to_string())?;
    }

    // corpus-level back-channel digest rides along when the model keeps a
    // registry
    if !turn_sets.is_empty() {
        if let Ok(stats) = turnforge::turns::backchannel_stats(&turn_sets) {
            std::fs::write(
                args.common.out_dir.join("backchannel_stats.json"),
                serde_json::to_string_pretty(&stats).expect("stats serialize"),
            )
            .map_err(|e| e.to_string())?;
        }
    }

    pipeline::log(
        args.common.quiet,
        &format!("features: {} row(s)", rows.len()),
    );
    manifest.finish(&args.common.out_dir)
}
