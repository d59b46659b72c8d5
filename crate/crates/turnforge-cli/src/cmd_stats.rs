//! `stats`: group-comparison report over the full pipeline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use turnforge::features::BackchannelUnit;
use turnforge::stats::{
    compare_groups, CompareConfig, FeatureDesign, GroupComparison, GroupDesign, GroupRow,
};

use crate::cmd_features::{
    fill_weights, load_embeddings, FeaturePipeline, FeatureRow, FEATURE_NAMES,
};
use crate::config::{resolve_cues, CommonOpts, FileConfig};
use crate::pipeline::{self, RunStatus};

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: CommonOpts,

    /// Grouping CSV with header conversation_id,speaker_id,group
    #[arg(long = "grouping")]
    pub grouping: PathBuf,

    /// Turn model: audiophile, cliffhanger, or backbiter
    #[arg(long = "model")]
    pub model: Option<String>,

    /// Winsorization level for unbounded features
    #[arg(long = "winsor-level")]
    pub winsor_level: Option<f64>,

    /// Use a t critical value (G-1 df) for confidence intervals
    #[arg(long = "ci-t", default_value_t = false)]
    pub ci_t: bool,

    /// Embedding sidecar JSONL
    #[arg(long = "embeddings")]
    pub embeddings: Option<PathBuf>,

    /// Count back-channel activity as registry events or words
    #[arg(long = "bc-unit", value_parser = ["events", "words"])]
    pub bc_unit: Option<String>,
}

type GroupingMap = BTreeMap<(String, String), String>;

fn load_grouping(path: &Path) -> Result<GroupingMap, String> {
    let raw = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(raw.as_slice());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| format!("grouping file missing column {name}"))
    };
    let (ci, si, gi) = (col("conversation_id")?, col("speaker_id")?, col("group")?);
    let mut map = GroupingMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        map.insert(
            (record[ci].to_string(), record[si].to_string()),
            record[gi].to_string(),
        );
    }
    Ok(map)
}

/// Report row shape: one line per (feature, contrast).
#[derive(serde::Serialize)]
struct ReportRow {
    feature: String,
    contrast: String,
    diff: f64,
    ci: [f64; 2],
    p_mean: f64,
    p_distr: f64,
    p_adj_mean: f64,
    p_adj_distr: f64,
    n_turns: usize,
    n_clusters: usize,
}

pub fn render_report_rows(comparisons: &[GroupComparison]) -> serde_json::Value {
    let rows: Vec<ReportRow> = comparisons
        .iter()
        .map(|c| ReportRow {
            feature: c.feature.clone(),
            contrast: c.contrast.clone(),
            diff: c.mean.diff,
            ci: [c.mean.ci_low, c.mean.ci_high],
            p_mean: c.mean.p_value,
            p_distr: c.distribution.p_value,
            p_adj_mean: c.p_adj_mean,
            p_adj_distr: c.p_adj_distr,
            n_turns: c.n_turns,
            n_clusters: c.n_clusters,
        })
        .collect();
    serde_json::to_value(rows).expect("report serializes")
}

pub fn run(args: StatsArgs) -> Result<RunStatus, String> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let model_name = args
        .model
        .or_else(|| file.string("model"))
        .unwrap_or_else(|| "backbiter".to_string());
    let cues = resolve_cues(args.common.cues.as_deref(), &file)?;
    let model = turnforge::turns::by_name(&model_name, &cues)
        .ok_or_else(|| format!("unknown model {model_name:?}"))?;
    let winsor_level = args
        .winsor_level
        .or_else(|| file.float("winsor_level"))
        .unwrap_or(turnforge::stats::DEFAULT_WINSOR_LEVEL);
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

    let grouping = load_grouping(&args.grouping)?;
    let embeddings = match &args.embeddings {
        Some(p) => Some(load_embeddings(p)?),
        None => None,
    };

    pipeline::ensure_out_dir(&args.common.out_dir)?;
    let files = pipeline::discover_inputs(&args.common.input)?;
    let (conversations, failures) = pipeline::load_conversations(&files);

    let mut manifest = pipeline::ManifestBuilder::new(
        "stats",
        serde_json::json!({
            "model": model_name,
            "winsor_level": winsor_level,
            "ci_t": args.ci_t,
            "jobs": jobs,
            "trim_downtime": trim,
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
        pipeline_cfg.conversation_rows(stream).map(|(rows, _)| rows)
    });

    let mut rows: Vec<FeatureRow> = Vec::new();
    for outcome in &outcomes {
        match &outcome.result {
            Ok(conv_rows) => {
                rows.extend(conv_rows.iter().cloned());
                manifest.record_ok(&outcome.conversation_id);
            }
            Err(e) => manifest.record_error(&outcome.conversation_id, e),
        }
    }
    fill_weights(&mut rows);

    // every speaker in the data must be labeled
    for row in &rows {
        if !grouping.contains_key(&(row.conversation_id.clone(), row.speaker_id.clone())) {
            return Err(format!(
                "no group label for speaker {} in conversation {}",
                row.speaker_id, row.conversation_id
            ));
        }
    }

    let mut features = Vec::new();
    for feature in FEATURE_NAMES {
        let mut design_rows = Vec::new();
        for row in &rows {
            if let Some(value) = row.value(feature) {
                design_rows.push(GroupRow {
                    value,
                    group: grouping[&(row.conversation_id.clone(), row.speaker_id.clone())].clone(),
                    cluster_id: row.conversation_id.clone(),
                    weight: row.weight,
                });
            }
        }
        if design_rows.is_empty() {
            continue;
        }
        features.push(FeatureDesign {
            feature: feature.to_string(),
            design: GroupDesign::new(design_rows),
            // cosine similarity is bounded in [-1, 1]; everything else is
            // unbounded and gets trimmed
            winsorize: feature != "cosine_sim_prior",
        });
    }

    let comparisons = compare_groups(
        &features,
        &CompareConfig {
            winsor_level,
            use_t_critical: args.ci_t,
        },
    )
    .map_err(|e| e.to_string())?;

    let report = render_report_rows(&comparisons);
    std::fs::write(
        args.common.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report renders"),
    )
    .map_err(|e| e.to_string())?;
    std::fs::write(
        args.common.out_dir.join("report.txt"),
        crate::cmd_report::text_table(&report)?,
    )
    .map_err(|e| e.to_string())?;

    pipeline::log(
        args.common.quiet,
        &format!("stats: {} comparison row(s)", comparisons.len()),
    );
    manifest.finish(&args.common.out_dir)
}
