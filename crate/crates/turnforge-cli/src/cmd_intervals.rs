//! `intervals`: interval CSV, signed-transition histogram, and summary.

use std::fmt::Write as _;

use clap::Args;
use turnforge::timing::{
    build_state_series, classify_intervals, interval_summary_with, signed_transition_histogram,
    signed_transitions, IntervalEvent, SignedTransition, SummaryMode, DEFAULT_GRID_MS,
    DEFAULT_OUTLIER_K,
};
use turnforge::transcript::{join_tokens, validate_dyad, DEFAULT_JOIN_GAP_MS};

use crate::config::{CommonOpts, FileConfig};
use crate::pipeline::{self, RunStatus};

#[derive(Args, Debug)]
pub struct IntervalsArgs {
    #[command(flatten)]
    pub common: CommonOpts,

    /// State-series frame size in milliseconds
    #[arg(long = "grid-ms")]
    pub grid_ms: Option<i64>,

    /// Outlier cutoff in standard deviations for summaries
    #[arg(long = "outlier-k")]
    pub outlier_k: Option<f64>,

    /// Histogram bin width in milliseconds
    #[arg(long = "bin-width-ms")]
    pub bin_width_ms: Option<i64>,

    /// Aggregate per floor-taking speaker before averaging
    #[arg(long = "per-speaker-first", default_value_t = false)]
    pub per_speaker_first: bool,
}

pub fn run(args: IntervalsArgs) -> Result<RunStatus, String> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let grid_ms = args
        .grid_ms
        .or_else(|| file.integer("grid_ms"))
        .unwrap_or(DEFAULT_GRID_MS);
    let outlier_k = args
        .outlier_k
        .or_else(|| file.float("outlier_k"))
        .unwrap_or(DEFAULT_OUTLIER_K);
    let bin_width = args
        .bin_width_ms
        .or_else(|| file.integer("bin_width_ms"))
        .unwrap_or(50);
    let per_speaker_first =
        args.per_speaker_first || file.boolean("per_speaker_first").unwrap_or(false);
    let jobs = args
        .common
        .jobs
        .or_else(|| file.integer("jobs").map(|j| j as usize))
        .unwrap_or(1);
    let trim = args.common.trim_downtime || file.boolean("trim_downtime").unwrap_or(false);

    pipeline::ensure_out_dir(&args.common.out_dir)?;
    let files = pipeline::discover_inputs(&args.common.input)?;
    let (conversations, failures) = pipeline::load_conversations(&files);

    let mut manifest = pipeline::ManifestBuilder::new(
        "intervals",
        serde_json::json!({
            "grid_ms": grid_ms,
            "outlier_k": outlier_k,
            "bin_width_ms": bin_width,
            "per_speaker_first": per_speaker_first,
            "jobs": jobs,
            "trim_downtime": trim,
        }),
    );
    for (id, error) in &failures {
        manifest.record_error(id, error);
    }

    let outcomes = pipeline::map_conversations(conversations, jobs, |stream| {
        let stream = if trim {
            stream.clone().trim_downtime()
        } else {
            stream.clone()
        };
        let stream = validate_dyad(stream).map_err(|e| e.to_string())?;
        let utterances = join_tokens(&stream, DEFAULT_JOIN_GAP_MS);
        let series = build_state_series(&stream.conversation_id, &utterances, grid_ms)
            .map_err(|e| e.to_string())?;
        Ok(classify_intervals(&series))
    });

    let mut interval_csv = String::from(
        "conversation_id,kind,start_ms,stop_ms,duration_ms,holder_before,holder_after\n",
    );
    let mut all_events: Vec<IntervalEvent> = Vec::new();
    let mut all_transitions: Vec<SignedTransition> = Vec::new();
    for outcome in &outcomes {
        match &outcome.result {
            Ok(events) => {
                for e in events {
                    writeln!(
                        interval_csv,
                        "{},{},{},{},{},{},{}",
                        outcome.conversation_id,
                        e.kind.as_str(),
                        e.start_ms,
                        e.stop_ms,
                        e.duration_ms,
                        e.holder_before,
                        e.holder_after
                    )
                    .expect("string write");
                }
                all_transitions.extend(signed_transitions(events));
                all_events.extend(events.iter().cloned());
                manifest.record_ok(&outcome.conversation_id);
            }
            Err(e) => manifest.record_error(&outcome.conversation_id, e),
        }
    }

    std::fs::write(args.common.out_dir.join("intervals.csv"), interval_csv)
        .map_err(|e| e.to_string())?;

    let mut histogram_csv = String::from("bin_left_ms,bin_right_ms,count\n");
    for (left, right, count) in signed_transition_histogram(&all_transitions, bin_width) {
        writeln!(histogram_csv, "{left},{right},{count}").expect("string write");
    }
    std::fs::write(args.common.out_dir.join("histogram.csv"), histogram_csv)
        .map_err(|e| e.to_string())?;

    let mode = if per_speaker_first {
        SummaryMode::PerSpeakerFirst
    } else {
        SummaryMode::Pooled
    };
    let summary = interval_summary_with(&all_events, outlier_k, mode)
        .map(|s| serde_json::to_value(&s).expect("summary serializes"))
        .unwrap_or_else(|e| serde_json::json!({ "error": e.to_string() }));
    std::fs::write(
        args.common.out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary).expect("summary renders"),
    )
    .map_err(|e| e.to_string())?;

    pipeline::log(
        args.common.quiet,
        &format!(
            "intervals: {} event(s), {} transition(s)",
            all_events.len(),
            all_transitions.len()
        ),
    );
    manifest.finish(&args.common.out_dir)
}
