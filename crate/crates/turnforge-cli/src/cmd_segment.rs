//! `segment`: per-conversation turn files under a selected model.

use clap::Args;
use serde::Serialize;
use turnforge::transcript::validate_dyad;
use turnforge::turns::{by_name, Turn};

use crate::config::{resolve_cues, CommonOpts, FileConfig};
use crate::pipeline::{self, RunStatus};

#[derive(Args, Debug)]
pub struct SegmentArgs {
    #[command(flatten)]
    pub common: CommonOpts,

    /// Turn model: audiophile, cliffhanger, or backbiter
    #[arg(long = "model")]
    pub model: Option<String>,
}

#[derive(Serialize)]
struct TurnRecord<'a> {
    conversation_id: &'a str,
    model: &'a str,
    turn_id: i64,
    speaker_id: &'a str,
    start_ms: i64,
    stop_ms: i64,
    text: &'a str,
    backchannels: Vec<BackchannelRecord<'a>>,
}

#[derive(Serialize)]
struct BackchannelRecord<'a> {
    listener_id: &'a str,
    text: &'a str,
    start_ms: i64,
    stop_ms: i64,
}

pub fn turns_to_jsonl(conversation_id: &str, model: &str, turns: &[Turn]) -> String {
    let mut out = String::new();
    for turn in turns {
        let record = TurnRecord {
            conversation_id,
            model,
            turn_id: turn.turn_id,
            speaker_id: &turn.speaker_id,
            start_ms: turn.start_ms,
            stop_ms: turn.stop_ms,
            text: &turn.text,
            backchannels: turn
                .backchannels
                .iter()
                .map(|b| BackchannelRecord {
                    listener_id: &b.listener_id,
                    text: &b.text,
                    start_ms: b.start_ms,
                    stop_ms: b.stop_ms,
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("turn serializes"));
        out.push('\n');
    }
    out
}

pub fn run(args: SegmentArgs) -> Result<RunStatus, String> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    let model_name = args
        .model
        .or_else(|| file.string("model"))
        .unwrap_or_else(|| "backbiter".to_string());
    let cues = resolve_cues(args.common.cues.as_deref(), &file)?;
    let model = by_name(&model_name, &cues).ok_or_else(|| {
        format!("unknown model {model_name:?}; expected audiophile, cliffhanger, or backbiter")
    })?;
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
        "segment",
        serde_json::json!({
            "model": model_name,
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
        Ok(model.segment(&stream))
    });

    for outcome in &outcomes {
        match &outcome.result {
            Ok(turns) => {
                let name = format!("{}.{}.jsonl", outcome.conversation_id, model_name);
                let body = turns_to_jsonl(&outcome.conversation_id, &model_name, turns);
                std::fs::write(args.common.out_dir.join(&name), body)
                    .map_err(|e| format!("{name}: {e}"))?;
                manifest.record_ok(&outcome.conversation_id);
            }
            Err(e) => manifest.record_error(&outcome.conversation_id, e),
        }
    }
    pipeline::log(
        args.common.quiet,
        &format!("segment: {} conversation(s) done", outcomes.len()),
    );
    manifest.finish(&args.common.out_dir)
}
