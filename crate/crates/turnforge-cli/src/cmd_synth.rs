//! `synth`: emit synthetic conversations in the same formats the pipeline
//! ingests, plus a ground-truth JSON sidecar and, with group effects, a
//! grouping CSV ready for the stats command.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use turnforge::synth::{generate_corpus, GroupEffect, SynthConfig};
use turnforge::transcript::{write_csv, write_jsonl};

use crate::pipeline::{self, RunStatus};

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,

    #[arg(long = "seed", default_value_t = 0)]
    pub seed: u64,

    #[arg(long = "conversations", default_value_t = 1)]
    pub conversations: usize,

    /// Main turns per conversation
    #[arg(long = "turns", default_value_t = 40)]
    pub turns: usize,

    #[arg(long = "interval-mean-ms", default_value_t = 80.0)]
    pub interval_mean_ms: f64,

    #[arg(long = "interval-sd-ms", default_value_t = 400.0)]
    pub interval_sd_ms: f64,

    #[arg(long = "duration-mean-s", default_value_t = 2.2)]
    pub duration_mean_s: f64,

    #[arg(long = "duration-sd-s", default_value_t = 1.2)]
    pub duration_sd_s: f64,

    #[arg(long = "duration-min-s", default_value_t = 0.4)]
    pub duration_min_s: f64,

    #[arg(long = "wps", default_value_t = 3.3)]
    pub wps: f64,

    #[arg(long = "bc-prob", default_value_t = 0.3)]
    pub bc_prob: f64,

    #[arg(long = "punct-prob", default_value_t = 0.8)]
    pub punct_prob: f64,

    #[arg(long = "pause-prob", default_value_t = 0.15)]
    pub pause_prob: f64,

    /// Output format for the token files
    #[arg(long = "format", default_value = "csv", value_parser = ["csv", "jsonl"])]
    pub format: String,

    /// Group effect, repeatable: NAME with optional deltas, e.g.
    /// "good:wps=+0.1,interval=-50,bc=+0.05"
    #[arg(long = "group-effect")]
    pub group_effect: Vec<String>,

    #[arg(long = "quiet", default_value_t = false)]
    pub quiet: bool,
}

fn parse_group_effect(spec: &str) -> Result<GroupEffect, String> {
    let (name, rest) = match spec.split_once(':') {
        Some((n, r)) => (n, r),
        None => (spec, ""),
    };
    if name.is_empty() {
        return Err(format!("group effect {spec:?}: empty group name"));
    }
    let mut effect = GroupEffect {
        group: name.to_string(),
        wps_delta: 0.0,
        interval_delta_ms: 0.0,
        backchannel_probability_delta: 0.0,
    };
    for part in rest.split(',').filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("group effect {spec:?}: expected key=value, got {part:?}"))?;
        let parsed: f64 = value
            .parse()
            .map_err(|_| format!("group effect {spec:?}: bad number {value:?}"))?;
        match key {
            "wps" => effect.wps_delta = parsed,
            "interval" => effect.interval_delta_ms = parsed,
            "bc" => effect.backchannel_probability_delta = parsed,
            other => return Err(format!("group effect {spec:?}: unknown key {other:?}")),
        }
    }
    Ok(effect)
}

pub fn run(args: SynthArgs) -> Result<RunStatus, String> {
    let effects: Vec<GroupEffect> = args
        .group_effect
        .iter()
        .map(|s| parse_group_effect(s))
        .collect::<Result<_, _>>()?;

    let template = SynthConfig {
        seed: args.seed,
        n_turns: args.turns,
        signed_interval_mean_ms: args.interval_mean_ms,
        signed_interval_sd_ms: args.interval_sd_ms,
        turn_duration_mean_s: args.duration_mean_s,
        turn_duration_sd_s: args.duration_sd_s,
        turn_duration_min_s: args.duration_min_s,
        words_per_second: args.wps,
        backchannel_probability_per_turn: args.bc_prob,
        terminal_punctuation_probability: args.punct_prob,
        pause_probability_per_turn: args.pause_prob,
        ..SynthConfig::default()
    };

    pipeline::ensure_out_dir(&args.out_dir)?;
    let corpus =
        generate_corpus(&template, args.conversations, &effects).map_err(|e| e.to_string())?;

    let mut truths = Vec::with_capacity(corpus.len());
    let mut grouping = String::from("conversation_id,speaker_id,group\n");
    for conversation in &corpus {
        let id = &conversation.stream.conversation_id;
        let path = args.out_dir.join(format!("{id}.{}", args.format));
        let mut buffer = Vec::new();
        match args.format.as_str() {
            "jsonl" => write_jsonl(&mut buffer, &conversation.stream.tokens),
            _ => write_csv(&mut buffer, &conversation.stream.tokens),
        }
        .map_err(|e| e.to_string())?;
        std::fs::write(&path, buffer).map_err(|e| format!("{}: {e}", path.display()))?;

        if let Some(group) = &conversation.group {
            for speaker in &conversation.stream.speakers {
                writeln!(grouping, "{id},{speaker},{group}").expect("string write");
            }
        }
        truths.push(&conversation.truth);
    }
    std::fs::write(
        args.out_dir.join("ground_truth.json"),
        serde_json::to_string_pretty(&truths).expect("truth serializes"),
    )
    .map_err(|e| e.to_string())?;
    if !effects.is_empty() {
        std::fs::write(args.out_dir.join("grouping.csv"), grouping).map_err(|e| e.to_string())?;
    }

    pipeline::log(
        args.quiet,
        &format!("synth: {} conversation(s) written", corpus.len()),
    );
    Ok(RunStatus::Clean)
}
