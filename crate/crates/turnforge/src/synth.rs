//! Synthetic dyadic conversations with known ground truth.
//!
//! The generator plants turn boundaries, signed inter-turn intervals,
//! within-turn pauses, listener back-channels, and topic keywords, then
//! emits an ordinary token stream. Every quantity it plants is recorded in
//! a [`GroundTruth`] sidecar so pipeline output can be checked against it.
//!
//! Determinism: all randomness comes from a ChaCha8 stream cipher seeded
//! from the config, so a given seed reproduces byte-identical output on any
//! platform. Durations are truncated normals sampled by rejection (64
//! tries, then clamped to the minimum). All emitted times are multiples of
//! `grid_align_ms`, which keeps planted intervals exactly recoverable on
//! the analysis grid.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcript::{Token, TranscriptStream};
use crate::turns::CueLists;

/// Neutral filler vocabulary, disjoint from the back-channel cue list so a
/// generated main turn can never satisfy the back-channel predicate.
const FILLER_WORDS: &[&str] = &[
    "story", "about", "garden", "river", "window", "summer", "walking", "coffee", "music", "later",
    "morning", "weather", "reading", "travel", "dinner", "neighbor", "project", "weekend",
    "picture", "kitchen", "evening", "holiday", "mountain", "library", "bicycle",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicPlant {
    pub at_ms: i64,
    pub keyword: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_turns: usize,
    pub signed_interval_mean_ms: f64,
    pub signed_interval_sd_ms: f64,
    pub turn_duration_mean_s: f64,
    pub turn_duration_sd_s: f64,
    pub turn_duration_min_s: f64,
    pub words_per_second: f64,
    pub backchannel_probability_per_turn: f64,
    /// Defaults to the bundled cue list.
    pub backchannel_vocab: Vec<String>,
    pub terminal_punctuation_probability: f64,
    pub pause_probability_per_turn: f64,
    pub pause_duration_ms: f64,
    pub topic_plants: Vec<TopicPlant>,
    pub conversation_id: String,
    pub speakers: (String, String),
    pub grid_align_ms: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            n_turns: 40,
            signed_interval_mean_ms: 80.0,
            signed_interval_sd_ms: 400.0,
            turn_duration_mean_s: 2.2,
            turn_duration_sd_s: 1.2,
            turn_duration_min_s: 0.4,
            words_per_second: 3.3,
            backchannel_probability_per_turn: 0.3,
            backchannel_vocab: CueLists::builtin().backchannel_cues.into_iter().collect(),
            terminal_punctuation_probability: 0.8,
            pause_probability_per_turn: 0.15,
            pause_duration_ms: 350.0,
            topic_plants: Vec::new(),
            conversation_id: "synth-00000".into(),
            speakers: ("S1".into(), "S2".into()),
            grid_align_ms: 10,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.n_turns == 0 {
            return Err(Error::InvalidConfig("n_turns must be >= 1".into()));
        }
        if !(self.turn_duration_min_s > 0.0) {
            return Err(Error::InvalidConfig(
                "turn_duration_min_s must be > 0".into(),
            ));
        }
        if !(self.words_per_second > 0.0) {
            return Err(Error::InvalidConfig("words_per_second must be > 0".into()));
        }
        for (name, p) in [
            (
                "backchannel_probability_per_turn",
                self.backchannel_probability_per_turn,
            ),
            (
                "terminal_punctuation_probability",
                self.terminal_punctuation_probability,
            ),
            (
                "pause_probability_per_turn",
                self.pause_probability_per_turn,
            ),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0,1]")));
            }
        }
        if self.grid_align_ms <= 0 {
            return Err(Error::InvalidConfig("grid_align_ms must be > 0".into()));
        }
        if self.speakers.0 == self.speakers.1 {
            return Err(Error::InvalidConfig("speakers must differ".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueBackchannel {
    pub listener_id: String,
    pub words: Vec<String>,
    pub start_ms: i64,
    pub stop_ms: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruePause {
    pub start_ms: i64,
    pub stop_ms: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrueTurn {
    pub speaker_id: String,
    pub start_ms: i64,
    pub stop_ms: i64,
    pub word_count: usize,
    pub backchannel: Option<TrueBackchannel>,
    pub pause: Option<TruePause>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub conversation_id: String,
    pub turns: Vec<TrueTurn>,
    /// Realized interval from each turn's stop to the next turn's start.
    pub signed_intervals_ms: Vec<i64>,
    pub planted_wps: BTreeMap<String, f64>,
    /// Keywords actually written into the stream, with their start times.
    pub planted_keywords: Vec<(i64, String)>,
    pub group: Option<String>,
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, min: f64) -> f64 {
    if sd <= 0.0 {
        return mean.max(min);
    }
    let dist = Normal::new(mean, sd).expect("finite mean/sd");
    for _ in 0..64 {
        let x = dist.sample(rng);
        if x >= min {
            return x;
        }
    }
    min
}

fn align(value: i64, grid: i64) -> i64 {
    value.div_euclid(grid) * grid
}

/// Generate one conversation and its ground truth.
pub fn generate_conversation(config: &SynthConfig) -> Result<(TranscriptStream, GroundTruth)> {
    config.validate()?;
    let grid = config.grid_align_ms;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal_interval = Normal::new(
        config.signed_interval_mean_ms,
        config.signed_interval_sd_ms.max(0.0),
    )
    .map_err(|e| Error::InvalidConfig(e.to_string()))?;

    struct PlannedTurn {
        speaker: usize,
        start: i64,
        token_bounds: Vec<(i64, i64)>,
        pause: Option<TruePause>,
    }

    let mut planned: Vec<PlannedTurn> = Vec::new();
    let mut starts = Vec::with_capacity(config.n_turns);
    let mut stops = Vec::with_capacity(config.n_turns);
    let mut signed_intervals = Vec::new();
    let mut start = 0i64;

    for index in 0..config.n_turns {
        let speaker = index % 2;
        let duration_s = truncated_normal(
            &mut rng,
            config.turn_duration_mean_s,
            config.turn_duration_sd_s,
            config.turn_duration_min_s,
        );
        let mut duration = align((duration_s * 1000.0).round() as i64, grid).max(grid);
        if index >= 1 {
            // each turn outlasts its predecessor so transitions stay
            // boundary gaps or overlaps, never containment
            duration = duration.max(stops[index - 1] + grid - start);
        }
        let max_words = (duration / (2 * grid)).max(1) as usize;
        let n_words = (((duration as f64 / 1000.0) * config.words_per_second).round() as usize)
            .clamp(1, max_words);

        let mut bounds: Vec<(i64, i64)> = (0..n_words)
            .map(|j| {
                let lo = start + align(j as i64 * duration / n_words as i64, grid);
                let hi = if j + 1 == n_words {
                    start + duration
                } else {
                    start + align((j + 1) as i64 * duration / n_words as i64, grid)
                };
                (lo, hi)
            })
            .collect();

        // plant an intra-turn pause by shifting the tail tokens right; the
        // silence has to begin after the partner's previous turn ends or it
        // would be masked by their speech
        let mut pause = None;
        if n_words >= 4 && rng.random_bool(config.pause_probability_per_turn) {
            let at = rng.random_range(1..n_words - 1);
            let clear_of_partner = index == 0 || bounds[at - 1].1 >= stops[index - 1] + grid;
            if clear_of_partner {
                let pause_ms = align(
                    truncated_normal(
                        &mut rng,
                        config.pause_duration_ms,
                        config.pause_duration_ms / 4.0,
                        30.0,
                    )
                    .round() as i64,
                    grid,
                )
                .max(3 * grid);
                for b in bounds.iter_mut().skip(at) {
                    b.0 += pause_ms;
                    b.1 += pause_ms;
                }
                duration += pause_ms;
                pause = Some(TruePause {
                    start_ms: bounds[at - 1].1,
                    stop_ms: bounds[at].0,
                });
            }
        }

        let stop = start + duration;
        starts.push(start);
        stops.push(stop);
        planned.push(PlannedTurn {
            speaker,
            start,
            token_bounds: bounds,
            pause,
        });

        if index + 1 < config.n_turns {
            let raw = align(normal_interval.sample(&mut rng).round() as i64, grid);
            let mut next = stop + raw;
            // an overlap may only reach back into the current turn's
            // contiguous tail: past its pause, never before its start, and
            // far enough from the next speaker's own previous turn that the
            // 20ms join rule cannot glue their utterances together
            let floor = match &planned[index].pause {
                Some(p) => p.stop_ms + grid,
                None => start + grid,
            };
            next = next.max(floor);
            if index >= 1 {
                next = next.max(stops[index - 1] + 3 * grid);
            }
            signed_intervals.push(next - stop);
            start = next;
        }
    }

    // back-channels go inside a turn, clear of its edges, its pause, and the
    // listener's surrounding turns
    let mut tokens: Vec<Token> = Vec::new();
    let mut truth_turns: Vec<TrueTurn> = Vec::new();
    for (index, plan) in planned.iter().enumerate() {
        let listener = 1 - plan.speaker;
        let stop = stops[index];
        let mut backchannel = None;
        if rng.random_bool(config.backchannel_probability_per_turn)
            && !config.backchannel_vocab.is_empty()
        {
            let n_bc_words = rng.random_range(1..=3usize);
            let word_durs: Vec<i64> = (0..n_bc_words)
                .map(|_| align(rng.random_range(100..300i64), grid).max(grid))
                .collect();
            let bc_dur: i64 = word_durs.iter().sum();

            // a speaker token start must separate the back-channel from the
            // listener's surrounding utterances in sorted order (or the
            // candidate scan would merge them), and the time margins must
            // exceed the 20ms join rule (or the utterances themselves would
            // fuse)
            let mut lo = plan.start + grid;
            let mut window_ok = true;
            if index >= 1 {
                lo = lo.max(stops[index - 1] + 3 * grid);
                let listener_last_start = planned[index - 1].token_bounds.last().unwrap().0;
                match plan
                    .token_bounds
                    .iter()
                    .map(|b| b.0)
                    .find(|&s| s > listener_last_start)
                {
                    Some(separator) => lo = lo.max(separator + grid),
                    None => window_ok = false,
                }
            }
            if let Some(p) = &plan.pause {
                lo = lo.max(p.stop_ms + grid);
            }
            let last_token_start = plan.token_bounds.last().unwrap().0;
            let mut hi_stop = last_token_start - grid;
            if index + 1 < planned.len() {
                hi_stop = hi_stop.min(starts[index + 1] - 3 * grid);
                match plan
                    .token_bounds
                    .iter()
                    .map(|b| b.0)
                    .rfind(|&s| s < starts[index + 1])
                {
                    Some(separator) => hi_stop = hi_stop.min(separator),
                    None => window_ok = false,
                }
            }
            let hi = hi_stop - bc_dur;
            if window_ok && hi >= lo {
                let bc_start = align(rng.random_range(lo..=hi), grid);
                let mut t = bc_start;
                let mut words = Vec::new();
                for dur in &word_durs {
                    let word = config.backchannel_vocab
                        [rng.random_range(0..config.backchannel_vocab.len())]
                    .clone();
                    tokens.push(Token {
                        conversation_id: config.conversation_id.clone(),
                        speaker_id: speaker_name(config, listener),
                        text: word.clone(),
                        start_ms: t,
                        stop_ms: t + dur,
                        confidence: None,
                    });
                    words.push(word);
                    t += dur;
                }
                backchannel = Some(TrueBackchannel {
                    listener_id: speaker_name(config, listener),
                    words,
                    start_ms: bc_start,
                    stop_ms: t,
                });
            }
        }

        let terminal = rng.random_bool(config.terminal_punctuation_probability);
        let n = plan.token_bounds.len();
        for (j, &(lo, hi)) in plan.token_bounds.iter().enumerate() {
            let mut word = FILLER_WORDS[rng.random_range(0..FILLER_WORDS.len())].to_string();
            if terminal && j + 1 == n {
                let roll: f64 = rng.random_range(0.0..1.0);
                word.push(if roll < 0.7 {
                    '.'
                } else if roll < 0.9 {
                    '?'
                } else {
                    '!'
                });
            }
            tokens.push(Token {
                conversation_id: config.conversation_id.clone(),
                speaker_id: speaker_name(config, plan.speaker),
                text: word,
                start_ms: lo,
                stop_ms: hi,
                confidence: None,
            });
        }

        truth_turns.push(TrueTurn {
            speaker_id: speaker_name(config, plan.speaker),
            start_ms: plan.start,
            stop_ms: stop,
            word_count: n,
            backchannel,
            pause: plan.pause.clone(),
        });
    }

    // topic plants replace the nearest main-turn token(s)
    let mut planted_keywords = Vec::new();
    for plant in &config.topic_plants {
        let key_words: Vec<&str> = plant.keyword.split_whitespace().collect();
        if key_words.is_empty() {
            continue;
        }
        // candidate positions: contiguous runs of main-turn (filler) tokens
        let is_filler = |t: &Token| FILLER_WORDS.iter().any(|w| t.text.starts_with(w));
        let mut best: Option<(i64, usize)> = None;
        for (i, tok) in tokens.iter().enumerate() {
            if i + key_words.len() > tokens.len() {
                continue;
            }
            let window = &tokens[i..i + key_words.len()];
            if !window.iter().all(is_filler) {
                continue;
            }
            let contiguous = window
                .windows(2)
                .all(|p| p[0].speaker_id == p[1].speaker_id && p[1].start_ms == p[0].stop_ms);
            if !contiguous {
                continue;
            }
            let distance = (tok.start_ms - plant.at_ms).abs();
            if best.map(|(d, _)| distance < d).unwrap_or(true) {
                best = Some((distance, i));
            }
        }
        if let Some((_, i)) = best {
            for (k, word) in key_words.iter().enumerate() {
                let terminal_tail: String = tokens[i + k]
                    .text
                    .chars()
                    .filter(|c| matches!(c, '.' | '?' | '!'))
                    .collect();
                tokens[i + k].text = format!("{word}{terminal_tail}");
            }
            planted_keywords.push((tokens[i].start_ms, plant.keyword.clone()));
        }
    }

    let stream = TranscriptStream::from_tokens(config.conversation_id.clone(), tokens)?;
    let mut planted_wps = BTreeMap::new();
    planted_wps.insert(speaker_name(config, 0), config.words_per_second);
    planted_wps.insert(speaker_name(config, 1), config.words_per_second);
    let truth = GroundTruth {
        conversation_id: config.conversation_id.clone(),
        turns: truth_turns,
        signed_intervals_ms: signed_intervals,
        planted_wps,
        planted_keywords,
        group: None,
    };
    Ok((stream, truth))
}

fn speaker_name(config: &SynthConfig, index: usize) -> String {
    if index == 0 {
        config.speakers.0.clone()
    } else {
        config.speakers.1.clone()
    }
}

/// A deliberate shift applied to every conversation assigned to a group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupEffect {
    pub group: String,
    #[serde(default)]
    pub wps_delta: f64,
    #[serde(default)]
    pub interval_delta_ms: f64,
    #[serde(default)]
    pub backchannel_probability_delta: f64,
}

/// One generated conversation with its group label.
#[derive(Debug, Clone)]
pub struct SynthConversation {
    pub stream: TranscriptStream,
    pub truth: GroundTruth,
    pub group: Option<String>,
}

/// Generate a corpus. Conversation seeds derive from the template seed;
/// group effects, when given, are assigned round-robin so groups stay
/// balanced.
pub fn generate_corpus(
    template: &SynthConfig,
    n_conversations: usize,
    group_effects: &[GroupEffect],
) -> Result<Vec<SynthConversation>> {
    if n_conversations == 0 {
        return Err(Error::InvalidConfig("n_conversations must be >= 1".into()));
    }
    template.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(template.seed);
    let mut out = Vec::with_capacity(n_conversations);
    for index in 0..n_conversations {
        let seed: u64 = master.random();
        let mut config = template.clone();
        config.seed = seed;
        config.conversation_id = format!("synth-{index:05}");
        let mut group = None;
        if !group_effects.is_empty() {
            let effect = &group_effects[index % group_effects.len()];
            config.words_per_second += effect.wps_delta;
            config.signed_interval_mean_ms += effect.interval_delta_ms;
            config.backchannel_probability_per_turn = (config.backchannel_probability_per_turn
                + effect.backchannel_probability_delta)
                .clamp(0.0, 1.0);
            group = Some(effect.group.clone());
        }
        let (stream, mut truth) = generate_conversation(&config)?;
        truth.group = group.clone();
        truth.planted_wps = stream
            .speakers
            .iter()
            .map(|s| (s.clone(), config.words_per_second))
            .collect();
        out.push(SynthConversation {
            stream,
            truth,
            group,
        });
    }
    Ok(out)
}
