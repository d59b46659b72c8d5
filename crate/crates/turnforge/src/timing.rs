//! Communication-state time series and interval classification.
//!
//! A dyad's utterances are rasterized onto a fixed grid (10ms by default).
//! Maximal runs of joint silence or joint speech strictly between vocalized
//! frames are then classified by the floor holders on either side:
//!
//! * `Gap` - silence between different holders
//! * `Pause` - silence within one holder's speech
//! * `Overlap` - joint speech spanning a holder change
//! * `Wso` - joint speech with the same holder before and after
//!   (within-speaker overlap: interruption attempts, vocalized back-channels)
//!
//! Gaps map to positive signed transition intervals, overlaps to negative
//! ones. Runs with no single-speaker frame on one side (a conversation that
//! begins in overlap, say) have no defined holder and are skipped.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::transcript::Utterance;

pub const DEFAULT_GRID_MS: i64 = 10;
pub const DEFAULT_OUTLIER_K: f64 = 3.0;

/// Who is vocalizing in one grid frame: a 2-bit mask over the dyad.
pub type FrameMask = u8;

/// Dense per-frame vocalization record over `[t0_ms, t0_ms + frames*grid_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub conversation_id: String,
    pub grid_ms: i64,
    /// Grid-aligned series origin: `floor(min start / grid_ms) * grid_ms`.
    pub t0_ms: i64,
    /// The dyad, in sorted order; bit 0 of a mask is `speakers[0]`.
    pub speakers: [String; 2],
    pub frames: Vec<FrameMask>,
}

impl StateSeries {
    pub fn frame_time(&self, index: usize) -> i64 {
        self.t0_ms + index as i64 * self.grid_ms
    }

    pub fn speaker_name(&self, bit: usize) -> &str {
        &self.speakers[bit]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum IntervalKind {
    Gap,
    Pause,
    Overlap,
    Wso,
}

impl IntervalKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntervalKind::Gap => "gap",
            IntervalKind::Pause => "pause",
            IntervalKind::Overlap => "overlap",
            IntervalKind::Wso => "wso",
        }
    }
}

/// A classified silence or overlap segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalEvent {
    pub kind: IntervalKind,
    pub start_ms: i64,
    pub stop_ms: i64,
    pub duration_ms: i64,
    pub holder_before: String,
    pub holder_after: String,
}

/// A between-speaker transition: positive intervals are gaps, negative are
/// overlaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignedTransition {
    pub from_speaker: String,
    pub to_speaker: String,
    pub signed_interval_ms: i64,
}

/// Corpus- or conversation-level interval digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSummary {
    pub median_gap_ms: i64,
    /// Negative by construction.
    pub median_overlap_ms: i64,
    pub median_signed_transition_ms: i64,
    pub gap_share: f64,
    pub overlap_share: f64,
    pub gap_count: usize,
    pub overlap_count: usize,
    pub pause_count: usize,
    pub wso_count: usize,
    /// Set when some outlier filter saw a zero-spread distribution and
    /// passed its input through unchanged.
    pub filter_degenerate: bool,
}

/// How medians and shares aggregate over a conversation's transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SummaryMode {
    /// Pool every transition into one population.
    #[default]
    Pooled,
    /// Compute per floor-taking speaker first, then average the two.
    PerSpeakerFirst,
}

/// Rasterize utterances onto the grid. A frame at time `t` marks speaker `s`
/// vocalizing iff some utterance of `s` satisfies `start <= t < stop`.
pub fn build_state_series(
    conversation_id: &str,
    utterances: &[Utterance],
    grid_ms: i64,
) -> Result<StateSeries> {
    if utterances.is_empty() {
        return Err(Error::EmptyTranscript);
    }
    if grid_ms <= 0 {
        return Err(Error::InvalidConfig(format!(
            "grid_ms {grid_ms} must be > 0"
        )));
    }
    let mut speakers: Vec<&str> = utterances.iter().map(|u| u.speaker_id.as_str()).collect();
    speakers.sort();
    speakers.dedup();
    if speakers.len() > 2 {
        return Err(Error::NotDyadic(speakers.len()));
    }
    let first = speakers[0].to_string();
    let second = speakers.get(1).map(|s| s.to_string()).unwrap_or_default();

    let min_start = utterances.iter().map(|u| u.start_ms).min().unwrap();
    let max_stop = utterances.iter().map(|u| u.stop_ms).max().unwrap();
    let t0 = min_start.div_euclid(grid_ms) * grid_ms;
    let frame_count = ((max_stop - t0) as f64 / grid_ms as f64).ceil() as usize;
    let mut frames = vec![0u8; frame_count];

    for u in utterances {
        let bit = if u.speaker_id == first { 0u8 } else { 1u8 };
        // mark i where start <= t0 + i*grid < stop
        let lo = div_ceil(u.start_ms - t0, grid_ms).max(0);
        let hi = div_ceil(u.stop_ms - t0, grid_ms);
        for i in lo..hi {
            frames[i as usize] |= 1 << bit;
        }
    }

    Ok(StateSeries {
        conversation_id: conversation_id.to_string(),
        grid_ms,
        t0_ms: t0,
        speakers: [first, second],
        frames,
    })
}

fn div_ceil(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FrameClass {
    Silence,
    Single(u8),
    Joint,
}

fn classify_frame(mask: FrameMask) -> FrameClass {
    match mask {
        0 => FrameClass::Silence,
        1 => FrameClass::Single(0),
        2 => FrameClass::Single(1),
        _ => FrameClass::Joint,
    }
}

/// Classify every interior run of joint silence or joint speech. Leading and
/// trailing silence has no holder on one side and is never classified; runs
/// whose nearest frames on one side are never single-speaker are skipped.
pub fn classify_intervals(series: &StateSeries) -> Vec<IntervalEvent> {
    let n = series.frames.len();
    let mut events = Vec::new();
    if n == 0 {
        return events;
    }

    // nearest single-speaker frame to the left of (strictly before) index i,
    // carried forward in one pass
    let mut left_single: Vec<Option<u8>> = vec![None; n + 1];
    let mut carry = None;
    for i in 0..n {
        left_single[i] = carry;
        if let FrameClass::Single(s) = classify_frame(series.frames[i]) {
            carry = Some(s);
        }
    }
    left_single[n] = carry;

    let mut right_single: Vec<Option<u8>> = vec![None; n + 1];
    let mut carry = None;
    for i in (0..n).rev() {
        right_single[i + 1] = carry;
        if let FrameClass::Single(s) = classify_frame(series.frames[i]) {
            carry = Some(s);
        }
    }
    right_single[0] = carry;

    let mut i = 0;
    while i < n {
        let class = classify_frame(series.frames[i]);
        let mut j = i;
        while j < n && classify_frame(series.frames[j]) == class {
            j += 1;
        }
        let is_silence = class == FrameClass::Silence;
        let interior = i > 0 && j < n;
        if (is_silence && interior) || class == FrameClass::Joint {
            // nearest single-speaker frame on each side, walking outward past
            // joint or silent frames
            let before = left_single[i];
            let after = right_single[j];
            if let (Some(b), Some(a)) = (before, after) {
                let kind = match (is_silence, b == a) {
                    (true, true) => IntervalKind::Pause,
                    (true, false) => IntervalKind::Gap,
                    (false, true) => IntervalKind::Wso,
                    (false, false) => IntervalKind::Overlap,
                };
                events.push(IntervalEvent {
                    kind,
                    start_ms: series.frame_time(i),
                    stop_ms: series.frame_time(j),
                    duration_ms: (j - i) as i64 * series.grid_ms,
                    holder_before: series.speaker_name(b as usize).to_string(),
                    holder_after: series.speaker_name(a as usize).to_string(),
                });
            }
        }
        i = j;
    }
    events
}

/// Gaps become positive intervals, overlaps negative; pauses and WSOs are
/// within-speaker and excluded.
pub fn signed_transitions(events: &[IntervalEvent]) -> Vec<SignedTransition> {
    events
        .iter()
        .filter_map(|e| {
            let signed = match e.kind {
                IntervalKind::Gap => e.duration_ms,
                IntervalKind::Overlap => -e.duration_ms,
                IntervalKind::Pause | IntervalKind::Wso => return None,
            };
            Some(SignedTransition {
                from_speaker: e.holder_before.clone(),
                to_speaker: e.holder_after.clone(),
                signed_interval_ms: signed,
            })
        })
        .collect()
}

/// Outcome of one outlier-filter pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredValues {
    pub values: Vec<f64>,
    /// True when the spread was zero and nothing could be filtered.
    pub degenerate: bool,
}

/// One-shot removal of values more than `k` sample standard deviations from
/// the mean. Mean and SD are computed once on the full input. For
/// lower-bounded populations (pauses, WSOs) only the upper tail is dropped.
pub fn filter_outliers(values: &[f64], k: f64, lower_bounded: bool) -> FilteredValues {
    if values.is_empty() {
        return FilteredValues {
            values: Vec::new(),
            degenerate: false,
        };
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    if sd == 0.0 && k > 0.0 {
        return FilteredValues {
            values: values.to_vec(),
            degenerate: true,
        };
    }
    let keep = |v: f64| {
        if lower_bounded {
            v <= mean + k * sd
        } else {
            (v - mean).abs() <= k * sd
        }
    };
    FilteredValues {
        values: values.iter().copied().filter(|&v| keep(v)).collect(),
        degenerate: false,
    }
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn round_i64(v: f64) -> i64 {
    v.round() as i64
}

/// Summarize classified intervals: outlier-filter each population, then take
/// medians and the gap/overlap split of speaker transitions.
pub fn interval_summary(events: &[IntervalEvent], filter_k: f64) -> Result<IntervalSummary> {
    interval_summary_with(events, filter_k, SummaryMode::Pooled)
}

pub fn interval_summary_with(
    events: &[IntervalEvent],
    filter_k: f64,
    mode: SummaryMode,
) -> Result<IntervalSummary> {
    // signed transitions form one population; pauses and WSOs are separate
    // lower-bounded populations
    let signed: Vec<f64> = events
        .iter()
        .filter_map(|e| match e.kind {
            IntervalKind::Gap => Some(e.duration_ms as f64),
            IntervalKind::Overlap => Some(-(e.duration_ms as f64)),
            _ => None,
        })
        .collect();
    let takers: Vec<&str> = events
        .iter()
        .filter(|e| matches!(e.kind, IntervalKind::Gap | IntervalKind::Overlap))
        .map(|e| e.holder_after.as_str())
        .collect();
    let pauses: Vec<f64> = events
        .iter()
        .filter(|e| e.kind == IntervalKind::Pause)
        .map(|e| e.duration_ms as f64)
        .collect();
    let wsos: Vec<f64> = events
        .iter()
        .filter(|e| e.kind == IntervalKind::Wso)
        .map(|e| e.duration_ms as f64)
        .collect();

    let filtered_signed = filter_outliers(&signed, filter_k, false);
    let filtered_pauses = filter_outliers(&pauses, filter_k, true);
    let filtered_wsos = filter_outliers(&wsos, filter_k, true);
    let degenerate =
        filtered_signed.degenerate || filtered_pauses.degenerate || filtered_wsos.degenerate;

    // the taker of each retained transition, for per-speaker aggregation
    let retained: Vec<(f64, &str)> = {
        let keep: std::collections::HashSet<u64> =
            filtered_signed.values.iter().map(|v| v.to_bits()).collect();
        signed
            .iter()
            .zip(takers.iter())
            .filter(|(v, _)| keep.contains(&v.to_bits()))
            .map(|(v, s)| (*v, *s))
            .collect()
    };

    if retained.is_empty() {
        return Err(Error::NoTransitions);
    }

    let summary_of = |values: &[f64]| -> (f64, f64, f64, f64, f64, usize, usize) {
        let gaps: Vec<f64> = values.iter().copied().filter(|&v| v >= 0.0).collect();
        let overlaps: Vec<f64> = values.iter().copied().filter(|&v| v < 0.0).collect();
        let total = (gaps.len() + overlaps.len()) as f64;
        let gap_share = gaps.len() as f64 / total;
        let overlap_share = overlaps.len() as f64 / total;
        let median_gap = if gaps.is_empty() {
            f64::NAN
        } else {
            median(&gaps)
        };
        let median_overlap = if overlaps.is_empty() {
            f64::NAN
        } else {
            median(&overlaps)
        };
        (
            median_gap,
            median_overlap,
            median(values),
            gap_share,
            overlap_share,
            gaps.len(),
            overlaps.len(),
        )
    };

    let (median_gap, median_overlap, median_signed, gap_share, overlap_share, gaps, overlaps) =
        match mode {
            SummaryMode::Pooled => {
                let values: Vec<f64> = retained.iter().map(|(v, _)| *v).collect();
                summary_of(&values)
            }
            SummaryMode::PerSpeakerFirst => {
                let mut speakers: Vec<&str> = retained.iter().map(|(_, s)| *s).collect();
                speakers.sort();
                speakers.dedup();
                let per: Vec<_> = speakers
                    .iter()
                    .map(|sp| {
                        let values: Vec<f64> = retained
                            .iter()
                            .filter(|(_, s)| s == sp)
                            .map(|(v, _)| *v)
                            .collect();
                        summary_of(&values)
                    })
                    .collect();
                let avg = |f: &dyn Fn(&(f64, f64, f64, f64, f64, usize, usize)) -> f64| {
                    let vals: Vec<f64> = per.iter().map(f).filter(|v| !v.is_nan()).collect();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        vals.iter().sum::<f64>() / vals.len() as f64
                    }
                };
                (
                    avg(&|p| p.0),
                    avg(&|p| p.1),
                    avg(&|p| p.2),
                    avg(&|p| p.3),
                    avg(&|p| p.4),
                    per.iter().map(|p| p.5).sum(),
                    per.iter().map(|p| p.6).sum(),
                )
            }
        };

    Ok(IntervalSummary {
        median_gap_ms: if median_gap.is_nan() {
            0
        } else {
            round_i64(median_gap)
        },
        median_overlap_ms: if median_overlap.is_nan() {
            0
        } else {
            round_i64(median_overlap)
        },
        median_signed_transition_ms: round_i64(median_signed),
        gap_share,
        overlap_share,
        gap_count: gaps,
        overlap_count: overlaps,
        pause_count: filtered_pauses.values.len(),
        wso_count: filtered_wsos.values.len(),
        filter_degenerate: degenerate,
    })
}

/// Fixed-width histogram of signed transition intervals. Bins are aligned to
/// multiples of the width; each row is `(bin_left, bin_right, count)` with
/// values landing in `[left, right)`.
pub fn signed_transition_histogram(
    transitions: &[SignedTransition],
    bin_width_ms: i64,
) -> Vec<(i64, i64, usize)> {
    if transitions.is_empty() || bin_width_ms <= 0 {
        return Vec::new();
    }
    let min_bin = transitions
        .iter()
        .map(|t| t.signed_interval_ms.div_euclid(bin_width_ms))
        .min()
        .unwrap();
    let max_bin = transitions
        .iter()
        .map(|t| t.signed_interval_ms.div_euclid(bin_width_ms))
        .max()
        .unwrap();
    let mut counts = vec![0usize; (max_bin - min_bin + 1) as usize];
    for t in transitions {
        counts[(t.signed_interval_ms.div_euclid(bin_width_ms) - min_bin) as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| {
            let left = (min_bin + i as i64) * bin_width_ms;
            (left, left + bin_width_ms, c)
        })
        .collect()
}
