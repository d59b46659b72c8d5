//! Turn-level and speaker-level features, plus the binning and trimming
//! machinery the group statistics build on.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::turns::{normalize_word, Turn};

/// How back-channel activity is counted: registry entries or their words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackchannelUnit {
    #[default]
    Events,
    Words,
}

/// Per-turn feature record. `pause_s` is signed: negative when the turn
/// overlaps the prior one; the first turn has none.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnFeatures {
    pub turn_id: i64,
    pub speaker_id: String,
    pub pause_s: Option<f64>,
    pub duration_s: f64,
    pub words_per_second: f64,
    pub backchannel_rate: f64,
    pub cosine_sim_prior: Option<f64>,
    pub euclid_dist_prior: Option<f64>,
}

/// Compute features for one conversation's turns, in sequence order.
/// Synthetic zero-token turns (pre-join buckets) are skipped. Embeddings, if
/// given, are keyed by turn id; similarity fields stay empty without them.
pub fn turn_features(
    turns: &[Turn],
    embeddings: Option<&BTreeMap<i64, Vec<f64>>>,
    bc_unit: BackchannelUnit,
) -> Result<Vec<TurnFeatures>> {
    let spoken: Vec<&Turn> = turns.iter().filter(|t| !t.tokens.is_empty()).collect();
    let mut out = Vec::with_capacity(spoken.len());
    let mut prior: Option<&Turn> = None;
    for turn in spoken {
        let duration_ms = turn.stop_ms - turn.start_ms;
        if duration_ms == 0 {
            return Err(Error::ZeroDuration(turn.turn_id));
        }
        let duration_s = duration_ms as f64 / 1000.0;
        let bc_events = match bc_unit {
            BackchannelUnit::Events => turn.backchannels.len(),
            BackchannelUnit::Words => turn.backchannels.iter().map(|b| b.tokens.len()).sum(),
        };
        let (cosine, euclid) = match (embeddings, prior) {
            (Some(map), Some(prev)) => match (map.get(&turn.turn_id), map.get(&prev.turn_id)) {
                (Some(cur), Some(before)) => (
                    embedding_distance(cur, before, DistanceMetric::Cosine).ok(),
                    embedding_distance(cur, before, DistanceMetric::Euclidean).ok(),
                ),
                _ => (None, None),
            },
            _ => (None, None),
        };
        out.push(TurnFeatures {
            turn_id: turn.turn_id,
            speaker_id: turn.speaker_id.clone(),
            pause_s: prior.map(|p| (turn.start_ms - p.stop_ms) as f64 / 1000.0),
            duration_s,
            words_per_second: turn.word_count() as f64 / duration_s,
            backchannel_rate: bc_events as f64 / duration_s,
            cosine_sim_prior: cosine,
            euclid_dist_prior: euclid,
        });
        prior = Some(turn);
    }
    Ok(out)
}

/// A speaker's turn-initiation timing: negative means they tend to start
/// before the partner finishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeakerIntervalSummary {
    pub speaker_id: String,
    pub mean_interval_s: f64,
    pub median_interval_s: f64,
    pub interval_type: IntervalType,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IntervalType {
    Gapper,
    Overlapper,
}

/// Intervals between the partner's turn endings and this speaker's own turn
/// beginnings, over turns that directly follow a partner turn.
pub fn speaker_interval_summary(turns: &[Turn], speaker: &str) -> Result<SpeakerIntervalSummary> {
    let spoken: Vec<&Turn> = turns.iter().filter(|t| !t.tokens.is_empty()).collect();
    let mut intervals = Vec::new();
    for pair in spoken.windows(2) {
        if pair[1].speaker_id == speaker && pair[0].speaker_id != speaker {
            intervals.push((pair[1].start_ms - pair[0].stop_ms) as f64 / 1000.0);
        }
    }
    if intervals.is_empty() {
        return Err(Error::NoTransitionsForSpeaker(speaker.to_string()));
    }
    let mean = intervals.iter().sum::<f64>() / intervals.len() as f64;
    let mut sorted = intervals.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    };
    Ok(SpeakerIntervalSummary {
        speaker_id: speaker.to_string(),
        mean_interval_s: mean,
        median_interval_s: median,
        interval_type: if mean >= 0.0 {
            IntervalType::Gapper
        } else {
            IntervalType::Overlapper
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMetric {
    Cosine,
    Euclidean,
}

/// Cosine similarity or Euclidean distance between two vectors.
pub fn embedding_distance(v1: &[f64], v2: &[f64], metric: DistanceMetric) -> Result<f64> {
    if v1.len() != v2.len() {
        return Err(Error::DimensionMismatch(v1.len(), v2.len()));
    }
    match metric {
        DistanceMetric::Cosine => {
            let dot: f64 = v1.iter().zip(v2).map(|(a, b)| a * b).sum();
            let n1 = v1.iter().map(|a| a * a).sum::<f64>().sqrt();
            let n2 = v2.iter().map(|a| a * a).sum::<f64>().sqrt();
            if n1 == 0.0 || n2 == 0.0 {
                return Err(Error::ZeroNorm);
            }
            Ok((dot / (n1 * n2)).clamp(-1.0, 1.0))
        }
        DistanceMetric::Euclidean => Ok(v1
            .iter()
            .zip(v2)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()),
    }
}

/// Keyword dictionary hit counts per time bucket and topic.
///
/// Matching is whole-word over normalized tokens by default; multi-word keys
/// match consecutive token runs within a turn. With `substring` set, a key
/// instead matches anywhere inside the joined normalized text.
pub fn topic_frequency(
    turns: &[Turn],
    dictionary: &BTreeMap<String, Vec<String>>,
    window_ms: i64,
    substring: bool,
) -> BTreeMap<(i64, String), u64> {
    let mut counts = BTreeMap::new();
    if window_ms <= 0 {
        return counts;
    }
    for turn in turns {
        let words: Vec<(String, i64)> = turn
            .tokens
            .iter()
            .map(|t| (normalize_word(&t.text), t.start_ms))
            .filter(|(w, _)| !w.is_empty())
            .collect();
        for (topic, keywords) in dictionary {
            for keyword in keywords {
                let key_words: Vec<&str> = keyword.split_whitespace().collect();
                if key_words.is_empty() {
                    continue;
                }
                if substring {
                    for window in words.windows(key_words.len().max(1)) {
                        let joined = window
                            .iter()
                            .map(|(w, _)| w.as_str())
                            .collect::<Vec<_>>()
                            .join(" ");
                        if joined.contains(&keyword.to_lowercase()) {
                            let bucket = window[0].1.div_euclid(window_ms);
                            *counts.entry((bucket, topic.clone())).or_insert(0) += 1;
                        }
                    }
                } else {
                    for window in words.windows(key_words.len()) {
                        if window
                            .iter()
                            .zip(&key_words)
                            .all(|((w, _), k)| w == &k.to_lowercase())
                        {
                            let bucket = window[0].1.div_euclid(window_ms);
                            *counts.entry((bucket, topic.clone())).or_insert(0) += 1;
                        }
                    }
                }
            }
        }
    }
    counts
}

/// Order-preserving clamp to the central `level` mass: values outside the
/// `(1-level)/2` and `1-(1-level)/2` percentiles take the boundary values.
///
/// Boundary percentiles are the order statistics at the inward-rounded
/// fractional rank `q*(n-1)`. Rounding toward the interior (rather than
/// interpolating between order statistics) is what makes the clamp exactly
/// idempotent: a re-application sees the same boundary order statistic and
/// changes nothing.
pub fn winsorize(values: &[f64], level: f64) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    if !(level > 0.0 && level < 1.0) {
        return values.to_vec();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let tail = (1.0 - level) / 2.0;
    let top = sorted.len() - 1;
    let lo = sorted[(tail * top as f64).ceil() as usize];
    let hi = sorted[((1.0 - tail) * top as f64).floor() as usize];
    values.iter().map(|&v| v.clamp(lo, hi)).collect()
}

/// Weighted decile discretization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecileBinning {
    /// Nine ascending boundary values (non-strict when the data cannot
    /// support ten bins).
    pub boundaries: Vec<f64>,
    /// Per-value bin index in 1..=10. Ties at a boundary take the lower bin.
    pub assignments: Vec<u8>,
    pub weights: Vec<f64>,
    /// Fewer than ten distinct input values forced coarser bins.
    pub coarse: bool,
}

/// Discretize values into weighted deciles: boundary `i` is the smallest
/// value whose cumulative weight reaches `i/10` of the total.
pub fn decile_bin(values: &[f64], weights: &[f64]) -> Result<DecileBinning> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(Error::DimensionMismatch(values.len(), weights.len()));
    }
    if weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidConfig("weights must be positive".into()));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();

    let mut boundaries = Vec::with_capacity(9);
    let mut cumulative = 0.0;
    let mut pos = 0usize;
    for decile in 1..=9usize {
        let target = total * decile as f64 / 10.0;
        while pos < order.len() && cumulative + weights[order[pos]] < target {
            cumulative += weights[order[pos]];
            pos += 1;
        }
        // order[pos] is the crossing value; later deciles may cross here too
        boundaries.push(values[order[pos.min(order.len() - 1)]]);
    }

    let mut distinct = values.to_vec();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    let coarse = distinct.len() < 10;

    let assignments: Vec<u8> = values
        .iter()
        .map(|&v| 1 + boundaries.iter().filter(|&&b| b < v).count() as u8)
        .collect();

    Ok(DecileBinning {
        boundaries,
        assignments,
        weights: weights.to_vec(),
        coarse,
    })
}

/// Weight each row so every (conversation, speaker) pair carries total
/// weight one.
pub fn conversation_weights(rows: &[(String, String)]) -> Vec<f64> {
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (conv, speaker) in rows {
        *counts.entry((conv.as_str(), speaker.as_str())).or_insert(0) += 1;
    }
    rows.iter()
        .map(|(conv, speaker)| 1.0 / counts[&(conv.as_str(), speaker.as_str())] as f64)
        .collect()
}
