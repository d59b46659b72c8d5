//! Back-channel-aware model.
//!
//! Candidate turns come from the audiophile scan. A candidate is reclassified
//! as a back-channel when all three rules hold:
//!
//! 1. three words or fewer,
//! 2. strictly more than half the words are back-channel cues,
//! 3. the first word is not a prohibited beginning.
//!
//! Reclassified candidates leave the main registry and attach to the main
//! turn of the other speaker that contains their start, falling back to the
//! most recent preceding one. With no partner turn on record yet they land
//! in a synthetic pre-join bucket turn. Main turns split only by removed
//! back-channels merge back into one.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::transcript::TranscriptStream;
use crate::turns::{
    assign_turn_ids, candidate_runs, join_texts, normalize_word, normalized_words, CueLists, Turn,
    TurnModel, PRE_JOIN_TURN_ID,
};

pub struct Backbiter {
    cues: CueLists,
}

impl Backbiter {
    pub fn new(cues: CueLists) -> Self {
        Backbiter { cues }
    }
}

/// The three-rule back-channel predicate over normalized words.
pub fn is_backchannel(words: &[String], cues: &CueLists) -> bool {
    if words.is_empty() || words.len() > 3 {
        return false;
    }
    let cue_count = words
        .iter()
        .filter(|w| cues.backchannel_cues.contains(w.as_str()))
        .count();
    if 2 * cue_count <= words.len() {
        return false;
    }
    !cues.not_backchannel_beginnings.contains(words[0].as_str())
}

impl TurnModel for Backbiter {
    fn name(&self) -> &'static str {
        "backbiter"
    }

    fn segment(&self, stream: &TranscriptStream) -> Vec<Turn> {
        let candidates = candidate_runs(stream);
        let mut main: Vec<Turn> = Vec::new();
        let mut removed: Vec<Turn> = Vec::new();
        for candidate in candidates {
            let words = normalized_words(&candidate.tokens);
            if is_backchannel(&words, &self.cues) {
                removed.push(candidate);
            } else {
                match main.last_mut() {
                    Some(prev) if prev.speaker_id == candidate.speaker_id => {
                        prev.stop_ms = prev.stop_ms.max(candidate.stop_ms);
                        prev.tokens.extend(candidate.tokens);
                        prev.text = join_texts(&prev.tokens);
                    }
                    _ => main.push(candidate),
                }
            }
        }
        assign_turn_ids(&mut main, stream.conversation_start_ms);

        let mut buckets: BTreeMap<String, Turn> = BTreeMap::new();
        for bc in removed {
            let host = anchor_index(&main, &bc.speaker_id, bc.start_ms);
            let entry = crate::turns::BackchannelEntry {
                listener_id: bc.speaker_id.clone(),
                text: bc.text.clone(),
                start_ms: bc.start_ms,
                stop_ms: bc.stop_ms,
                anchored_turn_id: host.map(|i| main[i].turn_id).unwrap_or(PRE_JOIN_TURN_ID),
                tokens: bc.tokens,
            };
            match host {
                Some(i) => main[i].backchannels.push(entry),
                None => {
                    // no partner turn exists yet: a pre-join bucket turn
                    // collects the orphans
                    let partner = stream
                        .speakers
                        .iter()
                        .find(|s| **s != bc.speaker_id)
                        .cloned()
                        .unwrap_or_default();
                    let bucket = buckets.entry(partner.clone()).or_insert_with(|| Turn {
                        turn_id: PRE_JOIN_TURN_ID,
                        speaker_id: partner,
                        start_ms: entry.start_ms,
                        stop_ms: entry.stop_ms,
                        text: String::new(),
                        tokens: Vec::new(),
                        backchannels: Vec::new(),
                    });
                    bucket.start_ms = bucket.start_ms.min(entry.start_ms);
                    bucket.stop_ms = bucket.stop_ms.max(entry.stop_ms);
                    bucket.backchannels.push(entry);
                }
            }
        }

        let mut out: Vec<Turn> = buckets.into_values().collect();
        out.sort_by_key(|t| t.start_ms);
        out.extend(main);
        out
    }
}

/// Main turn of the other speaker containing the back-channel's start, else
/// the most recent preceding one.
fn anchor_index(main: &[Turn], listener: &str, bc_start_ms: i64) -> Option<usize> {
    let mut preceding = None;
    for (i, turn) in main.iter().enumerate() {
        if turn.speaker_id == listener {
            continue;
        }
        if turn.start_ms <= bc_start_ms && bc_start_ms < turn.stop_ms {
            return Some(i);
        }
        if turn.start_ms <= bc_start_ms {
            preceding = Some(i);
        }
    }
    preceding
}

/// Corpus back-channel rates, averaged at the participant level before the
/// corpus level.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BackchannelStats {
    pub share_of_turns_with_bc: f64,
    pub share_among_5plus_word_turns: f64,
    pub bc_words_per_hour: f64,
    pub frequency_table: BTreeMap<String, u64>,
}

pub fn backchannel_stats(conversations: &[(String, Vec<Turn>)]) -> Result<BackchannelStats> {
    #[derive(Default)]
    struct Tally {
        turns: usize,
        turns_with_bc: usize,
        long_turns: usize,
        long_turns_with_bc: usize,
        bc_words: u64,
        hours: f64,
    }
    let mut per_participant: BTreeMap<String, Tally> = BTreeMap::new();
    let mut frequency: BTreeMap<String, u64> = BTreeMap::new();
    let mut any_turn = false;

    for (_, turns) in conversations {
        let spoken: Vec<&Turn> = turns.iter().filter(|t| !t.tokens.is_empty()).collect();
        if spoken.is_empty() {
            continue;
        }
        any_turn = true;
        let span_ms = spoken.iter().map(|t| t.stop_ms).max().unwrap()
            - spoken.iter().map(|t| t.start_ms).min().unwrap();
        let hours = span_ms as f64 / 3_600_000.0;
        let mut participants: Vec<&str> = spoken.iter().map(|t| t.speaker_id.as_str()).collect();
        participants.extend(
            turns
                .iter()
                .flat_map(|t| t.backchannels.iter())
                .map(|b| b.listener_id.as_str()),
        );
        participants.sort();
        participants.dedup();
        for p in &participants {
            per_participant.entry(p.to_string()).or_default().hours += hours;
        }
        for turn in &spoken {
            let tally = per_participant.entry(turn.speaker_id.clone()).or_default();
            tally.turns += 1;
            let has_bc = !turn.backchannels.is_empty();
            if has_bc {
                tally.turns_with_bc += 1;
            }
            if turn.word_count() >= 5 {
                tally.long_turns += 1;
                if has_bc {
                    tally.long_turns_with_bc += 1;
                }
            }
        }
        for entry in turns.iter().flat_map(|t| t.backchannels.iter()) {
            let words: Vec<String> = entry
                .tokens
                .iter()
                .map(|t| normalize_word(&t.text))
                .filter(|w| !w.is_empty())
                .collect();
            per_participant
                .entry(entry.listener_id.clone())
                .or_default()
                .bc_words += words.len() as u64;
            for word in words {
                *frequency.entry(word).or_insert(0) += 1;
            }
        }
    }
    if !any_turn {
        return Err(Error::EmptyInput);
    }

    let mean = |values: Vec<f64>| {
        if values.is_empty() {
            0.0
        } else {
            values.iter().sum::<f64>() / values.len() as f64
        }
    };
    let share = mean(
        per_participant
            .values()
            .filter(|t| t.turns > 0)
            .map(|t| t.turns_with_bc as f64 / t.turns as f64)
            .collect(),
    );
    let share5 = mean(
        per_participant
            .values()
            .filter(|t| t.long_turns > 0)
            .map(|t| t.long_turns_with_bc as f64 / t.long_turns as f64)
            .collect(),
    );
    let per_hour = mean(
        per_participant
            .values()
            .filter(|t| t.hours > 0.0)
            .map(|t| t.bc_words as f64 / t.hours)
            .collect(),
    );

    Ok(BackchannelStats {
        share_of_turns_with_bc: share,
        share_among_5plus_word_turns: share5,
        bc_words_per_hour: per_hour,
        frequency_table: frequency,
    })
}
