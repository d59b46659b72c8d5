//! Turn segmentation models behind a common trait.
//!
//! Three interchangeable strategies turn a dyadic token stream into speaking
//! turns:
//!
//! * `audiophile` - a turn is what one speaker says until the partner's next
//!   token; turns strictly alternate.
//! * `cliffhanger` - turns close only at terminal punctuation; partner tokens
//!   arriving mid-sentence are deferred into a turn of their own after the
//!   sentence concludes.
//! * `backbiter` - audiophile candidates that read as listener back-channels
//!   ("yeah", "mhm") move out of the main registry into the annotated turn's
//!   back-channel registry; the split main turns merge back together.
//!
//! Models are registered by name and selected at runtime via [`by_name`].

mod audiophile;
mod backbiter;
mod cliffhanger;

pub use audiophile::Audiophile;
pub use backbiter::{backchannel_stats, is_backchannel, Backbiter, BackchannelStats};
pub use cliffhanger::Cliffhanger;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transcript::{Token, TranscriptStream};

/// Pre-join content is indexed under this id: everything before the moment
/// both parties are present.
pub const PRE_JOIN_TURN_ID: i64 = -1;

/// One speaking turn. Under `backbiter` the listener's back-channels ride
/// along in `backchannels`; the other models leave it empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_id: i64,
    pub speaker_id: String,
    pub start_ms: i64,
    pub stop_ms: i64,
    pub text: String,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub backchannels: Vec<BackchannelEntry>,
}

impl Turn {
    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }
}

/// A listener utterance reclassified out of the main turn registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackchannelEntry {
    pub listener_id: String,
    pub text: String,
    pub start_ms: i64,
    pub stop_ms: i64,
    pub anchored_turn_id: i64,
    #[serde(default)]
    pub tokens: Vec<Token>,
}

/// The word and punctuation cue lists driving `cliffhanger` and `backbiter`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CueLists {
    pub version: u32,
    pub backchannel_cues: BTreeSet<String>,
    pub not_backchannel_beginnings: BTreeSet<String>,
    pub terminal_punctuation: BTreeSet<String>,
}

impl CueLists {
    /// The cue lists shipped with the crate.
    pub fn builtin() -> Self {
        serde_json::from_str(include_str!("../../data/cues.json")).expect("bundled cue list parses")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::InvalidConfig(format!("cue list: {e}")))
    }

    pub fn is_terminal(&self, token_text: &str) -> bool {
        let trimmed = token_text.trim_end();
        self.terminal_punctuation
            .iter()
            .any(|p| trimmed.ends_with(p.as_str()))
    }
}

impl Default for CueLists {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Lowercase a word and strip leading/trailing punctuation, keeping internal
/// apostrophes ("I'm..." becomes "i'm").
pub fn normalize_word(raw: &str) -> String {
    raw.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Normalized non-empty words of a token sequence.
pub fn normalized_words(tokens: &[Token]) -> Vec<String> {
    tokens
        .iter()
        .map(|t| normalize_word(&t.text))
        .filter(|w| !w.is_empty())
        .collect()
}

/// A turn segmentation strategy.
pub trait TurnModel: Send + Sync {
    /// Registry name, as selected on the command line.
    fn name(&self) -> &'static str;

    /// Segment a validated dyadic stream into turns, ids assigned.
    fn segment(&self, stream: &TranscriptStream) -> Vec<Turn>;
}

/// Names of every registered model.
pub fn model_names() -> &'static [&'static str] {
    &["audiophile", "cliffhanger", "backbiter"]
}

/// Look a model up by registry name.
pub fn by_name(name: &str, cues: &CueLists) -> Option<Box<dyn TurnModel>> {
    match name {
        "audiophile" => Some(Box::new(Audiophile)),
        "cliffhanger" => Some(Box::new(Cliffhanger::new(cues.clone()))),
        "backbiter" => Some(Box::new(Backbiter::new(cues.clone()))),
        _ => None,
    }
}

/// Number turns in emission order; turns starting before the joined moment
/// keep the pre-join id.
pub(crate) fn assign_turn_ids(turns: &mut [Turn], conversation_start_ms: Option<i64>) {
    let mut next = 0i64;
    for turn in turns.iter_mut() {
        match conversation_start_ms {
            Some(cs) if turn.start_ms < cs => turn.turn_id = PRE_JOIN_TURN_ID,
            _ => {
                turn.turn_id = next;
                next += 1;
            }
        }
    }
}

/// Group consecutive same-speaker tokens into unnumbered candidate turns.
pub(crate) fn candidate_runs(stream: &TranscriptStream) -> Vec<Turn> {
    let mut runs: Vec<Turn> = Vec::new();
    for token in &stream.tokens {
        match runs.last_mut() {
            Some(run) if run.speaker_id == token.speaker_id => {
                run.stop_ms = run.stop_ms.max(token.stop_ms);
                run.tokens.push(token.clone());
            }
            _ => runs.push(Turn {
                turn_id: 0,
                speaker_id: token.speaker_id.clone(),
                start_ms: token.start_ms,
                stop_ms: token.stop_ms,
                text: String::new(),
                tokens: vec![token.clone()],
                backchannels: Vec::new(),
            }),
        }
    }
    for run in &mut runs {
        run.text = join_texts(&run.tokens);
    }
    runs
}

pub(crate) fn join_texts(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}
