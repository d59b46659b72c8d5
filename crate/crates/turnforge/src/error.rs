//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("line {line}: stop_ms {stop} precedes start_ms {start}")]
    NegativeDuration { line: usize, start: i64, stop: i64 },
    #[error("speaker {speaker} has overlapping tokens near {at_ms} ms")]
    OverlappingSameSpeaker { speaker: String, at_ms: i64 },
    #[error("expected exactly one conversation per stream, found {0}")]
    NotSingleConversation(usize),
    #[error("expected a dyad, found {0} speaker(s)")]
    NotDyadic(usize),
    #[error("transcript contains no tokens")]
    EmptyTranscript,
    #[error("no speaker transitions to summarize")]
    NoTransitions,
    #[error("turn {0} has zero duration")]
    ZeroDuration(i64),
    #[error("speaker {0} never takes the floor after a partner turn")]
    NoTransitionsForSpeaker(String),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector has no cosine similarity")]
    ZeroNorm,
    #[error("singular design: {0}")]
    SingularDesign(String),
    #[error("group {group} spans only {clusters} cluster(s); need at least 2")]
    TooFewClusters { group: String, clusters: usize },
    #[error("need at least 2 groups, found {0}")]
    TooFewGroups(usize),
    #[error("p-value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("contingency table has an empty row or column margin")]
    ZeroMargin,
    #[error("empty input")]
    EmptyInput,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("no group label for speaker {speaker} in conversation {conversation}")]
    UnknownSpeakerInGrouping {
        conversation: String,
        speaker: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
