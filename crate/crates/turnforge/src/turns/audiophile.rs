//! Baseline model: a turn is what one speaker says until their partner's
//! next token arrives.

use crate::transcript::TranscriptStream;
use crate::turns::{assign_turn_ids, candidate_runs, Turn, TurnModel};

pub struct Audiophile;

impl TurnModel for Audiophile {
    fn name(&self) -> &'static str {
        "audiophile"
    }

    fn segment(&self, stream: &TranscriptStream) -> Vec<Turn> {
        let mut turns = candidate_runs(stream);
        assign_turn_ids(&mut turns, stream.conversation_start_ms);
        turns
    }
}
