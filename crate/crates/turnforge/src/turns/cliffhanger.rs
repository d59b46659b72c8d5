//! Sentence-boundary model: turns close only at terminal punctuation.
//!
//! While a speaker's sentence is open, partner tokens are deferred; once the
//! sentence concludes, the deferred tokens are emitted as turns of their own
//! (split at their terminal punctuation, in original time order), and any
//! unterminated remainder stays open as the partner's current turn. A
//! speaker's final unpunctuated run closes at stream end.

use crate::transcript::{Token, TranscriptStream};
use crate::turns::{assign_turn_ids, join_texts, CueLists, Turn, TurnModel};

pub struct Cliffhanger {
    cues: CueLists,
}

impl Cliffhanger {
    pub fn new(cues: CueLists) -> Self {
        Cliffhanger { cues }
    }
}

struct OpenTurn {
    speaker_id: String,
    tokens: Vec<Token>,
}

impl TurnModel for Cliffhanger {
    fn name(&self) -> &'static str {
        "cliffhanger"
    }

    fn segment(&self, stream: &TranscriptStream) -> Vec<Turn> {
        let mut emitted: Vec<Turn> = Vec::new();
        let mut open: Option<OpenTurn> = None;
        let mut deferred: Vec<Token> = Vec::new();

        for token in &stream.tokens {
            match open.as_mut() {
                None => {
                    open = Some(OpenTurn {
                        speaker_id: token.speaker_id.clone(),
                        tokens: vec![token.clone()],
                    });
                    if self.cues.is_terminal(&token.text) {
                        close_and_flush(&mut emitted, &mut open, &mut deferred, &self.cues);
                    }
                }
                Some(turn) if turn.speaker_id == token.speaker_id => {
                    turn.tokens.push(token.clone());
                    if self.cues.is_terminal(&token.text) {
                        close_and_flush(&mut emitted, &mut open, &mut deferred, &self.cues);
                    }
                }
                Some(_) => deferred.push(token.clone()),
            }
        }
        if let Some(turn) = open.take() {
            emitted.push(make_turn(turn.speaker_id, turn.tokens));
        }
        // remaining deferrals close at stream end
        for segment in split_at_terminals(&deferred, &self.cues) {
            let speaker = segment[0].speaker_id.clone();
            emitted.push(make_turn(speaker, segment));
        }

        assign_turn_ids(&mut emitted, stream.conversation_start_ms);
        emitted
    }
}

/// Close the open sentence, then promote the deferred interjections: complete
/// sentences become turns, an unterminated tail becomes the new open turn.
fn close_and_flush(
    emitted: &mut Vec<Turn>,
    open: &mut Option<OpenTurn>,
    deferred: &mut Vec<Token>,
    cues: &CueLists,
) {
    if let Some(turn) = open.take() {
        emitted.push(make_turn(turn.speaker_id, turn.tokens));
    }
    let pending = std::mem::take(deferred);
    let mut segments = split_at_terminals(&pending, cues);
    let tail_open = segments
        .last()
        .map(|seg| !cues.is_terminal(&seg.last().unwrap().text))
        .unwrap_or(false);
    let tail = if tail_open { segments.pop() } else { None };
    for segment in segments {
        let speaker = segment[0].speaker_id.clone();
        emitted.push(make_turn(speaker, segment));
    }
    if let Some(tokens) = tail {
        *open = Some(OpenTurn {
            speaker_id: tokens[0].speaker_id.clone(),
            tokens,
        });
    }
}

fn split_at_terminals(tokens: &[Token], cues: &CueLists) -> Vec<Vec<Token>> {
    let mut segments = Vec::new();
    let mut current = Vec::new();
    for token in tokens {
        current.push(token.clone());
        if cues.is_terminal(&token.text) {
            segments.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

fn make_turn(speaker_id: String, tokens: Vec<Token>) -> Turn {
    Turn {
        turn_id: 0,
        speaker_id,
        start_ms: tokens.first().map(|t| t.start_ms).unwrap_or(0),
        stop_ms: tokens.iter().map(|t| t.stop_ms).max().unwrap_or(0),
        text: join_texts(&tokens),
        tokens,
        backchannels: Vec::new(),
    }
}
