//! Token-level transcript ingestion: parsing, validation, and the
//! join-into-utterances rule.
//!
//! Input is a flat list of per-word tokens with speaker labels and
//! millisecond timestamps, either as CSV (header required:
//! `conversation_id,speaker_id,text,start_ms,stop_ms[,confidence]`) or as
//! JSONL with the same field names. All times are integer milliseconds;
//! fractional input is rounded half-away-from-zero at parse.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum inter-token silence, in ms, that still joins two tokens of the
/// same speaker into one utterance.
pub const DEFAULT_JOIN_GAP_MS: i64 = 20;

/// One transcribed word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub conversation_id: String,
    pub speaker_id: String,
    pub text: String,
    pub start_ms: i64,
    pub stop_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// A maximal run of one speaker's tokens separated by at most the join gap.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker_id: String,
    pub start_ms: i64,
    pub stop_ms: i64,
    pub tokens: Vec<Token>,
}

/// A parsed, sorted single-conversation token stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptStream {
    pub conversation_id: String,
    /// Sorted by (start_ms, stop_ms, speaker_id).
    pub tokens: Vec<Token>,
    pub speakers: BTreeSet<String>,
    /// Moment both parties are present: the start of the second distinct
    /// speaker's first token. `None` when only one speaker ever talks.
    pub conversation_start_ms: Option<i64>,
}

/// Supported ingestion formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TranscriptFormat {
    Jsonl,
    Csv,
}

impl TranscriptFormat {
    /// Guess the format from a file extension; defaults to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => TranscriptFormat::Jsonl,
            _ => TranscriptFormat::Csv,
        }
    }
}

impl TranscriptStream {
    /// Assemble a stream from tokens that are already validated; sorts and
    /// derives the speaker set and conversation start.
    pub fn from_tokens(conversation_id: String, mut tokens: Vec<Token>) -> Result<Self> {
        sort_tokens(&mut tokens);
        check_same_speaker_overlap(&tokens)?;
        let speakers: BTreeSet<String> = tokens.iter().map(|t| t.speaker_id.clone()).collect();
        let conversation_start_ms = second_speaker_start(&tokens);
        Ok(TranscriptStream {
            conversation_id,
            tokens,
            speakers,
            conversation_start_ms,
        })
    }

    /// Drop every token that starts before the conversation joined moment.
    pub fn trim_downtime(mut self) -> Self {
        if let Some(cs) = self.conversation_start_ms {
            self.tokens.retain(|t| t.start_ms >= cs);
            self.speakers = self.tokens.iter().map(|t| t.speaker_id.clone()).collect();
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn sort_tokens(tokens: &mut [Token]) {
    tokens.sort_by(|a, b| {
        (a.start_ms, a.stop_ms, &a.speaker_id).cmp(&(b.start_ms, b.stop_ms, &b.speaker_id))
    });
}

fn second_speaker_start(sorted: &[Token]) -> Option<i64> {
    let first = &sorted.first()?.speaker_id;
    sorted
        .iter()
        .find(|t| &t.speaker_id != first)
        .map(|t| t.start_ms)
}

/// Same-speaker overlapping tokens are upstream corruption, not something to
/// merge silently.
fn check_same_speaker_overlap(sorted: &[Token]) -> Result<()> {
    let mut last_stop: BTreeMap<&str, i64> = BTreeMap::new();
    for t in sorted {
        if let Some(&stop) = last_stop.get(t.speaker_id.as_str()) {
            if t.start_ms < stop {
                return Err(Error::OverlappingSameSpeaker {
                    speaker: t.speaker_id.clone(),
                    at_ms: t.start_ms,
                });
            }
        }
        let entry = last_stop.entry(t.speaker_id.as_str()).or_insert(t.stop_ms);
        *entry = (*entry).max(t.stop_ms);
    }
    Ok(())
}

fn round_ms(value: f64) -> i64 {
    // f64::round is half-away-from-zero.
    value.round() as i64
}

fn parse_time(raw: &str, line: usize, field: &str) -> Result<i64> {
    let raw = raw.trim();
    if let Ok(v) = raw.parse::<i64>() {
        return Ok(v);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(round_ms(v)),
        _ => Err(Error::MalformedRecord {
            line,
            reason: format!("non-numeric {field} {raw:?}"),
        }),
    }
}

fn parse_confidence(raw: &str, line: usize) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if (0.0..=1.0).contains(&v) => Ok(Some(v)),
        _ => Err(Error::MalformedRecord {
            line,
            reason: format!("confidence {raw:?} not in [0,1]"),
        }),
    }
}

fn validate_token(token: &Token, line: usize) -> Result<()> {
    if token.text.trim().is_empty() {
        return Err(Error::MalformedRecord {
            line,
            reason: "empty text".into(),
        });
    }
    if token.conversation_id.trim().is_empty() || token.speaker_id.trim().is_empty() {
        return Err(Error::MalformedRecord {
            line,
            reason: "empty conversation_id or speaker_id".into(),
        });
    }
    if token.start_ms < 0 {
        return Err(Error::MalformedRecord {
            line,
            reason: format!("negative start_ms {}", token.start_ms),
        });
    }
    if token.stop_ms < token.start_ms {
        return Err(Error::NegativeDuration {
            line,
            start: token.start_ms,
            stop: token.stop_ms,
        });
    }
    if let Some(c) = token.confidence {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::MalformedRecord {
                line,
                reason: format!("confidence {c} not in [0,1]"),
            });
        }
    }
    Ok(())
}

fn parse_csv_tokens(bytes: &[u8]) -> Result<Vec<(usize, Token)>> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader
        .headers()
        .map_err(|e| Error::MalformedRecord {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = [
        "conversation_id",
        "speaker_id",
        "text",
        "start_ms",
        "stop_ms",
    ];
    let mut index = [0usize; 5];
    for (slot, name) in required.iter().enumerate() {
        index[slot] = find(name).ok_or_else(|| Error::MalformedRecord {
            line: 1,
            reason: format!("missing column {name}"),
        })?;
    }
    let conf_idx = find("confidence");

    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::MalformedRecord {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| -> Result<&str> {
            record.get(i).ok_or_else(|| Error::MalformedRecord {
                line,
                reason: format!("missing field {}", required.get(i).copied().unwrap_or("?")),
            })
        };
        let token = Token {
            conversation_id: field(index[0])?.to_string(),
            speaker_id: field(index[1])?.to_string(),
            text: field(index[2])?.to_string(),
            start_ms: parse_time(field(index[3])?, line, "start_ms")?,
            stop_ms: parse_time(field(index[4])?, line, "stop_ms")?,
            confidence: match conf_idx.and_then(|i| record.get(i)) {
                Some(raw) => parse_confidence(raw, line)?,
                None => None,
            },
        };
        validate_token(&token, line)?;
        out.push((line, token));
    }
    Ok(out)
}

fn parse_jsonl_tokens(bytes: &[u8]) -> Result<Vec<(usize, Token)>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
        line: 0,
        reason: format!("invalid UTF-8: {e}"),
    })?;
    let mut out = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        #[derive(Deserialize)]
        struct RawToken {
            conversation_id: String,
            speaker_id: String,
            text: String,
            start_ms: serde_json::Value,
            stop_ms: serde_json::Value,
            #[serde(default)]
            confidence: Option<f64>,
        }
        let raw: RawToken = serde_json::from_str(raw_line).map_err(|e| Error::MalformedRecord {
            line,
            reason: e.to_string(),
        })?;
        let time_of = |v: &serde_json::Value, field: &str| -> Result<i64> {
            match v {
                serde_json::Value::Number(n) => {
                    if let Some(i) = n.as_i64() {
                        Ok(i)
                    } else if let Some(f) = n.as_f64() {
                        Ok(round_ms(f))
                    } else {
                        Err(Error::MalformedRecord {
                            line,
                            reason: format!("non-numeric {field}"),
                        })
                    }
                }
                _ => Err(Error::MalformedRecord {
                    line,
                    reason: format!("non-numeric {field}"),
                }),
            }
        };
        let token = Token {
            start_ms: time_of(&raw.start_ms, "start_ms")?,
            stop_ms: time_of(&raw.stop_ms, "stop_ms")?,
            conversation_id: raw.conversation_id,
            speaker_id: raw.speaker_id,
            text: raw.text,
            confidence: raw.confidence,
        };
        if let Some(c) = token.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::MalformedRecord {
                    line,
                    reason: format!("confidence {c} not in [0,1]"),
                });
            }
        }
        validate_token(&token, line)?;
        out.push((line, token));
    }
    Ok(out)
}

/// Parse raw bytes into one stream per conversation id, each sorted.
pub fn parse_streams(bytes: &[u8], format: TranscriptFormat) -> Result<Vec<TranscriptStream>> {
    let tokens = match format {
        TranscriptFormat::Csv => parse_csv_tokens(bytes)?,
        TranscriptFormat::Jsonl => parse_jsonl_tokens(bytes)?,
    };
    let mut by_conversation: BTreeMap<String, Vec<Token>> = BTreeMap::new();
    for (_, token) in tokens {
        by_conversation
            .entry(token.conversation_id.clone())
            .or_default()
            .push(token);
    }
    by_conversation
        .into_iter()
        .map(|(id, toks)| TranscriptStream::from_tokens(id, toks))
        .collect()
}

/// Parse raw bytes holding exactly one conversation.
pub fn parse_transcript(bytes: &[u8], format: TranscriptFormat) -> Result<TranscriptStream> {
    let mut streams = parse_streams(bytes, format)?;
    match streams.len() {
        0 => Err(Error::EmptyTranscript),
        1 => Ok(streams.pop().unwrap()),
        n => Err(Error::NotSingleConversation(n)),
    }
}

/// Identity on streams with exactly two distinct speakers; error otherwise.
pub fn validate_dyad(stream: TranscriptStream) -> Result<TranscriptStream> {
    match stream.speakers.len() {
        2 => Ok(stream),
        n => Err(Error::NotDyadic(n)),
    }
}

/// Join adjacent same-speaker tokens separated by at most `max_gap_ms` of
/// silence. Joining is per speaker: interleaved partner tokens do not break
/// a run. Output is sorted by (start_ms, stop_ms, speaker_id).
pub fn join_tokens(stream: &TranscriptStream, max_gap_ms: i64) -> Vec<Utterance> {
    let mut per_speaker: BTreeMap<&str, Vec<&Token>> = BTreeMap::new();
    for t in &stream.tokens {
        per_speaker
            .entry(t.speaker_id.as_str())
            .or_default()
            .push(t);
    }
    let mut utterances = Vec::new();
    for (speaker, tokens) in per_speaker {
        let mut current: Vec<Token> = Vec::new();
        for token in tokens {
            if let Some(last) = current.last() {
                if token.start_ms - last.stop_ms > max_gap_ms {
                    utterances.push(make_utterance(speaker, std::mem::take(&mut current)));
                }
            }
            current.push(token.clone());
        }
        if !current.is_empty() {
            utterances.push(make_utterance(speaker, current));
        }
    }
    utterances.sort_by(|a, b| {
        (a.start_ms, a.stop_ms, &a.speaker_id).cmp(&(b.start_ms, b.stop_ms, &b.speaker_id))
    });
    utterances
}

fn make_utterance(speaker: &str, tokens: Vec<Token>) -> Utterance {
    Utterance {
        speaker_id: speaker.to_string(),
        start_ms: tokens.first().map(|t| t.start_ms).unwrap_or(0),
        stop_ms: tokens.iter().map(|t| t.stop_ms).max().unwrap_or(0),
        tokens,
    }
}

/// Write tokens as CSV with the canonical column order.
pub fn write_csv<W: Write>(writer: W, tokens: &[Token]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "conversation_id",
        "speaker_id",
        "text",
        "start_ms",
        "stop_ms",
        "confidence",
    ])
    .map_err(io_err)?;
    for t in tokens {
        w.write_record([
            t.conversation_id.as_str(),
            t.speaker_id.as_str(),
            t.text.as_str(),
            &t.start_ms.to_string(),
            &t.stop_ms.to_string(),
            &t.confidence.map(|c| c.to_string()).unwrap_or_default(),
        ])
        .map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Write tokens as JSONL, one object per line.
pub fn write_jsonl<W: Write>(mut writer: W, tokens: &[Token]) -> Result<()> {
    for t in tokens {
        serde_json::to_writer(&mut writer, t).map_err(|e| Error::MalformedRecord {
            line: 0,
            reason: e.to_string(),
        })?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::MalformedRecord {
        line: 0,
        reason: e.to_string(),
    }
}
