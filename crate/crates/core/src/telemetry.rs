//! Raw OIDS text parsing.
//!
//! A feed is line oriented. Three kinds of lines are recognised:
//!
//! - header lines: a 5-digit platform token followed by positional fields
//!   that include a `YYYY-MM-DD` date,
//! - block timestamp lines: `YYYY-MM-DD HH:MM:SS <seq> [bytes...]`,
//! - hex lines: whitespace separated two-digit hex bytes.
//!
//! Every data line belongs to the most recent header. Bytes are paired
//! big-endian into 16-bit words across line boundaries.

use std::fmt;
use std::io::BufRead;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%d %H:%M:%S%.f";
const BYTES_PER_RENDERED_LINE: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("input contains no message blocks")]
    EmptyInput,
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed block timestamp: {reason}")]
    MalformedTimestamp { line: usize, reason: String },
    #[error("line {line}: bad hex token {token:?}")]
    BadHexToken { line: usize, token: String },
    #[error("lines {first}-{last}: block ends with an unpaired byte")]
    OddByteCount { first: usize, last: usize },
    #[error("line {line}: data line before any header")]
    OrphanData { line: usize },
    #[error("read failure: {0}")]
    Io(String),
}

/// Positional fields of one header line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaderFields {
    pub platform_id: String,
    pub message_id: String,
    pub field_a: i64,
    pub field_b: i64,
    pub class_code: char,
    pub pass_count: u32,
    pub observed_at: NaiveDateTime,
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_or_zero: f64,
    pub transmitter_id: String,
}

impl fmt::Display for HeaderFields {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {} {} {} {} {}",
            self.platform_id,
            self.message_id,
            self.field_a,
            self.field_b,
            self.class_code,
            self.pass_count,
            self.observed_at.format(TIMESTAMP_FORMAT),
            self.latitude,
            self.longitude,
            self.altitude_or_zero,
            self.transmitter_id
        )
    }
}

/// One header plus the words that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageBlock {
    pub header: HeaderFields,
    pub block_time: Option<NaiveDateTime>,
    pub words: Vec<u16>,
    /// 1-based (first_line, last_line) of the block in its source.
    pub source_line_span: (usize, usize),
}

impl MessageBlock {
    /// A header with no data lines: a position-only message.
    pub fn is_position_only(&self) -> bool {
        self.words.is_empty()
    }

    /// Effective time of the levels carried by this block.
    pub fn effective_time(&self) -> NaiveDateTime {
        self.block_time.unwrap_or(self.header.observed_at)
    }

    /// Renders the block back to feed text, six bytes per hex line.
    pub fn render(&self) -> String {
        let mut out = self.header.to_string();
        out.push('\n');
        if let Some(t) = self.block_time {
            out.push_str(&t.format(TIMESTAMP_FORMAT).to_string());
            out.push_str(" 1\n");
        }
        let bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_be_bytes()).collect();
        for chunk in bytes.chunks(BYTES_PER_RENDERED_LINE) {
            let line: Vec<String> = chunk.iter().map(|b| format!("{b:02X}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

fn is_date_token(tok: &str) -> bool {
    let b = tok.as_bytes();
    b.len() == 10
        && b.iter().enumerate().all(|(i, c)| match i {
            4 | 7 => *c == b'-',
            _ => c.is_ascii_digit(),
        })
}

fn is_numeric(tok: &str) -> bool {
    !tok.is_empty() && tok.bytes().all(|c| c.is_ascii_digit())
}

fn looks_like_header(tokens: &[&str]) -> bool {
    tokens.first().is_some_and(|t| t.len() == 5 && is_numeric(t))
        && tokens.iter().skip(1).any(|t| is_date_token(t))
}

fn parse_timestamp(date: &str, time: &str) -> Result<NaiveDateTime, String> {
    if !is_date_token(date) {
        return Err(format!("bad date {date:?}"));
    }
    NaiveDateTime::parse_from_str(&format!("{date} {time}"), TIMESTAMP_FORMAT)
        .map_err(|e| format!("bad timestamp {date} {time}: {e}"))
}

/// Parses one header line.
///
/// The canonical form has 12 whitespace separated tokens: platform id,
/// message id, two integer fields, a class letter, pass count, date, time,
/// latitude, longitude, altitude and transmitter id. A 13-token form where
/// the message id is split over two numeric tokens is also accepted; the
/// two halves are joined.
pub fn parse_header(line: &str) -> Result<HeaderFields, ParseError> {
    parse_header_at(line, 1)
}

fn parse_header_at(line: &str, line_no: usize) -> Result<HeaderFields, ParseError> {
    let bad = |reason: String| ParseError::MalformedHeader { line: line_no, reason };
    let tokens: Vec<&str> = line.split_whitespace().collect();
    let (message_id, rest) = match tokens.len() {
        12 => (tokens[1].to_string(), &tokens[2..]),
        13 => {
            if !is_numeric(tokens[2]) {
                return Err(bad(format!("split message id part {:?} is not numeric", tokens[2])));
            }
            (format!("{}{}", tokens[1], tokens[2]), &tokens[3..])
        }
        n => return Err(bad(format!("expected 12 tokens, found {n}"))),
    };
    let platform_id = tokens[0];
    if !is_numeric(platform_id) {
        return Err(bad(format!("platform id {platform_id:?} is not numeric")));
    }
    if !is_numeric(&message_id) {
        return Err(bad(format!("message id {message_id:?} is not numeric")));
    }
    let int = |tok: &str, name: &str| -> Result<i64, ParseError> {
        tok.parse::<i64>().map_err(|_| bad(format!("{name} {tok:?} is not an integer")))
    };
    let real = |tok: &str, name: &str| -> Result<f64, ParseError> {
        tok.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(format!("{name} {tok:?} is not a number")))
    };

    let field_a = int(rest[0], "field_a")?;
    let field_b = int(rest[1], "field_b")?;
    let mut class = rest[2].chars();
    let class_code = match (class.next(), class.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => c,
        _ => return Err(bad(format!("class code {:?} is not one uppercase letter", rest[2]))),
    };
    let pass_count = rest[3]
        .parse::<u32>()
        .map_err(|_| bad(format!("pass count {:?} is not a count", rest[3])))?;
    let observed_at = parse_timestamp(rest[4], rest[5]).map_err(bad)?;
    let latitude = real(rest[6], "latitude")?;
    if !(-90.0..=90.0).contains(&latitude) {
        return Err(bad(format!("latitude {latitude} outside [-90, 90]")));
    }
    let longitude = real(rest[7], "longitude")?;
    if !(-180.0..=180.0).contains(&longitude) {
        return Err(bad(format!("longitude {longitude} outside [-180, 180]")));
    }
    let altitude_or_zero = real(rest[8], "altitude")?;

    Ok(HeaderFields {
        platform_id: platform_id.to_string(),
        message_id,
        field_a,
        field_b,
        class_code,
        pass_count,
        observed_at,
        latitude,
        longitude,
        altitude_or_zero,
        transmitter_id: rest[9].to_string(),
    })
}

fn hex_byte(tok: &str, line: usize) -> Result<u8, ParseError> {
    if tok.len() != 2 || !tok.bytes().all(|c| c.is_ascii_hexdigit()) {
        return Err(ParseError::BadHexToken { line, token: tok.to_string() });
    }
    u8::from_str_radix(tok, 16).map_err(|_| ParseError::BadHexToken { line, token: tok.to_string() })
}

fn pair_words(bytes: &[u8], span: (usize, usize)) -> Result<Vec<u16>, ParseError> {
    if !bytes.len().is_multiple_of(2) {
        return Err(ParseError::OddByteCount { first: span.0, last: span.1 });
    }
    Ok(bytes.chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect())
}

/// Converts hex lines into big-endian 16-bit words.
pub fn words_of<S: AsRef<str>>(hex_lines: &[S]) -> Result<Vec<u16>, ParseError> {
    let mut bytes = Vec::new();
    for (i, line) in hex_lines.iter().enumerate() {
        for tok in line.as_ref().split_whitespace() {
            bytes.push(hex_byte(tok, i + 1)?);
        }
    }
    pair_words(&bytes, (1, hex_lines.len().max(1)))
}

struct PendingBlock {
    header: HeaderFields,
    block_time: Option<NaiveDateTime>,
    bytes: Vec<u8>,
    first: usize,
    last: usize,
}

impl PendingBlock {
    fn finish(self) -> Result<MessageBlock, ParseError> {
        let span = (self.first, self.last);
        Ok(MessageBlock {
            words: pair_words(&self.bytes, span)?,
            header: self.header,
            block_time: self.block_time,
            source_line_span: span,
        })
    }
}

/// Splits a whole feed into message blocks, in file order.
pub fn parse_stream(input: &str) -> Result<Vec<MessageBlock>, ParseError> {
    parse_lines(input.lines().map(|l| Ok(l.to_string())))
}

/// Same as [`parse_stream`] over a buffered reader.
pub fn parse_reader<R: BufRead>(reader: R) -> Result<Vec<MessageBlock>, ParseError> {
    parse_lines(reader.lines().map(|l| l.map_err(|e| ParseError::Io(e.to_string()))))
}

fn parse_lines<I>(lines: I) -> Result<Vec<MessageBlock>, ParseError>
where
    I: Iterator<Item = Result<String, ParseError>>,
{
    let mut blocks = Vec::new();
    let mut current: Option<PendingBlock> = None;

    for (idx, line) in lines.enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }

        if looks_like_header(&tokens) {
            let header = parse_header_at(&line, line_no)?;
            if let Some(done) = current.take() {
                blocks.push(done.finish()?);
            }
            current = Some(PendingBlock {
                header,
                block_time: None,
                bytes: Vec::new(),
                first: line_no,
                last: line_no,
            });
            continue;
        }

        let block = current.as_mut().ok_or(ParseError::OrphanData { line: line_no })?;
        let byte_tokens = if is_date_token(tokens[0]) {
            let bad = |reason: String| ParseError::MalformedTimestamp { line: line_no, reason };
            if tokens.len() < 3 {
                return Err(bad("expected date, time and sequence number".into()));
            }
            let stamp = parse_timestamp(tokens[0], tokens[1]).map_err(bad)?;
            if !is_numeric(tokens[2]) {
                return Err(bad(format!("sequence number {:?} is not numeric", tokens[2])));
            }
            // Only the first timestamp line of a block sets its time.
            block.block_time.get_or_insert(stamp);
            &tokens[3..]
        } else {
            &tokens[..]
        };
        for tok in byte_tokens {
            block.bytes.push(hex_byte(tok, line_no)?);
        }
        block.last = line_no;
    }

    if let Some(done) = current.take() {
        blocks.push(done.finish()?);
    }
    if blocks.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    Ok(blocks)
}
