//! Tokens, ravel ordering and stream validity.
//!
//! A token marks one active spatial location of a sparse 2D tensor. Streams of
//! tokens are always emitted in strictly increasing ravel order and carry
//! exactly one trailing token with the `end` flag set; [`validate_stream`]
//! checks both properties and is used by tests to audit every inter-module
//! stream of the simulator.

use core::fmt;

use serde::{Deserialize, Serialize};

/// One element of a sparse control stream: a pixel coordinate or, when `end`
/// is set, the end-of-stream marker (its coordinates are ignored).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub x: u16,
    pub y: u16,
    pub end: bool,
}

impl Token {
    pub fn site(x: u16, y: u16) -> Self {
        Token { x, y, end: false }
    }

    pub fn end_marker() -> Self {
        Token { x: 0, y: 0, end: true }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.end {
            write!(f, "[end]")
        } else {
            write!(f, "[{},{}]", self.x, self.y)
        }
    }
}

/// Linearized position `y * width + x`; the mandated streaming order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RavelIndex(pub u32);

/// Ravel index of a non-end token. End tokens have no spatial position, so
/// passing one is a contract violation.
pub fn ravel(t: Token, width: usize) -> Result<RavelIndex, EndTokenError> {
    if t.end {
        return Err(EndTokenError);
    }
    Ok(RavelIndex(ravel_xy(t.x as usize, t.y as usize, width)))
}

/// Ravel order for raw coordinates; callers guarantee `x < width`.
pub(crate) fn ravel_xy(x: usize, y: usize, width: usize) -> u32 {
    (y * width + x) as u32
}

/// `ravel` was asked for the position of an end token.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EndTokenError;

impl fmt::Display for EndTokenError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "end token has no ravel index")
    }
}

impl core::error::Error for EndTokenError {}

/// Why a token stream is malformed, along with the first offending index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamViolation {
    /// Coordinate does not fit the declared width.
    XOutOfBounds { index: usize },
    /// Ravel order failed to strictly increase at this element.
    NotIncreasing { index: usize },
    /// A token appeared after the end marker.
    TokenAfterEnd { index: usize },
    /// The stream has no end marker at all.
    MissingEnd,
}

impl StreamViolation {
    /// Index of the first offending element (`len` for a missing end marker,
    /// i.e. one past the last token).
    pub fn index(&self, len: usize) -> usize {
        match self {
            StreamViolation::XOutOfBounds { index }
            | StreamViolation::NotIncreasing { index }
            | StreamViolation::TokenAfterEnd { index } => *index,
            StreamViolation::MissingEnd => len,
        }
    }
}

impl fmt::Display for StreamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StreamViolation::XOutOfBounds { index } => {
                write!(f, "token {index}: x exceeds stream width")
            }
            StreamViolation::NotIncreasing { index } => {
                write!(f, "token {index}: ravel order not strictly increasing")
            }
            StreamViolation::TokenAfterEnd { index } => {
                write!(f, "token {index}: element after end marker")
            }
            StreamViolation::MissingEnd => write!(f, "stream has no end marker"),
        }
    }
}

impl core::error::Error for StreamViolation {}

/// Checks that `tokens` is a well-formed stream for the given width: strictly
/// increasing ravel order and exactly one end marker, in last position.
/// Violations are reported, not panicked on; the first one wins.
pub fn validate_stream(tokens: &[Token], width: usize) -> Result<(), StreamViolation> {
    let mut prev: Option<u32> = None;
    let mut ended = false;
    for (index, t) in tokens.iter().enumerate() {
        if ended {
            return Err(StreamViolation::TokenAfterEnd { index });
        }
        if t.end {
            ended = true;
            continue;
        }
        if (t.x as usize) >= width {
            return Err(StreamViolation::XOutOfBounds { index });
        }
        let r = ravel_xy(t.x as usize, t.y as usize, width);
        if let Some(p) = prev {
            if r <= p {
                return Err(StreamViolation::NotIncreasing { index });
            }
        }
        prev = Some(r);
    }
    if !ended {
        return Err(StreamViolation::MissingEnd);
    }
    Ok(())
}
