//! Sparse frames, bitmaps and dense tensors.
//!
//! A [`SparseFrame`] is the canonical sparse 2D tensor: tokens in strictly
//! increasing ravel order, one feature vector per token, end marker excluded
//! from storage. A pixel is active iff any of its channels is non-zero at
//! tokenization time; layers downstream may later drive an active site's
//! feature to exact zero without deactivating it (submanifold semantics track
//! coordinates, not values).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::token::{ravel_xy, validate_stream, StreamViolation, Token};

/// Dense row-major H×W×C tensor of f64 scalars; the functional reference
/// representation used by oracles and fixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// Laid out as `[y][x][c]`.
    pub data: Vec<f64>,
}

impl DenseTensor {
    pub fn zeros(height: usize, width: usize, channels: usize) -> Self {
        DenseTensor { height, width, channels, data: vec![0.0; height * width * channels] }
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn at_mut(&mut self, x: usize, y: usize, c: usize) -> &mut f64 {
        &mut self.data[(y * self.width + x) * self.channels + c]
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let base = (y * self.width + x) * self.channels;
        &self.data[base..base + self.channels]
    }
}

/// One bit per pixel, row-major; marks the non-zero locations from which the
/// token stream is generated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bitmap {
    pub height: usize,
    pub width: usize,
    pub bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(height: usize, width: usize) -> Self {
        Bitmap { height, width, bits: vec![false; height * width] }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn density(&self) -> f64 {
        self.popcount() as f64 / (self.height * self.width) as f64
    }
}

/// Ordered sparse 2D tensor: token list (end marker excluded) plus one
/// feature vector per token, flattened as `features[i*channels..][..channels]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFrame {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub tokens: Vec<Token>,
    pub features: Vec<f64>,
}

/// Structural problems with a frame or its construction inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameError {
    TokenOutOfBounds { index: usize },
    Stream(StreamViolation),
    FeatureLengthMismatch { tokens: usize, feature_values: usize, channels: usize },
}

impl fmt::Display for FrameError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameError::TokenOutOfBounds { index } => {
                write!(f, "token {index} lies outside the frame")
            }
            FrameError::Stream(v) => write!(f, "malformed token stream: {v}"),
            FrameError::FeatureLengthMismatch { tokens, feature_values, channels } => write!(
                f,
                "{feature_values} feature values do not cover {tokens} tokens of {channels} channels"
            ),
        }
    }
}

impl core::error::Error for FrameError {}

impl SparseFrame {
    pub fn empty(height: usize, width: usize, channels: usize) -> Self {
        SparseFrame { height, width, channels, tokens: Vec::new(), features: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Feature vector of the i-th token.
    #[inline]
    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    #[inline]
    pub fn feature_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.features[i * self.channels..(i + 1) * self.channels]
    }

    /// The stored tokens followed by the end marker — the stream a hardware
    /// tokenizer would emit for this frame.
    pub fn token_stream(&self) -> Vec<Token> {
        let mut s = self.tokens.clone();
        s.push(Token::end_marker());
        s
    }

    /// Active-site bitmap of this frame.
    pub fn bitmap(&self) -> Bitmap {
        let mut bm = Bitmap::new(self.height, self.width);
        for t in &self.tokens {
            bm.set(t.x as usize, t.y as usize, true);
        }
        bm
    }

    /// Checks ordering, bounds and feature-storage consistency.
    pub fn validate(&self) -> Result<(), FrameError> {
        if self.features.len() != self.tokens.len() * self.channels {
            return Err(FrameError::FeatureLengthMismatch {
                tokens: self.tokens.len(),
                feature_values: self.features.len(),
                channels: self.channels,
            });
        }
        for (index, t) in self.tokens.iter().enumerate() {
            if t.end {
                return Err(FrameError::Stream(StreamViolation::TokenAfterEnd { index }));
            }
            if (t.x as usize) >= self.width || (t.y as usize) >= self.height {
                return Err(FrameError::TokenOutOfBounds { index });
            }
        }
        let stream = self.token_stream();
        validate_stream(&stream, self.width).map_err(FrameError::Stream)
    }
}

/// Builds the frame of all pixels whose feature vector is not all-zero,
/// scanning left-to-right, top-to-bottom so tokens come out in ravel order.
pub fn tokenize(dense: &DenseTensor) -> SparseFrame {
    let mut frame = SparseFrame::empty(dense.height, dense.width, dense.channels);
    for y in 0..dense.height {
        for x in 0..dense.width {
            let px = dense.pixel(x, y);
            if px.iter().any(|v| *v != 0.0) {
                frame.tokens.push(Token::site(x as u16, y as u16));
                frame.features.extend_from_slice(px);
            }
        }
    }
    frame
}

/// Equivalent of [`tokenize`] for the hardware-facing input layout: an
/// activity bitmap plus the packed feature records of the active pixels, in
/// ravel order. Produces the identical frame.
pub fn tokenize_packed(
    bitmap: &Bitmap,
    packed: &[f64],
    channels: usize,
) -> Result<SparseFrame, FrameError> {
    let count = bitmap.popcount();
    if packed.len() != count * channels {
        return Err(FrameError::FeatureLengthMismatch {
            tokens: count,
            feature_values: packed.len(),
            channels,
        });
    }
    let mut frame = SparseFrame::empty(bitmap.height, bitmap.width, channels);
    let mut next = 0;
    for y in 0..bitmap.height {
        for x in 0..bitmap.width {
            if bitmap.get(x, y) {
                frame.tokens.push(Token::site(x as u16, y as u16));
                frame.features.extend_from_slice(&packed[next..next + channels]);
                next += channels;
            }
        }
    }
    Ok(frame)
}

/// Scatters a frame back to a dense tensor: zeros everywhere except token
/// sites, which carry their feature vectors.
pub fn densify(frame: &SparseFrame) -> Result<DenseTensor, FrameError> {
    let mut dense = DenseTensor::zeros(frame.height, frame.width, frame.channels);
    for (i, t) in frame.tokens.iter().enumerate() {
        if (t.x as usize) >= frame.width || (t.y as usize) >= frame.height || t.end {
            return Err(FrameError::TokenOutOfBounds { index: i });
        }
        let base = (t.y as usize * frame.width + t.x as usize) * frame.channels;
        dense.data[base..base + frame.channels].copy_from_slice(frame.feature(i));
    }
    Ok(dense)
}

/// Fraction of active pixels, `tokens / (H*W)`.
pub fn spatial_sparsity(frame: &SparseFrame) -> f64 {
    frame.len() as f64 / (frame.height * frame.width) as f64
}

/// Lookup table from ravel index to token index, for O(1) neighbor queries.
pub(crate) fn site_index(frame: &SparseFrame) -> Vec<i32> {
    let mut idx = vec![-1i32; frame.height * frame.width];
    for (i, t) in frame.tokens.iter().enumerate() {
        idx[ravel_xy(t.x as usize, t.y as usize, frame.width) as usize] = i as i32;
    }
    idx
}
