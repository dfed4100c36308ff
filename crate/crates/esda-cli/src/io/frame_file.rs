//! Sparse frame container (`.esf`): a one-line JSON header
//! `{height, width, channels, count}` terminated by `\n`, followed by `count`
//! binary records of `u16 x, u16 y` and `channels` little-endian f32 values,
//! sorted by ravel order.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use esda_core::frame::SparseFrame;
use esda_core::token::Token;
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    height: usize,
    width: usize,
    channels: usize,
    count: usize,
}

pub fn write_frame(path: &Path, frame: &SparseFrame) -> Result<()> {
    let mut out = Vec::new();
    let header = Header {
        height: frame.height,
        width: frame.width,
        channels: frame.channels,
        count: frame.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.push(b'\n');
    for (i, t) in frame.tokens.iter().enumerate() {
        out.extend_from_slice(&t.x.to_le_bytes());
        out.extend_from_slice(&t.y.to_le_bytes());
        for v in frame.feature(i) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out).with_context(|| format!("writing frame {}", path.display()))
}

pub fn read_frame(path: &Path) -> Result<SparseFrame> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .with_context(|| format!("reading frame {}", path.display()))?;
    parse_frame(&bytes).with_context(|| format!("parsing frame {}", path.display()))
}

pub fn parse_frame(bytes: &[u8]) -> Result<SparseFrame> {
    let nl = bytes
        .iter()
        .position(|b| *b == b'\n')
        .context("missing header line")?;
    let header: Header = serde_json::from_slice(&bytes[..nl]).context("bad header")?;
    let record = 4 + 4 * header.channels;
    let body = &bytes[nl + 1..];
    if body.len() != header.count * record {
        bail!(
            "frame body is {} bytes, expected {} ({} records of {} bytes)",
            body.len(),
            header.count * record,
            header.count,
            record
        );
    }
    let mut frame = SparseFrame::empty(header.height, header.width, header.channels);
    for i in 0..header.count {
        let o = i * record;
        let x = u16::from_le_bytes([body[o], body[o + 1]]);
        let y = u16::from_le_bytes([body[o + 2], body[o + 3]]);
        frame.tokens.push(Token::site(x, y));
        for c in 0..header.channels {
            let f = o + 4 + 4 * c;
            frame
                .features
                .push(f32::from_le_bytes([body[f], body[f + 1], body[f + 2], body[f + 3]]) as f64);
        }
    }
    frame.validate().map_err(|e| anyhow::anyhow!("invalid frame: {e}"))?;
    Ok(frame)
}

/// Writer counterpart kept symmetric for tests.
pub fn frame_bytes(frame: &SparseFrame) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    let header = Header {
        height: frame.height,
        width: frame.width,
        channels: frame.channels,
        count: frame.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.push(b'\n');
    for (i, t) in frame.tokens.iter().enumerate() {
        out.extend_from_slice(&t.x.to_le_bytes());
        out.extend_from_slice(&t.y.to_le_bytes());
        for v in frame.feature(i) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// All `.esf` frames in a directory, sorted by file name for determinism.
pub fn read_frame_dir(dir: &Path) -> Result<Vec<SparseFrame>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "esf"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .esf frames in {}", dir.display());
    }
    paths.iter().map(|p| read_frame(p)).collect()
}

#[allow(dead_code)]
pub fn write_frame_to(w: &mut impl Write, frame: &SparseFrame) -> Result<()> {
    w.write_all(&frame_bytes(frame)?)?;
    Ok(())
}
