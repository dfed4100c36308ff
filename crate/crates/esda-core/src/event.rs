//! AER event records, time-window clipping and the 2-channel histogram input
//! representation, plus a synthetic recording generator so experiments run
//! without dataset downloads.
//!
//! Parsers operate on byte slices; opening files is the companion crate's job.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::frame::SparseFrame;
use crate::token::Token;

/// One camera event: timestamp in microseconds, pixel coordinates, polarity
/// normalized to ±1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: i8,
}

/// Half-open clipping window `[t0, t0 + dt)` in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub t0: u64,
    pub dt: u64,
}

/// Input encodings accepted by [`parse_aer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AerFormat {
    Csv,
    Bin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventError {
    /// Malformed record; `line` is 1-based for CSV, `offset` a byte offset for
    /// binary input.
    Parse { line: usize, offset: usize, what: String },
    /// Event coordinates exceed the declared sensor bounds.
    CoordRange { index: usize, x: u16, y: u16, width: u16, height: u16 },
    EmptyDataset,
}

impl fmt::Display for EventError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventError::Parse { line, offset, what } => {
                if *line > 0 {
                    write!(f, "parse error at line {line}: {what}")
                } else {
                    write!(f, "parse error at byte offset {offset}: {what}")
                }
            }
            EventError::CoordRange { index, x, y, width, height } => write!(
                f,
                "event {index} at ({x},{y}) outside sensor bounds {width}x{height}"
            ),
            EventError::EmptyDataset => write!(f, "empty dataset"),
        }
    }
}

impl core::error::Error for EventError {}

/// Magic bytes opening a binary AER recording.
pub const AER_MAGIC: &[u8; 4] = b"AER1";

/// Parsed recording: events plus the sensor geometry when the format declares
/// one (the binary header does; CSV does not).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recording {
    pub events: Vec<Event>,
    pub sensor: Option<(u16, u16)>,
}

/// Parses an AER byte stream in the chosen format. Events are returned in
/// timestamp order (a stable sort is applied if the input is out of order) and
/// polarity is normalized so that 0 and −1 encodings both map to −1, anything
/// positive to +1.
pub fn parse_aer(bytes: &[u8], format: AerFormat) -> Result<Recording, EventError> {
    let mut rec = match format {
        AerFormat::Csv => parse_csv(bytes),
        AerFormat::Bin => parse_bin(bytes),
    }?;
    // Stable: events with equal timestamps keep their recording order.
    rec.events.sort_by_key(|e| e.t);
    if let Some((w, h)) = rec.sensor {
        for (index, e) in rec.events.iter().enumerate() {
            if e.x >= w || e.y >= h {
                return Err(EventError::CoordRange {
                    index,
                    x: e.x,
                    y: e.y,
                    width: w,
                    height: h,
                });
            }
        }
    }
    Ok(rec)
}

fn normalize_polarity(raw: i64) -> i8 {
    if raw > 0 {
        1
    } else {
        -1
    }
}

fn parse_csv(bytes: &[u8]) -> Result<Recording, EventError> {
    let text = core::str::from_utf8(bytes).map_err(|e| EventError::Parse {
        line: 0,
        offset: e.valid_up_to(),
        what: String::from("not valid UTF-8"),
    })?;
    let mut events = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        // Optional header line.
        if i == 0 && line.eq_ignore_ascii_case("t,x,y,p") {
            continue;
        }
        let mut fields = line.split(',');
        let mut next = |name: &str| -> Result<&str, EventError> {
            fields.next().map(str::trim).ok_or_else(|| EventError::Parse {
                line: line_no,
                offset: 0,
                what: format!("missing field `{name}`"),
            })
        };
        let t: u64 = parse_field(next("t")?, "t", line_no)?;
        let x: u16 = parse_field(next("x")?, "x", line_no)?;
        let y: u16 = parse_field(next("y")?, "y", line_no)?;
        let p: i64 = parse_field(next("p")?, "p", line_no)?;
        if fields.next().is_some() {
            return Err(EventError::Parse {
                line: line_no,
                offset: 0,
                what: String::from("trailing fields"),
            });
        }
        events.push(Event { t, x, y, p: normalize_polarity(p) });
    }
    Ok(Recording { events, sensor: None })
}

fn parse_field<T: core::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T, EventError> {
    s.parse().map_err(|_| EventError::Parse {
        line,
        offset: 0,
        what: format!("invalid `{name}` value `{s}`"),
    })
}

/// Binary layout: magic "AER1", u16 width, u16 height, u64 count, then
/// `count` records of { u64 t, u16 x, u16 y, i8 p }, all little-endian.
fn parse_bin(bytes: &[u8]) -> Result<Recording, EventError> {
    let err = |offset: usize, what: &str| EventError::Parse {
        line: 0,
        offset,
        what: String::from(what),
    };
    if bytes.len() < 16 {
        return Err(err(0, "truncated header"));
    }
    if &bytes[0..4] != AER_MAGIC {
        return Err(err(0, "bad magic, expected AER1"));
    }
    let width = u16::from_le_bytes([bytes[4], bytes[5]]);
    let height = u16::from_le_bytes([bytes[6], bytes[7]]);
    let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    const REC: usize = 13;
    if bytes.len() < 16 + count * REC {
        return Err(err(bytes.len(), "truncated record section"));
    }
    let mut events = Vec::with_capacity(count);
    for i in 0..count {
        let o = 16 + i * REC;
        let t = u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let x = u16::from_le_bytes([bytes[o + 8], bytes[o + 9]]);
        let y = u16::from_le_bytes([bytes[o + 10], bytes[o + 11]]);
        let p = bytes[o + 12] as i8;
        events.push(Event { t, x, y, p: normalize_polarity(p as i64) });
    }
    Ok(Recording { events, sensor: Some((width, height)) })
}

/// Serializes events to the binary AER layout consumed by [`parse_aer`].
pub fn encode_bin(events: &[Event], width: u16, height: u16) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + events.len() * 13);
    out.extend_from_slice(AER_MAGIC);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&(events.len() as u64).to_le_bytes());
    for e in events {
        out.extend_from_slice(&e.t.to_le_bytes());
        out.extend_from_slice(&e.x.to_le_bytes());
        out.extend_from_slice(&e.y.to_le_bytes());
        out.push(e.p as u8);
    }
    out
}

/// Serializes events to the CSV layout (`t,x,y,p` header, ±1 polarity).
pub fn encode_csv(events: &[Event]) -> String {
    let mut out = String::from("t,x,y,p\n");
    for e in events {
        out.push_str(&format!("{},{},{},{}\n", e.t, e.x, e.y, e.p));
    }
    out
}

/// Events with `t0 <= t < t0 + dt`, order preserved. Consecutive windows
/// therefore partition a recording.
pub fn clip_window(events: &[Event], w: WindowSpec) -> Vec<Event> {
    let hi = w.t0.saturating_add(w.dt);
    events.iter().copied().filter(|e| e.t >= w.t0 && e.t < hi).collect()
}

/// Accumulates events into the 2-channel histogram frame: channel 0 counts
/// positive events per pixel, channel 1 negative ones, each optionally clamped
/// to `saturation`. Pixels with both counts zero stay inactive.
pub fn histogram(
    events: &[Event],
    height: usize,
    width: usize,
    saturation: Option<f64>,
) -> Result<SparseFrame, EventError> {
    let mut counts = alloc::vec![0.0f64; height * width * 2];
    for (index, e) in events.iter().enumerate() {
        if (e.x as usize) >= width || (e.y as usize) >= height {
            return Err(EventError::CoordRange {
                index,
                x: e.x,
                y: e.y,
                width: width as u16,
                height: height as u16,
            });
        }
        let ch = if e.p > 0 { 0 } else { 1 };
        counts[(e.y as usize * width + e.x as usize) * 2 + ch] += 1.0;
    }
    if let Some(cap) = saturation {
        for v in counts.iter_mut() {
            if *v > cap {
                *v = cap;
            }
        }
    }
    let mut frame = SparseFrame::empty(height, width, 2);
    for y in 0..height {
        for x in 0..width {
            let base = (y * width + x) * 2;
            let (pos, neg) = (counts[base], counts[base + 1]);
            if pos != 0.0 || neg != 0.0 {
                frame.tokens.push(Token::site(x as u16, y as u16));
                frame.features.push(pos);
                frame.features.push(neg);
            }
        }
    }
    Ok(frame)
}

/// Parameters for the synthetic moving-edge recording generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub height: u16,
    pub width: u16,
    /// Recording length in microseconds.
    pub duration_us: u64,
    /// Mean fraction of pixels firing per time step along the edge band.
    pub density: f64,
    /// Uniform background noise events per time step, as a fraction of pixels.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { height: 32, width: 32, duration_us: 10_000, density: 0.5, noise: 0.002, seed: 1 }
    }
}

/// Generates a deterministic synthetic recording: a vertical edge sweeping
/// left to right, firing +1 events on its leading band and −1 events on its
/// trailing band, plus uniform noise. Timestamps are non-decreasing.
pub fn synth_recording(spec: &SynthSpec) -> Vec<Event> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut events = Vec::new();
    let steps = 100u64.min(spec.duration_us.max(1));
    let step_us = spec.duration_us.max(1) / steps;
    let w = spec.width as u64;
    for s in 0..steps {
        let t = s * step_us;
        let edge = ((s * w) / steps) as i64;
        for y in 0..spec.height {
            for (band, p) in [(edge, 1i8), (edge - 1, -1i8)] {
                if band < 0 || band >= spec.width as i64 {
                    continue;
                }
                if rng.gen::<f64>() < spec.density {
                    // Events within one step share a timestamp; the stable
                    // sort in parse keeps generation order for them.
                    events.push(Event { t, x: band as u16, y, p });
                }
            }
        }
        let noise_events = (spec.noise * (spec.height as f64) * (spec.width as f64)) as usize;
        for _ in 0..noise_events {
            let x = rng.gen_range(0..spec.width);
            let y = rng.gen_range(0..spec.height);
            let p = if rng.gen::<bool>() { 1 } else { -1 };
            events.push(Event { t, x, y, p });
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn csv_maps_fields_and_normalizes_polarity() {
        let rec = parse_aer(b"100,3,4,1\n200,3,4,0", AerFormat::Csv).unwrap();
        assert_eq!(
            rec.events,
            vec![Event { t: 100, x: 3, y: 4, p: 1 }, Event { t: 200, x: 3, y: 4, p: -1 }]
        );
        assert_eq!(rec.sensor, None);
    }

    #[test]
    fn csv_empty_input_gives_empty_list() {
        let rec = parse_aer(b"", AerFormat::Csv).unwrap();
        assert!(rec.events.is_empty());
    }

    #[test]
    fn csv_header_line_is_skipped() {
        let rec = parse_aer(b"t,x,y,p\n7,1,2,-1\n", AerFormat::Csv).unwrap();
        assert_eq!(rec.events, vec![Event { t: 7, x: 1, y: 2, p: -1 }]);
    }

    #[test]
    fn csv_malformed_record_names_line() {
        let err = parse_aer(b"1,2,3,1\nbogus,2,3,1\n", AerFormat::Csv).unwrap_err();
        match err {
            EventError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bin_roundtrip_and_bounds_check() {
        let events = vec![
            Event { t: 5, x: 1, y: 0, p: 1 },
            Event { t: 9, x: 3, y: 2, p: -1 },
        ];
        let bytes = encode_bin(&events, 4, 4);
        let rec = parse_aer(&bytes, AerFormat::Bin).unwrap();
        assert_eq!(rec.events, events);
        assert_eq!(rec.sensor, Some((4, 4)));

        let bad = encode_bin(&[Event { t: 1, x: 9, y: 0, p: 1 }], 4, 4);
        assert!(matches!(
            parse_aer(&bad, AerFormat::Bin),
            Err(EventError::CoordRange { .. })
        ));
    }

    #[test]
    fn clip_window_is_half_open() {
        let events = [5u64, 10, 15]
            .iter()
            .map(|t| Event { t: *t, x: 0, y: 0, p: 1 })
            .collect::<Vec<_>>();
        let clipped = clip_window(&events, WindowSpec { t0: 10, dt: 5 });
        assert_eq!(clipped.len(), 1);
        assert_eq!(clipped[0].t, 10);
    }

    #[test]
    fn clip_window_covering_all_is_identity() {
        let events = [1u64, 2, 3]
            .iter()
            .map(|t| Event { t: *t, x: 0, y: 0, p: 1 })
            .collect::<Vec<_>>();
        assert_eq!(clip_window(&events, WindowSpec { t0: 0, dt: 100 }), events);
    }

    #[test]
    fn histogram_counts_per_polarity() {
        let events = vec![
            Event { t: 0, x: 2, y: 2, p: 1 },
            Event { t: 1, x: 2, y: 2, p: 1 },
            Event { t: 2, x: 2, y: 2, p: 1 },
        ];
        let f = histogram(&events, 4, 4, None).unwrap();
        assert_eq!(f.tokens, vec![Token::site(2, 2)]);
        assert_eq!(f.feature(0), &[3.0, 0.0]);
    }

    #[test]
    fn histogram_of_no_events_is_empty() {
        let f = histogram(&[], 4, 4, None).unwrap();
        assert!(f.is_empty());
    }

    #[test]
    fn histogram_saturation_clamps_counts() {
        let events = vec![
            Event { t: 0, x: 1, y: 1, p: 1 },
            Event { t: 1, x: 1, y: 1, p: 1 },
            Event { t: 2, x: 1, y: 1, p: -1 },
        ];
        let f = histogram(&events, 3, 3, Some(1.0)).unwrap();
        assert_eq!(f.feature(0), &[1.0, 1.0]);
    }

    #[test]
    fn histogram_rejects_out_of_bounds() {
        let events = vec![Event { t: 0, x: 9, y: 0, p: 1 }];
        assert!(matches!(
            histogram(&events, 4, 4, None),
            Err(EventError::CoordRange { .. })
        ));
    }

    #[test]
    fn synth_timestamps_non_decreasing() {
        let events = synth_recording(&SynthSpec::default());
        assert!(!events.is_empty());
        assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
    }
}
