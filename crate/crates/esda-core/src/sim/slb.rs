//! Sparse Line Buffer, stride 1: a k-row feature buffer, a token FIFO and an
//! activity bitmap that together resolve k×k window dependencies on a sparse
//! stream.
//!
//! Control follows the head/tail token comparison
//!
//! ```text
//! v = ((t.x - h.x >= u) && (t.y - h.y >= u)) || (t.y - h.y >= u + 1)
//! r = (t.y - h.y <= u)                                 u = (k - 1) / 2
//! ```
//!
//! where `h` is the token FIFO head (the next output location) and `t` the
//! most recently observed input token — observed, not accepted: a pending
//! input the ready rule rejects still advances `t`, which is exactly what
//! makes the design deadlock-free (a refused row-(h.y+u+1) token forces the
//! second clause of `v` and drains the head). Once the end marker has been
//! seen, `v` is forced true so frame-bottom heads flush.
//!
//! Within a cycle the input phase runs before the output phase: a pending
//! token that belongs to the head's own window (its row delta is at most `u`,
//! so `r` admits it) must land in the buffer before the head's validity can
//! fire off the window emission.

use alloc::vec;
use alloc::vec::Vec;

use crate::token::Token;

/// Eq.-style validity test: head `h` may be emitted once the tail has moved
/// past the bottom-right of `h`'s window, or a full row beyond it, or the
/// stream has ended.
pub fn slb_valid(h: Token, t: Token, u: usize, end_seen: bool) -> bool {
    if end_seen {
        return true;
    }
    let u = u as i64;
    let dx = t.x as i64 - h.x as i64;
    let dy = t.y as i64 - h.y as i64;
    (dx >= u && dy >= u) || dy >= u + 1
}

/// Ready test: a new input is accepted while it stays within the buffered
/// rows of the current head (`t_new.y - h.y <= u`). End markers are always
/// accepted.
pub fn slb_ready(h: Token, t_new: Token, u: usize) -> bool {
    if t_new.end {
        return true;
    }
    t_new.y as i64 - h.y as i64 <= u as i64
}

/// k-row ring of feature vectors plus the activity bitmap, indexed by
/// `y mod k`. A slot is recycled the first time a token from a new row lands
/// in it; by then the ready rule guarantees the old row can no longer be
/// reached by any future window.
#[derive(Debug)]
pub struct RowBuffer {
    kernel: usize,
    width: usize,
    channels: usize,
    /// Actual row held by each slot, or -1 when untouched.
    tags: Vec<i64>,
    bits: Vec<bool>,
    feats: Vec<f64>,
}

impl RowBuffer {
    pub fn new(kernel: usize, width: usize, channels: usize) -> Self {
        RowBuffer {
            kernel,
            width,
            channels,
            tags: vec![-1; kernel],
            bits: vec![false; kernel * width],
            feats: vec![0.0; kernel * width * channels],
        }
    }

    pub fn store(&mut self, x: usize, y: usize, feature: &[f64]) {
        let slot = y % self.kernel;
        if self.tags[slot] != y as i64 {
            self.tags[slot] = y as i64;
            for b in &mut self.bits[slot * self.width..(slot + 1) * self.width] {
                *b = false;
            }
        }
        self.bits[slot * self.width + x] = true;
        let base = (slot * self.width + x) * self.channels;
        self.feats[base..base + self.channels].copy_from_slice(feature);
    }

    fn active(&self, x: i64, y: i64, height: usize) -> bool {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= height as i64 {
            return false;
        }
        let slot = y as usize % self.kernel;
        self.tags[slot] == y && self.bits[slot * self.width + x as usize]
    }

    /// Bitmap query of the k×k window centered at `(cx, cy)`: the active
    /// in-bounds taps in ascending kernel-offset order (0 = top-left).
    pub fn query_window(&self, cx: i64, cy: i64, height: usize) -> Vec<(u8, Vec<f64>)> {
        let k = self.kernel as i64;
        let u = (k - 1) / 2;
        let mut out = Vec::new();
        for ky in 0..k {
            for kx in 0..k {
                let (ix, iy) = (cx + kx - u, cy + ky - u);
                if self.active(ix, iy, height) {
                    let slot = iy as usize % self.kernel;
                    let base = (slot * self.width + ix as usize) * self.channels;
                    out.push((
                        (ky * k + kx) as u8,
                        self.feats[base..base + self.channels].to_vec(),
                    ));
                }
            }
        }
        out
    }
}

/// Stride-1 SLB state: token FIFO with observable head and tail, the k-row
/// buffer, and the end/flush flags.
#[derive(Debug)]
pub struct SlbState {
    pub kernel: usize,
    pub height: usize,
    pub width: usize,
    pub fifo_capacity: usize,
    pub fifo: alloc::collections::VecDeque<Token>,
    pub rows: RowBuffer,
    /// Most recently observed input token (accepted or still pending).
    pub tail: Option<Token>,
    pub end_seen: bool,
    pub end_sent: bool,
    /// Remaining (offset, feature) taps of the window being streamed out.
    pub emit: alloc::collections::VecDeque<(u8, Vec<f64>)>,
}

impl SlbState {
    pub fn new(kernel: usize, height: usize, width: usize, channels: usize, fifo_capacity: usize) -> Self {
        SlbState {
            kernel,
            height,
            width,
            fifo_capacity,
            fifo: alloc::collections::VecDeque::new(),
            rows: RowBuffer::new(kernel, width, channels),
            tail: None,
            end_seen: false,
            end_sent: false,
            emit: alloc::collections::VecDeque::new(),
        }
    }

    pub fn radius(&self) -> usize {
        (self.kernel - 1) / 2
    }

    /// Observes the pending input token, advancing the tail even when the
    /// ready rule rejects acceptance this cycle.
    pub fn observe(&mut self, t: Token) {
        if !t.end {
            self.tail = Some(t);
        }
    }

    /// Whether a pending site token may be accepted right now.
    pub fn ready_for(&self, t_new: Token) -> bool {
        if self.fifo.len() >= self.fifo_capacity {
            return false;
        }
        match self.fifo.front() {
            None => true,
            Some(h) => slb_ready(*h, t_new, self.radius()),
        }
    }

    pub fn accept(&mut self, t: Token, feature: &[f64]) {
        self.rows.store(t.x as usize, t.y as usize, feature);
        self.fifo.push_back(t);
    }

    /// Whether the head may be emitted this cycle.
    pub fn head_valid(&self) -> bool {
        match (self.fifo.front(), self.tail) {
            (Some(h), Some(t)) => slb_valid(*h, t, self.radius(), self.end_seen),
            (Some(_), None) => self.end_seen,
            _ => false,
        }
    }

    /// Pops the head and returns it with the active taps of its window.
    pub fn emit_head(&mut self) -> (Token, Vec<(u8, Vec<f64>)>) {
        let h = self.fifo.pop_front().expect("validated head");
        let taps = self.rows.query_window(h.x as i64, h.y as i64, self.height);
        (h, taps)
    }

    pub fn queue_empty(&self) -> bool {
        self.fifo.is_empty()
    }
}
