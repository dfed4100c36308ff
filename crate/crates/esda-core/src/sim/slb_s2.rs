//! Sparse Line Buffer, stride 2: tokens are queued into separate even-row and
//! odd-row FIFOs, a token-merge unit halves the two head coordinates and
//! emits whichever comes first in output ravel order, and all tokens of the
//! emitted 2×2 stride grid are popped from both FIFOs. The k×k window of an
//! output `(ox, oy)` is centered at input `(2·ox, 2·oy)`, so the same
//! head/tail control as stride 1 applies with the head mapped to input
//! coordinates.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::token::{ravel_xy, Token};

use super::slb::{slb_valid, RowBuffer};

/// Token-merge: halve both head coordinates and pick the smaller output-ravel
/// one; equal halves (heads of the same stride grid) merge into that single
/// output token.
pub fn slb_s2_merge(h_e: Option<Token>, h_o: Option<Token>, out_width: usize) -> Option<Token> {
    let halve = |t: Token| Token::site(t.x / 2, t.y / 2);
    match (h_e, h_o) {
        (None, None) => None,
        (Some(e), None) => Some(halve(e)),
        (None, Some(o)) => Some(halve(o)),
        (Some(e), Some(o)) => {
            let (e2, o2) = (halve(e), halve(o));
            let re = ravel_xy(e2.x as usize, e2.y as usize, out_width);
            let ro = ravel_xy(o2.x as usize, o2.y as usize, out_width);
            Some(if re > ro { o2 } else { e2 })
        }
    }
}

#[derive(Debug)]
pub struct SlbS2State {
    pub kernel: usize,
    /// Input frame height/width (the buffer is in input coordinates).
    pub in_height: usize,
    pub in_width: usize,
    pub out_height: usize,
    pub out_width: usize,
    pub fifo_capacity: usize,
    pub even_fifo: VecDeque<Token>,
    pub odd_fifo: VecDeque<Token>,
    pub rows: RowBuffer,
    pub tail: Option<Token>,
    pub end_seen: bool,
    pub end_sent: bool,
    pub emit: VecDeque<(u8, Vec<f64>)>,
}

impl SlbS2State {
    pub fn new(
        kernel: usize,
        in_height: usize,
        in_width: usize,
        channels: usize,
        fifo_capacity: usize,
    ) -> Self {
        SlbS2State {
            kernel,
            in_height,
            in_width,
            out_height: in_height.div_ceil(2),
            out_width: in_width.div_ceil(2),
            fifo_capacity,
            even_fifo: VecDeque::new(),
            odd_fifo: VecDeque::new(),
            rows: RowBuffer::new(kernel, in_width, channels),
            tail: None,
            end_seen: false,
            end_sent: false,
            emit: VecDeque::new(),
        }
    }

    pub fn radius(&self) -> usize {
        (self.kernel - 1) / 2
    }

    pub fn observe(&mut self, t: Token) {
        if !t.end {
            self.tail = Some(t);
        }
    }

    /// Current merged head in output coordinates.
    pub fn candidate(&self) -> Option<Token> {
        slb_s2_merge(
            self.even_fifo.front().copied(),
            self.odd_fifo.front().copied(),
            self.out_width,
        )
    }

    /// Ready rule with the merged head mapped back to its input-grid row.
    pub fn ready_for(&self, t_new: Token) -> bool {
        let fifo = if t_new.y % 2 == 0 { &self.even_fifo } else { &self.odd_fifo };
        if fifo.len() >= self.fifo_capacity {
            return false;
        }
        match self.candidate() {
            None => true,
            Some(c) => t_new.y as i64 - (2 * c.y) as i64 <= self.radius() as i64,
        }
    }

    pub fn accept(&mut self, t: Token, feature: &[f64]) {
        self.rows.store(t.x as usize, t.y as usize, feature);
        if t.y % 2 == 0 {
            self.even_fifo.push_back(t);
        } else {
            self.odd_fifo.push_back(t);
        }
    }

    pub fn head_valid(&self) -> bool {
        let Some(c) = self.candidate() else {
            return false;
        };
        if self.end_seen {
            return true;
        }
        let Some(t) = self.tail else {
            return false;
        };
        let center = Token::site(2 * c.x, 2 * c.y);
        slb_valid(center, t, self.radius(), false)
    }

    /// Emits the merged head: pops every token of its stride grid from both
    /// FIFOs and queries the window centered at the grid origin.
    pub fn emit_head(&mut self) -> (Token, Vec<(u8, Vec<f64>)>) {
        let c = self.candidate().expect("validated candidate");
        for fifo in [&mut self.even_fifo, &mut self.odd_fifo] {
            while fifo.front().is_some_and(|t| t.x / 2 == c.x && t.y / 2 == c.y) {
                fifo.pop_front();
            }
        }
        let taps = self.rows.query_window((2 * c.x) as i64, (2 * c.y) as i64, self.in_height);
        (c, taps)
    }

    pub fn queue_empty(&self) -> bool {
        self.even_fifo.is_empty() && self.odd_fifo.is_empty()
    }
}
