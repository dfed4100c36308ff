//! Bounded inter-module stream channels.
//!
//! Channels behave like registered hardware FIFOs: an element pushed in cycle
//! n becomes visible to consumers in cycle n+1 (the engine calls [`sync`] at
//! each cycle boundary). Push/pop and stall counters feed the simulation
//! report; an optional tap records the full traffic for oracle diffing.
//!
//! [`sync`]: StreamChannel::sync

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::token::Token;

/// One element of an inter-module stream.
#[derive(Debug, Clone, PartialEq)]
pub enum Msg {
    /// An active site; on token channels the feature is empty.
    Site { token: Token, feature: Vec<f64> },
    /// One (kernel offset, feature) tap of the current window; `last` marks
    /// the window's final tap.
    Pair { offset: u8, feature: Vec<f64>, last: bool },
    /// End of stream.
    End,
}

#[derive(Debug)]
pub struct StreamChannel {
    pub name: String,
    pub capacity: usize,
    queue: VecDeque<Msg>,
    /// Prefix of `queue` visible to consumers this cycle.
    visible: usize,
    pub pushes: u64,
    pub pops: u64,
    pub full_stalls: u64,
    pub empty_stalls: u64,
    pub high_water: usize,
    /// When set, every pushed message is also recorded for tapping.
    pub record: bool,
    pub log: Vec<Msg>,
}

impl StreamChannel {
    pub fn new(name: String, capacity: usize) -> Self {
        StreamChannel {
            name,
            capacity: capacity.max(1),
            queue: VecDeque::new(),
            visible: 0,
            pushes: 0,
            pops: 0,
            full_stalls: 0,
            empty_stalls: 0,
            high_water: 0,
            record: false,
            log: Vec::new(),
        }
    }

    pub fn can_push(&self) -> bool {
        self.queue.len() < self.capacity
    }

    /// Visible occupancy; freshly pushed elements do not count until sync.
    pub fn can_pop(&self) -> bool {
        self.visible > 0
    }

    pub fn push(&mut self, msg: Msg) {
        debug_assert!(self.can_push(), "push into full channel {}", self.name);
        if self.record {
            self.log.push(msg.clone());
        }
        self.queue.push_back(msg);
        self.pushes += 1;
        if self.queue.len() > self.high_water {
            self.high_water = self.queue.len();
        }
    }

    pub fn pop(&mut self) -> Msg {
        debug_assert!(self.can_pop(), "pop from empty channel {}", self.name);
        self.visible -= 1;
        self.pops += 1;
        self.queue.pop_front().expect("visible element present")
    }

    pub fn peek(&self) -> Option<&Msg> {
        if self.visible > 0 {
            self.queue.front()
        } else {
            None
        }
    }

    pub fn occupancy(&self) -> usize {
        self.queue.len()
    }

    /// Cycle boundary: everything pushed so far becomes visible.
    pub fn sync(&mut self) {
        self.visible = self.queue.len();
    }
}

/// Per-channel statistics for the simulation report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub name: String,
    pub capacity: usize,
    pub pushes: u64,
    pub pops: u64,
    pub full_stalls: u64,
    pub empty_stalls: u64,
    pub high_water: usize,
}

impl StreamChannel {
    pub fn report(&self) -> ChannelReport {
        ChannelReport {
            name: self.name.clone(),
            capacity: self.capacity,
            pushes: self.pushes,
            pops: self.pops,
            full_stalls: self.full_stalls,
            empty_stalls: self.empty_stalls,
            high_water: self.high_water,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn pushes_become_visible_only_after_sync() {
        let mut ch = StreamChannel::new("t".to_string(), 2);
        ch.push(Msg::End);
        assert!(!ch.can_pop());
        ch.sync();
        assert!(ch.can_pop());
        assert_eq!(ch.pop(), Msg::End);
    }

    #[test]
    fn capacity_bounds_and_high_water() {
        let mut ch = StreamChannel::new("t".to_string(), 2);
        ch.push(Msg::End);
        ch.push(Msg::End);
        assert!(!ch.can_push());
        assert_eq!(ch.high_water, 2);
    }
}
