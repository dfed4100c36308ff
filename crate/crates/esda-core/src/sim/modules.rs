//! Streaming module state machines.
//!
//! Every module follows the same clocked discipline: per cycle it may pop at
//! most one element per input channel, advance one cycle of compute, and push
//! at most one element per output channel. Compute modules charge one
//! MAC-group beat (width PF, initiation interval 1) per cycle; their `busy`
//! counters therefore equal the closed-form cycle costs the performance
//! estimator predicts. Relay cycles for end markers and cycles spent blocked
//! on a full or empty channel are tallied separately.

use alloc::collections::VecDeque;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kernels::{
    accumulate_tap, apply_activation, matvec_bias, Activation, AvgDenominator, PoolAccumulator,
    PoolKind,
};
use crate::model::ConvWeights;
use crate::token::Token;

use super::channel::{Msg, StreamChannel};
use super::slb::SlbState;
use super::slb_s2::SlbS2State;
use super::SimError;

/// Per-module cycle accounting.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleStats {
    pub busy: u64,
    pub stall_in: u64,
    pub stall_out: u64,
    pub idle: u64,
}

#[derive(Debug)]
pub struct ModuleCore {
    pub name: String,
    pub stats: ModuleStats,
    pub done: bool,
    /// What blocked the module most recently, for deadlock diagnostics.
    pub blocked_on: Option<String>,
}

impl ModuleCore {
    pub fn new(name: String) -> Self {
        ModuleCore { name, stats: ModuleStats::default(), done: false, blocked_on: None }
    }

    fn busy(&mut self) {
        self.stats.busy += 1;
        self.blocked_on = None;
    }

    fn stall_in(&mut self, chan: &str) {
        self.stats.stall_in += 1;
        self.blocked_on = Some(format!("waiting for input on `{chan}`"));
    }

    fn stall_out(&mut self, chan: &str) {
        self.stats.stall_out += 1;
        self.blocked_on = Some(format!("output blocked, `{chan}` full"));
    }

    fn idle(&mut self) {
        self.stats.idle += 1;
    }
}

/// Outcome of one module step.
pub struct Step {
    pub progress: bool,
}

const NO_PROGRESS: Step = Step { progress: false };
const PROGRESS: Step = Step { progress: true };

// ---------------------------------------------------------------------------
// Source

pub struct Source {
    pub core: ModuleCore,
    pub out: usize,
    pub stream: VecDeque<Msg>,
}

impl Source {
    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        if self.stream.is_empty() {
            self.core.done = true;
            self.core.idle();
            return Ok(NO_PROGRESS);
        }
        if chans[self.out].can_push() {
            let msg = self.stream.pop_front().expect("non-empty stream");
            if matches!(msg, Msg::End) {
                self.core.done = true;
            }
            chans[self.out].push(msg);
            self.core.busy();
            Ok(PROGRESS)
        } else {
            chans[self.out].full_stalls += 1;
            let name = chans[self.out].name.clone();
            self.core.stall_out(&name);
            Ok(NO_PROGRESS)
        }
    }
}

// ---------------------------------------------------------------------------
// 1x1 convolution

enum ConvPhase {
    Idle,
    Burn { token: Token, feature: Vec<f64>, remaining: u64 },
    WaitPush { msg: Msg, finishes: bool },
}

pub struct Conv1x1 {
    pub core: ModuleCore,
    pub input: usize,
    pub out: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub out_channels: usize,
    pub act: Option<Activation>,
    pub token_cost: u64,
    phase: ConvPhase,
}

impl Conv1x1 {
    pub fn new(
        name: String,
        input: usize,
        out: usize,
        w: &ConvWeights,
        act: Option<Activation>,
        token_cost: u64,
    ) -> Self {
        Conv1x1 {
            core: ModuleCore::new(name),
            input,
            out,
            weight: w.weight.clone(),
            bias: w.bias.clone(),
            out_channels: w.out_channels,
            act,
            token_cost: token_cost.max(1),
            phase: ConvPhase::Idle,
        }
    }

    fn finish_burn(&mut self, chans: &mut [StreamChannel], token: Token, feature: Vec<f64>) {
        let msg = Msg::Site { token, feature };
        if chans[self.out].can_push() {
            chans[self.out].push(msg);
            self.phase = ConvPhase::Idle;
        } else {
            self.phase = ConvPhase::WaitPush { msg, finishes: false };
        }
    }

    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        match core::mem::replace(&mut self.phase, ConvPhase::Idle) {
            ConvPhase::Idle => {
                if !chans[self.input].can_pop() {
                    chans[self.input].empty_stalls += 1;
                    let name = chans[self.input].name.clone();
                    self.core.stall_in(&name);
                    return Ok(NO_PROGRESS);
                }
                match chans[self.input].pop() {
                    Msg::Site { token, feature } => {
                        let mut out = matvec_bias(&self.weight, &self.bias, &feature, self.out_channels);
                        if let Some(kind) = self.act {
                            apply_activation(kind, &mut out);
                        }
                        self.core.busy();
                        let remaining = self.token_cost - 1;
                        if remaining == 0 {
                            self.finish_burn(chans, token, out);
                        } else {
                            self.phase = ConvPhase::Burn { token, feature: out, remaining };
                        }
                        Ok(PROGRESS)
                    }
                    Msg::End => {
                        if chans[self.out].can_push() {
                            chans[self.out].push(Msg::End);
                            self.core.done = true;
                        } else {
                            self.phase = ConvPhase::WaitPush { msg: Msg::End, finishes: true };
                        }
                        Ok(PROGRESS)
                    }
                    Msg::Pair { .. } => Err(SimError::internal(
                        &self.core.name,
                        "pair message on a site channel",
                    )),
                }
            }
            ConvPhase::Burn { token, feature, remaining } => {
                self.core.busy();
                let remaining = remaining - 1;
                if remaining == 0 {
                    self.finish_burn(chans, token, feature);
                } else {
                    self.phase = ConvPhase::Burn { token, feature, remaining };
                }
                Ok(PROGRESS)
            }
            ConvPhase::WaitPush { msg, finishes } => {
                if chans[self.out].can_push() {
                    chans[self.out].push(msg);
                    if finishes {
                        self.core.done = true;
                    }
                    self.core.stats.stall_out += 1;
                    Ok(PROGRESS)
                } else {
                    chans[self.out].full_stalls += 1;
                    let name = chans[self.out].name.clone();
                    self.core.stall_out(&name);
                    self.phase = ConvPhase::WaitPush { msg, finishes };
                    Ok(NO_PROGRESS)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// k×k compute

enum KxkPhase {
    Idle,
    Collect {
        token: Token,
        acc: Vec<f64>,
        seen: u128,
        last_offset: i16,
        remaining: u64,
        window_done: bool,
    },
    WaitPush { msg: Msg, finishes: bool },
    DrainPairEnd,
}

pub struct KxkCompute {
    pub core: ModuleCore,
    pub in_token: usize,
    pub in_pairs: usize,
    pub out: usize,
    pub weights: ConvWeights,
    pub act: Option<Activation>,
    pub tap_cost: u64,
    phase: KxkPhase,
}

impl KxkCompute {
    pub fn new(
        name: String,
        in_token: usize,
        in_pairs: usize,
        out: usize,
        weights: ConvWeights,
        act: Option<Activation>,
        tap_cost: u64,
    ) -> Self {
        KxkCompute {
            core: ModuleCore::new(name),
            in_token,
            in_pairs,
            out,
            weights,
            act,
            tap_cost: tap_cost.max(1),
            phase: KxkPhase::Idle,
        }
    }

    fn try_collect_pair(
        &mut self,
        chans: &mut [StreamChannel],
        token: Token,
        mut acc: Vec<f64>,
        seen: u128,
        last_offset: i16,
    ) -> Result<Step, SimError> {
        if !chans[self.in_pairs].can_pop() {
            chans[self.in_pairs].empty_stalls += 1;
            let name = chans[self.in_pairs].name.clone();
            self.core.stall_in(&name);
            self.phase = KxkPhase::Collect {
                token,
                acc,
                seen,
                last_offset,
                remaining: 0,
                window_done: false,
            };
            return Ok(NO_PROGRESS);
        }
        match chans[self.in_pairs].pop() {
            Msg::Pair { offset, feature, last } => {
                let taps = (self.weights.kernel * self.weights.kernel) as u16;
                if (offset as u16) >= taps {
                    return Err(SimError::internal(
                        &self.core.name,
                        "kernel offset out of range",
                    ));
                }
                if (offset as i16) <= last_offset {
                    return Err(SimError::internal(
                        &self.core.name,
                        "kernel offsets not ascending within window",
                    ));
                }
                if seen & (1u128 << offset) != 0 {
                    return Err(SimError::internal(
                        &self.core.name,
                        "duplicate kernel offset within window",
                    ));
                }
                accumulate_tap(
                    &mut acc,
                    &self.weights.weight,
                    self.weights.in_channels,
                    self.weights.out_channels,
                    self.weights.groups,
                    self.weights.kernel,
                    offset as usize,
                    &feature,
                );
                self.core.busy();
                let remaining = self.tap_cost - 1;
                let seen = seen | (1u128 << offset);
                if remaining == 0 && last {
                    self.finish_window(chans, token, acc);
                } else {
                    self.phase = KxkPhase::Collect {
                        token,
                        acc,
                        seen,
                        last_offset: offset as i16,
                        remaining,
                        window_done: last,
                    };
                }
                Ok(PROGRESS)
            }
            other => Err(SimError::internal(
                &self.core.name,
                &format!("expected pair message, got {other:?}"),
            )),
        }
    }

    fn finish_window(&mut self, chans: &mut [StreamChannel], token: Token, mut acc: Vec<f64>) {
        if let Some(kind) = self.act {
            apply_activation(kind, &mut acc);
        }
        let msg = Msg::Site { token, feature: acc };
        if chans[self.out].can_push() {
            chans[self.out].push(msg);
            self.phase = KxkPhase::Idle;
        } else {
            self.phase = KxkPhase::WaitPush { msg, finishes: false };
        }
    }

    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        match core::mem::replace(&mut self.phase, KxkPhase::Idle) {
            KxkPhase::Idle => {
                if !chans[self.in_token].can_pop() {
                    chans[self.in_token].empty_stalls += 1;
                    let name = chans[self.in_token].name.clone();
                    self.core.stall_in(&name);
                    return Ok(NO_PROGRESS);
                }
                match chans[self.in_token].pop() {
                    Msg::Site { token, .. } => {
                        let acc = self.weights.bias.clone();
                        // The first pair may arrive in the same cycle as the
                        // token: the token register loads in parallel.
                        self.try_collect_pair(chans, token, acc, 0, -1)?;
                        Ok(PROGRESS)
                    }
                    Msg::End => {
                        self.phase = KxkPhase::DrainPairEnd;
                        Ok(PROGRESS)
                    }
                    Msg::Pair { .. } => {
                        Err(SimError::internal(&self.core.name, "pair message on token channel"))
                    }
                }
            }
            KxkPhase::Collect { token, acc, seen, last_offset, remaining, window_done } => {
                if remaining > 0 {
                    self.core.busy();
                    let remaining = remaining - 1;
                    if remaining == 0 && window_done {
                        self.finish_window(chans, token, acc);
                    } else {
                        self.phase = KxkPhase::Collect {
                            token,
                            acc,
                            seen,
                            last_offset,
                            remaining,
                            window_done,
                        };
                    }
                    Ok(PROGRESS)
                } else {
                    debug_assert!(!window_done);
                    self.try_collect_pair(chans, token, acc, seen, last_offset)
                }
            }
            KxkPhase::WaitPush { msg, finishes } => {
                if chans[self.out].can_push() {
                    chans[self.out].push(msg);
                    if finishes {
                        self.core.done = true;
                    }
                    self.core.stats.stall_out += 1;
                    Ok(PROGRESS)
                } else {
                    chans[self.out].full_stalls += 1;
                    let name = chans[self.out].name.clone();
                    self.core.stall_out(&name);
                    self.phase = KxkPhase::WaitPush { msg, finishes };
                    Ok(NO_PROGRESS)
                }
            }
            KxkPhase::DrainPairEnd => {
                if !chans[self.in_pairs].can_pop() {
                    chans[self.in_pairs].empty_stalls += 1;
                    let name = chans[self.in_pairs].name.clone();
                    self.core.stall_in(&name);
                    self.phase = KxkPhase::DrainPairEnd;
                    return Ok(NO_PROGRESS);
                }
                match chans[self.in_pairs].pop() {
                    Msg::End => {
                        if chans[self.out].can_push() {
                            chans[self.out].push(Msg::End);
                            self.core.done = true;
                        } else {
                            self.phase = KxkPhase::WaitPush { msg: Msg::End, finishes: true };
                        }
                        Ok(PROGRESS)
                    }
                    other => Err(SimError::internal(
                        &self.core.name,
                        &format!("trailing message after windows: {other:?}"),
                    )),
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fork and residual add

pub struct Fork {
    pub core: ModuleCore,
    pub input: usize,
    pub out_body: usize,
    pub out_shortcut: usize,
}

impl Fork {
    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        if !chans[self.input].can_pop() {
            chans[self.input].empty_stalls += 1;
            let name = chans[self.input].name.clone();
            self.core.stall_in(&name);
            return Ok(NO_PROGRESS);
        }
        if !chans[self.out_body].can_push() || !chans[self.out_shortcut].can_push() {
            let blocked = if chans[self.out_body].can_push() { self.out_shortcut } else { self.out_body };
            chans[blocked].full_stalls += 1;
            let name = chans[blocked].name.clone();
            self.core.stall_out(&name);
            return Ok(NO_PROGRESS);
        }
        let msg = chans[self.input].pop();
        if matches!(msg, Msg::End) {
            self.core.done = true;
        }
        chans[self.out_body].push(msg.clone());
        chans[self.out_shortcut].push(msg);
        self.core.busy();
        Ok(PROGRESS)
    }
}

pub struct Add {
    pub core: ModuleCore,
    pub in_body: usize,
    pub in_shortcut: usize,
    pub out: usize,
}

impl Add {
    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        let (a_ready, b_ready) = (chans[self.in_body].can_pop(), chans[self.in_shortcut].can_pop());
        if !a_ready || !b_ready {
            let blocked = if a_ready { self.in_shortcut } else { self.in_body };
            chans[blocked].empty_stalls += 1;
            let name = chans[blocked].name.clone();
            self.core.stall_in(&name);
            return Ok(NO_PROGRESS);
        }
        if !chans[self.out].can_push() {
            chans[self.out].full_stalls += 1;
            let name = chans[self.out].name.clone();
            self.core.stall_out(&name);
            return Ok(NO_PROGRESS);
        }
        let a = chans[self.in_body].pop();
        let b = chans[self.in_shortcut].pop();
        match (a, b) {
            (Msg::End, Msg::End) => {
                chans[self.out].push(Msg::End);
                self.core.done = true;
                Ok(PROGRESS)
            }
            (Msg::Site { token: ta, feature: fa }, Msg::Site { token: tb, feature: fb }) => {
                if ta != tb {
                    return Err(SimError::internal(
                        &self.core.name,
                        &format!("residual token mismatch: body {ta}, shortcut {tb}"),
                    ));
                }
                let sum = crate::kernels::add_features(&fa, &fb);
                chans[self.out].push(Msg::Site { token: ta, feature: sum });
                self.core.busy();
                Ok(PROGRESS)
            }
            _ => Err(SimError::internal(&self.core.name, "residual streams diverged")),
        }
    }
}

// ---------------------------------------------------------------------------
// Pooling + classifier

enum PoolPhase {
    Accumulate { remaining: u64 },
    FcBurn { remaining: u64 },
    Done,
}

pub struct PoolFc {
    pub core: ModuleCore,
    pub input: usize,
    acc: Option<PoolAccumulator>,
    pub denominator: AvgDenominator,
    pub resolution: usize,
    pub site_cost: u64,
    pub fc_cost: u64,
    pub fc_weight: Vec<f64>,
    pub fc_bias: Vec<f64>,
    pub classes: usize,
    pub pooled: Option<Vec<f64>>,
    pub logits: Option<Vec<f64>>,
    phase: PoolPhase,
}

impl PoolFc {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: String,
        input: usize,
        kind: PoolKind,
        denominator: AvgDenominator,
        channels: usize,
        resolution: usize,
        site_cost: u64,
        fc_cost: u64,
        fc_weight: Vec<f64>,
        fc_bias: Vec<f64>,
        classes: usize,
    ) -> Self {
        PoolFc {
            core: ModuleCore::new(name),
            input,
            acc: Some(PoolAccumulator::new(kind, channels)),
            denominator,
            resolution,
            site_cost: site_cost.max(1),
            fc_cost: fc_cost.max(1),
            fc_weight,
            fc_bias,
            classes,
            pooled: None,
            logits: None,
            phase: PoolPhase::Accumulate { remaining: 0 },
        }
    }

    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        match self.phase {
            PoolPhase::Accumulate { remaining } if remaining > 0 => {
                self.core.busy();
                self.phase = PoolPhase::Accumulate { remaining: remaining - 1 };
                Ok(PROGRESS)
            }
            PoolPhase::Accumulate { .. } => {
                if !chans[self.input].can_pop() {
                    chans[self.input].empty_stalls += 1;
                    let name = chans[self.input].name.clone();
                    self.core.stall_in(&name);
                    return Ok(NO_PROGRESS);
                }
                match chans[self.input].pop() {
                    Msg::Site { feature, .. } => {
                        self.acc.as_mut().expect("accumulating").add(&feature);
                        self.core.busy();
                        self.phase = PoolPhase::Accumulate { remaining: self.site_cost - 1 };
                        Ok(PROGRESS)
                    }
                    Msg::End => {
                        let acc = self.acc.take().expect("accumulating");
                        self.pooled = Some(acc.finish(self.denominator, self.resolution));
                        self.core.busy();
                        self.phase = PoolPhase::FcBurn { remaining: self.fc_cost - 1 };
                        if self.fc_cost == 1 {
                            self.finish_fc();
                        }
                        Ok(PROGRESS)
                    }
                    Msg::Pair { .. } => {
                        Err(SimError::internal(&self.core.name, "pair message at pooling input"))
                    }
                }
            }
            PoolPhase::FcBurn { remaining } => {
                self.core.busy();
                if remaining <= 1 {
                    self.finish_fc();
                } else {
                    self.phase = PoolPhase::FcBurn { remaining: remaining - 1 };
                }
                Ok(PROGRESS)
            }
            PoolPhase::Done => {
                self.core.idle();
                Ok(NO_PROGRESS)
            }
        }
    }

    fn finish_fc(&mut self) {
        let pooled = self.pooled.as_ref().expect("pooled vector");
        self.logits = Some(matvec_bias(&self.fc_weight, &self.fc_bias, pooled, self.classes));
        self.core.done = true;
        self.phase = PoolPhase::Done;
    }
}

// ---------------------------------------------------------------------------
// Sink (for headless block pipelines)

pub struct Sink {
    pub core: ModuleCore,
    pub input: usize,
}

impl Sink {
    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        if !chans[self.input].can_pop() {
            chans[self.input].empty_stalls += 1;
            let name = chans[self.input].name.clone();
            self.core.stall_in(&name);
            return Ok(NO_PROGRESS);
        }
        if matches!(chans[self.input].pop(), Msg::End) {
            self.core.done = true;
        }
        self.core.busy();
        Ok(PROGRESS)
    }
}

// ---------------------------------------------------------------------------
// SLB wrappers

pub struct SlbModule {
    pub core: ModuleCore,
    pub input: usize,
    pub out_token: usize,
    pub out_pairs: usize,
    pub state: SlbState,
}

pub struct SlbS2Module {
    pub core: ModuleCore,
    pub input: usize,
    pub out_token: usize,
    pub out_pairs: usize,
    pub state: SlbS2State,
}

/// Shared input/output phasing for both SLB flavors. The input phase must run
/// before the output phase within a cycle so a pending token of the head's own
/// window lands in the buffer before the head's validity test fires.
macro_rules! slb_step {
    ($self:ident, $chans:ident) => {{
        let mut progress = false;
        // Input phase.
        if !$self.state.end_seen {
            let pending = match $chans[$self.input].peek() {
                Some(Msg::Site { token, .. }) => Some(*token),
                Some(Msg::End) => Some(Token::end_marker()),
                Some(Msg::Pair { .. }) => {
                    return Err(SimError::internal(&$self.core.name, "pair message at SLB input"))
                }
                None => None,
            };
            if let Some(t) = pending {
                if t.end {
                    $chans[$self.input].pop();
                    $self.state.end_seen = true;
                    progress = true;
                } else {
                    $self.state.observe(t);
                    if $self.state.ready_for(t) {
                        match $chans[$self.input].pop() {
                            Msg::Site { token, feature } => {
                                $self.state.accept(token, &feature);
                                progress = true;
                            }
                            _ => unreachable!("peeked site"),
                        }
                    }
                }
            }
        }
        // Output phase.
        if !$self.state.emit.is_empty() {
            if $chans[$self.out_pairs].can_push() {
                let (offset, feature) = $self.state.emit.pop_front().expect("non-empty emit");
                let last = $self.state.emit.is_empty();
                $chans[$self.out_pairs].push(Msg::Pair { offset, feature, last });
                $self.core.busy();
                progress = true;
            } else {
                $chans[$self.out_pairs].full_stalls += 1;
                let name = $chans[$self.out_pairs].name.clone();
                $self.core.stall_out(&name);
            }
        } else if $self.state.head_valid() {
            if $chans[$self.out_token].can_push() && $chans[$self.out_pairs].can_push() {
                let (head, taps) = $self.state.emit_head();
                if taps.is_empty() {
                    return Err(SimError::internal(
                        &$self.core.name,
                        "bitmap/buffer disagreement: emitted window has no active taps",
                    ));
                }
                let mut taps = VecDeque::from(taps);
                let (offset, feature) = taps.pop_front().expect("non-empty taps");
                let last = taps.is_empty();
                $self.state.emit = taps;
                $chans[$self.out_token].push(Msg::Site { token: head, feature: Vec::new() });
                $chans[$self.out_pairs].push(Msg::Pair { offset, feature, last });
                $self.core.busy();
                progress = true;
            } else {
                let blocked = if $chans[$self.out_token].can_push() {
                    $self.out_pairs
                } else {
                    $self.out_token
                };
                $chans[blocked].full_stalls += 1;
                let name = $chans[blocked].name.clone();
                $self.core.stall_out(&name);
            }
        } else if $self.state.end_seen && !$self.state.end_sent && $self.state.queue_empty() {
            if $chans[$self.out_token].can_push() && $chans[$self.out_pairs].can_push() {
                $chans[$self.out_token].push(Msg::End);
                $chans[$self.out_pairs].push(Msg::End);
                $self.state.end_sent = true;
                $self.core.done = true;
                progress = true;
            } else {
                let blocked = if $chans[$self.out_token].can_push() {
                    $self.out_pairs
                } else {
                    $self.out_token
                };
                $chans[blocked].full_stalls += 1;
                let name = $chans[blocked].name.clone();
                $self.core.stall_out(&name);
            }
        } else if !progress {
            if $self.state.end_sent {
                $self.core.idle();
            } else {
                let name = $chans[$self.input].name.clone();
                chan_note_empty(&mut $chans[$self.input]);
                $self.core.stall_in(&name);
            }
        }
        Ok(Step { progress })
    }};
}

fn chan_note_empty(ch: &mut StreamChannel) {
    ch.empty_stalls += 1;
}

impl SlbModule {
    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        slb_step!(self, chans)
    }
}

impl SlbS2Module {
    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        slb_step!(self, chans)
    }
}

// ---------------------------------------------------------------------------

/// Closed enum of all module flavors.
pub enum Module {
    Source(Source),
    Conv1x1(Conv1x1),
    Slb(SlbModule),
    SlbS2(SlbS2Module),
    Kxk(KxkCompute),
    Fork(Fork),
    Add(Add),
    PoolFc(PoolFc),
    Sink(Sink),
}

impl Module {
    pub fn core(&self) -> &ModuleCore {
        match self {
            Module::Source(m) => &m.core,
            Module::Conv1x1(m) => &m.core,
            Module::Slb(m) => &m.core,
            Module::SlbS2(m) => &m.core,
            Module::Kxk(m) => &m.core,
            Module::Fork(m) => &m.core,
            Module::Add(m) => &m.core,
            Module::PoolFc(m) => &m.core,
            Module::Sink(m) => &m.core,
        }
    }

    pub fn step(&mut self, chans: &mut [StreamChannel]) -> Result<Step, SimError> {
        match self {
            Module::Source(m) => m.step(chans),
            Module::Conv1x1(m) => m.step(chans),
            Module::Slb(m) => m.step(chans),
            Module::SlbS2(m) => m.step(chans),
            Module::Kxk(m) => m.step(chans),
            Module::Fork(m) => m.step(chans),
            Module::Add(m) => m.step(chans),
            Module::PoolFc(m) => m.step(chans),
            Module::Sink(m) => m.step(chans),
        }
    }
}
