//! Per-site arithmetic shared by the functional oracle and the simulator.
//!
//! f64 addition is not associative, so the accumulation order is pinned here
//! once: kernel taps in ascending offset order, channels ascending, bias
//! seeded first. Both execution paths call these kernels, which is what makes
//! the simulator's outputs bit-equal to the oracle's; the independent checks
//! against brute-force dense convolution live in test code.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Relu6,
}

pub fn apply_activation(kind: Activation, v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = match kind {
            Activation::Relu => {
                if *x < 0.0 {
                    0.0
                } else {
                    *x
                }
            }
            Activation::Relu6 => {
                if *x < 0.0 {
                    0.0
                } else if *x > 6.0 {
                    6.0
                } else {
                    *x
                }
            }
        };
    }
}

/// `out = weight · input + bias` for a row-major `[out_ch][in_ch]` matrix.
pub fn matvec_bias(weight: &[f64], bias: &[f64], input: &[f64], out_ch: usize) -> Vec<f64> {
    let in_ch = input.len();
    debug_assert_eq!(weight.len(), out_ch * in_ch);
    let mut out = Vec::with_capacity(out_ch);
    for o in 0..out_ch {
        let row = &weight[o * in_ch..(o + 1) * in_ch];
        let mut acc = bias[o];
        for (w, x) in row.iter().zip(input) {
            acc += w * x;
        }
        out.push(acc);
    }
    out
}

/// Folds one (offset, feature) tap into a window accumulator. `weight` is the
/// `[out][in/groups][k*k]` tensor; `acc` must start from the bias.
pub fn accumulate_tap(
    acc: &mut [f64],
    weight: &[f64],
    in_ch: usize,
    out_ch: usize,
    groups: usize,
    kernel: usize,
    offset: usize,
    feature: &[f64],
) {
    let taps = kernel * kernel;
    debug_assert!(offset < taps);
    debug_assert_eq!(feature.len(), in_ch);
    let in_per_group = in_ch / groups;
    let out_per_group = out_ch / groups;
    for (o, slot) in acc.iter_mut().enumerate() {
        let g = o / out_per_group;
        let mut a = *slot;
        for i_local in 0..in_per_group {
            let w = weight[(o * in_per_group + i_local) * taps + offset];
            a += w * feature[g * in_per_group + i_local];
        }
        *slot = a;
    }
}

/// Accumulator for one k×k window: start from the bias, fold in one
/// (offset, feature) tap at a time in ascending offset order.
pub struct WindowAccumulator<'w> {
    /// `[out][in_per_group][k*k]` weight tensor.
    weight: &'w [f64],
    in_ch: usize,
    out_ch: usize,
    groups: usize,
    kernel: usize,
    acc: Vec<f64>,
}

impl<'w> WindowAccumulator<'w> {
    pub fn new(
        weight: &'w [f64],
        bias: &[f64],
        in_ch: usize,
        out_ch: usize,
        groups: usize,
        kernel: usize,
    ) -> Self {
        debug_assert_eq!(weight.len(), out_ch * (in_ch / groups) * kernel * kernel);
        debug_assert_eq!(bias.len(), out_ch);
        WindowAccumulator { weight, in_ch, out_ch, groups, kernel, acc: bias.to_vec() }
    }

    /// Folds the feature at kernel `offset` into the accumulator.
    pub fn add_tap(&mut self, offset: usize, feature: &[f64]) {
        accumulate_tap(
            &mut self.acc,
            self.weight,
            self.in_ch,
            self.out_ch,
            self.groups,
            self.kernel,
            offset,
            feature,
        );
    }

    pub fn finish(self) -> Vec<f64> {
        self.acc
    }
}

/// Elementwise sum, left operand first.
pub fn add_features(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// Streaming pooling state: sums (avg) or maxima (max) over sites in stream
/// order, then reduces once the end marker is seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolKind {
    Avg,
    Max,
}

/// Denominator for average pooling: the active-token count (the streaming
/// hardware's natural choice) or the full H·W resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AvgDenominator {
    Active,
    Full,
}

pub struct PoolAccumulator {
    kind: PoolKind,
    acc: Vec<f64>,
    count: u64,
}

impl PoolAccumulator {
    pub fn new(kind: PoolKind, channels: usize) -> Self {
        PoolAccumulator { kind, acc: vec![0.0; channels], count: 0 }
    }

    pub fn add(&mut self, feature: &[f64]) {
        match self.kind {
            PoolKind::Avg => {
                for (a, x) in self.acc.iter_mut().zip(feature) {
                    *a += x;
                }
            }
            PoolKind::Max => {
                if self.count == 0 {
                    self.acc.copy_from_slice(feature);
                } else {
                    for (a, x) in self.acc.iter_mut().zip(feature) {
                        if *x > *a {
                            *a = *x;
                        }
                    }
                }
            }
        }
        self.count += 1;
    }

    /// An empty stream reduces to the zero vector for both kinds.
    pub fn finish(mut self, denominator: AvgDenominator, resolution: usize) -> Vec<f64> {
        if let PoolKind::Avg = self.kind {
            let n = match denominator {
                AvgDenominator::Active => self.count.max(1) as f64,
                AvgDenominator::Full => resolution.max(1) as f64,
            };
            for a in self.acc.iter_mut() {
                *a /= n;
            }
        }
        self.acc
    }
}
