//! Core engine for event-driven submanifold sparse DNN inference: a functional
//! layer-by-layer reference path, a cycle-approximate simulator of the streaming
//! token-feature hardware modules, and the sparsity-statistics-driven
//! latency/resource estimator and parallel-factor optimizer built on top of it.
//!
//! The crate is `no_std` (with `alloc`) so the whole algorithmic core stays free
//! of IO; file formats and the CLI live in the companion `esda-cli` crate.
//!
//! The shared vocabulary is the token stream: active pixel coordinates in ravel
//! order (`y * width + x`, left-to-right then top-to-bottom), each paired with a
//! feature vector, terminated by a single end token. Every layer module — both
//! the functional oracle in [`ops`] and the streaming state machines in [`sim`]
//! — consumes and produces streams in that order, which is what lets the
//! hardware modules be chained with nothing but bounded FIFOs.

#![no_std]

extern crate alloc;

pub mod event;
pub mod frame;
pub mod kernels;
pub mod model;
pub mod ops;
pub mod perf;
pub mod search;
pub mod sim;
pub mod token;

pub use frame::{Bitmap, DenseTensor, SparseFrame};
pub use model::{ConvWeights, ModelSpec};
pub use token::{ravel, validate_stream, RavelIndex, Token};
