//! Core library for corpus-trained lead sheet generation.
//!
//! The crate is organised around a small pipeline:
//!
//! - [`notation`]: timed notes, melodies, chord tracks and lead sheets on a
//!   24-ticks-per-quarter grid.
//! - [`similarity`]: the Mongeau-Sankoff melodic edit distance, extended with
//!   a fragmentation/consolidation penalty, plus the localised windowed
//!   variant used to derive sampling biases.
//! - [`stylemodel`]: Markov chains over notes and chords trained from a
//!   corpus, together with a harmonic note-given-chord model.
//! - [`sequencegraph`]: a tick-indexed trellis over the model vocabulary with
//!   exact total-duration acceptance, log-space forward sums, exact backward
//!   sampling, pins and barriers.
//! - [`variation`]: converts localised similarities into multiplicative
//!   transition biases and samples melodic or harmonic variations of a theme.
//! - [`structure`]: declarative bar-level plans (copies, transposed copies,
//!   variation cells) executed against the generative model.
//!
//! Everything here is pure computation over in-memory values; file formats
//! and the command line live in the companion `variata` crate. The crate is
//! `no_std`-compatible (with `alloc`) when built without the `std` feature.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("variata-core requires either the `std` or the `libm` feature");

pub mod error;
pub(crate) mod math;
pub mod notation;
pub mod sequencegraph;
pub mod similarity;
pub mod structure;
pub mod stylemodel;
pub mod variation;

pub use error::{Error, Result};
