//! Average-rate analysis and optimization for interference alignment (IA)
//! over K-link MIMO interference channels with quantized CSI feedback.
//!
//! The crate is `no_std` (with `alloc`). It contains:
//!
//! - [`netmodel`]: scenario, stream-profile and feedback-split types.
//! - [`specfun`]: exponential integrals, integer digamma, the shifted
//!   log-moment of an Erlang variable, and Erlang mixtures (the density of
//!   a sum of independent Erlang variables with distinct scales).
//! - [`rate`]: closed-form ergodic rate per stream and sum rate, plus the
//!   interference-limited, noise-limited and rate-loss asymptotics.
//! - [`allocator`]: feedback-bit allocation (equal, residual-minimizing,
//!   greedy, exhaustive), transmission-mode selection and the joint loop.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod allocator;
mod error;
pub mod netmodel;
pub mod rate;
pub mod specfun;
#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use netmodel::{FeedbackSplit, NetworkScenario, StreamProfile};
