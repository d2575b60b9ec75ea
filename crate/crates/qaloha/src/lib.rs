//! Stability regions and queueing delay for queue-aware slotted-ALOHA
//! networks with multi-packet reception.
//!
//! Two or three bufferless-free (infinite-buffer) sources share a common
//! destination over a slotted random-access channel. Each source adapts its
//! transmit probability — and possibly its transmission parameters — to
//! whether a peer queue is empty. This crate provides:
//!
//! - exact stability regions for the two-user network and dominant-system
//!   inner/outer characterizations for three users ([`stability`]);
//! - closed-form mean delay, delay bounds, and the delay-optimal transmit
//!   probability for symmetric users ([`symmetric`]);
//! - the exact generating-function solution of the two-user chain in the
//!   capture subclass, via kernel analysis ([`kernel`]), a numerical conformal
//!   map ([`conformal`]), and Dirichlet / Riemann–Hilbert boundary-value
//!   problems ([`bvp`]);
//! - a discrete-time Monte-Carlo simulator with counter-based randomness for
//!   coupled runs, drift-based stability verdicts, and delay/occupancy
//!   statistics ([`sim`]), used to validate every analytic result.

pub mod bvp;
pub mod channel;
pub mod conformal;
pub mod error;
pub mod kernel;
pub mod policy;
pub mod poly;
pub mod rng;
pub mod sim;
pub mod stability;
pub mod symmetric;

pub use error::{Error, Result};
