//! Transmission policies: per-user transmit probabilities that depend on
//! whether a watched peer queue is empty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-user policy. User `k` transmits a head-of-line packet with probability
/// `alpha[k]` while the *other* user's queue is busy, and with `alpha_star[k]`
/// while it is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy2 {
    /// Transmit probability with the peer queue busy, per user.
    pub alpha: [f64; 2],
    /// Transmit probability with the peer queue empty, per user.
    pub alpha_star: [f64; 2],
}

impl Policy2 {
    /// Symmetric policy with the same probabilities for both users.
    pub fn symmetric(alpha: f64, alpha_star: f64) -> Self {
        Policy2 {
            alpha: [alpha; 2],
            alpha_star: [alpha_star; 2],
        }
    }

    /// Range-check the probabilities; warns (does not fail) when a user is
    /// *less* aggressive with the peer empty than busy, which the model
    /// permits but the design intent (back off while the peer drains) does
    /// not.
    pub fn validate(&self) -> Result<Vec<String>> {
        for k in 0..2 {
            for (name, v) in [("alpha", self.alpha[k]), ("alpha_star", self.alpha_star[k])] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "{name}[{k}] = {v} outside [0,1]"
                    )));
                }
            }
        }
        let mut warnings = Vec::new();
        for k in 0..2 {
            if self.alpha[k] > self.alpha_star[k] + 1e-12 {
                warnings.push(format!(
                    "user {k}: transmit probability with the peer busy ({}) exceeds the \
                     peer-empty one ({}); the design intent is alpha <= alpha_star",
                    self.alpha[k], self.alpha_star[k]
                ));
            }
        }
        Ok(warnings)
    }
}

/// Three-user policy. User `k` watches the queue of user `(k+1) mod 3`
/// (0-based): it transmits with probability `alpha[k]` while the watched
/// queue is busy and `alpha_star[k]` while it is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Policy3 {
    /// Transmit probability with the watched queue busy, per user.
    pub alpha: [f64; 3],
    /// Transmit probability with the watched queue empty, per user.
    pub alpha_star: [f64; 3],
}

impl Policy3 {
    /// Symmetric policy with the same probabilities for all users.
    pub fn symmetric(alpha: f64, alpha_star: f64) -> Self {
        Policy3 {
            alpha: [alpha; 3],
            alpha_star: [alpha_star; 3],
        }
    }

    /// Index of the queue user `k` watches.
    pub fn watched(k: usize) -> usize {
        (k + 1) % 3
    }

    /// Range-check the probabilities, warning on alpha > alpha_star.
    pub fn validate(&self) -> Result<Vec<String>> {
        for k in 0..3 {
            for (name, v) in [("alpha", self.alpha[k]), ("alpha_star", self.alpha_star[k])] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::invalid(format!(
                        "{name}[{k}] = {v} outside [0,1]"
                    )));
                }
            }
        }
        let mut warnings = Vec::new();
        for k in 0..3 {
            if self.alpha[k] > self.alpha_star[k] + 1e-12 {
                warnings.push(format!(
                    "user {k}: transmit probability with the watched queue busy ({}) \
                     exceeds the watched-empty one ({})",
                    self.alpha[k], self.alpha_star[k]
                ));
            }
        }
        Ok(warnings)
    }
}
