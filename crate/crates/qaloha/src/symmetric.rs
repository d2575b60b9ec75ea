//! Closed-form queueing results for the fully symmetric two-user system:
//! exact mean queue/delay for capture-class channels, delay bounds for
//! general multi-packet reception, and the delay-optimal transmit
//! probability.
//!
//! Notation used throughout: with both queues busy each user is served at
//! rate `mu_both = α(p + α(b + c − p))`; with the peer empty the lone user is
//! served at rate `s = α* p̃`. The gap `d = α(ᾱp + αb) − s` (and its
//! completion `d̂ = d + α²c`) measures how much busy-peer interference hurts;
//! the standing modelling assumption is `d < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the symmetric system: both users share the transmit
/// probabilities and the channel is symmetric with lone-success probability
/// `p` (peer busy) / `p_tilde` (peer empty, adapted), single-success
/// probability `b` and double-success probability `c` when both transmit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetricSystem {
    pub alpha: f64,
    pub alpha_star: f64,
    pub p: f64,
    pub p_tilde: f64,
    pub b: f64,
    pub c: f64,
}

impl SymmetricSystem {
    /// Validate ranges; warns when alpha > alpha_star (permitted everywhere
    /// except [`optimal_alpha`], which assumes the back-off design).
    pub fn validate(&self) -> Result<Vec<String>> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("alpha_star", self.alpha_star),
            ("p", self.p),
            ("p_tilde", self.p_tilde),
            ("b", self.b),
            ("c", self.c),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0,1]")));
            }
        }
        if 2.0 * self.b + self.c > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "both-transmit success probabilities sum to {} > 1",
                2.0 * self.b + self.c
            )));
        }
        let mut warnings = Vec::new();
        if self.alpha > self.alpha_star + 1e-12 {
            warnings.push(format!(
                "alpha ({}) exceeds alpha_star ({}); the back-off design expects \
                 alpha <= alpha_star",
                self.alpha, self.alpha_star
            ));
        }
        Ok(warnings)
    }

    /// Per-user service rate while both queues are busy:
    /// `α(p + α(b + c − p))`.
    pub fn service_both(&self) -> f64 {
        self.alpha * (self.p + self.alpha * (self.b + self.c - self.p))
    }

    /// Per-user service rate while the peer queue is empty: `α* p̃`.
    pub fn service_alone(&self) -> f64 {
        self.alpha_star * self.p_tilde
    }

    /// Interference gap `d = α(ᾱp + αb) − α*p̃`: by how much a busy peer
    /// lowers the per-attempt service compared to an empty peer (negative in
    /// the intended regime).
    pub fn service_gap(&self) -> f64 {
        let a = self.alpha;
        a * ((1.0 - a) * self.p + a * self.b) - self.service_alone()
    }

    /// Completed gap `d̂ = d + α²c`; equals `service_both − service_alone`.
    pub fn service_gap_hat(&self) -> f64 {
        self.service_gap() + self.alpha * self.alpha * self.c
    }

    fn require_stable(&self, lambda: f64) -> Result<()> {
        if !(lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda = {lambda} must be >= 0")));
        }
        if self.service_alone() <= 0.0 {
            return Err(Error::invalid(
                "degenerate service: alpha_star * p_tilde must be positive",
            ));
        }
        let mu = self.service_both();
        if lambda >= mu {
            return Err(Error::domain(format!(
                "unstable load: lambda = {lambda} is not below the busy-peer \
                 service rate {mu}"
            )));
        }
        Ok(())
    }

    /// Exact mean delay (slots) for capture-class channels (`c = 0`):
    /// `D = (2 μ_both + λ d) / (2 α* p̃ (μ_both − λ))`.
    ///
    /// As λ → 0 this tends to `1/(α* p̃)` (a packet arriving at an idle
    /// system is served at the adapted lone rate), and it increases strictly
    /// in λ until blowing up at μ_both.
    pub fn delay_capture(&self, lambda: f64) -> Result<f64> {
        if self.c != 0.0 {
            return Err(Error::domain(
                "exact closed-form delay requires a capture-class channel (c = 0); \
                 use the delay bounds for c > 0",
            ));
        }
        self.require_stable(lambda)?;
        let mu = self.service_both();
        let d = self.service_gap();
        Ok((2.0 * mu + lambda * d) / (2.0 * self.service_alone() * (mu - lambda)))
    }

    /// Exact mean queue length for capture-class channels: `λ × delay`.
    pub fn mean_queue_capture(&self, lambda: f64) -> Result<f64> {
        Ok(lambda * self.delay_capture(lambda)?)
    }

    /// Mean-delay bounds `(low, high)` for general multi-packet reception.
    ///
    /// The exact mean queue is
    /// `M (μ_both − λ) = λ(2 μ_both + λ d̂)/(2s) − α²c d̂ P(both busy)/(2s)`;
    /// the only unknown is `P(both busy) ∈ [0,1]`, so evaluating it at the
    /// endpoints yields sharp bounds whose orientation follows the sign of
    /// `d̂`. For `c = 0` or `d̂ = 0` the bounds coincide with the exact value.
    pub fn delay_bounds(&self, lambda: f64) -> Result<(f64, f64)> {
        self.require_stable(lambda)?;
        if lambda == 0.0 {
            // Empty system: a hypothetical packet sees the adapted lone rate.
            let d0 = 1.0 / self.service_alone();
            return Ok((d0, d0));
        }
        let mu = self.service_both();
        let s = self.service_alone();
        let dhat = self.service_gap_hat();
        let e = self.alpha * self.alpha * self.c;
        let base = (2.0 * mu + lambda * dhat) / (2.0 * s * (mu - lambda));
        let width = (e * dhat).abs() / (2.0 * lambda * s * (mu - lambda));
        let (low, high) = if dhat < 0.0 {
            (base, base + width)
        } else {
            (base - width, base)
        };
        // Every served packet waits at least one slot, so one slot is always
        // a valid floor (the endpoint bound can be vacuous at small lambda
        // when the completed gap is positive).
        Ok((low.max(1.0), high))
    }
}

/// Which branch produced the optimal transmit probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimalBranch {
    /// The unconstrained optimum `p/(2(p−b))` lies above `alpha_star`, so the
    /// constraint `alpha ≤ alpha_star` binds.
    AtAlphaStar,
    /// Interior optimum `p/(2(p−b))`.
    Interior,
}

/// Result of the delay minimization over the transmit probability.
#[derive(Debug, Clone, Serialize)]
pub struct OptimalAlpha {
    pub alpha_tilde: f64,
    pub branch: OptimalBranch,
    /// Busy-peer service rate at the optimum (must exceed λ for stability).
    pub service_both: f64,
    /// Mean delay at the optimum.
    pub delay: f64,
}

/// Delay-optimal transmit probability for the capture-class symmetric system
/// at load `lambda`, holding `alpha_star`, `p`, `p_tilde`, `b` fixed
/// (`c = 0`).
///
/// The delay is strictly decreasing in the busy-peer service rate
/// `μ_both(α) = αp + α²(b−p)`, a concave parabola in α (since `b < p`), so
/// the minimizer is `α̃ = min(α*, p/(2(p−b)))`; equivalently the cap binds
/// exactly when `b ≥ p(2α*−1)/(2α*)`.
pub fn optimal_alpha(
    alpha_star: f64,
    p: f64,
    p_tilde: f64,
    b: f64,
    lambda: f64,
) -> Result<OptimalAlpha> {
    for (name, v) in [
        ("alpha_star", alpha_star),
        ("p", p),
        ("p_tilde", p_tilde),
        ("b", b),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} = {v} outside [0,1]")));
        }
    }
    if !(alpha_star > 0.0) {
        return Err(Error::invalid("alpha_star must be positive"));
    }
    if b >= p {
        return Err(Error::invalid(format!(
            "optimization assumes capture weaker than a clear channel (b < p); \
             got b = {b}, p = {p}"
        )));
    }
    let interior = p / (2.0 * (p - b));
    let (alpha_tilde, branch) = if interior >= alpha_star {
        (alpha_star, OptimalBranch::AtAlphaStar)
    } else {
        (interior, OptimalBranch::Interior)
    };
    let sys = SymmetricSystem {
        alpha: alpha_tilde,
        alpha_star,
        p,
        p_tilde,
        b,
        c: 0.0,
    };
    let delay = sys.delay_capture(lambda).map_err(|_| {
        Error::domain(format!(
            "no transmit probability stabilizes lambda = {lambda}: even the \
             rate-maximizing alpha = {alpha_tilde} gives service {}",
            sys.service_both()
        ))
    })?;
    Ok(OptimalAlpha {
        alpha_tilde,
        branch,
        service_both: sys.service_both(),
        delay,
    })
}
