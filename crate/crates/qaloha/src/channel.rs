//! Reception model: success-probability tables for two- and three-user
//! random-access channels.
//!
//! A table can be built three ways: from a named preset (collision, capture,
//! multi-packet reception), directly from its entries, or from physical SINR
//! parameters with Rayleigh block fading. In the physical model a transmission
//! from node `i` succeeds when its SINR at the common destination clears the
//! node's threshold; single-transmitter success probabilities have a closed
//! form, while joint events (both succeed / both fail) are estimated by Monte
//! Carlo over independent exponential fading draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Physical-layer parameters for `n` transmitting nodes and one destination.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhyParams {
    /// Transmit power per node (watts), strictly positive.
    pub tx_power: Vec<f64>,
    /// Distance from each node to the destination (meters), strictly positive.
    pub distance: Vec<f64>,
    /// Path-loss exponent (typical 2–6).
    pub path_loss_exp: f64,
    /// Mean of the exponential fading gain on each node→destination link.
    pub fading_mean: Vec<f64>,
    /// Receiver noise power at the destination (watts), non-negative.
    pub noise: f64,
    /// Per-node SINR threshold, non-negative.
    pub sinr_threshold: Vec<f64>,
}

impl PhyParams {
    /// Number of nodes described.
    pub fn n_nodes(&self) -> usize {
        self.tx_power.len()
    }

    /// Check all invariants; returns the node count on success.
    pub fn validate(&self) -> Result<usize> {
        let n = self.tx_power.len();
        if n == 0 {
            return Err(Error::invalid("at least one node required"));
        }
        for name_vec in [
            ("distance", &self.distance),
            ("fading_mean", &self.fading_mean),
            ("sinr_threshold", &self.sinr_threshold),
        ] {
            if name_vec.1.len() != n {
                return Err(Error::invalid(format!(
                    "{} must have one entry per node ({} vs {})",
                    name_vec.0,
                    name_vec.1.len(),
                    n
                )));
            }
        }
        if self.tx_power.iter().any(|&p| !(p > 0.0)) {
            return Err(Error::invalid("tx_power entries must be > 0"));
        }
        if self.distance.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::invalid("distance entries must be > 0"));
        }
        if self.fading_mean.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("fading_mean entries must be > 0"));
        }
        if !(self.path_loss_exp >= 0.0) {
            return Err(Error::invalid("path_loss_exp must be >= 0"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("noise must be >= 0"));
        }
        if self.sinr_threshold.iter().any(|&g| !(g >= 0.0)) {
            return Err(Error::invalid("sinr_threshold entries must be >= 0"));
        }
        Ok(n)
    }

    /// Mean received power from node `i` before fading: power × distance^(−h).
    pub fn link_gain(&self, i: usize) -> f64 {
        self.tx_power[i] * self.distance[i].powf(-self.path_loss_exp)
    }
}

/// Exact success probability for node `i` when the set `t` transmits
/// simultaneously (all with their nominal powers): the probability that the
/// Rayleigh-faded SINR of node `i` at the destination clears its threshold.
pub fn success_prob(phy: &PhyParams, i: usize, t: &[usize]) -> Result<f64> {
    let n = phy.validate()?;
    if t.is_empty() {
        return Err(Error::invalid("transmitting set must be non-empty"));
    }
    if !t.contains(&i) {
        return Err(Error::invalid(format!(
            "node {i} must be a member of the transmitting set"
        )));
    }
    if t.iter().any(|&k| k >= n) {
        return Err(Error::invalid("transmitting set contains an unknown node"));
    }
    let mut seen = vec![false; n];
    for &k in t {
        if seen[k] {
            return Err(Error::invalid("transmitting set has duplicate entries"));
        }
        seen[k] = true;
    }
    let gamma = phy.sinr_threshold[i];
    let own = phy.fading_mean[i] * phy.link_gain(i);
    let mut p = (-gamma * phy.noise / own).exp();
    for &k in t {
        if k == i {
            continue;
        }
        let other = phy.fading_mean[k] * phy.link_gain(k);
        p /= 1.0 + gamma * other / own;
    }
    Ok(p)
}

/// Monte-Carlo estimate of the same success probability by drawing the
/// exponential fading gains directly; returns `(estimate, standard_error)`.
/// Used to cross-validate [`success_prob`] and to measure joint events.
pub fn mc_success_prob(
    phy: &PhyParams,
    i: usize,
    t: &[usize],
    samples: u64,
    seed: u64,
) -> Result<(f64, f64)> {
    phy.validate()?;
    if !t.contains(&i) {
        return Err(Error::invalid("node must belong to the transmitting set"));
    }
    let mut hits = 0u64;
    for s in 0..samples {
        if mc_success_indicator(phy, i, t, s, seed) {
            hits += 1;
        }
    }
    let est = hits as f64 / samples as f64;
    let se = (est * (1.0 - est) / samples as f64).sqrt();
    Ok((est, se))
}

/// One fading draw for sample `s`: does node `i` clear its SINR threshold
/// while the set `t` transmits? Fading variates are counter-indexed so the
/// same sample index yields the same channel state for every queried node.
fn mc_success_indicator(phy: &PhyParams, i: usize, t: &[usize], s: u64, seed: u64) -> bool {
    let mut interference = phy.noise;
    let mut own_signal = 0.0;
    for &k in t {
        let a = rng::exponential(seed, &[s, k as u64], phy.fading_mean[k]);
        let received = a * phy.link_gain(k);
        if k == i {
            own_signal = received;
        } else {
            interference += received;
        }
    }
    if interference == 0.0 {
        // No noise and no interferers: any positive received power succeeds.
        return own_signal >= 0.0;
    }
    own_signal / interference >= phy.sinr_threshold[i]
}

/// Success-probability table for the two-user channel.
///
/// `success_alone_*` applies when a node transmits alone while the peer queue
/// is busy; the `adapted` variants apply when the peer queue is empty and the
/// node has switched to its adapted transmission parameters. The `both_*`
/// entries describe a slot in which both nodes transmit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel2 {
    /// User 1 transmits alone, peer queue busy.
    pub success_alone_1: f64,
    /// User 2 transmits alone, peer queue busy.
    pub success_alone_2: f64,
    /// User 1 transmits alone, peer queue empty (adapted transmission).
    pub success_alone_adapted_1: f64,
    /// User 2 transmits alone, peer queue empty (adapted transmission).
    pub success_alone_adapted_2: f64,
    /// Both transmit; exactly user 1 succeeds.
    pub both_tx_success_1: f64,
    /// Both transmit; exactly user 2 succeeds.
    pub both_tx_success_2: f64,
    /// Both transmit; both succeed (multi-packet reception).
    pub both_tx_success_both: f64,
}

impl Channel2 {
    /// Classical collision channel: a lone transmission succeeds with
    /// probability `p` (`p_adapted` when the peer is empty), simultaneous
    /// transmissions always fail.
    pub fn collision(p: f64, p_adapted: f64) -> Result<Self> {
        Self::symmetric_mpr(p, p_adapted, 0.0, 0.0)
    }

    /// Capture channel: when both transmit, each is captured alone with
    /// probability `b`, never both at once.
    pub fn capture(p: f64, p_adapted: f64, b: f64) -> Result<Self> {
        Self::symmetric_mpr(p, p_adapted, b, 0.0)
    }

    /// Symmetric multi-packet-reception channel: when both transmit, each
    /// succeeds alone with probability `b` and both succeed together with
    /// probability `c`.
    pub fn symmetric_mpr(p: f64, p_adapted: f64, b: f64, c: f64) -> Result<Self> {
        let ch = Channel2 {
            success_alone_1: p,
            success_alone_2: p,
            success_alone_adapted_1: p_adapted,
            success_alone_adapted_2: p_adapted,
            both_tx_success_1: b,
            both_tx_success_2: b,
            both_tx_success_both: c,
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Probability that neither succeeds when both transmit.
    pub fn both_tx_success_none(&self) -> f64 {
        1.0 - self.both_tx_success_1 - self.both_tx_success_2 - self.both_tx_success_both
    }

    /// True when simultaneous transmissions can never both succeed
    /// (collision and capture channels).
    pub fn is_capture_class(&self) -> bool {
        self.both_tx_success_both == 0.0
    }

    /// True when the table treats the two users identically.
    pub fn is_symmetric(&self) -> bool {
        self.success_alone_1 == self.success_alone_2
            && self.success_alone_adapted_1 == self.success_alone_adapted_2
            && self.both_tx_success_1 == self.both_tx_success_2
    }

    /// Check hard invariants (entries in [0,1], cell probabilities summing to
    /// at most one). Returns soft warnings for assumptions that the analysis
    /// expects but that are not strictly required of a probability table
    /// (adapted ≥ nominal ≥ under-interference monotonicity).
    pub fn validate(&self) -> Result<Vec<String>> {
        let entries = [
            ("success_alone_1", self.success_alone_1),
            ("success_alone_2", self.success_alone_2),
            ("success_alone_adapted_1", self.success_alone_adapted_1),
            ("success_alone_adapted_2", self.success_alone_adapted_2),
            ("both_tx_success_1", self.both_tx_success_1),
            ("both_tx_success_2", self.both_tx_success_2),
            ("both_tx_success_both", self.both_tx_success_both),
        ];
        for (name, v) in entries {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0,1]")));
            }
        }
        let sum =
            self.both_tx_success_1 + self.both_tx_success_2 + self.both_tx_success_both;
        if sum > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "both-transmit success probabilities sum to {sum} > 1"
            )));
        }
        let mut warnings = Vec::new();
        let mono = [
            (
                "user 1",
                self.success_alone_adapted_1,
                self.success_alone_1,
                self.both_tx_success_1 + self.both_tx_success_both,
            ),
            (
                "user 2",
                self.success_alone_adapted_2,
                self.success_alone_2,
                self.both_tx_success_2 + self.both_tx_success_both,
            ),
        ];
        for (who, adapted, alone, under_interference) in mono {
            if adapted + 1e-12 < alone {
                warnings.push(format!(
                    "{who}: adapted lone-success probability ({adapted}) is below the \
                     nominal one ({alone}); the model expects adaptation to help"
                ));
            }
            if alone + 1e-12 < under_interference {
                warnings.push(format!(
                    "{who}: lone-success probability ({alone}) is below the success \
                     probability under interference ({under_interference}); service \
                     rates will not be monotone in channel contention"
                ));
            }
        }
        Ok(warnings)
    }
}

/// Named symmetric channel presets for the two-user table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    /// Simultaneous transmissions always fail.
    Collision,
    /// Simultaneous transmissions: one side may be captured, never both.
    Capture { b: f64 },
    /// Full multi-packet reception with single- and double-success odds.
    Mpr { b: f64, c: f64 },
}

impl Preset {
    /// Materialize the preset with lone-success probabilities `p` (peer busy)
    /// and `p_adapted` (peer empty).
    pub fn build(self, p: f64, p_adapted: f64) -> Result<Channel2> {
        match self {
            Preset::Collision => Channel2::collision(p, p_adapted),
            Preset::Capture { b } => Channel2::capture(p, p_adapted, b),
            Preset::Mpr { b, c } => Channel2::symmetric_mpr(p, p_adapted, b, c),
        }
    }
}

/// Result of deriving a two-user table from physical parameters.
#[derive(Debug, Clone)]
pub struct DerivedChannel2 {
    /// The assembled table. Joint both-transmit cells come from Monte Carlo;
    /// lone-transmission entries use the exact closed form. Adapted entries
    /// equal the nominal ones (no power adaptation is modelled physically;
    /// adapted probabilities are a free input of the queueing model).
    pub channel: Channel2,
    /// Standard error of each Monte-Carlo cell estimate.
    pub cell_std_error: f64,
    /// |closed-form marginal − (cell sum)| for user 1 and user 2: the joint
    /// cells must reproduce the exact marginals within sampling error.
    pub marginal_residual: [f64; 2],
    /// Number of fading draws used.
    pub samples: u64,
}

/// Derive the two-user table from physical parameters: exact closed forms for
/// the lone-transmission entries, Monte Carlo over joint fading draws for the
/// both-transmit cells (the joint distribution has no closed form here).
pub fn derive_conditionals2(phy: &PhyParams, samples: u64, seed: u64) -> Result<DerivedChannel2> {
    let n = phy.validate()?;
    if n != 2 {
        return Err(Error::invalid(format!(
            "two-user derivation requires exactly 2 nodes, got {n}"
        )));
    }
    if samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }
    let p1 = success_prob(phy, 0, &[0])?;
    let p2 = success_prob(phy, 1, &[1])?;
    let both = [0, 1];
    let mut only1 = 0u64;
    let mut only2 = 0u64;
    let mut both_ok = 0u64;
    for s in 0..samples {
        let ok1 = mc_success_indicator(phy, 0, &both, s, seed);
        let ok2 = mc_success_indicator(phy, 1, &both, s, seed);
        match (ok1, ok2) {
            (true, false) => only1 += 1,
            (false, true) => only2 += 1,
            (true, true) => both_ok += 1,
            (false, false) => {}
        }
    }
    let m = samples as f64;
    let b1 = only1 as f64 / m;
    let b2 = only2 as f64 / m;
    let c = both_ok as f64 / m;
    let channel = Channel2 {
        success_alone_1: p1,
        success_alone_2: p2,
        success_alone_adapted_1: p1,
        success_alone_adapted_2: p2,
        both_tx_success_1: b1,
        both_tx_success_2: b2,
        both_tx_success_both: c,
    };
    channel.validate()?;
    let marg1 = success_prob(phy, 0, &both)?;
    let marg2 = success_prob(phy, 1, &both)?;
    Ok(DerivedChannel2 {
        channel,
        cell_std_error: (0.25 / m).sqrt(),
        marginal_residual: [(marg1 - (b1 + c)).abs(), (marg2 - (b2 + c)).abs()],
        samples,
    })
}

/// Success-probability table for the three-user channel, indexed by the
/// transmitting set (bit `k` of the mask = user `k` transmits, users 0-based)
/// and by how many of the *non-transmitting* users have empty queues, which
/// determines the transmitters' adaptation level.
///
/// Only capture-class tables (at most one success per slot) are supported by
/// the three-user simulator; the stability analysis uses the marginals only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Channel3 {
    /// `busy[k][mask]`: user `k` succeeds when the set `mask` transmits and
    /// all three queues are busy. Entries with `k ∉ mask` are unused.
    pub busy: [[f64; 8]; 3],
    /// Same, when exactly one queue is empty (its owner is not in `mask`);
    /// transmitters use singly-adapted parameters.
    pub one_empty: [[f64; 8]; 3],
    /// `two_empty[k]`: user `k` transmits alone while both other queues are
    /// empty (fully adapted transmission).
    pub two_empty: [f64; 3],
}

impl Channel3 {
    /// Symmetric table: `p_solo`/`p_pair`/`p_triple` are the per-user success
    /// probabilities when one/two/three users transmit with all queues busy;
    /// `p_solo_1e`/`p_pair_1e` apply when exactly one queue is empty, and
    /// `p_solo_2e` when a user transmits with both other queues empty.
    pub fn symmetric(
        p_solo: f64,
        p_pair: f64,
        p_triple: f64,
        p_solo_1e: f64,
        p_pair_1e: f64,
        p_solo_2e: f64,
    ) -> Result<Self> {
        let mut busy = [[0.0; 8]; 3];
        let mut one_empty = [[0.0; 8]; 3];
        for k in 0..3 {
            for mask in 1u8..8 {
                if mask & (1 << k) == 0 {
                    continue;
                }
                let size = mask.count_ones();
                busy[k as usize][mask as usize] = match size {
                    1 => p_solo,
                    2 => p_pair,
                    _ => p_triple,
                };
                if size <= 2 {
                    one_empty[k as usize][mask as usize] =
                        if size == 1 { p_solo_1e } else { p_pair_1e };
                }
            }
        }
        let ch = Channel3 {
            busy,
            one_empty,
            two_empty: [p_solo_2e; 3],
        };
        ch.validate()?;
        Ok(ch)
    }

    /// Three-user collision channel with per-adaptation lone-success odds.
    pub fn collision(p: f64, p_1e: f64, p_2e: f64) -> Result<Self> {
        Self::symmetric(p, 0.0, 0.0, p_1e, 0.0, p_2e)
    }

    /// Validate ranges and the capture-class property (per transmitting set
    /// and adaptation level, success probabilities sum to at most one).
    pub fn validate(&self) -> Result<Vec<String>> {
        let check01 = |v: f64, what: &str| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{what} = {v} outside [0,1]")));
            }
            Ok(())
        };
        for k in 0..3 {
            check01(self.two_empty[k], "two_empty entry")?;
            for mask in 1usize..8 {
                check01(self.busy[k][mask], "busy entry")?;
                check01(self.one_empty[k][mask], "one_empty entry")?;
            }
        }
        let mut warnings = Vec::new();
        for mask in 1u8..8u8 {
            let members: Vec<usize> = (0..3).filter(|k| mask & (1 << k) != 0).collect();
            let sum_busy: f64 = members.iter().map(|&k| self.busy[k][mask as usize]).sum();
            if sum_busy > 1.0 + 1e-12 {
                return Err(Error::invalid(format!(
                    "success probabilities for transmitting set {members:?} (all busy) \
                     sum to {sum_busy} > 1; the three-user model allows at most one \
                     success per slot"
                )));
            }
            if members.len() <= 2 {
                let sum_1e: f64 = members
                    .iter()
                    .map(|&k| self.one_empty[k][mask as usize])
                    .sum();
                if sum_1e > 1.0 + 1e-12 {
                    return Err(Error::invalid(format!(
                        "success probabilities for transmitting set {members:?} \
                         (one queue empty) sum to {sum_1e} > 1"
                    )));
                }
            }
        }
        for k in 0..3 {
            let solo_mask = 1usize << k;
            let solo = self.busy[k][solo_mask];
            let one = self.one_empty[k][solo_mask];
            let two = self.two_empty[k];
            if one + 1e-12 < solo || two + 1e-12 < one {
                warnings.push(format!(
                    "user {k}: lone-success probabilities do not increase with \
                     adaptation level ({solo} / {one} / {two})"
                ));
            }
        }
        Ok(warnings)
    }
}
