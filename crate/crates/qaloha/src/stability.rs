//! Exact stability regions of the two-user queue-aware random-access system,
//! convexity classification of the region, and throughput-closure envelopes
//! obtained by sweeping policy grids.
//!
//! The two-user region is a union of two subregions, one per dominant system:
//! in dominant system `k` user `k`'s queue is kept artificially busy, which
//! decouples the peer's service rate and yields a pair of linear constraints
//! on the arrival-rate vector.  The union of the two subregions is exact for
//! the original interacting system.

use serde::Serialize;

use crate::channel::{Channel2, Channel3};
use crate::error::{Error, Result};
use crate::policy::{Policy2, Policy3};

/// Composite per-user rates derived from a channel table and a policy.
///
/// All fields are probabilities per slot (dimensionless, in `[0, 1]`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Composites2 {
    /// Transmit probabilities `alpha` copied from the policy.
    pub alpha: [f64; 2],
    /// Empty-watched-queue transmit probabilities `alpha_star` from the policy.
    pub alpha_star: [f64; 2],
    /// `peer_factor[k]` is the success factor experienced by the *other*
    /// user's transmissions while both queues are busy, averaged over user
    /// `k+1`'s transmit decision: `(1-alpha_k)·P_peer_alone +
    /// alpha_k·(P_peer_under_interference + P_both_succeed)`.
    pub peer_factor: [f64; 2],
    /// `busy_service[k]`: service rate of user `k+1` when both queues are
    /// busy (`alpha_k · peer_factor[other]`).
    pub busy_service: [f64; 2],
    /// `alone_service[k]`: service rate of user `k+1` when the watched queue
    /// is empty (`alpha_star_k · P_alone_adapted`).
    pub alone_service: [f64; 2],
    /// `gap[k]`: single-success busy service minus alone service.  The
    /// standing assumption of the exact analysis is `gap[k] < 0`: emptying
    /// the peer queue helps.
    pub gap: [f64; 2],
    /// `gap_hat[k] = gap[k] + double_success`: busy service minus alone
    /// service including simultaneous double successes.
    pub gap_hat: [f64; 2],
    /// Probability that a slot with both users transmitting delivers both
    /// packets (`alpha_1 · alpha_2 · P_both_succeed`).
    pub double_success: f64,
}

/// Derive the composite rates for a validated channel table and policy.
pub fn composites2(ch: &Channel2, pol: &Policy2) -> Composites2 {
    let [a1, a2] = pol.alpha;
    let c = ch.both_tx_success_both;
    // Success factor seen by the peer of user k while both queues are busy.
    let hat1 = (1.0 - a1) * ch.success_alone_2 + a1 * (ch.both_tx_success_2 + c);
    let hat2 = (1.0 - a2) * ch.success_alone_1 + a2 * (ch.both_tx_success_1 + c);
    let e = a1 * a2 * c;
    // Busy service split into single-success part plus double successes.
    let single1 = a1 * ((1.0 - a2) * ch.success_alone_1 + a2 * ch.both_tx_success_1);
    let single2 = a2 * ((1.0 - a1) * ch.success_alone_2 + a1 * ch.both_tx_success_2);
    let busy = [single1 + e, single2 + e];
    debug_assert!((busy[0] - a1 * hat2).abs() < 1e-14);
    debug_assert!((busy[1] - a2 * hat1).abs() < 1e-14);
    let alone = [
        pol.alpha_star[0] * ch.success_alone_adapted_1,
        pol.alpha_star[1] * ch.success_alone_adapted_2,
    ];
    let gap = [single1 - alone[0], single2 - alone[1]];
    let gap_hat = [gap[0] + e, gap[1] + e];
    debug_assert!((gap_hat[0] - (busy[0] - alone[0])).abs() < 1e-14);
    debug_assert!((gap_hat[1] - (busy[1] - alone[1])).abs() < 1e-14);
    Composites2 {
        alpha: pol.alpha,
        alpha_star: pol.alpha_star,
        peer_factor: [hat1, hat2],
        busy_service: busy,
        alone_service: alone,
        gap,
        gap_hat,
        double_success: e,
    }
}

/// Location of a rate point relative to a region, using strict inequalities.
/// Points within `eps` of a bounding line are reported [`Membership::Marginal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Membership {
    Interior,
    Marginal,
    Exterior,
}

/// One subregion of the two-user stability region: the set
/// `{ lambda_own < own_intercept + own_slope·lambda_peer,  lambda_peer < peer_cap }`
/// where `own` refers to [`Subregion2::dominant_user`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Subregion2 {
    /// 1-based label of the user whose queue is saturated in the dominant
    /// system that generates this subregion.
    pub dominant_user: usize,
    /// Bound on the dominant user's rate when the peer's rate is zero
    /// (its alone-service rate).
    pub own_intercept: f64,
    /// Change of that bound per unit of peer arrival rate
    /// (`gap_hat / peer busy service`; zero when the cap is degenerate).
    pub own_slope: f64,
    /// Strict upper bound on the peer's arrival rate
    /// (the peer's busy-service rate).
    pub peer_cap: f64,
}

impl Subregion2 {
    fn split(&self, lambda: [f64; 2]) -> (f64, f64) {
        if self.dominant_user == 1 {
            (lambda[0], lambda[1])
        } else {
            (lambda[1], lambda[0])
        }
    }

    /// Membership of a rate pair in this subregion alone.
    pub fn membership(&self, lambda: [f64; 2], eps: f64) -> Membership {
        let (own, peer) = self.split(lambda);
        let margin_peer = self.peer_cap - peer;
        let margin_own = self.own_intercept + self.own_slope * peer - own;
        let margin = margin_peer.min(margin_own);
        if margin > eps {
            Membership::Interior
        } else if margin < -eps {
            Membership::Exterior
        } else {
            Membership::Marginal
        }
    }

    /// Supremum of `t` such that `t·(cos θ, sin θ)` lies in the *closed*
    /// subregion (boundary included).  Closed semantics keep the reach exact
    /// on the axes, where a degenerate peer cap collapses the open region to
    /// an axis segment (a silent or saturated peer), and agree with the open
    /// region everywhere it has interior points.
    pub fn ray_reach(&self, cos_t: f64, sin_t: f64) -> f64 {
        let (own_dir, peer_dir) = if self.dominant_user == 1 {
            (cos_t, sin_t)
        } else {
            (sin_t, cos_t)
        };
        let mut t = f64::INFINITY;
        if peer_dir > 0.0 {
            t = t.min(self.peer_cap / peer_dir);
        }
        let denom = own_dir - self.own_slope * peer_dir;
        if denom > 0.0 {
            t = t.min(self.own_intercept / denom);
        }
        t.max(0.0)
    }
}

/// Convexity classification of the two-user stability region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Convexity {
    /// The union of the two subregions is a convex polygon.
    Convex,
    /// The union has an inward kink at the saturated corner.
    NonConvex,
    /// Degenerate case: the region is exactly the time-sharing triangle
    /// spanned by the two alone-service axis intercepts.
    TimeSharingTriangle,
}

/// Absolute tolerance on the convexity indicator for declaring the
/// time-sharing-triangle equality case.
pub const CONVEXITY_EQ_TOL: f64 = 1e-12;

/// Convexity indicator: sum over users of busy service over alone service.
/// The region is convex iff the indicator is `>= 1`, and degenerates to the
/// time-sharing triangle at exactly `1`.
pub fn convexity_indicator(c: &Composites2) -> f64 {
    c.busy_service[0] / c.alone_service[0] + c.busy_service[1] / c.alone_service[1]
}

/// Printed variant of the indicator that reuses user 1's peer factor in the
/// second term (`alpha_2·peer_factor[1]` instead of user 2's busy service).
/// Kept for comparison with [`convexity_indicator`]; the case analysis of the
/// region geometry supports the primary form.
pub fn convexity_indicator_literal(c: &Composites2) -> f64 {
    c.busy_service[0] / c.alone_service[0]
        + c.alpha[1] * c.peer_factor[1] / c.alone_service[1]
}

fn classify(indicator: f64) -> Convexity {
    if (indicator - 1.0).abs() <= CONVEXITY_EQ_TOL {
        Convexity::TimeSharingTriangle
    } else if indicator >= 1.0 {
        Convexity::Convex
    } else {
        Convexity::NonConvex
    }
}

/// Classify the convexity of the stability region for the given channel and
/// policy without constructing the full region.
pub fn is_convex(ch: &Channel2, pol: &Policy2) -> Convexity {
    classify(convexity_indicator(&composites2(ch, pol)))
}

/// The exact two-user stability region: union of two subregions plus the
/// derived composite rates and convexity classification.
#[derive(Debug, Clone, Serialize)]
pub struct Region2 {
    pub composites: Composites2,
    pub subregions: [Subregion2; 2],
    pub convexity: Convexity,
}

impl Region2 {
    /// Membership of a rate pair in the union region.  Interior of any
    /// subregion wins; otherwise marginal in any subregion wins.
    pub fn membership(&self, lambda: [f64; 2], eps: f64) -> Membership {
        let mut worst = Membership::Exterior;
        for sub in &self.subregions {
            match sub.membership(lambda, eps) {
                Membership::Interior => return Membership::Interior,
                Membership::Marginal => worst = Membership::Marginal,
                Membership::Exterior => {}
            }
        }
        worst
    }

    /// Supremum of `t` such that `t·(cos θ, sin θ)` lies in the closed union
    /// region.  Direction components below 1e-15 in magnitude are snapped to
    /// zero so that axis rays are treated exactly.
    pub fn ray_reach(&self, theta: f64) -> f64 {
        let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
        let (sin_t, cos_t) = theta.sin_cos();
        let (sin_t, cos_t) = (snap(sin_t), snap(cos_t));
        self.subregions
            .iter()
            .map(|s| s.ray_reach(cos_t, sin_t))
            .fold(0.0, f64::max)
    }

    /// Boundary polyline sampled along `rays` equally spaced directions in
    /// `[0, pi/2]`, ordered by increasing angle.
    pub fn boundary(&self, rays: usize) -> Vec<[f64; 2]> {
        fan_angles(rays)
            .map(|theta| {
                let t = self.ray_reach(theta);
                [t * theta.cos(), t * theta.sin()]
            })
            .collect()
    }

    /// The saturated corner where the bounding lines of the two subregions
    /// meet: both users served at their busy-service rates.
    pub fn saturated_corner(&self) -> [f64; 2] {
        [
            self.composites.busy_service[0],
            self.composites.busy_service[1],
        ]
    }
}

fn region_from_composites(c: Composites2) -> Region2 {
    let sub = |user: usize| {
        let other = 1 - user;
        let peer_cap = c.busy_service[other];
        let own_slope = if peer_cap > 0.0 {
            c.gap_hat[user] / peer_cap
        } else {
            0.0
        };
        Subregion2 {
            dominant_user: user + 1,
            own_intercept: c.alone_service[user],
            own_slope,
            peer_cap,
        }
    };
    let convexity = classify(convexity_indicator(&c));
    Region2 {
        subregions: [sub(0), sub(1)],
        convexity,
        composites: c,
    }
}

/// Compute the exact stability region for a two-user system.
///
/// Errors if the channel or policy is invalid, or if the standing assumption
/// of the analysis fails for either user (non-negative service gap: emptying
/// the peer's queue must strictly improve a user's service rate).
pub fn two_user_region(ch: &Channel2, pol: &Policy2) -> Result<Region2> {
    ch.validate()?;
    pol.validate()?;
    let comps = composites2(ch, pol);
    for user in 0..2 {
        if comps.gap[user] >= 0.0 {
            return Err(Error::domain(format!(
                "standing assumption violated for user {}: service gap {:+.6e} \
                 is not negative (busy single-success rate {:.6} >= alone rate {:.6})",
                user + 1,
                comps.gap[user],
                comps.gap[user] + comps.alone_service[user],
                comps.alone_service[user],
            )));
        }
    }
    Ok(region_from_composites(comps))
}

/// Angles of a fan of `n >= 2` rays covering `[0, pi/2]` inclusive.
fn fan_angles(n: usize) -> impl Iterator<Item = f64> {
    let steps = n.max(2) - 1;
    (0..=steps).map(move |j| std::f64::consts::FRAC_PI_2 * j as f64 / steps as f64)
}

/// Options for the closure (envelope) sweep over transmit-probability grids.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosureOptions {
    /// Grid points per busy transmit-probability axis (`>= 2`), spanning `[0, 1]`.
    pub alpha_steps: usize,
    /// Grid points for each empty-watched transmit probability on
    /// `[alpha_i, 1]` (used only when `adaptive` is set; `>= 2`).
    pub alpha_star_steps: usize,
    /// When set, sweep `alpha_star` independently on `[alpha, 1]` per user;
    /// otherwise pin `alpha_star = alpha` (the non-adaptive baseline).
    pub adaptive: bool,
    /// Number of rays in the fan covering the first quadrant (`>= 2`).
    pub rays: usize,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            alpha_steps: 21,
            alpha_star_steps: 21,
            adaptive: true,
            rays: 90,
        }
    }
}

impl ClosureOptions {
    fn validate(&self) -> Result<()> {
        if self.alpha_steps < 2 || self.rays < 2 {
            return Err(Error::invalid(
                "closure sweep needs at least 2 grid points per policy dimension and 2 rays",
            ));
        }
        if self.adaptive && self.alpha_star_steps < 2 {
            return Err(Error::invalid(
                "adaptive closure sweep needs at least 2 empty-watched grid points",
            ));
        }
        Ok(())
    }
}

/// One point of the closure envelope: the furthest stable rate pair along a
/// ray, together with the policy that attains it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClosurePoint {
    /// Ray angle in radians, in `[0, pi/2]`.
    pub theta: f64,
    /// Distance from the origin to the envelope along the ray.
    pub reach: f64,
    /// The envelope point `reach · (cos θ, sin θ)`.
    pub lambda: [f64; 2],
    /// Busy transmit probabilities attaining the reach.
    pub alpha: [f64; 2],
    /// Empty-watched transmit probabilities attaining the reach.
    pub alpha_star: [f64; 2],
}

fn grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let steps = n.max(2) - 1;
    (0..=steps)
        .map(|j| lo + (hi - lo) * j as f64 / steps as f64)
        .collect()
}

/// Sweep a policy grid and return the envelope of the union of all per-policy
/// stability regions, sampled along a fan of rays.  The output is
/// deterministic regardless of thread count: each ray scans the grid in a
/// fixed order and keeps the first maximizer.
pub fn closure(ch: &Channel2, opts: &ClosureOptions) -> Result<Vec<ClosurePoint>> {
    use rayon::prelude::*;

    ch.validate()?;
    opts.validate()?;
    let alphas = grid(opts.alpha_steps, 0.0, 1.0);

    // Enumerate the policy grid once, in deterministic order.
    let mut policies: Vec<Policy2> = Vec::new();
    for &a1 in &alphas {
        let stars1 = if opts.adaptive {
            grid(opts.alpha_star_steps, a1, 1.0)
        } else {
            vec![a1]
        };
        for &a2 in &alphas {
            let stars2 = if opts.adaptive {
                grid(opts.alpha_star_steps, a2, 1.0)
            } else {
                vec![a2]
            };
            for &s1 in &stars1 {
                for &s2 in &stars2 {
                    policies.push(Policy2 {
                        alpha: [a1, a2],
                        alpha_star: [s1, s2],
                    });
                }
            }
        }
    }
    let regions: Vec<Region2> = policies
        .par_iter()
        .map(|pol| region_from_composites(composites2(ch, pol)))
        .collect();

    let angles: Vec<f64> = fan_angles(opts.rays).collect();
    Ok(angles
        .par_iter()
        .map(|&theta| {
            let mut best_reach = 0.0_f64;
            let mut best: Option<&Region2> = None;
            for region in &regions {
                let reach = region.ray_reach(theta);
                if reach > best_reach {
                    best_reach = reach;
                    best = Some(region);
                }
            }
            let (alpha, alpha_star) = best
                .map(|r| (r.composites.alpha, r.composites.alpha_star))
                .unwrap_or(([0.0; 2], [0.0; 2]));
            ClosurePoint {
                theta,
                reach: best_reach,
                lambda: [best_reach * theta.cos(), best_reach * theta.sin()],
                alpha,
                alpha_star,
            }
        })
        .collect())
}

/// Reduce the three-user system with user `dominant` saturated to an exact
/// two-user system for the other two users.
///
/// Pair coordinates: user `dominant+1` (mod 3) first, user `dominant+2`
/// second.  The first pair member watches the second; the second watches the
/// saturated user, whose queue never empties, so its adapted probability is
/// pinned to its nominal one.  The saturated user's transmissions are
/// marginalized into the pair's channel table: it transmits with its nominal
/// probability while the first pair member's queue (the one it watches) is
/// busy and with its adapted probability when that queue is empty.
pub fn dominant_pair(ch3: &Channel3, pol3: &Policy3, dominant: usize) -> Result<(Channel2, Policy2)> {
    if dominant >= 3 {
        return Err(Error::invalid(format!(
            "dominant user index {dominant} out of range (0..3)"
        )));
    }
    ch3.validate()?;
    pol3.validate()?;
    let k = dominant;
    let a = (k + 1) % 3;
    let b = (k + 2) % 3;
    let (bit_k, bit_a, bit_b) = (1usize << k, 1usize << a, 1usize << b);
    let (tk, tk_star) = (pol3.alpha[k], pol3.alpha_star[k]);

    // Lone transmissions by a pair member, with the saturated user's activity
    // averaged out.  The saturated user watches `a`, so its transmit
    // probability follows the first pair member's queue state.
    let mix = |table: &[[f64; 8]; 3], user: usize, own_bit: usize, t: f64| {
        (1.0 - t) * table[user][own_bit] + t * table[user][own_bit | bit_k]
    };
    let ch2 = Channel2 {
        success_alone_1: mix(&ch3.busy, a, bit_a, tk),
        success_alone_2: mix(&ch3.busy, b, bit_b, tk),
        success_alone_adapted_1: mix(&ch3.one_empty, a, bit_a, tk),
        success_alone_adapted_2: mix(&ch3.one_empty, b, bit_b, tk_star),
        both_tx_success_1: mix(&ch3.busy, a, bit_a | bit_b, tk),
        both_tx_success_2: mix(&ch3.busy, b, bit_a | bit_b, tk),
        both_tx_success_both: 0.0,
    };
    ch2.validate()?;
    let pol2 = Policy2 {
        alpha: [pol3.alpha[a], pol3.alpha[b]],
        alpha_star: [pol3.alpha_star[a], pol3.alpha[b]],
    };
    Ok((ch2, pol2))
}

/// Long-run service rate of the saturated user `dominant`, given the corner
/// probabilities `(F(0,0), F(1,0), F(0,1))` of the stationary pair transform
/// (first pair coordinate = user `dominant+1`).
pub fn saturated_throughput(
    ch3: &Channel3,
    pol3: &Policy3,
    dominant: usize,
    corners: (f64, f64, f64),
) -> Result<f64> {
    if dominant >= 3 {
        return Err(Error::invalid(format!(
            "dominant user index {dominant} out of range (0..3)"
        )));
    }
    let k = dominant;
    let a = (k + 1) % 3;
    let b = (k + 2) % 3;
    let (bit_k, bit_a, bit_b) = (1usize << k, 1usize << a, 1usize << b);
    let (f00, f10, f01) = corners;
    let p_both_empty = f00;
    let p_a_busy_b_empty = f10 - f00;
    let p_a_empty_b_busy = f01 - f00;
    let p_both_busy = 1.0 - f10 - f01 + f00;
    for (what, p) in [
        ("both empty", p_both_empty),
        ("first busy, second empty", p_a_busy_b_empty),
        ("first empty, second busy", p_a_empty_b_busy),
        ("both busy", p_both_busy),
    ] {
        if !(-1e-9..=1.0 + 1e-9).contains(&p) {
            return Err(Error::inconsistent(format!(
                "corner probabilities imply a negative pair-state probability \
                 ({what}: {p:.6e})"
            )));
        }
    }

    let (aa, ab) = (pol3.alpha[a], pol3.alpha[b]);
    let aa_star = pol3.alpha_star[a];
    let (tk, tk_star) = (pol3.alpha[k], pol3.alpha_star[k]);
    // Both pair queues busy: everyone at nominal probabilities, all-busy table.
    let mut both_busy = 0.0;
    for (ta, pa) in [(0usize, 1.0 - aa), (bit_a, aa)] {
        for (tb, pb) in [(0usize, 1.0 - ab), (bit_b, ab)] {
            both_busy += pa * pb * ch3.busy[k][bit_k | ta | tb];
        }
    }
    both_busy *= tk;
    // First pair queue busy, second empty: the first member adapts (it
    // watches the empty queue); the saturated user stays nominal.
    let a_busy_b_empty = tk
        * ((1.0 - aa_star) * ch3.one_empty[k][bit_k]
            + aa_star * ch3.one_empty[k][bit_k | bit_a]);
    // First pair queue empty: the saturated user adapts; the second member
    // stays nominal (it watches the saturated queue, which is never empty).
    let a_empty_b_busy = tk_star
        * ((1.0 - ab) * ch3.one_empty[k][bit_k] + ab * ch3.one_empty[k][bit_k | bit_b]);
    let both_empty = tk_star * ch3.two_empty[k];

    Ok(p_both_busy * both_busy
        + p_a_busy_b_empty * a_busy_b_empty
        + p_a_empty_b_busy * a_empty_b_busy
        + p_both_empty * both_empty)
}

/// Per-dominant-user detail of a three-user membership query.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominantCheck {
    /// Index of the saturated user.
    pub dominant: usize,
    /// Membership of the other two users' rates in the pair region.
    pub pair_membership: Membership,
    /// Saturated user's long-run service rate (defined when the pair is
    /// strictly stable and its corner transform is computable; `None`
    /// otherwise, in which case this check cannot certify interiority).
    pub saturated_throughput: Option<f64>,
    /// `saturated_throughput − lambda_dominant` (positive inside).
    pub own_margin: Option<f64>,
    /// Whether the rate triple lies strictly inside this subregion.
    pub interior: bool,
}

/// Result of a three-user membership query.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Region3Point {
    pub lambda: [f64; 3],
    /// Membership in the union of the three dominant-user subregions.
    pub membership: Membership,
    pub detail: [DominantCheck; 3],
}

/// Classify a rate triple against the three-user stability region, described
/// as the union over each choice of saturated user of the rates for which
/// the remaining pair is stable and the saturated user's arrival rate stays
/// below its long-run service rate.
pub fn three_user_membership(
    ch3: &Channel3,
    pol3: &Policy3,
    lambda: [f64; 3],
    cfg: &crate::bvp::BvpConfig,
    eps: f64,
) -> Result<Region3Point> {
    if lambda.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(Error::invalid(
            "arrival rates must be finite and non-negative",
        ));
    }
    let mut detail = Vec::with_capacity(3);
    for k in 0..3 {
        let (ch2, pol2) = dominant_pair(ch3, pol3, k)?;
        let lam_pair = [lambda[(k + 1) % 3], lambda[(k + 2) % 3]];
        let pair_membership = two_user_region(&ch2, &pol2)?.membership(lam_pair, eps);
        let mut check = DominantCheck {
            dominant: k,
            pair_membership,
            saturated_throughput: None,
            own_margin: None,
            interior: false,
        };
        if pair_membership == Membership::Interior {
            // The corner transform is only computable on the pair solver's
            // domain; outside it this dominant user simply cannot certify
            // interiority (the union over the other choices still can).
            if let Ok(corners) = crate::bvp::solve_modified_f1(ch3, pol3, k, lambda, cfg) {
                let mu = saturated_throughput(ch3, pol3, k, corners)?;
                check.saturated_throughput = Some(mu);
                check.own_margin = Some(mu - lambda[k]);
                check.interior = mu - lambda[k] > eps;
            }
        }
        detail.push(check);
    }
    let detail: [DominantCheck; 3] = [detail[0], detail[1], detail[2]];
    let membership = if detail.iter().any(|d| d.interior) {
        Membership::Interior
    } else if detail.iter().any(|d| {
        d.pair_membership == Membership::Marginal
            || d.own_margin.is_some_and(|m| m.abs() <= eps)
    }) {
        Membership::Marginal
    } else {
        Membership::Exterior
    };
    Ok(Region3Point {
        lambda,
        membership,
        detail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Preset;
    use approx::assert_relative_eq;

    fn collision() -> Channel2 {
        Preset::Collision.build(1.0, 1.0).unwrap()
    }

    #[test]
    fn half_probability_collision_region_coefficients() {
        let pol = Policy2 {
            alpha: [0.5, 0.5],
            alpha_star: [1.0, 1.0],
        };
        let region = two_user_region(&collision(), &pol).unwrap();
        let sub1 = &region.subregions[0];
        assert_eq!(sub1.dominant_user, 1);
        assert_relative_eq!(sub1.own_intercept, 1.0, max_relative = 1e-15);
        assert_relative_eq!(sub1.own_slope, -3.0, max_relative = 1e-14);
        assert_relative_eq!(sub1.peer_cap, 0.25, max_relative = 1e-15);
        // Symmetric policy: the mirrored subregion has the same coefficients.
        let sub2 = &region.subregions[1];
        assert_relative_eq!(sub2.own_intercept, 1.0, max_relative = 1e-15);
        assert_relative_eq!(sub2.own_slope, -3.0, max_relative = 1e-14);
        assert_relative_eq!(sub2.peer_cap, 0.25, max_relative = 1e-15);
        assert_eq!(region.convexity, Convexity::NonConvex);
    }

    #[test]
    fn membership_respects_strict_boundaries() {
        let pol = Policy2 {
            alpha: [0.5, 0.5],
            alpha_star: [1.0, 1.0],
        };
        let region = two_user_region(&collision(), &pol).unwrap();
        let eps = 1e-9;
        // Interior point of subregion 1.
        assert_eq!(region.membership([0.5, 0.1], eps), Membership::Interior);
        // On the sloped boundary of subregion 1 and outside subregion 2.
        assert_eq!(region.membership([0.7, 0.1], eps), Membership::Marginal);
        // Outside both.
        assert_eq!(region.membership([0.8, 0.2], eps), Membership::Exterior);
        // The saturated corner lies on both subregion boundaries.
        let corner = region.saturated_corner();
        assert_relative_eq!(corner[0], 0.25);
        assert_relative_eq!(corner[1], 0.25);
        assert_eq!(region.membership(corner, eps), Membership::Marginal);
    }

    #[test]
    fn axis_intercepts_equal_alone_service() {
        let ch = Preset::Mpr { b: 0.25, c: 0.2 }.build(0.85, 0.95).unwrap();
        let pol = Policy2 {
            alpha: [0.4, 0.7],
            alpha_star: [0.8, 0.9],
        };
        let region = two_user_region(&ch, &pol).unwrap();
        let eps = 1e-12;
        for user in 0..2 {
            let s = region.composites.alone_service[user];
            let mut just_in = [0.0; 2];
            just_in[user] = s - 1e-6;
            let mut just_out = [0.0; 2];
            just_out[user] = s + 1e-6;
            assert_eq!(region.membership(just_in, eps), Membership::Interior);
            assert_eq!(region.membership(just_out, eps), Membership::Exterior);
        }
    }

    #[test]
    fn standing_assumption_violation_names_the_user() {
        // Equal busy and alone rates for user 1: gap exactly zero.
        let ch = collision();
        let pol = Policy2 {
            alpha: [0.5, 0.0],
            alpha_star: [0.5, 1.0],
        };
        let err = two_user_region(&ch, &pol).unwrap_err();
        assert!(err.to_string().contains("user 1"), "got: {err}");
    }

    #[test]
    fn always_transmit_collision_is_nonconvex() {
        let pol = Policy2 {
            alpha: [1.0, 1.0],
            alpha_star: [1.0, 1.0],
        };
        let comps = composites2(&collision(), &pol);
        assert_relative_eq!(convexity_indicator(&comps), 0.0);
        assert_eq!(is_convex(&collision(), &pol), Convexity::NonConvex);
    }

    #[test]
    fn indicator_equality_gives_time_sharing_triangle() {
        // Constructed so the saturated corner lies exactly on the segment
        // between the two axis intercepts.
        let ch = Preset::Mpr { b: 0.3, c: 0.0 }.build(0.9, 1.0).unwrap();
        let pol = Policy2 {
            alpha: [0.3, 1.0],
            alpha_star: [0.09 / 0.28, 1.0],
        };
        let comps = composites2(&ch, &pol);
        let ind = convexity_indicator(&comps);
        assert!((ind - 1.0).abs() <= CONVEXITY_EQ_TOL, "indicator {ind}");
        let region = two_user_region(&ch, &pol).unwrap();
        assert_eq!(region.convexity, Convexity::TimeSharingTriangle);
        // The saturated corner sits on the time-sharing segment
        // lambda_1/s_1 + lambda_2/s_2 = 1.
        let corner = region.saturated_corner();
        let s = region.composites.alone_service;
        assert_relative_eq!(corner[0] / s[0] + corner[1] / s[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn strong_mpr_is_convex_and_contains_time_sharing_segment() {
        let ch = Preset::Mpr { b: 0.02, c: 0.96 }.build(1.0, 1.0).unwrap();
        let pol = Policy2::symmetric(0.5, 0.5);
        assert_eq!(is_convex(&ch, &pol), Convexity::Convex);
        let region = two_user_region(&ch, &pol).unwrap();
        let s = region.composites.alone_service;
        // Sample the segment between the slightly shrunk axis intercepts.
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            let lambda = [(1.0 - t) * s[0] * 0.999, t * s[1] * 0.999];
            assert_eq!(
                region.membership(lambda, 1e-12),
                Membership::Interior,
                "segment point {lambda:?}"
            );
        }
    }

    #[test]
    fn literal_indicator_variant_differs_for_asymmetric_policies() {
        let ch = Preset::Capture { b: 0.2 }.build(0.9, 1.0).unwrap();
        let pol = Policy2 {
            alpha: [0.3, 0.8],
            alpha_star: [0.6, 0.9],
        };
        let comps = composites2(&ch, &pol);
        let main = convexity_indicator(&comps);
        let literal = convexity_indicator_literal(&comps);
        assert!((main - literal).abs() > 1e-6);
        // They agree for symmetric policies, where the two peer factors match.
        let sym = composites2(&ch, &Policy2::symmetric(0.4, 0.7));
        assert_relative_eq!(
            convexity_indicator(&sym),
            convexity_indicator_literal(&sym),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ray_reach_matches_membership_probe() {
        let ch = Preset::Capture { b: 0.2 }.build(0.9, 1.0).unwrap();
        let pol = Policy2 {
            alpha: [0.45, 0.6],
            alpha_star: [0.7, 0.95],
        };
        let region = two_user_region(&ch, &pol).unwrap();
        for j in 0..7 {
            let theta = std::f64::consts::FRAC_PI_2 * (j as f64 + 0.5) / 7.0;
            let t = region.ray_reach(theta);
            assert!(t > 0.0);
            let inside = [0.999 * t * theta.cos(), 0.999 * t * theta.sin()];
            let outside = [1.001 * t * theta.cos(), 1.001 * t * theta.sin()];
            assert_eq!(region.membership(inside, 1e-12), Membership::Interior);
            assert_ne!(region.membership(outside, 1e-12), Membership::Interior);
        }
    }

    #[test]
    fn collision_equal_alpha_closure_matches_classical_envelope() {
        let opts = ClosureOptions {
            alpha_steps: 21,
            alpha_star_steps: 2,
            adaptive: false,
            rays: 13,
        };
        let env = closure(&collision(), &opts).unwrap();
        for p in &env {
            let snap = |x: f64| if x.abs() < 1e-15 { 0.0 } else { x };
            let (s, c) = p.theta.sin_cos();
            let (s, c) = (snap(s), snap(c));
            // Classical two-user collision envelope: sqrt(l1) + sqrt(l2) = 1,
            // i.e. reach 1/(sqrt(cos) + sqrt(sin))^2 along the ray.
            let classical = 1.0 / (s.sqrt() + c.sqrt()).powi(2);
            assert!(
                p.reach <= classical * (1.0 + 1e-9),
                "theta {}: reach {} exceeds classical {}",
                p.theta,
                p.reach,
                classical
            );
            assert!(
                p.reach >= classical * 0.97,
                "theta {}: reach {} more than grid error below classical {}",
                p.theta,
                p.reach,
                classical
            );
        }
    }

    #[test]
    fn adaptive_closure_contains_equal_alpha_closure() {
        for ch in [collision(), Preset::Capture { b: 0.2 }.build(0.9, 1.0).unwrap()] {
            let equal = closure(
                &ch,
                &ClosureOptions {
                    alpha_steps: 11,
                    alpha_star_steps: 2,
                    adaptive: false,
                    rays: 13,
                },
            )
            .unwrap();
            let adaptive = closure(
                &ch,
                &ClosureOptions {
                    alpha_steps: 11,
                    alpha_star_steps: 5,
                    adaptive: true,
                    rays: 13,
                },
            )
            .unwrap();
            let mut strictly_better = 0;
            for (a, e) in adaptive.iter().zip(&equal) {
                assert!(
                    a.reach >= e.reach - 1e-12,
                    "theta {}: adaptive {} < equal {}",
                    a.theta,
                    a.reach,
                    e.reach
                );
                if a.reach > e.reach + 1e-9 {
                    strictly_better += 1;
                }
            }
            assert!(strictly_better > 0, "adaptive sweep never improved");
        }
    }

    #[test]
    fn closure_envelope_is_monotone_in_lambda1() {
        let env = closure(
            &Preset::Capture { b: 0.2 }.build(0.9, 1.0).unwrap(),
            &ClosureOptions {
                alpha_steps: 11,
                alpha_star_steps: 4,
                adaptive: true,
                rays: 25,
            },
        )
        .unwrap();
        // Fan angles increase, so lambda_1 decreases along the output; the
        // envelope must then be non-decreasing in lambda_2.
        for w in env.windows(2) {
            assert!(w[1].lambda[0] <= w[0].lambda[0] + 1e-12);
            assert!(w[1].lambda[1] >= w[0].lambda[1] - 1e-9);
        }
    }

    #[test]
    fn closure_is_deterministic_across_thread_counts() {
        let opts = ClosureOptions {
            alpha_steps: 7,
            alpha_star_steps: 3,
            adaptive: true,
            rays: 9,
        };
        let ch = Preset::Mpr { b: 0.2, c: 0.3 }.build(0.9, 1.0).unwrap();
        let a = closure(&ch, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| closure(&ch, &opts).unwrap());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.reach.to_bits(), y.reach.to_bits());
            assert_eq!(x.alpha, y.alpha);
            assert_eq!(x.alpha_star, y.alpha_star);
        }
    }
}
