//! The `validate` subcommand: re-derives the key analytic results and
//! cross-checks them against closed forms and Monte-Carlo simulation.
//!
//! Simulation-backed checks are confidence-interval aware: when the slot
//! budget is too small to resolve a tolerance, the check reports
//! `inconclusive` instead of failing, so a reduced budget can never produce a
//! spurious failure. The process exits 0 iff no check fails.

use serde::Serialize;
use serde_json::json;

use qaloha::bvp::{delay_report, solve, winding_indices, BvpConfig, Regime};
use qaloha::channel::{Channel2, Preset};
use qaloha::policy::Policy2;
use qaloha::sim::{drift_test, run as sim_run, Mode, SimConfig, SimSystem, Verdict};
use qaloha::stability::{self, Membership};
use qaloha::symmetric::{optimal_alpha, SymmetricSystem};

use crate::config::{in_config, load, ValidateConfig};
use crate::output::{emit, render_json, Provenance};
use crate::{CliError, Ctx};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    /// What is being compared, in plain words.
    detail: String,
    expected: f64,
    measured: f64,
    /// Tolerance the comparison must meet for a decisive pass.
    tolerance: f64,
    /// ~95% half-width of the measurement, for simulation-backed checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    half_width: Option<f64>,
    status: Status,
}

/// Decisive comparison without statistical noise.
fn exact_check(name: &str, detail: &str, expected: f64, measured: f64, tol: f64) -> Check {
    let status = if (measured - expected).abs() <= tol {
        Status::Pass
    } else {
        Status::Fail
    };
    Check {
        name: name.to_string(),
        detail: detail.to_string(),
        expected,
        measured,
        tolerance: tol,
        half_width: None,
        status,
    }
}

/// Confidence-interval-aware comparison of a simulated quantity against an
/// analytic value: fail only when the discrepancy exceeds both the tolerance
/// and four half-widths; pass only when the half-width resolves the
/// tolerance; otherwise inconclusive.
fn ci_check(
    name: &str,
    detail: &str,
    expected: f64,
    measured: f64,
    tol: f64,
    half_width: f64,
) -> Check {
    let dev = (measured - expected).abs();
    let status = if dev > tol.max(4.0 * half_width) {
        Status::Fail
    } else if half_width <= 0.5 * tol && dev <= tol + 2.0 * half_width {
        Status::Pass
    } else {
        Status::Inconclusive
    };
    Check {
        name: name.to_string(),
        detail: detail.to_string(),
        expected,
        measured,
        tolerance: tol,
        half_width: Some(half_width),
        status,
    }
}

fn symmetric_capture() -> (Channel2, Policy2, SymmetricSystem) {
    let ch = Preset::Capture { b: 0.2 }.build(0.9, 1.0).expect("valid preset");
    let pol = Policy2::symmetric(0.6, 1.0);
    let sym = SymmetricSystem {
        alpha: 0.6,
        alpha_star: 1.0,
        p: 0.9,
        p_tilde: 1.0,
        b: 0.2,
        c: 0.0,
    };
    (ch, pol, sym)
}

fn symmetric_mpr() -> (Channel2, Policy2, SymmetricSystem) {
    let ch = Preset::Mpr { b: 0.3, c: 0.3 }.build(0.9, 1.0).expect("valid preset");
    let pol = Policy2::symmetric(0.6, 1.0);
    let sym = SymmetricSystem {
        alpha: 0.6,
        alpha_star: 1.0,
        p: 0.9,
        p_tilde: 1.0,
        b: 0.3,
        c: 0.3,
    };
    (ch, pol, sym)
}

fn asymmetric_capture() -> (Channel2, Policy2) {
    let ch = Channel2 {
        success_alone_1: 0.9,
        success_alone_2: 0.85,
        success_alone_adapted_1: 1.0,
        success_alone_adapted_2: 0.95,
        both_tx_success_1: 0.25,
        both_tx_success_2: 0.15,
        both_tx_success_both: 0.0,
    };
    let pol = Policy2 {
        alpha: [0.55, 0.65],
        alpha_star: [0.95, 0.9],
    };
    (ch, pol)
}

fn balanced_point() -> (Channel2, Policy2) {
    let ch = Preset::Mpr { b: 0.3, c: 0.0 }.build(0.9, 1.0).expect("valid preset");
    let pol = Policy2 {
        alpha: [0.3, 1.0],
        alpha_star: [0.09 / 0.28, 1.0],
    };
    (ch, pol)
}

fn three_user_system() -> (qaloha::channel::Channel3, qaloha::policy::Policy3) {
    let ch = qaloha::channel::Channel3::symmetric(0.9, 0.35, 0.15, 0.95, 0.42, 1.0)
        .expect("valid three-user channel");
    let pol = qaloha::policy::Policy3 {
        alpha: [0.5, 0.55, 0.6],
        alpha_star: [0.9, 0.85, 0.95],
    };
    (ch, pol)
}

fn sim_two(ch: &Channel2, pol: &Policy2, lambda: [f64; 2], slots: u64, seed: u64) -> SimConfig {
    SimConfig::new(
        SimSystem::Two {
            channel: ch.clone(),
            policy: pol.clone(),
            lambda,
        },
        slots,
        slots / 10,
        seed,
    )
}

/// Largest `lambda1` with `[lambda1, lambda2]` not exterior, by bisection.
fn boundary_lambda1(reg: &stability::Region2, lambda2: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if reg.membership([mid, lambda2], 0.0) == Membership::Exterior {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn analytic_checks(checks: &mut Vec<Check>) -> Result<(), CliError> {
    let bvp = BvpConfig::default();

    // Exact region boundary against strict membership on both sides.
    let (ach, apol) = asymmetric_capture();
    let reg = stability::two_user_region(&ach, &apol)?;
    let edge = boundary_lambda1(&reg, 0.25);
    let inside = reg.membership([edge - 0.02, 0.25], 1e-9) == Membership::Interior;
    let outside = reg.membership([edge + 0.02, 0.25], 1e-9) == Membership::Exterior;
    checks.push(exact_check(
        "region_boundary_separates_membership",
        "membership flips across the computed boundary at lambda2 = 0.25",
        1.0,
        if inside && outside { 1.0 } else { 0.0 },
        0.0,
    ));

    // Balanced route pins the empty-system probability to the load deficit.
    let (bch, bpol) = balanced_point();
    let sol = solve(&bch, &bpol, [0.06, 0.3], &bvp)?;
    let rho = 0.06 / (0.09 / 0.28) + 0.3;
    checks.push(exact_check(
        "balanced_route_pins_empty_probability",
        "P(both queues empty) equals 1 - rho on the balanced surface",
        1.0 - rho,
        sol.h00(),
        1e-8,
    ));
    let is_balanced = sol.regime() == Regime::Balanced;
    checks.push(exact_check(
        "balanced_route_selected",
        "a unit service indicator routes the solver through the degenerate (Dirichlet) branch",
        1.0,
        if is_balanced { 1.0 } else { 0.0 },
        0.0,
    ));

    // Single-user transform derivative against the closed form.
    let (sch, spol, sym) = symmetric_capture();
    let lam = 0.2;
    let rep = delay_report(&sch, &spol, [lam, lam], &bvp)?;
    let exact = lam * (2.0 + lam) / 2.0;
    checks.push(exact_check(
        "section_derivative_matches_closed_form",
        "boundary derivative of the transform section at the symmetric point",
        exact,
        rep.section_derivatives[0],
        1e-6 * exact,
    ));

    // Solver delay against the symmetric closed form.
    let rep = delay_report(&sch, &spol, [0.1, 0.1], &bvp)?;
    let closed = sym.delay_capture(0.1)?;
    checks.push(exact_check(
        "solver_delay_matches_closed_form",
        "boundary-value delay vs the symmetric capture formula at lambda = 0.1",
        closed,
        rep.mean_delay[0].unwrap_or(f64::NAN),
        1e-3 * closed,
    ));

    // Flow conservation on an asymmetric system.
    let rep = delay_report(&ach, &apol, [0.2, 0.25], &bvp)?;
    checks.push(exact_check(
        "flow_conservation_residual",
        "probability-flow identities of the solved transform",
        0.0,
        rep.flow_residual[0].abs().max(rep.flow_residual[1].abs()),
        1e-6,
    ));

    // The disk map of a circle is the identity.
    let map = qaloha::conformal::solve_theodorsen(|_| Ok(1.0), 256, 1e-12)?;
    let mut worst = 0.0f64;
    for (j, &psi) in map.psi().iter().enumerate() {
        worst = worst.max((psi - map.grid_angle(j)).abs());
    }
    checks.push(exact_check(
        "conformal_map_identity_on_circle",
        "boundary correspondence of the unit circle map",
        0.0,
        worst.max((map.capacity() - 1.0).abs()),
        1e-8,
    ));

    // Doubling the quadrature grid leaves the delay fixed.
    let coarse = delay_report(&sch, &spol, [0.15, 0.15], &BvpConfig { grid: 512, ..bvp })?;
    let fine = delay_report(&sch, &spol, [0.15, 0.15], &BvpConfig { grid: 1024, ..bvp })?;
    let (dc, df) = (
        coarse.mean_delay[0].unwrap_or(f64::NAN),
        fine.mean_delay[0].unwrap_or(f64::NAN),
    );
    checks.push(exact_check(
        "quadrature_doubling_leaves_delay_fixed",
        "relative delay change from a 512-node to a 1024-node grid",
        0.0,
        (df - dc).abs() / df.abs(),
        1e-5,
    ));

    // Optimizer against a brute-force grid argmin.
    let (alpha_star, p, b, lam) = (0.9, 0.85, 0.25, 0.1);
    let opt = optimal_alpha(alpha_star, p, 1.0, b, lam)?;
    let mut best = (f64::INFINITY, f64::NAN);
    let mut alpha = 1e-4;
    while alpha <= alpha_star + 1e-12 {
        let sys = SymmetricSystem {
            alpha,
            alpha_star,
            p,
            p_tilde: 1.0,
            b,
            c: 0.0,
        };
        if let Ok(d) = sys.delay_capture(lam) {
            if d < best.0 {
                best = (d, alpha);
            }
        }
        alpha += 1e-4;
    }
    checks.push(exact_check(
        "optimal_alpha_matches_grid_argmin",
        "closed-form optimal transmit probability vs a 1e-4 grid search",
        best.1,
        opt.alpha_tilde,
        1.5e-4,
    ));

    // Winding indices: zero at a stable point, negative at a saturated one.
    let w_in = winding_indices(&sch, &spol, [0.1, 0.1])?;
    checks.push(exact_check(
        "winding_vanishes_at_stable_rates",
        "boundary winding indices inside the region",
        0.0,
        w_in[0].abs().max(w_in[1].abs()) as f64,
        0.0,
    ));
    let w_out = winding_indices(&sch, &spol, [0.32, 0.32])?;
    checks.push(exact_check(
        "winding_flags_saturated_rates",
        "boundary winding index at a rate pair beyond both service caps",
        -1.0,
        w_out[0].min(w_out[1]) as f64,
        0.0,
    ));
    Ok(())
}

fn simulation_checks(
    checks: &mut Vec<Check>,
    slots: u64,
    drift_slots: u64,
    seed: u64,
) -> Result<(), CliError> {
    let bvp = BvpConfig::default();

    // Closed-form symmetric delay against simulation.
    let (sch, spol, sym) = symmetric_capture();
    let exact = sym.delay_capture(0.1)?;
    let stats = sim_run(&sim_two(&sch, &spol, [0.1, 0.1], slots, seed + 1))?;
    let measured = stats.mean_delay[0].unwrap_or(f64::NAN);
    let hw = stats.mean_delay_half_width[0].unwrap_or(f64::INFINITY);
    checks.push(ci_check(
        "capture_delay_matches_simulation",
        "closed-form symmetric delay vs simulated sojourn time at lambda = 0.1",
        exact,
        measured,
        0.02 * exact,
        hw,
    ));

    // Delay bounds bracket the simulated delay under simultaneous successes.
    let (mch, mpol, msym) = symmetric_mpr();
    let (lo, hi) = msym.delay_bounds(0.1)?;
    let stats = sim_run(&sim_two(&mch, &mpol, [0.1, 0.1], slots, seed + 2))?;
    let measured = stats.mean_delay[0].unwrap_or(f64::NAN);
    let hw = stats.mean_delay_half_width[0].unwrap_or(f64::INFINITY);
    let violation = (lo - measured).max(measured - hi).max(0.0);
    let width_check = Check {
        name: "delay_bounds_contain_simulation".to_string(),
        detail: "simulated delay inside the closed-form lower/upper bounds".to_string(),
        expected: 0.5 * (lo + hi),
        measured,
        tolerance: 0.5 * (hi - lo),
        half_width: Some(hw),
        status: if violation > 4.0 * hw {
            Status::Fail
        } else if violation == 0.0 {
            Status::Pass
        } else {
            Status::Inconclusive
        },
    };
    checks.push(width_check);

    // Drift verdicts straddle the exact boundary.
    let (ach, apol) = asymmetric_capture();
    let reg = stability::two_user_region(&ach, &apol)?;
    let edge = boundary_lambda1(&reg, 0.25);
    let mut verdicts = Vec::new();
    for (offset, want) in [(-0.03, Verdict::Stable), (0.03, Verdict::Unstable)] {
        let mut cfg = sim_two(&ach, &apol, [edge + offset, 0.25], drift_slots, seed + 3);
        cfg.warmup = 0;
        cfg.track_delays = false;
        verdicts.push((drift_test(&cfg, 20)?, want));
    }
    let wrong = verdicts
        .iter()
        .filter(|(got, want)| *got != *want && *got != Verdict::Marginal)
        .count();
    let undecided = verdicts
        .iter()
        .filter(|(got, _)| *got == Verdict::Marginal)
        .count();
    checks.push(Check {
        name: "drift_verdicts_straddle_boundary".to_string(),
        detail: "queue-drift stability verdicts 0.03 inside/outside the exact boundary"
            .to_string(),
        expected: 0.0,
        measured: wrong as f64,
        tolerance: 0.0,
        half_width: None,
        status: if wrong > 0 {
            Status::Fail
        } else if undecided > 0 {
            Status::Inconclusive
        } else {
            Status::Pass
        },
    });

    // Solver occupancy against simulation on an asymmetric system.
    let lambda = [0.2, 0.25];
    let rep = delay_report(&ach, &apol, lambda, &bvp)?;
    let stats = sim_run(&sim_two(&ach, &apol, lambda, slots, seed + 4))?;
    let sim_h00 = stats.occupancy[0b00];
    let sim_h10 = stats.occupancy[0b00] + stats.occupancy[0b01];
    let sim_h01 = stats.occupancy[0b00] + stats.occupancy[0b10];
    let hw = stats
        .occupancy_half_width
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    let dev = (rep.h00 - sim_h00)
        .abs()
        .max((rep.h10 - sim_h10).abs())
        .max((rep.h01 - sim_h01).abs());
    checks.push(ci_check(
        "solver_occupancy_matches_simulation",
        "empty-queue probabilities from the solver vs simulated occupancy",
        0.0,
        dev,
        0.008,
        2.0 * hw,
    ));

    // Three-user pair corner against a saturated-user simulation.
    let (ch3, pol3) = three_user_system();
    let lambda3 = [0.1, 0.12, 0.15];
    let corners = qaloha::bvp::solve_modified_f1(&ch3, &pol3, 0, lambda3, &bvp)?;
    let mut cfg = SimConfig::new(
        SimSystem::Three {
            channel: ch3,
            policy: pol3,
            lambda: lambda3,
        },
        slots,
        slots / 10,
        seed + 5,
    );
    cfg.mode = Mode::Dominant(0);
    cfg.track_delays = false;
    let stats = sim_run(&cfg)?;
    let sim_f00 = stats.occupancy[0b000] + stats.occupancy[0b001];
    let hw = stats
        .occupancy_half_width
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    checks.push(ci_check(
        "three_user_corner_matches_dominant_simulation",
        "pair-corner transform value vs occupancy under a saturated user",
        corners.0,
        sim_f00,
        0.008,
        2.0 * hw,
    ));
    Ok(())
}

fn user_system_checks(
    checks: &mut Vec<Check>,
    cfg: &ValidateConfig,
    path: &std::path::Path,
    slots: u64,
    drift_slots: u64,
    seed: u64,
) -> Result<(), CliError> {
    let Some(spec) = &cfg.system else {
        return Ok(());
    };
    let ch = spec.channel.build(path)?;
    let pol = spec.policy;
    let lambda = spec.lambda;
    let bvp = BvpConfig::default();
    let reg = in_config(path, stability::two_user_region(&ch, &pol))?;
    let membership = reg.membership(lambda, 1e-9);

    // Stability verdict from simulation vs the analytic region.
    let mut drift_cfg = sim_two(&ch, &pol, lambda, drift_slots, seed + 6);
    drift_cfg.warmup = 0;
    drift_cfg.track_delays = false;
    let verdict = in_config(path, drift_test(&drift_cfg, 20))?;
    let agrees = matches!(
        (membership, verdict),
        (Membership::Interior, Verdict::Stable) | (Membership::Exterior, Verdict::Unstable)
    );
    checks.push(Check {
        name: "user_system_drift_matches_region".to_string(),
        detail: format!(
            "membership {membership:?} vs drift verdict {verdict:?} at lambda = {lambda:?}"
        ),
        expected: 1.0,
        measured: if agrees { 1.0 } else { 0.0 },
        tolerance: 0.0,
        half_width: None,
        status: if agrees {
            Status::Pass
        } else if membership == Membership::Marginal || verdict == Verdict::Marginal {
            Status::Inconclusive
        } else {
            Status::Fail
        },
    });

    if membership != Membership::Interior {
        return Ok(());
    }
    // The solver's occupancy prediction vs simulation, when solvable.
    match delay_report(&ch, &pol, lambda, &bvp) {
        Ok(rep) => {
            let stats = in_config(path, sim_run(&sim_two(&ch, &pol, lambda, slots, seed + 7)))?;
            let sim_h00 = stats.occupancy[0b00];
            let hw = stats.occupancy_half_width[0b00];
            checks.push(ci_check(
                "user_system_occupancy_matches_solver",
                "P(both queues empty): solver vs simulation on the supplied system",
                rep.h00,
                sim_h00,
                0.008,
                2.0 * hw,
            ));
        }
        Err(qaloha::Error::Domain(msg)) => checks.push(Check {
            name: "user_system_occupancy_matches_solver".to_string(),
            detail: format!("solver not applicable at this rate pair: {msg}"),
            expected: f64::NAN,
            measured: f64::NAN,
            tolerance: f64::NAN,
            half_width: None,
            status: Status::Inconclusive,
        }),
        Err(e) => return Err(in_config::<()>(path, Err(e)).unwrap_err()),
    }
    Ok(())
}

/// Run the suite; returns the process exit code (0 iff nothing failed).
pub fn run_suite(ctx: &Ctx, slots_flag: Option<u64>) -> Result<i32, CliError> {
    let (cfg, bytes, path) = match ctx.config {
        Some(p) => {
            let loaded = load::<ValidateConfig>(Some(p), "validate")?;
            (loaded.value, loaded.bytes, Some(loaded.path))
        }
        None => (ValidateConfig::default(), Vec::new(), None),
    };
    let slots = slots_flag.unwrap_or(cfg.slots).max(10_000);
    let drift_slots = if slots_flag.is_some() {
        slots
    } else {
        cfg.drift_slots.max(10_000)
    };
    let seed = ctx.seed.or(cfg.seed).unwrap_or(12020);

    let mut checks = Vec::new();
    analytic_checks(&mut checks)?;
    simulation_checks(&mut checks, slots, drift_slots, seed)?;
    if let Some(p) = &path {
        user_system_checks(&mut checks, &cfg, p, slots, drift_slots, seed)?;
    }

    let count = |s: Status| checks.iter().filter(|c| c.status == s).count();
    let (pass, fail, inconclusive) = (
        count(Status::Pass),
        count(Status::Fail),
        count(Status::Inconclusive),
    );

    let prov = Provenance::new(
        &bytes,
        &format!("validate slots={slots} drift_slots={drift_slots}"),
        seed,
    );
    let payload = json!({
        "slots": slots,
        "drift_slots": drift_slots,
        "checks": serde_json::to_value(&checks)?,
        "summary": { "pass": pass, "fail": fail, "inconclusive": inconclusive },
        "passed": fail == 0,
    });
    let doc = render_json(&prov, payload)?;
    emit(ctx.output, &doc)?;
    Ok(if fail == 0 { 0 } else { 1 })
}

/// Entry point used by the dispatcher.
pub fn run(ctx: &Ctx, slots: Option<u64>) -> Result<i32, CliError> {
    run_suite(ctx, slots)
}
