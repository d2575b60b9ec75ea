//! Implementations of the analytic and simulation subcommands.

use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::json;

use qaloha::bvp::{delay_report, DelayReport, Regime};
use qaloha::kernel::{branch_points, contour_m, KernelCoeffs};
use qaloha::sim;
use qaloha::stability::{self, ClosureOptions, Membership};
use qaloha::symmetric::{optimal_alpha, OptimalBranch, SymmetricSystem};

use crate::config::{
    self, in_config, load, ClosureConfig, ConformalConfig, DelayBvpConfig, DelaySymmetricConfig,
    KernelConfig, OptimizeConfig, Region3Config, RegionConfig,
};
use crate::output::{emit, flag, num, render_csv, render_json, Provenance};
use crate::{CliError, Ctx};

/// Membership grid of the exact two-user region.
pub fn region(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = load::<RegionConfig>(ctx.config, "region")?;
    let cfg = &loaded.value;
    let ch = cfg.channel.build(&loaded.path)?;
    let reg = in_config(&loaded.path, stability::two_user_region(&ch, &cfg.policy))?;

    let mut rows = Vec::new();
    for lam in cfg.grid.points() {
        let mut label = String::new();
        for (i, sub) in reg.subregions.iter().enumerate() {
            if sub.membership(lam, cfg.eps) != Membership::Exterior {
                label.push(char::from(b'1' + i as u8));
            }
        }
        if label.is_empty() {
            label.push_str("none");
        }
        let stable = reg.membership(lam, cfg.eps) != Membership::Exterior;
        rows.push(vec![num(lam[0]), num(lam[1]), label, flag(stable)]);
    }

    let prov = Provenance::new(&loaded.bytes, "region", ctx.seed_or(0));
    let doc = render_csv(&prov, &["lambda1", "lambda2", "subregion", "stable"], &rows)?;
    emit(ctx.output, &doc)
}

/// Membership grid of the three-user region via each saturated user.
pub fn region3(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = load::<Region3Config>(ctx.config, "region3")?;
    let cfg = &loaded.value;
    let ch3 = cfg.channel.build(&loaded.path)?;
    let bvp = cfg.solver.to_bvp();

    let points = cfg.grid.points();
    let results: Vec<qaloha::Result<stability::Region3Point>> = points
        .par_iter()
        .map(|&lam| stability::three_user_membership(&ch3, &cfg.policy, lam, &bvp, cfg.eps))
        .collect();

    let mut rows = Vec::with_capacity(points.len());
    for (lam, res) in points.iter().zip(results) {
        let point = in_config(&loaded.path, res)?;
        let mut label = String::new();
        for check in &point.detail {
            if check.interior {
                label.push(char::from(b'1' + check.dominant as u8));
            }
        }
        if label.is_empty() {
            label.push_str("none");
        }
        let stable = point.membership != Membership::Exterior;
        rows.push(vec![
            num(lam[0]),
            num(lam[1]),
            num(lam[2]),
            label,
            flag(stable),
        ]);
    }

    let prov = Provenance::new(&loaded.bytes, "region3", ctx.seed_or(0));
    let doc = render_csv(
        &prov,
        &["lambda1", "lambda2", "lambda3", "subregion", "stable"],
        &rows,
    )?;
    emit(ctx.output, &doc)
}

/// Boundary envelope of the region closed over the policy grid.
pub fn closure(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = load::<ClosureConfig>(ctx.config, "closure")?;
    let cfg = &loaded.value;
    let ch = cfg.channel.build(&loaded.path)?;

    let mut rows = Vec::new();
    for &variant in &cfg.variants {
        let opts = ClosureOptions {
            alpha_steps: cfg.sweep.alpha_steps,
            alpha_star_steps: cfg.sweep.alpha_star_steps,
            adaptive: variant == config::ClosureVariant::Adaptive,
            rays: cfg.sweep.rays,
        };
        let envelope = in_config(&loaded.path, stability::closure(&ch, &opts))?;
        for point in envelope {
            rows.push(vec![
                num(point.lambda[0]),
                num(point.lambda[1]),
                variant.label().to_string(),
                flag(true),
            ]);
        }
    }

    let prov = Provenance::new(&loaded.bytes, "closure", ctx.seed_or(0));
    let doc = render_csv(&prov, &["lambda1", "lambda2", "subregion", "stable"], &rows)?;
    emit(ctx.output, &doc)
}

/// Branch points and analytic contours of the transform kernel.
pub fn kernel(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = load::<KernelConfig>(ctx.config, "kernel")?;
    let cfg = &loaded.value;
    let ch = cfg.channel.build(&loaded.path)?;
    let kc = in_config(
        &loaded.path,
        KernelCoeffs::from_system(&ch, &cfg.policy, cfg.lambda),
    )?;
    let bp = in_config(&loaded.path, branch_points(&kc))?;

    let mut rows = Vec::new();
    for (kind, values) in [("branch_x", &bp.x), ("branch_y", &bp.y)] {
        for (i, v) in values.iter().enumerate() {
            rows.push(vec![kind.to_string(), i.to_string(), num(*v), num(0.0)]);
        }
    }
    for (kind, coeffs) in [("contour_m", kc.clone()), ("contour_l", kc.swapped())] {
        let geometry = in_config(&loaded.path, contour_m(&coeffs))?;
        let contour = in_config(&loaded.path, geometry.samples(cfg.samples))?;
        for (j, (&phi, &rho)) in contour.phi.iter().zip(&contour.rho).enumerate() {
            let p = Complex64::from_polar(rho, phi);
            rows.push(vec![kind.to_string(), j.to_string(), num(p.re), num(p.im)]);
        }
    }

    let prov = Provenance::new(&loaded.bytes, "kernel", ctx.seed_or(0));
    let doc = render_csv(&prov, &["kind", "index", "re", "im"], &rows)?;
    emit(ctx.output, &doc)
}

/// Boundary-correspondence table and per-node residuals of the disk map.
pub fn conformal_diag(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = load::<ConformalConfig>(ctx.config, "conformal-diag")?;
    let cfg = &loaded.value;
    let ch = cfg.channel.build(&loaded.path)?;
    let kc = in_config(
        &loaded.path,
        KernelCoeffs::from_system(&ch, &cfg.policy, cfg.lambda),
    )?;
    let geometry = in_config(&loaded.path, contour_m(&kc))?;
    let map = in_config(
        &loaded.path,
        qaloha::conformal::map_contour(&geometry, cfg.solver.grid, cfg.solver.map_tol),
    )?;

    let mut rows = Vec::with_capacity(map.grid_len());
    for (j, &psi) in map.psi().iter().enumerate() {
        let phi = map.grid_angle(j);
        let radius = in_config(&loaded.path, geometry.rho(psi))?;
        // Truncation/consistency defect: the series evaluation of the map on
        // the unit circle against the converged correspondence table.
        let series_image = in_config(
            &loaded.path,
            map.gamma0(Complex64::from_polar(1.0, phi)),
        )?;
        let table_image = Complex64::from_polar(radius, psi);
        let residual = (series_image - table_image).norm();
        rows.push(vec![
            j.to_string(),
            num(phi),
            num(psi),
            num(radius),
            num(residual),
        ]);
    }

    let prov = Provenance::new(&loaded.bytes, "conformal-diag", ctx.seed_or(0))
        .with_extra("capacity", num(map.capacity()))
        .with_extra("iterations", map.iterations().to_string())
        .with_extra("fp_residual", num(map.residual()));
    let doc = render_csv(&prov, &["j", "phi", "psi", "radius", "residual"], &rows)?;
    emit(ctx.output, &doc)
}

fn regime_label(regime: Regime) -> &'static str {
    match regime {
        Regime::Balanced => "balanced",
        Regime::Unbalanced => "unbalanced",
    }
}

fn delay_cell(d: Option<f64>) -> String {
    match d {
        Some(v) => num(v),
        None => num(f64::NAN),
    }
}

fn sweep_row(lam: [f64; 2], outcome: &PointOutcome) -> Vec<String> {
    match outcome {
        PointOutcome::Solved(rep) => vec![
            num(lam[0]),
            num(lam[1]),
            num(rep.mean_queue[0]),
            num(rep.mean_queue[1]),
            delay_cell(rep.mean_delay[0]),
            delay_cell(rep.mean_delay[1]),
            regime_label(rep.regime).to_string(),
            format!("{};{}", rep.chi[0], rep.chi[1]),
            format!("{};{}", rep.pole_orders[0], rep.pole_orders[1]),
        ],
        PointOutcome::Unstable => vec![
            num(lam[0]),
            num(lam[1]),
            num(f64::INFINITY),
            num(f64::INFINITY),
            num(f64::INFINITY),
            num(f64::INFINITY),
            "unstable".to_string(),
            String::new(),
            String::new(),
        ],
        PointOutcome::Unsolved => vec![
            num(lam[0]),
            num(lam[1]),
            num(f64::NAN),
            num(f64::NAN),
            num(f64::NAN),
            num(f64::NAN),
            "unsolved".to_string(),
            String::new(),
            String::new(),
        ],
    }
}

enum PointOutcome {
    Solved(Box<DelayReport>),
    /// Outside the stability region: queues and delays diverge.
    Unstable,
    /// Stable but outside the solver's domain (a rate at or beyond the
    /// matching busy-service cap).
    Unsolved,
}

/// Queue/delay figures from the boundary-value solver: one JSON report or a
/// CSV sweep.
pub fn delay_bvp(
    ctx: &Ctx,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    sweep: bool,
) -> Result<(), CliError> {
    let loaded = load::<DelayBvpConfig>(ctx.config, "delay-bvp")?;
    let cfg = &loaded.value;
    let ch = cfg.channel.build(&loaded.path)?;
    let bvp = cfg.solver.to_bvp();
    let reg = in_config(&loaded.path, stability::two_user_region(&ch, &cfg.policy))?;

    if sweep {
        let grid = cfg.sweep.ok_or_else(|| {
            CliError::Usage("`delay-bvp --sweep` needs a `sweep` grid in the config".into())
        })?;
        let points = grid.points();
        let outcomes: Vec<qaloha::Result<PointOutcome>> = points
            .par_iter()
            .map(|&lam| {
                if reg.membership(lam, cfg.eps) == Membership::Exterior {
                    return Ok(PointOutcome::Unstable);
                }
                match delay_report(&ch, &cfg.policy, lam, &bvp) {
                    Ok(rep) => Ok(PointOutcome::Solved(Box::new(rep))),
                    Err(qaloha::Error::Domain(_)) => Ok(PointOutcome::Unsolved),
                    Err(e) => Err(e),
                }
            })
            .collect();

        let mut rows = Vec::with_capacity(points.len());
        for (lam, res) in points.iter().zip(outcomes) {
            rows.push(sweep_row(*lam, &in_config(&loaded.path, res)?));
        }

        let prov = Provenance::new(&loaded.bytes, "delay-bvp --sweep", ctx.seed_or(0));
        let doc = render_csv(
            &prov,
            &[
                "lambda1", "lambda2", "M1", "M2", "D1", "D2", "regime", "chi", "r",
            ],
            &rows,
        )?;
        return emit(ctx.output, &doc);
    }

    let (l1, l2) = match (lambda1, lambda2) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(CliError::Usage(
                "`delay-bvp` needs both --lambda1 and --lambda2, or --sweep".into(),
            ))
        }
    };
    let lam = [l1, l2];
    let stable = reg.membership(lam, cfg.eps) != Membership::Exterior;
    let payload = if !stable {
        json!({
            "lambda": lam,
            "stable": false,
            "solved": false,
            "detail": "the rate pair lies outside the stability region; queues diverge",
        })
    } else {
        match delay_report(&ch, &cfg.policy, lam, &bvp) {
            Ok(rep) => json!({
                "lambda": lam,
                "stable": true,
                "solved": true,
                "report": serde_json::to_value(&rep)?,
            }),
            Err(qaloha::Error::Domain(msg)) => json!({
                "lambda": lam,
                "stable": true,
                "solved": false,
                "detail": msg,
            }),
            Err(e) => return Err(in_config::<()>(&loaded.path, Err(e)).unwrap_err()),
        }
    };

    let prov = Provenance::new(
        &loaded.bytes,
        &format!("delay-bvp --lambda1 {l1} --lambda2 {l2}"),
        ctx.seed_or(0),
    );
    let doc = render_json(&prov, payload)?;
    emit(ctx.output, &doc)
}

/// Closed-form symmetric delay sweeps: exact in the capture subclass,
/// lower/upper bounds otherwise.
pub fn delay_symmetric(
    ctx: &Ctx,
    sweep_lambda: Option<&str>,
    sweep_alpha_star: Option<&str>,
) -> Result<(), CliError> {
    let loaded = load::<DelaySymmetricConfig>(ctx.config, "delay-symmetric")?;
    let cfg = &loaded.value;

    let bounds_cells = |sys: &SymmetricSystem, lambda: f64| -> Result<(String, String), CliError> {
        let outcome = if sys.c == 0.0 {
            sys.delay_capture(lambda).map(|d| (d, d))
        } else {
            sys.delay_bounds(lambda)
        };
        match outcome {
            Ok((lo, hi)) => Ok((num(lo), num(hi))),
            Err(qaloha::Error::Domain(_)) => Ok((num(f64::INFINITY), num(f64::INFINITY))),
            Err(e) => Err(in_config::<()>(&loaded.path, Err(e)).unwrap_err()),
        }
    };

    let (rows, header, args) = if let Some(range) = sweep_lambda {
        let lambdas = config::parse_range(range)?;
        let mut rows = Vec::new();
        for &lambda in &lambdas {
            for curve in &cfg.channels {
                let sys = SymmetricSystem {
                    alpha: cfg.alpha,
                    alpha_star: cfg.alpha_star,
                    p: cfg.p,
                    p_tilde: cfg.p_tilde,
                    b: curve.b,
                    c: curve.c,
                };
                let (lo, hi) = bounds_cells(&sys, lambda)?;
                rows.push(vec![num(lambda), lo, hi, curve.label.clone()]);
            }
        }
        (
            rows,
            ["lambda", "D_exact_or_low", "D_up", "channel"],
            format!("delay-symmetric --sweep-lambda {range}"),
        )
    } else if let Some(range) = sweep_alpha_star {
        let lambda = cfg.lambda.ok_or_else(|| {
            CliError::Usage("`--sweep-alpha-star` needs `lambda` in the config".into())
        })?;
        let stars = config::parse_range(range)?;
        let mut rows = Vec::new();
        for &alpha_star in &stars {
            for curve in &cfg.channels {
                let sys = SymmetricSystem {
                    alpha: cfg.alpha,
                    alpha_star,
                    p: cfg.p,
                    p_tilde: cfg.p_tilde,
                    b: curve.b,
                    c: curve.c,
                };
                let (lo, hi) = bounds_cells(&sys, lambda)?;
                rows.push(vec![num(alpha_star), lo, hi, curve.label.clone()]);
            }
        }
        (
            rows,
            ["alpha_star", "D_exact_or_low", "D_up", "channel"],
            format!("delay-symmetric --sweep-alpha-star {range}"),
        )
    } else {
        return Err(CliError::Usage(
            "`delay-symmetric` needs --sweep-lambda or --sweep-alpha-star".into(),
        ));
    };

    let prov = Provenance::new(&loaded.bytes, &args, ctx.seed_or(0));
    let doc = render_csv(
        &prov,
        &[header[0], header[1], header[2], header[3]],
        &rows,
    )?;
    emit(ctx.output, &doc)
}

fn branch_label(branch: OptimalBranch) -> &'static str {
    match branch {
        OptimalBranch::AtAlphaStar => "at_alpha_star",
        OptimalBranch::Interior => "interior",
    }
}

/// Delay-optimal busy transmit probability for symmetric users.
pub fn optimize_alpha(ctx: &Ctx) -> Result<(), CliError> {
    let loaded = load::<OptimizeConfig>(ctx.config, "optimize-alpha")?;
    let cfg = &loaded.value;

    // The optimizer itself validates the parameters; evaluating it at rate
    // zero always succeeds for valid ones, yielding the rate-maximizing
    // probability even when the requested rate cannot be stabilized.
    let base = in_config(
        &loaded.path,
        optimal_alpha(cfg.alpha_star, cfg.p, cfg.p_tilde, cfg.b, 0.0),
    )?;
    let payload = match optimal_alpha(cfg.alpha_star, cfg.p, cfg.p_tilde, cfg.b, cfg.lambda) {
        Ok(opt) => json!({
            "alpha_tilde": opt.alpha_tilde,
            "branch": branch_label(opt.branch),
            "feasible": true,
            "service_both": opt.service_both,
            "delay": opt.delay,
            "lambda": cfg.lambda,
        }),
        Err(qaloha::Error::Domain(_)) => json!({
            "alpha_tilde": base.alpha_tilde,
            "branch": branch_label(base.branch),
            "feasible": false,
            "service_both": base.service_both,
            "delay": null,
            "lambda": cfg.lambda,
        }),
        Err(e) => return Err(in_config::<()>(&loaded.path, Err(e)).unwrap_err()),
    };

    let prov = Provenance::new(&loaded.bytes, "optimize-alpha", ctx.seed_or(0));
    let doc = render_json(&prov, payload)?;
    emit(ctx.output, &doc)
}

/// Monte-Carlo simulation with optional overrides and histogram export.
pub fn simulate(
    ctx: &Ctx,
    slots: Option<u64>,
    mode: Option<&str>,
    histogram: Option<&std::path::Path>,
) -> Result<(), CliError> {
    let loaded = load::<sim::SimConfig>(ctx.config, "simulate")?;
    let mut cfg = loaded.value;
    if let Some(s) = slots {
        cfg.slots = s;
    }
    if let Some(seed) = ctx.seed {
        cfg.seed = seed;
    }
    if let Some(m) = mode {
        cfg.mode = config::parse_mode(m)?;
    }
    if histogram.is_some() && cfg.histogram_bin_width == 0 {
        cfg.histogram_bin_width = 1;
    }

    // Hash the effective configuration so any override changes the hash.
    let effective = serde_json::to_string(&cfg)?;
    let prov = Provenance::new(
        &loaded.bytes,
        &format!("simulate {effective}"),
        cfg.seed,
    );

    let stats = in_config(&loaded.path, sim::run(&cfg))?;

    if let Some(hist_path) = histogram {
        let hists = stats.delay_histogram.as_ref().ok_or_else(|| {
            CliError::Usage("simulation produced no delay histograms".into())
        })?;
        let mut rows = Vec::new();
        for (user, h) in hists.iter().enumerate() {
            for (i, &count) in h.counts.iter().enumerate() {
                let start = 1 + i as u64 * h.bin_width;
                rows.push(vec![
                    user.to_string(),
                    start.to_string(),
                    (start + h.bin_width).to_string(),
                    count.to_string(),
                ]);
            }
        }
        let doc = render_csv(&prov, &["user", "bin_start", "bin_end", "count"], &rows)?;
        emit(Some(hist_path), &doc)?;
    }

    let payload = json!({ "stats": serde_json::to_value(&stats)? });
    let doc = render_json(&prov, payload)?;
    emit(ctx.output, &doc)
}
