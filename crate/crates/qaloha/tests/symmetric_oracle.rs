//! Simulator-backed validation of the symmetric closed forms: the exact
//! capture-class delay, the multi-packet-reception delay bounds, and the
//! delay-optimal transmit probability (against a brute-force grid search).

use qaloha::channel::Preset;
use qaloha::policy::Policy2;
use qaloha::sim::{run, SimConfig, SimSystem};
use qaloha::symmetric::{optimal_alpha, OptimalBranch, SymmetricSystem};

fn sim_mean_delay(sys: &SymmetricSystem, lambda: f64, slots: u64, seed: u64) -> (f64, f64) {
    let channel = Preset::Mpr {
        b: sys.b,
        c: sys.c,
    }
    .build(sys.p, sys.p_tilde)
    .unwrap();
    let policy = Policy2::symmetric(sys.alpha, sys.alpha_star);
    let cfg = SimConfig::new(
        SimSystem::Two {
            channel,
            policy,
            lambda: [lambda, lambda],
        },
        slots,
        slots / 10,
        seed,
    );
    let stats = run(&cfg).unwrap();
    // Symmetric users: pool both users' delay estimates.
    let d = (stats.mean_delay[0].unwrap() + stats.mean_delay[1].unwrap()) / 2.0;
    let hw = (stats.mean_delay_half_width[0].unwrap() + stats.mean_delay_half_width[1].unwrap())
        / 2.0;
    (d, hw)
}

#[test]
fn capture_delay_matches_simulation() {
    // Collision (b = 0) and capture (b = 0.2) variants at a moderately high
    // load; the closed form must agree with a long simulation within 2%.
    for (b, seed) in [(0.0, 101u64), (0.2, 102u64)] {
        let sys = SymmetricSystem {
            alpha: 0.6,
            alpha_star: 1.0,
            p: 0.9,
            p_tilde: 1.0,
            b,
            c: 0.0,
        };
        let exact = sys.delay_capture(0.2).unwrap();
        let (simulated, hw) = sim_mean_delay(&sys, 0.2, 6_000_000, seed);
        let rel = (exact - simulated).abs() / exact;
        assert!(
            rel < 0.02,
            "b={b}: exact {exact:.4} vs simulated {simulated:.4} ± {hw:.4} (rel {rel:.4})"
        );
    }
}

#[test]
fn capture_delay_low_load_matches_simulation() {
    // At very light load the delay approaches the adapted lone service time
    // 1/(α* p̃) = 1; the closed form and the simulator must both show it.
    let sys = SymmetricSystem {
        alpha: 0.6,
        alpha_star: 1.0,
        p: 0.9,
        p_tilde: 1.0,
        b: 0.2,
        c: 0.0,
    };
    let exact = sys.delay_capture(0.01).unwrap();
    assert!((exact - 1.0).abs() < 0.05, "exact {exact}");
    let (simulated, _) = sim_mean_delay(&sys, 0.01, 2_000_000, 103);
    let rel = (exact - simulated).abs() / exact;
    assert!(rel < 0.02, "exact {exact:.4} vs simulated {simulated:.4}");
}

#[test]
fn mpr_bounds_contain_simulation() {
    let sys = SymmetricSystem {
        alpha: 0.6,
        alpha_star: 1.0,
        p: 0.9,
        p_tilde: 1.0,
        b: 0.2,
        c: 0.3,
    };
    for (i, &lambda) in [0.05, 0.1, 0.15, 0.2].iter().enumerate() {
        let (lo, up) = sys.delay_bounds(lambda).unwrap();
        let (simulated, hw) = sim_mean_delay(&sys, lambda, 4_000_000, 200 + i as u64);
        assert!(
            simulated + hw >= lo && simulated - hw <= up,
            "lambda={lambda}: simulated {simulated:.4} ± {hw:.4} outside [{lo:.4}, {up:.4}]"
        );
    }
}

#[test]
fn grid_search_confirms_optimal_alpha() {
    // Brute-force the delay over a fine alpha grid and compare the argmin
    // with the closed-form optimum.
    let (alpha_star, p, p_tilde, b, lambda) = (1.0, 0.9, 1.0, 0.2, 0.2);
    let opt = optimal_alpha(alpha_star, p, p_tilde, b, lambda).unwrap();
    assert_eq!(opt.branch, OptimalBranch::Interior);
    assert!((opt.alpha_tilde - 0.642_857_142_857).abs() < 1e-9);

    let mut best_alpha = f64::NAN;
    let mut best_delay = f64::INFINITY;
    let steps = 10_000usize;
    for i in 1..=steps {
        let alpha = i as f64 / steps as f64;
        let sys = SymmetricSystem {
            alpha,
            alpha_star,
            p,
            p_tilde,
            b,
            c: 0.0,
        };
        if let Ok(d) = sys.delay_capture(lambda) {
            if d < best_delay {
                best_delay = d;
                best_alpha = alpha;
            }
        }
    }
    assert!(
        (best_alpha - opt.alpha_tilde).abs() <= 1e-4 + 1e-12,
        "grid argmin {best_alpha} vs closed form {}",
        opt.alpha_tilde
    );
    assert!((best_delay - opt.delay).abs() / opt.delay < 1e-6);
}

#[test]
fn cap_branch_grid_search() {
    // With strong capture (b >= p/2) the cap alpha = alpha_star binds.
    let (alpha_star, p, p_tilde, b, lambda) = (1.0, 0.9, 1.0, 0.5, 0.1);
    let opt = optimal_alpha(alpha_star, p, p_tilde, b, lambda).unwrap();
    assert_eq!(opt.branch, OptimalBranch::AtAlphaStar);
    let steps = 5_000usize;
    let mut best_alpha = f64::NAN;
    let mut best_delay = f64::INFINITY;
    for i in 1..=steps {
        let alpha = i as f64 / steps as f64;
        let sys = SymmetricSystem {
            alpha,
            alpha_star,
            p,
            p_tilde,
            b,
            c: 0.0,
        };
        if let Ok(d) = sys.delay_capture(lambda) {
            if d < best_delay {
                best_delay = d;
                best_alpha = alpha;
            }
        }
    }
    assert!((best_alpha - 1.0).abs() <= 1e-4 + 1e-12, "argmin {best_alpha}");
}
