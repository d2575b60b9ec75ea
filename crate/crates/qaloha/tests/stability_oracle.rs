//! Cross-validation of the exact two-user stability region against the
//! discrete-time simulator's drift verdicts.

use qaloha::channel::{Channel2, Preset};
use qaloha::policy::Policy2;
use qaloha::sim::{drift_test, SimConfig, SimSystem, Verdict};
use qaloha::stability::{two_user_region, Membership};

fn verdict(ch: &Channel2, pol: &Policy2, lambda: [f64; 2], slots: u64, seed: u64) -> Verdict {
    let system = SimSystem::Two {
        channel: ch.clone(),
        policy: *pol,
        lambda,
    };
    let cfg = SimConfig::new(system, slots, 0, seed);
    drift_test(&cfg, 20).unwrap()
}

/// A 3x3 grid of rate pairs straddling the corner where the two subregion
/// boundaries meet must sort into stable/unstable exactly as the exact
/// region predicts; points on the boundary itself are marginal and exempt.
#[test]
fn membership_grid_matches_drift_verdicts_near_the_corner() {
    let ch = Preset::Collision.build(1.0, 1.0).unwrap();
    let pol = Policy2 {
        alpha: [0.5, 0.5],
        alpha_star: [1.0, 1.0],
    };
    let region = two_user_region(&ch, &pol).unwrap();
    let corner = region.saturated_corner();
    assert_eq!(corner, [0.25, 0.25]);

    let offsets = [-0.05, 0.0, 0.05];
    let mut case = 0u64;
    for &dx in &offsets {
        for &dy in &offsets {
            case += 1;
            let lambda = [corner[0] + dx, corner[1] + dy];
            let membership = region.membership(lambda, 1e-9);
            if membership == Membership::Marginal {
                continue;
            }
            let v = verdict(&ch, &pol, lambda, 3_000_000, 0xC0FFEE + case);
            match membership {
                Membership::Interior => assert_eq!(
                    v,
                    Verdict::Stable,
                    "lambda {lambda:?} is interior but simulated {v:?}"
                ),
                Membership::Exterior => assert_eq!(
                    v,
                    Verdict::Unstable,
                    "lambda {lambda:?} is exterior but simulated {v:?}"
                ),
                Membership::Marginal => unreachable!(),
            }
        }
    }
}

/// The single-queue axis bound: with the peer silent, the region boundary is
/// the alone-service rate, and the simulator agrees on both sides.
#[test]
fn axis_boundary_matches_single_queue_drift() {
    let ch = Preset::Capture { b: 0.2 }.build(0.9, 1.0).unwrap();
    let pol = Policy2 {
        alpha: [0.6, 0.6],
        alpha_star: [1.0, 1.0],
    };
    let region = two_user_region(&ch, &pol).unwrap();
    let s1 = region.composites.alone_service[0];

    for (offset, expect) in [(-0.06, Verdict::Stable), (0.06, Verdict::Unstable)] {
        let lambda = [s1 + offset, 0.0];
        let membership = region.membership(lambda, 1e-9);
        let v = verdict(&ch, &pol, lambda, 2_000_000, 41);
        assert_eq!(v, expect, "axis point {lambda:?}");
        match expect {
            Verdict::Stable => assert_eq!(membership, Membership::Interior),
            Verdict::Unstable => assert_eq!(membership, Membership::Exterior),
            Verdict::Marginal => unreachable!(),
        }
    }
}
