//! The kernel of the two-queue generating-function equation and its algebraic
//! geometry: the quadratic roots in each variable, the four real branch
//! points of the discriminant, and the closed contours traced by the
//! conjugate root pairs over the branch cuts.
//!
//! All of this applies to channels without simultaneous double successes
//! (at most one packet is delivered per slot when both users transmit);
//! the construction is rejected otherwise.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::Channel2;
use crate::error::{Error, Result};
use crate::policy::Policy2;
use crate::poly::{quadratic_roots_complex, Poly};
use crate::stability::composites2;

/// Coefficients of the kernel `K(x, y) = a(x)·y² + b(x)·y + c(x)`, the
/// bivariate polynomial whose zero set carries the boundary unknowns of the
/// stationary queue distribution.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct KernelCoeffs {
    /// Arrival rate of user 1 (packets/slot), strictly positive.
    pub lambda1: f64,
    /// Arrival rate of user 2 (packets/slot), strictly positive.
    pub lambda2: f64,
    /// Busy service rate of user 1: its transmit probability times the
    /// success factor induced by the peer's busy behaviour.
    pub service1: f64,
    /// Busy service rate of user 2.
    pub service2: f64,
}

/// Roots of the kernel in one variable at a fixed value of the other.
/// `small` is the smaller-modulus branch; `large` is absent where the
/// quadratic degenerates to a linear equation.
#[derive(Debug, Clone, Copy)]
pub struct RootPair {
    pub small: Complex64,
    pub large: Option<Complex64>,
}

impl KernelCoeffs {
    pub fn new(lambda1: f64, lambda2: f64, service1: f64, service2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be strictly positive and finite, got {v}"
                )));
            }
        }
        for (name, v) in [("service1", service1), ("service2", service2)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(KernelCoeffs {
            lambda1,
            lambda2,
            service1,
            service2,
        })
    }

    /// Derive the kernel coefficients from a channel table and policy.
    /// Errors if the channel allows simultaneous double successes, for which
    /// the kernel is no longer quadratic with these coefficients.
    pub fn from_system(ch: &Channel2, pol: &Policy2, lambda: [f64; 2]) -> Result<Self> {
        ch.validate()?;
        pol.validate()?;
        if ch.both_tx_success_both != 0.0 {
            return Err(Error::domain(
                "kernel analysis requires a channel with no simultaneous double \
                 successes (set the both-succeed probability to zero)",
            ));
        }
        let c = composites2(ch, pol);
        KernelCoeffs::new(
            lambda[0],
            lambda[1],
            c.busy_service[0],
            c.busy_service[1],
        )
    }

    /// The same kernel with the roles of the two users exchanged
    /// (`x`-analysis of the swapped kernel is `y`-analysis of this one).
    pub fn swapped(&self) -> Self {
        KernelCoeffs {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            service1: self.service2,
            service2: self.service1,
        }
    }

    /// Sum constant appearing in the middle coefficient:
    /// `lambda1 + lambda2 + lambda1·lambda2 + service1 + service2`.
    fn k_const(&self) -> f64 {
        self.lambda1 + self.lambda2 + self.lambda1 * self.lambda2 + self.service1 + self.service2
    }

    /// Leading coefficient `a(x) = lambda2·x·(lambda1·(x−1) − 1)`.
    pub fn coeff_a(&self, x: Complex64) -> Complex64 {
        self.lambda2 * x * (self.lambda1 * (x - 1.0) - 1.0)
    }

    /// Middle coefficient `b(x) = −lambda1(1+lambda2)x² + k·x − service1`.
    pub fn coeff_b(&self, x: Complex64) -> Complex64 {
        -self.lambda1 * (1.0 + self.lambda2) * x * x + self.k_const() * x - self.service1
    }

    /// Constant coefficient `c(x) = −service2·x`.
    pub fn coeff_c(&self, x: Complex64) -> Complex64 {
        -self.service2 * x
    }

    /// Kernel value `K(x, y)`.
    pub fn kernel(&self, x: Complex64, y: Complex64) -> Complex64 {
        (self.coeff_a(x) * y + self.coeff_b(x)) * y + self.coeff_c(x)
    }

    /// Both roots in `y` of `K(x, ·) = 0`, smaller modulus first.
    pub fn roots_in_y(&self, x: Complex64) -> RootPair {
        let a = self.coeff_a(x);
        let b = self.coeff_b(x);
        let c = self.coeff_c(x);
        // The quadratic degenerates at the two zeros of a(x); the kernel
        // still has the single root of the linear remainder there.
        if a.norm() <= 1e-14 * (b.norm() + c.norm() + 1.0) {
            return RootPair {
                small: -c / b,
                large: None,
            };
        }
        let (r1, r2) = quadratic_roots_complex(a, b, c);
        let (small, large) = if r1.norm() <= r2.norm() {
            (r1, r2)
        } else {
            (r2, r1)
        };
        RootPair {
            small,
            large: Some(large),
        }
    }

    /// Both roots in `x` of `K(·, y) = 0`, smaller modulus first.
    pub fn roots_in_x(&self, y: Complex64) -> RootPair {
        self.swapped().roots_in_y(y)
    }

    /// The smaller-modulus root in `y` (the branch that is analytic inside
    /// the unit disk cut along the real slits).
    pub fn y_small(&self, x: Complex64) -> Complex64 {
        self.roots_in_y(x).small
    }

    /// The smaller-modulus root in `x`.
    pub fn x_small(&self, y: Complex64) -> Complex64 {
        self.roots_in_x(y).small
    }

    /// Relative residual of `K(x, y) = 0`, scaled by the largest term.
    pub fn residual(&self, x: Complex64, y: Complex64) -> f64 {
        let a = self.coeff_a(x);
        let b = self.coeff_b(x);
        let c = self.coeff_c(x);
        let scale = (a.norm() * y.norm() * y.norm())
            .max(b.norm() * y.norm())
            .max(c.norm())
            .max(f64::MIN_POSITIVE);
        ((a * y + b) * y + c).norm() / scale
    }

    /// Discriminant `D(x) = b(x)² − 4·a(x)·c(x)` as a quartic polynomial
    /// (coefficients lowest degree first).
    pub fn discriminant_x_poly(&self) -> Poly {
        let b2 = -self.lambda1 * (1.0 + self.lambda2);
        let b1 = self.k_const();
        let b0 = -self.service1;
        // b(x)² minus 4·a(x)·c(x), expanded by powers of x.
        let quartic = b2 * b2;
        let cubic = 2.0 * b2 * b1 + 4.0 * self.service2 * self.lambda1 * self.lambda2;
        let quadratic =
            b1 * b1 + 2.0 * b2 * b0 - 4.0 * self.service2 * self.lambda2 * (1.0 + self.lambda1);
        let linear = 2.0 * b1 * b0;
        let constant = b0 * b0;
        Poly::new(vec![constant, linear, quadratic, cubic, quartic])
    }

    /// Discriminant of the swapped kernel, a quartic in `y`.
    pub fn discriminant_y_poly(&self) -> Poly {
        self.swapped().discriminant_x_poly()
    }
}

/// The four real branch points of each discriminant, sorted increasingly.
/// The discriminant is negative exactly on `(p[0], p[1]) ∪ (p[2], p[3])`
/// and positive outside the closed slits.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BranchPoints {
    pub x: [f64; 4],
    pub y: [f64; 4],
}

fn four_real_sorted(poly: &Poly, label: &str, upper: f64) -> Result<[f64; 4]> {
    let roots = poly.real_roots();
    if roots.len() != 4 {
        return Err(Error::no_convergence(format!(
            "expected 4 real branch points in {label}, found {} (all roots: {:?})",
            roots.len(),
            poly.roots()
        )));
    }
    let pts = [roots[0], roots[1], roots[2], roots[3]];
    // Ordering required by the underlying random-walk geometry.
    if !(pts[0] > 0.0
        && pts[0] < pts[1]
        && pts[1] <= 1.0 + 1e-9
        && pts[2] >= 1.0 - 1e-9
        && pts[2] < pts[3]
        && pts[3] < upper + 1e-9)
    {
        return Err(Error::inconsistent(format!(
            "branch points of {label} violate the expected ordering \
             0 < p1 < p2 <= 1 <= p3 < p4 < {upper}: {pts:?}"
        )));
    }
    // Sign pattern: negative inside the slits, positive between and outside.
    let d = |x: f64| poly.eval(x);
    let inside1 = d(0.5 * (pts[0] + pts[1]));
    let between = d(0.5 * (pts[1] + pts[2]));
    let inside2 = d(0.5 * (pts[2] + pts[3]));
    let outside = d(0.5 * (pts[3] + upper));
    if !(inside1 < 0.0 && between > 0.0 && inside2 < 0.0 && outside > 0.0) {
        return Err(Error::inconsistent(format!(
            "discriminant sign pattern of {label} is not negative-inside/positive-outside: \
             [{inside1:.3e}, {between:.3e}, {inside2:.3e}, {outside:.3e}]"
        )));
    }
    Ok(pts)
}

/// Locate the branch points of both discriminants and verify their ordering
/// and sign pattern.
pub fn branch_points(k: &KernelCoeffs) -> Result<BranchPoints> {
    let x = four_real_sorted(
        &k.discriminant_x_poly(),
        "the first queue variable",
        (1.0 + k.lambda1) / k.lambda1,
    )?;
    let y = four_real_sorted(
        &k.discriminant_y_poly(),
        "the second queue variable",
        (1.0 + k.lambda2) / k.lambda2,
    )?;
    Ok(BranchPoints { x, y })
}

/// Geometry of one of the closed root contours: the curve traced in the
/// `x`-plane by the conjugate root pair as `y` runs over the first branch
/// slit (or the mirrored statement for the `y`-plane contour).
///
/// The curve obeys the modulus law `|x|² = m(Re x)`; [`ContourGeometry::rho`]
/// recovers the polar radius at any angle by solving `δ = cos(φ)·√(m(δ))`.
#[derive(Debug, Clone, Copy)]
pub struct ContourGeometry {
    /// Kernel oriented so the contour lives in this kernel's `x`-plane.
    kc: KernelCoeffs,
    /// Generating slit `[span[0], span[1]]` in the other variable.
    pub span: [f64; 2],
    /// Rightmost point of the contour (positive real axis crossing).
    pub right: f64,
    /// Leftmost point of the contour (negative real axis crossing).
    pub left: f64,
}

/// Closed-contour polar samples at equally spaced angles.
#[derive(Debug, Clone, Serialize)]
pub struct Contour {
    /// Angles in `[0, 2π)`.
    pub phi: Vec<f64>,
    /// Polar radius at each angle, strictly positive.
    pub rho: Vec<f64>,
    /// Rightmost real-axis crossing.
    pub right: f64,
    /// Leftmost real-axis crossing (negative).
    pub left: f64,
    /// Generating slit in the companion variable.
    pub span: [f64; 2],
}

impl Contour {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// Contour point at sample index `j`.
    pub fn point(&self, j: usize) -> Complex64 {
        Complex64::from_polar(self.rho[j], self.phi[j])
    }
}

/// Contour in the first queue's transform plane: image of the slit between
/// the two inner branch points of the second variable.
pub fn contour_m(k: &KernelCoeffs) -> Result<ContourGeometry> {
    let bp = branch_points(k)?;
    let (y1, y2) = (bp.y[0], bp.y[1]);
    let g = |y: f64| k.service1 / (k.lambda1 * (1.0 + k.lambda2 - k.lambda2 * y));
    let right = g(y2).sqrt();
    let left = -g(y1).sqrt();
    Ok(ContourGeometry {
        kc: *k,
        span: [y1, y2],
        right,
        left,
    })
}

/// Contour in the second queue's transform plane (mirror of [`contour_m`]).
pub fn contour_l(k: &KernelCoeffs) -> Result<ContourGeometry> {
    contour_m(&k.swapped())
}

impl ContourGeometry {
    /// For a real part `δ` on the contour, the matching point of the
    /// generating slit: the smaller root of the real-part inversion
    /// quadratic.
    fn zeta(&self, delta: f64) -> f64 {
        let k = &self.kc;
        let lead = k.lambda2 * (1.0 + k.lambda1 * (1.0 - 2.0 * delta));
        let mid = k.k_const() - 2.0 * k.lambda1 * (1.0 + k.lambda2) * delta;
        let disc = (mid * mid - 4.0 * lead * k.service2).max(0.0);
        (mid - disc.sqrt()) / (2.0 * lead)
    }

    /// Modulus law `m(δ) = |x|²` for contour points with real part `δ`.
    pub fn modulus_sq(&self, delta: f64) -> f64 {
        let k = &self.kc;
        let zeta = self.zeta(delta);
        k.service1 / (k.lambda1 * (1.0 + k.lambda2 - k.lambda2 * zeta))
    }

    /// Polar radius of the contour at angle `phi`: solves
    /// `δ = cos(φ)·√(m(δ))` for the real part, bracketed by the two
    /// real-axis crossings, then returns `√(m(δ))`.
    pub fn rho(&self, phi: f64) -> Result<f64> {
        let cos_phi = phi.cos();
        let f = |delta: f64| delta - cos_phi * self.modulus_sq(delta).sqrt();
        let (mut lo, mut hi) = (self.left, self.right);
        let (flo, fhi) = (f(lo), f(hi));
        // The crossings solve the equation exactly at angles 0 and pi, so
        // rounding may push the end values marginally across zero.
        let slack = 1e-9 * (1.0 + lo.abs().max(hi.abs()));
        if flo > slack || fhi < -slack {
            return Err(Error::no_convergence(format!(
                "contour radius solve lost its bracket at angle {phi}: \
                 f({lo}) = {flo}, f({hi}) = {fhi}"
            )));
        }
        if flo >= 0.0 {
            hi = lo;
        } else if fhi <= 0.0 {
            lo = hi;
        }
        // Bisection to high accuracy; the root is unique on the bracket for
        // a smooth egg-shaped contour.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + hi.abs()) {
                break;
            }
        }
        let delta = 0.5 * (lo + hi);
        let rho = self.modulus_sq(delta).sqrt();
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::no_convergence(format!(
                "contour radius at angle {phi} is not positive: {rho}"
            )));
        }
        Ok(rho)
    }

    /// Contour point at angle `phi`.
    pub fn point(&self, phi: f64) -> Result<Complex64> {
        Ok(Complex64::from_polar(self.rho(phi)?, phi))
    }

    /// Whether `p` lies strictly inside the contour (compares the modulus of
    /// `p` against the contour radius at the same angle).
    pub fn contains(&self, p: Complex64) -> Result<bool> {
        let m = p.norm();
        if m < 1e-12 {
            return Ok(true);
        }
        Ok(m < self.rho(p.arg())? * (1.0 - 1e-9))
    }

    /// Sample the contour at `n` equally spaced angles starting at 0.
    pub fn samples(&self, n: usize) -> Result<Contour> {
        use rayon::prelude::*;
        if n < 8 {
            return Err(Error::invalid(
                "contour sampling needs at least 8 angles",
            ));
        }
        let phi: Vec<f64> = (0..n)
            .map(|j| 2.0 * std::f64::consts::PI * j as f64 / n as f64)
            .collect();
        let rho: Vec<f64> = phi
            .par_iter()
            .map(|&p| self.rho(p))
            .collect::<Result<_>>()?;
        Ok(Contour {
            phi,
            rho,
            right: self.right,
            left: self.left,
            span: self.span,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Symmetric capture system used across the kernel tests:
    /// per-user rate 0.2, transmit probability 0.6, adapted probability 1,
    /// alone success 0.9, interference success 0 (pure capture off).
    fn reference() -> KernelCoeffs {
        // service = 0.6 * (0.4 * 0.9 + 0.6 * 0.0) = 0.216
        KernelCoeffs::new(0.2, 0.2, 0.216, 0.216).unwrap()
    }

    #[test]
    fn from_system_matches_manual_composites() {
        let ch = crate::channel::Preset::Capture { b: 0.0 }
            .build(0.9, 1.0)
            .unwrap();
        let pol = Policy2::symmetric(0.6, 1.0);
        let k = KernelCoeffs::from_system(&ch, &pol, [0.2, 0.2]).unwrap();
        assert_relative_eq!(k.service1, 0.216, max_relative = 1e-15);
        assert_relative_eq!(k.service2, 0.216, max_relative = 1e-15);
    }

    #[test]
    fn from_system_rejects_double_success_channels() {
        let ch = crate::channel::Preset::Mpr { b: 0.2, c: 0.3 }
            .build(0.9, 1.0)
            .unwrap();
        let pol = Policy2::symmetric(0.6, 1.0);
        assert!(KernelCoeffs::from_system(&ch, &pol, [0.2, 0.2]).is_err());
    }

    #[test]
    fn kernel_factorizes_at_one_and_small_branch_is_one() {
        let k = reference();
        let one = Complex64::new(1.0, 0.0);
        // At x = 1 the roots in y are 1 and service2/lambda2.
        let pair = k.roots_in_y(one);
        assert_relative_eq!(pair.small.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(pair.small.im, 0.0, epsilon = 1e-12);
        let large = pair.large.unwrap();
        assert_relative_eq!(large.re, 0.216 / 0.2, epsilon = 1e-10);
        // Mirror statement for the roots in x.
        let pair_x = k.roots_in_x(one);
        assert_relative_eq!(pair_x.small.re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unit_circle_roots_have_small_modulus_and_tiny_residual() {
        let k = reference();
        for j in 0..100 {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / 100.0;
            let x = Complex64::from_polar(1.0, phi);
            let pair = k.roots_in_y(x);
            assert!(
                pair.small.norm() <= 1.0 + 1e-12,
                "|Y0| = {} at angle {phi}",
                pair.small.norm()
            );
            assert!(k.residual(x, pair.small) < 1e-10);
            if let Some(large) = pair.large {
                assert!(k.residual(x, large) < 1e-10);
            }
        }
    }

    #[test]
    fn exactly_one_x_root_inside_unit_circle_off_one() {
        let k = reference();
        for j in 0..64 {
            let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / 64.0;
            let y = Complex64::from_polar(1.0, phi);
            let pair = k.roots_in_x(y);
            let mut inside = 0;
            if pair.small.norm() < 1.0 {
                inside += 1;
            }
            if let Some(large) = pair.large {
                if large.norm() < 1.0 {
                    inside += 1;
                }
            }
            assert_eq!(inside, 1, "at angle {phi}");
        }
    }

    #[test]
    fn degenerate_leading_coefficient_solves_linear_equation() {
        let k = reference();
        // a(x) vanishes at x = 0: the kernel root there is y = 0.
        let pair = k.roots_in_y(Complex64::new(0.0, 0.0));
        assert!(pair.large.is_none());
        assert_relative_eq!(pair.small.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_branch_points_are_ordered_and_bounded() {
        let k = reference();
        let bp = branch_points(&k).unwrap();
        assert!(bp.x[0] > 0.0);
        assert!(bp.x[0] < bp.x[1] && bp.x[1] <= 1.0);
        assert!(1.0 < bp.x[2] && bp.x[2] < bp.x[3]);
        assert!(bp.x[3] < 6.0, "upper bound (1+rate)/rate = 6");
        // Symmetric system: y branch points coincide with x branch points.
        for i in 0..4 {
            assert_relative_eq!(bp.x[i], bp.y[i], max_relative = 1e-10);
        }
        // Definitional residual at each branch point.
        let d = k.discriminant_x_poly();
        let scale = d
            .coeffs()
            .iter()
            .fold(0.0_f64, |m, c| m.max(c.abs()));
        for &x in &bp.x {
            assert!(
                d.eval(x).abs() < 1e-10 * scale.max(1.0),
                "D({x}) = {}",
                d.eval(x)
            );
        }
    }

    #[test]
    fn contour_extremes_and_slit_consistency() {
        let k = reference();
        let geo = contour_m(&k).unwrap();
        let bp = branch_points(&k).unwrap();
        // Extremes from the displayed closed forms.
        let expect_right =
            (k.service1 / (k.lambda1 * (1.0 + k.lambda2 - k.lambda2 * bp.y[1]))).sqrt();
        let expect_left =
            -(k.service1 / (k.lambda1 * (1.0 + k.lambda2 - k.lambda2 * bp.y[0]))).sqrt();
        assert_relative_eq!(geo.right, expect_right, max_relative = 1e-12);
        assert_relative_eq!(geo.left, expect_left, max_relative = 1e-12);
        // The polar solve reproduces the extremes at angles 0 and pi.
        assert_relative_eq!(geo.rho(0.0).unwrap(), geo.right, epsilon = 1e-10);
        assert_relative_eq!(
            geo.rho(std::f64::consts::PI).unwrap(),
            -geo.left,
            epsilon = 1e-10
        );
    }

    #[test]
    fn contour_samples_map_back_to_the_generating_slit() {
        let k = reference();
        let geo = contour_m(&k).unwrap();
        let samples = geo.samples(64).unwrap();
        let [y1, y2] = geo.span;
        let mut max_modulus = 0.0_f64;
        for j in 0..samples.len() {
            let x = samples.point(j);
            max_modulus = max_modulus.max(x.norm());
            assert!(samples.rho[j] > 0.0);
            // The small root in y at a contour point is real in the slit.
            let y = k.y_small(x);
            assert!(y.im.abs() < 1e-8, "Im Y0 = {} at sample {j}", y.im);
            assert!(
                y.re > y1 - 1e-8 && y.re < y2 + 1e-8,
                "Y0 = {} outside [{y1}, {y2}]",
                y.re
            );
            // Branch consistency: one of the x-roots at that y is x itself.
            let back = k.roots_in_x(y);
            let d_small = (back.small - x).norm();
            let d_large = back.large.map(|r| (r - x).norm()).unwrap_or(f64::MAX);
            assert!(d_small.min(d_large) < 1e-7, "sample {j} did not map back");
        }
        assert!(max_modulus <= geo.right + 1e-10);
        // Symmetry about the real axis.
        let n = samples.len();
        for j in 1..n {
            assert_relative_eq!(samples.rho[j], samples.rho[n - j], epsilon = 1e-9);
        }
    }

    #[test]
    fn symmetric_system_contours_coincide() {
        let k = reference();
        let m = contour_m(&k).unwrap().samples(32).unwrap();
        let l = contour_l(&k).unwrap().samples(32).unwrap();
        for j in 0..m.len() {
            assert_relative_eq!(m.rho[j], l.rho[j], epsilon = 1e-12);
        }
        assert_relative_eq!(m.right, l.right, epsilon = 1e-14);
        assert_relative_eq!(m.left, l.left, epsilon = 1e-14);
    }

    #[test]
    fn asymmetric_contour_still_closes_and_maps_back() {
        let k = KernelCoeffs::new(0.1, 0.15, 0.3, 0.24).unwrap();
        let geo = contour_l(&k).unwrap();
        let samples = geo.samples(48).unwrap();
        // Points on the second-plane contour map back into the first slit.
        let bp = branch_points(&k).unwrap();
        for j in 0..samples.len() {
            let y = samples.point(j);
            let x = k.swapped().y_small(y);
            assert!(x.im.abs() < 1e-8);
            assert!(x.re > bp.x[0] - 1e-8 && x.re < bp.x[1] + 1e-8);
        }
    }
}
