//! Boundary-value solution of the stationary joint queue-length transform for
//! the two-user system, and the mean queue lengths and delays derived from it.
//!
//! The stationary transform `H(x, y)` of the joint queue distribution
//! satisfies, on the zero set of the kernel, a linear relation between the
//! sections `H(x, 0)`, `H(0, y)` and the constant `H(0, 0)`.  Restricting the
//! relation to the kernel's real-section contour `M` turns it into a scalar
//! Riemann-Hilbert problem for `H(x, 0)` on the domain bounded by `M`, which
//! is transplanted onto the unit disk by the conformal map of
//! [`crate::conformal`] and solved in closed form:
//!
//! * the unknown enters through `Im[G(x) · H(x, 0)] = g(x) · H(0, 0)` with
//!   `G = A · conj(B)` built from the section coefficients;
//! * when the service indicator `a1/s1 + a2/s2` equals one the coefficient
//!   `G` is real on `M` and the problem is a plain Dirichlet problem with
//!   `H(0,0) = 1 − rho` known in advance;
//! * otherwise the full homogeneous factor `exp` of a Schwarz completion of
//!   `arg G` is required, and `H(0, 0)` is pinned by evaluating the solution
//!   at `x = 0` and `x = 1` together with the affine flow relations;
//! * a simple pole of the analytic continuation of `H(x, 0)` may fall inside
//!   `M` (located by an explicit quadratic); it is absorbed by a `(x̄ − x)^r`
//!   factor which also restores a zero winding index.  A non-zero residual
//!   index is the numerical signature of unstable arrival rates.
//!
//! All angular data on the contour are odd functions of the grid angle, so
//! their analytic completions are power series with real coefficients; the
//! solver works with those series directly, which keeps evaluations accurate
//! up to the boundary and makes derivatives exact.

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::{Channel2, Channel3};
use crate::conformal::{map_contour, ConformalMap, DEFAULT_GRID, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::kernel::{contour_m, ContourGeometry, KernelCoeffs};
use crate::policy::{Policy2, Policy3};
use crate::stability::{composites2, dominant_pair, Composites2};

/// Tolerance on `|indicator − 1|` below which the flow system is degenerate
/// and the balanced (Dirichlet) route applies.
pub const BALANCED_TOL: f64 = 1e-9;

/// Numerical configuration of the transform-domain solver.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BvpConfig {
    /// Uniform grid size for the conformal map and all contour quadrature.
    pub grid: usize,
    /// Fixed-point tolerance for the boundary correspondence.
    pub map_tol: f64,
}

impl Default for BvpConfig {
    fn default() -> Self {
        BvpConfig {
            grid: DEFAULT_GRID,
            map_tol: DEFAULT_TOL,
        }
    }
}

/// Which analytic route the boundary problem takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Regime {
    /// Service indicator equals one: degenerate flow system, real boundary
    /// coefficient, `H(0,0) = 1 − rho` a priori.
    Balanced,
    /// Generic case: complex boundary coefficient, `H(0,0)` pinned by the
    /// solution itself through the affine flow relations.
    Unbalanced,
}

/// Work conservation constants tied to the empty-queue probabilities.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowConstants {
    /// Offered load `lambda1/s1 + lambda2/s2` in units of the adapted
    /// (lone-queue) service rates.
    pub rho: f64,
    /// Service indicator `a1/s1 + a2/s2`.
    pub indicator: f64,
    /// Route selected by the indicator.
    pub regime: Regime,
    /// `H(0,0)` when it is known a priori (balanced route, or zero arrivals).
    pub h00: Option<f64>,
    /// Affine representation `H(1,0) = base[0] + slope[0]·H(0,0)` and
    /// `H(0,1) = base[1] + slope[1]·H(0,0)` (unbalanced route only).
    pub affine_base: Option<[f64; 2]>,
    /// See [`FlowConstants::affine_base`].
    pub affine_slope: Option<[f64; 2]>,
}

fn flow_internal(c: &Composites2, lambda: [f64; 2]) -> FlowConstants {
    let [s1, s2] = c.alone_service;
    let [a1, a2] = c.busy_service;
    let [dh1, dh2] = c.gap_hat;
    let rho = lambda[0] / s1 + lambda[1] / s2;
    let indicator = a1 / s1 + a2 / s2;
    if lambda[0] == 0.0 && lambda[1] == 0.0 {
        let regime = if (indicator - 1.0).abs() <= BALANCED_TOL {
            Regime::Balanced
        } else {
            Regime::Unbalanced
        };
        return FlowConstants {
            rho,
            indicator,
            regime,
            h00: Some(1.0),
            affine_base: None,
            affine_slope: None,
        };
    }
    if (indicator - 1.0).abs() <= BALANCED_TOL {
        FlowConstants {
            rho,
            indicator,
            regime: Regime::Balanced,
            h00: Some(1.0 - rho),
            affine_base: None,
            affine_slope: None,
        }
    } else {
        // Solve the two throughput identities for the boundary probabilities
        // P(N1>0,N2=0) and P(N1=0,N2>0) as affine functions of H(0,0).
        let det = dh1 * dh2 - a1 * a2; // = s1·s2·(1 − indicator), nonzero here
        let u0 = (-dh2 * (lambda[0] - a1) + a1 * (lambda[1] - a2)) / det;
        let u1 = a1 * (a2 - dh2) / det;
        let v0 = (-dh1 * (lambda[1] - a2) + a2 * (lambda[0] - a1)) / det;
        let v1 = a2 * (a1 - dh1) / det;
        FlowConstants {
            rho,
            indicator,
            regime: Regime::Unbalanced,
            h00: None,
            affine_base: Some([u0, v0]),
            affine_slope: Some([1.0 + u1, 1.0 + v1]),
        }
    }
}

/// Flow-conservation constants for stable arrival rates.
///
/// Errors when the rates are not strictly inside the stability region.
pub fn flow_constants(ch: &Channel2, pol: &Policy2, lambda: [f64; 2]) -> Result<FlowConstants> {
    let region = crate::stability::two_user_region(ch, pol)?;
    match region.membership(lambda, 1e-12) {
        crate::stability::Membership::Interior => {}
        other => {
            return Err(Error::domain(format!(
                "arrival rates ({}, {}) are not strictly inside the stability \
                 region (membership: {other:?})",
                lambda[0], lambda[1]
            )))
        }
    }
    Ok(flow_internal(&composites2(ch, pol), lambda))
}

/// Continuation-pole bookkeeping for one transform plane.
#[derive(Debug, Clone, Serialize)]
pub struct PoleSide {
    /// Quadratic (ascending coefficients) whose roots locate poles of the
    /// analytic continuation of the section in this plane.
    pub pole_poly: [f64; 3],
    /// Companion quadratic (ascending) for the other coordinate of the same
    /// curve intersections.
    pub companion_poly: [f64; 3],
    /// Classification branch: true when the quadratic opens downward or is
    /// degenerate (adapted rate below the closed-form threshold), so that a
    /// single real root beyond one exists.
    pub threshold_within: bool,
    /// Pole candidate beyond `1` in this plane, if any (smallest such root).
    pub candidate: Option<f64>,
    /// Other-plane coordinate of the curve intersection at the candidate.
    pub companion_value: Option<f64>,
    /// Whether the candidate falls inside the real-section contour.
    pub inside_contour: bool,
    /// Whether the intersection lies on the smaller-modulus kernel branch —
    /// the branch along which the section is continued.
    pub on_small_branch: bool,
    /// Order of the pole of the analytically continued section inside the
    /// contour: 1 when the candidate is inside, sits on the continuation
    /// branch, and its companion coordinate has modulus at most one; else 0.
    pub r: u8,
}

fn real_quad_roots(c: [f64; 3]) -> Vec<f64> {
    let [c0, c1, c2] = c;
    let scale = c0.abs().max(c1.abs()).max(c2.abs());
    if c2.abs() <= 1e-14 * scale {
        if c1.abs() <= 1e-14 * scale {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let mut roots = if q == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![q / c2, c0 / q]
    };
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots
}

/// Parameters of one side (plane) of the analysis, oriented so the unknown
/// section lives in the `x` plane of `kc`.
#[derive(Debug, Clone, Copy)]
struct SideParams {
    kc: KernelCoeffs,
    dhat_own: f64,
    dhat_oth: f64,
    s_own: f64,
}

impl SideParams {
    fn a_own(&self) -> f64 {
        self.kc.service1
    }
    fn a_oth(&self) -> f64 {
        self.kc.service2
    }
    fn lambda_own(&self) -> f64 {
        self.kc.lambda1
    }
    fn lambda_oth(&self) -> f64 {
        self.kc.lambda2
    }
    fn k_sum(&self) -> f64 {
        let (l1, l2) = (self.lambda_own(), self.lambda_oth());
        l1 + l2 + l1 * l2 + self.a_own() + self.a_oth()
    }

    /// Section-relation coefficients multiplied by `u·v` (polynomial form):
    /// the relation on the kernel zero set reads
    /// `A·Phi(u) + B·Psi(v) + C·H(0,0) = 0` after dividing by `u·v`.
    fn coeff_a(&self, u: Complex64, v: f64) -> Complex64 {
        self.dhat_own * v * (u - 1.0) + self.a_oth() * u * (v - 1.0)
    }
    fn coeff_b(&self, u: Complex64, v: f64) -> Complex64 {
        self.a_own() * v * (u - 1.0) + self.dhat_oth * u * (v - 1.0)
    }
    fn coeff_c(&self, u: Complex64, v: f64) -> Complex64 {
        -self.dhat_own * v * (u - 1.0) - self.dhat_oth * u * (v - 1.0)
    }

    /// Quadratic locating zeros of `A(u, V0(u))`, i.e. candidate poles of the
    /// continued section in this plane.  `u = 1` is factored out.
    fn pole_poly(&self) -> [f64; 3] {
        let (l1, l2) = (self.lambda_own(), self.lambda_oth());
        let lam = l1 + l2 + l1 * l2;
        let (a2, dh, s) = (self.a_oth(), self.dhat_own, self.s_own);
        [
            -s * dh,
            lam * dh + (a2 + dh) * s,
            -l1 * (a2 + (1.0 + l2) * dh),
        ]
    }

    /// Companion quadratic: other-plane coordinates of the same curve
    /// intersections (factors `v` and `v − 1` removed).
    fn companion_poly(&self) -> Result<[f64; 3]> {
        let (l1, l2) = (self.lambda_own(), self.lambda_oth());
        let (a1, a2, dh) = (self.a_own(), self.a_oth(), self.dhat_own);
        let k = self.k_sum();
        let c4 = -l2 * dh * (a2 * (1.0 + l1) + dh);
        let c3 = l2 * dh * a2 * (1.0 + l1) - l1 * (1.0 + l2) * dh * dh
            + k * dh * (a2 + dh)
            - a1 * (a2 + dh) * (a2 + dh);
        let c2 = -k * dh * a2 + 2.0 * a1 * a2 * (a2 + dh) - a2 * dh * (a2 + dh);
        let c1 = -a2 * a2 * self.s_own;
        let scale = c1.abs().max(c2.abs()).max(c3.abs()).max(c4.abs()) + 1.0;
        if (c1 + c2 + c3 + c4).abs() > 1e-9 * scale {
            return Err(Error::inconsistent(format!(
                "companion polynomial does not factor the trivial intersection: \
                 remainder {:.3e}",
                c1 + c2 + c3 + c4
            )));
        }
        Ok([c2 + c3 + c4, c3 + c4, c4])
    }

    /// Other-plane coordinate where the leading-coefficient zero curve meets
    /// the vertical line through `x`, when the curve is non-degenerate there.
    fn curve_intersection(&self, x: f64) -> Option<f64> {
        let denom = self.dhat_own * (x - 1.0) + self.a_oth() * x;
        (denom.abs() > 1e-12 * (1.0 + x.abs())).then(|| self.a_oth() * x / denom)
    }

    /// Whether `(x, y)` sits on the smaller-modulus kernel branch rather than
    /// the larger one.
    fn is_small_branch(&self, x: f64, y: f64) -> bool {
        let pair = self.kc.roots_in_y(Complex64::new(x, 0.0));
        let here = Complex64::new(y, 0.0);
        let dist_small = (here - pair.small).norm();
        match pair.large {
            Some(large) => dist_small <= (here - large).norm(),
            None => dist_small <= 1e-6 * (1.0 + y.abs()),
        }
    }

    fn pole_side(&self, geo: &ContourGeometry) -> Result<PoleSide> {
        let pole_poly = self.pole_poly();
        let companion_poly = self.companion_poly()?;
        let threshold_within = pole_poly[2] <= 0.0;
        let beyond: Vec<f64> = real_quad_roots(pole_poly)
            .into_iter()
            .filter(|r| *r > 1.0 + 1e-12)
            .collect();
        let candidate = beyond.first().copied();
        let mut inside_contour = false;
        let mut companion_value = None;
        let mut on_small_branch = false;
        let mut r = 0u8;
        if let Some(xb) = candidate {
            inside_contour = xb < geo.right * (1.0 - 1e-12);
            if let Some(ya) = self.curve_intersection(xb) {
                companion_value = Some(ya);
                on_small_branch = self.is_small_branch(xb, ya);
                r = u8::from(inside_contour && on_small_branch && ya.abs() <= 1.0 + 1e-12);
            }
            if r == 1 {
                if let Some(second) = beyond.get(1) {
                    if *second < geo.right {
                        if let Some(ya2) = self.curve_intersection(*second) {
                            if self.is_small_branch(*second, ya2) && ya2.abs() <= 1.0 {
                                return Err(Error::inconsistent(format!(
                                    "two continuation poles {xb:.6} and {second:.6} fall \
                                     inside the contour; the solver supports at most one"
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(PoleSide {
            pole_poly,
            companion_poly,
            threshold_within,
            candidate,
            companion_value,
            inside_contour,
            on_small_branch,
            r,
        })
    }
}

/// Continuation-pole analysis for both transform planes.
#[derive(Debug, Clone, Serialize)]
pub struct PoleAnalysis {
    /// First-queue plane (poles of the continuation of `H(x, 0)`).
    pub x_plane: PoleSide,
    /// Second-queue plane (poles of the continuation of `H(0, y)`).
    pub y_plane: PoleSide,
}

fn side_params(kc: &KernelCoeffs, c: &Composites2) -> [SideParams; 2] {
    [
        SideParams {
            kc: *kc,
            dhat_own: c.gap_hat[0],
            dhat_oth: c.gap_hat[1],
            s_own: c.alone_service[0],
        },
        SideParams {
            kc: kc.swapped(),
            dhat_own: c.gap_hat[1],
            dhat_oth: c.gap_hat[0],
            s_own: c.alone_service[1],
        },
    ]
}

/// Locates candidate poles of the analytic continuations of both sections
/// and records the locating polynomials.
///
/// Under stable rates with negative service gaps, the recorded polynomials
/// are positive at `0` and `1`; violations are reported as inconsistent
/// parameters.  Also verifies that the section-relation coefficient `B`
/// stays away from zero along the contour.
pub fn pole_analysis(ch: &Channel2, pol: &Policy2, lambda: [f64; 2]) -> Result<PoleAnalysis> {
    let kc = KernelCoeffs::from_system(ch, pol, lambda)?;
    let comps = composites2(ch, pol);
    let sides = side_params(&kc, &comps);
    let mut out = Vec::with_capacity(2);
    for (idx, sp) in sides.iter().enumerate() {
        let geo = contour_m(&sp.kc)?;
        let side = sp.pole_side(&geo)?;
        for (what, poly) in [("pole", side.pole_poly), ("companion", side.companion_poly)] {
            let at0 = poly[0];
            let at1 = poly[0] + poly[1] + poly[2];
            if at0 <= 0.0 || at1 <= 0.0 {
                return Err(Error::inconsistent(format!(
                    "{what} polynomial of plane {idx} is not positive at the \
                     unit interval ends: p(0) = {at0:.6e}, p(1) = {at1:.6e}",
                )));
            }
        }
        // The divisor coefficient B must not vanish along the contour.
        let samples = geo.samples(64)?;
        for j in 0..samples.len() {
            let u = samples.point(j);
            let v = sp.kc.y_small(u);
            let b = sp.coeff_b(u, v.re);
            if b.norm() < 1e-9 {
                return Err(Error::inconsistent(format!(
                    "section coefficient vanishes on the contour of plane {idx} \
                     at angle index {j}"
                )));
            }
        }
        out.push(side);
    }
    let y_plane = out.pop().unwrap();
    let x_plane = out.pop().unwrap();
    Ok(PoleAnalysis { x_plane, y_plane })
}

/// Boundary winding indices of the two section-relation coefficients, one per
/// transform plane, computed on the root contours without any stability
/// gating.
///
/// On the solvable domain both indices are `0` (or `1` when a continuation
/// pole falls inside a contour, in which case the solver absorbs it); rate
/// pairs outside the stability region flip an index negative on the
/// overloaded side.  This is the numerical stability signature used by the
/// solver and by the validation suite.
pub fn winding_indices(ch: &Channel2, pol: &Policy2, lambda: [f64; 2]) -> Result<[i32; 2]> {
    let kc = KernelCoeffs::from_system(ch, pol, lambda)?;
    let comps = composites2(ch, pol);
    let sides = side_params(&kc, &comps);
    let mut out = [0i32; 2];
    for (idx, sp) in sides.iter().enumerate() {
        let geo = contour_m(&sp.kc)?;
        let contour = geo.samples(1024)?;
        let mut gvals = Vec::with_capacity(contour.len());
        for j in 0..contour.len() {
            let u = contour.point(j);
            let v = sp.kc.y_small(u);
            if v.im.abs() > 1e-6 * (1.0 + v.norm()) {
                return Err(Error::inconsistent(format!(
                    "companion kernel root off the generating slit on the \
                     contour of plane {idx}"
                )));
            }
            let a = sp.coeff_a(u, v.re);
            let b = sp.coeff_b(u, v.re);
            gvals.push(a * b.conj());
        }
        out[idx] = unwrap_phases(&gvals)?.1;
    }
    Ok(out)
}

/// Fully pinned boundary solution for one plane.
#[derive(Debug, Clone)]
struct SideSolution {
    params: SideParams,
    map: ConformalMap,
    /// Boundary samples of the own-plane contour.
    samples: Vec<Complex64>,
    /// Companion (real) kernel roots along the contour.
    companion: Vec<f64>,
    /// Sine-series coefficients of the completion of `arg G`; the homogeneous
    /// factor is `X(z) = exp(−Σ b_k z^k)`.
    theta_series: Vec<f64>,
    /// Sine-series coefficients of the completion of the normalized data;
    /// the particular part is `H(0,0) · Σ v_k z^k`.
    data_series: Vec<f64>,
    /// Boundary winding index of the raw coefficient (equals the absorbed
    /// pole order on the solvable domain).
    chi: i32,
    pole: Option<f64>,
    r: u8,
    /// Largest deviation of the boundary data from odd symmetry.
    oddness: f64,
    h00: f64,
    c_const: f64,
}

fn eval_real_series(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn eval_real_series_deriv(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * z + c * k as f64;
    }
    acc
}

/// Sine-expansion of an odd periodic sample set: returns ascending
/// coefficients `b_k` (with `b_0 = 0`) such that the analytic completion of
/// the samples is `−i · Σ b_k z^k`.  Checks odd symmetry first and reports
/// the observed defect.
fn sine_series(data: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = data.len();
    let scale = 1.0 + data.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut defect = data[0].abs().max(data[n / 2].abs());
    for j in 1..n {
        defect = defect.max((data[j] + data[n - j]).abs());
    }
    if defect > 1e-5 * scale {
        return Err(Error::inconsistent(format!(
            "boundary data is not odd in the grid angle (defect {defect:.3e}); \
             the contour or its correspondence lost conjugate symmetry"
        )));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut coeffs = vec![0.0f64; n / 2 + 1];
    for (k, c) in coeffs.iter_mut().enumerate().take(n / 2).skip(1) {
        let mut acc = 0.0;
        for (j, d) in data.iter().enumerate() {
            acc += d * (tau * (k * j % n) as f64 / n as f64).sin();
        }
        *c = 2.0 * acc / n as f64;
    }
    Ok((coeffs, defect))
}

/// Unwraps the phases of nonvanishing boundary samples and returns the
/// continuous angles together with the integer winding number.
fn unwrap_phases(values: &[Complex64]) -> Result<(Vec<f64>, i32)> {
    let tau = 2.0 * std::f64::consts::PI;
    let n = values.len();
    let mut theta = Vec::with_capacity(n);
    let mut prev = values[0].arg();
    theta.push(prev);
    for v in values.iter().skip(1) {
        let mut d = v.arg() - (prev - tau * (prev / tau).round());
        d -= tau * (d / tau).round();
        prev += d;
        theta.push(prev);
    }
    let mut closing = values[0].arg() - (prev - tau * (prev / tau).round());
    closing -= tau * (closing / tau).round();
    let total = prev + closing - theta[0];
    let winding = total / tau;
    if (winding - winding.round()).abs() > 0.05 {
        return Err(Error::no_convergence(format!(
            "phase unwrapping along the contour is ambiguous (winding {winding:.4})"
        )));
    }
    Ok((theta, winding.round() as i32))
}

impl SideSolution {
    /// Homogeneous-factor exponent and particular series at `z`.
    fn factors(&self, z: Complex64) -> (Complex64, Complex64) {
        let x_hom = (-eval_real_series(&self.theta_series, z)).exp();
        let particular = eval_real_series(&self.data_series, z);
        (x_hom, particular)
    }

    /// Section value at a point strictly inside the own-plane contour.
    fn phi(&self, u: Complex64) -> Result<Complex64> {
        let z = self.map.gamma(u)?;
        let (x_hom, part) = self.factors(z);
        let mut value = x_hom * (self.h00 * part + self.c_const);
        if self.r == 1 {
            value /= Complex64::new(self.pole.unwrap(), 0.0) - u;
        }
        Ok(value)
    }

    /// Analytic derivative of the section at a point inside the contour.
    fn phi_prime(&self, u: Complex64) -> Result<Complex64> {
        let z = self.map.gamma(u)?;
        let dz = Complex64::new(1.0, 0.0) / self.map.gamma0_prime(z)?;
        let (x_hom, part) = self.factors(z);
        let db = eval_real_series_deriv(&self.theta_series, z);
        let dpart = eval_real_series_deriv(&self.data_series, z);
        let core = x_hom * (self.h00 * part + self.c_const);
        let dcore = (-db * core + x_hom * self.h00 * dpart) * dz;
        if self.r == 1 {
            let denom = Complex64::new(self.pole.unwrap(), 0.0) - u;
            Ok(dcore / denom + core / (denom * denom))
        } else {
            Ok(dcore)
        }
    }

    /// Boundary value of the section at grid index `j`, evaluated through the
    /// same series (spectrally accurate up to the boundary).
    fn phi_boundary(&self, j: usize) -> Complex64 {
        let t = Complex64::from_polar(1.0, self.map.grid_angle(j));
        let (x_hom, part) = self.factors(t);
        let mut value = x_hom * (self.h00 * part + self.c_const);
        if self.r == 1 {
            value /= Complex64::new(self.pole.unwrap(), 0.0) - self.samples[j];
        }
        value
    }
}

/// Joint solution of both boundary problems plus diagnostics.
#[derive(Debug, Clone)]
pub struct BvpSolution {
    flow: FlowConstants,
    poles: PoleAnalysis,
    sides: [SideSolution; 2],
    comps: Composites2,
    lambda: [f64; 2],
    grid: usize,
    /// `H(0,0)` recomputed independently from the mirror plane.
    h00_mirror: f64,
    /// Residuals of the two throughput identities at the solved constants.
    flow_residual: [f64; 2],
    /// Cross-plane residual of the section relation along the contour.
    boundary_residual: f64,
}

impl BvpSolution {
    pub fn regime(&self) -> Regime {
        self.flow.regime
    }
    pub fn flow(&self) -> &FlowConstants {
        &self.flow
    }
    pub fn poles(&self) -> &PoleAnalysis {
        &self.poles
    }
    pub fn grid(&self) -> usize {
        self.grid
    }
    pub fn lambda(&self) -> [f64; 2] {
        self.lambda
    }
    /// Probability that both queues are empty.
    pub fn h00(&self) -> f64 {
        self.sides[0].h00
    }
    /// Mirror-plane estimate of the same probability (consistency check).
    pub fn h00_mirror(&self) -> f64 {
        self.h00_mirror
    }
    /// Probability that the second queue is empty.
    pub fn h10(&self) -> Result<f64> {
        Ok(self.sides[0].phi(Complex64::new(1.0, 0.0))?.re)
    }
    /// Probability that the first queue is empty.
    pub fn h01(&self) -> Result<f64> {
        Ok(self.sides[1].phi(Complex64::new(1.0, 0.0))?.re)
    }
    /// Residual winding indices of both planes (zero under stability).
    pub fn chi(&self) -> [i32; 2] {
        [self.sides[0].chi, self.sides[1].chi]
    }
    /// Absorbed pole orders of both planes.
    pub fn pole_orders(&self) -> [u8; 2] {
        [self.sides[0].r, self.sides[1].r]
    }
    /// Largest deviation of the boundary data from odd symmetry.
    pub fn data_oddness(&self) -> f64 {
        self.sides[0].oddness.max(self.sides[1].oddness)
    }
    /// Residuals of the throughput identities.
    pub fn flow_residual(&self) -> [f64; 2] {
        self.flow_residual
    }
    /// Cross-plane residual of the section relation along the contour.
    pub fn boundary_residual(&self) -> f64 {
        self.boundary_residual
    }

    /// Section `H(x, 0)` inside the first-plane contour.
    pub fn section_m(&self, x: Complex64) -> Result<Complex64> {
        self.sides[0].phi(x)
    }
    /// Section `H(0, y)` inside the second-plane contour.
    pub fn section_l(&self, y: Complex64) -> Result<Complex64> {
        self.sides[1].phi(y)
    }
    /// Derivative `d/dx H(x, 0)`.
    pub fn section_m_derivative(&self, x: Complex64) -> Result<Complex64> {
        self.sides[0].phi_prime(x)
    }
    /// Derivative `d/dy H(0, y)`.
    pub fn section_l_derivative(&self, y: Complex64) -> Result<Complex64> {
        self.sides[1].phi_prime(y)
    }

    fn kernel_r(&self, x: Complex64, y: Complex64) -> Complex64 {
        let l1 = self.lambda[0];
        let l2 = self.lambda[1];
        let [a1, a2] = self.comps.busy_service;
        l1 * (1.0 - x)
            + l2 * (1.0 - y)
            + l1 * l2 * (1.0 - x) * (1.0 - y)
            + a1 * (1.0 - 1.0 / x)
            + a2 * (1.0 - 1.0 / y)
    }

    /// Joint transform `H(x, y)` reconstructed from the two sections.
    ///
    /// Points within `1e-8` of the kernel zero set are evaluated by the
    /// limiting (derivative-ratio) formula.
    pub fn joint(&self, x: Complex64, y: Complex64) -> Result<Complex64> {
        let [dh1, dh2] = self.comps.gap_hat;
        let [a1, a2] = self.comps.busy_service;
        let h00 = self.h00();
        if y.norm() < 1e-12 {
            return self.section_m(x);
        }
        if x.norm() < 1e-12 {
            return self.section_l(y);
        }
        let phi_m = self.section_m(x)?;
        let phi_l = self.section_l(y)?;
        let r = self.kernel_r(x, y);
        let a = dh1 * (1.0 - 1.0 / x) + a2 * (1.0 - 1.0 / y);
        let b = a1 * (1.0 - 1.0 / x) + dh2 * (1.0 - 1.0 / y);
        let c = -dh1 * (1.0 - 1.0 / x) - dh2 * (1.0 - 1.0 / y);
        let scale = a.norm() + b.norm() + c.norm() + 1.0;
        if r.norm() > 1e-8 * scale {
            return Ok((a * phi_m + b * phi_l + c * h00) / r);
        }
        // Both numerator and kernel vanish on the zero set; take the ratio of
        // the partial derivatives along y.
        let l1 = self.lambda[0];
        let l2 = self.lambda[1];
        let y2 = y * y;
        let r_y = -l2 - l1 * l2 * (1.0 - x) + a2 / y2;
        let a_y = a2 / y2;
        let b_y = dh2 / y2;
        let c_y = -dh2 / y2;
        let n_y = a_y * phi_m + b_y * phi_l + b * self.section_l_derivative(y)? + c_y * h00;
        if r_y.norm() < 1e-10 * scale {
            return Err(Error::no_convergence(
                "joint-transform evaluation too close to a degenerate kernel point",
            ));
        }
        Ok(n_y / r_y)
    }

    /// Residual of the section relation at a point `x` inside the first
    /// contour, with the companion coordinate taken on the kernel zero set.
    ///
    /// Returns `None` when the companion point leaves the second contour.
    pub fn functional_residual(&self, x: Complex64) -> Result<Option<f64>> {
        let kc = &self.sides[0].params.kc;
        let y = kc.y_small(x);
        let geo_l = contour_m(&kc.swapped())?;
        if !geo_l.contains(y)? {
            return Ok(None);
        }
        let phi_m = self.section_m(x)?;
        let phi_l = self.section_l(y)?;
        let sp = &self.sides[0].params;
        let a = sp.dhat_own * y * (x - 1.0) + sp.a_oth() * x * (y - 1.0);
        let b = sp.a_own() * y * (x - 1.0) + sp.dhat_oth * x * (y - 1.0);
        let c = -sp.dhat_own * y * (x - 1.0) - sp.dhat_oth * x * (y - 1.0);
        let resid = a * phi_m + b * phi_l + c * self.h00();
        let scale = (a * phi_m).norm() + (b * phi_l).norm() + (c * self.h00()).norm() + 1e-6;
        Ok(Some(resid.norm() / scale))
    }

    /// Mean queue lengths and delays derived from the solved sections.
    pub fn delay_report(&self) -> Result<DelayReport> {
        let one = Complex64::new(1.0, 0.0);
        let d_m = self.sides[0].phi_prime(one)?.re;
        let d_l = self.sides[1].phi_prime(one)?.re;
        let [a1, a2] = self.comps.busy_service;
        let [dh1, dh2] = self.comps.gap_hat;
        let m1 = (self.lambda[0] + dh1 * d_m) / (a1 - self.lambda[0]);
        let m2 = (self.lambda[1] + dh2 * d_l) / (a2 - self.lambda[1]);
        for (i, m) in [m1, m2].into_iter().enumerate() {
            if !(m > 0.0) || !m.is_finite() {
                return Err(Error::inconsistent(format!(
                    "mean queue length of user {} came out non-positive ({m:.6e})",
                    i + 1
                )));
            }
        }
        Ok(DelayReport {
            lambda: self.lambda,
            mean_queue: [m1, m2],
            mean_delay: [Some(m1 / self.lambda[0]), Some(m2 / self.lambda[1])],
            h00: self.h00(),
            h10: self.h10()?,
            h01: self.h01()?,
            section_derivatives: [d_m, d_l],
            regime: self.flow.regime,
            chi: self.chi(),
            pole_orders: self.pole_orders(),
            grid: self.grid,
            flow_residual: self.flow_residual,
            boundary_residual: self.boundary_residual,
            h00_mirror_gap: (self.h00() - self.h00_mirror).abs(),
        })
    }
}

/// Mean queue lengths and delays with solver diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DelayReport {
    pub lambda: [f64; 2],
    /// Stationary mean queue lengths.
    pub mean_queue: [f64; 2],
    /// Mean delays (slots) by Little's law; undefined when the matching
    /// arrival rate is zero.
    pub mean_delay: [Option<f64>; 2],
    pub h00: f64,
    pub h10: f64,
    pub h01: f64,
    /// Section derivatives `H_x(1,0)` and `H_y(0,1)`.
    pub section_derivatives: [f64; 2],
    pub regime: Regime,
    pub chi: [i32; 2],
    pub pole_orders: [u8; 2],
    pub grid: usize,
    pub flow_residual: [f64; 2],
    pub boundary_residual: f64,
    pub h00_mirror_gap: f64,
}

fn solve_side(
    sp: SideParams,
    flow: &FlowConstants,
    pole: &PoleSide,
    cfg: &BvpConfig,
) -> Result<SideSolution> {
    let geo = contour_m(&sp.kc)?;
    let map = map_contour(&geo, cfg.grid, cfg.map_tol)?;
    let n = map.grid_len();
    let samples = map.boundary_points();
    let mut companion = Vec::with_capacity(n);
    for u in &samples {
        let v = sp.kc.y_small(*u);
        if v.im.abs() > 1e-6 * (1.0 + v.norm()) {
            return Err(Error::inconsistent(format!(
                "companion kernel root off the generating slit on the contour \
                 (imaginary part {:.3e})",
                v.im
            )));
        }
        companion.push(v.re);
    }

    // Boundary coefficient G = A·conj(B) and inhomogeneity g = −Im[conj(B)·C].
    let mut gvals = Vec::with_capacity(n);
    let mut gdata = Vec::with_capacity(n);
    for (u, &v) in samples.iter().zip(&companion) {
        let a = sp.coeff_a(*u, v);
        let b = sp.coeff_b(*u, v);
        let c = sp.coeff_c(*u, v);
        if b.norm() < 1e-10 {
            return Err(Error::inconsistent(
                "section coefficient vanishes on the contour",
            ));
        }
        gvals.push(a * b.conj());
        gdata.push(-(b.conj() * c).im);
    }
    // The winding of the coefficient fixes how many pole factors the solution
    // needs for a well-posed (index-zero) problem.  Inside the solver's
    // domain the index is zero or, when the continued section carries a pole
    // inside the contour, one.
    let (_, chi_raw) = unwrap_phases(&gvals)?;
    let r: u8 = match chi_raw {
        0 => 0,
        1 => {
            if pole.r != 1 {
                return Err(Error::inconsistent(format!(
                    "boundary index {chi_raw} requires a continuation pole \
                     inside the contour, but none was located"
                )));
            }
            1
        }
        other => {
            return Err(Error::domain(format!(
                "boundary winding index chi = {other} is outside {{0, 1}}: the \
                 arrival rates are outside the solvable stability domain"
            )));
        }
    };
    let xbar = pole.candidate.unwrap_or(0.0);
    if r == 1 {
        for (g, u) in gvals.iter_mut().zip(&samples) {
            *g /= Complex64::new(xbar, 0.0) - u;
        }
    }
    // Normalize the overall real sign at the rightmost point so the angle
    // starts at zero.
    if gvals[0].re < 0.0 {
        for g in gvals.iter_mut() {
            *g = -*g;
        }
        for d in gdata.iter_mut() {
            *d = -*d;
        }
    }
    let (theta, chi) = unwrap_phases(&gvals)?;
    if chi != 0 {
        return Err(Error::inconsistent(format!(
            "residual winding index {chi} after absorbing the pole factor"
        )));
    }
    let (theta_series, odd_theta) = sine_series(&theta)?;
    // Positive boundary magnitude u = |G|·exp(conjugate of arg G); the
    // conjugate function is the real part of the completion at the boundary.
    let mut vhat = Vec::with_capacity(n);
    for (j, g) in gvals.iter().enumerate() {
        let t = Complex64::from_polar(1.0, map.grid_angle(j));
        // completion of theta is −i·B(z); boundary real part of B is the
        // negated conjugate function.
        let b_val = eval_real_series(&theta_series, t);
        let mag = g.norm() * (-b_val.re).exp();
        if !(mag > 0.0) || !mag.is_finite() {
            return Err(Error::no_convergence(
                "homogeneous boundary magnitude degenerated",
            ));
        }
        vhat.push(gdata[j] / mag);
    }
    let (data_series, odd_data) = sine_series(&vhat)?;

    // Pin the constants.  The solution is
    //   Phi(u) = (xbar − u)^{−r} · X(z) · [H00·V(z) + c],   z = gamma(u),
    // with X = exp(−B_theta), V the data completion, X(0) = 1, V(0) = 0, so
    // the value at u = 0 forces c = H00·xbar^r.
    let h00;
    match flow.regime {
        Regime::Balanced => {
            h00 = flow.h00.expect("balanced flow carries H(0,0)");
        }
        Regime::Unbalanced => {
            let base = flow.affine_base.expect("unbalanced flow affine")[0];
            let slope = flow.affine_slope.expect("unbalanced flow affine")[0];
            let z1 = map.gamma(Complex64::new(1.0, 0.0))?;
            let x_at_1 = (-eval_real_series(&theta_series, z1)).exp();
            let v_at_1 = eval_real_series(&data_series, z1);
            debug_assert!(z1.im.abs() < 1e-9);
            let pole_pow = if r == 1 { xbar } else { 1.0 };
            let pole_fac = if r == 1 { 1.0 / (xbar - 1.0) } else { 1.0 };
            let denom = pole_fac * x_at_1.re * (v_at_1.re + pole_pow) - slope;
            if denom.abs() < 1e-12 {
                return Err(Error::no_convergence(
                    "constant-pinning system is singular at these rates",
                ));
            }
            h00 = base / denom;
        }
    }
    if !(h00 > 0.0 && h00 < 1.0 + 1e-9) {
        return Err(Error::inconsistent(format!(
            "solved empty-system probability {h00:.6e} is outside (0, 1)"
        )));
    }
    let c_const = h00 * if r == 1 { xbar } else { 1.0 };

    Ok(SideSolution {
        params: sp,
        map,
        samples,
        companion,
        theta_series,
        data_series,
        chi: chi_raw,
        pole: pole.candidate.filter(|_| r == 1),
        r,
        oddness: odd_theta.max(odd_data),
        h00,
        c_const,
    })
}

fn solve_inner(ch: &Channel2, pol: &Policy2, lambda: [f64; 2], cfg: &BvpConfig) -> Result<BvpSolution> {
    let kc = KernelCoeffs::from_system(ch, pol, lambda)?;
    let comps = composites2(ch, pol);
    for k in 0..2 {
        if comps.gap[k] >= 0.0 {
            return Err(Error::domain(format!(
                "standing assumption violated for user {}: busy-service gap \
                 {:+.6e} is not negative",
                k + 1,
                comps.gap[k]
            )));
        }
    }
    let [a1, a2] = comps.busy_service;
    if lambda[0] >= a1 || lambda[1] >= a2 {
        return Err(Error::domain(format!(
            "the transform-domain solver requires each arrival rate strictly \
             below the busy service rate (lambda = ({}, {}), busy rates = \
             ({a1:.6}, {a2:.6}))",
            lambda[0], lambda[1]
        )));
    }
    let flow_x = flow_internal(&comps, lambda);
    // Mirror orientation swaps the roles of the affine relations.
    let flow_y = FlowConstants {
        affine_base: flow_x.affine_base.map(|b| [b[1], b[0]]),
        affine_slope: flow_x.affine_slope.map(|s| [s[1], s[0]]),
        ..flow_x
    };
    let sides_p = side_params(&kc, &comps);
    let geo_x = contour_m(&sides_p[0].kc)?;
    let geo_y = contour_m(&sides_p[1].kc)?;
    let pole_x = sides_p[0].pole_side(&geo_x)?;
    let pole_y = sides_p[1].pole_side(&geo_y)?;
    let side_x = solve_side(sides_p[0], &flow_x, &pole_x, cfg)?;
    let side_y = solve_side(sides_p[1], &flow_y, &pole_y, cfg)?;
    let h00_mirror = side_y.h00;

    let mut solution = BvpSolution {
        flow: flow_x,
        poles: PoleAnalysis {
            x_plane: pole_x,
            y_plane: pole_y,
        },
        sides: [side_x, side_y],
        comps: comps.clone(),
        lambda,
        grid: cfg.grid,
        h00_mirror,
        flow_residual: [0.0; 2],
        boundary_residual: 0.0,
    };

    // Throughput identity residuals from three independent evaluations.
    let h00 = solution.h00();
    let h10 = solution.h10()?;
    let h01 = solution.h01()?;
    let p11 = 1.0 - h10 - h01 + h00;
    let [s1, s2] = comps.alone_service;
    solution.flow_residual = [
        a1 * p11 + s1 * (h10 - h00) - lambda[0],
        a2 * p11 + s2 * (h01 - h00) - lambda[1],
    ];

    // Cross-plane residual: the mirror section recovered from the primary
    // boundary relation must match the mirror solve along the contour.
    let mut worst = 0.0f64;
    let n = solution.sides[0].samples.len();
    let sp = solution.sides[0].params;
    for j in (0..n).step_by((n / 64).max(1)) {
        let u = solution.sides[0].samples[j];
        let v = solution.sides[0].companion[j];
        let a = sp.coeff_a(u, v);
        let b = sp.coeff_b(u, v);
        let c = sp.coeff_c(u, v);
        let phi = solution.sides[0].phi_boundary(j);
        let implied = -(a * phi + c * h00) / b;
        let direct = solution.sides[1].phi(Complex64::new(v, 0.0))?;
        worst = worst.max((implied - direct).norm());
    }
    solution.boundary_residual = worst;
    Ok(solution)
}

/// Solves the boundary problem for stable rates, dispatching on the regime.
pub fn solve(ch: &Channel2, pol: &Policy2, lambda: [f64; 2], cfg: &BvpConfig) -> Result<BvpSolution> {
    solve_inner(ch, pol, lambda, cfg)
}

/// Balanced-regime (Dirichlet) solver; errors if the indicator is not one.
pub fn solve_dirichlet(
    ch: &Channel2,
    pol: &Policy2,
    lambda: [f64; 2],
    cfg: &BvpConfig,
) -> Result<BvpSolution> {
    let sol = solve_inner(ch, pol, lambda, cfg)?;
    if sol.flow.regime != Regime::Balanced {
        return Err(Error::invalid(format!(
            "the Dirichlet route requires a unit service indicator; got {:.9}",
            sol.flow.indicator
        )));
    }
    Ok(sol)
}

/// Unbalanced-regime (Riemann-Hilbert) solver; errors if the indicator is one.
pub fn solve_riemann_hilbert(
    ch: &Channel2,
    pol: &Policy2,
    lambda: [f64; 2],
    cfg: &BvpConfig,
) -> Result<BvpSolution> {
    let sol = solve_inner(ch, pol, lambda, cfg)?;
    if sol.flow.regime != Regime::Unbalanced {
        return Err(Error::invalid(
            "the Riemann-Hilbert route requires a non-unit service indicator",
        ));
    }
    Ok(sol)
}

/// Mean queue lengths and delays, with single-queue closed forms when one of
/// the arrival rates is zero.
pub fn delay_report(
    ch: &Channel2,
    pol: &Policy2,
    lambda: [f64; 2],
    cfg: &BvpConfig,
) -> Result<DelayReport> {
    let comps = composites2(ch, pol);
    let [s1, s2] = comps.alone_service;
    match (lambda[0] == 0.0, lambda[1] == 0.0) {
        (true, true) => Ok(degenerate_report(lambda, [0.0, 0.0], [None, None], 1.0, 1.0, 1.0)),
        (false, true) => {
            let m1 = single_queue_mean(lambda[0], s1)?;
            let h00 = 1.0 - lambda[0] / s1;
            Ok(degenerate_report(
                lambda,
                [m1, 0.0],
                [Some(1.0 / (s1 - lambda[0])), None],
                h00,
                1.0,
                h00,
            ))
        }
        (true, false) => {
            let m2 = single_queue_mean(lambda[1], s2)?;
            let h00 = 1.0 - lambda[1] / s2;
            Ok(degenerate_report(
                lambda,
                [0.0, m2],
                [None, Some(1.0 / (s2 - lambda[1]))],
                h00,
                h00,
                1.0,
            ))
        }
        (false, false) => solve(ch, pol, lambda, cfg)?.delay_report(),
    }
}

fn single_queue_mean(lambda: f64, s: f64) -> Result<f64> {
    if lambda >= s {
        return Err(Error::domain(format!(
            "single-queue rate {lambda} is not below the adapted service rate {s}"
        )));
    }
    Ok(lambda / (s - lambda))
}

fn degenerate_report(
    lambda: [f64; 2],
    mean_queue: [f64; 2],
    mean_delay: [Option<f64>; 2],
    h00: f64,
    h10: f64,
    h01: f64,
) -> DelayReport {
    DelayReport {
        lambda,
        mean_queue,
        mean_delay,
        h00,
        h10,
        h01,
        section_derivatives: [0.0, 0.0],
        regime: Regime::Balanced,
        chi: [0, 0],
        pole_orders: [0, 0],
        grid: 0,
        flow_residual: [0.0, 0.0],
        boundary_residual: 0.0,
        h00_mirror_gap: 0.0,
    }
}

/// Corner values of the dominant-pair transform for the three-user system.
///
/// With user `k` saturated, the other two users form an exact two-user
/// queue-aware system whose channel marginalizes the saturated user's
/// transmissions.  Returns `(F(0,0), F(1,0), F(0,1))` for that pair, where
/// the first pair coordinate is user `k+1` and the second `k+2` (mod 3).
pub fn solve_modified_f1(
    ch3: &Channel3,
    pol3: &Policy3,
    dominant: usize,
    lambda: [f64; 3],
    cfg: &BvpConfig,
) -> Result<(f64, f64, f64)> {
    let (ch2, pol2) = dominant_pair(ch3, pol3, dominant)?;
    let lam = [lambda[(dominant + 1) % 3], lambda[(dominant + 2) % 3]];
    let comps = composites2(&ch2, &pol2);
    let [s1, s2] = comps.alone_service;
    match (lam[0] == 0.0, lam[1] == 0.0) {
        (true, true) => return Ok((1.0, 1.0, 1.0)),
        (false, true) => {
            let h = 1.0 - lam[0] / s1;
            if h <= 0.0 {
                return Err(Error::domain(
                    "dominant-pair single queue is unstable at these rates",
                ));
            }
            return Ok((h, 1.0, h));
        }
        (true, false) => {
            let h = 1.0 - lam[1] / s2;
            if h <= 0.0 {
                return Err(Error::domain(
                    "dominant-pair single queue is unstable at these rates",
                ));
            }
            return Ok((h, h, 1.0));
        }
        (false, false) => {}
    }
    let sol = solve_inner(&ch2, &pol2, lam, cfg)?;
    Ok((sol.h00(), sol.h10()?, sol.h01()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Preset;
    use approx::assert_abs_diff_eq;

    fn symmetric_capture() -> (Channel2, Policy2) {
        let ch = Preset::Capture { b: 0.2 }.build(0.9, 1.0).unwrap();
        let pol = Policy2::symmetric(0.6, 1.0);
        (ch, pol)
    }

    fn balanced_point() -> (Channel2, Policy2) {
        let ch = Preset::Mpr { b: 0.3, c: 0.0 }.build(0.9, 1.0).unwrap();
        let pol = Policy2 {
            alpha: [0.3, 1.0],
            alpha_star: [0.09 / 0.28, 1.0],
        };
        (ch, pol)
    }

    #[test]
    fn flow_constants_classify_regimes() {
        let (ch, pol) = symmetric_capture();
        let f = flow_constants(&ch, &pol, [0.1, 0.1]).unwrap();
        assert_eq!(f.regime, Regime::Unbalanced);
        // a = 0.6 * (0.4 * 0.9 + 0.6 * 0.2) = 0.288 per user, s = 1.
        assert_abs_diff_eq!(f.indicator, 2.0 * 0.288 / 1.0, epsilon = 1e-12);
        assert!(f.h00.is_none());
        let (chb, polb) = balanced_point();
        let fb = flow_constants(&chb, &polb, [0.06, 0.3]).unwrap();
        assert_eq!(fb.regime, Regime::Balanced);
        let rho = 0.06 / (0.09 / 0.28) + 0.3;
        assert_abs_diff_eq!(fb.h00.unwrap(), 1.0 - rho, epsilon = 1e-12);
    }

    #[test]
    fn flow_constants_reject_unstable_rates() {
        let (ch, pol) = symmetric_capture();
        assert!(flow_constants(&ch, &pol, [0.5, 0.5]).is_err());
    }

    #[test]
    fn zero_rates_give_unit_empty_probability() {
        let (ch, pol) = symmetric_capture();
        let f = flow_constants(&ch, &pol, [0.0, 0.0]).unwrap();
        assert_eq!(f.rho, 0.0);
        assert_eq!(f.h00, Some(1.0));
    }

    #[test]
    fn pole_polynomials_positive_and_candidate_found() {
        let (ch, pol) = symmetric_capture();
        let pa = pole_analysis(&ch, &pol, [0.05, 0.05]).unwrap();
        let z = pa.x_plane.pole_poly;
        assert!(z[0] > 0.0);
        assert!(z[0] + z[1] + z[2] > 0.0);
        let xbar = pa.x_plane.candidate.expect("pole candidate");
        assert_abs_diff_eq!(xbar, 1.54265, epsilon = 2e-4);
        // The candidate sits inside the contour, but the curve intersection
        // lands on the larger-modulus kernel branch, so the continued section
        // stays pole-free and the solver absorbs no pole factor.
        assert!(pa.x_plane.inside_contour);
        assert!(!pa.x_plane.on_small_branch);
        assert_eq!(pa.x_plane.r, 0);
        assert_eq!(pa.y_plane.r, 0);
        // The intersection zeroes the leading coefficient and lies on the
        // kernel's larger branch.
        let kc = KernelCoeffs::from_system(&ch, &pol, [0.05, 0.05]).unwrap();
        let comps = composites2(&ch, &pol);
        let sp = super::side_params(&kc, &comps)[0];
        let ya = pa.x_plane.companion_value.expect("curve intersection");
        let a = sp.coeff_a(Complex64::new(xbar, 0.0), ya);
        assert!(a.norm() < 1e-9, "leading coefficient at candidate = {a}");
        let pair = kc.roots_in_y(Complex64::new(xbar, 0.0));
        let large = pair.large.expect("two kernel roots");
        assert_abs_diff_eq!(ya, large.re, epsilon = 1e-6 * large.norm());
    }

    #[test]
    fn solver_rejects_rates_beyond_the_busy_service_rate() {
        let (ch, pol) = symmetric_capture();
        // The busy service rate is 0.288 for both users; 0.3 exceeds it.
        let err = solve(&ch, &pol, [0.3, 0.3], &BvpConfig::default()).unwrap_err();
        match err {
            Error::Domain(msg) => {
                assert!(msg.contains("below the busy service rate"), "{msg}")
            }
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn winding_indices_distinguish_stable_and_unstable_rates() {
        let (ch, pol) = symmetric_capture();
        assert_eq!(winding_indices(&ch, &pol, [0.05, 0.05]).unwrap(), [0, 0]);
        assert_eq!(winding_indices(&ch, &pol, [0.2, 0.2]).unwrap(), [0, 0]);
        let w = winding_indices(&ch, &pol, [0.3, 0.3]).unwrap();
        assert!(w[0] < 0 && w[1] < 0, "winding at unstable rates = {w:?}");
    }

    #[test]
    fn sine_series_round_trips() {
        let n = 64;
        let tau = 2.0 * std::f64::consts::PI;
        let data: Vec<f64> = (0..n)
            .map(|j| {
                let p = tau * j as f64 / n as f64;
                0.3 * p.sin() - 0.08 * (3.0 * p).sin()
            })
            .collect();
        let (coeffs, defect) = sine_series(&data).unwrap();
        assert!(defect < 1e-12);
        assert_abs_diff_eq!(coeffs[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(coeffs[3], -0.08, epsilon = 1e-12);
        // Completion at the boundary reproduces the data in the imaginary part.
        for j in 0..n {
            let t = Complex64::from_polar(1.0, tau * j as f64 / n as f64);
            let f = eval_real_series(&coeffs, t);
            assert_abs_diff_eq!(f.im, data[j], epsilon = 1e-10);
        }
    }

    #[test]
    fn symmetric_capture_section_derivative_matches_exact_value() {
        let (ch, pol) = symmetric_capture();
        for lam in [0.05, 0.15] {
            let sol = solve(&ch, &pol, [lam, lam], &BvpConfig::default()).unwrap();
            // For a symmetric system with full adaptation the section
            // derivative at one has the exact value lambda (2 + lambda) / 2.
            let exact = lam * (2.0 + lam) / 2.0;
            let got = sol
                .section_m_derivative(Complex64::new(1.0, 0.0))
                .unwrap()
                .re;
            assert_abs_diff_eq!(got, exact, epsilon = 5e-6);
            assert_abs_diff_eq!(sol.h00(), sol.h00_mirror(), epsilon = 1e-6);
            assert!(sol.boundary_residual() < 1e-6, "{}", sol.boundary_residual());
        }
    }

    #[test]
    fn balanced_point_pins_empty_probability_to_load_deficit() {
        let (ch, pol) = balanced_point();
        let sol = solve(&ch, &pol, [0.06, 0.3], &BvpConfig::default()).unwrap();
        assert_eq!(sol.regime(), Regime::Balanced);
        let rho = 0.06 / (0.09 / 0.28) + 0.3;
        assert_abs_diff_eq!(sol.h00(), 1.0 - rho, epsilon = 1e-12);
        let [f1, f2] = sol.flow_residual();
        assert!(f1.abs() < 1e-8 && f2.abs() < 1e-8, "flow residual ({f1}, {f2})");
        assert!(sol.boundary_residual() < 1e-6, "{}", sol.boundary_residual());
        let joint = sol
            .joint(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))
            .unwrap();
        assert_abs_diff_eq!(joint.re, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn winding_counts_encirclements() {
        let n = 128;
        let tau = 2.0 * std::f64::consts::PI;
        let loop1: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, tau * j as f64 / n as f64) + 0.3)
            .collect();
        assert_eq!(unwrap_phases(&loop1).unwrap().1, 1);
        let loop0: Vec<Complex64> = (0..n)
            .map(|j| Complex64::from_polar(1.0, tau * j as f64 / n as f64) + 1.8)
            .collect();
        assert_eq!(unwrap_phases(&loop0).unwrap().1, 0);
    }
}
