//! Conformal maps from the unit disk onto star-shaped planar domains.
//!
//! A domain is described by a positive polar radius function `rho(phi)` about
//! the origin.  The map `gamma0` sends the open unit disk onto the interior of
//! the curve `rho(phi)·e^{i·phi}` with `gamma0(0) = 0` and `gamma0'(0) > 0`.
//! Construction uses Theodorsen's integral equation for the boundary
//! correspondence `psi` (the angle on the target curve reached by the boundary
//! point `e^{i·phi}`), solved by a damped fixed-point iteration with the
//! discrete conjugation operator on a uniform grid.
//!
//! Once the correspondence is known, `log(gamma0(z)/z)` is recovered as a
//! truncated power series from the Fourier coefficients of `log rho(psi(phi))`.
//! Evaluating that series is uniformly accurate up to the closed disk and
//! differentiates exactly, which the downstream boundary-value solvers rely on
//! for derivative evaluations near the boundary.
//!
//! Only domains symmetric about the real axis are supported (the radius must
//! be an even function of the angle); this keeps the series real, so the map
//! commutes with complex conjugation and maps the real diameter onto a real
//! segment.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kernel::ContourGeometry;

/// Default number of uniform grid angles for the boundary correspondence.
pub const DEFAULT_GRID: usize = 512;
/// Default sup-norm tolerance on the fixed-point residual.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap for the damped fixed point.
pub const MAX_ITERATIONS: usize = 200;
/// Damping factor applied to each fixed-point update.
const DAMPING: f64 = 0.5;
/// Largest allowed deviation from even symmetry in `log rho(psi)`.
const SYMMETRY_TOL: f64 = 1e-8;

/// Discrete harmonic conjugation on a uniform grid of even length.
///
/// Interpolates the samples by the unique balanced trigonometric polynomial
/// and returns the boundary values of its harmonic conjugate (normalized to
/// zero mean).  Weights are the classical closed form: grid offsets of odd
/// parity carry weight `(2/n)·cot(pi·m/n)`, even offsets carry zero.
pub fn conjugate_samples(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    assert!(n >= 2 && n % 2 == 0, "conjugation grid must be even");
    let mut weight = vec![0.0f64; n];
    for (m, w) in weight.iter_mut().enumerate() {
        if m % 2 == 1 {
            *w = 2.0 / (n as f64) / (std::f64::consts::PI * m as f64 / n as f64).tan();
        }
    }
    (0..n)
        .map(|j| {
            let mut acc = 0.0;
            // v_j = sum over odd offsets m of w[m] * u[j - m mod n]
            let mut m = 1;
            while m < n {
                acc += weight[m] * u[(j + n - m) % n];
                m += 2;
            }
            acc
        })
        .collect()
}

/// Power-series coefficients (ascending) of the analytic completion
/// `F(z) = c_0 + c_1 z + …` whose real part interpolates `data` on the grid
/// `phi_j = 2 pi j / n` and whose imaginary part vanishes at the origin.
///
/// Requires the samples to be even in the angle (`data[j] == data[n-j]`), so
/// that all coefficients are real.
fn analytic_completion_series(data: &[f64]) -> Result<Vec<f64>> {
    let n = data.len();
    let scale = 1.0 + data.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut asym = 0.0f64;
    for j in 1..n {
        asym = asym.max((data[j] - data[n - j]).abs());
    }
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::invalid(format!(
            "contour is not symmetric about the real axis: angular samples of \
             log-radius deviate from even symmetry by {asym:.3e}"
        )));
    }
    let (cos_t, sin_t) = trig_tables(n);
    let mut coeffs = vec![0.0f64; n / 2 + 1];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut re = 0.0;
        let mut im = 0.0;
        for (j, d) in data.iter().enumerate() {
            let idx = (k * j) % n;
            re += d * cos_t[idx];
            im += d * sin_t[idx];
        }
        debug_assert!(im.abs() <= 1e-7 * (1.0 + re.abs()) * n as f64);
        let factor = if k == 0 || k == n / 2 { 1.0 } else { 2.0 };
        *c = factor * re / n as f64;
        let _ = im;
    }
    Ok(coeffs)
}

fn trig_tables(n: usize) -> (Vec<f64>, Vec<f64>) {
    let step = 2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|m| {
            let a = step * m as f64;
            (a.cos(), a.sin())
        })
        .unzip()
}

fn eval_series(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

fn eval_series_derivative(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * z + c * k as f64;
    }
    acc
}

/// Conformal map from the unit disk onto the interior of a star-shaped curve,
/// together with the boundary correspondence table and solver diagnostics.
#[derive(Debug, Clone)]
pub struct ConformalMap {
    /// Number of uniform grid angles.
    n: usize,
    /// Boundary correspondence `psi(phi_j)` on the uniform grid.
    psi: Vec<f64>,
    /// `log rho(psi(phi_j))` on the grid.
    log_rho: Vec<f64>,
    /// Real power-series coefficients of `log(gamma0(z)/z)`.
    series: Vec<f64>,
    /// Fixed-point iterations used.
    iterations: usize,
    /// Final sup-norm fixed-point residual.
    residual: f64,
}

/// Solves Theodorsen's equation for the boundary correspondence of the
/// conformal map onto the domain with polar radius `radius`.
///
/// `radius` must be positive, even in its angle argument, and smooth enough
/// for the damped iteration to contract (near-circular analytic curves
/// converge in a few dozen steps).  `n` is the uniform grid size (even, at
/// least 8) and `tol` the sup-norm stopping tolerance.
pub fn solve_theodorsen<F>(radius: F, n: usize, tol: f64) -> Result<ConformalMap>
where
    F: Fn(f64) -> Result<f64>,
{
    if n < 8 || n % 2 != 0 {
        return Err(Error::invalid(format!("grid size {n} must be even and at least 8")));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tolerance {tol} must be positive and finite")));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let phi: Vec<f64> = (0..n).map(|j| tau * j as f64 / n as f64).collect();
    let mut psi = phi.clone();
    let mut log_rho = vec![0.0f64; n];
    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=MAX_ITERATIONS {
        iterations = iter;
        for (lr, p) in log_rho.iter_mut().zip(&psi) {
            let r = radius(p.rem_euclid(tau))?;
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::invalid(format!(
                    "contour radius {r} at angle {p:.6} is not positive and finite"
                )));
            }
            *lr = r.ln();
        }
        let conj = conjugate_samples(&log_rho);
        let mut residual = 0.0f64;
        for j in 0..n {
            let target = phi[j] + conj[j];
            residual = residual.max((target - psi[j]).abs());
            psi[j] += DAMPING * (target - psi[j]);
        }
        history.push(residual);
        if residual < tol {
            converged = true;
            break;
        }
        if !residual.is_finite() {
            break;
        }
    }
    if !converged {
        let tail: Vec<String> = history
            .iter()
            .rev()
            .take(5)
            .rev()
            .map(|r| format!("{r:.3e}"))
            .collect();
        return Err(Error::no_convergence(format!(
            "boundary correspondence did not reach residual {tol:.1e} within \
             {MAX_ITERATIONS} iterations; last residuals [{}]",
            tail.join(", ")
        )));
    }
    // Refresh the log-radius table at the accepted correspondence.
    for (lr, p) in log_rho.iter_mut().zip(&psi) {
        *lr = radius(p.rem_euclid(tau))?.ln();
    }
    let residual = *history.last().unwrap();

    let series = analytic_completion_series(&log_rho)?;
    for j in 0..n - 1 {
        if psi[j + 1] <= psi[j] {
            return Err(Error::Inconsistent(format!(
                "boundary correspondence is not strictly increasing between grid \
                 angles {} and {} ({:.12} vs {:.12})",
                j,
                j + 1,
                psi[j],
                psi[j + 1]
            )));
        }
    }
    if psi[0].abs() > 1e3 * tol.max(1e-12) {
        return Err(Error::Inconsistent(format!(
            "boundary correspondence does not fix the positive real direction: \
             psi(0) = {:.3e}",
            psi[0]
        )));
    }
    Ok(ConformalMap {
        n,
        psi,
        log_rho,
        series,
        iterations,
        residual,
    })
}

/// Builds the disk map for a kernel real-section contour.
pub fn map_contour(geometry: &ContourGeometry, n: usize, tol: f64) -> Result<ConformalMap> {
    solve_theodorsen(|phi| geometry.rho(phi), n, tol)
}

impl ConformalMap {
    /// Number of uniform grid angles.
    pub fn grid_len(&self) -> usize {
        self.n
    }

    /// Uniform grid angle `phi_j`.
    pub fn grid_angle(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n as f64
    }

    /// Boundary correspondence table `psi(phi_j)`.
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Fixed-point iterations used by the solver.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Final fixed-point residual (sup norm).
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Derivative of the map at the origin (the conformal radius of the
    /// domain); positive by construction.
    pub fn capacity(&self) -> f64 {
        self.series[0].exp()
    }

    /// Image of the grid boundary point `e^{i phi_j}`, taken directly from the
    /// correspondence table (exact up to the solver residual).
    pub fn boundary_point(&self, j: usize) -> Complex64 {
        let r = self.log_rho[j].exp();
        Complex64::from_polar(r, self.psi[j])
    }

    /// All grid boundary images.
    pub fn boundary_points(&self) -> Vec<Complex64> {
        (0..self.n).map(|j| self.boundary_point(j)).collect()
    }

    /// Disk-to-domain map, defined on the closed unit disk.
    pub fn gamma0(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > 1.0 + 1e-10 {
            return Err(Error::Domain(format!(
                "point {z} lies outside the closed unit disk"
            )));
        }
        Ok(z * eval_series(&self.series, z).exp())
    }

    /// Derivative of the disk-to-domain map.
    pub fn gamma0_prime(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > 1.0 + 1e-10 {
            return Err(Error::Domain(format!(
                "point {z} lies outside the closed unit disk"
            )));
        }
        let p = eval_series(&self.series, z);
        let dp = eval_series_derivative(&self.series, z);
        Ok((Complex64::new(1.0, 0.0) + z * dp) * p.exp())
    }

    /// Real restriction of the map on the diameter `(-1, 1)`.
    fn gamma0_real(&self, t: f64) -> f64 {
        let mut acc = 0.0f64;
        for &c in self.series.iter().rev() {
            acc = acc * t + c;
        }
        t * acc.exp()
    }

    /// Inverse map: the disk point sent to `x` by `gamma0`.
    ///
    /// Real arguments inside the real diameter image are handled by monotone
    /// bisection; complex arguments by a safeguarded Newton iteration.
    pub fn gamma(&self, x: Complex64) -> Result<Complex64> {
        if x.norm() == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let scale = 1.0 + x.norm();
        if x.im.abs() <= 1e-13 * scale {
            let t = self.gamma_real(x.re)?;
            return Ok(Complex64::new(t, 0.0));
        }
        self.gamma_newton(x)
    }

    fn gamma_real(&self, x: f64) -> Result<f64> {
        let edge = 1.0 - 1e-12;
        let (flo, fhi) = (self.gamma0_real(-edge), self.gamma0_real(edge));
        if x <= flo || x >= fhi {
            return Err(Error::Domain(format!(
                "real point {x:.9} is outside the open real diameter image \
                 ({flo:.9}, {fhi:.9}) of the map"
            )));
        }
        let (mut lo, mut hi) = (-edge, edge);
        for _ in 0..90 {
            let mid = 0.5 * (lo + hi);
            if self.gamma0_real(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut t = 0.5 * (lo + hi);
        // Newton polish for round-trip accuracy near machine precision.
        for _ in 0..4 {
            let f = self.gamma0_real(t) - x;
            let d = self
                .gamma0_prime(Complex64::new(t, 0.0))
                .expect("interior point")
                .re;
            if d.abs() < 1e-14 {
                break;
            }
            let step = f / d;
            let next = t - step;
            if next.abs() < 1.0 {
                t = next;
            }
        }
        Ok(t)
    }

    fn gamma_newton(&self, x: Complex64) -> Result<Complex64> {
        let tol = 1e-12 * (1.0 + x.norm());
        let mut z = x / self.capacity();
        if z.norm() > 0.9 {
            z *= 0.9 / z.norm();
        }
        for _ in 0..80 {
            let f = self.gamma0(z)? - x;
            if f.norm() < tol {
                return Ok(z);
            }
            let d = self.gamma0_prime(z)?;
            if d.norm() < 1e-14 {
                return Err(Error::no_convergence(
                    "inverse map iteration hit a critical point of the disk map",
                ));
            }
            let mut step = f / d;
            let mut next = z - step;
            let mut halvings = 0;
            while next.norm() > 1.0 - 1e-12 {
                step *= 0.5;
                next = z - step;
                halvings += 1;
                if halvings > 50 {
                    return Err(Error::no_convergence(format!(
                        "inverse map iteration for {x} was pushed against the \
                         disk boundary"
                    )));
                }
            }
            z = next;
        }
        let res = (self.gamma0(z)? - x).norm();
        Err(Error::no_convergence(format!(
            "inverse map iteration for {x} did not converge; residual {res:.3e}"
        )))
    }

    /// Derivative of the inverse map at `x`: `1 / gamma0'(gamma(x))`.
    pub fn gamma_prime(&self, x: Complex64) -> Result<Complex64> {
        let z = self.gamma(x)?;
        let d = self.gamma0_prime(z)?;
        if d.norm() < 1e-14 {
            return Err(Error::no_convergence(
                "inverse map derivative requested at a critical point",
            ));
        }
        Ok(Complex64::new(1.0, 0.0) / d)
    }
}
