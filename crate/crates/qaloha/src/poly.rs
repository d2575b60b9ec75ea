//! Small real-coefficient polynomial toolkit.
//!
//! The analytic pipeline repeatedly needs roots of low-degree polynomials
//! (quadratics in one variable of a bivariate kernel, a quartic discriminant,
//! resultant polynomials of degree ≤ 2). Roots are computed from the
//! companion-matrix eigenvalues and then polished with a few Newton steps so
//! that downstream interval logic can rely on ~1e-12 accuracy.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Dense univariate polynomial with real coefficients, lowest degree first:
/// `coeffs[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    /// Build from coefficients, lowest degree first. Trailing (highest-degree)
    /// zeros are trimmed.
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(0.0);
        }
    }

    /// Coefficient slice, lowest degree first.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Degree after trimming (the zero polynomial reports degree 0).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Evaluate at a real point (Horner).
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Evaluate at a complex point (Horner).
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Formal derivative.
    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::new(vec![0.0]);
        }
        let d: Vec<f64> = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, &c)| c * k as f64)
            .collect();
        Poly::new(d)
    }

    /// All complex roots (with multiplicity) via companion-matrix eigenvalues,
    /// each polished by Newton iteration. Roots of the zero polynomial or a
    /// constant are the empty set.
    pub fn roots(&self) -> Vec<Complex64> {
        // Strip exact zero roots first (zero constant coefficients) so the
        // companion matrix stays well conditioned.
        let mut coeffs = self.coeffs.clone();
        let mut zeros_at_origin = 0usize;
        while coeffs.len() > 1 && coeffs[0] == 0.0 {
            coeffs.remove(0);
            zeros_at_origin += 1;
        }
        let mut roots: Vec<Complex64> = (0..zeros_at_origin)
            .map(|_| Complex64::new(0.0, 0.0))
            .collect();
        let n = coeffs.len() - 1;
        if n == 0 {
            return roots;
        }
        let lead = coeffs[n];
        let mut comp = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -coeffs[i] / lead;
        }
        let eig = comp.complex_eigenvalues();
        let deriv = self.derivative();
        for ev in eig.iter() {
            roots.push(self.polish_root(Complex64::new(ev.re, ev.im), &deriv));
        }
        roots
    }

    /// A few Newton steps to refine an approximate root; falls back to the
    /// starting point if iteration does not improve the residual.
    fn polish_root(&self, start: Complex64, deriv: &Poly) -> Complex64 {
        let mut best = start;
        let mut best_res = self.eval_complex(best).norm();
        let mut z = start;
        for _ in 0..30 {
            let f = self.eval_complex(z);
            let fp = deriv.eval_complex(z);
            if fp.norm() == 0.0 {
                break;
            }
            let step = f / fp;
            z -= step;
            let res = self.eval_complex(z).norm();
            if res < best_res {
                best_res = res;
                best = z;
            }
            if step.norm() < 1e-15 * (1.0 + z.norm()) {
                break;
            }
        }
        // Snap tiny imaginary parts of essentially-real roots to the axis.
        let scale = 1.0 + best.norm();
        if best.im.abs() < 1e-10 * scale {
            let real_candidate = Complex64::new(best.re, 0.0);
            if self.eval_complex(real_candidate).norm() <= best_res.max(1e-30) * 1e3 {
                return real_candidate;
            }
        }
        best
    }

    /// Real roots (imaginary part below an absolute+relative tolerance),
    /// sorted ascending.
    pub fn real_roots(&self) -> Vec<f64> {
        let mut rs: Vec<f64> = self
            .roots()
            .into_iter()
            .filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.norm()))
            .map(|z| z.re)
            .collect();
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rs
    }
}

/// Solve `a x^2 + b x + c = 0` with real coefficients, returning the two
/// complex roots. For `a = 0` the single root is duplicated... never: callers
/// with possibly degenerate quadratics must branch themselves; this function
/// requires `a != 0`.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> (Complex64, Complex64) {
    debug_assert!(a != 0.0, "quadratic_roots requires a != 0");
    let disc = b * b - 4.0 * a * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        // Numerically stable: avoid cancellation between -b and the radical.
        let q = -0.5 * (b + b.signum() * sq);
        let (r1, r2) = if q == 0.0 {
            (0.0, 0.0)
        } else {
            (q / a, c / q)
        };
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        (Complex64::new(lo, 0.0), Complex64::new(hi, 0.0))
    } else {
        let sq = (-disc).sqrt();
        (
            Complex64::new(-b / (2.0 * a), -sq / (2.0 * a)),
            Complex64::new(-b / (2.0 * a), sq / (2.0 * a)),
        )
    }
}

/// Solve `a x^2 + b x + c = 0` for complex coefficients, used when the kernel
/// is evaluated at complex arguments. Returns both roots.
pub fn quadratic_roots_complex(
    a: Complex64,
    b: Complex64,
    c: Complex64,
) -> (Complex64, Complex64) {
    debug_assert!(a.norm() > 0.0, "quadratic_roots_complex requires a != 0");
    let disc = b * b - 4.0 * a * c;
    let sq = disc.sqrt();
    // Pick the sign that maximizes |b ± sq| to avoid cancellation.
    let s = if (b + sq).norm() >= (b - sq).norm() {
        sq
    } else {
        -sq
    };
    let q = -0.5 * (b + s);
    if q.norm() == 0.0 {
        let r = Complex64::new(0.0, 0.0);
        return (r, r);
    }
    (q / a, c / q)
}
