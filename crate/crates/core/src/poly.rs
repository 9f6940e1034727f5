//! Real root extraction for low-degree real polynomials.
//!
//! Roots come from the eigenvalues of the companion matrix of the
//! normalized polynomial, polished with a few Newton steps. Degenerate
//! leading coefficients degrade the degree; linear and constant cases
//! are handled directly.

use nalgebra::DMatrix;
use thiserror::Error;

/// A dense real polynomial, coefficients in ascending order:
/// `coeffs[k]` multiplies `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    /// Every coefficient is (numerically) zero: the equation holds for
    /// any argument and carries no root information.
    #[error("polynomial is identically zero")]
    IdenticallyZero,
}

/// Relative separation under which two real roots collapse to one.
const ROOT_SEPARATION: f64 = 1e-8;

/// Imaginary part (relative to magnitude) under which a companion-matrix
/// eigenvalue counts as a real root candidate. Deliberately loose: near
/// double roots split into conjugate pairs under round-off, and callers
/// filter candidates against their own residuals afterwards.
const IMAG_TOL: f64 = 1e-5;

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Degree after stripping numerically-zero leading coefficients.
    /// Returns `None` for the identically-zero polynomial.
    pub fn effective_degree(&self) -> Option<usize> {
        let scale = self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if scale == 0.0 {
            return None;
        }
        let cutoff = 1e-12 * scale;
        self.coeffs.iter().rposition(|c| c.abs() > cutoff)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    /// Value and first derivative at `x` in one Horner pass.
    pub fn eval_with_derivative(&self, x: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut deriv = 0.0;
        for &c in self.coeffs.iter().rev() {
            deriv = deriv * x + value;
            value = value * x + c;
        }
        (value, deriv)
    }

    /// All distinct real roots, ascending. Multiple roots are collapsed;
    /// near-real companion eigenvalues are kept and polished so that
    /// clustered roots are not silently dropped.
    pub fn real_roots(&self) -> Result<Vec<f64>, PolyError> {
        let degree = self.effective_degree().ok_or(PolyError::IdenticallyZero)?;
        let c = &self.coeffs;
        let mut roots: Vec<f64> = match degree {
            0 => Vec::new(),
            1 => vec![-c[0] / c[1]],
            2 => quadratic_real_roots(c[2], c[1], c[0]),
            _ => {
                let lead = c[degree];
                let mut companion = DMatrix::zeros(degree, degree);
                for i in 1..degree {
                    companion[(i, i - 1)] = 1.0;
                }
                for i in 0..degree {
                    companion[(i, degree - 1)] = -c[i] / lead;
                }
                companion
                    .complex_eigenvalues()
                    .iter()
                    .filter(|e| e.im.abs() <= IMAG_TOL * (1.0 + e.norm()))
                    .map(|e| e.re)
                    .collect()
            }
        };
        for r in roots.iter_mut() {
            *r = self.polish(*r);
        }
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        roots.dedup_by(|a, b| (*a - *b).abs() <= ROOT_SEPARATION * (1.0 + a.abs().max(b.abs())));
        Ok(roots)
    }

    /// A few guarded Newton steps around `x0`.
    fn polish(&self, x0: f64) -> f64 {
        let mut x = x0;
        for _ in 0..3 {
            let (v, d) = self.eval_with_derivative(x);
            if v == 0.0 || d == 0.0 {
                break;
            }
            let step = v / d;
            if !step.is_finite() || step.abs() > 0.5 * (1.0 + x.abs()) {
                break;
            }
            x -= step;
        }
        if self.eval(x).abs() <= self.eval(x0).abs() {
            x
        } else {
            x0
        }
    }
}

/// Real roots of `a x^2 + b x + c` with a cancellation-safe formula.
pub fn quadratic_real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        if b == 0.0 {
            return Vec::new();
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-b / (2.0 * a)];
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    if r1 <= r2 {
        vec![r1, r2]
    } else {
        vec![r2, r1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_roots(roots: &[f64], lead: f64) -> Polynomial {
        let mut coeffs = vec![lead];
        for &r in roots {
            let mut next = vec![0.0; coeffs.len() + 1];
            for (i, &c) in coeffs.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * r;
            }
            coeffs = next;
        }
        Polynomial::new(coeffs)
    }

    #[test]
    fn cubic_with_symmetric_roots() {
        // x^3 - x = x (x - 1) (x + 1)
        let p = Polynomial::new(vec![0.0, -1.0, 0.0, 1.0]);
        assert_eq!(p.real_roots().unwrap(), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn degree_degradation_to_linear() {
        // 0 x^3 + 0 x^2 + 2 x + 4
        let p = Polynomial::new(vec![4.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.real_roots().unwrap(), vec![-2.0]);
    }

    #[test]
    fn identically_zero_is_an_error() {
        let p = Polynomial::new(vec![0.0, 0.0, 0.0, 0.0]);
        assert_eq!(p.real_roots().unwrap_err(), PolyError::IdenticallyZero);
    }

    #[test]
    fn planted_roots_recovered() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let deg = rng.gen_range(1..=6usize);
            let mut roots: Vec<f64> = (0..deg).map(|_| rng.gen_range(-5.0..5.0)).collect();
            roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // keep the planted roots separated so recovery accuracy is testable
            if roots.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-2) {
                continue;
            }
            let lead = rng.gen_range(0.5..2.0);
            let p = from_roots(&roots, lead);
            let found = p.real_roots().unwrap();
            assert_eq!(found.len(), roots.len(), "{roots:?} vs {found:?}");
            for (f, r) in found.iter().zip(&roots) {
                assert!(
                    (f - r).abs() <= 1e-10 * (1.0 + r.abs()),
                    "planted {r} recovered as {f}"
                );
            }
        }
    }

    #[test]
    fn double_root_not_dropped() {
        // (x - 1)^2 (x + 2): the double root must survive as one root.
        let p = from_roots(&[1.0, 1.0, -2.0], 1.0);
        let roots = p.real_roots().unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] + 2.0).abs() < 1e-8);
        assert!((roots[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_real_roots_quadratic() {
        let p = Polynomial::new(vec![1.0, 0.0, 1.0]); // x^2 + 1
        assert!(p.real_roots().unwrap().is_empty());
    }

    #[test]
    fn quadratic_cancellation_safe() {
        // x^2 - 1e8 x + 1: naive formula loses the small root.
        let roots = quadratic_real_roots(1.0, -1e8, 1.0);
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - 1e-8).abs() <= 1e-16);
        assert!((roots[1] - 1e8).abs() <= 1.0);
    }
}
