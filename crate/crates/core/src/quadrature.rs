//! Piecewise Gauss–Legendre quadrature with an embedded error check.
//!
//! Every interval is integrated with a low- and a high-order rule; when the
//! two disagree beyond tolerance the interval is bisected. Integrands in
//! this crate are smooth within the pieces handed in, so refinement rarely
//! goes deeper than a few levels.

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSettings {
    pub low_order: usize,
    pub high_order: usize,
    pub rel_tol: f64,
    /// Absolute tolerance per unit interval length, for integrands near zero.
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Number of equal pieces the integration domain is cut into before
    /// adaptive refinement starts.
    pub pieces: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            low_order: 16,
            high_order: 32,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_depth: 40,
            pieces: 1,
        }
    }
}

/// Pair of Gauss–Legendre rules on [-1, 1], converted to the working scalar.
#[derive(Debug, Clone)]
pub struct Quadrature<T: Real> {
    low: Vec<(T, T)>,
    high: Vec<(T, T)>,
    rel_tol: T,
    abs_tol: T,
    max_depth: u32,
    pieces: usize,
}

fn rule<T: Real>(order: usize) -> Result<Vec<(T, T)>> {
    let gl = GaussLegendre::new(order).map_err(|_| {
        Error::InvalidConfig(format!("Gauss-Legendre order must be at least 2, got {order}"))
    })?;
    Ok(gl
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (T::of(x), T::of(w)))
        .collect())
}

impl<T: Real> Quadrature<T> {
    pub fn new(settings: &QuadSettings) -> Result<Self> {
        if settings.high_order <= settings.low_order {
            return Err(Error::InvalidConfig(
                "high_order must exceed low_order".to_string(),
            ));
        }
        if settings.pieces == 0 {
            return Err(Error::InvalidConfig("pieces must be positive".to_string()));
        }
        Ok(Quadrature {
            low: rule(settings.low_order)?,
            high: rule(settings.high_order)?,
            rel_tol: T::of(settings.rel_tol),
            abs_tol: T::of(settings.abs_tol),
            max_depth: settings.max_depth,
            pieces: settings.pieces,
        })
    }

    fn apply<F: Fn(T) -> T>(nodes: &[(T, T)], f: &F, a: T, b: T) -> T {
        let half = (b - a) / T::of(2.0);
        let mid = (a + b) / T::of(2.0);
        let sum = nodes
            .iter()
            .fold(T::zero(), |acc, &(x, w)| acc + w * f(mid + half * x));
        sum * half
    }

    /// Adaptive integral of `f` over `[a, b]` (no initial partition).
    pub fn integrate_interval<F: Fn(T) -> T>(&self, f: &F, a: T, b: T) -> Result<T> {
        if b <= a {
            return Ok(T::zero());
        }
        let mut total = T::zero();
        let mut stack = vec![(a, b, 0u32)];
        while let Some((lo, hi, depth)) = stack.pop() {
            let coarse = Self::apply(&self.low, f, lo, hi);
            let fine = Self::apply(&self.high, f, lo, hi);
            let err = (fine - coarse).abs();
            let tol = (self.rel_tol * fine.abs()).max(self.abs_tol * (hi - lo));
            if err <= tol {
                total = total + fine;
                continue;
            }
            if depth >= self.max_depth {
                return Err(Error::Quadrature {
                    a: lo.as_f64(),
                    b: hi.as_f64(),
                    error: err.as_f64(),
                });
            }
            let mid = (lo + hi) / T::of(2.0);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
        Ok(total)
    }

    /// Integral over `[a, b]` after cutting it into the configured number of
    /// equal pieces.
    pub fn integrate<F: Fn(T) -> T>(&self, f: &F, a: T, b: T) -> Result<T> {
        let k = T::of(self.pieces as f64);
        let width = (b - a) / k;
        let mut total = T::zero();
        for i in 0..self.pieces {
            let lo = a + width * T::of(i as f64);
            let hi = if i + 1 == self.pieces {
                b
            } else {
                a + width * T::of((i + 1) as f64)
            };
            total = total + self.integrate_interval(f, lo, hi)?;
        }
        Ok(total)
    }

    /// Integral over the union of consecutive intervals given by sorted
    /// `breakpoints`. Use this when `f` has kinks or jumps at known places.
    pub fn integrate_partitioned<F: Fn(T) -> T>(&self, f: &F, breakpoints: &[T]) -> Result<T> {
        let mut total = T::zero();
        for w in breakpoints.windows(2) {
            total = total + self.integrate_interval(f, w[0], w[1])?;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomials_are_exact() {
        let q = Quadrature::<f64>::new(&QuadSettings::default()).unwrap();
        let v = q.integrate(&|x: f64| x.powi(7) - 3.0 * x * x, 0.0, 2.0).unwrap();
        assert_relative_eq!(v, 32.0 - 8.0, max_relative = 1e-13);
    }

    #[test]
    fn refinement_handles_kinks() {
        let q = Quadrature::<f64>::new(&QuadSettings::default()).unwrap();
        let v = q.integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0).unwrap();
        assert_relative_eq!(v, 0.5 * (0.09 + 0.49), max_relative = 1e-10);
    }

    #[test]
    fn nonconvergence_reports_interval() {
        let settings = QuadSettings {
            max_depth: 2,
            ..QuadSettings::default()
        };
        let q = Quadrature::<f64>::new(&settings).unwrap();
        let err = q
            .integrate(&|x: f64| if x < 0.3 { 0.0 } else { 1.0 }, 0.0, 1.0)
            .unwrap_err();
        match err {
            Error::Quadrature { a, b, .. } => assert!(a <= 0.3 && 0.3 <= b),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn pieces_do_not_change_the_answer() {
        for pieces in [1, 3, 7] {
            let settings = QuadSettings {
                pieces,
                ..QuadSettings::default()
            };
            let q = Quadrature::<f64>::new(&settings).unwrap();
            let v = q.integrate(&|x: f64| x.exp(), 0.0, 1.0).unwrap();
            assert_relative_eq!(v, std::f64::consts::E - 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn single_precision_rules() {
        let q = Quadrature::<f32>::new(&QuadSettings {
            rel_tol: 1e-5,
            abs_tol: 1e-7,
            ..QuadSettings::default()
        })
        .unwrap();
        let v = q.integrate(&|x: f32| x * x, 0.0, 3.0).unwrap();
        assert!((v - 9.0).abs() < 1e-4);
    }
}
