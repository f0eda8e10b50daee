//! Least concave majorant and greatest convex minorant of a point set.
//!
//! One left-to-right sweep with a vertex stack. A candidate vertex is
//! dropped when it lies on or below the chord joining its neighbours, so
//! collinear runs collapse into one segment and consecutive slopes are
//! strictly monotone. The orientation test uses products only, which keeps
//! it exact for rational scalars.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stepfn::{Curvature, PiecewiseLinear};

#[inline]
fn on_or_below_chord<T: Scalar>(a: (T, T), m: (T, T), b: (T, T)) -> bool {
    (m.1 - a.1) * (b.0 - a.0) <= (b.1 - a.1) * (m.0 - a.0)
}

fn validate<T: Scalar>(points: &[(T, T)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints(points.len()));
    }
    for i in 1..points.len() {
        if !(points[i - 1].0 < points[i].0) {
            return Err(Error::UnsortedPoints(i));
        }
    }
    Ok(())
}

/// Indices of the input points that are vertices of the least concave
/// majorant. Always contains the first and the last index.
pub fn majorant_vertices<T: Scalar>(points: &[(T, T)]) -> Result<Vec<usize>> {
    validate(points)?;
    Ok(sweep(points.len(), |i| points[i]))
}

fn sweep<T: Scalar, F: Fn(usize) -> (T, T)>(len: usize, point: F) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(len.min(1024));
    for i in 0..len {
        let p = point(i);
        while hull.len() >= 2 {
            let m = point(hull[hull.len() - 1]);
            let a = point(hull[hull.len() - 2]);
            if on_or_below_chord(a, m, p) {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Least concave function lying on or above every point.
pub fn concave_majorant<T: Scalar>(points: &[(T, T)]) -> Result<PiecewiseLinear<T>> {
    let idx = majorant_vertices(points)?;
    let (xs, ys) = idx.iter().map(|&i| points[i]).unzip();
    Ok(PiecewiseLinear::from_sorted_unchecked(
        xs,
        ys,
        Curvature::Concave,
    ))
}

/// Greatest convex function lying on or below every point, obtained by
/// reflecting the majorant of the negated points.
pub fn convex_minorant<T: Scalar>(points: &[(T, T)]) -> Result<PiecewiseLinear<T>> {
    validate(points)?;
    let idx = sweep(points.len(), |i| (points[i].0, -points[i].1));
    let (xs, ys) = idx.iter().map(|&i| points[i]).unzip();
    Ok(PiecewiseLinear::from_sorted_unchecked(
        xs,
        ys,
        Curvature::Convex,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn affine_points_are_their_own_majorant() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let env = concave_majorant(&pts).unwrap();
        // Collinear runs merge into one segment.
        assert_eq!(env.xs(), &[0.0, 5.0]);
        for &(x, y) in &pts {
            assert_eq!(env.eval(x), y);
        }
    }

    #[test]
    fn point_below_chord_is_dropped() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 2.0)];
        let env = concave_majorant(&pts).unwrap();
        assert_eq!(env.xs(), &[0.0, 2.0]);
        assert_eq!(env.slopes(), vec![1.0]);
    }

    #[test]
    fn minorant_keeps_the_dip() {
        let pts = [(0.0, 0.0), (1.0, 0.0), (2.0, 2.0)];
        let env = convex_minorant(&pts).unwrap();
        assert_eq!(env.xs(), &[0.0, 1.0, 2.0]);
        assert_eq!(env.curvature(), Curvature::Convex);
    }

    #[test]
    fn exact_collinear_rationals() {
        let r = |n: i64, d: i64| Rational64::new(n, d);
        let pts = [(r(0, 1), r(0, 1)), (r(1, 3), r(1, 9)), (r(2, 3), r(2, 9)), (r(1, 1), r(1, 3))];
        assert_eq!(majorant_vertices(&pts).unwrap(), vec![0, 3]);
    }

    #[test]
    fn errors() {
        assert!(matches!(concave_majorant(&[(0.0, 1.0)]), Err(Error::TooFewPoints(1))));
        assert!(matches!(
            concave_majorant(&[(0.0, 1.0), (0.0, 2.0)]),
            Err(Error::UnsortedPoints(1))
        ));
    }
}
