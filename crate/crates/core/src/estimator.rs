//! Monotone estimators defined as slopes of envelopes of a step process.
//!
//! For a nonincreasing target the estimate is the left-hand slope of the
//! least concave majorant of the step process; for a nondecreasing target
//! it is the slope of the greatest convex minorant. Two variants are built:
//!
//! * [`Variant::Hat`] envelopes the whole cadlag graph. At every jump both
//!   the value and the left limit are candidates, so the majorant sees the
//!   upper version `max(f(t), f(t-))` and the minorant the lower version.
//! * [`Variant::Tilde`] envelopes the cumulative-sum diagram only: the
//!   points `(t, f(t))` at 0, 1 and every jump.
//!
//! Both coincide when the process is nondecreasing and the target is
//! nonincreasing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::envelope::{concave_majorant, convex_minorant};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::stepfn::{PiecewiseLinear, StepFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    NonIncreasing,
    NonDecreasing,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::NonIncreasing => Direction::NonDecreasing,
            Direction::NonDecreasing => Direction::NonIncreasing,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "nonincreasing" | "decreasing" => Ok(Direction::NonIncreasing),
            "nondecreasing" | "increasing" => Ok(Direction::NonDecreasing),
            other => Err(format!("unknown direction '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Hat,
    Tilde,
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hat" => Ok(Variant::Hat),
            "tilde" => Ok(Variant::Tilde),
            other => Err(format!("unknown variant '{other}'")),
        }
    }
}

/// Slope of an envelope of a step process on [0, 1].
///
/// The estimate is left-continuous: at an envelope vertex it takes the
/// slope of the segment ending there, and at 0 the slope of the first
/// segment. Internally it is kept as the right-continuous step function
/// that agrees with it off the vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneEstimate<T> {
    steps: StepFunction<T>,
    envelope: PiecewiseLinear<T>,
    direction: Direction,
    variant: Variant,
}

impl<T: Scalar> MonotoneEstimate<T> {
    fn from_envelope(
        envelope: PiecewiseLinear<T>,
        direction: Direction,
        variant: Variant,
    ) -> Result<Self> {
        let slopes = envelope.slopes();
        let xs = envelope.xs();
        let inner = &xs[1..xs.len() - 1];
        let steps = StepFunction::from_parts(inner.to_vec(), slopes[1..].to_vec(), slopes[0])?;
        Ok(MonotoneEstimate {
            steps,
            envelope,
            direction,
            variant,
        })
    }

    /// Estimate at `t`, left-continuous; `t <= 0` gives the right limit at 0.
    #[inline]
    pub fn value(&self, t: T) -> T {
        if t <= T::zero() {
            self.steps.value_at_0()
        } else {
            self.steps.left_limit(t)
        }
    }

    /// Right-continuous version of the estimate (same values off the knots).
    pub fn steps(&self) -> &StepFunction<T> {
        &self.steps
    }

    pub fn envelope(&self) -> &PiecewiseLinear<T> {
        &self.envelope
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Envelope vertices strictly inside (0, 1): the points where the
    /// estimate may jump.
    pub fn jump_points(&self) -> &[T] {
        self.steps.knots()
    }

    pub fn slopes(&self) -> Vec<T> {
        self.envelope.slopes()
    }

    /// Primitive of the estimate sampled at the envelope vertices, as a step
    /// function anchored at `value_at_0`.
    pub fn primitive_steps(&self) -> Result<StepFunction<T>> {
        let mut pairs: Vec<(T, T)> = self.envelope.vertices().skip(1).collect();
        if let Some(last) = pairs.last() {
            if last.0 > T::one() {
                pairs.pop();
            }
        }
        StepFunction::new(pairs, self.envelope.ys()[0])
    }
}

#[derive(Serialize)]
struct EstimateJson<'a> {
    direction: Direction,
    variant: Variant,
    vertices: Vec<(f64, f64)>,
    slopes: &'a [f64],
}

impl MonotoneEstimate<f64> {
    /// CSV with header `t,slope`: one row per envelope segment, giving the
    /// segment start and its slope. The slope holds on `(t, t_next]`, and
    /// the first row (`t = 0`) also gives the value at 0.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "slope"])?;
        let xs = self.envelope.xs();
        for (j, s) in self.envelope.slopes().into_iter().enumerate() {
            wr.write_record([xs[j].to_string(), s.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let slopes = self.envelope.slopes();
        serde_json::to_value(EstimateJson {
            direction: self.direction,
            variant: self.variant,
            vertices: self.envelope.vertices().collect(),
            slopes: &slopes,
        })
        .expect("estimate serializes")
    }
}

/// Touch points of the full cadlag graph: the upper version at every jump
/// for a majorant, the lower version for a minorant.
fn graph_points<T: Scalar>(lambda_n: &StepFunction<T>, direction: Direction) -> Vec<(T, T)> {
    let pick = |a: T, b: T| match direction {
        Direction::NonIncreasing => a.max_of(b),
        Direction::NonDecreasing => a.min_of(b),
    };
    let mut pts = Vec::with_capacity(lambda_n.len() + 2);
    let mut prev = lambda_n.value_at_0();
    pts.push((T::zero(), prev));
    for (&k, &v) in lambda_n.knots().iter().zip(lambda_n.values()) {
        pts.push((k, pick(v, prev)));
        prev = v;
    }
    if lambda_n.knots().last().is_none_or(|&k| k < T::one()) {
        pts.push((T::one(), prev));
    }
    pts
}

fn envelope_of<T: Scalar>(pts: &[(T, T)], direction: Direction) -> Result<PiecewiseLinear<T>> {
    match direction {
        Direction::NonIncreasing => concave_majorant(pts),
        Direction::NonDecreasing => convex_minorant(pts),
    }
}

/// Left-hand slope of the least concave majorant (nonincreasing target) or
/// greatest convex minorant (nondecreasing target) of the cadlag graph of
/// `lambda_n`.
pub fn monotone_estimate<T: Scalar>(
    lambda_n: &StepFunction<T>,
    direction: Direction,
) -> Result<MonotoneEstimate<T>> {
    let pts = graph_points(lambda_n, direction);
    MonotoneEstimate::from_envelope(envelope_of(&pts, direction)?, direction, Variant::Hat)
}

/// Same as [`monotone_estimate`] but enveloping the cumulative-sum diagram
/// `{(t, lambda_n(t))}` over 0, 1 and the jump points only.
pub fn monotone_estimate_csd<T: Scalar>(
    lambda_n: &StepFunction<T>,
    direction: Direction,
) -> Result<MonotoneEstimate<T>> {
    let pts = lambda_n.diagram_points();
    MonotoneEstimate::from_envelope(envelope_of(&pts, direction)?, direction, Variant::Tilde)
}

pub fn estimate<T: Scalar>(
    lambda_n: &StepFunction<T>,
    direction: Direction,
    variant: Variant,
) -> Result<MonotoneEstimate<T>> {
    match variant {
        Variant::Hat => monotone_estimate(lambda_n, direction),
        Variant::Tilde => monotone_estimate_csd(lambda_n, direction),
    }
}

/// Greatest maximiser over `u` in [0, 1] of `upper(u) - a * u`, where
/// `upper` is the upper version of `lambda_n`.
///
/// The supremum is attained at 0, 1 or a jump, so only those are scanned.
pub fn inverse_process<T: Scalar>(lambda_n: &StepFunction<T>, a: T) -> T {
    let pts = graph_points(lambda_n, Direction::NonIncreasing);
    let mut best = pts[0];
    let mut best_val = best.1 - a * best.0;
    for &(u, y) in &pts[1..] {
        let v = y - a * u;
        if v >= best_val {
            best_val = v;
            best = (u, y);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn ecdf_two() -> StepFunction<f64> {
        StepFunction::new([(0.25, 0.5), (0.75, 1.0)], 0.0).unwrap()
    }

    #[test]
    fn grenander_on_two_points() {
        let est = monotone_estimate(&ecdf_two(), Direction::NonIncreasing).unwrap();
        let cases = [
            (0.0, 2.0),
            (0.1, 2.0),
            (0.25, 2.0),
            (0.26, 1.0),
            (0.75, 1.0),
            (0.76, 0.0),
            (1.0, 0.0),
        ];
        for (t, want) in cases {
            assert_eq!(est.value(t), want, "t = {t}");
        }
        assert_eq!(est.jump_points(), &[0.25, 0.75]);
    }

    #[test]
    fn affine_process_gives_constant_slope() {
        let n = 200;
        let c = 1.7;
        let pairs: Vec<(f64, f64)> = (1..=n)
            .map(|i| (i as f64 / n as f64, c * i as f64 / n as f64))
            .collect();
        let f = StepFunction::new(pairs, 0.0).unwrap();
        for dir in [Direction::NonIncreasing, Direction::NonDecreasing] {
            let est = monotone_estimate(&f, dir).unwrap();
            for i in 1..n {
                let t = (i as f64 + 0.5) / n as f64;
                // Within one knot width the slopes differ by at most c.
                assert!((est.value(t) - c).abs() <= c + 1e-12, "{dir:?} t={t}");
            }
            // Integrated error is one knot width.
            let total: f64 = est
                .steps()
                .pieces()
                .map(|(a, b, v)| (b - a) * (v - c).abs())
                .sum();
            assert!(total <= 2.0 * c / n as f64, "{dir:?} total {total}");
        }
    }

    #[test]
    fn convex_touch_points_give_single_chord() {
        let f = StepFunction::new([(0.3, 0.05), (0.6, 0.3), (1.0, 1.0)], 0.0).unwrap();
        let est = monotone_estimate(&f, Direction::NonIncreasing).unwrap();
        assert!(est.jump_points().is_empty());
        assert!((est.value(0.5) - 1.0f64).abs() < 1e-15);
    }

    #[test]
    fn variants_agree_on_nondecreasing_process() {
        let f = StepFunction::new([(0.1, 0.3), (0.35, 0.5), (0.5, 0.55), (0.8, 1.2)], 0.0).unwrap();
        let hat = monotone_estimate(&f, Direction::NonIncreasing).unwrap();
        let tilde = monotone_estimate_csd(&f, Direction::NonIncreasing).unwrap();
        assert_eq!(hat.steps(), tilde.steps());
        assert_eq!(hat.envelope().vertices().collect::<Vec<_>>(), tilde.envelope().vertices().collect::<Vec<_>>());
    }

    #[test]
    fn variants_differ_after_downward_jump() {
        let r = |n: i64, d: i64| Rational64::new(n, d);
        let f = StepFunction::new(
            [(r(1, 4), r(1, 1)), (r(1, 2), r(1, 5)), (r(3, 4), r(4, 5))],
            r(0, 1),
        )
        .unwrap();
        // Envelopes worked out by hand over the touch sets
        // hat:   (0,0) (1/4,1) (1/2,1) (3/4,4/5) (1,4/5)
        // tilde: (0,0) (1/4,1) (1/2,1/5) (3/4,4/5) (1,4/5)
        let hat = monotone_estimate(&f, Direction::NonIncreasing).unwrap();
        let tilde = monotone_estimate_csd(&f, Direction::NonIncreasing).unwrap();
        assert_eq!(hat.slopes(), vec![r(4, 1), r(0, 1), r(-2, 5)]);
        assert_eq!(tilde.slopes(), vec![r(4, 1), r(-4, 15)]);
        assert_eq!(hat.value(r(1, 2)), r(0, 1));
        assert_eq!(tilde.value(r(1, 2)), r(-4, 15));
        for est in [&hat, &tilde] {
            let s = est.slopes();
            assert!(s.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn flat_process_gives_zero() {
        let f = StepFunction::constant(2.5);
        for variant in [Variant::Hat, Variant::Tilde] {
            for dir in [Direction::NonIncreasing, Direction::NonDecreasing] {
                let est = estimate(&f, dir, variant).unwrap();
                assert_eq!(est.value(0.4), 0.0);
            }
        }
    }

    #[test]
    fn inverse_process_examples() {
        let n = 100;
        let pairs: Vec<(f64, f64)> = (1..=n).map(|i| (i as f64 / n as f64, 2.0 * i as f64 / n as f64)).collect();
        let f = StepFunction::new(pairs, 0.0).unwrap();
        assert_eq!(inverse_process(&f, 1.5), 1.0);
        assert_eq!(inverse_process(&f, 2.5), 0.0);
        // Ties: 0.25 - 0.25 == 1.0 - 0.75 == 0, greatest location wins.
        assert_eq!(inverse_process(&ecdf_two(), 1.0), 0.75);
        assert_eq!(inverse_process(&ecdf_two(), -0.5), 1.0);
    }

    #[test]
    fn minorant_reflects_majorant() {
        let f = StepFunction::new([(0.2, 0.4), (0.4, -0.1), (0.7, 0.9), (1.0, 0.3)], 0.1).unwrap();
        for variant in [Variant::Hat, Variant::Tilde] {
            let up = estimate(&f, Direction::NonDecreasing, variant).unwrap();
            let down = estimate(&f.negated(), Direction::NonIncreasing, variant).unwrap();
            assert_eq!(up.steps(), &down.steps().negated());
        }
    }

    #[test]
    fn csv_layout() {
        let est = monotone_estimate(&ecdf_two(), Direction::NonIncreasing).unwrap();
        let mut buf = Vec::new();
        est.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,slope\n0,2\n0.25,1\n0.75,0\n");
        let json = est.to_json();
        assert_eq!(json["slopes"], serde_json::json!([2.0, 1.0, 0.0]));
        assert_eq!(json["direction"], "nonincreasing");
    }
}
