//! Cadlag step functions and continuous piecewise-linear curves on [0, 1].

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{QuadSettings, Quadrature};
use crate::scalar::{Real, Scalar};

/// Right-continuous step function on [0, 1].
///
/// `values[i]` holds on `[knots[i], knots[i + 1])` and `value_at_0` on
/// `[0, knots[0])`. Knots are strictly increasing and lie in `(0, 1]`.
/// Evaluation outside [0, 1] extends the function by constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction<T> {
    knots: Vec<T>,
    values: Vec<T>,
    value_at_0: T,
}

impl<T: Scalar> StepFunction<T> {
    pub fn new<I>(pairs: I, value_at_0: T) -> Result<Self>
    where
        I: IntoIterator<Item = (T, T)>,
    {
        let (knots, values): (Vec<T>, Vec<T>) = pairs.into_iter().unzip();
        Self::from_parts(knots, values, value_at_0)
    }

    pub fn from_parts(knots: Vec<T>, values: Vec<T>, value_at_0: T) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidStep(format!(
                "{} knots but {} values",
                knots.len(),
                values.len()
            )));
        }
        for (i, &k) in knots.iter().enumerate() {
            if !(k > T::zero() && k <= T::one()) {
                return Err(Error::InvalidStep(format!(
                    "knot {i} at {k:?} is outside (0, 1]"
                )));
            }
            if i > 0 && !(knots[i - 1] < k) {
                return Err(Error::InvalidStep(format!(
                    "knots must be strictly increasing: knot {} at {:?} follows {:?}",
                    i,
                    k,
                    knots[i - 1]
                )));
            }
        }
        Ok(StepFunction {
            knots,
            values,
            value_at_0,
        })
    }

    pub fn constant(c: T) -> Self {
        StepFunction {
            knots: Vec::new(),
            values: Vec::new(),
            value_at_0: c,
        }
    }

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value_at_0(&self) -> T {
        self.value_at_0
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Value on the piece with index `i`, where piece 0 is `[0, knots[0])`.
    #[inline]
    fn piece_value(&self, i: usize) -> T {
        if i == 0 {
            self.value_at_0
        } else {
            self.values[i - 1]
        }
    }

    /// Number of knots `<= t`.
    #[inline]
    fn rank(&self, t: T) -> usize {
        self.knots.partition_point(|&k| k <= t)
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        self.piece_value(self.rank(t))
    }

    /// `lim_{u ↑ t} f(u)`; equals `f(0)` at `t = 0`.
    #[inline]
    pub fn left_limit(&self, t: T) -> T {
        self.piece_value(self.knots.partition_point(|&k| k < t))
    }

    /// Upper version: `max(f(t), f(t-))`, with `f(0)` at `t = 0`.
    pub fn eval_upper(&self, t: T) -> Result<T> {
        self.check_domain(t)?;
        Ok(self.eval(t).max_of(self.left_limit(t)))
    }

    /// Lower version: `min(f(t), f(t-))`, with `f(0)` at `t = 0`.
    pub fn eval_lower(&self, t: T) -> Result<T> {
        self.check_domain(t)?;
        Ok(self.eval(t).min_of(self.left_limit(t)))
    }

    fn check_domain(&self, t: T) -> Result<()> {
        if t >= T::zero() && t <= T::one() {
            Ok(())
        } else {
            Err(Error::OutOfDomain(
                t.to_f64().unwrap_or(f64::NAN),
            ))
        }
    }

    /// Value at 1.
    pub fn terminal_value(&self) -> T {
        self.values.last().copied().unwrap_or(self.value_at_0)
    }

    pub fn map_values<F: Fn(T) -> T>(&self, f: F) -> Self {
        StepFunction {
            knots: self.knots.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            value_at_0: f(self.value_at_0),
        }
    }

    pub fn negated(&self) -> Self {
        self.map_values(|v| -v)
    }

    pub fn is_nondecreasing(&self) -> bool {
        let mut prev = self.value_at_0;
        for &v in &self.values {
            if v < prev {
                return false;
            }
            prev = v;
        }
        true
    }

    pub fn is_nonincreasing(&self) -> bool {
        self.negated().is_nondecreasing()
    }

    /// Pieces as `(start, end, value)` over [0, 1], skipping empty ones.
    pub fn pieces(&self) -> impl Iterator<Item = (T, T, T)> + '_ {
        let n = self.knots.len();
        (0..=n).filter_map(move |i| {
            let start = if i == 0 { T::zero() } else { self.knots[i - 1] };
            let end = if i == n { T::one() } else { self.knots[i] };
            (end > start).then(|| (start, end, self.piece_value(i)))
        })
    }

    /// Same function on a finer knot set. Extra knots must lie in (0, 1].
    pub fn refined(&self, extra: &[T]) -> Result<Self> {
        let mut all: Vec<T> = self.knots.iter().chain(extra.iter()).copied().collect();
        all.sort_by(|a, b| a.partial_cmp(b).expect("knots are ordered"));
        all.dedup();
        let values = all.iter().map(|&k| self.eval(k)).collect();
        Self::from_parts(all, values, self.value_at_0)
    }

    /// Continuous piecewise-affine interpolation of the points `(t, f(t))`
    /// for `t` in `{0, 1}` and the knots.
    pub fn interpolant(&self) -> PiecewiseLinear<T> {
        let (xs, ys) = self.diagram_points().into_iter().unzip();
        PiecewiseLinear {
            xs,
            ys,
            curvature: Curvature::None,
        }
    }

    /// The cumulative-sum diagram: `(t, f(t))` at 0, every knot, and 1.
    pub fn diagram_points(&self) -> Vec<(T, T)> {
        let mut pts = Vec::with_capacity(self.knots.len() + 2);
        pts.push((T::zero(), self.value_at_0));
        pts.extend(self.knots.iter().copied().zip(self.values.iter().copied()));
        if self.knots.last().is_none_or(|&k| k < T::one()) {
            pts.push((T::one(), self.terminal_value()));
        }
        pts
    }
}

#[derive(Deserialize)]
struct StepRecord {
    t: f64,
    value: f64,
}

impl StepFunction<f64> {
    fn from_records(records: Vec<StepRecord>) -> Result<Self> {
        let mut iter = records.into_iter();
        let first = iter
            .next()
            .ok_or_else(|| Error::InvalidStep("no rows".to_string()))?;
        if first.t != 0.0 {
            return Err(Error::InvalidStep(format!(
                "first row must carry the value at t = 0, found t = {}",
                first.t
            )));
        }
        Self::new(iter.map(|r| (r.t, r.value)), first.value)
    }

    fn records(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        std::iter::once((0.0, self.value_at_0))
            .chain(self.knots.iter().copied().zip(self.values.iter().copied()))
    }

    /// CSV with header `t,value`; the first row has `t = 0` and holds the
    /// value before the first knot.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "value"])?;
        for (t, v) in self.records() {
            wr.write_record([t.to_string(), v.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let records = rd.deserialize().collect::<std::result::Result<Vec<StepRecord>, _>>()?;
        Self::from_records(records)
    }

    /// JSON array of `{"t": .., "value": ..}` records, same layout as the CSV.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.records()
                .map(|(t, v)| serde_json::json!({ "t": t, "value": v }))
                .collect(),
        )
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let records: Vec<StepRecord> = serde_json::from_value(value.clone())?;
        Self::from_records(records)
    }
}

/// Comparison function for [`lp_distance`].
pub enum Target<'a, T> {
    /// `g(t) = intercept + slope * t`; integrated in closed form.
    Affine { intercept: T, slope: T },
    /// Another step function; integrated exactly on the merged partition.
    Step(&'a StepFunction<T>),
    /// Any function; integrated by adaptive Gauss–Legendre per piece.
    Smooth(&'a dyn Fn(T) -> T),
}

impl<T: Scalar> Target<'_, T> {
    pub fn eval(&self, t: T) -> T {
        match self {
            Target::Affine { intercept, slope } => *intercept + *slope * t,
            Target::Step(s) => s.eval(t),
            Target::Smooth(f) => f(t),
        }
    }
}

/// `∫ |u|^p` from `lo` to `hi` divided by `hi - lo`, i.e. the mean of
/// `|u|^p` along a linear segment with end values `lo`, `hi`.
fn mean_abs_pow_linear<T: Real>(lo: T, hi: T, p: T) -> T {
    let scale = lo.abs().max(hi.abs());
    if scale == T::zero() {
        return T::zero();
    }
    let diff = hi - lo;
    let same_sign = lo * hi >= T::zero();
    if same_sign && diff.abs() <= T::of(1e-6) * scale {
        // Two-term expansion around the midpoint; the closed form below
        // cancels catastrophically here.
        let mid = (lo + hi) / T::of(2.0);
        let m = mid.abs();
        let d2 = diff * diff / T::of(24.0);
        return m.powf(p) + p * (p - T::one()) * m.powf(p - T::of(2.0)) * d2;
    }
    let anti = |u: T| u.signum() * u.abs().powf(p + T::one()) / (p + T::one());
    (anti(hi) - anti(lo)) / diff
}

/// `∫_0^1 |f(t) - g(t)|^p dt`, accumulated piece by piece over the knots
/// of `f`.
pub fn lp_distance<T: Real>(
    f: &StepFunction<T>,
    g: &Target<'_, T>,
    p: T,
    quad: &QuadSettings,
) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::ExponentRange {
            p: p.as_f64(),
            range: "[1, inf)",
        });
    }
    match g {
        Target::Affine { intercept, slope } => Ok(f.pieces().fold(T::zero(), |acc, (a, b, c)| {
            let da = c - (*intercept + *slope * a);
            let db = c - (*intercept + *slope * b);
            acc + (b - a) * mean_abs_pow_linear(da, db, p)
        })),
        Target::Step(other) => {
            let merged = f.refined(other.knots())?;
            Ok(merged.pieces().fold(T::zero(), |acc, (a, b, c)| {
                acc + (b - a) * (c - other.eval(a)).abs().powf(p)
            }))
        }
        Target::Smooth(h) => {
            let q = Quadrature::<T>::new(quad)?;
            let mut total = T::zero();
            for (a, b, c) in f.pieces() {
                let gap = |t: T| c - h(t);
                let integrand = |t: T| gap(t).abs().powf(p);
                let (ga, gb) = (gap(a), gap(b));
                if ga * gb < T::zero() {
                    let root = bisect_root(&gap, a, b);
                    total = total + q.integrate_interval(&integrand, a, root)?;
                    total = total + q.integrate_interval(&integrand, root, b)?;
                } else {
                    total = total + q.integrate_interval(&integrand, a, b)?;
                }
            }
            Ok(total)
        }
    }
}

fn bisect_root<T: Real, F: Fn(T) -> T>(f: &F, mut lo: T, mut hi: T) -> T {
    let f_lo_neg = f(lo) < T::zero();
    for _ in 0..200 {
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < T::zero()) == f_lo_neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / T::of(2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Curvature {
    Concave,
    Convex,
    None,
}

/// Continuous piecewise-affine curve through its vertices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseLinear<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    curvature: Curvature,
}

impl<T: Scalar> PiecewiseLinear<T> {
    pub fn new(vertices: Vec<(T, T)>, curvature: Curvature) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::TooFewPoints(vertices.len()));
        }
        for i in 1..vertices.len() {
            if !(vertices[i - 1].0 < vertices[i].0) {
                return Err(Error::UnsortedPoints(i));
            }
        }
        let (xs, ys): (Vec<T>, Vec<T>) = vertices.into_iter().unzip();
        let curve = PiecewiseLinear { xs, ys, curvature };
        if curvature != Curvature::None && !curve.has_curvature(curvature) {
            return Err(Error::InvalidStep(format!(
                "vertex slopes are not {curvature:?}"
            )));
        }
        Ok(curve)
    }

    pub(crate) fn from_sorted_unchecked(xs: Vec<T>, ys: Vec<T>, curvature: Curvature) -> Self {
        debug_assert!(xs.len() >= 2 && xs.len() == ys.len());
        PiecewiseLinear { xs, ys, curvature }
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn vertices(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn num_segments(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn slope(&self, segment: usize) -> T {
        (self.ys[segment + 1] - self.ys[segment]) / (self.xs[segment + 1] - self.xs[segment])
    }

    pub fn slopes(&self) -> Vec<T> {
        (0..self.num_segments()).map(|j| self.slope(j)).collect()
    }

    /// Linear interpolation; extrapolates with the end segments outside
    /// the vertex range.
    pub fn eval(&self, x: T) -> T {
        let m = self.xs.len();
        let j = self.xs.partition_point(|&v| v <= x).clamp(1, m - 1) - 1;
        self.ys[j] + self.slope(j) * (x - self.xs[j])
    }

    /// Checks the sign of every second difference of the vertex slopes.
    pub fn has_curvature(&self, c: Curvature) -> bool {
        let slopes = self.slopes();
        slopes.windows(2).all(|w| match c {
            Curvature::Concave => w[1] <= w[0],
            Curvature::Convex => w[1] >= w[0],
            Curvature::None => true,
        })
    }
}
