//! The four observation models and their step estimators of the primitive.
//!
//! | family       | data                          | step process                     | time change `L`          |
//! |--------------|-------------------------------|----------------------------------|--------------------------|
//! | censorship   | `(X_i, δ_i)`, right-censored  | Nelson–Aalen, restricted to [0,1]| `∫ λ / ((1-F)(1-G))`     |
//! | poisson      | `n` event-time sequences      | averaged counting process        | `Λ`                      |
//! | regression   | `y_i = λ(i/n) + ε_i`          | normalised partial sums          | `∫ σ²`                   |
//! | density      | `X_i` in [0, 1]               | empirical distribution function  | `Λ`                      |
//!
//! In the censorship model `λ` is the hazard and failure times are drawn by
//! inverting `1 - exp(-Λ_ext)`, where `Λ_ext` continues `Λ` past 1 with the
//! constant hazard `λ(1)`.

use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Direction;
use crate::quadrature::{QuadSettings, Quadrature};
use crate::rng::Stream;
use crate::scalar::Scalar;
use crate::stepfn::StepFunction;

/// Closed-form curves on [0, 1], used for `λ` and for `σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curve {
    /// `intercept + slope * t`
    Linear { intercept: f64, slope: f64 },
    /// `scale * exp(rate * t)`
    Exponential { scale: f64, rate: f64 },
}

impl Curve {
    pub fn linear(intercept: f64, slope: f64) -> Self {
        Curve::Linear { intercept, slope }
    }

    pub fn constant(c: f64) -> Self {
        Curve::Linear {
            intercept: c,
            slope: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Curve::Linear { intercept, slope } => intercept + slope * t,
            Curve::Exponential { scale, rate } => scale * (rate * t).exp(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Curve::Linear { slope, .. } => slope,
            Curve::Exponential { scale, rate } => scale * rate * (rate * t).exp(),
        }
    }

    /// `∫_0^t`.
    pub fn primitive(&self, t: f64) -> f64 {
        match *self {
            Curve::Linear { intercept, slope } => intercept * t + 0.5 * slope * t * t,
            Curve::Exponential { scale, rate } => {
                if rate == 0.0 {
                    scale * t
                } else {
                    scale * (rate * t).exp_m1() / rate
                }
            }
        }
    }

    /// Smallest `t >= 0` with `primitive(t) = y`, assuming the curve is
    /// positive up to that point.
    pub fn inverse_primitive(&self, y: f64) -> Option<f64> {
        if y < 0.0 {
            return None;
        }
        let t = match *self {
            Curve::Linear { intercept, slope } => {
                if slope == 0.0 {
                    y / intercept
                } else {
                    let disc = intercept * intercept + 2.0 * slope * y;
                    if disc < 0.0 {
                        return None;
                    }
                    2.0 * y / (intercept + disc.sqrt())
                }
            }
            Curve::Exponential { scale, rate } => {
                if rate == 0.0 {
                    y / scale
                } else {
                    let arg = rate * y / scale;
                    if arg <= -1.0 {
                        return None;
                    }
                    arg.ln_1p() / rate
                }
            }
        };
        t.is_finite().then_some(t)
    }

    /// `(intercept, slope)` when the curve is affine.
    pub fn as_affine(&self) -> Option<(f64, f64)> {
        match *self {
            Curve::Linear { intercept, slope } => Some((intercept, slope)),
            Curve::Exponential { rate: 0.0, scale } => Some((scale, 0.0)),
            _ => None,
        }
    }

    fn extremes(&self, f: impl Fn(&Self, f64) -> f64) -> (f64, f64) {
        // Both curve kinds are monotone with monotone derivatives, so the
        // extremes on [0, 1] sit at the endpoints.
        let (a, b) = (f(self, 0.0), f(self, 1.0));
        (a.min(b), a.max(b))
    }
}

/// Distribution of the censoring times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Censoring {
    /// Deterministic censoring time `Y ≡ at`.
    Fixed { at: f64 },
    /// `Y ~ U[0, upper]`.
    Uniform { upper: f64 },
    /// `Y ~ Exp(rate)`.
    Exponential { rate: f64 },
}

impl Censoring {
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Censoring::Fixed { at } => {
                if t >= at {
                    1.0
                } else {
                    0.0
                }
            }
            Censoring::Uniform { upper } => (t / upper).clamp(0.0, 1.0),
            Censoring::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    -(-rate * t).exp_m1()
                }
            }
        }
    }

    /// `G(t-)`.
    pub fn cdf_left(&self, t: f64) -> f64 {
        match *self {
            Censoring::Fixed { at } => {
                if t > at {
                    1.0
                } else {
                    0.0
                }
            }
            _ => self.cdf(t),
        }
    }

    fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            Censoring::Fixed { at } => at,
            Censoring::Uniform { upper } => upper * rng.random::<f64>(),
            Censoring::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Censoring::Fixed { at } => at >= 1.0,
            Censoring::Uniform { upper } => upper > 1.0,
            Censoring::Exponential { rate } => rate > 0.0 && rate.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel(format!(
                "censoring {self:?} must satisfy G(1-) < 1"
            )))
        }
    }
}

/// Unit-variance noise, scaled by `σ(i/n)` in the regression model.
pub trait NoiseSampler: Sync {
    fn draw(&self, rng: &mut Stream) -> f64;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    #[default]
    Gaussian,
    /// Uniform on `[-√3, √3]`.
    Uniform,
}

impl NoiseSampler for Noise {
    fn draw(&self, rng: &mut Stream) -> f64 {
        match self {
            Noise::Gaussian => rng.sample(StandardNormal),
            Noise::Uniform => 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FamilyTag {
    Censorship,
    Poisson,
    Regression,
    Density,
}

impl FamilyTag {
    pub const ALL: [FamilyTag; 4] = [
        FamilyTag::Censorship,
        FamilyTag::Poisson,
        FamilyTag::Regression,
        FamilyTag::Density,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FamilyTag::Censorship => "censorship",
            FamilyTag::Poisson => "poisson",
            FamilyTag::Regression => "regression",
            FamilyTag::Density => "density",
        }
    }
}

impl std::fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyTag {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FamilyTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown family '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Censorship {
        censoring: Censoring,
    },
    Poisson,
    Regression {
        variance: Curve,
        #[serde(default)]
        noise: Noise,
    },
    Density,
}

impl Family {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Family::Censorship { .. } => FamilyTag::Censorship,
            Family::Poisson => FamilyTag::Poisson,
            Family::Regression { .. } => FamilyTag::Regression,
            Family::Density => FamilyTag::Density,
        }
    }
}

/// One model: family with its nuisance objects, the true `λ`, and the
/// monotonicity direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub family: Family,
    pub lambda: Curve,
    pub direction: Direction,
}

impl ModelSpec {
    /// Reference models: `λ(t) = 3/2 - t` in every family, uniform
    /// censoring on [0, 2], Gaussian regression noise with `σ = 0.3`.
    pub fn reference(tag: FamilyTag) -> Self {
        let family = match tag {
            FamilyTag::Censorship => Family::Censorship {
                censoring: Censoring::Uniform { upper: 2.0 },
            },
            FamilyTag::Poisson => Family::Poisson,
            FamilyTag::Regression => Family::Regression {
                variance: Curve::constant(0.09),
                noise: Noise::Gaussian,
            },
            FamilyTag::Density => Family::Density,
        };
        ModelSpec {
            family,
            lambda: Curve::linear(1.5, -1.0),
            direction: Direction::NonIncreasing,
        }
    }

    pub fn tag(&self) -> FamilyTag {
        self.family.tag()
    }

    /// `Λ(t) = ∫_0^t λ`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.lambda.primitive(t)
    }

    /// Structural requirements for sampling and estimation: monotone `λ`
    /// in the declared direction, positivity where the family needs it,
    /// unit mass for densities and `G(1-) < 1` for censoring.
    pub fn validate(&self) -> Result<()> {
        let (d0, d1) = self.lambda.extremes(Curve::derivative);
        let monotone = match self.direction {
            Direction::NonIncreasing => d1 <= 0.0,
            Direction::NonDecreasing => d0 >= 0.0,
        };
        if !monotone || !d0.is_finite() || !d1.is_finite() {
            return Err(Error::InvalidModel(format!(
                "lambda {:?} is not {:?} on [0, 1]",
                self.lambda, self.direction
            )));
        }
        let (min_lambda, _) = self.lambda.extremes(Curve::value);
        match &self.family {
            Family::Density => {
                let mass = self.cumulative(1.0);
                if (mass - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "density must integrate to 1 on [0, 1], got {mass}"
                    )));
                }
                if min_lambda < 0.0 {
                    return Err(Error::InvalidModel("density must be nonnegative".into()));
                }
            }
            Family::Poisson => {
                if min_lambda < 0.0 {
                    return Err(Error::InvalidModel("intensity must be nonnegative".into()));
                }
            }
            Family::Censorship { censoring } => {
                if min_lambda <= 0.0 {
                    return Err(Error::InvalidModel("hazard must be positive".into()));
                }
                censoring.validate()?;
            }
            Family::Regression { variance, .. } => {
                let (min_var, _) = variance.extremes(Curve::value);
                if min_var <= 0.0 {
                    return Err(Error::InvalidModel("variance must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Hypotheses of the limit theory on top of [`validate`](Self::validate):
    /// `inf |λ'| > 0`, and `inf λ > 0` for density, Poisson and censorship.
    pub fn check_assumptions(&self) -> Result<()> {
        self.validate()?;
        let (d0, d1) = self.lambda.extremes(Curve::derivative);
        let min_abs = if d0 * d1 <= 0.0 { 0.0 } else { d0.abs().min(d1.abs()) };
        if min_abs <= 0.0 {
            return Err(Error::InvalidModel(
                "inf |lambda'| must be positive".to_string(),
            ));
        }
        let (min_lambda, _) = self.lambda.extremes(Curve::value);
        if !matches!(self.family, Family::Regression { .. }) && min_lambda <= 0.0 {
            return Err(Error::InvalidModel("inf lambda must be positive".to_string()));
        }
        Ok(())
    }
}

/// Raw draws of one model.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    /// `(X_i, δ_i)`.
    Censorship(Vec<(f64, bool)>),
    /// Event times in [0, 1], one vector per process.
    Poisson(Vec<Vec<f64>>),
    /// `y_i` observed at `i / n`, `i = 1..=n`.
    Regression(Vec<f64>),
    /// `X_i` in [0, 1].
    Density(Vec<f64>),
}

impl Dataset {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Dataset::Censorship(_) => FamilyTag::Censorship,
            Dataset::Poisson(_) => FamilyTag::Poisson,
            Dataset::Regression(_) => FamilyTag::Regression,
            Dataset::Density(_) => FamilyTag::Density,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Dataset::Censorship(v) => v.len(),
            Dataset::Poisson(v) => v.len(),
            Dataset::Regression(v) => v.len(),
            Dataset::Density(v) => v.len(),
        }
    }

    /// CSV headers: censorship `x,delta`; regression `i,y`; density `x`;
    /// poisson `process_id,event_time`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        match self {
            Dataset::Censorship(obs) => {
                wr.write_record(["x", "delta"])?;
                for &(x, d) in obs {
                    wr.write_record([x.to_string(), u8::from(d).to_string()])?;
                }
            }
            Dataset::Poisson(procs) => {
                wr.write_record(["process_id", "event_time"])?;
                for (i, events) in procs.iter().enumerate() {
                    for &e in events {
                        wr.write_record([i.to_string(), e.to_string()])?;
                    }
                }
            }
            Dataset::Regression(ys) => {
                wr.write_record(["i", "y"])?;
                for (i, &y) in ys.iter().enumerate() {
                    wr.write_record([(i + 1).to_string(), y.to_string()])?;
                }
            }
            Dataset::Density(xs) => {
                wr.write_record(["x"])?;
                for &x in xs {
                    wr.write_record([x.to_string()])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads a dataset written by [`write_csv`](Self::write_csv). Processes
    /// without events leave no rows, so the Poisson reader needs the number
    /// of processes unless the last one had an event.
    pub fn read_csv<R: Read>(tag: FamilyTag, r: R, n_processes: Option<usize>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::DatasetMismatch(format!("bad {what} '{s}': {e}")))
        };
        let mut rows = Vec::new();
        for rec in rd.records() {
            rows.push(rec?);
        }
        let data = match tag {
            FamilyTag::Censorship => Dataset::Censorship(
                rows.iter()
                    .map(|r| {
                        let x = parse(&r[0], "x")?;
                        let d = match r[1].trim() {
                            "1" => true,
                            "0" => false,
                            other => {
                                return Err(Error::DatasetMismatch(format!(
                                    "delta must be 0 or 1, got '{other}'"
                                )))
                            }
                        };
                        Ok((x, d))
                    })
                    .collect::<Result<_>>()?,
            ),
            FamilyTag::Poisson => {
                let mut procs: Vec<Vec<f64>> = Vec::new();
                for r in &rows {
                    let id: usize = r[0].trim().parse().map_err(|e| {
                        Error::DatasetMismatch(format!("bad process_id '{}': {e}", &r[0]))
                    })?;
                    if procs.len() <= id {
                        procs.resize(id + 1, Vec::new());
                    }
                    procs[id].push(parse(&r[1], "event_time")?);
                }
                if let Some(n) = n_processes {
                    if n < procs.len() {
                        return Err(Error::DatasetMismatch(format!(
                            "process id {} exceeds the declared {} processes",
                            procs.len() - 1,
                            n
                        )));
                    }
                    procs.resize(n, Vec::new());
                }
                Dataset::Poisson(procs)
            }
            FamilyTag::Regression => {
                let mut ys = Vec::with_capacity(rows.len());
                for (k, r) in rows.iter().enumerate() {
                    let i: usize = r[0].trim().parse().map_err(|e| {
                        Error::DatasetMismatch(format!("bad index '{}': {e}", &r[0]))
                    })?;
                    if i != k + 1 {
                        return Err(Error::DatasetMismatch(format!(
                            "regression rows must be indexed 1..n in order, row {} has i = {}",
                            k + 1,
                            i
                        )));
                    }
                    ys.push(parse(&r[1], "y")?);
                }
                Dataset::Regression(ys)
            }
            FamilyTag::Density => Dataset::Density(
                rows.iter()
                    .map(|r| parse(&r[0], "x"))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(data)
    }
}

fn invert(curve: &Curve, y: f64, what: &str) -> Result<f64> {
    curve
        .inverse_primitive(y)
        .ok_or_else(|| Error::Bracketing(format!("cannot invert the primitive of {what} at {y}")))
}

/// Draws one dataset of size `n` from `spec`.
pub fn sample(spec: &ModelSpec, n: usize, rng: &mut Stream) -> Result<Dataset> {
    match &spec.family {
        Family::Regression { noise, .. } => sample_regression_with(spec, n, rng, noise),
        _ => sample_inner(spec, n, rng),
    }
}

fn sample_inner(spec: &ModelSpec, n: usize, rng: &mut Stream) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidModel("sample size must be positive".into()));
    }
    spec.validate()?;
    let lambda = &spec.lambda;
    let data = match &spec.family {
        Family::Density => {
            let xs = (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    invert(lambda, u, "the density").map(|x| x.clamp(0.0, 1.0))
                })
                .collect::<Result<_>>()?;
            Dataset::Density(xs)
        }
        Family::Poisson => {
            let total = spec.cumulative(1.0);
            let mut procs = Vec::with_capacity(n);
            for _ in 0..n {
                let mut events = Vec::new();
                let mut s = 0.0;
                loop {
                    s += rng.sample::<f64, _>(Exp1);
                    if s > total {
                        break;
                    }
                    events.push(invert(lambda, s, "the intensity")?.clamp(0.0, 1.0));
                }
                procs.push(events);
            }
            Dataset::Poisson(procs)
        }
        Family::Censorship { censoring } => {
            let cum1 = spec.cumulative(1.0);
            let tail_rate = lambda.value(1.0);
            let obs = (0..n)
                .map(|_| {
                    let e: f64 = rng.sample(Exp1);
                    let t = if e <= cum1 {
                        invert(lambda, e, "the hazard")?.min(1.0)
                    } else {
                        1.0 + (e - cum1) / tail_rate
                    };
                    let y = censoring.sample(rng);
                    Ok((t.min(y), t <= y))
                })
                .collect::<Result<_>>()?;
            Dataset::Censorship(obs)
        }
        Family::Regression { .. } => unreachable!("handled by sample_regression_with"),
    };
    Ok(data)
}

/// Regression draws with a caller-supplied unit-variance noise sampler.
pub fn sample_regression_with(
    spec: &ModelSpec,
    n: usize,
    rng: &mut Stream,
    noise: &dyn NoiseSampler,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidModel("sample size must be positive".into()));
    }
    spec.validate()?;
    let Family::Regression { variance, .. } = &spec.family else {
        return Err(Error::DatasetMismatch(format!(
            "regression sampler called for the {} family",
            spec.tag()
        )));
    };
    let ys = (1..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            spec.lambda.value(t) + variance.value(t).sqrt() * noise.draw(rng)
        })
        .collect();
    Ok(Dataset::Regression(ys))
}

fn sort_scalars<T: Scalar>(v: &mut [T]) {
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
}

/// Accumulates sorted `(time, increment)` pairs into a step function on
/// [0, 1]: increments at time 0 go to the initial value, times above 1 are
/// dropped, equal times are merged.
fn accumulate<T: Scalar>(events: impl Iterator<Item = (T, T)>) -> Result<StepFunction<T>> {
    let mut value_at_0 = T::zero();
    let mut knots: Vec<T> = Vec::new();
    let mut values: Vec<T> = Vec::new();
    let mut level = T::zero();
    for (t, inc) in events {
        if t > T::one() {
            break;
        }
        level = level + inc;
        if t <= T::zero() {
            value_at_0 = level;
        } else if knots.last() == Some(&t) {
            *values.last_mut().expect("paired with knots") = level;
        } else {
            knots.push(t);
            values.push(level);
        }
    }
    StepFunction::from_parts(knots, values, value_at_0)
}

/// Empirical distribution function of observations in [0, 1].
pub fn empirical_cdf<T: Scalar>(xs: &[T]) -> Result<StepFunction<T>> {
    let n = T::from_usize(xs.len()).expect("sample size fits the scalar");
    let mut sorted = xs.to_vec();
    sort_scalars(&mut sorted);
    if let Some(&x) = sorted.first() {
        if x < T::zero() {
            return Err(Error::DatasetMismatch(format!("observation {x:?} below 0")));
        }
    }
    accumulate(sorted.into_iter().map(|x| (x, T::one() / n)))
}

/// `Σ_i N_i / n` restricted to [0, 1]; `events` pools the event times of all
/// `n_processes` processes.
pub fn averaged_counting<T: Scalar>(events: &[T], n_processes: usize) -> Result<StepFunction<T>> {
    if n_processes == 0 {
        return Err(Error::DatasetMismatch("no processes".into()));
    }
    let n = T::from_usize(n_processes).expect("process count fits the scalar");
    let mut sorted = events.to_vec();
    sort_scalars(&mut sorted);
    accumulate(sorted.into_iter().map(|x| (x, T::one() / n)))
}

/// `(1/n) Σ_{i <= nt} y_i` with jumps at `i / n`.
pub fn partial_sums<T: Scalar>(ys: &[T]) -> Result<StepFunction<T>> {
    let n = ys.len();
    let nn = T::from_usize(n).expect("sample size fits the scalar");
    accumulate(
        ys.iter()
            .enumerate()
            .map(|(i, &y)| (T::from_usize(i + 1).expect("index fits") / nn, y / nn)),
    )
}

/// Nelson–Aalen estimator restricted to [0, 1].
///
/// Observations are processed in sorted order of `X` (stable for ties);
/// each uncensored one adds `1 / (number still at risk)`, and the at-risk
/// count drops by one after every observation. Equal uncensored times are
/// merged into one jump.
pub fn nelson_aalen<T: Scalar>(obs: &[(T, bool)]) -> Result<StepFunction<T>> {
    let mut sorted = obs.to_vec();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite data"));
    if let Some(&(x, _)) = sorted.first() {
        if x < T::zero() {
            return Err(Error::DatasetMismatch(format!("observation {x:?} below 0")));
        }
    }
    let n = sorted.len();
    accumulate(
        sorted
            .into_iter()
            .enumerate()
            .filter(|&(_, (_, d))| d)
            .map(|(k, (x, _))| (x, T::one() / T::from_usize(n - k).expect("count fits"))),
    )
}

/// Step estimator of `Λ` for the model's family.
pub fn build_lambda_n(spec: &ModelSpec, data: &Dataset) -> Result<StepFunction<f64>> {
    if spec.tag() != data.tag() {
        return Err(Error::DatasetMismatch(format!(
            "{} data for a {} model",
            data.tag(),
            spec.tag()
        )));
    }
    match data {
        Dataset::Censorship(obs) => nelson_aalen(obs),
        Dataset::Poisson(procs) => {
            let pooled: Vec<f64> = procs.iter().flatten().copied().collect();
            averaged_counting(&pooled, procs.len())
        }
        Dataset::Regression(ys) => partial_sums(ys),
        Dataset::Density(xs) => {
            if let Some(x) = xs.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
                return Err(Error::DatasetMismatch(format!(
                    "density observation {x} outside [0, 1]"
                )));
            }
            empirical_cdf(xs)
        }
    }
}

/// Time change `L` of the Gaussian approximation and its derivative.
#[derive(Debug, Clone)]
pub struct TimeChange {
    spec: ModelSpec,
}

/// `L` and `L'` for the model.
pub fn model_l(spec: &ModelSpec) -> TimeChange {
    TimeChange { spec: spec.clone() }
}

impl TimeChange {
    pub fn derivative(&self, t: f64) -> f64 {
        let lambda = &self.spec.lambda;
        match &self.spec.family {
            Family::Poisson | Family::Density => lambda.value(t),
            Family::Regression { variance, .. } => variance.value(t),
            Family::Censorship { censoring } => {
                lambda.value(t) * lambda.primitive(t).exp() / (1.0 - censoring.cdf_left(t))
            }
        }
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let lambda = &self.spec.lambda;
        match &self.spec.family {
            Family::Poisson | Family::Density => Ok(lambda.primitive(t)),
            Family::Regression { variance, .. } => Ok(variance.primitive(t)),
            Family::Censorship { .. } => {
                let q = Quadrature::<f64>::new(&QuadSettings::default())?;
                q.integrate_interval(&|u| self.derivative(u), 0.0, t)
            }
        }
    }
}
