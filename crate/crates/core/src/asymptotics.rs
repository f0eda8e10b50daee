//! Limit constants of the normalised `L_p`-error and the goodness-of-fit test.
//!
//! With `g(t) = |4 λ'(t) L'(t)|`,
//!
//! ```text
//! m_p   = E|X(0)|^p ∫_0^1 g^{p/3}
//! σ_p²  = 8 k_p ∫_0^1 g^{2(p-1)/3} L'
//! T_n   = n^{1/6} (n^{p/3} J_n - m_p) / σ_p,   J_n = ∫_0^1 |λ̂_n - λ|^p
//! ```

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::chernoff::ChernoffEstimate;
use crate::error::{Error, Result};
use crate::estimator::{estimate, Variant};
use crate::models::{build_lambda_n, model_l, Dataset, Family, ModelSpec};
use crate::quadrature::{QuadSettings, Quadrature};
use crate::stepfn::{lp_distance, StepFunction, Target};

/// Where the Monte Carlo inputs came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffRef {
    pub moment_p: f64,
    pub moment_p_se: f64,
    pub k_p: f64,
    pub k_p_se: f64,
    pub reps: usize,
    pub h: f64,
    pub t_half_width: f64,
    pub a_max: f64,
    pub seed: u64,
}

impl From<&ChernoffEstimate> for ChernoffRef {
    fn from(c: &ChernoffEstimate) -> Self {
        ChernoffRef {
            moment_p: c.moment_p,
            moment_p_se: c.moment_p_se,
            k_p: c.k_p,
            k_p_se: c.k_p_se,
            reps: c.reps,
            h: c.h,
            t_half_width: c.t_half_width,
            a_max: c.a_max,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConstants {
    pub p: f64,
    pub m_p: f64,
    pub sigma_p2: f64,
    pub chernoff: ChernoffRef,
    pub quadrature: QuadSettings,
}

impl LimitConstants {
    pub fn sigma_p(&self) -> f64 {
        self.sigma_p2.sqrt()
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if (1.0..2.5).contains(&p) {
        Ok(())
    } else {
        Err(Error::ExponentRange { p, range: "[1, 5/2)" })
    }
}

/// Constants from explicit `λ'` and `L'`; `breakpoints` must include 0 and 1
/// and every point where either function is not smooth.
pub fn constants_from(
    p: f64,
    chernoff: &ChernoffEstimate,
    lambda_prime: &dyn Fn(f64) -> f64,
    l_prime: &dyn Fn(f64) -> f64,
    breakpoints: &[f64],
    quad: &QuadSettings,
) -> Result<LimitConstants> {
    check_exponent(p)?;
    if chernoff.p != p {
        return Err(Error::InvalidConfig(format!(
            "Chernoff estimate is for p = {}, not p = {p}",
            chernoff.p
        )));
    }
    if !(chernoff.k_p > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "k_p estimate {} is not positive; rerun with more replicates",
            chernoff.k_p
        )));
    }
    let q = Quadrature::<f64>::new(quad)?;
    let g = |t: f64| (4.0 * lambda_prime(t) * l_prime(t)).abs();
    let mean_integral = q.integrate_partitioned(&|t| g(t).powf(p / 3.0), breakpoints)?;
    let e = 2.0 * (p - 1.0) / 3.0;
    let var_integral = q.integrate_partitioned(&|t| g(t).powf(e) * l_prime(t), breakpoints)?;
    let m_p = chernoff.moment_p * mean_integral;
    let sigma_p2 = 8.0 * chernoff.k_p * var_integral;
    if !(m_p > 0.0 && sigma_p2 > 0.0 && sigma_p2.is_finite()) {
        return Err(Error::DegenerateData(format!(
            "limit constants m_p = {m_p}, sigma_p^2 = {sigma_p2} are not positive"
        )));
    }
    Ok(LimitConstants {
        p,
        m_p,
        sigma_p2,
        chernoff: chernoff.into(),
        quadrature: quad.clone(),
    })
}

/// `m_p` and `σ_p²` for a fully specified model.
pub fn limit_constants(
    spec: &ModelSpec,
    p: f64,
    chernoff: &ChernoffEstimate,
    quad: &QuadSettings,
) -> Result<LimitConstants> {
    check_exponent(p)?;
    spec.check_assumptions()?;
    let l = model_l(spec);
    constants_from(
        p,
        chernoff,
        &|t| spec.lambda.derivative(t),
        &|t| l.derivative(t),
        &[0.0, 1.0],
        quad,
    )
}

/// `n^{1/6} (n^{p/3} J_n - m_p) / σ_p`.
pub fn normalized_statistic(jn: f64, n: usize, c: &LimitConstants) -> Result<f64> {
    if !(jn >= 0.0) || n == 0 {
        return Err(Error::InvalidConfig(format!("need J_n >= 0 and n >= 1, got {jn}, {n}")));
    }
    let sigma = c.sigma_p();
    if !(sigma > 0.0) {
        return Err(Error::Internal("sigma_p is zero".into()));
    }
    let n = n as f64;
    Ok(n.powf(1.0 / 6.0) * (n.powf(c.p / 3.0) * jn - c.m_p) / sigma)
}

/// One-sided p-value `1 - Φ(t)`.
pub fn upper_p_value(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub jn: f64,
    pub n: usize,
    pub p: f64,
    pub constants: LimitConstants,
}

impl GofResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `σ̂²(i/n)`: average of `(y_{j+1} - y_j)² / 2` over `|j - i| <= ⌈n^{1/3}⌉`,
/// as a step function with jumps halfway between design points.
pub fn difference_variance(ys: &[f64]) -> Result<StepFunction<f64>> {
    let n = ys.len();
    if n < 3 {
        return Err(Error::DegenerateData(format!(
            "need at least 3 regression responses, got {n}"
        )));
    }
    let d: Vec<f64> = ys.windows(2).map(|w| 0.5 * (w[1] - w[0]).powi(2)).collect();
    let mut prefix = vec![0.0; d.len() + 1];
    for (i, v) in d.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let bw = (n as f64).cbrt().ceil() as usize;
    // d[j - 1] sits at design point j, j = 1..n-1
    let local = |i: usize| {
        let lo = i.saturating_sub(bw).max(1);
        let hi = (i + bw).min(n - 1);
        (prefix[hi] - prefix[lo - 1]) / (hi + 1 - lo) as f64
    };
    let nf = n as f64;
    let knots: Vec<f64> = (1..n).map(|i| (i as f64 + 0.5) / nf).collect();
    let values: Vec<f64> = (2..=n).map(local).collect();
    let f = StepFunction::from_parts(knots, values, local(1))?;
    if f.values().iter().chain([&f.value_at_0()]).any(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateData("estimated noise variance vanishes".into()));
    }
    Ok(f)
}

/// Fraction of observations with `X >= t`, right-continuous version.
fn at_risk_fraction(obs: &[(f64, bool)]) -> Result<StepFunction<f64>> {
    let n = obs.len() as f64;
    let mut xs: Vec<f64> = obs.iter().map(|o| o.0).filter(|&x| x < 1.0).collect();
    xs.sort_by(f64::total_cmp);
    let total = obs.len();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut at_zero = total;
    let mut gone = 0usize;
    for x in xs {
        gone += 1;
        if x <= 0.0 {
            at_zero = total - gone;
        } else if knots.last() == Some(&x) {
            *values.last_mut().expect("paired") = (total - gone) as f64 / n;
        } else {
            knots.push(x);
            values.push((total - gone) as f64 / n);
        }
    }
    let f = StepFunction::from_parts(knots, values, at_zero as f64 / n)?;
    if !(f.terminal_value() > 0.0) {
        return Err(Error::DegenerateData(
            "no observation survives beyond t = 1; the censorship plug-in for L' is undefined"
                .into(),
        ));
    }
    Ok(f)
}

fn breakpoints_of(f: &StepFunction<f64>) -> Vec<f64> {
    let mut b = Vec::with_capacity(f.len() + 2);
    b.push(0.0);
    b.extend(f.knots().iter().copied().filter(|&k| k > 0.0 && k < 1.0));
    b.push(1.0);
    b
}

/// `J_n = ∫_0^1 |λ̂_n - λ0|^p` for the estimator built from `data`.
pub fn lp_error(
    data: &Dataset,
    spec0: &ModelSpec,
    p: f64,
    variant: Variant,
    quad: &QuadSettings,
) -> Result<f64> {
    let lambda_n = build_lambda_n(spec0, data)?;
    if let Dataset::Censorship(obs) = data {
        if !obs.iter().any(|&(x, d)| d && x <= 1.0) {
            return Err(Error::DegenerateData(
                "no uncensored observation in [0, 1]".into(),
            ));
        }
    }
    let est = estimate(&lambda_n, spec0.direction, variant)?;
    match spec0.lambda.as_affine() {
        Some((intercept, slope)) => lp_distance(est.steps(), &Target::Affine { intercept, slope }, p, quad),
        None => {
            let f = |t: f64| spec0.lambda.value(t);
            lp_distance(est.steps(), &Target::Smooth(&f), p, quad)
        }
    }
}

/// Limit constants under the simple null `spec0`, with nuisance plug-ins
/// for the regression variance and the censoring distribution.
pub fn null_constants(
    data: &Dataset,
    spec0: &ModelSpec,
    p: f64,
    chernoff: &ChernoffEstimate,
    quad: &QuadSettings,
) -> Result<LimitConstants> {
    let lambda_prime = |t: f64| spec0.lambda.derivative(t);
    match (data, &spec0.family) {
        (Dataset::Regression(ys), Family::Regression { .. }) => {
            spec0.check_assumptions()?;
            let var = difference_variance(ys)?;
            constants_from(p, chernoff, &lambda_prime, &|t| var.eval(t), &breakpoints_of(&var), quad)
        }
        (Dataset::Censorship(obs), Family::Censorship { .. }) => {
            spec0.check_assumptions()?;
            let risk = at_risk_fraction(obs)?;
            let l_prime = |t: f64| spec0.lambda.value(t) / risk.eval(t);
            constants_from(p, chernoff, &lambda_prime, &l_prime, &breakpoints_of(&risk), quad)
        }
        (d, _) if d.tag() == spec0.tag() => limit_constants(spec0, p, chernoff, quad),
        (d, _) => Err(Error::DatasetMismatch(format!(
            "{} data for a {} null",
            d.tag(),
            spec0.tag()
        ))),
    }
}

/// One-sided test of `λ = λ0`; large `L_p`-distances reject.
pub fn gof_test(
    data: &Dataset,
    spec0: &ModelSpec,
    p: f64,
    chernoff: &ChernoffEstimate,
    quad: &QuadSettings,
) -> Result<GofResult> {
    check_exponent(p)?;
    let jn = lp_error(data, spec0, p, Variant::Hat, quad)?;
    let constants = null_constants(data, spec0, p, chernoff, quad)?;
    let n = data.n();
    let statistic = normalized_statistic(jn, n, &constants)?;
    Ok(GofResult {
        statistic,
        p_value: upper_p_value(statistic),
        jn,
        n,
        p,
        constants,
    })
}
