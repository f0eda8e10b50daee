//! Monotone estimators defined as slopes of concave majorants and convex
//! minorants of step processes, four observation models feeding them, and
//! Monte Carlo machinery for the limit law of their `L_p`-error.
//!
//! The geometric layers ([`stepfn`], [`envelope`], [`estimator`]) are
//! generic over [`Scalar`], so they run on `f32`, `f64` or exact rationals.
//! Everything statistical works in `f64`.

// `!(x > 0.0)` style guards are meant to reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod chernoff;
pub mod envelope;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod stepfn;

pub use asymptotics::{gof_test, limit_constants, normalized_statistic, GofResult, LimitConstants};
pub use chernoff::{estimate_constants, BrownianPath, ChernoffEstimate, ChernoffSettings};
pub use error::{Error, Result};
pub use estimator::{
    estimate, inverse_process, monotone_estimate, monotone_estimate_csd, Direction, MonotoneEstimate,
    Variant,
};
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentResult};
pub use models::{build_lambda_n, model_l, sample, Dataset, FamilyTag, ModelSpec};
pub use quadrature::QuadSettings;
pub use scalar::{Real, Scalar};
pub use stepfn::{lp_distance, Curvature, PiecewiseLinear, StepFunction, Target};

pub type StepFn64 = StepFunction<f64>;
pub type StepFn32 = StepFunction<f32>;
pub type Envelope64 = PiecewiseLinear<f64>;
pub type Envelope32 = PiecewiseLinear<f32>;
pub type Estimate64 = MonotoneEstimate<f64>;
pub type Estimate32 = MonotoneEstimate<f32>;

/// Exact arithmetic for the geometric layers.
pub type Rational = num_rational::Rational64;
pub type StepFnExact = StepFunction<Rational>;
pub type EstimateExact = MonotoneEstimate<Rational>;
