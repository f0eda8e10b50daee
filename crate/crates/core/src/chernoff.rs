//! Monte Carlo for `X(a) = argmax_u { -(u - a)² + W(u) }`.
//!
//! All `X(a)` of one path come from a single concave majorant. Maximising
//! `W(u) - c(u - a)²` over grid points is maximising `g(u) + 2cau` with
//! `g = W - cu²`, and the greatest maximiser of a linear tilt is the hull
//! vertex after the last segment whose slope is at least `-2ca`.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::majorant_vertices;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

const STREAM_TAG: &str = "chernoff";

/// Two-sided Brownian motion on `{-T, ..., -h, 0, h, ..., T}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    step: f64,
    half_steps: usize,
    values: Vec<f64>,
}

impl BrownianPath {
    fn grid_size(half_width: f64, step: f64) -> Result<usize> {
        if !(half_width > 0.0 && step > 0.0 && step <= half_width) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < h <= T, got h = {step}, T = {half_width}"
            )));
        }
        Ok(((half_width / step).round() as usize).max(1))
    }

    /// `W ≡ 0`.
    pub fn zero(half_width: f64, step: f64) -> Result<Self> {
        let m = Self::grid_size(half_width, step)?;
        Ok(BrownianPath {
            step,
            half_steps: m,
            values: vec![0.0; 2 * m + 1],
        })
    }

    /// Path from grid values, index `values.len() / 2` being `u = 0`.
    pub fn from_values(step: f64, values: Vec<f64>) -> Result<Self> {
        if values.len().is_multiple_of(2) || values.len() < 3 || !(step > 0.0) {
            return Err(Error::InvalidConfig(
                "need an odd number (>= 3) of grid values and h > 0".into(),
            ));
        }
        let m = values.len() / 2;
        if values[m] != 0.0 {
            return Err(Error::InvalidConfig("W(0) must be 0".into()));
        }
        Ok(BrownianPath {
            step,
            half_steps: m,
            values,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Effective `T`, a whole number of steps.
    pub fn half_width(&self) -> f64 {
        self.half_steps as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Grid location of index `i`.
    pub fn location(&self, i: usize) -> f64 {
        (i as f64 - self.half_steps as f64) * self.step
    }

    /// `W` at grid index `k` relative to the origin.
    pub fn at(&self, k: isize) -> f64 {
        self.values[(self.half_steps as isize + k) as usize]
    }

    /// The path `u ↦ W(u - kh) - W(-kh)`, reusing this path's increments
    /// where they exist and drawing fresh ones from `rng` elsewhere.
    pub fn shifted(&self, k: isize, rng: &mut Stream) -> BrownianPath {
        let m = self.half_steps as isize;
        let len = self.values.len();
        let sd = self.step.sqrt();
        // increment over [i-1, i] on the new grid, index i in 1..len
        let incs: Vec<f64> = (1..len as isize)
            .map(|i| {
                let j = i - k;
                if j >= 1 && j < len as isize {
                    self.values[j as usize] - self.values[j as usize - 1]
                } else {
                    sd * rng.sample::<f64, _>(StandardNormal)
                }
            })
            .collect();
        let mut values = vec![0.0; len];
        for i in (m + 1) as usize..len {
            values[i] = values[i - 1] + incs[i - 1];
        }
        for i in (0..m as usize).rev() {
            values[i] = values[i + 1] - incs[i];
        }
        BrownianPath {
            step: self.step,
            half_steps: self.half_steps,
            values,
        }
    }
}

/// Independent Gaussian increments outward from `W(0) = 0`.
pub fn simulate_path(half_width: f64, step: f64, rng: &mut Stream) -> Result<BrownianPath> {
    let mut path = BrownianPath::zero(half_width, step)?;
    let m = path.half_steps;
    let sd = step.sqrt();
    for i in m + 1..=2 * m {
        path.values[i] = path.values[i - 1] + sd * rng.sample::<f64, _>(StandardNormal);
    }
    for i in (0..m).rev() {
        path.values[i] = path.values[i + 1] + sd * rng.sample::<f64, _>(StandardNormal);
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax {
    pub location: f64,
    /// Maximiser within one step of `±T`.
    pub boundary: bool,
}

fn near_boundary(path: &BrownianPath, i: usize) -> bool {
    i <= 1 || i + 1 >= path.values.len() - 1
}

/// Greatest grid maximiser of `-(u - a)² + W(u)` by direct scan.
pub fn argmax_drifted(path: &BrownianPath, a: f64) -> Argmax {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, &w) in path.values.iter().enumerate() {
        let u = path.location(i);
        let v = w - (u - a) * (u - a);
        if v >= best {
            best = v;
            arg = i;
        }
    }
    Argmax {
        location: path.location(arg),
        boundary: near_boundary(path, arg),
    }
}

/// Concave majorant of `u ↦ W(u) - cu²`, answering argmax queries for any
/// drift centre.
#[derive(Debug, Clone)]
pub struct DriftedProfile {
    vertices: Vec<usize>,
    slopes: Vec<f64>,
    curvature: f64,
    path_len: usize,
    step: f64,
    half_steps: usize,
}

impl DriftedProfile {
    pub fn new(path: &BrownianPath, curvature: f64) -> Result<Self> {
        let pts: Vec<(f64, f64)> = path
            .values
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                let u = path.location(i);
                (u, w - curvature * u * u)
            })
            .collect();
        let vertices = majorant_vertices(&pts)?;
        let slopes = vertices
            .windows(2)
            .map(|v| (pts[v[1]].1 - pts[v[0]].1) / (pts[v[1]].0 - pts[v[0]].0))
            .collect();
        Ok(DriftedProfile {
            vertices,
            slopes,
            curvature,
            path_len: path.values.len(),
            step: path.step,
            half_steps: path.half_steps,
        })
    }

    /// Greatest grid maximiser of `W(u) - c(u - a)²`.
    pub fn argmax(&self, a: f64) -> Argmax {
        let threshold = -2.0 * self.curvature * a;
        let k = self.slopes.partition_point(|&s| s >= threshold);
        let i = self.vertices[k];
        Argmax {
            location: (i as f64 - self.half_steps as f64) * self.step,
            boundary: i <= 1 || i + 2 >= self.path_len,
        }
    }
}

/// Discretisation and Monte Carlo sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChernoffSettings {
    pub half_width: f64,
    pub step: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub reps: usize,
    pub batches: usize,
}

impl Default for ChernoffSettings {
    fn default() -> Self {
        ChernoffSettings {
            half_width: 6.0,
            step: 2e-3,
            a_max: 4.0,
            a_step: 0.1,
            reps: 200_000,
            batches: 100,
        }
    }
}

impl ChernoffSettings {
    /// `{0, a_step, ..., a_max}`.
    pub fn a_grid(&self) -> Vec<f64> {
        let k = (self.a_max / self.a_step).round() as usize;
        (0..=k).map(|j| j as f64 * self.a_step).collect()
    }

    fn validate(&self) -> Result<()> {
        BrownianPath::grid_size(self.half_width, self.step)?;
        if !(self.a_max > 0.0 && self.a_step > 0.0) {
            return Err(Error::InvalidConfig("a_max and a_step must be positive".into()));
        }
        // Window escape for large a is caught by the boundary rate instead.
        if self.a_max >= self.half_width {
            return Err(Error::InvalidConfig(format!(
                "a_max = {} must be below T = {}",
                self.a_max, self.half_width
            )));
        }
        if self.batches < 2 || self.reps < 2 * self.batches {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 batches and 2 replicates per batch, got {} reps in {} batches",
                self.reps, self.batches
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariancePoint {
    pub a: f64,
    pub cov: f64,
    pub se: f64,
}

/// Monte Carlo estimates of `E|X(0)|^p` and
/// `k_p = ∫_0^∞ cov(|X(0)|^p, |X(a) - a|^p) da`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffEstimate {
    pub p: f64,
    pub moment_p: f64,
    pub moment_p_se: f64,
    pub k_p: f64,
    pub k_p_se: f64,
    pub mean_x0: f64,
    pub mean_x0_se: f64,
    pub boundary_rate: f64,
    pub reps: usize,
    pub batches: usize,
    pub h: f64,
    pub t_half_width: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub seed: u64,
    pub covariance: Vec<CovariancePoint>,
}

#[derive(Debug, Clone, Default)]
struct Sums {
    m: f64,
    x0: f64,
    x0_sq: f64,
    y: Vec<f64>,
    xy: Vec<f64>,
    boundary: usize,
}

impl Sums {
    fn new(k: usize) -> Self {
        Sums {
            y: vec![0.0; k],
            xy: vec![0.0; k],
            ..Default::default()
        }
    }

    fn add(&mut self, o: &Sums) {
        self.m += o.m;
        self.x0 += o.x0;
        self.x0_sq += o.x0_sq;
        for (a, b) in self.y.iter_mut().zip(&o.y) {
            *a += b;
        }
        for (a, b) in self.xy.iter_mut().zip(&o.xy) {
            *a += b;
        }
        self.boundary += o.boundary;
    }

    fn moment(&self) -> f64 {
        self.y[0] / self.m
    }

    fn covariances(&self) -> Vec<f64> {
        let x = self.y[0];
        self.xy
            .iter()
            .zip(&self.y)
            .map(|(&xy, &y)| (xy - x * y / self.m) / (self.m - 1.0))
            .collect()
    }
}

fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

fn batch_se(estimates: &[f64]) -> f64 {
    let b = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / b;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (var / b).sqrt()
}

/// Runs `reps` coupled replicates split into `batches` contiguous batches.
/// Replicate `r` uses the stream `(seed, "chernoff", 0, r)`, so the paths do
/// not depend on `p` and results do not depend on the thread count.
pub fn estimate_constants(p: f64, settings: &ChernoffSettings, seed: u64) -> Result<ChernoffEstimate> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::ExponentRange { p, range: "[1, inf)" });
    }
    settings.validate()?;
    let grid = settings.a_grid();
    let k = grid.len();
    let b = settings.batches;
    let reps = settings.reps;

    let per_batch: Vec<Sums> = (0..b)
        .into_par_iter()
        .map(|batch| -> Result<Sums> {
            let mut s = Sums::new(k);
            for r in batch * reps / b..(batch + 1) * reps / b {
                let mut rng = stream(seed, STREAM_TAG, 0, r as u64);
                let path = simulate_path(settings.half_width, settings.step, &mut rng)?;
                let profile = DriftedProfile::new(&path, 1.0)?;
                let x0 = profile.argmax(0.0);
                let x0p = x0.location.abs().powf(p);
                let mut hit = x0.boundary;
                s.m += 1.0;
                s.x0 += x0.location;
                s.x0_sq += x0.location * x0.location;
                for (j, &a) in grid.iter().enumerate() {
                    let xa = if j == 0 { x0 } else { profile.argmax(a) };
                    hit |= xa.boundary;
                    let y = (xa.location - a).abs().powf(p);
                    s.y[j] += y;
                    s.xy[j] += x0p * y;
                }
                s.boundary += usize::from(hit);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    let mut total = Sums::new(k);
    for s in &per_batch {
        total.add(s);
    }
    let boundary_rate = total.boundary as f64 / reps as f64;
    if boundary_rate > 1e-3 {
        return Err(Error::WindowEscape { rate: boundary_rate });
    }

    let cov = total.covariances();
    let batch_cov: Vec<Vec<f64>> = per_batch.iter().map(Sums::covariances).collect();
    let batch_k: Vec<f64> = batch_cov.iter().map(|c| trapezoid(c, settings.a_step)).collect();
    let batch_moment: Vec<f64> = per_batch.iter().map(Sums::moment).collect();
    let batch_mean_x0: Vec<f64> = per_batch.iter().map(|s| s.x0 / s.m).collect();
    let covariance = grid
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let col: Vec<f64> = batch_cov.iter().map(|c| c[j]).collect();
            CovariancePoint {
                a,
                cov: cov[j],
                se: batch_se(&col),
            }
        })
        .collect();

    Ok(ChernoffEstimate {
        p,
        moment_p: total.moment(),
        moment_p_se: batch_se(&batch_moment),
        k_p: trapezoid(&cov, settings.a_step),
        k_p_se: batch_se(&batch_k),
        mean_x0: total.x0 / total.m,
        mean_x0_se: batch_se(&batch_mean_x0),
        boundary_rate,
        reps,
        batches: b,
        h: settings.step,
        t_half_width: settings.half_width,
        a_max: settings.a_max,
        a_step: settings.a_step,
        seed,
        covariance,
    })
}

/// Draws of the greatest maximiser of `W(u) - c(u - a)²` for each `a` in
/// `centres`, one vector per centre, on `reps` independent paths.
pub fn draw_argmax(
    half_width: f64,
    step: f64,
    curvature: f64,
    centres: &[f64],
    reps: usize,
    seed: u64,
    tag: &str,
) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = stream(seed, tag, 0, r as u64);
            let path = simulate_path(half_width, step, &mut rng)?;
            let profile = DriftedProfile::new(&path, curvature)?;
            Ok(centres.iter().map(|&a| profile.argmax(a).location).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..centres.len())
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect())
}

impl ChernoffEstimate {
    pub fn key(&self) -> CacheKey {
        CacheKey {
            p: self.p,
            half_width: self.t_half_width,
            step: self.h,
            a_max: self.a_max,
            a_step: self.a_step,
            reps: self.reps,
            batches: self.batches,
            seed: self.seed,
        }
    }

    /// `a,cov,se`.
    pub fn write_covariance_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["a", "cov", "se"])?;
        for c in &self.covariance {
            wr.write_record([c.a.to_string(), c.cov.to_string(), c.se.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Identifies a cached estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CacheKey {
    pub p: f64,
    pub half_width: f64,
    pub step: f64,
    pub a_max: f64,
    pub a_step: f64,
    pub reps: usize,
    pub batches: usize,
    pub seed: u64,
}

impl CacheKey {
    pub fn new(p: f64, settings: &ChernoffSettings, seed: u64) -> Self {
        CacheKey {
            p,
            half_width: settings.half_width,
            step: settings.step,
            a_max: settings.a_max,
            a_step: settings.a_step,
            reps: settings.reps,
            batches: settings.batches,
            seed,
        }
    }

    pub fn file_name(&self) -> String {
        format!(
            "chernoff_p{}_T{}_h{}_amax{}_astep{}_reps{}_b{}_seed{}.json",
            self.p, self.half_width, self.step, self.a_max, self.a_step, self.reps, self.batches, self.seed
        )
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(self.file_name())
    }
}

pub fn store_cached(dir: &Path, est: &ChernoffEstimate) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = est.key().path_in(dir);
    std::fs::write(&path, serde_json::to_vec_pretty(est)?)?;
    Ok(path)
}

/// Cached estimate for `key`, or [`Error::MissingChernoff`].
pub fn load_cached(dir: &Path, key: &CacheKey) -> Result<ChernoffEstimate> {
    let path = key.path_in(dir);
    match std::fs::read(&path) {
        Ok(bytes) => {
            let est: ChernoffEstimate = serde_json::from_slice(&bytes)?;
            if est.key() != *key {
                return Err(Error::InvalidConfig(format!(
                    "cache file {} holds a different estimate",
                    path.display()
                )));
            }
            Ok(est)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::MissingChernoff(path.display().to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

/// Loads the cached estimate or computes and stores it.
pub fn load_or_estimate(dir: &Path, p: f64, settings: &ChernoffSettings, seed: u64) -> Result<ChernoffEstimate> {
    match load_cached(dir, &CacheKey::new(p, settings, seed)) {
        Ok(est) => Ok(est),
        Err(Error::MissingChernoff(_)) => {
            let est = estimate_constants(p, settings, seed)?;
            store_cached(dir, &est)?;
            Ok(est)
        }
        Err(e) => Err(e),
    }
}
