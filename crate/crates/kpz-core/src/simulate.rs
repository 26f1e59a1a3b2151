//! Monte Carlo samplers for the growth models: exclusion processes run by
//! exponential-clock kinetic Monte Carlo, and polynuclear growth heights
//! via longest increasing subsequences of Poisson points (patience
//! sorting).
//!
//! Every particle owns the random stream `(seed, run, label)`, so a
//! particle's attempt times do not depend on how many other particles are
//! simulated.  With jumps that only ever consult the forward neighbor this
//! gives exact trajectory coupling in the particle count, which the tests
//! rely on.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::rng::SplitMix64;
use crate::specfun::bessel_i;
use crate::{Error, Result};

/// The five sampled models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    TasepStep,
    TasepAlt,
    PasepStep,
    PngDroplet,
    PngFlat,
}

impl SimModel {
    fn is_particle_model(self) -> bool {
        matches!(self, SimModel::TasepStep | SimModel::TasepAlt | SimModel::PasepStep)
    }
}

impl fmt::Display for SimModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SimModel::TasepStep => "tasep_step",
            SimModel::TasepAlt => "tasep_alt",
            SimModel::PasepStep => "pasep_step",
            SimModel::PngDroplet => "png_droplet",
            SimModel::PngFlat => "png_flat",
        };
        write!(f, "{name}")
    }
}

impl FromStr for SimModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tasep_step" => Ok(SimModel::TasepStep),
            "tasep_alt" => Ok(SimModel::TasepAlt),
            "pasep_step" => Ok(SimModel::PasepStep),
            "png_droplet" => Ok(SimModel::PngDroplet),
            "png_flat" => Ok(SimModel::PngFlat),
            other => Err(Error::Domain(format!(
                "unknown model {other:?} (expected tasep_step, tasep_alt, pasep_step, png_droplet or png_flat)"
            ))),
        }
    }
}

/// Label window simulated around the tagged particle when none is given:
/// twice the horizon plus a ten-standard-deviation margin, so no influence
/// from outside the window reaches the tag before the horizon.
pub fn default_window(t: f64) -> usize {
    (2.0 * t + 10.0 * t.sqrt()).ceil() as usize
}

/// One sampling job: model, observation time, tagged label, asymmetry,
/// replica count and seeding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub model: SimModel,
    pub t: f64,
    /// Tagged particle label; ignored by the growth models.
    pub n: usize,
    /// Right-jump probability; only the partially asymmetric model reads it.
    pub p: f64,
    pub runs: usize,
    pub seed: u64,
    /// Override of the simulated label window (particle models).
    pub window: Option<usize>,
}

impl SimConfig {
    /// A single-run config with the conventional tagged label `[t/4]`
    /// (particles), full asymmetry and seed 1.
    pub fn new(model: SimModel, t: f64) -> Result<Self> {
        let n = ((t / 4.0).floor() as usize).max(1);
        let config = SimConfig { model, t, n, p: 1.0, runs: 1, seed: 1, window: None };
        config.validate()?;
        Ok(config)
    }

    pub fn with_tag(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_asymmetry(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_runs(mut self, runs: usize) -> Self {
        self.runs = runs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = Some(window);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.t.is_finite() || self.t < 0.0 {
            return Err(Error::Domain(format!("time must be finite and >= 0, got {}", self.t)));
        }
        let t_max = if self.model.is_particle_model() { 1e4 } else { 1e3 };
        if self.t > t_max {
            return Err(Error::Domain(format!(
                "time {} above the supported maximum {t_max} for {}",
                self.t, self.model
            )));
        }
        if self.runs == 0 {
            return Err(Error::Domain("need at least one run".into()));
        }
        if self.model.is_particle_model() && self.n == 0 {
            return Err(Error::Domain("tagged label must be >= 1".into()));
        }
        if self.model == SimModel::PasepStep && !(self.p > 0.5 && self.p <= 1.0) {
            return Err(Error::Domain(format!(
                "right-jump probability must lie in (1/2, 1], got {}",
                self.p
            )));
        }
        if self.window == Some(0) {
            return Err(Error::Domain("window must be >= 1 when given".into()));
        }
        Ok(())
    }

    fn window_size(&self) -> usize {
        self.window.unwrap_or_else(|| default_window(self.t))
    }
}

/// Replica observables for one config, in the integer coordinate the
/// matching kernel model uses: the tagged particle's final position for
/// the step starts, its jump count (position plus twice the label) for
/// the alternating start, and the height at the origin for the growth
/// models.
#[derive(Debug, Clone)]
pub struct RunBatch {
    pub config: SimConfig,
    pub values: Vec<i64>,
}

impl RunBatch {
    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>()
            / self.values.len() as f64
    }
}

// min-heap event ordered by time, index as a deterministic tiebreak
struct Event {
    time: f64,
    idx: usize,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.idx == other.idx
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

struct ParticleSystem {
    lo: i64,
    pos: Vec<i64>,
}

impl ParticleSystem {
    /// Run the exclusion dynamics to the horizon.  Labels may be negative
    /// (the alternating start has particles on both sides of the origin).
    /// `right_prob = 1` disables left attempts without touching the random
    /// stream, so the totally asymmetric paths never pay for the direction
    /// draw.
    fn run(
        config: &SimConfig,
        run: u64,
        lo: i64,
        hi: i64,
        init: impl Fn(i64) -> i64,
        right_prob: f64,
        horizon: f64,
    ) -> Self {
        let m = (hi - lo + 1) as usize;
        let mut pos: Vec<i64> = (lo..=hi).map(init).collect();
        let mut clocks: Vec<SplitMix64> = (lo..=hi)
            .map(|label| SplitMix64::stream(config.seed, run, label as u64))
            .collect();
        let mut heap = BinaryHeap::with_capacity(m + 1);
        for (idx, clock) in clocks.iter_mut().enumerate() {
            heap.push(Event { time: clock.exp(1.0), idx });
        }
        while let Some(Event { time, idx }) = heap.pop() {
            if time > horizon {
                break;
            }
            let rightward = right_prob >= 1.0 || clocks[idx].next_f64() < right_prob;
            if rightward {
                if idx == 0 || pos[idx - 1] > pos[idx] + 1 {
                    pos[idx] += 1;
                }
            } else if idx == m - 1 || pos[idx + 1] < pos[idx] - 1 {
                pos[idx] -= 1;
            }
            debug_assert!(idx == 0 || pos[idx - 1] > pos[idx], "order violated at {idx}");
            heap.push(Event { time: time + clocks[idx].exp(1.0), idx });
        }
        ParticleSystem { lo, pos }
    }

    fn position(&self, label: i64) -> i64 {
        self.pos[(label - self.lo) as usize]
    }
}

/// Final positions of the simulated labels for the totally asymmetric
/// model, in label order starting at the returned `lo`.
pub fn tasep_positions(config: &SimConfig, run: u64) -> Result<(i64, Vec<i64>)> {
    config.validate()?;
    let n = config.n as i64;
    let (lo, hi, init): (i64, i64, fn(i64) -> i64) = match config.model {
        // the tagged step particle only ever consults labels 1..n
        SimModel::TasepStep => (1, n, |k| -k),
        // the alternating start fills both sides of the origin, so the
        // window reaches into negative labels
        SimModel::TasepAlt => (n - config.window_size() as i64, n, |k| -2 * k),
        other => {
            return Err(Error::Domain(format!(
                "tasep positions are defined for the totally asymmetric models, not {other}"
            )))
        }
    };
    let system = ParticleSystem::run(config, run, lo, hi, init, 1.0, config.t);
    Ok((lo, system.pos))
}

/// Tagged observable of one totally asymmetric run: the particle's final
/// position for the step start, its jump count for the alternating start.
pub fn tasep_run(config: &SimConfig, run: u64) -> Result<i64> {
    let (lo, pos) = tasep_positions(config, run)?;
    let x = pos[(config.n as i64 - lo) as usize];
    match config.model {
        SimModel::TasepStep => Ok(x),
        _ => Ok(x + 2 * config.n as i64),
    }
}

/// Final position of the tagged particle in one partially asymmetric run,
/// observed at the rescaled horizon `t / (2p - 1)`.
pub fn pasep_run(config: &SimConfig, run: u64) -> Result<i64> {
    config.validate()?;
    if config.model != SimModel::PasepStep {
        return Err(Error::Domain(format!(
            "pasep sampling is defined for pasep_step, not {}",
            config.model
        )));
    }
    let w = config.window_size() as i64;
    let n = config.n as i64;
    // the step start has no particles right of the origin: the label
    // window stops at 1, where the boundary is real rather than an
    // approximation
    let lo = (n - w).max(1);
    let hi = n + w;
    let gamma = 2.0 * config.p - 1.0;
    let system =
        ParticleSystem::run(config, run, lo, hi, |k| -k, config.p, config.t / gamma);
    Ok(system.position(n))
}

fn lis_height(points: &mut [(f64, f64)]) -> i64 {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut tails: Vec<f64> = Vec::new();
    for &(_, v) in points.iter() {
        let slot = tails.partition_point(|&w| w < v);
        if slot == tails.len() {
            tails.push(v);
        } else {
            tails[slot] = v;
        }
    }
    tails.len() as i64
}

/// Height at the origin of one growth run: the longest strictly increasing
/// chain of Poisson nucleations in the backward light cone, a square for
/// the droplet and a half-square triangle for the flat start.
pub fn png_height(config: &SimConfig, run: u64) -> Result<i64> {
    config.validate()?;
    let t = config.t;
    let mut rng = SplitMix64::stream(config.seed, run, 0);
    let mut points: Vec<(f64, f64)> = match config.model {
        SimModel::PngDroplet => {
            let count = rng.poisson(t * t);
            (0..count)
                .map(|_| (rng.uniform(0.0, t), rng.uniform(0.0, t)))
                .collect()
        }
        SimModel::PngFlat => {
            let count = rng.poisson(2.0 * t * t);
            (0..count)
                .map(|_| loop {
                    let u = rng.uniform(-t, t);
                    let v = rng.uniform(-t, t);
                    if u + v >= 0.0 {
                        break (u, v);
                    }
                })
                .collect()
        }
        other => {
            return Err(Error::Domain(format!(
                "growth sampling is defined for the png models, not {other}"
            )))
        }
    };
    Ok(lis_height(&mut points))
}

/// Exact droplet height distribution `P(h <= k)` for `k = 0..=max_height`
/// at small times, via the Toeplitz determinant
/// `e^{-t^2} det[I_{i-j}(2t)]_{k x k}` (Gessel's identity).
pub fn png_direct_oracle(t: f64, max_height: usize) -> Result<Vec<f64>> {
    if !(t > 0.0 && t <= 5.0) {
        return Err(Error::Domain(format!(
            "direct height distribution validated for t in (0, 5], got {t}"
        )));
    }
    let weights: Vec<f64> = (0..=max_height as u32)
        .map(|d| bessel_i(d, 2.0 * t))
        .collect::<Result<_>>()?;
    let scale = (-t * t).exp();
    let mut cdf = Vec::with_capacity(max_height + 1);
    for k in 0..=max_height {
        let det = if k == 0 {
            1.0
        } else {
            DMatrix::from_fn(k, k, |i, j| weights[i.abs_diff(j)])
                .lu()
                .determinant()
        };
        cdf.push(scale * det);
    }
    Ok(cdf)
}

fn run_one(config: &SimConfig, run: u64) -> Result<i64> {
    match config.model {
        SimModel::TasepStep | SimModel::TasepAlt => tasep_run(config, run),
        SimModel::PasepStep => pasep_run(config, run),
        SimModel::PngDroplet | SimModel::PngFlat => png_height(config, run),
    }
}

/// All replicas of a config, in run order.  Each run draws only from its
/// own streams, so the output is identical for any worker count.
pub fn batch(config: &SimConfig) -> Result<RunBatch> {
    config.validate()?;
    let values: Result<Vec<i64>> = (0..config.runs as u64)
        .into_par_iter()
        .map(|run| run_one(config, run))
        .collect();
    Ok(RunBatch { config: *config, values: values? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_names_round_trip() {
        for model in [
            SimModel::TasepStep,
            SimModel::TasepAlt,
            SimModel::PasepStep,
            SimModel::PngDroplet,
            SimModel::PngFlat,
        ] {
            assert_eq!(model.to_string().parse::<SimModel>().unwrap(), model);
        }
        assert!("ssep".parse::<SimModel>().is_err());
    }

    #[test]
    fn height_of_an_empty_field_is_zero() {
        let mut no_points: Vec<(f64, f64)> = vec![];
        assert_eq!(lis_height(&mut no_points), 0);
    }

    #[test]
    fn lis_matches_brute_force_on_small_sets() {
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let n = (rng.next_u64() % 9) as usize;
            let mut pts: Vec<(f64, f64)> =
                (0..n).map(|_| (rng.next_f64(), rng.next_f64())).collect();
            let mut best = 0usize;
            for mask in 0u32..(1 << n) {
                let chain: Vec<(f64, f64)> = (0..n)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| pts[i])
                    .collect();
                let mut sorted = chain.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let increasing = sorted
                    .windows(2)
                    .all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1);
                if increasing {
                    best = best.max(chain.len());
                }
            }
            assert_eq!(lis_height(&mut pts), best as i64);
        }
    }
}
