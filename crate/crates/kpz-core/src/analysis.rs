//! Exact one-point laws of the prelimit models on their own lattices,
//! comparisons against the limit laws, and least-squares recovery of the
//! macroscopic growth constants.
//!
//! The exact distributions come from truncated lattice Fredholm
//! determinants over a fixed window; with the window used here both tails
//! of every supported model are below 1e-12, so sums over the window act
//! as full expectations at working precision.  The growth-constant fit
//! removes the slowly decaying t^{1/3} fluctuation term with consecutive
//! finite differences of the mean before solving the normal equations,
//! and reads the fluctuation exponent from a log-log variance slope.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::fredholm::{law_cdf, law_moments, LimitLaw};
use crate::kernels::{k_rescaled_grid, KernelModel};
use crate::rng::SplitMix64;
use crate::shifts::{scaling_constants, Model};
use crate::stats::{jackknife, sample_moments};
use crate::{Error, Result};

/// Evaluation window for the exact lattice laws, chosen so the neglected
/// tail mass stays below 1e-12 for every model this crate constructs.
/// The left edge is exclusive, the right edge inclusive.
const S_MIN: f64 = -7.0;
const S_MAX: f64 = 8.0;

/// A probability law supported on a model's rescaled lattice.
///
/// `cdf[i]` is the probability of `Z <= points[i]`, and `below` is the
/// mass that falls strictly below the window (zero for empirical laws, a
/// truncation remainder for exact ones).  Points ascend with the constant
/// spacing `delta`.
#[derive(Debug, Clone)]
pub struct LatticeDistribution {
    pub model: KernelModel,
    pub delta: f64,
    pub points: Vec<f64>,
    pub cdf: Vec<f64>,
    pub below: f64,
}

fn window_points(model: &KernelModel) -> Result<(f64, Vec<f64>)> {
    let delta = model.lattice_delta()?;
    let anchor = model.snap(0.0)?;
    let lo = ((S_MIN - anchor) / delta).floor() as i64 + 1;
    let hi = ((S_MAX - anchor) / delta).floor() as i64;
    let points: Vec<f64> = (lo..=hi)
        .map(|k| anchor + k as f64 * delta)
        .filter(|&p| p > S_MIN && p <= S_MAX)
        .collect();
    if points.len() < 8 {
        return Err(Error::Domain(format!(
            "lattice spacing {delta} leaves too few points in the window"
        )));
    }
    Ok((delta, points))
}

/// Computes the exact one-point law of a prelimit model on its own
/// lattice.
///
/// The probability that no rescaled value exceeds `points[i]` is the
/// determinant of `I - delta K` over the lattice sites above `points[i]`,
/// so one kernel evaluation on the window followed by a sweep of trailing
/// principal minors yields the whole cdf.
pub fn make_distribution(model: &KernelModel) -> Result<LatticeDistribution> {
    let (delta, points) = window_points(model)?;
    let scaled = k_rescaled_grid(model, &points)? * delta;
    let n = points.len();
    let mut suffix = vec![1.0; n + 1];
    for i in (0..n).rev() {
        let m = n - i;
        let mut mat = DMatrix::<f64>::identity(m, m);
        for r in 0..m {
            for c in 0..m {
                mat[(r, c)] -= scaled[(i + r, i + c)];
            }
        }
        suffix[i] = mat.lu().determinant();
    }
    let below = suffix[0];
    let cdf = suffix[1..].to_vec();
    Ok(LatticeDistribution {
        model: *model,
        delta,
        points,
        cdf,
        below,
    })
}

/// Bins rescaled observations onto the model's lattice and returns the
/// empirical law on the same support as [`make_distribution`].
///
/// Observations outside the window are clamped into the boundary cells so
/// the empirical cdf still ends at exactly one.
pub fn from_samples(model: &KernelModel, rescaled: &[f64]) -> Result<LatticeDistribution> {
    if rescaled.is_empty() {
        return Err(Error::Domain("no observations to bin".into()));
    }
    let (delta, points) = window_points(model)?;
    let n = points.len();
    let mut counts = vec![0u64; n];
    for &z in rescaled {
        if !z.is_finite() {
            return Err(Error::Domain(format!("non-finite observation {z}")));
        }
        let idx = ((z - points[0]) / delta).round() as i64;
        counts[idx.clamp(0, n as i64 - 1) as usize] += 1;
    }
    let total = rescaled.len() as f64;
    let mut running = 0u64;
    let cdf = counts
        .iter()
        .map(|&c| {
            running += c;
            running as f64 / total
        })
        .collect();
    Ok(LatticeDistribution {
        model: *model,
        delta,
        points,
        cdf,
        below: 0.0,
    })
}

impl LatticeDistribution {
    /// Point masses at each lattice site; the first cell absorbs the
    /// below-window remainder of the cdf.
    pub fn masses(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cdf.len());
        let mut prev = self.below;
        for &c in &self.cdf {
            out.push(c - prev);
            prev = c;
        }
        out
    }

    /// Mean, variance, skewness, and excess kurtosis of the lattice law.
    /// Sums are left unnormalized; the window tails are below working
    /// precision for every supported model.
    pub fn moments(&self) -> [f64; 4] {
        lattice_moments(&self.points, &self.masses())
    }

    /// Piecewise-constant density heights `mass / delta` at each site.
    pub fn density_points(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .zip(self.masses())
            .map(|(&s, m)| (s, m / self.delta))
            .collect()
    }

    /// Draws one lattice value by cdf inversion.
    pub fn sample(&self, rng: &mut SplitMix64) -> f64 {
        let u = rng.next_f64();
        let idx = self.cdf.partition_point(|&c| c < u);
        self.points[idx.min(self.points.len() - 1)]
    }
}

/// Moment summary `[mean, variance, skewness, excess kurtosis]` of a mass
/// assignment on lattice points.
pub fn lattice_moments(points: &[f64], masses: &[f64]) -> [f64; 4] {
    assert_eq!(points.len(), masses.len());
    let mean: f64 = points.iter().zip(masses).map(|(&x, &m)| m * x).sum();
    let mut central = [0.0f64; 3];
    for (&x, &m) in points.iter().zip(masses) {
        let d = x - mean;
        central[0] += m * d * d;
        central[1] += m * d * d * d;
        central[2] += m * d * d * d * d;
    }
    let var = central[0];
    [
        mean,
        var,
        central[1] / var.powf(1.5),
        central[2] / (var * var) - 3.0,
    ]
}

/// Sup distances between a lattice cdf and a limit law over the sites in
/// `[lo, hi]`, read both at the half-spacing shift and at the bare site.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CdfComparison {
    pub shifted_gap: f64,
    pub unshifted_gap: f64,
    pub sites: usize,
}

/// Compares `dist.cdf` against `law` on every lattice site in `[lo, hi]`.
///
/// The shifted reading evaluates the law at `s + delta/2`; keeping the
/// bare reading alongside it shows how much of the lattice error the
/// half-spacing shift removes.
pub fn compare_cdf(
    dist: &LatticeDistribution,
    law: &LimitLaw,
    lo: f64,
    hi: f64,
) -> Result<CdfComparison> {
    let half = 0.5 * dist.delta;
    let mut shifted_gap = 0.0f64;
    let mut unshifted_gap = 0.0f64;
    let mut sites = 0usize;
    for (&s, &f) in dist.points.iter().zip(&dist.cdf) {
        if s < lo || s > hi {
            continue;
        }
        shifted_gap = shifted_gap.max((f - law_cdf(law, s + half)?).abs());
        unshifted_gap = unshifted_gap.max((f - law_cdf(law, s)?).abs());
        sites += 1;
    }
    if sites == 0 {
        return Err(Error::Domain(format!(
            "no lattice sites inside [{lo}, {hi}]"
        )));
    }
    Ok(CdfComparison {
        shifted_gap,
        unshifted_gap,
        sites,
    })
}

/// Coefficients of the least-squares fit `y = a d + b d^2`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ShiftFit {
    pub a_hat: f64,
    pub curvature: f64,
}

/// Fits `y = a d + b d^2` through samples `(d, y)` by normal equations.
///
/// The model has no constant term: the quantities fed to this fit vanish
/// with the spacing by construction, so a free intercept would only soak
/// up noise.
pub fn fit_shift(samples: &[(f64, f64)]) -> Result<ShiftFit> {
    if samples.len() < 2 {
        return Err(Error::Domain(
            "shift fit needs at least two spacings".into(),
        ));
    }
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(d, y) in samples {
        if d <= 0.0 {
            return Err(Error::Domain(format!("spacing {d} must be positive")));
        }
        s11 += d * d;
        s12 += d * d * d;
        s22 += d * d * d * d;
        b1 += d * y;
        b2 += d * d * y;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return Err(Error::Domain(
            "spacings are collinear; use at least two distinct values".into(),
        ));
    }
    Ok(ShiftFit {
        a_hat: (b1 * s22 - b2 * s12) / det,
        curvature: (s11 * b2 - s12 * b1) / det,
    })
}

/// Growth constants recovered from per-time mean and variance summaries.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GrowthFit {
    /// Linear growth speed of the mean.
    pub speed: f64,
    /// Log-log slope of the variance in time; 2/3 in this universality
    /// class.
    pub fluctuation_exponent: f64,
    /// Amplitude of the fluctuation scale inferred from the variance
    /// level against the supplied limit variance.
    pub amplitude: f64,
}

/// Fits growth constants to samples `(t, mean, variance)` with `t`
/// strictly increasing.
///
/// Consecutive finite differences of the mean cancel any constant offset
/// exactly and turn the `t^{1/3}` fluctuation term into the difference
/// quotient `g = (t_j^{1/3} - t_i^{1/3}) / (t_j - t_i)`, so a two-column
/// least-squares solve in `(1, g)` separates the speed from the
/// fluctuation coefficient.  Because `g` is built from the same samples
/// on both sides, a common fluctuation offset shared across times drops
/// out of the speed entirely.
pub fn fit_growth(samples: &[(f64, f64, f64)], limit_variance: f64) -> Result<GrowthFit> {
    if samples.len() < 3 {
        return Err(Error::Domain("growth fit needs at least three times".into()));
    }
    if limit_variance <= 0.0 {
        return Err(Error::Domain("limit variance must be positive".into()));
    }
    for w in samples.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::Domain("times must be strictly increasing".into()));
        }
    }
    let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for w in samples.windows(2) {
        let (ti, hi) = (w[0].0, w[0].1);
        let (tj, hj) = (w[1].0, w[1].1);
        let g = (tj.cbrt() - ti.cbrt()) / (tj - ti);
        let fd = (hj - hi) / (tj - ti);
        s00 += 1.0;
        s01 += g;
        s11 += g * g;
        b0 += fd;
        b1 += g * fd;
    }
    let det = s00 * s11 - s01 * s01;
    if det.abs() <= 1e-12 * s00 * s11 {
        return Err(Error::Domain(
            "finite-difference design is singular; spread the times out".into(),
        ));
    }
    let speed = (b0 * s11 - b1 * s01) / det;

    let (mut su, mut sv, mut suu, mut suv, mut cnt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut amplitude = 0.0;
    for &(t, _, var) in samples {
        if t <= 0.0 || var <= 0.0 {
            return Err(Error::Domain(
                "times and variances must be positive".into(),
            ));
        }
        let (u, v) = (t.ln(), var.ln());
        su += u;
        sv += v;
        suu += u * u;
        suv += u * v;
        cnt += 1.0;
        amplitude += (var / limit_variance).powf(1.5) / t;
    }
    let slope = (cnt * suv - su * sv) / (cnt * suu - su * su);
    Ok(GrowthFit {
        speed,
        fluctuation_exponent: slope,
        amplitude: amplitude / cnt,
    })
}

/// Which reading of the limit law a cdf comparison reports: at the
/// half-spacing shift or at the bare lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftMode {
    Midpoint,
    None,
}

impl fmt::Display for ShiftMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShiftMode::Midpoint => "midpoint",
            ShiftMode::None => "none",
        })
    }
}

impl FromStr for ShiftMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(ShiftMode::Midpoint),
            "none" => Ok(ShiftMode::None),
            other => Err(Error::Domain(format!(
                "unknown shift mode '{other}' (expected midpoint or none)"
            ))),
        }
    }
}

/// Kernel model whose lattice map matches `model` at time `t`.
///
/// The partially asymmetric chain reuses the step kernel with the lattice
/// shift that absorbs the asymmetry series; everything else maps onto its
/// own kernel family directly.
pub fn kernel_for(model: Model, t: f64, sigma: Option<f64>, p: Option<f64>) -> Result<KernelModel> {
    match model {
        Model::FlatPng => KernelModel::flat_png(t),
        Model::DropletPng => KernelModel::png_droplet(t),
        Model::TasepFlat => KernelModel::tasep_flat(t),
        Model::TasepStep | Model::Pasep => {
            let sc = scaling_constants(model, sigma, p)?;
            let kernel = KernelModel::tasep_step(t, sc.sigma.expect("sigma validated"))?;
            Ok(kernel.with_shift(sc.a))
        }
    }
}

/// One line of the empirical-versus-law moment table.
#[derive(Debug, Clone, Serialize)]
pub struct MomentRow {
    pub name: &'static str,
    pub empirical: f64,
    pub std_error: f64,
    pub law: f64,
    pub relative_error: f64,
}

/// Fitted growth constants together with a distribution-level comparison
/// of the largest-time batch against its limit law.  Single-batch reports
/// leave the growth fields empty.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluctuation_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a_hat: Option<f64>,
    pub shift: ShiftMode,
    pub max_cdf_gap: f64,
    pub moment_table: Vec<MomentRow>,
}

fn moment_rows(values: &[f64], targets: &[f64]) -> Result<Vec<MomentRow>> {
    let names = ["mean", "variance", "skewness", "kurtosis"];
    let blocks = 100.min(values.len() / 2).max(2);
    let mut rows = Vec::with_capacity(4);
    for (i, name) in names.into_iter().enumerate() {
        let (empirical, std_error) = jackknife(values, blocks, |v| sample_moments(v)[i])?;
        rows.push(MomentRow {
            name,
            empirical,
            std_error,
            law: targets[i],
            relative_error: (empirical - targets[i]) / targets[i].abs(),
        });
    }
    Ok(rows)
}

/// Empirical moments of rescaled observations with jackknife standard
/// errors, against the law's moments.
pub fn moment_table(values: &[f64], law: &LimitLaw) -> Result<Vec<MomentRow>> {
    moment_rows(values, &law_moments(law, 4)?)
}

/// Recovers the growth constants from replica batches at three or more
/// times and compares the largest-time batch against the limit law.
///
/// The speed comes from consecutive finite differences of the batch means,
/// the exponent and amplitude from the variance trend, and the lattice
/// shift from how the zero-shift rescaled mean approaches the law mean as
/// the spacing closes.  Batches may arrive in any order; times must be
/// distinct.
pub fn fit_protocol(
    batches: &[(f64, Vec<i64>)],
    model: Model,
    sigma: Option<f64>,
    p: Option<f64>,
    law: &LimitLaw,
    shift: ShiftMode,
) -> Result<FitReport> {
    if batches.len() < 3 {
        return Err(Error::Domain("growth fit needs at least three times".into()));
    }
    let mut order: Vec<usize> = (0..batches.len()).collect();
    order.sort_by(|&a, &b| batches[a].0.total_cmp(&batches[b].0));
    let targets = law_moments(law, 4)?;

    let mut growth = Vec::with_capacity(batches.len());
    let mut shift_pts = Vec::with_capacity(batches.len());
    for &i in &order {
        let (t, values) = &batches[i];
        if values.is_empty() {
            return Err(Error::EmptySamples);
        }
        let kernel = kernel_for(model, *t, sigma, p)?;
        let raw: Vec<f64> = values.iter().map(|&v| v as f64).collect();
        let m = sample_moments(&raw);
        growth.push((*t, m[0], m[1]));
        let zero_shift = kernel.with_shift(0.0);
        let mut mean_z = 0.0;
        for &v in values {
            mean_z += zero_shift.rescale(v)?;
        }
        mean_z /= values.len() as f64;
        shift_pts.push((kernel.lattice_delta()?, mean_z - targets[0]));
    }
    let growth_fit = fit_growth(&growth, targets[1])?;
    let shift_fit = fit_shift(&shift_pts)?;

    let (t_top, values_top) = &batches[*order.last().expect("nonempty")];
    let kernel = kernel_for(model, *t_top, sigma, p)?;
    let rescaled: Result<Vec<f64>> = values_top.iter().map(|&v| kernel.rescale(v)).collect();
    let rescaled = rescaled?;
    let dist = from_samples(&kernel, &rescaled)?;
    let gaps = compare_cdf(&dist, law, -4.0, 2.0)?;
    Ok(FitReport {
        v_inf: Some(growth_fit.speed),
        gamma: Some(growth_fit.amplitude),
        fluctuation_exponent: Some(growth_fit.fluctuation_exponent),
        a_hat: Some(shift_fit.a_hat),
        shift,
        max_cdf_gap: match shift {
            ShiftMode::Midpoint => gaps.shifted_gap,
            ShiftMode::None => gaps.unshifted_gap,
        },
        moment_table: moment_rows(&rescaled, &targets)?,
    })
}

/// Single-batch law comparison: the moment table and the cdf gap, with no
/// growth fit.
pub fn table_report(
    values: &[i64],
    model: Model,
    t: f64,
    sigma: Option<f64>,
    p: Option<f64>,
    law: &LimitLaw,
    shift: ShiftMode,
) -> Result<FitReport> {
    let kernel = kernel_for(model, t, sigma, p)?;
    let rescaled: Result<Vec<f64>> = values.iter().map(|&v| kernel.rescale(v)).collect();
    let rescaled = rescaled?;
    let dist = from_samples(&kernel, &rescaled)?;
    let gaps = compare_cdf(&dist, law, -4.0, 2.0)?;
    Ok(FitReport {
        v_inf: None,
        gamma: None,
        fluctuation_exponent: None,
        a_hat: None,
        shift,
        max_cdf_gap: match shift {
            ShiftMode::Midpoint => gaps.shifted_gap,
            ShiftMode::None => gaps.unshifted_gap,
        },
        moment_table: moment_table(&rescaled, law)?,
    })
}

/// Flattens a report into labelled rows for the CSV table.
pub fn report_rows(report: &FitReport) -> Vec<ReportRow> {
    let mut rows = Vec::new();
    if let Some(v) = report.v_inf {
        rows.push(ReportRow::new("v_inf", v));
    }
    if let Some(v) = report.gamma {
        rows.push(ReportRow::new("gamma", v));
    }
    if let Some(v) = report.fluctuation_exponent {
        rows.push(ReportRow::new("fluctuation_exponent", v).with_target(2.0 / 3.0));
    }
    if let Some(v) = report.a_hat {
        rows.push(ReportRow::new("a_hat", v));
    }
    rows.push(ReportRow::new("max_cdf_gap", report.max_cdf_gap));
    for m in &report.moment_table {
        rows.push(ReportRow::new(m.name, m.empirical).with_error(m.std_error).with_target(m.law));
    }
    rows
}

/// One labelled scalar in a results table.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub value: f64,
    pub error: Option<f64>,
    pub target: Option<f64>,
}

impl ReportRow {
    pub fn new(label: &str, value: f64) -> Self {
        ReportRow {
            label: label.to_string(),
            value,
            error: None,
            target: None,
        }
    }

    pub fn with_error(mut self, error: f64) -> Self {
        self.error = Some(error);
        self
    }

    pub fn with_target(mut self, target: f64) -> Self {
        self.target = Some(target);
        self
    }
}

/// Renders rows as a CSV table with a fixed header; absent fields stay
/// empty.
pub fn render_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("label,value,error,target\n");
    for row in rows {
        let error = row.error.map_or(String::new(), |e| format!("{e:.9}"));
        let target = row.target.map_or(String::new(), |t| format!("{t:.9}"));
        out.push_str(&format!("{},{:.9},{},{}\n", row.label, row.value, error, target));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_inversion_lands_in_the_right_cell() {
        let dist = LatticeDistribution {
            model: KernelModel::tasep_flat(100.0).unwrap(),
            delta: 1.0,
            points: vec![0.0, 1.0, 2.0],
            cdf: vec![0.25, 0.75, 1.0],
            below: 0.0,
        };
        let mut counts = [0usize; 3];
        let mut rng = SplitMix64::new(9);
        for _ in 0..40_000 {
            let z = dist.sample(&mut rng);
            counts[z as usize] += 1;
        }
        for (count, mass) in counts.iter().zip([0.25, 0.5, 0.25]) {
            let freq = *count as f64 / 40_000.0;
            assert!((freq - mass).abs() < 0.01, "freq {freq} vs mass {mass}");
        }
    }

    #[test]
    fn lattice_moments_match_a_two_point_law() {
        let m = lattice_moments(&[-1.0, 1.0], &[0.5, 0.5]);
        assert!(m[0].abs() < 1e-15);
        assert!((m[1] - 1.0).abs() < 1e-15);
        assert!(m[2].abs() < 1e-15);
        assert!((m[3] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn fit_rejects_degenerate_inputs() {
        assert!(fit_shift(&[(0.1, 0.05)]).is_err());
        assert!(fit_shift(&[(0.1, 0.05), (0.1, 0.05)]).is_err());
        assert!(fit_shift(&[(-0.1, 0.05), (0.2, 0.1)]).is_err());
        let flat = [(10.0, 20.0, 1.0), (20.0, 40.0, 1.5), (30.0, 60.0, 2.0)];
        assert!(fit_growth(&flat[..2], 1.0).is_err());
        assert!(fit_growth(&flat, 0.0).is_err());
        let unordered = [(10.0, 20.0, 1.0), (10.0, 40.0, 1.5), (30.0, 60.0, 2.0)];
        assert!(fit_growth(&unordered, 1.0).is_err());
    }
}
