//! Airy limit kernels, the prelimit growth-model kernels in Bessel and
//! contour-integral form, their rescaled versions, and the first-order
//! correction kernels.
//!
//! All contour integrals are trapezoid sums over circles through (or near)
//! the relevant saddle; such sums converge spectrally for analytic
//! integrands.  Exponents, including the conjugation factors of the
//! exclusion-process kernels, stay in log scale and are normalized at the
//! running maximum before exponentiation, so nothing overflows at large t.

use std::f64::consts::{LN_2, PI};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::quad::gauss_legendre_on;
use crate::specfun::{airy_ai, airy_pair, bessel_j, bessel_j_row};
use crate::{Error, Result};

/// Kernel families: two Airy limits, four prelimit models, two antisymmetric
/// correction kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Airy2,
    Airy1,
    FlatPng,
    PngDroplet,
    TasepFlat,
    TasepStep,
    AsymFlat,
    AsymStep,
}

/// A kernel family together with its parameters.
///
/// `t` applies to the prelimit families, `sigma` to the step exclusion
/// families, `a` is the lattice shift of the rescaled coordinates, and
/// `quadrature` optionally pins the contour node count (default: bandwidth
/// estimate plus doubling until 1e-9 self-agreement).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelModel {
    pub family: KernelFamily,
    pub t: f64,
    pub sigma: Option<f64>,
    pub a: f64,
    pub quadrature: Option<usize>,
}

const T_MAX: f64 = 1.0e4;

fn check_t(t: f64) -> Result<f64> {
    if !(t > 0.0 && t <= T_MAX) {
        return Err(Error::Domain(format!(
            "prelimit kernels are validated for t in (0, 1e4], got {t}"
        )));
    }
    Ok(t)
}

fn check_sigma(sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Domain(format!("sigma must lie in (0,1), got {sigma}")));
    }
    Ok(sigma)
}

impl KernelModel {
    pub fn airy2() -> Self {
        KernelModel { family: KernelFamily::Airy2, t: 0.0, sigma: None, a: 0.0, quadrature: None }
    }

    pub fn airy1() -> Self {
        KernelModel { family: KernelFamily::Airy1, t: 0.0, sigma: None, a: 0.0, quadrature: None }
    }

    pub fn asym_flat() -> Self {
        KernelModel { family: KernelFamily::AsymFlat, t: 0.0, sigma: None, a: 0.0, quadrature: None }
    }

    pub fn asym_step(sigma: f64) -> Result<Self> {
        Ok(KernelModel {
            family: KernelFamily::AsymStep,
            t: 0.0,
            sigma: Some(check_sigma(sigma)?),
            a: 0.0,
            quadrature: None,
        })
    }

    pub fn flat_png(t: f64) -> Result<Self> {
        Ok(KernelModel { family: KernelFamily::FlatPng, t: check_t(t)?, sigma: None, a: 0.0, quadrature: None })
    }

    pub fn png_droplet(t: f64) -> Result<Self> {
        Ok(KernelModel { family: KernelFamily::PngDroplet, t: check_t(t)?, sigma: None, a: 0.5, quadrature: None })
    }

    pub fn tasep_flat(t: f64) -> Result<Self> {
        Ok(KernelModel { family: KernelFamily::TasepFlat, t: check_t(t)?, sigma: None, a: 0.5, quadrature: None })
    }

    pub fn tasep_step(t: f64, sigma: f64) -> Result<Self> {
        Ok(KernelModel {
            family: KernelFamily::TasepStep,
            t: check_t(t)?,
            sigma: Some(check_sigma(sigma)?),
            a: 0.5,
            quadrature: None,
        })
    }

    /// Override the lattice shift (the per-model default is the shift that
    /// cancels the first-order correction where one exists).
    pub fn with_shift(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    /// Pin the contour node count, disabling automatic doubling.
    pub fn with_quadrature(mut self, nodes: usize) -> Self {
        self.quadrature = Some(nodes);
        self
    }

    /// The limiting family a prelimit model converges to.
    pub fn limit(&self) -> Option<KernelFamily> {
        match self.family {
            KernelFamily::FlatPng | KernelFamily::TasepFlat => Some(KernelFamily::Airy1),
            KernelFamily::PngDroplet | KernelFamily::TasepStep => Some(KernelFamily::Airy2),
            _ => None,
        }
    }

    /// Fluctuation scale `b = 1/delta_t`: the rescaled kernel is `b` times a
    /// prelimit entry (times the conjugation).
    pub fn fluctuation_scale(&self) -> Result<f64> {
        match self.family {
            KernelFamily::FlatPng => Ok((2.0 * self.t).cbrt()),
            KernelFamily::PngDroplet | KernelFamily::TasepFlat => Ok(self.t.cbrt()),
            KernelFamily::TasepStep => {
                let sigma = self.sigma.expect("tasep_step carries sigma");
                let c2 = sigma.powf(-1.0 / 6.0) * (1.0 - sigma.sqrt()).powf(2.0 / 3.0);
                Ok(c2 * self.t.cbrt())
            }
            _ => Err(Error::Domain(format!(
                "{:?} has no prelimit fluctuation scale",
                self.family
            ))),
        }
    }

    /// Lattice spacing `delta_t` of the rescaled coordinates.
    pub fn lattice_delta(&self) -> Result<f64> {
        Ok(1.0 / self.fluctuation_scale()?)
    }

    /// Nearest lattice value of `s`: the rescaled coordinates live on the
    /// image of the integer lattice, and `k_rescaled` requires its arguments
    /// on that grid.
    pub fn snap(&self, s: f64) -> Result<f64> {
        let b = self.fluctuation_scale()?;
        Ok(match self.family {
            // H = 2t + s b integer
            KernelFamily::FlatPng => ((2.0 * self.t + s * b).round_ties_even() - 2.0 * self.t) / b,
            // x = 2t + s b + a integer
            KernelFamily::PngDroplet => {
                ((2.0 * self.t + s * b + self.a).round_ties_even() - 2.0 * self.t - self.a) / b
            }
            // A = t/2 - s b - a integer, s decreasing in A
            KernelFamily::TasepFlat => {
                let target = 0.5 * self.t - self.a;
                (target - (target - s * b).round_ties_even()) / b
            }
            // X = c1 t - s b - a integer
            KernelFamily::TasepStep => {
                let sigma = self.sigma.expect("tasep_step carries sigma");
                let target = (1.0 - 2.0 * sigma.sqrt()) * self.t - self.a;
                (target - (target - s * b).round_ties_even()) / b
            }
            _ => unreachable!("fluctuation_scale already rejected limiting families"),
        })
    }

    /// Rescaled lattice value of an integer observable in this model's
    /// coordinate convention: tagged-particle position for the step starts,
    /// jump count for the alternating start, height for the growth models.
    /// Inverse of the lattice map used by [`k_rescaled`].
    pub fn rescale(&self, raw: i64) -> Result<f64> {
        let b = self.fluctuation_scale()?;
        let raw = raw as f64;
        Ok(match self.family {
            KernelFamily::FlatPng => (raw - 2.0 * self.t) / b,
            KernelFamily::PngDroplet => (raw - 2.0 * self.t - self.a) / b,
            KernelFamily::TasepFlat => (0.5 * self.t - self.a - raw) / b,
            KernelFamily::TasepStep => {
                let sigma = self.sigma.expect("tasep_step carries sigma");
                ((1.0 - 2.0 * sigma.sqrt()) * self.t - self.a - raw) / b
            }
            _ => unreachable!("fluctuation_scale already rejected limiting families"),
        })
    }
}

// ---------------------------------------------------------------------------
// limiting kernels
// ---------------------------------------------------------------------------

const AIRY2_WINDOW: (f64, f64) = (-15.0, 40.0);

fn check_airy2_window(v: f64) -> Result<f64> {
    if !(AIRY2_WINDOW.0..=AIRY2_WINDOW.1).contains(&v) {
        return Err(Error::Range(format!(
            "argument {v} outside the validated window [{}, {}]",
            AIRY2_WINDOW.0, AIRY2_WINDOW.1
        )));
    }
    Ok(v)
}

/// The Airy kernel `K(x,y) = int_0^inf Ai(x+l) Ai(y+l) dl` through its
/// closed form `(Ai(x)Ai'(y) - Ai'(x)Ai(y)) / (x-y)`, switching to the
/// diagonal formula `Ai'(m)^2 - m Ai(m)^2` at the midpoint `m` when
/// `|x - y| < 1e-4`.
pub fn k_airy2(x: f64, y: f64) -> Result<f64> {
    check_airy2_window(x)?;
    check_airy2_window(y)?;
    if (x - y).abs() < 1e-4 {
        let m = 0.5 * (x + y);
        let (ai, aip) = airy_pair(m)?;
        Ok(aip * aip - m * ai * ai)
    } else {
        let (ax, apx) = airy_pair(x)?;
        let (ay, apy) = airy_pair(y)?;
        Ok((ax * apy - apx * ay) / (x - y))
    }
}

/// The defining lambda-integral of the Airy kernel, kept as an independent
/// cross-check of the closed form (Gauss-Legendre on [0, 30]; the dropped
/// tail is below 1e-13 inside the validated window).
pub fn k_airy2_integral(x: f64, y: f64) -> Result<f64> {
    check_airy2_window(x)?;
    check_airy2_window(y)?;
    let (nodes, weights) = gauss_legendre_on(240, 0.0, 30.0);
    let mut sum = 0.0;
    for (lambda, w) in nodes.iter().zip(weights.iter()) {
        sum += w * airy_ai(x + lambda)? * airy_ai(y + lambda)?;
    }
    Ok(sum)
}

/// The kernel `K(x,y) = Ai(x+y)`.
pub fn k_airy1(x: f64, y: f64) -> Result<f64> {
    airy_ai(x + y)
}

/// Closed form of the derivative combination `(d1 + d2) K` for the limiting
/// kernels: `-Ai(s1) Ai(s2)` for the two-sided kernel and `2 Ai'(s1+s2)`
/// for the one-sided one.
pub fn airy_shift_combo(kind: KernelFamily, s1: f64, s2: f64) -> Result<f64> {
    match kind {
        KernelFamily::Airy2 => Ok(-airy_ai(s1)? * airy_ai(s2)?),
        KernelFamily::Airy1 => Ok(2.0 * airy_ai_deriv_1(s1 + s2)?),
        other => Err(Error::Domain(format!(
            "derivative combination defined for the limiting kernels, not {other:?}"
        ))),
    }
}

fn airy_ai_deriv_1(x: f64) -> Result<f64> {
    Ok(airy_pair(x)?.1)
}

// ---------------------------------------------------------------------------
// prelimit kernels at integer coordinates
// ---------------------------------------------------------------------------

/// Prelimit kernel entry at integer coordinates.
///
/// Coordinate meaning per family: `flat_png` and `png_droplet` take height
/// coordinates (the flat kernel is `J_{x1+x2}(4t)`, the droplet kernel the
/// discrete Bessel kernel `sum_l J_{x1+l}(2t) J_{x2+l}(2t)`); `tasep_flat`
/// takes the combined contour exponents `2n + x_i`, the only combination the
/// kernel depends on; `tasep_step` takes particle positions.
pub fn k_prelimit(model: &KernelModel, x1: i64, x2: i64) -> Result<f64> {
    match model.family {
        KernelFamily::FlatPng => {
            check_t(model.t)?;
            bessel_signed(x1 + x2, 4.0 * model.t)
        }
        KernelFamily::PngDroplet => {
            check_t(model.t)?;
            Ok(droplet_entry(model.t, x1, x2))
        }
        KernelFamily::TasepFlat => flat_contour_auto(model, x1, x2, 0.0),
        KernelFamily::TasepStep => {
            let rows = StepRows::build_auto(model, &[x1], &[x2])?;
            Ok(rows.entry(0, 0, 0.0))
        }
        other => Err(Error::Domain(format!(
            "{other:?} is not a prelimit family"
        ))),
    }
}

/// `J_n(x)` extended to negative integer orders via `J_{-n} = (-1)^n J_n`.
fn bessel_signed(order: i64, x: f64) -> Result<f64> {
    if order >= 0 {
        bessel_j(order as u32, x)
    } else {
        let j = bessel_j((-order) as u32, x)?;
        Ok(if order % 2 == 0 { j } else { -j })
    }
}

/// The droplet kernel entry by the l-sum over one Miller row; the truncation
/// point sits far enough past the Bessel turning point that the dropped tail
/// is below 1e-12.
fn droplet_entry(t: f64, x1: i64, x2: i64) -> f64 {
    let arg = 2.0 * t;
    let lmax = (arg - x1.min(x2) as f64).max(0.0) as i64 + (12.0 * arg.cbrt()) as i64 + 400;
    let max_abs = x1.abs().max(x2.abs()) + lmax;
    let row = bessel_j_row(arg, max_abs as usize);
    let at = |k: i64| -> f64 {
        if k >= 0 {
            row[k as usize]
        } else if k % 2 == 0 {
            row[(-k) as usize]
        } else {
            -row[(-k) as usize]
        }
    };
    let mut sum = 0.0;
    for l in 0..lmax {
        sum += at(x1 + l) * at(x2 + l);
    }
    sum
}

// ---------------------------------------------------------------------------
// flat exclusion kernel: single contour around z = 1
// ---------------------------------------------------------------------------

fn next_pow2(x: f64) -> usize {
    let mut n = 1usize;
    while (n as f64) < x {
        n *= 2;
    }
    n
}

const NODE_CAP: usize = 1 << 22;

/// Sampled contour quantities at one node count: the loop over entries
/// reuses them, so only the per-entry exponentials remain in the hot
/// path.
struct FlatLevel {
    nodes: usize,
    half: Vec<Complex64>,
    lnz: Vec<Complex64>,
    ln1z: Vec<Complex64>,
    base: Vec<Complex64>,
}

impl FlatLevel {
    fn build(t: f64, nodes: usize) -> FlatLevel {
        let step = 2.0 * PI / nodes as f64;
        let mut level = FlatLevel {
            nodes,
            half: Vec::with_capacity(nodes),
            lnz: Vec::with_capacity(nodes),
            ln1z: Vec::with_capacity(nodes),
            base: Vec::with_capacity(nodes),
        };
        for k in 0..nodes {
            let theta = step * k as f64;
            let half_eit = Complex64::from_polar(0.5, theta);
            let z = 1.0 + half_eit;
            level.half.push(half_eit);
            level.lnz.push(z.ln());
            level.ln1z.push((1.0 - z).ln());
            level.base.push(t * (1.0 - 2.0 * z));
        }
        level
    }

    /// One contour entry of the flat exclusion kernel,
    /// `-(1/2 pi i) oint e^{t(1-2z)} z^{a2} (1-z)^{-a1-1} dz`
    /// on the circle `z = 1 + e^{i theta}/2`, with the conjugation
    /// `2^{a2-a1}` optionally folded into the exponent (`conj_log2` is
    /// the multiple of `ln 2` to add).
    fn eval(&self, a1: i64, a2: i64, conj_log2: f64) -> f64 {
        let conj = conj_log2 * LN_2;
        let a2f = a2 as f64;
        let a1p = (a1 + 1) as f64;
        let mut max_re = f64::NEG_INFINITY;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..self.nodes {
            let e = self.base[k] + a2f * self.lnz[k] - a1p * self.ln1z[k] + conj;
            if e.re > max_re {
                acc *= (max_re - e.re).exp();
                max_re = e.re;
            }
            acc += ((e - max_re).exp()) * self.half[k];
        }
        let val = acc / self.nodes as f64;
        -(val * max_re.exp()).re
    }
}

fn flat_default_nodes(t: f64, a1: i64, a2: i64) -> usize {
    let bandwidth = 4.0 * (t + a1.abs().max(a2.abs()) as f64);
    next_pow2(bandwidth).max(2048)
}

/// Contour evaluator for one value of `t`, caching node tables so a whole
/// kernel grid shares them across entries.
struct FlatContour {
    t: f64,
    levels: Mutex<Vec<Arc<FlatLevel>>>,
}

impl FlatContour {
    fn new(t: f64) -> FlatContour {
        FlatContour {
            t,
            levels: Mutex::new(Vec::new()),
        }
    }

    fn level(&self, nodes: usize) -> Arc<FlatLevel> {
        let mut levels = self.levels.lock().expect("contour cache poisoned");
        if let Some(level) = levels.iter().find(|l| l.nodes == nodes) {
            return Arc::clone(level);
        }
        let level = Arc::new(FlatLevel::build(self.t, nodes));
        levels.push(Arc::clone(&level));
        level
    }

    fn eval_auto(
        &self,
        quadrature: Option<usize>,
        a1: i64,
        a2: i64,
        conj_log2: f64,
    ) -> Result<f64> {
        if let Some(nodes) = quadrature {
            return Ok(self.level(nodes).eval(a1, a2, conj_log2));
        }
        let mut nodes = flat_default_nodes(self.t, a1, a2);
        let mut prev = self.level(nodes).eval(a1, a2, conj_log2);
        while nodes <= NODE_CAP {
            nodes *= 2;
            let next = self.level(nodes).eval(a1, a2, conj_log2);
            if (next - prev).abs() <= 1e-9 + 1e-9 * next.abs() {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::Accuracy(format!(
            "flat exclusion contour did not settle by {NODE_CAP} nodes at t = {}",
            self.t
        )))
    }
}

fn flat_contour_auto(model: &KernelModel, a1: i64, a2: i64, conj_log2: f64) -> Result<f64> {
    check_t(model.t)?;
    FlatContour::new(model.t).eval_auto(model.quadrature, a1, a2, conj_log2)
}

// ---------------------------------------------------------------------------
// step exclusion kernel: factorized double contour
// ---------------------------------------------------------------------------

/// Geometry of the two circles: the z contour has radius `xi - eps` around
/// 0, the w contour radius `(1 - xi) - eps` around 1, with `xi = 1 -
/// sqrt(sigma)` the common saddle and `eps = t^{-1/3}/2`.  The Cauchy factor
/// `1/(z-w)` expands as `sum_k (w-1)^k / (z-1)^{k+1}`, truncated where the
/// geometric ratio drops below 1e-16.
struct StepGeometry {
    xi: f64,
    rz: f64,
    rw: f64,
    k_terms: usize,
    n: i64,
}

fn step_geometry(t: f64, sigma: f64) -> StepGeometry {
    let xi = 1.0 - sigma.sqrt();
    let eps = 0.5 * t.powf(-1.0 / 3.0);
    let rz = xi - eps;
    let rw = (1.0 - xi) - eps;
    let ratio = rw / (1.0 - rz);
    let k_terms = (1e-16f64.ln() / ratio.ln()).ceil() as usize + 5;
    let n = (sigma * t).round_ties_even() as i64;
    StepGeometry { xi, rz, rw, k_terms, n }
}

/// Cauchy-series coefficient rows of the factorized step kernel.
///
/// For each left coordinate `x1` the row `A_k = (1/2 pi) sum_theta F(z) z
/// (z-1)^{-(k+1)} / N` with `F = e^{tz} (1-z)^n z^{-n-x1-1}`, and for each
/// right coordinate `x2` the row `B_k = (1/2 pi) sum_phi G(w) (w-1)^{k+1} /
/// N` with `G = e^{-tw} (1-w)^{-n} w^{n+x2}`; the kernel entry is `Re sum_k
/// A_k B_k` rescaled by the stored per-row exponent offsets.
struct StepRows {
    a_rows: Vec<(Vec<Complex64>, f64)>,
    b_rows: Vec<(Vec<Complex64>, f64)>,
}

impl StepRows {
    fn build(t: f64, sigma: f64, x1s: &[i64], x2s: &[i64], nz: usize) -> Self {
        let geom = step_geometry(t, sigma);
        let a_rows = x1s
            .par_iter()
            .map(|&x| step_a_row(t, &geom, x, nz))
            .collect();
        let b_rows = x2s
            .par_iter()
            .map(|&x| step_b_row(t, &geom, x, nz))
            .collect();
        StepRows { a_rows, b_rows }
    }

    fn build_auto(model: &KernelModel, x1s: &[i64], x2s: &[i64]) -> Result<Self> {
        let t = check_t(model.t)?;
        let sigma = model
            .sigma
            .ok_or_else(|| Error::Domain("tasep_step requires sigma".into()))?;
        if let Some(nodes) = model.quadrature {
            return Ok(StepRows::build(t, sigma, x1s, x2s, nodes));
        }
        let mut nodes = step_default_nodes(t);
        let mut rows = StepRows::build(t, sigma, x1s, x2s, nodes);
        // Compare entries in the same conjugated form the callers read;
        // the raw exponents can overflow on wide coordinate windows.
        let ln_xi = step_geometry(t, sigma).xi.ln();
        while nodes <= NODE_CAP {
            nodes *= 2;
            let finer = StepRows::build(t, sigma, x1s, x2s, nodes);
            let mut worst = 0.0f64;
            for i in 0..x1s.len() {
                for j in 0..x2s.len() {
                    let extra = ((x1s[i] - x2s[j]) as f64) * ln_xi;
                    let coarse = rows.entry(i, j, extra);
                    let fine = finer.entry(i, j, extra);
                    worst = worst.max((coarse - fine).abs() / (1.0 + fine.abs()));
                }
            }
            if worst <= 1e-9 {
                return Ok(finer);
            }
            rows = finer;
        }
        Err(Error::Accuracy(format!(
            "step exclusion contours did not settle by {NODE_CAP} nodes at t = {t}"
        )))
    }

    /// Kernel entry from row `i` against row `j`, with `extra_log` added to
    /// the exponent before leaving log scale (used for the conjugation).
    fn entry(&self, i: usize, j: usize, extra_log: f64) -> f64 {
        let (a, ca) = &self.a_rows[i];
        let (b, cb) = &self.b_rows[j];
        let mut dot = Complex64::new(0.0, 0.0);
        for (ak, bk) in a.iter().zip(b.iter()) {
            dot += ak * bk;
        }
        dot.re * (ca + cb + extra_log).exp()
    }
}

fn step_default_nodes(t: f64) -> usize {
    next_pow2(3.0 * t).max(1 << 12)
}

fn step_a_row(t: f64, geom: &StepGeometry, x: i64, nz: usize) -> (Vec<Complex64>, f64) {
    let n = geom.n;
    let rz = geom.rz;
    let zpow = -((n + x + 1) as f64);
    let ln_rz = rz.ln();
    let step = 2.0 * PI / nz as f64;
    // pass 1: the maximum of Re E over the circle, from scalars only
    let mut max_re = f64::NEG_INFINITY;
    for k in 0..nz {
        let theta = step * k as f64;
        let cos = theta.cos();
        let abs1mz2 = 1.0 - 2.0 * rz * cos + rz * rz;
        let re = t * rz * cos + 0.5 * (n as f64) * abs1mz2.ln() + zpow * ln_rz;
        if re > max_re {
            max_re = re;
        }
    }
    // pass 2: accumulate A_k = sum_theta e^{E - max} z (z-1)^{-(k+1)} / N
    let mut acc = vec![Complex64::new(0.0, 0.0); geom.k_terms];
    for k in 0..nz {
        let theta = step * k as f64;
        let z = Complex64::from_polar(rz, theta);
        let e = t * z + (n as f64) * (1.0 - z).ln() + zpow * Complex64::new(ln_rz, theta);
        let f = (e - max_re).exp() * z / nz as f64;
        let inv = 1.0 / (z - 1.0);
        let mut p = inv;
        for slot in acc.iter_mut() {
            *slot += f * p;
            p *= inv;
        }
    }
    (acc, max_re)
}

fn step_b_row(t: f64, geom: &StepGeometry, x: i64, nw: usize) -> (Vec<Complex64>, f64) {
    let n = geom.n;
    let rw = geom.rw;
    let wpow = (n + x) as f64;
    let ln_rw = rw.ln();
    let step = 2.0 * PI / nw as f64;
    let mut max_re = f64::NEG_INFINITY;
    for k in 0..nw {
        let phi = step * k as f64;
        let cos = phi.cos();
        let absw2 = 1.0 + 2.0 * rw * cos + rw * rw;
        let re = -t * (1.0 + rw * cos) - (n as f64) * ln_rw + 0.5 * wpow * absw2.ln();
        if re > max_re {
            max_re = re;
        }
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); geom.k_terms];
    for k in 0..nw {
        let phi = step * k as f64;
        let wm1 = Complex64::from_polar(rw, phi);
        let w = 1.0 + wm1;
        // 1 - w = -wm1; any log branch works because n is an integer
        let e = -t * w - (n as f64) * Complex64::new(ln_rw, phi + PI) + wpow * w.ln();
        let g = (e - max_re).exp() * wm1 / nw as f64;
        let mut p = Complex64::new(1.0, 0.0);
        for slot in acc.iter_mut() {
            *slot += g * p;
            p *= wm1;
        }
    }
    (acc, max_re)
}

// ---------------------------------------------------------------------------
// rescaled kernels
// ---------------------------------------------------------------------------

fn lattice_coordinate(model: &KernelModel, s: f64) -> Result<i64> {
    let b = model.fluctuation_scale()?;
    let real = match model.family {
        KernelFamily::FlatPng => 2.0 * model.t + s * b,
        KernelFamily::PngDroplet => 2.0 * model.t + s * b + model.a,
        KernelFamily::TasepFlat => 0.5 * model.t - s * b - model.a,
        KernelFamily::TasepStep => {
            let sigma = model.sigma.expect("tasep_step carries sigma");
            (1.0 - 2.0 * sigma.sqrt()) * model.t - s * b - model.a
        }
        _ => unreachable!(),
    };
    // ties-to-even throughout: half-integer ties genuinely occur (even t,
    // a = 1/2, integer s*b) and the frozen reference entries use rint
    let snapped = real.round_ties_even();
    if (real - snapped).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "s = {s} is not on the model lattice (integer coordinate {real}); \
             snap it first with KernelModel::snap"
        )));
    }
    Ok(snapped as i64)
}

/// Rescaled kernel entry at lattice arguments `s1, s2`.
///
/// For the limiting families this is the limit kernel itself; for prelimit
/// families it is `b` times the prelimit entry at the mapped integer
/// coordinates, with the exclusion-kernel conjugation factors folded into
/// the contour exponents.  Converges to the matching Airy kernel as t grows.
pub fn k_rescaled(model: &KernelModel, s1: f64, s2: f64) -> Result<f64> {
    match model.family {
        KernelFamily::Airy2 => k_airy2(s1, s2),
        KernelFamily::Airy1 => k_airy1(s1, s2),
        KernelFamily::FlatPng => {
            let b = model.fluctuation_scale()?;
            let h1 = lattice_coordinate(model, s1)?;
            let h2 = lattice_coordinate(model, s2)?;
            Ok(b * bessel_signed(h1 + h2, 4.0 * model.t)?)
        }
        KernelFamily::PngDroplet => {
            let b = model.fluctuation_scale()?;
            let x1 = lattice_coordinate(model, s1)?;
            let x2 = lattice_coordinate(model, s2)?;
            Ok(b * droplet_entry(model.t, x1, x2))
        }
        KernelFamily::TasepFlat => {
            let b = model.fluctuation_scale()?;
            let a1 = lattice_coordinate(model, s1)?;
            let a2 = lattice_coordinate(model, s2)?;
            Ok(b * flat_contour_auto(model, a1, a2, (a2 - a1) as f64)?)
        }
        KernelFamily::TasepStep => {
            let b = model.fluctuation_scale()?;
            let x1 = lattice_coordinate(model, s1)?;
            let x2 = lattice_coordinate(model, s2)?;
            let rows = StepRows::build_auto(model, &[x1], &[x2])?;
            let geom = step_geometry(model.t, model.sigma.expect("sigma"));
            Ok(b * rows.entry(0, 0, ((x1 - x2) as f64) * geom.xi.ln()))
        }
        other => Err(Error::Domain(format!(
            "{other:?} has no rescaled form (correction kernels are already in limit coordinates)"
        ))),
    }
}

/// Rescaled kernel on a full grid of lattice points (all pairs).
///
/// Equivalent to calling [`k_rescaled`] entrywise but shares the contour
/// geometry and Bessel rows across entries, which is what makes lattice
/// determinants at t ~ 10^3 affordable.
pub fn k_rescaled_grid(model: &KernelModel, s: &[f64]) -> Result<DMatrix<f64>> {
    let m = s.len();
    match model.family {
        KernelFamily::Airy2 => {
            for &x in s {
                check_airy2_window(x)?;
            }
            let pairs: Result<Vec<(f64, f64)>> = s.iter().map(|&x| airy_pair(x)).collect();
            let pairs = pairs?;
            let mut out = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    let (xi, yi) = (s[i], s[j]);
                    out[(i, j)] = if (xi - yi).abs() < 1e-4 {
                        let mid = 0.5 * (xi + yi);
                        let (ai, aip) = airy_pair(mid)?;
                        aip * aip - mid * ai * ai
                    } else {
                        let (ax, apx) = pairs[i];
                        let (ay, apy) = pairs[j];
                        (ax * apy - apx * ay) / (xi - yi)
                    };
                }
            }
            Ok(out)
        }
        KernelFamily::Airy1 => {
            let mut out = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..=i {
                    let v = k_airy1(s[i], s[j])?;
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
            Ok(out)
        }
        KernelFamily::FlatPng => {
            let b = model.fluctuation_scale()?;
            let h: Vec<i64> = s
                .iter()
                .map(|&v| lattice_coordinate(model, v))
                .collect::<Result<_>>()?;
            // entries depend on h1 + h2 only
            let mut out = DMatrix::zeros(m, m);
            let mut cache: std::collections::HashMap<i64, f64> = std::collections::HashMap::new();
            for i in 0..m {
                for j in 0..=i {
                    let order = h[i] + h[j];
                    let v = match cache.get(&order) {
                        Some(&v) => v,
                        None => {
                            let v = b * bessel_signed(order, 4.0 * model.t)?;
                            cache.insert(order, v);
                            v
                        }
                    };
                    out[(i, j)] = v;
                    out[(j, i)] = v;
                }
            }
            Ok(out)
        }
        KernelFamily::PngDroplet => {
            let b = model.fluctuation_scale()?;
            let x: Vec<i64> = s
                .iter()
                .map(|&v| lattice_coordinate(model, v))
                .collect::<Result<_>>()?;
            let arg = 2.0 * model.t;
            let xmin = x.iter().copied().min().unwrap_or(0);
            let xmax = x.iter().copied().max().unwrap_or(0);
            let lmax = (arg - xmin as f64).max(0.0) as i64 + (12.0 * arg.cbrt()) as i64 + 400;
            let row = bessel_j_row(arg, (xmax.abs().max(xmin.abs()) + lmax) as usize);
            let at = |k: i64| -> f64 {
                if k >= 0 {
                    row[k as usize]
                } else if k % 2 == 0 {
                    row[(-k) as usize]
                } else {
                    -row[(-k) as usize]
                }
            };
            let mut out = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..=i {
                    let mut sum = 0.0;
                    for l in 0..lmax {
                        sum += at(x[i] + l) * at(x[j] + l);
                    }
                    out[(i, j)] = b * sum;
                    out[(j, i)] = b * sum;
                }
            }
            Ok(out)
        }
        KernelFamily::TasepFlat => {
            let b = model.fluctuation_scale()?;
            check_t(model.t)?;
            let a: Vec<i64> = s
                .iter()
                .map(|&v| lattice_coordinate(model, v))
                .collect::<Result<_>>()?;
            let contour = FlatContour::new(model.t);
            let entries: Result<Vec<f64>> = (0..m * m)
                .into_par_iter()
                .map(|idx| {
                    let (i, j) = (idx / m, idx % m);
                    let v =
                        contour.eval_auto(model.quadrature, a[i], a[j], (a[j] - a[i]) as f64)?;
                    Ok(b * v)
                })
                .collect();
            let entries = entries?;
            Ok(DMatrix::from_fn(m, m, |i, j| entries[i * m + j]))
        }
        KernelFamily::TasepStep => {
            let b = model.fluctuation_scale()?;
            let x: Vec<i64> = s
                .iter()
                .map(|&v| lattice_coordinate(model, v))
                .collect::<Result<_>>()?;
            let rows = StepRows::build_auto(model, &x, &x)?;
            let geom = step_geometry(model.t, model.sigma.expect("sigma"));
            let ln_xi = geom.xi.ln();
            let mut out = DMatrix::zeros(m, m);
            for i in 0..m {
                for j in 0..m {
                    out[(i, j)] = b * rows.entry(i, j, ((x[i] - x[j]) as f64) * ln_xi);
                }
            }
            Ok(out)
        }
        other => Err(Error::Domain(format!("{other:?} has no rescaled grid"))),
    }
}

// ---------------------------------------------------------------------------
// correction kernels
// ---------------------------------------------------------------------------

/// First-order correction kernels: the antisymmetric limits of
/// `delta_t^{-1} (k_rescaled - k_limit)`.
///
/// `asym_flat` is `(s2^2 - s1^2) Ai(s1+s2) / 2`; `asym_step` is `P(s1,s2) -
/// P(s2,s1)` with `P` a lambda-integral against the Airy function, its
/// fourth derivative reduced through the defining equation to
/// `Ai''''(x) = x^2 Ai(x) + 2 Ai'(x)`.
pub fn k_correction(model: &KernelModel, s1: f64, s2: f64) -> Result<f64> {
    match model.family {
        KernelFamily::AsymFlat => Ok(0.5 * (s2 * s2 - s1 * s1) * airy_ai(s1 + s2)?),
        KernelFamily::AsymStep => {
            let sigma = model
                .sigma
                .ok_or_else(|| Error::Domain("asym_step requires sigma".into()))?;
            Ok(p_step(s1, s2, sigma)? - p_step(s2, s1, sigma)?)
        }
        other => Err(Error::Domain(format!(
            "{other:?} is not a correction family"
        ))),
    }
}

/// The half lambda-integral behind the step correction kernel.
fn p_step(s1: f64, s2: f64, sigma: f64) -> Result<f64> {
    let c4 = (1.0 - 2.0 * sigma.sqrt()) / (2.0 * sigma.sqrt());
    let (nodes, weights) = gauss_legendre_on(240, 0.0, 30.0);
    let mut sum = 0.0;
    for (lambda, w) in nodes.iter().zip(weights.iter()) {
        let (a1, _) = airy_pair(s1 + lambda)?;
        let x = s2 + lambda;
        let (a2, a2p) = airy_pair(x)?;
        let mut integrand = a2p + s2 * x * a2;
        if c4 != 0.0 {
            integrand -= c4 * (x * x * a2 + 2.0 * a2p);
        }
        sum += w * a1 * integrand;
    }
    Ok(0.5 * sum)
}
