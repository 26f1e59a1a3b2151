//! Scalar special functions: the Airy function `Ai` with derivatives,
//! integer-order Bessel `J_n` at large order and argument, and q-series
//! building blocks (Pochhammer symbols, truncated basic hypergeometric sums).
//!
//! Airy values use the Maclaurin series on a central interval and a
//! steepest-descent contour (trapezoid rule on the vertical line through the
//! saddle of the Airy integral) outside it; negative arguments go through the
//! standard connection formula `Ai(-u) = 2 Re[e^{i pi/3} Ai(u e^{i pi/3})]`.
//! Bessel values come from the generating-function contour integral on a
//! circle through the outer saddle, normalized in log scale; whole rows
//! `J_0..J_m` at a fixed argument use Miller's downward recurrence.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::{Error, Result};

/// Ai(0) = 3^{-2/3} / Gamma(2/3).
const AI_ZERO: f64 = 0.355_028_053_887_817_239_26;
/// -Ai'(0) = 3^{-1/3} / Gamma(1/3).
const AI_PRIME_ZERO: f64 = 0.258_819_403_792_806_798_40;

// Regime boundaries for the Airy evaluation.  The Maclaurin series loses
// accuracy to cancellation past these points; the contour takes over.
const SERIES_LO: f64 = -5.0;
const SERIES_HI: f64 = 5.5;

// Half the node count of the saddle contour.  Spectrally converged well
// before this; doubling it changes values below 1e-13.
const AIRY_CONTOUR_HALF_NODES: usize = 200;

/// Airy function `Ai(x)`.
///
/// Absolute error below 1e-12 for `x` in `[-15, 30]`.  Arguments left of
/// -50 are outside the validated oscillatory range and rejected.
pub fn airy_ai(x: f64) -> Result<f64> {
    Ok(airy_pair(x)?.0)
}

/// Derivatives of `Ai`: order 0 is `Ai` itself, 1 is `Ai'`, and 2 uses the
/// defining equation `Ai''(x) = x Ai(x)`.
pub fn airy_ai_deriv(x: f64, order: u8) -> Result<f64> {
    let (ai, aip) = airy_pair(x)?;
    match order {
        0 => Ok(ai),
        1 => Ok(aip),
        2 => Ok(x * ai),
        _ => Err(Error::Domain(format!(
            "airy derivative order must be 0, 1 or 2, got {order}"
        ))),
    }
}

/// `(Ai(x), Ai'(x))` in one call; the two always come from the same regime.
pub fn airy_pair(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("airy argument must be finite, got {x}")));
    }
    if x < -50.0 {
        return Err(Error::Range(format!(
            "airy argument {x} is below the validated range x >= -50"
        )));
    }
    if x > SERIES_HI {
        let (ai, aip) = airy_contour(Complex64::new(x, 0.0));
        Ok((ai.re, aip.re))
    } else if x < SERIES_LO {
        Ok(airy_oscillatory(x))
    } else {
        Ok(airy_series(x))
    }
}

/// Maclaurin evaluation.  With f'' = x f, f(0)=1, f'(0)=0 and g'' = x g,
/// g(0)=0, g'(0)=1, the function is Ai = Ai(0) f - |Ai'(0)| g.
fn airy_series(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let (mut f, mut g) = (1.0, x);
    let (mut tf, mut tg) = (1.0, x);
    for k in 0..200u32 {
        let k = f64::from(k);
        tf *= x3 / ((3.0 * k + 2.0) * (3.0 * k + 3.0));
        tg *= x3 / ((3.0 * k + 3.0) * (3.0 * k + 4.0));
        f += tf;
        g += tg;
        if tf.abs() < 1e-18 * f.abs() + 1e-300 && tg.abs() < 1e-18 * g.abs() + 1e-300 {
            break;
        }
    }
    // Term-wise derivatives: f(x) = sum a_k x^{3k} with a_k = a_{k-1}/((3k)(3k-1)),
    // g(x) = sum b_k x^{3k+1} with b_k = b_{k-1}/((3k+1)(3k)).
    let mut fp = 0.0;
    let mut term = 1.0;
    let mut pow = x * x;
    for k in 1..=200u32 {
        let k = f64::from(k);
        term /= (3.0 * k) * (3.0 * k - 1.0);
        let contrib = 3.0 * k * term * pow;
        fp += contrib;
        if contrib.abs() < 1e-18 * (fp.abs() + 1.0) {
            break;
        }
        pow *= x3;
    }
    let mut gp = 1.0;
    term = 1.0;
    pow = x3;
    for k in 1..=200u32 {
        let k = f64::from(k);
        term /= (3.0 * k + 1.0) * (3.0 * k);
        let contrib = (3.0 * k + 1.0) * term * pow;
        gp += contrib;
        if contrib.abs() < 1e-18 * (gp.abs() + 1.0) {
            break;
        }
        pow *= x3;
    }
    (
        AI_ZERO * f - AI_PRIME_ZERO * g,
        AI_ZERO * fp - AI_PRIME_ZERO * gp,
    )
}

/// `(Ai(w), Ai'(w))` for complex `w` with `Re sqrt(w) > 0`.
///
/// Writes the Airy integral as a Gaussian-damped line integral through the
/// saddle at `sqrt(w)`,
/// `Ai(w) = e^{-(2/3) w^{3/2}} / (2 pi) * int e^{-sqrt(w) y^2 - i y^3 / 3} dy`,
/// and applies the trapezoid rule, which is spectrally accurate here.
fn airy_contour(w: Complex64) -> (Complex64, Complex64) {
    let sw = w.sqrt();
    // Gaussian damping rate is Re sqrt(w); cut where the integrand is ~e^{-42}.
    let ymax = (42.0 / sw.re).sqrt();
    let m = 2 * AIRY_CONTOUR_HALF_NODES;
    let h = 2.0 * ymax / m as f64;
    let mut i0 = Complex64::new(0.0, 0.0);
    let mut i1 = Complex64::new(0.0, 0.0);
    for k in 0..=m {
        let y = -ymax + h * k as f64;
        let phase = -sw * (y * y) + Complex64::new(0.0, -y * y * y / 3.0);
        let e = phase.exp();
        i0 += e;
        i1 += (sw + Complex64::new(0.0, y)) * e;
    }
    let pref = (-(2.0 / 3.0) * w * sw).exp() / (2.0 * PI);
    (pref * i0 * h, -(pref * i1 * h))
}

/// Oscillatory regime via the connection formula, rotating the argument onto
/// the ray `arg w = pi/3` where the contour converges.
fn airy_oscillatory(x: f64) -> (f64, f64) {
    let u = -x;
    let rot = Complex64::from_polar(u, PI / 3.0);
    let (a, ap) = airy_contour(rot);
    let e1 = Complex64::from_polar(2.0, PI / 3.0);
    let e2 = Complex64::from_polar(2.0, 2.0 * PI / 3.0);
    ((e1 * a).re, -(e2 * ap).re)
}

/// Bessel function `J_n(x)` for integer order `n >= 0` and `x >= 0`.
///
/// Evaluates the generating-function contour integral
/// `(1/2 pi i) oint z^{-n-1} e^{(x/2)(z - 1/z)} dz`
/// by the trapezoid rule on a circle through the outer saddle
/// `r = (n + sqrt(n^2 - x^2))/x` (unit circle for `n <= x`), normalizing
/// exponents at the saddle so nothing overflows.  Node count doubles until
/// two successive values agree to ~1e-12; relative accuracy is ~1e-11 in the
/// transition region `n ~ x`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) || x > 1e6 {
        return Err(Error::Domain(format!(
            "bessel argument must lie in [0, 1e6], got {x}"
        )));
    }
    if order > 1_000_000 {
        return Err(Error::Domain(format!("bessel order {order} above 1e6")));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let n = f64::from(order);
    let r = if n <= x {
        1.0
    } else {
        (n + (n * n - x * x).sqrt()) / x
    };
    let log_r = r.ln();
    // Real part of the exponent at t = 0; this is its maximum on the circle.
    let e0 = 0.5 * x * (r - 1.0 / r) - n * log_r;
    let mut nodes = 256usize;
    let mut prev: Option<f64> = None;
    while nodes <= (1 << 22) {
        let mut acc = Complex64::new(0.0, 0.0);
        let step = 2.0 * PI / nodes as f64;
        for k in 0..nodes {
            let t = step * k as f64;
            let eit = Complex64::from_polar(1.0, t);
            let e = 0.5 * x * (r * eit - eit.conj() / r) - n * Complex64::new(log_r, t);
            acc += (e - e0).exp();
        }
        let j = acc.re / nodes as f64 * e0.exp();
        if let Some(p) = prev {
            if (j - p).abs() <= 1e-12 + 1e-11 * j.abs() {
                return Ok(j);
            }
        }
        prev = Some(j);
        nodes *= 2;
    }
    Err(Error::Accuracy(format!(
        "bessel contour for J_{order}({x}) did not settle within 2^22 nodes"
    )))
}

/// The row `[J_0(x), J_1(x), ..., J_max_order(x)]` by Miller's algorithm.
///
/// Downward three-term recurrence from a start order safely past the turning
/// point, rescaled on overflow and normalized with
/// `J_0(x) + 2 sum_k J_{2k}(x) = 1`.  One call amortizes an entire kernel row,
/// unlike per-order contour integration.
pub fn bessel_j_row(x: f64, max_order: usize) -> Vec<f64> {
    assert!(x.is_finite() && x >= 0.0, "bessel row argument must be >= 0");
    if x == 0.0 {
        let mut row = vec![0.0; max_order + 1];
        row[0] = 1.0;
        return row;
    }
    // The true J_m decays superexponentially past m ~ x + O(x^{1/3}); start
    // far enough beyond both max_order and the turning point that the seed
    // error is below f64 resolution after normalization.
    let turn = x.ceil() as usize;
    let start = max_order.max(turn) + 60 + (20.0 * x.cbrt()) as usize;
    let mut row = vec![0.0; max_order + 1];
    let mut even_sum = 0.0; // J_0 + 2 (J_2 + J_4 + ...), accumulated unnormalized
    let mut jp1 = 0.0f64;
    let mut j = 1e-300f64;
    if start <= max_order {
        row[start] = j;
    }
    if start % 2 == 0 {
        even_sum += 2.0 * j;
    }
    let mut k = start;
    while k > 0 {
        let jm1 = (2.0 * k as f64 / x) * j - jp1;
        jp1 = j;
        j = jm1;
        k -= 1;
        if k <= max_order {
            row[k] = j;
        }
        if k > 0 && k % 2 == 0 {
            even_sum += 2.0 * j;
        }
        if j.abs() > 1e250 {
            let scale = 1e-250;
            j *= scale;
            jp1 *= scale;
            even_sum *= scale;
            for v in row.iter_mut() {
                *v *= scale;
            }
        }
    }
    even_sum += j; // the J_0 term enters with weight 1
    let norm = 1.0 / even_sum;
    for v in row.iter_mut() {
        *v *= norm;
    }
    row
}

/// Modified Bessel function `I_n(x)` for integer order `n >= 0` and
/// moderate `x`, by the ascending series.  All terms are positive, so the
/// sum is cancellation-free; accuracy is limited only by rounding.
pub fn bessel_i(order: u32, x: f64) -> Result<f64> {
    if !(x >= 0.0) || x > 50.0 {
        return Err(Error::Domain(format!(
            "modified bessel argument must lie in [0, 50], got {x}"
        )));
    }
    if order > 1000 {
        return Err(Error::Domain(format!("modified bessel order {order} above 1000")));
    }
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let half = 0.5 * x;
    let mut term = 1.0f64; // (x/2)^n / n!
    for k in 1..=order {
        term *= half / f64::from(k);
    }
    let mut sum = term;
    let mut m = 1.0f64;
    let n = f64::from(order);
    while term > 1e-18 * sum {
        term *= half * half / (m * (m + n));
        sum += term;
        m += 1.0;
    }
    Ok(sum)
}

/// Parameters shared by the q-series operations: the ratio `tau = q/p`, a
/// truncation cap and a tolerance for tail bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QContext {
    pub tau: f64,
    pub truncation_order: usize,
    pub tolerance: f64,
}

impl QContext {
    pub fn new(tau: f64, truncation_order: usize, tolerance: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("tau must lie in (0,1), got {tau}")));
        }
        if truncation_order == 0 {
            return Err(Error::Domain("truncation order must be positive".into()));
        }
        if !(tolerance > 0.0) {
            return Err(Error::Domain(format!(
                "tolerance must be positive, got {tolerance}"
            )));
        }
        Ok(QContext { tau, truncation_order, tolerance })
    }

    /// Context for a given `tau` with the truncation order sized from the
    /// geometric tail bound `tau^m / (1 - tau) < tolerance`.
    pub fn for_tau(tau: f64) -> Result<Self> {
        let tolerance = 1e-14;
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("tau must lie in (0,1), got {tau}")));
        }
        let m = ((tolerance * (1.0 - tau)).ln() / tau.ln()).ceil() as usize;
        QContext::new(tau, m.clamp(8, 100_000), tolerance)
    }

    /// Upper bound on the dropped tail of a geometric series with ratio
    /// `tau` truncated after `truncation_order` terms.
    pub fn geometric_tail(&self) -> f64 {
        self.tau.powi(self.truncation_order as i32) / (1.0 - self.tau)
    }
}

/// q-Pochhammer symbol `(a; q)_n`, with `n = None` meaning the infinite
/// product `prod_{k>=0} (1 - a q^k)`.
///
/// The infinite product truncates once `|a| q^k` drops below f64 resolution;
/// every factor past that differs from 1 by less than an ulp of the result.
pub fn q_pochhammer(a: f64, q: f64, n: Option<u64>) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("q must lie in (0,1), got {q}")));
    }
    match n {
        Some(n) => {
            let mut prod = 1.0;
            let mut aq = a;
            for _ in 0..n {
                prod *= 1.0 - aq;
                aq *= q;
            }
            Ok(prod)
        }
        None => {
            if a.abs() >= 1.0 / q {
                return Err(Error::Domain(format!(
                    "infinite product needs |a| < 1/q, got a={a}, q={q}"
                )));
            }
            let mut prod = 1.0;
            let mut aq = a;
            while aq.abs() >= 1e-17 {
                prod *= 1.0 - aq;
                aq *= q;
            }
            Ok(prod)
        }
    }
}

/// Basic hypergeometric series
/// `r_phi_s(a_1..a_r; b_1..b_s; q, z) = sum_n [(a_1;q)_n ... (a_r;q)_n] /
/// [(q;q)_n (b_1;q)_n ... (b_s;q)_n] * [(-1)^n q^{n(n-1)/2}]^{1+s-r} z^n`,
/// summed by the term-to-term ratio.
///
/// Stops when 20 consecutive terms fall below `ctx.tolerance` times the
/// running sum; reports divergence when the term ratio stays >= 1 for 10
/// consecutive steps.
pub fn q_hypergeometric(
    upper: &[f64],
    lower: &[f64],
    q: f64,
    z: f64,
    ctx: &QContext,
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("q must lie in (0,1), got {q}")));
    }
    let extra = 1 + lower.len() as i32 - upper.len() as i32;
    let cap = ctx.truncation_order.min(100_000);
    let mut sum = 1.0;
    let mut term = 1.0f64;
    let mut qn = 1.0; // q^n
    let mut small_streak = 0u32;
    let mut growth_streak = 0u32;
    for n in 0..cap {
        let mut ratio = z / (1.0 - qn * q);
        for &a in upper {
            ratio *= 1.0 - a * qn;
        }
        for &b in lower {
            let factor = 1.0 - b * qn;
            if factor.abs() < 1e-300 {
                return Err(Error::Domain(format!(
                    "lower parameter {b} produces a zero factor at term {n}"
                )));
            }
            ratio /= factor;
        }
        if extra != 0 {
            let factor = -qn;
            ratio *= match extra {
                1 => factor,
                -1 => 1.0 / factor,
                _ => factor.powi(extra),
            };
        }
        let next = term * ratio;
        if next == 0.0 {
            // a vanishing upper-parameter factor terminates the series exactly
            return Ok(sum);
        }
        if next.abs() >= term.abs() {
            growth_streak += 1;
            if growth_streak >= 10 {
                return Err(Error::Divergence(format!(
                    "q-hypergeometric terms grew for 10 consecutive steps at n={n}"
                )));
            }
        } else {
            growth_streak = 0;
        }
        term = next;
        sum += term;
        qn *= q;
        if term.abs() < ctx.tolerance * sum.abs() {
            small_streak += 1;
            if small_streak >= 20 {
                return Ok(sum);
            }
        } else {
            small_streak = 0;
        }
    }
    Err(Error::Accuracy(format!(
        "q-hypergeometric did not converge within {cap} terms"
    )))
}
