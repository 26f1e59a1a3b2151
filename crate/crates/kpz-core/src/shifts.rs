//! Closed-form shift and scaling constants for the growth models: the
//! asymmetry series `a_pq`, the critical asymmetry where the height shift
//! vanishes, the weak-asymmetry expansion, the two series forms of the
//! constant `G`, and per-model scaling constants.

use serde::Serialize;
use std::fmt;
use std::str::FromStr;

use crate::specfun::{q_pochhammer, QContext};
use crate::{Error, Result};

/// Euler-Mascheroni constant, 10 digits.
const EULER_GAMMA: f64 = 0.577_215_664_9;

/// The growth models covered by the toolkit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    FlatPng,
    DropletPng,
    TasepFlat,
    TasepStep,
    Pasep,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Model::FlatPng => "flat_png",
            Model::DropletPng => "droplet_png",
            Model::TasepFlat => "tasep_flat",
            Model::TasepStep => "tasep_step",
            Model::Pasep => "pasep",
        };
        f.write_str(name)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Model> {
        match s {
            "flat_png" => Ok(Model::FlatPng),
            "droplet_png" => Ok(Model::DropletPng),
            "tasep_flat" => Ok(Model::TasepFlat),
            "tasep_step" => Ok(Model::TasepStep),
            "pasep" => Ok(Model::Pasep),
            other => Err(Error::Domain(format!(
                "unknown model '{other}' (expected flat_png, droplet_png, tasep_flat, tasep_step or pasep)"
            ))),
        }
    }
}

/// Macroscopic and fluctuation scaling constants of one model.
///
/// The observable sits at `c1 t` to leading order and fluctuates on the
/// scale `c2 t^{1/3}`; `a` is the lattice shift entering the rescaled
/// kernel and `eta = a - 1/2` the matching first-order distribution shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingConstants {
    pub model: Model,
    pub c1: f64,
    pub c2: f64,
    pub a: f64,
    pub eta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ScalingConstants {
    /// Lattice spacing of the rescaled observable at time `t`,
    /// `delta_t = c2^{-1} t^{-1/3}`.
    pub fn delta_t(&self, t: f64) -> f64 {
        1.0 / (self.c2 * t.cbrt())
    }
}

/// The asymmetry shift series `a_pq = sum_{l>=1} q^l / (p^l - q^l)` with
/// `q = 1 - p`, summed through the equivalent form `tau^l / (1 - tau^l)`,
/// `tau = q/p`.
///
/// Exactly 0 at `p = 1`; diverges as `p -> 1/2` and reports a divergence
/// error at and below the boundary, or when `tau` is so close to 1 that the
/// series cannot settle within the iteration cap.
pub fn a_pq(p: f64) -> Result<f64> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::Divergence(format!(
            "a_pq requires p in (1/2, 1], got {p}"
        )));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let tau = (1.0 - p) / p;
    let mut sum = 0.0;
    let mut tau_l = 1.0;
    for _ in 0..1_000_000 {
        tau_l *= tau;
        let term = tau_l / (1.0 - tau_l);
        sum += term;
        if term < 1e-15 * sum {
            return Ok(sum);
        }
    }
    Err(Error::Divergence(format!(
        "a_pq series does not settle at p = {p} (tau = {tau} too close to 1)"
    )))
}

/// The critical asymmetry: the unique root of `a_pq(p) = 1/2` on (1/2, 1).
///
/// `a_pq` is strictly decreasing in `p` (it is a sum of decreasing terms),
/// so plain bisection is exact to the last bit after 100 halvings.
pub fn p_critical() -> f64 {
    let mut lo = 0.5;
    let mut hi = 1.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        // below the root the series exceeds 1/2 (or diverges)
        let above = match a_pq(mid) {
            Ok(v) => v < 0.5,
            Err(_) => false,
        };
        if above {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Height shift `a~ = 2 a_pq(p) - 1`; zero exactly at the critical
/// asymmetry, -1 at `p = 1`.
pub fn height_shift(p: f64) -> Result<f64> {
    Ok(2.0 * a_pq(p)? - 1.0)
}

/// Two-term weak-asymmetry approximation of `a_pq` at `p = (1+beta)/2`:
/// `(gamma_E - ln(2 beta)) / (2 beta) + 1/4`, valid for small `beta` with an
/// `O(beta)` remainder.
pub fn wasep_expansion(beta: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 0.2) {
        return Err(Error::Domain(format!(
            "wasep expansion requires beta in (0, 0.2], got {beta}"
        )));
    }
    Ok((EULER_GAMMA - (2.0 * beta).ln()) / (2.0 * beta) + 0.25)
}

/// Both series forms of the constant `G`:
/// `g_pochhammer = sum_{k>=1} (1 - (tau^k; tau)_inf)` and
/// `g_simple = sum_{l>=1} tau^l / (1 - tau^l)`.
///
/// The two agree (a q-series summation identity); both are summed to 1e-13
/// relative.
pub fn g_forms(tau: f64, ctx: &QContext) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Domain(format!("g forms require tau in (0,1), got {tau}")));
    }
    let tol = ctx.tolerance.min(1e-13);

    let mut simple = 0.0;
    let mut tau_l = 1.0;
    let mut simple_converged = false;
    for _ in 0..1_000_000 {
        tau_l *= tau;
        let term = tau_l / (1.0 - tau_l);
        simple += term;
        if term < tol * simple {
            simple_converged = true;
            break;
        }
    }
    if !simple_converged {
        return Err(Error::Accuracy(format!(
            "simple form of G did not settle at tau = {tau}"
        )));
    }

    let mut pochhammer = 0.0;
    let mut tau_k = 1.0;
    let mut converged = false;
    for _ in 0..1_000_000 {
        tau_k *= tau;
        let term = 1.0 - q_pochhammer(tau_k, tau, None)?;
        pochhammer += term;
        if term < tol * pochhammer {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Accuracy(format!(
            "Pochhammer form of G did not settle at tau = {tau}"
        )));
    }
    Ok((pochhammer, simple))
}

/// Scaling constants of `model`.
///
/// `sigma` (particle density parameter) is required for `tasep_step` and
/// `pasep`; `p` is required for `pasep`, whose lattice shift absorbs the
/// asymmetry series, `a = 1/2 - a_pq(p)/sqrt(sigma)`.
pub fn scaling_constants(model: Model, sigma: Option<f64>, p: Option<f64>) -> Result<ScalingConstants> {
    let need_sigma = || -> Result<f64> {
        let s = sigma.ok_or_else(|| {
            Error::Domain(format!("model {model} requires a sigma parameter"))
        })?;
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("sigma must lie in (0,1), got {s}")));
        }
        Ok(s)
    };
    match model {
        Model::FlatPng => Ok(ScalingConstants {
            model,
            c1: 2.0,
            c2: 2.0f64.cbrt(),
            // no first-order correction at this scaling; the shift pair
            // (a, eta) = (0, -1/2) keeps a = eta + 1/2
            a: 0.0,
            eta: -0.5,
            sigma: None,
        }),
        Model::DropletPng => Ok(ScalingConstants {
            model,
            c1: 2.0,
            c2: 1.0,
            a: 0.5,
            eta: 0.0,
            sigma: None,
        }),
        Model::TasepFlat => Ok(ScalingConstants {
            model,
            c1: 0.5,
            c2: 1.0,
            a: 0.5,
            eta: 0.0,
            sigma: None,
        }),
        Model::TasepStep => {
            let s = need_sigma()?;
            Ok(ScalingConstants {
                model,
                c1: 1.0 - 2.0 * s.sqrt(),
                c2: s.powf(-1.0 / 6.0) * (1.0 - s.sqrt()).powf(2.0 / 3.0),
                a: 0.5,
                eta: 0.0,
                sigma: Some(s),
            })
        }
        Model::Pasep => {
            let s = need_sigma()?;
            let p = p.ok_or_else(|| {
                Error::Domain("pasep requires the jump probability p".into())
            })?;
            let shift = a_pq(p)?;
            let a = 0.5 - shift / s.sqrt();
            Ok(ScalingConstants {
                model,
                c1: 1.0 - 2.0 * s.sqrt(),
                c2: s.powf(-1.0 / 6.0) * (1.0 - s.sqrt()).powf(2.0 / 3.0),
                a,
                eta: a - 0.5,
                sigma: Some(s),
            })
        }
    }
}
