//! Fredholm determinants of the Airy kernels, the limit laws they define,
//! and lattice determinants for the prelimit models.
//!
//! Continuum determinants use the standard Nystrom discretization: a
//! Gauss-Legendre rule on [s, s+16], the symmetrized matrix
//! `I - W^{1/2} K W^{1/2}`, and a dense LU factorization.  Convergence in
//! the node count is spectral; the truncation at s+16 is far below the
//! working tolerance because the kernels decay exponentially.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::kernels::{k_rescaled_grid, KernelFamily, KernelModel};
use crate::quad::gauss_legendre_on;
use crate::{Error, Result};

/// The two limit laws: the one-point distributions of the curved and flat
/// interface classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Gue,
    Goe2,
}

impl fmt::Display for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawKind::Gue => write!(f, "gue"),
            LawKind::Goe2 => write!(f, "goe2"),
        }
    }
}

impl FromStr for LawKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gue" => Ok(LawKind::Gue),
            "goe2" => Ok(LawKind::Goe2),
            other => Err(Error::Domain(format!(
                "unknown law {other:?} (expected gue or goe2)"
            ))),
        }
    }
}

/// A limit law together with its defining kernel and determinant node
/// count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitLaw {
    pub kind: LawKind,
    pub kernel: KernelModel,
    pub quadrature: usize,
}

impl LimitLaw {
    pub fn gue() -> Self {
        LimitLaw { kind: LawKind::Gue, kernel: KernelModel::airy2(), quadrature: 80 }
    }

    pub fn goe2() -> Self {
        LimitLaw { kind: LawKind::Goe2, kernel: KernelModel::airy1(), quadrature: 80 }
    }

    pub fn of(kind: LawKind) -> Self {
        match kind {
            LawKind::Gue => LimitLaw::gue(),
            LawKind::Goe2 => LimitLaw::goe2(),
        }
    }

    pub fn with_quadrature(mut self, nodes: usize) -> Self {
        self.quadrature = nodes;
        self
    }
}

/// An arithmetic lattice `anchor + delta Z` clipped to `[s_min, s_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeGrid {
    pub delta: f64,
    pub anchor: f64,
    pub s_min: f64,
    pub s_max: f64,
}

impl LatticeGrid {
    pub fn new(delta: f64, anchor: f64, s_min: f64, s_max: f64) -> Result<Self> {
        if !(delta > 0.0) || !(s_min <= s_max) {
            return Err(Error::Domain(format!(
                "lattice requires delta > 0 and s_min <= s_max, got delta {delta}, [{s_min}, {s_max}]"
            )));
        }
        Ok(LatticeGrid { delta, anchor, s_min, s_max })
    }

    /// The lattice spanning the natural rescaled window of a prelimit model,
    /// anchored on the model's own lattice.
    pub fn for_model(model: &KernelModel, s_min: f64, s_max: f64) -> Result<Self> {
        LatticeGrid::new(model.lattice_delta()?, model.snap(0.0)?, s_min, s_max)
    }

    /// All lattice points inside `[s_min, s_max]`, ascending.
    pub fn points(&self) -> Vec<f64> {
        let lo = ((self.s_min - self.anchor) / self.delta).ceil() as i64;
        let hi = ((self.s_max - self.anchor) / self.delta).floor() as i64;
        (lo..=hi).map(|k| self.anchor + k as f64 * self.delta).collect()
    }

    /// Lattice points in `(s, s_max]`, ascending.
    pub fn points_above(&self, s: f64) -> Vec<f64> {
        self.points().into_iter().filter(|&p| p > s + 1e-12 * self.delta).collect()
    }
}

fn require_limit_family(kernel: &KernelModel) -> Result<()> {
    match kernel.family {
        KernelFamily::Airy1 | KernelFamily::Airy2 => Ok(()),
        other => Err(Error::Domain(format!(
            "continuum determinants are defined for the limiting kernels, not {other:?}"
        ))),
    }
}

/// Fredholm determinant `det(I - K)` on `L^2(s, infinity)` for a limiting
/// kernel, by the symmetrized Nystrom rule with `nodes` Gauss-Legendre
/// points on `[s, s+16]`.
pub fn det_continuum(kernel: &KernelModel, s: f64, nodes: usize) -> Result<f64> {
    require_limit_family(kernel)?;
    if nodes < 16 {
        return Err(Error::Domain(format!("need at least 16 nodes, got {nodes}")));
    }
    let (x, w) = gauss_legendre_on(nodes, s, s + 16.0);
    let k = k_rescaled_grid(kernel, &x)?;
    let sw: Vec<f64> = w.iter().map(|&v| v.sqrt()).collect();
    let m = DMatrix::from_fn(nodes, nodes, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - sw[i] * sw[j] * k[(i, j)]
    });
    Ok(m.lu().determinant())
}

/// Determinant of `I - delta K` on the lattice points of `grid` above `s`:
/// the piecewise-constant counterpart of [`det_continuum`], exact for the
/// prelimit models on their own lattices.
pub fn det_lattice(kernel: &KernelModel, grid: &LatticeGrid, s: f64) -> Result<f64> {
    let pts = grid.points_above(s);
    if pts.is_empty() {
        return Ok(1.0);
    }
    let k = k_rescaled_grid(kernel, &pts)?;
    let n = pts.len();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - grid.delta * k[(i, j)]
    });
    Ok(m.lu().determinant())
}

const LAW_RANGE: f64 = 10.0;

fn check_law_range(s: f64) -> Result<()> {
    if s.abs() > LAW_RANGE {
        return Err(Error::Range(format!(
            "law evaluation limited to [-{LAW_RANGE}, {LAW_RANGE}], got {s}"
        )));
    }
    Ok(())
}

fn cdf_at(law: &LimitLaw, s: f64) -> Result<f64> {
    det_continuum(&law.kernel, s, law.quadrature)
}

/// Distribution function of the law at `s`.
pub fn law_cdf(law: &LimitLaw, s: f64) -> Result<f64> {
    check_law_range(s)?;
    cdf_at(law, s)
}

fn pdf_at(law: &LimitLaw, s: f64) -> Result<f64> {
    // centered difference with one Richardson level
    let d = |h: f64| -> Result<f64> {
        Ok((cdf_at(law, s + h)? - cdf_at(law, s - h)?) / (2.0 * h))
    };
    let h = 1e-4;
    Ok((4.0 * d(h / 2.0)? - d(h)?) / 3.0)
}

/// Density of the law at `s`, by differentiating the determinant.
pub fn law_pdf(law: &LimitLaw, s: f64) -> Result<f64> {
    check_law_range(s)?;
    pdf_at(law, s)
}

/// First `max_order` standardized moments of the law: mean, variance,
/// skewness, excess kurtosis.  Density quadrature over [-12, 12], where the
/// dropped tail mass is far below the advertised accuracy.
pub fn law_moments(law: &LimitLaw, max_order: usize) -> Result<Vec<f64>> {
    if !(1..=4).contains(&max_order) {
        return Err(Error::Domain(format!(
            "moments available up to order 4, requested {max_order}"
        )));
    }
    let (x, w) = gauss_legendre_on(240, -12.0, 12.0);
    let dens: Result<Vec<f64>> = x.par_iter().map(|&s| pdf_at(law, s)).collect();
    let dens = dens?;
    let mut raw = [0.0f64; 5];
    for ((&xi, &wi), &di) in x.iter().zip(w.iter()).zip(dens.iter()) {
        let mut p = wi * di;
        for slot in raw.iter_mut() {
            *slot += p;
            p *= xi;
        }
    }
    let mean = raw[1];
    let var = raw[2] - mean * mean;
    let m3 = raw[3] - 3.0 * mean * raw[2] + 2.0 * mean.powi(3);
    let m4 = raw[4] - 4.0 * mean * raw[3] + 6.0 * mean * mean * raw[2] - 3.0 * mean.powi(4);
    let out = [mean, var, m3 / var.powf(1.5), m4 / (var * var) - 3.0];
    Ok(out[..max_order].to_vec())
}

/// `| delta sum_{k >= 0} f(k delta) - int_{-delta/2}^{inf} f |`: the error
/// of the midpoint-shifted Riemann sum on the half line.  The integrand
/// must be negligible beyond x = 60.
pub fn midpoint_gap(f: impl Fn(f64) -> f64, delta: f64) -> f64 {
    let terms = (60.0 / delta) as usize;
    let mut sum = 0.0;
    for k in 0..terms {
        sum += f(k as f64 * delta);
    }
    sum *= delta;
    let mut integral = 0.0;
    let lo = -delta / 2.0;
    let panels = 8;
    let width = (60.0 - lo) / panels as f64;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let (x, w) = gauss_legendre_on(48, a, a + width);
        for (&xi, &wi) in x.iter().zip(w.iter()) {
            integral += wi * f(xi);
        }
    }
    (sum - integral).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_kind_round_trips() {
        for kind in [LawKind::Gue, LawKind::Goe2] {
            assert_eq!(kind.to_string().parse::<LawKind>().unwrap(), kind);
        }
        assert!("gse".parse::<LawKind>().is_err());
    }

    #[test]
    fn lattice_points_respect_bounds() {
        let grid = LatticeGrid::new(0.25, 0.1, -1.0, 1.0).unwrap();
        let pts = grid.points();
        assert!(pts.iter().all(|&p| (-1.0..=1.0).contains(&p)));
        assert_eq!(pts.len(), 8);
        let above = grid.points_above(0.1);
        assert!(above.iter().all(|&p| p > 0.1));
        assert_eq!(above.len(), 3);
    }

    #[test]
    fn empty_lattice_gives_unit_determinant() {
        let grid = LatticeGrid::new(0.2, 0.0, 0.0, 1.0).unwrap();
        let kernel = KernelModel::airy2();
        assert_eq!(det_lattice(&kernel, &grid, 5.0).unwrap(), 1.0);
    }
}
