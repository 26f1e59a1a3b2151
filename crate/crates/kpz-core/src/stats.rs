//! Statistical test helpers for validating sampled distributions: pooled
//! chi-square tests, the two-sample Kolmogorov-Smirnov statistic, the
//! Dvoretzky-Kiefer-Wolfowitz band, and block jackknife errors.

use crate::{Error, Result};

/// A chi-square statistic with its degrees of freedom.
#[derive(Debug, Clone, Copy)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
}

impl ChiSquare {
    /// True when the statistic stays below the 1% critical value.
    pub fn accepted_at_1pct(&self) -> bool {
        self.statistic <= chi_square_critical_1pct(self.df)
    }
}

/// 99th percentile of the chi-square distribution.  Tabulated through 20
/// degrees of freedom, Wilson-Hilferty beyond.
pub fn chi_square_critical_1pct(df: usize) -> f64 {
    const TABLE: [f64; 20] = [
        6.635, 9.210, 11.345, 13.277, 15.086, 16.812, 18.475, 20.090, 21.666, 23.209, 24.725,
        26.217, 27.688, 29.141, 30.578, 32.000, 33.409, 34.805, 36.191, 37.566,
    ];
    if df == 0 {
        return 0.0;
    }
    if df <= TABLE.len() {
        return TABLE[df - 1];
    }
    let d = df as f64;
    let h = 2.0 / (9.0 * d);
    d * (1.0 - h + 2.326_347_874 * h.sqrt()).powi(3)
}

/// Goodness of fit of observed counts against expected counts, pooling
/// adjacent cells from the left until each pooled cell expects at least
/// `min_expected`.  A trailing underfull pool merges into its neighbor.
pub fn pooled_chi_square(observed: &[u64], expected: &[f64], min_expected: f64) -> Result<ChiSquare> {
    if observed.len() != expected.len() || observed.is_empty() {
        return Err(Error::Domain(
            "observed and expected cell counts must align and be non-empty".into(),
        ));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc_o = 0.0;
    let mut acc_e = 0.0;
    for (&o, &e) in observed.iter().zip(expected.iter()) {
        if e < 0.0 {
            return Err(Error::Domain("expected counts must be non-negative".into()));
        }
        acc_o += o as f64;
        acc_e += e;
        if acc_e >= min_expected {
            cells.push((acc_o, acc_e));
            acc_o = 0.0;
            acc_e = 0.0;
        }
    }
    if acc_e > 0.0 || acc_o > 0.0 {
        if let Some(last) = cells.last_mut() {
            last.0 += acc_o;
            last.1 += acc_e;
        } else {
            cells.push((acc_o, acc_e));
        }
    }
    if cells.len() < 2 {
        return Err(Error::Domain(
            "need at least two pooled cells for a chi-square test".into(),
        ));
    }
    let statistic = cells
        .iter()
        .map(|&(o, e)| (o - e).powi(2) / e)
        .sum::<f64>();
    Ok(ChiSquare { statistic, df: cells.len() - 1 })
}

/// Two-sample chi-square over shared cells, pooling until the combined
/// count reaches `min_combined`.
pub fn two_sample_chi_square(
    counts_a: &[u64],
    counts_b: &[u64],
    min_combined: f64,
) -> Result<ChiSquare> {
    if counts_a.len() != counts_b.len() || counts_a.is_empty() {
        return Err(Error::Domain("count vectors must align and be non-empty".into()));
    }
    let na: f64 = counts_a.iter().map(|&c| c as f64).sum();
    let nb: f64 = counts_b.iter().map(|&c| c as f64).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("both samples must be non-empty".into()));
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&a, &b) in counts_a.iter().zip(counts_b.iter()) {
        acc.0 += a as f64;
        acc.1 += b as f64;
        if acc.0 + acc.1 >= min_combined {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        if let Some(last) = cells.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            cells.push(acc);
        }
    }
    if cells.len() < 2 {
        return Err(Error::Domain(
            "need at least two pooled cells for a chi-square test".into(),
        ));
    }
    let statistic = cells
        .iter()
        .map(|&(a, b)| (nb * a - na * b).powi(2) / (na * nb * (a + b)))
        .sum::<f64>();
    Ok(ChiSquare { statistic, df: cells.len() - 1 })
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(sample_a: &[f64], sample_b: &[f64]) -> Result<f64> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(Error::Domain("both samples must be non-empty".into()));
    }
    let mut a = sample_a.to_vec();
    let mut b = sample_b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(sup)
}

/// 1% critical value for the two-sample Kolmogorov-Smirnov statistic.
pub fn ks_critical_1pct(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.628 * ((n + m) / (n * m)).sqrt()
}

/// Half-width of the Dvoretzky-Kiefer-Wolfowitz confidence band for an
/// empirical distribution from `n` samples at level `alpha`.
pub fn dkw_epsilon(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Plug-in sample moments: mean, variance, skewness, excess kurtosis.
pub fn sample_moments(values: &[f64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut c = [0.0f64; 3];
    for &v in values {
        let d = v - mean;
        c[0] += d * d;
        c[1] += d * d * d;
        c[2] += d * d * d * d;
    }
    let m2 = c[0] / n;
    let m3 = c[1] / n;
    let m4 = c[2] / n;
    [mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0]
}

/// Block jackknife: the statistic on the full sample and its standard
/// error from `blocks` leave-one-block-out replicates.
pub fn jackknife<F>(values: &[f64], blocks: usize, stat: F) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64,
{
    if blocks < 2 || values.len() < blocks {
        return Err(Error::Domain(format!(
            "jackknife needs at least 2 blocks and one value per block, got {} values in {blocks} blocks",
            values.len()
        )));
    }
    let full = stat(values);
    let n = values.len();
    let mut replicates = Vec::with_capacity(blocks);
    for b in 0..blocks {
        let lo = b * n / blocks;
        let hi = (b + 1) * n / blocks;
        let mut rest = Vec::with_capacity(n - (hi - lo));
        rest.extend_from_slice(&values[..lo]);
        rest.extend_from_slice(&values[hi..]);
        replicates.push(stat(&rest));
    }
    let mean = replicates.iter().sum::<f64>() / blocks as f64;
    let ss = replicates.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
    let se = ((blocks as f64 - 1.0) / blocks as f64 * ss).sqrt();
    Ok((full, se))
}
