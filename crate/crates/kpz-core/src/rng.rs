//! Counter-based splittable random number generator.
//!
//! A SplitMix64 core (Steele, Lea, Flood 2014) with streams derived by
//! hashing a `(seed, run, label)` triple through the same avalanche
//! finalizer. Every replica and every particle gets its own stream, so
//! simulation output is reproducible independently of worker count and
//! event interleaving. Not cryptographic.

/// SplitMix64 state. One instance per logical stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SplitMix64 {
    /// Stream seeded directly.
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: mix64(seed.wrapping_add(GOLDEN)) }
    }

    /// Derived stream for replica `run`, sub-stream `label`.
    ///
    /// Each particle in a simulation owns the stream `(seed, run, particle
    /// label)`; adding or removing other particles leaves it untouched.
    pub fn stream(seed: u64, run: u64, label: u64) -> Self {
        let mut h = mix64(seed ^ GOLDEN.wrapping_mul(run.wrapping_add(1)));
        h = mix64(h ^ 0xBF58_476D_1CE4_E5B9u64.wrapping_mul(label.wrapping_add(1)));
        SplitMix64 { state: h }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0,1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Exponential waiting time with the given rate.
    #[inline]
    pub fn exp(&mut self, rate: f64) -> f64 {
        debug_assert!(rate > 0.0);
        // 1 - u is in (0, 1], so the log never sees zero.
        -(-self.next_f64()).ln_1p() / rate
    }

    /// Exact Poisson sample.
    ///
    /// Sequential inversion for small means, Hormann's PTRS transformed
    /// rejection for large ones; both are exact samplers of the Poisson law.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        debug_assert!(mean >= 0.0);
        if mean < 10.0 {
            // inversion by sequential search
            let l = (-mean).exp();
            let mut k = 0u64;
            let mut p = 1.0;
            loop {
                p *= self.next_f64();
                if p <= l {
                    return k;
                }
                k += 1;
            }
        }
        // PTRS (W. Hormann, "The transformed rejection method for generating
        // Poisson random variables", 1993)
        let b = 0.931 + 2.53 * mean.sqrt();
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        let ln_mean = mean.ln();
        loop {
            let u = self.next_f64() - 0.5;
            let v = self.next_f64();
            let us = 0.5 - u.abs();
            let kf = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return kf as u64;
            }
            if kf < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            let k = kf as u64;
            let lhs = (v * inv_alpha / (a / (us * us) + b)).ln();
            if lhs <= kf * ln_mean - mean - ln_factorial(k) {
                return k;
            }
        }
    }
}

/// ln(k!) exact to full double precision; table below 1024, Stirling above.
pub fn ln_factorial(k: u64) -> f64 {
    const N: usize = 1024;
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0f64; N];
        for i in 2..N {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    });
    if (k as usize) < N {
        return table[k as usize];
    }
    // Stirling series; the k^-5 term is < 1e-18 here.
    let x = k as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}
