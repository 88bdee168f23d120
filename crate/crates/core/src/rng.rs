//! Counter-based uniform source.
//!
//! Every uniform is a pure function of its address `(seed, replica, t, i)`, so
//! replicas can run on any thread in any order and still see the same draws.
//! The address is absorbed word by word into a SplitMix64-style finalizer; each
//! absorption is a bijection on 64 bits followed by full avalanche.

use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Stream used for the standard normals of the limit process, kept disjoint
/// from the urn draws that share a seed.
const NORMAL_STREAM: u64 = 0x6e6f_726d_616c_5f77;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN) ^ mix64(word.wrapping_add(GOLDEN)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformSource {
    seed: u64,
}

impl UniformSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A source whose addresses never coincide with this one's.
    pub fn substream(&self, tag: u64) -> Self {
        Self {
            seed: absorb(mix64(self.seed), tag ^ 0x5375_6273_7472_6561),
        }
    }

    #[inline]
    pub fn bits(&self, replica: u64, t: u64, i: u64) -> u64 {
        let h = absorb(mix64(self.seed), replica);
        let h = absorb(h, t);
        absorb(h, i)
    }

    /// Uniform on `[0, 1)` with 53 bits of resolution.
    #[inline]
    pub fn uniform(&self, replica: u64, t: u64, i: u64) -> f64 {
        (self.bits(replica, t, i) >> 11) as f64 * TWO_POW_NEG_53
    }

    /// Fill `out[i] = uniform(replica, t, i)` for every `i`.
    #[inline]
    pub fn fill_uniforms(&self, replica: u64, t: u64, out: &mut [f64]) {
        let prefix = absorb(absorb(mix64(self.seed), replica), t);
        for (i, u) in out.iter_mut().enumerate() {
            *u = (absorb(prefix, i as u64) >> 11) as f64 * TWO_POW_NEG_53;
        }
    }

    /// Standard normal at address `(replica, t)`.
    ///
    /// Box-Muller, cosine branch: `sqrt(-2 ln u1) * cos(2 pi u2)` with `u1` taken
    /// on `(0, 1]` and both uniforms drawn from a dedicated substream at urn
    /// slots 0 and 1.
    pub fn normal(&self, replica: u64, t: u64) -> f64 {
        let stream = self.substream(NORMAL_STREAM);
        let u1 = 1.0 - stream.uniform(replica, t, 0);
        let u2 = stream.uniform(replica, t, 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_addressing() {
        let a = UniformSource::new(42);
        let b = UniformSource::new(42);
        for t in 0..50 {
            for i in 0..7 {
                assert_eq!(a.uniform(3, t, i).to_bits(), b.uniform(3, t, i).to_bits());
            }
        }
        assert_ne!(a.uniform(0, 0, 0), UniformSource::new(43).uniform(0, 0, 0));
        assert_ne!(a.uniform(0, 0, 1), a.uniform(0, 1, 0));
        assert_ne!(a.uniform(1, 0, 0), a.uniform(0, 1, 0));
    }

    #[test]
    fn fill_matches_pointwise() {
        let src = UniformSource::new(7);
        let mut buf = vec![0.0; 33];
        src.fill_uniforms(5, 11, &mut buf);
        for (i, u) in buf.iter().enumerate() {
            assert_eq!(*u, src.uniform(5, 11, i as u64));
        }
    }

    #[test]
    fn values_in_unit_interval() {
        let src = UniformSource::new(0);
        for k in 0..100_000u64 {
            let u = src.uniform(k % 13, k / 13, k % 5);
            assert!((0.0..1.0).contains(&u));
        }
    }

    // Kolmogorov-Smirnov against U[0,1): at n = 200k the 0.1% critical value is
    // 1.95 / sqrt(n) ~ 0.0044.
    #[test]
    fn uniform_ks() {
        let src = UniformSource::new(2024);
        let n = 200_000usize;
        let mut xs: Vec<f64> = (0..n as u64)
            .map(|k| src.uniform(k / 1000, k % 1000, 3))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = xs
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let lo = k as f64 / n as f64;
                let hi = (k + 1) as f64 / n as f64;
                (x - lo).abs().max((hi - x).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.95 / (n as f64).sqrt(), "KS distance {d}");
    }

    // Chi-square over 64 equal bins, 63 dof: the 0.1% upper quantile is ~103.4.
    #[test]
    fn uniform_chi_square_across_urn_index() {
        let src = UniformSource::new(99);
        let bins = 64usize;
        let n = 256_000u64;
        let mut counts = vec![0u64; bins];
        for k in 0..n {
            let u = src.uniform(0, 17, k);
            counts[(u * bins as f64) as usize] += 1;
        }
        let expected = n as f64 / bins as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 103.4, "chi2 {chi2}");
    }

    // Neighbouring addresses must be uncorrelated; 4/sqrt(n) band.
    #[test]
    fn adjacent_addresses_uncorrelated() {
        let src = UniformSource::new(5);
        let n = 100_000u64;
        let corr = |f: &dyn Fn(u64) -> (f64, f64)| {
            let (mut sx, mut sy, mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for k in 0..n {
                let (x, y) = f(k);
                sx += x;
                sy += y;
                sxy += x * y;
                sxx += x * x;
                syy += y * y;
            }
            let nf = n as f64;
            let cov = sxy / nf - sx * sy / nf / nf;
            cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt()
        };
        let band = 4.0 / (n as f64).sqrt();
        let r_urn = corr(&|k| (src.uniform(0, k, 0), src.uniform(0, k, 1)));
        let r_time = corr(&|k| (src.uniform(0, k, 0), src.uniform(0, k + 1, 0)));
        let r_rep = corr(&|k| (src.uniform(k, 3, 0), src.uniform(k + 1, 3, 0)));
        for r in [r_urn, r_time, r_rep] {
            assert!(r.abs() < band, "correlation {r}");
        }
    }

    #[test]
    fn normal_moments() {
        let src = UniformSource::new(11);
        let n = 200_000u64;
        let xs: Vec<f64> = (0..n).map(|k| src.normal(k, 0)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let kurt = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n as f64 / var / var - 3.0;
        let nf = n as f64;
        assert!(mean.abs() < 4.0 / nf.sqrt());
        assert!((var - 1.0).abs() < 4.0 * (2.0 / nf).sqrt());
        assert!(kurt.abs() < 4.0 * (24.0 / nf).sqrt());
        assert!(xs.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn substreams_differ() {
        let src = UniformSource::new(1);
        let sub = src.substream(1);
        assert_ne!(sub.seed(), src.seed());
        assert_ne!(sub.uniform(0, 0, 0), src.uniform(0, 0, 0));
        assert_ne!(src.substream(2).seed(), sub.seed());
    }
}
