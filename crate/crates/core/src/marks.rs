//! Space-time marks as a pure function of `(seed, kind, ids, slot)`.
//!
//! Each key is hashed with a chain of splitmix64 finalizers into 64 uniform
//! bits, which are then pushed through the inverse CDF of the mark's law.
//! Nothing is stored, so any slot (including negative ones) can be revisited
//! at any time and from any thread.

use crate::error::{Error, Result};
use crate::params::{FadingLaw, ModelParams, NoiseLaw};
use crate::pointproc::PointPattern;

const TAG_MAC: u64 = 0x9e37_79b9_7f4a_7c15;
const TAG_FADING: u64 = 0xc2b2_ae3d_27d4_eb4f;
const TAG_NOISE: u64 = 0x1656_67b1_9e37_79f9;

const STAGE_I: u64 = 0xd6e8_feb8_6659_fd93;
const STAGE_J: u64 = 0xa076_1d64_78bd_642f;
const STAGE_SLOT: u64 = 0xe703_7ed1_a0b4_28db;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Largest unit exponential the generator produces: `-ln(2^-53)`.
pub const MAX_UNIT_EXPONENTIAL: f64 = 53.0 * std::f64::consts::LN_2;
/// Largest argument passed to a fading quantile function: `1 - 2^-53`.
pub const MAX_UNIT_OPEN: f64 = 1.0 - TWO_POW_M53;

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed from a base seed and a label.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    mix64(mix64(seed ^ 0x243f_6a88_85a3_08d3) ^ label.wrapping_mul(STAGE_J))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkKind {
    Mac(usize),
    Fading(usize, usize),
    Noise(usize),
}

/// Stateless generator of `e_i(n)`, `F_{i,j}(n)` and `W_j(n)`.
#[derive(Debug, Clone, Copy)]
pub struct MarkStream {
    seed: u64,
    p: f64,
    fading: FadingLaw,
    noise: NoiseLaw,
}

impl MarkStream {
    pub fn new(params: &ModelParams, seed: u64) -> Self {
        MarkStream {
            seed,
            p: params.aloha_p,
            fading: params.fading,
            noise: params.noise,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same laws, different randomness.
    pub fn reseeded(&self, seed: u64) -> Self {
        MarkStream { seed, ..*self }
    }

    #[inline]
    fn bits(&self, tag: u64, i: u64, j: u64, slot: i64) -> u64 {
        let mut h = mix64(self.seed ^ tag);
        h = mix64(h ^ i.wrapping_mul(STAGE_I));
        h = mix64(h ^ j.wrapping_mul(STAGE_J));
        mix64(h ^ (slot as u64).wrapping_mul(STAGE_SLOT))
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    fn unit_closed_open(bits: u64) -> f64 {
        (bits >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    fn unit_open_closed(bits: u64) -> f64 {
        ((bits >> 11) + 1) as f64 * TWO_POW_M53
    }

    /// `e_i(n) = 1`.
    #[inline]
    pub fn transmits(&self, i: usize, slot: i64) -> bool {
        Self::unit_closed_open(self.bits(TAG_MAC, i as u64, 0, slot)) < self.p
    }

    /// `F_{i,j}(n)`; the caller guarantees `i != j`.
    #[inline]
    pub fn fading(&self, i: usize, j: usize, slot: i64) -> f64 {
        let b = self.bits(TAG_FADING, i as u64, j as u64, slot);
        match self.fading {
            FadingLaw::Exponential { mu } => -Self::unit_open_closed(b).ln() / mu,
            FadingLaw::Quantile { quantile, .. } => quantile(1.0 - Self::unit_open_closed(b)),
        }
    }

    /// `W_j(n)`.
    #[inline]
    pub fn noise(&self, j: usize, slot: i64) -> f64 {
        match self.noise {
            NoiseLaw::Off => 0.0,
            NoiseLaw::Constant(w) => w,
            NoiseLaw::Exponential { mean } => {
                -Self::unit_open_closed(self.bits(TAG_NOISE, j as u64, 0, slot)).ln() * mean
            }
        }
    }

    /// Generic mark evaluation; mac marks are returned as 0.0 / 1.0.
    pub fn mark(&self, kind: MarkKind, slot: i64) -> Result<f64> {
        match kind {
            MarkKind::Mac(i) => Ok(if self.transmits(i, slot) { 1.0 } else { 0.0 }),
            MarkKind::Fading(i, j) if i == j => Err(Error::Key(format!("fading F_{{{i},{i}}} is not part of the model"))),
            MarkKind::Fading(i, j) => Ok(self.fading(i, j, slot)),
            MarkKind::Noise(j) => Ok(self.noise(j, slot)),
        }
    }
}

/// `Phi^1(n)`: ids of the nodes transmitting in `slot`, ascending.
pub fn transmitters(pattern: &PointPattern, stream: &MarkStream, slot: i64) -> Vec<usize> {
    (0..pattern.len()).filter(|&i| stream.transmits(i, slot)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointproc::{sample_poisson, Window};

    fn params(p: f64, noise: NoiseLaw) -> ModelParams {
        ModelParams::poisson(1.0, p, 1.0, 1.0, 1.0, 4.0, noise, Window::torus(20.0, 20.0))
    }

    #[test]
    fn replay_stable() {
        let s = MarkStream::new(&params(0.5, NoiseLaw::Exponential { mean: 1.0 }), 42);
        for slot in [-5i64, 0, 7, 1 << 40] {
            assert_eq!(s.mark(MarkKind::Fading(3, 9), slot), s.mark(MarkKind::Fading(3, 9), slot));
            assert_eq!(s.noise(2, slot), s.noise(2, slot));
            assert_eq!(s.transmits(11, slot), s.transmits(11, slot));
        }
        // regression pin: the hash chain must never change silently
        let t = MarkStream::new(&params(0.5, NoiseLaw::Off), 1);
        let mac: String = (0..16).map(|i| if t.transmits(i, 0) { '1' } else { '0' }).collect();
        assert_eq!(mac, "0010110010010101");
        assert_eq!(t.fading(0, 1, 0).to_bits(), 4608672199314264195);
        assert_eq!(mix64(1), 6238072747940578789);
        assert_eq!(derive_seed(1, 2), 2860587052360108457);
    }

    #[test]
    fn fading_self_key_is_an_error() {
        let s = MarkStream::new(&params(0.5, NoiseLaw::Off), 0);
        assert!(matches!(s.mark(MarkKind::Fading(4, 4), 0), Err(Error::Key(_))));
    }

    #[test]
    fn noise_off_is_zero() {
        let s = MarkStream::new(&params(0.5, NoiseLaw::Off), 3);
        assert!((0..1000).all(|j| s.mark(MarkKind::Noise(j), j as i64).unwrap() == 0.0));
    }

    #[test]
    fn mac_frequency() {
        let s = MarkStream::new(&params(0.5, NoiseLaw::Off), 5);
        let n = 100_000;
        let ones = (0..n).filter(|&k| s.transmits(k % 1000, (k / 1000) as i64)).count();
        let f = ones as f64 / n as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((f - 0.5).abs() < 3.0 * se, "{f}");
    }

    #[test]
    fn fading_moments() {
        let s = MarkStream::new(&params(0.5, NoiseLaw::Off), 6);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|k| s.fading(k % 300, 300 + k / 300, 1)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{mean}");
        let tail = xs.iter().filter(|&&x| x > 2.0).count() as f64 / n as f64;
        let p = (-2.0f64).exp();
        assert!((tail - p).abs() < 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "{tail}");
        assert!(xs.iter().all(|&x| (0.0..=MAX_UNIT_EXPONENTIAL).contains(&x)));
    }

    #[test]
    fn exponential_noise_mean() {
        let s = MarkStream::new(&params(0.5, NoiseLaw::Exponential { mean: 2.0 }), 7);
        let n = 50_000;
        let mean = (0..n).map(|k| s.noise(k, 3)).sum::<f64>() / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * 2.0 / (n as f64).sqrt());
    }

    #[test]
    fn independence_smoke() {
        // correlation between marks at paired distinct keys
        let s = MarkStream::new(&params(0.5, NoiseLaw::Off), 8);
        let n = 10_000;
        let a: Vec<f64> = (0..n).map(|k| s.fading(k, k + 1, 0)).collect();
        let b: Vec<f64> = (0..n).map(|k| s.fading(k + 1, k, 0)).collect();
        let c: Vec<f64> = (0..n).map(|k| s.fading(k, k + 1, 1)).collect();
        assert!(corr(&a, &b).abs() < 0.03);
        assert!(corr(&a, &c).abs() < 0.03);
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn transmitters_partition() {
        let prm = params(0.5, NoiseLaw::Off);
        let pat = sample_poisson(1.0, prm.window, 9).unwrap();
        let s = MarkStream::new(&prm, 9);
        let mut total = 0usize;
        let slots = 400;
        for slot in 0..slots {
            let tx = transmitters(&pat, &s, slot);
            let rx: Vec<usize> = (0..pat.len()).filter(|&i| !s.transmits(i, slot)).collect();
            assert_eq!(tx.len() + rx.len(), pat.len());
            assert!(tx.iter().all(|i| !rx.contains(i)));
            total += tx.len();
        }
        let n = pat.len() as f64;
        let mean = total as f64 / slots as f64;
        let se = (n * 0.25 / slots as f64).sqrt();
        assert!((mean - n / 2.0).abs() < 3.0 * se);
        let empty = PointPattern::empty(prm.window);
        assert!(transmitters(&empty, &s, 0).is_empty());
    }
}
