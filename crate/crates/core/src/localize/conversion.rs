//! Converting an anchor's position uncertainty into an equivalent distance
//! error.
//!
//! With the anchor's reported position off by an isotropic Gaussian offset of
//! total power `sigma_p^2`, the distance the target computes to the reported
//! position differs from the true distance by
//! `zeta = |d e + offset| - d`, which has a small positive mean. The measured
//! distance adds the ranging error `E ~ N(0, sigma_d(d)^2)`. The combined
//! residual `zeta - E` is summarised by its first two moments.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::RangingChannel;
use crate::model::sample_position_offset;
use crate::{Error, Result};

/// Monte-Carlo samples per conversion key.
pub const CONVERSION_SAMPLES: usize = 20_000;

const DERIVATION_SEED: u64 = 0x5EED_C0DE_2023_0001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvertedError {
    pub mu_cd: f64,
    pub sigma_cd: f64,
}

/// Quantised lookup key: distance to 1 m (at least 1 m), `sigma_p` to 0.1 m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConversionKey {
    pub distance_m: u32,
    pub sigma_p_dm: u32,
}

impl ConversionKey {
    pub fn quantize(d_meas: f64, sigma_p: f64) -> Self {
        let distance_m = libm::round(d_meas).clamp(1.0, u32::MAX as f64) as u32;
        let sigma_p_dm = libm::round(sigma_p * 10.0).clamp(0.0, u32::MAX as f64) as u32;
        Self { distance_m, sigma_p_dm }
    }

    pub fn distance(&self) -> f64 {
        self.distance_m as f64
    }

    pub fn sigma_p(&self) -> f64 {
        self.sigma_p_dm as f64 / 10.0
    }

    fn seed(&self) -> u64 {
        let mut h = DERIVATION_SEED ^ ((self.distance_m as u64) << 32 | self.sigma_p_dm as u64);
        // splitmix64 finaliser
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^ (h >> 31)
    }
}

/// Mean and variance of `zeta` for a quantised key, from a fixed per-key
/// random stream. The mean uses the along-track offset component as a
/// control variate (it has zero mean and carries almost all of the variance).
pub fn zeta_moments(key: ConversionKey, samples: usize) -> (f64, f64) {
    let d = key.distance();
    let sigma_p = key.sigma_p();
    if sigma_p == 0.0 || samples < 2 {
        return (0.0, 0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(key.seed());
    let mut cv_sum = 0.0;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for i in 0..samples {
        let o = sample_position_offset(sigma_p, &mut rng).expect("sigma_p is non-negative");
        let along = d + o.x;
        let r = libm::sqrt(along * along + o.y * o.y + o.z * o.z);
        // |d e + o| - d without cancellation
        let zeta = (2.0 * d * o.x + o.norm_sq()) / (r + d);
        cv_sum += zeta - o.x;
        let delta = zeta - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (zeta - mean);
    }
    (cv_sum / samples as f64, m2 / (samples - 1) as f64)
}

/// Source of converted errors. Implementations must be deterministic in their
/// inputs.
pub trait ErrorConverter {
    fn convert(&self, d_meas: f64, sigma_p: f64, channel: &RangingChannel) -> Result<ConvertedError>;
}

/// Uncached converter; every call reruns the Monte-Carlo estimate.
#[derive(Debug, Clone, Copy, Default)]
pub struct DirectConverter;

impl ErrorConverter for DirectConverter {
    fn convert(&self, d_meas: f64, sigma_p: f64, channel: &RangingChannel) -> Result<ConvertedError> {
        convert_error(d_meas, sigma_p, channel)
    }
}

/// Combines precomputed `zeta` moments with the ranging error at `d_meas`.
pub fn combine(zeta: (f64, f64), d_meas: f64, channel: &RangingChannel) -> ConvertedError {
    let sd = channel.sigma_d(d_meas);
    ConvertedError {
        mu_cd: zeta.0,
        sigma_cd: libm::sqrt(zeta.1 + sd * sd),
    }
}

pub fn check_conversion_input(d_meas: f64, sigma_p: f64) -> Result<()> {
    if !(d_meas > 0.0) {
        return Err(Error::Domain("measured distance must be positive"));
    }
    if !(sigma_p >= 0.0) || !sigma_p.is_finite() {
        return Err(Error::Domain("position error std must be non-negative"));
    }
    Ok(())
}

/// Converted error `(mu_cd, sigma_cd)` for an anchor at measured distance
/// `d_meas` reporting position error `sigma_p`.
pub fn convert_error(d_meas: f64, sigma_p: f64, channel: &RangingChannel) -> Result<ConvertedError> {
    check_conversion_input(d_meas, sigma_p)?;
    let key = ConversionKey::quantize(d_meas, sigma_p);
    Ok(combine(zeta_moments(key, CONVERSION_SAMPLES), d_meas, channel))
}

/// `w_n = sum(sigma) / (n * sigma_n)`.
pub fn error_weights(sigmas_cd: &[f64]) -> Result<Vec<f64>> {
    if sigmas_cd.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::Domain("converted error std must be positive"));
    }
    let n = sigmas_cd.len() as f64;
    let total: f64 = sigmas_cd.iter().sum();
    Ok(sigmas_cd.iter().map(|s| total / (n * s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_p_gives_pure_ranging_error() {
        let table = crate::channel::SigmaDTable::from_points(alloc::vec![1.0, 100.0], alloc::vec![0.5, 10.0]).unwrap();
        let ch = RangingChannel::new(crate::channel::ChannelParams::default(), table).unwrap();
        let c = convert_error(37.3, 0.0, &ch).unwrap();
        assert_eq!(c.mu_cd, 0.0);
        assert_eq!(c.sigma_cd, ch.sigma_d(37.3));
        assert!(convert_error(0.0, 1.0, &ch).is_err());
        assert!(convert_error(10.0, -1.0, &ch).is_err());
    }

    #[test]
    fn weights_examples() {
        assert_eq!(error_weights(&[2.0, 2.0, 2.0]).unwrap(), alloc::vec![1.0, 1.0, 1.0]);
        assert_eq!(error_weights(&[1.0, 2.0]).unwrap(), alloc::vec![1.5, 0.75]);
        assert!(error_weights(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn key_quantisation() {
        let k = ConversionKey::quantize(49.6, 1.26);
        assert_eq!(k, ConversionKey { distance_m: 50, sigma_p_dm: 13 });
        assert_eq!(ConversionKey::quantize(0.2, 0.0).distance_m, 1);
    }
}
