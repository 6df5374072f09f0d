//! RSSI ranging channel.
//!
//! Received power follows the log-distance model
//! `P(d) = P(d0) - 10 n_p log10(d / d0)`. Measurement error is Gaussian in the
//! dB domain with a standard deviation redrawn for every measurement as
//! `(S d^2 + 1) * U(sigma_min, sigma_max)`. A measured distance is obtained by
//! inverting the model at the perturbed power, so distance errors are
//! multiplicative and strictly positive.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Path-loss and RSSI-error parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub n_p: f64,
    /// Reference distance in meters.
    pub d0: f64,
    /// RSSI at the reference distance, dBm.
    pub pr_d0: f64,
    /// Lower bound of the RSSI error standard deviation, dB.
    pub sigma_min_r: f64,
    /// Upper bound of the RSSI error standard deviation, dB.
    pub sigma_max_r: f64,
    /// Distance scaling factor of the error spread, 1/m^2.
    pub scale: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            n_p: 3.0,
            d0: 1.0,
            pr_d0: -30.0,
            sigma_min_r: 0.5,
            sigma_max_r: 2.0,
            scale: 1e-4,
        }
    }
}

impl ChannelParams {
    /// Channel without RSSI error.
    pub fn noiseless() -> Self {
        Self {
            sigma_min_r: 0.0,
            sigma_max_r: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_p > 0.0) {
            return Err(Error::Config("path-loss exponent must be positive"));
        }
        if !(self.d0 > 0.0) {
            return Err(Error::Config("reference distance must be positive"));
        }
        if !self.pr_d0.is_finite() {
            return Err(Error::Config("reference RSSI must be finite"));
        }
        if !(self.sigma_min_r >= 0.0 && self.sigma_min_r <= self.sigma_max_r) {
            return Err(Error::Config("RSSI error bounds must satisfy 0 <= min <= max"));
        }
        if !(self.scale >= 0.0) {
            return Err(Error::Config("distance scaling factor must be non-negative"));
        }
        Ok(())
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_max_r == 0.0
    }

    /// Mean received power at distance `d`, dBm.
    pub fn rssi_at_distance(&self, d: f64) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::Domain("distance must be positive"));
        }
        Ok(self.pr_d0 - 10.0 * self.n_p * libm::log10(d / self.d0))
    }

    /// Distance at which the mean received power equals `rssi`.
    pub fn invert_rssi(&self, rssi: f64) -> f64 {
        self.d0 * libm::pow(10.0, (self.pr_d0 - rssi) / (10.0 * self.n_p))
    }

    /// Distance-dependent modification factor `S d^2 + 1`.
    pub fn spread_factor(&self, d: f64) -> f64 {
        self.scale * d * d + 1.0
    }

    /// Draws the RSSI error standard deviation for one measurement at `d`.
    pub fn sample_rssi_sigma<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> Result<f64> {
        if !(d > 0.0) {
            return Err(Error::Domain("distance must be positive"));
        }
        let u = if self.sigma_max_r > self.sigma_min_r {
            rng.gen_range(self.sigma_min_r..self.sigma_max_r)
        } else {
            self.sigma_min_r
        };
        Ok(self.spread_factor(d) * u)
    }

    /// RSSI error for one measurement at `d`; exactly zero on a noiseless
    /// channel.
    fn sample_rssi_error<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> Result<f64> {
        let sigma = self.sample_rssi_sigma(d, rng)?;
        if sigma == 0.0 {
            return Ok(0.0);
        }
        Ok(Normal::new(0.0, sigma)
            .map_err(|_| Error::Domain("invalid RSSI error deviation"))?
            .sample(rng))
    }

    /// One noisy RSSI reading at distance `d`.
    pub fn sample_rssi<R: Rng + ?Sized>(&self, d: f64, rng: &mut R) -> Result<f64> {
        let delta = self.sample_rssi_error(d, rng)?;
        Ok(self.rssi_at_distance(d)? + delta)
    }

    /// Measured distance for a link of true length `true_d`.
    pub fn measure_distance<R: Rng + ?Sized>(&self, true_d: f64, rng: &mut R) -> Result<f64> {
        let delta = self.sample_rssi_error(true_d, rng)?;
        if delta == 0.0 {
            return Ok(true_d);
        }
        Ok(self.invert_rssi(self.rssi_at_distance(true_d)? + delta))
    }
}

/// Tabulated distance-error standard deviation over distance, linearly
/// interpolated and held flat outside the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaDTable {
    grid: Vec<f64>,
    sigma: Vec<f64>,
}

impl SigmaDTable {
    pub fn from_points(grid: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::Config("distance grid is empty"));
        }
        if grid.len() != sigma.len() {
            return Err(Error::Config("grid and sigma lengths differ"));
        }
        if !(grid[0] > 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("distance grid must be positive and strictly increasing"));
        }
        if sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("sigma values must be non-negative"));
        }
        Ok(Self { grid, sigma })
    }

    /// All-zero table on `grid`.
    pub fn zeros(grid: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        Self::from_points(grid, alloc::vec![0.0; n])
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.sigma
    }

    pub fn lookup(&self, d: f64) -> f64 {
        let g = &self.grid;
        if d <= g[0] {
            return self.sigma[0];
        }
        let last = g.len() - 1;
        if d >= g[last] {
            return self.sigma[last];
        }
        let hi = g.partition_point(|&x| x < d);
        let lo = hi - 1;
        let t = (d - g[lo]) / (g[hi] - g[lo]);
        self.sigma[lo] + t * (self.sigma[hi] - self.sigma[lo])
    }
}

/// Minimum Monte-Carlo sample count per grid point.
pub const MIN_TABLE_SAMPLES: usize = 10_000;
/// Default Monte-Carlo sample count per grid point.
pub const DEFAULT_TABLE_SAMPLES: usize = 20_000;

/// Default table grid: 1 m spacing over (0, 200] m.
pub fn default_grid() -> Vec<f64> {
    (1..=200).map(|d| d as f64).collect()
}

/// Estimates `sigma_d(d)` at each grid point as the sample standard deviation
/// of `measure_distance(d) - d`.
pub fn build_sigma_d_table<R: Rng + ?Sized>(
    params: &ChannelParams,
    grid: &[f64],
    samples_per_point: usize,
    rng: &mut R,
) -> Result<SigmaDTable> {
    params.validate()?;
    if grid.is_empty() {
        return Err(Error::Config("distance grid is empty"));
    }
    if samples_per_point < MIN_TABLE_SAMPLES {
        return Err(Error::Config("sigma_d table needs at least 1e4 samples per point"));
    }
    if params.is_noiseless() {
        return SigmaDTable::zeros(grid.to_vec());
    }
    let mut sigma = Vec::with_capacity(grid.len());
    for &d in grid {
        if !(d > 0.0) {
            return Err(Error::Config("distance grid must be positive"));
        }
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for i in 0..samples_per_point {
            let e = params.measure_distance(d, rng)? - d;
            let delta = e - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (e - mean);
        }
        sigma.push(libm::sqrt(m2 / (samples_per_point - 1) as f64));
    }
    SigmaDTable::from_points(grid.to_vec(), sigma)
}

/// Channel parameters together with their distance-error table.
#[derive(Debug, Clone, PartialEq)]
pub struct RangingChannel {
    params: ChannelParams,
    sigma_d: SigmaDTable,
}

impl RangingChannel {
    pub fn new(params: ChannelParams, sigma_d: SigmaDTable) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, sigma_d })
    }

    /// Builds the table on the default grid with the default sample count.
    pub fn with_default_table<R: Rng + ?Sized>(params: ChannelParams, rng: &mut R) -> Result<Self> {
        let table = build_sigma_d_table(&params, &default_grid(), DEFAULT_TABLE_SAMPLES, rng)?;
        Self::new(params, table)
    }

    /// Noise-free channel with an all-zero table.
    pub fn noiseless() -> Self {
        Self {
            params: ChannelParams::noiseless(),
            sigma_d: SigmaDTable::zeros(default_grid()).expect("default grid is valid"),
        }
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn table(&self) -> &SigmaDTable {
        &self.sigma_d
    }

    pub fn sigma_d(&self, d: f64) -> f64 {
        self.sigma_d.lookup(d)
    }

    pub fn measure_distance<R: Rng + ?Sized>(&self, true_d: f64, rng: &mut R) -> Result<f64> {
        self.params.measure_distance(true_d, rng)
    }
}
