//! UAV state, position measurement noise and the report an anchor broadcasts.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::RangingChannel;
use crate::{Error, Result, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// How the per-UAV position error bounds are interpreted when drawing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PositionErrorDraw {
    /// `sigma_p ~ U(min, max)`.
    #[default]
    Std,
    /// `sigma_p^2 ~ U(min, max)`; bounds are error powers in m^2.
    Power,
}

/// Bounds of the per-UAV position error. One `sigma_p` is drawn per UAV at
/// scenario start.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct PositionNoiseModel {
    pub sigma_min_p: f64,
    pub sigma_max_p: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub draw: PositionErrorDraw,
}

impl PositionNoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_min_p >= 0.0 && self.sigma_min_p <= self.sigma_max_p) {
            return Err(Error::Config("position error bounds must satisfy 0 <= min <= max"));
        }
        Ok(())
    }

    /// Smallest and largest `sigma_p` this model can produce, in meters.
    pub fn sigma_range(&self) -> (f64, f64) {
        match self.draw {
            PositionErrorDraw::Std => (self.sigma_min_p, self.sigma_max_p),
            PositionErrorDraw::Power => (libm::sqrt(self.sigma_min_p), libm::sqrt(self.sigma_max_p)),
        }
    }

    pub fn draw_sigma<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = if self.sigma_max_p > self.sigma_min_p {
            rng.gen_range(self.sigma_min_p..self.sigma_max_p)
        } else {
            self.sigma_min_p
        };
        match self.draw {
            PositionErrorDraw::Std => u,
            PositionErrorDraw::Power => libm::sqrt(u),
        }
    }
}

/// Zero-mean Gaussian position offset with per-axis variance `sigma_p^2 / 3`,
/// so that the expected squared norm is `sigma_p^2`.
pub fn sample_position_offset<R: Rng + ?Sized>(sigma_p: f64, rng: &mut R) -> Result<Vec3> {
    if !(sigma_p >= 0.0) {
        return Err(Error::Domain("position error std must be non-negative"));
    }
    if sigma_p == 0.0 {
        return Ok(Vec3::ZERO);
    }
    let axis = Normal::new(0.0, sigma_p / libm::sqrt(3.0)).map_err(|_| Error::Domain("invalid position error std"))?;
    Ok(Vec3::new(axis.sample(rng), axis.sample(rng), axis.sample(rng)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Role {
    Anchor,
    Target,
    Malicious,
}

pub type UavId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct UavState {
    pub id: UavId,
    pub true_pos: Vec3,
    /// Position error std, fixed for the UAV's lifetime.
    pub sigma_p: f64,
    pub speed: f64,
    pub destination: Vec3,
    pub role: Role,
}

/// One anchor's broadcast as received by a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorReport {
    pub anchor_id: UavId,
    pub reported_pos: Vec3,
    pub reported_sigma_p: f64,
    pub measured_distance: f64,
}

/// Builds the honest report `anchor` would produce for a target at
/// `target_true_pos`.
pub fn observe<R: Rng + ?Sized>(
    anchor: &UavState,
    target_true_pos: Vec3,
    channel: &RangingChannel,
    rng: &mut R,
) -> Result<AnchorReport> {
    let d = anchor.true_pos.distance(target_true_pos);
    if !(d > 0.0) {
        return Err(Error::DegenerateGeometry);
    }
    let offset = sample_position_offset(anchor.sigma_p, rng)?;
    let measured_distance = channel.measure_distance(d, rng)?;
    Ok(AnchorReport {
        anchor_id: anchor.id,
        reported_pos: anchor.true_pos + offset,
        reported_sigma_p: anchor.sigma_p,
        measured_distance,
    })
}
