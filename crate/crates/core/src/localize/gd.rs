use super::{require_anchors, ObservationSet};
use crate::{Error, Result, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Offset applied when the iterate lands exactly on an anchor.
const SINGULARITY_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct GdConfig {
    /// Initial step length in meters.
    pub alpha0: f64,
    /// Step discount applied whenever the cost increases.
    pub beta: f64,
    pub k_gd: usize,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self { alpha0: 1.0, beta: 0.5, k_gd: 30 }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0) {
            return Err(Error::Config("initial step must be positive"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config("discount factor must lie in (0, 1)"));
        }
        if self.k_gd == 0 {
            return Err(Error::Config("gradient descent needs at least one iteration"));
        }
        Ok(())
    }
}

/// `1/2 * sum (|p_n - p| - d_n)^2`.
pub fn gd_cost(obs: &ObservationSet, p: Vec3) -> f64 {
    obs.reports
        .iter()
        .map(|r| {
            let e = r.reported_pos.distance(p) - r.measured_distance;
            0.5 * e * e
        })
        .sum()
}

/// Gradient of [`gd_cost`]. `None` when `p` coincides with a reported anchor
/// position, where the cost is not differentiable.
pub fn gd_gradient(obs: &ObservationSet, p: Vec3) -> Option<Vec3> {
    let mut g = Vec3::ZERO;
    for r in &obs.reports {
        let diff = p - r.reported_pos;
        let dist = diff.norm();
        if dist == 0.0 {
            return None;
        }
        g += diff * ((dist - r.measured_distance) / dist);
    }
    Some(g)
}

/// Normalised gradient descent from `start` with step discounting.
pub fn localize_gd(obs: &ObservationSet, cfg: &GdConfig, start: Vec3) -> Result<Vec3> {
    cfg.validate()?;
    require_anchors(obs, 1)?;
    if !start.is_finite() {
        return Err(Error::Domain("start position must be finite"));
    }
    let mut p = start;
    let mut alpha = cfg.alpha0;
    let mut cost = gd_cost(obs, p);
    for _ in 0..cfg.k_gd {
        let g = loop {
            match gd_gradient(obs, p) {
                Some(g) => break g,
                None => p += Vec3::new(SINGULARITY_NUDGE, 0.0, 0.0),
            }
        };
        let gn = g.norm();
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        p -= g * (alpha / gn);
        let next = gd_cost(obs, p);
        if next > cost {
            alpha *= cfg.beta;
        }
        cost = next;
    }
    Ok(p)
}
