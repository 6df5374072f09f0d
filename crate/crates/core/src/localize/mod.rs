//! Position solvers for a single target and the error bookkeeping that feeds
//! the weighted estimator.

mod admm;
mod conversion;
mod gd;
mod ls;

pub use admm::{localize_l1_admm, AdmmConfig};
pub use conversion::{
    check_conversion_input, combine, convert_error, error_weights, zeta_moments, ConvertedError, DirectConverter, ErrorConverter, ConversionKey,
    CONVERSION_SAMPLES,
};
pub use gd::{gd_cost, gd_gradient, localize_gd, GdConfig};
pub use ls::localize_ls;

use alloc::vec::Vec;

use crate::model::{AnchorReport, UavId};
use crate::{Error, Result};

/// Reports gathered by one target in one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub target_id: UavId,
    pub reports: Vec<AnchorReport>,
}

impl ObservationSet {
    pub fn new(target_id: UavId, reports: Vec<AnchorReport>) -> Result<Self> {
        let mut ids: Vec<UavId> = reports.iter().map(|r| r.anchor_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("anchor ids in an observation set must be unique"));
        }
        Ok(Self { target_id, reports })
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }
}

/// Normal equations `(A^T A, A^T b)` of the linearised multilateration system
/// with rows `[-2x, -2y, -2z, 1]` and `b = d^2 - |p|^2`.
pub(crate) fn normal_equations(obs: &ObservationSet) -> ([[f64; 4]; 4], [f64; 4]) {
    let mut ata = [[0.0; 4]; 4];
    let mut atb = [0.0; 4];
    for r in &obs.reports {
        let row = linear_row(r);
        let b = linear_rhs(r);
        for i in 0..4 {
            atb[i] += row[i] * b;
            for j in 0..4 {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    (ata, atb)
}

pub(crate) fn linear_row(r: &AnchorReport) -> [f64; 4] {
    let p = r.reported_pos;
    [-2.0 * p.x, -2.0 * p.y, -2.0 * p.z, 1.0]
}

pub(crate) fn linear_rhs(r: &AnchorReport) -> f64 {
    r.measured_distance * r.measured_distance - r.reported_pos.norm_sq()
}

pub(crate) fn require_anchors(obs: &ObservationSet, needed: usize) -> Result<()> {
    if obs.len() < needed {
        return Err(Error::TooFewAnchors { needed, got: obs.len() });
    }
    Ok(())
}
