use alloc::vec::Vec;

use super::{linear_rhs, linear_row, normal_equations, require_anchors, ObservationSet};
use crate::math::{cholesky_solve4, soft_threshold};
use crate::{Error, Result, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AdmmConfig {
    /// Penalty on the constraint `A u - w = b`.
    pub rho: f64,
    pub k_admm: usize,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self { rho: 0.1, k_admm: 30 }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0) {
            return Err(Error::Config("ADMM penalty must be positive"));
        }
        if self.k_admm == 0 {
            return Err(Error::Config("ADMM needs at least one iteration"));
        }
        Ok(())
    }
}

/// L1 plane fit `min |w|_1 s.t. A u - w = b` solved with ADMM.
///
/// Iteration, starting from `u = w = lambda = 0`:
/// `u <- G A^T (b + w - lambda/rho)`,
/// `w <- S_{1/rho}(A u - b + lambda/rho)`,
/// `lambda <- lambda + rho (A u - w - b)`, with `G = (A^T A)^-1`.
pub fn localize_l1_admm(obs: &ObservationSet, cfg: &AdmmConfig) -> Result<Vec3> {
    cfg.validate()?;
    require_anchors(obs, 4)?;
    let (ata, _) = normal_equations(obs);
    let rows: Vec<[f64; 4]> = obs.reports.iter().map(linear_row).collect();
    let b: Vec<f64> = obs.reports.iter().map(linear_rhs).collect();
    let n = rows.len();
    let mut w = alloc::vec![0.0; n];
    let mut lambda = alloc::vec![0.0; n];
    let mut u = [0.0; 4];
    let shrink = 1.0 / cfg.rho;

    for _ in 0..cfg.k_admm {
        let mut rhs = [0.0; 4];
        for k in 0..n {
            let v = b[k] + w[k] - lambda[k] / cfg.rho;
            for i in 0..4 {
                rhs[i] += rows[k][i] * v;
            }
        }
        u = cholesky_solve4(&ata, &rhs).ok_or(Error::SingularGeometry)?;
        for k in 0..n {
            let au = dot4(&rows[k], &u);
            w[k] = soft_threshold(au - b[k] + lambda[k] / cfg.rho, shrink);
            lambda[k] += cfg.rho * (au - w[k] - b[k]);
        }
    }
    Ok(Vec3::new(u[0], u[1], u[2]))
}

fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}
