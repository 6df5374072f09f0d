//! Time-evolving anomaly detection (TAD) and reputation propagation (RP).
//!
//! Every target keeps a reputation in `[0, 1]` per neighbour. After each
//! localisation step the target checks whether a neighbour's distance
//! residual is plausible under that neighbour's converted error distribution;
//! implausible residuals are penalised, plausible ones rewarded, and past
//! reputation is forgotten geometrically. Targets share their tables through
//! a cloud registry and blend in what trusted peers report.

use alloc::collections::BTreeMap;

use crate::localize::ConvertedError;
use crate::math::folded_normal_cdf;
use crate::model::{AnchorReport, UavId};
use crate::{Error, Result, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Reputation recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum UpdateRule {
    /// `r <- gamma (r - 1) + 1 + r_hat`: rewards pull toward 1, penalties toward 0.
    #[default]
    Recovering,
    /// `r <- gamma (r + 1) - 1 + r_hat`. Kept for comparison; with the default
    /// parameters it decays to 0 even under constant rewards.
    Printed,
}

/// Convex map applied to propagated reputations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PropagationFn {
    #[default]
    Square,
    Identity,
}

impl PropagationFn {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            PropagationFn::Square => x * x,
            PropagationFn::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct TadConfig {
    pub lambda_r: f64,
    pub lambda_p: f64,
    /// Forget factor.
    pub gamma: f64,
    /// Confidence threshold on the residual plausibility.
    pub eps_t: f64,
    /// Floor on the converted error deviation, in meters.
    pub sigma_p_min: f64,
    pub update_rule: UpdateRule,
}

impl Default for TadConfig {
    fn default() -> Self {
        Self {
            lambda_r: 0.3,
            lambda_p: -0.7,
            gamma: 0.5,
            eps_t: 0.95,
            sigma_p_min: 0.1,
            update_rule: UpdateRule::Recovering,
        }
    }
}

impl TadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_r >= 0.0 && self.lambda_p <= 0.0) {
            return Err(Error::Config("reward must be >= 0 and penalty <= 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("forget factor must lie in (0, 1]"));
        }
        if !(self.eps_t > 0.0 && self.eps_t < 1.0) {
            return Err(Error::Config("confidence threshold must lie in (0, 1)"));
        }
        if !(self.sigma_p_min > 0.0) {
            return Err(Error::Config("minimum position error must be positive"));
        }
        Ok(())
    }

    /// One step of the reputation recursion, clamped to `[0, 1]`.
    pub fn next_reputation(&self, previous: f64, r_hat: f64) -> f64 {
        let raw = match self.update_rule {
            UpdateRule::Recovering => self.gamma * (previous - 1.0) + 1.0 + r_hat,
            UpdateRule::Printed => self.gamma * (previous + 1.0) - 1.0 + r_hat,
        };
        raw.clamp(0.0, 1.0)
    }
}

/// Probability that a residual drawn from `N(mu_cd, sigma_cd^2)` has absolute
/// value at most `e_hat`.
pub fn plausibility(e_hat: f64, conv: &ConvertedError) -> Result<f64> {
    if !(conv.sigma_cd > 0.0) {
        return Err(Error::Domain("converted error std must be positive"));
    }
    Ok(folded_normal_cdf(e_hat, conv.mu_cd, conv.sigma_cd))
}

/// A target's local view of its neighbours. Unseen neighbours read as 1.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ReputationTable {
    pub owner: UavId,
    entries: BTreeMap<UavId, f64>,
}

impl ReputationTable {
    pub fn new(owner: UavId) -> Self {
        Self { owner, entries: BTreeMap::new() }
    }

    pub fn get(&self, neighbor: UavId) -> f64 {
        self.entries.get(&neighbor).copied().unwrap_or(1.0)
    }

    /// Stored value, `None` if the neighbour was never assessed.
    pub fn entry(&self, neighbor: UavId) -> Option<f64> {
        self.entries.get(&neighbor).copied()
    }

    pub fn set(&mut self, neighbor: UavId, r: f64) {
        self.entries.insert(neighbor, r.clamp(0.0, 1.0));
    }

    pub fn iter(&self) -> impl Iterator<Item = (UavId, f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every stored value replaced by `1 - r`.
    pub fn inverted(&self) -> Self {
        Self {
            owner: self.owner,
            entries: self.entries.iter().map(|(&k, &v)| (k, 1.0 - v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TadVerdict {
    pub reputation: f64,
    pub plausibility: f64,
    pub penalized: bool,
}

/// Assesses one neighbour report against this tick's estimate and updates
/// the table.
pub fn tad_update(
    table: &mut ReputationTable,
    report: &AnchorReport,
    p_hat: Vec3,
    conv: &ConvertedError,
    cfg: &TadConfig,
) -> Result<TadVerdict> {
    let floored = ConvertedError {
        mu_cd: conv.mu_cd,
        sigma_cd: conv.sigma_cd.max(cfg.sigma_p_min),
    };
    let e_hat = libm::fabs(p_hat.distance(report.reported_pos) - report.measured_distance + floored.mu_cd);
    let xi = plausibility(e_hat, &floored)?;
    let penalized = xi > cfg.eps_t;
    let r_hat = if penalized { cfg.lambda_p } else { cfg.lambda_r };
    let reputation = cfg.next_reputation(table.get(report.anchor_id), r_hat);
    table.set(report.anchor_id, reputation);
    Ok(TadVerdict { reputation, plausibility: xi, penalized })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub uploaded_at: u32,
    pub table: ReputationTable,
}

/// Shared store of the latest uploaded table per UAV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CloudRegistry {
    snapshots: BTreeMap<UavId, Snapshot>,
}

impl CloudRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replaces the uploader's snapshot; the last write in a tick wins.
    pub fn upload(&mut self, table: &ReputationTable, t: u32) {
        self.snapshots.insert(table.owner, Snapshot { uploaded_at: t, table: table.clone() });
    }

    pub fn snapshot(&self, uploader: UavId) -> Option<&Snapshot> {
        self.snapshots.get(&uploader)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UavId, &Snapshot)> {
        self.snapshots.iter()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

/// Blends the local reputation of `neighbor` with what other uploaders report,
/// each informant weighted by the local reputation of that informant:
/// `r~ = sum r_km r_mn / sum r_km`, result `(F(r~) + r_kn) / 2`.
pub fn propagate_reputation(
    local: &ReputationTable,
    cloud: &CloudRegistry,
    neighbor: UavId,
    fp: PropagationFn,
) -> f64 {
    let own = local.get(neighbor);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&m, snap) in cloud.iter() {
        if m == local.owner || m == neighbor {
            continue;
        }
        let Some(r_mn) = snap.table.entry(neighbor) else { continue };
        let r_km = local.get(m);
        num += r_km * r_mn;
        den += r_km;
    }
    if !(den > 0.0) {
        return own;
    }
    let propagated = num / den;
    ((fp.apply(propagated) + own) / 2.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn plausibility_examples() {
        let c = ConvertedError { mu_cd: 0.0, sigma_cd: 1.0 };
        assert_eq!(plausibility(0.0, &c).unwrap(), 0.0);
        assert!((plausibility(1.959_963_985, &c).unwrap() - 0.95).abs() < 1e-8);
        assert!(plausibility(1e6, &c).unwrap() > 1.0 - 1e-12);
        assert!(plausibility(1.0, &ConvertedError { mu_cd: 0.0, sigma_cd: 0.0 }).is_err());
    }

    #[test]
    fn recursion_examples() {
        let cfg = TadConfig::default();
        assert!(close(cfg.next_reputation(1.0, cfg.lambda_r), 1.0));
        assert!(close(cfg.next_reputation(1.0, cfg.lambda_p), 0.3));
        assert!(close(cfg.next_reputation(0.0, cfg.lambda_r), 0.8));
        let printed = TadConfig { update_rule: UpdateRule::Printed, ..cfg };
        let mut r = 1.0;
        for _ in 0..10 {
            r = printed.next_reputation(r, printed.lambda_r);
        }
        assert_eq!(r, 0.0);
    }

    #[test]
    fn large_bias_is_penalised() {
        let cfg = TadConfig::default();
        let mut table = ReputationTable::new(0);
        let report = AnchorReport {
            anchor_id: 5,
            reported_pos: Vec3::new(230.0, 200.0, 5.0),
            reported_sigma_p: 1.0,
            measured_distance: 30.0,
        };
        let conv = ConvertedError { mu_cd: 0.0, sigma_cd: 1.0 };
        let v = tad_update(&mut table, &report, Vec3::ZERO, &conv, &cfg).unwrap();
        assert!(v.penalized);
        assert!(v.plausibility > 0.95);
        assert!(close(table.get(5), 0.3));
    }

    #[test]
    fn propagation_examples() {
        let mut local = ReputationTable::new(0);
        local.set(1, 1.0);
        local.set(2, 0.5);
        local.set(9, 0.5);
        let mut cloud = CloudRegistry::new();
        let mut t1 = ReputationTable::new(1);
        t1.set(9, 0.2);
        let mut t2 = ReputationTable::new(2);
        t2.set(9, 0.8);
        cloud.upload(&t1, 1);
        cloud.upload(&t2, 1);
        // r~ = (0.2 + 0.4) / 1.5 = 0.4, F = 0.16, (0.16 + 0.5) / 2 = 0.33
        assert!(close(propagate_reputation(&local, &cloud, 9, PropagationFn::Square), 0.33));

        // a distrusted informant does not count
        let mut t3 = ReputationTable::new(3);
        t3.set(9, 1.0);
        local.set(3, 0.0);
        cloud.upload(&t3, 1);
        assert!(close(propagate_reputation(&local, &cloud, 9, PropagationFn::Square), 0.33));
    }

    #[test]
    fn propagation_without_informants_keeps_local() {
        let mut local = ReputationTable::new(0);
        local.set(9, 0.4);
        let cloud = CloudRegistry::new();
        assert_eq!(propagate_reputation(&local, &cloud, 9, PropagationFn::Square), 0.4);
    }

    #[test]
    fn upload_last_write_wins() {
        let mut cloud = CloudRegistry::new();
        let mut t = ReputationTable::new(4);
        t.set(1, 0.1);
        cloud.upload(&t, 3);
        t.set(1, 0.9);
        cloud.upload(&t, 3);
        let snap = cloud.snapshot(4).unwrap();
        assert_eq!(snap.table, t);
        assert_eq!(snap.uploaded_at, 3);
    }
}
