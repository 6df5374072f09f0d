//! Solver benchmarks: anchor-geometry sensitivity of the snapshot solvers and
//! fixed step sizes versus the adaptive estimator on a moving target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swarmloc_core::channel::{ChannelParams, RangingChannel};
use swarmloc_core::localize::{localize_gd, localize_l1_admm, localize_ls, AdmmConfig, GdConfig, ObservationSet};
use swarmloc_core::magd::Magd;
use swarmloc_core::model::{observe, PositionErrorDraw, PositionNoiseModel, Role, UavState};
use swarmloc_core::{Error, Vec3};

use crate::cache::SharedConversionCache;
use crate::config::{setup1, ScenarioConfig, TableConfig};
use crate::engine::{channel_for, derive_seed};
use crate::error::SimError;
use crate::world::{init_world, neighbors_in_range, step_mobility};

/// Anchor boxes of constant half-diagonal, from flat to cubic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryBenchConfig {
    pub seed: u64,
    pub repetitions: u32,
    pub anchors: usize,
    /// Half-diagonal of every box, i.e. the largest target-anchor distance.
    pub max_distance: f64,
    /// Vertical half-extents of the boxes; the horizontal half-extent is
    /// chosen so that the half-diagonal stays `max_distance`.
    pub half_heights: Vec<f64>,
    pub admm: AdmmConfig,
    pub gd: GdConfig,
    pub channel: ChannelParams,
    pub sigma_d_table: TableConfig,
    pub position_noise: PositionNoiseModel,
    /// Attempts per repetition to draw a non-singular anchor set.
    pub max_resamples: u32,
}

impl Default for GeometryBenchConfig {
    fn default() -> Self {
        let shapes = 10;
        Self {
            seed: 2023,
            repetitions: 50,
            anchors: 30,
            max_distance: 50.0,
            half_heights: (0..shapes).map(|i| 1.0 + 27.0 * i as f64 / (shapes - 1) as f64).collect(),
            admm: AdmmConfig { rho: 0.1, k_admm: 30 },
            gd: GdConfig { alpha0: 1.0, beta: 0.5, k_gd: 30 },
            channel: ChannelParams::default(),
            sigma_d_table: TableConfig::default(),
            position_noise: PositionNoiseModel { sigma_min_p: 0.1, sigma_max_p: 3.0, draw: PositionErrorDraw::Std },
            max_resamples: 100,
        }
    }
}

/// Mean error of each solver for one box shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryRow {
    pub half_xy: f64,
    pub half_z: f64,
    pub ls: f64,
    pub l1: f64,
    pub gd: f64,
}

fn half_xy(max_distance: f64, half_z: f64) -> Result<f64, SimError> {
    let r = max_distance * max_distance - half_z * half_z;
    if !(r > 0.0) {
        return Err(Error::Config("box height must be below the maximum distance").into());
    }
    Ok((r / 2.0).sqrt())
}

/// One anchor draw inside the box around `target`; `None` when LS sees a
/// singular geometry.
fn geometry_trial(
    cfg: &GeometryBenchConfig,
    channel: &RangingChannel,
    extent: Vec3,
    rng: &mut ChaCha8Rng,
) -> Result<Option<[f64; 3]>, SimError> {
    let target = Vec3::ZERO;
    let mut reports = Vec::with_capacity(cfg.anchors);
    for id in 0..cfg.anchors {
        let pos = Vec3::new(
            rng.gen_range(-extent.x..=extent.x),
            rng.gen_range(-extent.y..=extent.y),
            rng.gen_range(-extent.z..=extent.z),
        );
        let anchor = UavState {
            id: id as u32 + 1,
            true_pos: pos,
            sigma_p: cfg.position_noise.draw_sigma(rng),
            speed: 0.0,
            destination: pos,
            role: Role::Anchor,
        };
        reports.push(observe(&anchor, target, channel, rng)?);
    }
    let obs = ObservationSet::new(0, reports)?;
    let ls = match localize_ls(&obs) {
        Ok(p) => p,
        Err(Error::SingularGeometry) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let l1 = match localize_l1_admm(&obs, &cfg.admm) {
        Ok(p) => p,
        Err(Error::SingularGeometry) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let start = Vec3::centroid(obs.reports.iter().map(|r| r.reported_pos)).expect("anchors present");
    let gd = localize_gd(&obs, &cfg.gd, start)?;
    Ok(Some([ls.distance(target), l1.distance(target), gd.distance(target)]))
}

/// Mean LS, L1-ADMM and GD errors per box shape. Each repetition has its own
/// seeded stream, so results do not depend on the thread count.
pub fn run_geometry_benchmark(cfg: &GeometryBenchConfig) -> Result<Vec<GeometryRow>, SimError> {
    if cfg.repetitions == 0 || cfg.anchors < 4 || cfg.half_heights.is_empty() {
        return Err(Error::Config("geometry benchmark needs repetitions, at least 4 anchors and one shape").into());
    }
    let channel = channel_for(cfg.channel, cfg.sigma_d_table)?;
    cfg.position_noise.validate()?;
    cfg.half_heights
        .iter()
        .enumerate()
        .map(|(cell, &half_z)| {
            let hxy = half_xy(cfg.max_distance, half_z)?;
            let extent = Vec3::new(hxy, hxy, half_z);
            let errors = (0..cfg.repetitions)
                .into_par_iter()
                .map(|rep| {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, cell as u64, rep as u64, 0));
                    for _ in 0..cfg.max_resamples {
                        if let Some(e) = geometry_trial(cfg, &channel, extent, &mut rng)? {
                            return Ok(e);
                        }
                    }
                    Err(SimError::Model(Error::SingularGeometry))
                })
                .collect::<Result<Vec<_>, SimError>>()?;
            let n = errors.len() as f64;
            let mean = |i: usize| errors.iter().map(|e| e[i]).sum::<f64>() / n;
            Ok(GeometryRow { half_xy: hxy, half_z, ls: mean(0), l1: mean(1), gd: mean(2) })
        })
        .collect()
}

/// Fixed-step gradient descent against the adaptive estimator, on the same
/// observation streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepsizeBenchConfig {
    pub scenario: ScenarioConfig,
    pub anchor_counts: Vec<u32>,
    pub alphas: Vec<f64>,
    /// Discount and iteration limit of the fixed-step descent.
    pub beta: f64,
    pub k_gd: usize,
}

impl Default for StepsizeBenchConfig {
    fn default() -> Self {
        let scenario = setup1();
        Self {
            anchor_counts: (1..=8).map(|i| 5 * i).collect(),
            alphas: (1..=8).map(|i| 0.5 * i as f64).collect(),
            beta: 0.5,
            k_gd: scenario.magd.k_max,
            scenario,
        }
    }
}

/// Mean errors: `fixed[a][c]` for step `alphas[a]` and anchor count
/// `anchor_counts[c]`, `magd[c]` for the adaptive estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepsizeTable {
    pub anchor_counts: Vec<u32>,
    pub alphas: Vec<f64>,
    pub fixed: Vec<Vec<f64>>,
    pub magd: Vec<f64>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

impl StepsizeTable {
    /// Mean over anchor counts of the fixed step `alphas[a]`.
    pub fn fixed_mean(&self, a: usize) -> f64 {
        mean(&self.fixed[a])
    }

    pub fn magd_mean(&self) -> f64 {
        mean(&self.magd)
    }

    /// The fixed step with the lowest mean over anchor counts.
    pub fn best_fixed(&self) -> (f64, f64) {
        (0..self.alphas.len())
            .map(|a| (self.alphas[a], self.fixed_mean(a)))
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .expect("at least one step size")
    }
}

/// Per-repetition error sums: one per fixed step, then the adaptive one.
fn stepsize_rep(
    cfg: &StepsizeBenchConfig,
    scenario: &ScenarioConfig,
    channel: &RangingChannel,
    cell: u64,
    rep: u32,
) -> Result<(Vec<f64>, usize), SimError> {
    let seed = |stream| ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, cell, rep as u64, stream));
    let mut world_rng = seed(1);
    let mut measure_rng = seed(2);
    let mut world = init_world(scenario, &mut world_rng)?;
    let converter = SharedConversionCache::global();
    let center = scenario.map / 2.0;
    let targets = world.n_targets;
    let gd_cfgs: Vec<GdConfig> =
        cfg.alphas.iter().map(|&alpha0| GdConfig { alpha0, beta: cfg.beta, k_gd: cfg.k_gd }).collect();
    let mut fixed: Vec<Vec<Option<Vec3>>> = vec![vec![None; targets]; cfg.alphas.len()];
    let mut magd = (0..targets)
        .map(|_| Magd::new(scenario.magd, center))
        .collect::<Result<Vec<_>, _>>()?;
    let mut sums = vec![0.0; cfg.alphas.len() + 1];
    let mut count = 0;
    for _ in 0..scenario.horizon {
        step_mobility(&mut world, &mut world_rng);
        for k in 0..targets {
            let truth = world.uavs[k].true_pos;
            let reports = neighbors_in_range(&world, k, scenario.range)
                .into_iter()
                .filter(|&n| world.uavs[n].true_pos != truth)
                .map(|n| observe(&world.uavs[n], truth, channel, &mut measure_rng))
                .collect::<Result<Vec<_>, _>>()?;
            let obs = ObservationSet::new(k as u32, reports)?;
            let centroid = Vec3::centroid(obs.reports.iter().map(|r| r.reported_pos));
            for (a, gd) in gd_cfgs.iter().enumerate() {
                let est = &mut fixed[a][k];
                if let Some(start) = est.or(centroid) {
                    *est = Some(if obs.is_empty() { start } else { localize_gd(&obs, gd, start)? });
                }
                sums[a] += est.unwrap_or(center).distance(truth);
            }
            let ones = vec![1.0; obs.len()];
            let outcome = magd[k].tick(&obs, &ones, channel, converter)?;
            sums[cfg.alphas.len()] += outcome.p_hat.distance(truth);
            count += 1;
        }
    }
    Ok((sums, count))
}

/// Runs every (anchor count, repetition) pair with seeded streams; estimators
/// within a pair share one observation stream.
pub fn run_stepsize_benchmark(cfg: &StepsizeBenchConfig) -> Result<StepsizeTable, SimError> {
    if cfg.anchor_counts.is_empty() || cfg.alphas.is_empty() {
        return Err(Error::Config("step-size benchmark needs anchor counts and step sizes").into());
    }
    GdConfig { alpha0: cfg.alphas[0], beta: cfg.beta, k_gd: cfg.k_gd }.validate()?;
    if cfg.alphas.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Config("step sizes must be positive").into());
    }
    cfg.scenario.validate()?;
    let channel = channel_for(cfg.scenario.channel, cfg.scenario.sigma_d_table)?;
    let mut table = StepsizeTable {
        anchor_counts: cfg.anchor_counts.clone(),
        alphas: cfg.alphas.clone(),
        fixed: vec![Vec::with_capacity(cfg.anchor_counts.len()); cfg.alphas.len()],
        magd: Vec::with_capacity(cfg.anchor_counts.len()),
    };
    for (cell, &anchors) in cfg.anchor_counts.iter().enumerate() {
        let mut scenario = cfg.scenario.clone();
        scenario.fleet.anchors = anchors;
        scenario.validate()?;
        let per_rep = (0..scenario.repetitions)
            .into_par_iter()
            .map(|rep| stepsize_rep(cfg, &scenario, &channel, cell as u64, rep))
            .collect::<Result<Vec<_>, SimError>>()?;
        let count: usize = per_rep.iter().map(|r| r.1).sum();
        for (i, column) in table.fixed.iter_mut().chain(std::iter::once(&mut table.magd)).enumerate() {
            let total: f64 = per_rep.iter().map(|r| r.0[i]).sum();
            column.push(total / count.max(1) as f64);
        }
    }
    Ok(table)
}
