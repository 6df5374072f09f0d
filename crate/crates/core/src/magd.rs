//! Mobility-adaptive gradient descent.
//!
//! Each tick runs a short, warm-started gradient descent on the weighted
//! squared-residual cost (anchor weights are error weights times
//! reputations), then adapts the step size for the next tick from the
//! estimated speed and the trend of the mean weighted residual.

use alloc::vec::Vec;

use crate::channel::RangingChannel;
use crate::localize::{error_weights, ConvertedError, ErrorConverter, ObservationSet};
use crate::{Error, Result, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

/// Floor on converted error deviations before weighting, so that noise-free
/// channels still produce finite weights.
pub const MIN_SIGMA_CD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct MagdConfig {
    /// Initial step thresholds in meters.
    pub eps_max_t0: f64,
    pub eps_min_t0: f64,
    /// Step floor used by the per-tick reduction rule.
    pub eps_min_t: f64,
    /// Inner-loop step discount.
    pub beta1: f64,
    /// Per-tick step reduction per unit of mean speed.
    pub beta2: f64,
    pub momentum: f64,
    /// Relative residual improvement below which the inner loop stops.
    pub theta: f64,
    /// Maximum inner iterations per tick.
    pub k_max: usize,
    /// Smoothing window length in ticks.
    pub window: usize,
    /// Keep inner-loop step discounts across ticks instead of resetting them.
    pub carry_inner_discount: bool,
}

impl Default for MagdConfig {
    fn default() -> Self {
        Self {
            eps_max_t0: 50.0,
            eps_min_t0: 5.0,
            eps_min_t: 5.0,
            beta1: 0.5,
            beta2: 0.05,
            momentum: 1e-5,
            theta: 1e-8,
            k_max: 30,
            window: 5,
            carry_inner_discount: false,
        }
    }
}

impl MagdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min_t0 > 0.0 && self.eps_max_t0 >= self.eps_min_t0) {
            return Err(Error::Config("step thresholds must satisfy max >= min > 0"));
        }
        if !(self.eps_min_t > 0.0) {
            return Err(Error::Config("runtime step floor must be positive"));
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) {
            return Err(Error::Config("beta1 must lie in (0, 1)"));
        }
        if !(self.beta2 >= 0.0) {
            return Err(Error::Config("beta2 must be non-negative"));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::Config("momentum must lie in [0, 1)"));
        }
        if !(self.theta > 0.0) {
            return Err(Error::Config("convergence threshold must be positive"));
        }
        if self.k_max == 0 || self.window == 0 {
            return Err(Error::Config("iteration limit and window must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MagdState {
    pub p_hat: Vec3,
    pub alpha_hat: f64,
    pub prev_displacement: Vec3,
    /// Estimated speed per processed tick.
    pub speeds: Vec<f64>,
    /// Final mean weighted residual per processed tick.
    pub residuals: Vec<f64>,
}

impl MagdState {
    /// Number of processed ticks.
    pub fn t(&self) -> usize {
        self.speeds.len()
    }

    pub fn mean_speed(&self) -> f64 {
        mean(&self.speeds)
    }

    pub fn mean_residual(&self) -> f64 {
        mean(&self.residuals)
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn magd_init(cfg: &MagdConfig, n_anchors: usize, p_init: Vec3) -> Result<MagdState> {
    if n_anchors == 0 {
        return Err(Error::NoAnchors);
    }
    Ok(MagdState {
        p_hat: p_init,
        alpha_hat: (cfg.eps_max_t0 / n_anchors as f64).max(cfg.eps_min_t0),
        prev_displacement: Vec3::ZERO,
        speeds: Vec::new(),
        residuals: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerOutcome {
    pub p_hat: Vec3,
    /// Mean weighted absolute residual at `p_hat`.
    pub d_bar: f64,
    pub iterations: usize,
    /// Step size after inner-loop discounts.
    pub alpha_hat: f64,
    pub last_displacement: Vec3,
    /// Number of anchors with non-zero effective weight.
    pub n_effective: usize,
}

struct Term {
    pos: Vec3,
    dist: f64,
    mu: f64,
    weight: f64,
}

fn weighted_residual(terms: &[Term], p: Vec3) -> f64 {
    let n = terms.len() as f64;
    terms
        .iter()
        .map(|t| libm::fabs(p.distance(t.pos) - t.dist + t.mu) * t.weight)
        .sum::<f64>()
        / n
}

fn weighted_gradient(terms: &[Term], p: Vec3) -> Vec3 {
    let mut g = Vec3::ZERO;
    for t in terms {
        let diff = p - t.pos;
        let d_hat = diff.norm();
        if d_hat == 0.0 {
            continue;
        }
        g += diff * (t.weight * (d_hat - t.dist + t.mu) / d_hat);
    }
    g
}

/// Warm-started descent for one tick. Anchors whose error weight times
/// reputation is zero are dropped before anything else, so they have no
/// influence at all.
pub fn magd_inner_descent(
    state: &MagdState,
    obs: &ObservationSet,
    conversions: &[ConvertedError],
    weights: &[f64],
    reputations: &[f64],
    cfg: &MagdConfig,
) -> Result<InnerOutcome> {
    let len = obs.len();
    if conversions.len() != len || weights.len() != len || reputations.len() != len {
        return Err(Error::Config("per-anchor inputs must align with the observation set"));
    }
    let terms: Vec<Term> = obs
        .reports
        .iter()
        .zip(conversions)
        .zip(weights.iter().zip(reputations))
        .filter_map(|((r, c), (&w, &rep))| {
            let weight = w * rep;
            (weight > 0.0).then_some(Term {
                pos: r.reported_pos,
                dist: r.measured_distance,
                mu: c.mu_cd,
                weight,
            })
        })
        .collect();
    if terms.is_empty() {
        return Err(Error::NoTrustedAnchor);
    }
    let n = terms.len() as f64;

    let mut p = state.p_hat;
    let mut alpha = state.alpha_hat;
    let mut disp = state.prev_displacement;
    let mut d_prev = f64::INFINITY;
    let mut d_bar = weighted_residual(&terms, p);
    let mut iterations = 0;

    for _ in 0..cfg.k_max {
        let g = weighted_gradient(&terms, p);
        let gn = g.norm();
        if gn == 0.0 || !gn.is_finite() {
            break;
        }
        disp = disp * cfg.momentum - g * (alpha / n / gn);
        p += disp;
        iterations += 1;
        d_bar = weighted_residual(&terms, p);
        if d_bar > d_prev {
            alpha *= cfg.beta1;
        } else if d_bar == 0.0 || (d_prev - d_bar) / d_bar <= cfg.theta {
            break;
        }
        d_prev = d_bar;
    }

    Ok(InnerOutcome {
        p_hat: p,
        d_bar,
        iterations,
        alpha_hat: alpha,
        last_displacement: disp,
        n_effective: terms.len(),
    })
}

/// Records tick `t` (`p_hat(t)`, `d_bar(t)`) and adapts the step size.
pub fn magd_adapt(state: &mut MagdState, p_hat: Vec3, d_bar: f64, n_anchors: usize, cfg: &MagdConfig) {
    let speed = p_hat.distance(state.p_hat);
    state.speeds.push(speed);
    state.residuals.push(d_bar);
    state.p_hat = p_hat;

    let t = state.t();
    if t <= 1 {
        return;
    }
    let v_mean = state.mean_speed();
    let d_mean = state.mean_residual();
    if !(d_mean > 0.0) {
        return;
    }
    let n = n_anchors.max(1) as f64;

    if libm::fabs(d_bar - d_mean) / d_mean <= 0.5 {
        state.alpha_hat -= cfg.beta2 * v_mean;
        state.alpha_hat = state.alpha_hat.max((cfg.eps_min_t / n).max(v_mean / 2.0));
    }

    if v_mean > 0.0 {
        let phi = t.min(cfg.window);
        let rho_d = mean(&state.residuals[t - phi..]) / d_mean;
        let rho_v = mean(&state.speeds[t - phi..]) / v_mean;
        if rho_v > 0.0 {
            let rho = libm::sqrt(rho_d / rho_v);
            if rho > 1.5 {
                state.alpha_hat = (state.alpha_hat * rho).min(cfg.eps_max_t0);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TickOutcome {
    pub p_hat: Vec3,
    pub alpha_hat: f64,
    /// Estimated speed this tick; zero when coasting.
    pub speed: f64,
    pub d_bar: f64,
    pub iterations: usize,
    pub n_effective: usize,
    pub coasting: bool,
}

/// Per-target estimator: owns the configuration and the adaptive state.
#[derive(Debug, Clone)]
pub struct Magd {
    cfg: MagdConfig,
    state: Option<MagdState>,
    fallback: Vec3,
}

impl Magd {
    /// `fallback` is reported until the first tick with trusted anchors.
    pub fn new(cfg: MagdConfig, fallback: Vec3) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, state: None, fallback })
    }

    pub fn config(&self) -> &MagdConfig {
        &self.cfg
    }

    pub fn state(&self) -> Option<&MagdState> {
        self.state.as_ref()
    }

    pub fn estimate(&self) -> Vec3 {
        self.state.as_ref().map_or(self.fallback, |s| s.p_hat)
    }

    fn coast(&self) -> TickOutcome {
        let (alpha_hat, d_bar) = self
            .state
            .as_ref()
            .map_or((0.0, 0.0), |s| (s.alpha_hat, s.residuals.last().copied().unwrap_or(0.0)));
        TickOutcome {
            p_hat: self.estimate(),
            alpha_hat,
            speed: 0.0,
            d_bar,
            iterations: 0,
            n_effective: 0,
            coasting: true,
        }
    }

    /// One timestep: error conversion and weighting over trusted anchors,
    /// inner descent, then step adaptation. With no trusted anchor the
    /// previous estimate is held and the outcome is flagged as coasting.
    pub fn tick<C: ErrorConverter + ?Sized>(
        &mut self,
        obs: &ObservationSet,
        reputations: &[f64],
        channel: &RangingChannel,
        converter: &C,
    ) -> Result<TickOutcome> {
        if reputations.len() != obs.len() {
            return Err(Error::Config("one reputation per report is required"));
        }
        let trusted: Vec<usize> = (0..obs.len()).filter(|&i| reputations[i] > 0.0).collect();
        if trusted.is_empty() {
            return Ok(self.coast());
        }
        let sub = ObservationSet {
            target_id: obs.target_id,
            reports: trusted.iter().map(|&i| obs.reports[i]).collect(),
        };
        let reps: Vec<f64> = trusted.iter().map(|&i| reputations[i]).collect();
        let conversions = sub
            .reports
            .iter()
            .map(|r| converter.convert(r.measured_distance.max(f64::MIN_POSITIVE), r.reported_sigma_p, channel))
            .collect::<Result<Vec<_>>>()?;
        let sigmas: Vec<f64> = conversions.iter().map(|c| c.sigma_cd.max(MIN_SIGMA_CD)).collect();
        let weights = error_weights(&sigmas)?;

        let cfg = self.cfg;
        if self.state.is_none() {
            let centroid = Vec3::centroid(sub.reports.iter().map(|r| r.reported_pos)).expect("non-empty");
            self.state = Some(magd_init(&cfg, sub.len(), centroid)?);
        }
        let state = self.state.as_mut().expect("initialised above");
        let inner = magd_inner_descent(state, &sub, &conversions, &weights, &reps, &cfg)?;
        state.prev_displacement = inner.last_displacement;
        if cfg.carry_inner_discount {
            state.alpha_hat = inner.alpha_hat;
        }
        magd_adapt(state, inner.p_hat, inner.d_bar, inner.n_effective, &cfg);
        Ok(TickOutcome {
            p_hat: state.p_hat,
            alpha_hat: state.alpha_hat,
            speed: *state.speeds.last().expect("recorded"),
            d_bar: inner.d_bar,
            iterations: inner.iterations,
            n_effective: inner.n_effective,
            coasting: false,
        })
    }
}
