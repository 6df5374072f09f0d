//! Report tampering by malicious anchors and the schedules deciding when they
//! tamper.

use rand::Rng;

use crate::model::{sample_position_offset, AnchorReport, UavId};
use crate::{Error, Result, Vec3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum AttackMode {
    /// Noise on everything; `index` is the jamming index in m^2.
    Jamming { index: f64 },
    /// Constant offset added to the reported position.
    Bias { offset: Vec3 },
    /// Extra position error while claiming an implausibly small position error;
    /// `index` is the manipulation index in m^2.
    Manipulation { index: f64 },
}

impl AttackMode {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackMode::Jamming { index } | AttackMode::Manipulation { index } if !(index > 0.0) => {
                Err(Error::Config("attack index must be positive"))
            }
            AttackMode::Bias { offset } if !offset.is_finite() => Err(Error::Config("bias must be finite")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum AttackStrategy {
    /// Each (attacker, target, tick) is attacked with probability `rate`.
    Random { rate: f64 },
    /// All attackers are active during `window` consecutive ticks starting at
    /// `start` (centred in the horizon when absent).
    Coordinated {
        window: u32,
        #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
        start: Option<u32>,
    },
    /// Every attacker pursues `victim` and attacks only it, on every tick.
    Stalking { victim: UavId },
}

impl AttackStrategy {
    pub fn validate(&self, horizon: u32) -> Result<()> {
        match *self {
            AttackStrategy::Random { rate } if !(0.0..=1.0).contains(&rate) => {
                Err(Error::Config("attack rate must lie in [0, 1]"))
            }
            AttackStrategy::Coordinated { window, .. } if window == 0 || window > horizon => {
                Err(Error::Config("attack window must lie in [1, T]"))
            }
            _ => Ok(()),
        }
    }

    /// Inclusive first tick of a coordinated window.
    pub fn window_start(window: u32, start: Option<u32>, horizon: u32) -> u32 {
        start.unwrap_or((horizon.saturating_sub(window)) / 2 + 1)
    }
}

/// Whether `attacker` tampers with its report to `target` at tick `t`
/// (1-based). Only the random strategy consumes randomness.
pub fn attack_active<R: Rng + ?Sized>(
    strategy: &AttackStrategy,
    _attacker: UavId,
    target: UavId,
    t: u32,
    horizon: u32,
    rng: &mut R,
) -> bool {
    match *strategy {
        AttackStrategy::Random { rate } => rng.gen_bool(rate),
        AttackStrategy::Coordinated { window, start } => {
            let s = AttackStrategy::window_start(window, start, horizon);
            t >= s && t < s + window
        }
        AttackStrategy::Stalking { victim } => target == victim,
    }
}

/// Applies `mode` to an honest report.
pub fn tamper_report<R: Rng + ?Sized>(mode: &AttackMode, honest: &AnchorReport, rng: &mut R) -> AnchorReport {
    let mut r = *honest;
    match *mode {
        AttackMode::Jamming { index } => {
            let sigma = libm::sqrt(index);
            r.reported_pos += sample_position_offset(sigma, rng).expect("positive jamming index");
            r.measured_distance = (r.measured_distance + rng.gen_range(0.0..=index)).max(0.0);
            r.reported_sigma_p += sigma;
        }
        AttackMode::Bias { offset } => {
            r.reported_pos += offset;
        }
        AttackMode::Manipulation { index } => {
            let half = index / 3.0;
            r.reported_pos += Vec3::new(
                rng.gen_range(-half..=half),
                rng.gen_range(-half..=half),
                rng.gen_range(-half..=half),
            );
            r.reported_sigma_p = 1.0 / libm::sqrt(index);
        }
    }
    r
}

/// Mobility destination of a stalker: the victim's true position.
pub fn stalk_waypoint(victim_true_pos: Vec3) -> Vec3 {
    victim_true_pos
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn honest() -> AnchorReport {
        AnchorReport {
            anchor_id: 3,
            reported_pos: Vec3::ZERO,
            reported_sigma_p: 1.0,
            measured_distance: 20.0,
        }
    }

    #[test]
    fn coordinated_window() {
        let s = AttackStrategy::Coordinated { window: 50, start: None };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(AttackStrategy::window_start(50, None, 100), 26);
        assert!(attack_active(&s, 1, 2, 26, 100, &mut rng));
        assert!(attack_active(&s, 1, 2, 75, 100, &mut rng));
        assert!(!attack_active(&s, 1, 2, 25, 100, &mut rng));
        assert!(!attack_active(&s, 1, 2, 76, 100, &mut rng));
        let active = (1..=100).filter(|&t| attack_active(&s, 1, 2, t, 100, &mut rng)).count();
        assert_eq!(active, 50);
    }

    #[test]
    fn stalking_only_hits_victim() {
        let s = AttackStrategy::Stalking { victim: 9 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((1..=100).all(|t| attack_active(&s, 1, 9, t, 100, &mut rng)));
        assert!((1..=100).all(|t| !attack_active(&s, 1, 8, t, 100, &mut rng)));
    }

    #[test]
    fn bias_shifts_position_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = tamper_report(&AttackMode::Bias { offset: Vec3::new(200.0, 200.0, 5.0) }, &honest(), &mut rng);
        assert_eq!(r.reported_pos, Vec3::new(200.0, 200.0, 5.0));
        assert_eq!(r.measured_distance, 20.0);
        assert_eq!(r.reported_sigma_p, 1.0);
    }

    #[test]
    fn jamming_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let r = tamper_report(&AttackMode::Jamming { index: 5.0 }, &honest(), &mut rng);
            let extra = r.measured_distance - 20.0;
            assert!((0.0..=5.0).contains(&extra));
            assert!((r.reported_sigma_p - (1.0 + libm::sqrt(5.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn manipulation_claims_small_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = tamper_report(&AttackMode::Manipulation { index: 200.0 }, &honest(), &mut rng);
        assert!((r.reported_sigma_p - 0.070_710_678).abs() < 1e-8);
        let bound = 200.0 / 3.0;
        assert!(r.reported_pos.x.abs() <= bound && r.reported_pos.y.abs() <= bound && r.reported_pos.z.abs() <= bound);
        assert_eq!(r.measured_distance, 20.0);
    }

    #[test]
    fn stalker_aims_at_victim() {
        assert_eq!(stalk_waypoint(Vec3::new(10.0, 20.0, 5.0)), Vec3::new(10.0, 20.0, 5.0));
    }
}
