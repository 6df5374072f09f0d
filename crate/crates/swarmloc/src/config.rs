//! Scenario description, validation and the committed presets.

use serde::{Deserialize, Serialize};
use swarmloc_core::channel::ChannelParams;
use swarmloc_core::defense::{PropagationFn, TadConfig};
use swarmloc_core::magd::MagdConfig;
use swarmloc_core::model::{PositionErrorDraw, PositionNoiseModel};
use swarmloc_core::threat::{AttackMode, AttackStrategy};
use swarmloc_core::Vec3;

use crate::error::ConfigError;

/// How UAVs move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilityModel {
    /// Every UAV flies to uniform random destinations inside the map.
    RandomWaypoint {
        /// Redraw each UAV's speed every this many ticks (0 = never).
        #[serde(default)]
        speed_redraw_period: u32,
    },
    /// Targets fly random waypoints; each target's anchors keep a fixed
    /// offset inside a cube of half-width `half_extent` around it.
    Formation {
        half_extent: f64,
        #[serde(default)]
        speed_redraw_period: u32,
    },
}

impl MobilityModel {
    pub fn speed_redraw_period(&self) -> u32 {
        match *self {
            MobilityModel::RandomWaypoint { speed_redraw_period }
            | MobilityModel::Formation { speed_redraw_period, .. } => speed_redraw_period,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetConfig {
    /// Anchors per scenario (per target under formation mobility).
    pub anchors: u32,
    pub targets: u32,
}

/// What a malicious target uploads to the reputation cloud.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SharingPolicy {
    /// Upload `1 - r` for every assessed neighbour.
    #[default]
    Invert,
    /// Upload 1 for malicious neighbours and 0 for everyone else.
    Collude,
    /// Upload the honest table.
    Honest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackerConfig {
    /// Malicious anchors.
    pub malicious: u32,
    /// Malicious targets (they localise like other targets, attack and share
    /// fabricated reputations).
    #[serde(default)]
    pub malicious_targets: u32,
    pub mode: AttackMode,
    pub strategy: AttackStrategy,
    /// When false, malicious UAVs keep their mobility (e.g. stalking) but
    /// never tamper with reports.
    #[serde(default = "yes")]
    pub tamper: bool,
    #[serde(default)]
    pub sharing: SharingPolicy,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseConfig {
    pub tad: bool,
    pub rp: bool,
    #[serde(default)]
    pub propagation: PropagationFn,
    #[serde(default)]
    pub params: TadConfig,
}

impl Default for DefenseConfig {
    fn default() -> Self {
        Self { tad: false, rp: false, propagation: PropagationFn::Square, params: TadConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableConfig {
    pub samples_per_point: usize,
    pub seed: u64,
}

impl Default for TableConfig {
    fn default() -> Self {
        Self {
            samples_per_point: swarmloc_core::channel::DEFAULT_TABLE_SAMPLES,
            seed: 0x7AB1E,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub repetitions: u32,
    /// Number of 1 s ticks.
    pub horizon: u32,
    /// Map extents in meters; the map spans `[0, extent]` on each axis.
    pub map: Vec3,
    /// Mutual localisation range in meters.
    pub range: f64,
    pub fleet: FleetConfig,
    /// Travel speed bounds in m/s.
    pub speed: [f64; 2],
    pub position_noise: PositionNoiseModel,
    pub mobility: MobilityModel,
    #[serde(default)]
    pub channel: ChannelParams,
    #[serde(default)]
    pub sigma_d_table: TableConfig,
    #[serde(default)]
    pub magd: MagdConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackerConfig>,
    #[serde(default)]
    pub defense: DefenseConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serialises")
    }

    /// Total UAV count.
    pub fn fleet_size(&self) -> u32 {
        match self.mobility {
            MobilityModel::Formation { .. } => self.fleet.targets * (1 + self.fleet.anchors),
            MobilityModel::RandomWaypoint { .. } => self.fleet.anchors + self.fleet.targets,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let field = |name: &str, msg: &str| ConfigError::Field { field: name.to_string(), message: msg.to_string() };
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            return Err(field("seed", "must fit in a signed 64-bit integer"));
        }
        if self.sigma_d_table.seed > i64::MAX as u64 {
            return Err(field("sigma_d_table.seed", "must fit in a signed 64-bit integer"));
        }
        if self.repetitions == 0 {
            return Err(field("repetitions", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(field("horizon", "must be at least 1"));
        }
        if !(self.map.x > 0.0 && self.map.y > 0.0 && self.map.z >= 0.0) || !self.map.is_finite() {
            return Err(field("map", "extents must be finite, x and y positive, z non-negative"));
        }
        if !(self.range > 0.0) {
            return Err(field("range", "must be positive"));
        }
        if self.fleet.targets == 0 {
            return Err(field("fleet.targets", "must be at least 1"));
        }
        if !(self.speed[0] >= 0.0 && self.speed[0] <= self.speed[1]) {
            return Err(field("speed", "bounds must satisfy 0 <= min <= max"));
        }
        if let MobilityModel::Formation { half_extent, .. } = self.mobility {
            if !(half_extent > 0.0) {
                return Err(field("mobility.half_extent", "must be positive"));
            }
        }
        self.position_noise.validate().map_err(|e| field("position_noise", &e.to_string()))?;
        self.channel.validate().map_err(|e| field("channel", &e.to_string()))?;
        if self.sigma_d_table.samples_per_point < swarmloc_core::channel::MIN_TABLE_SAMPLES {
            return Err(field("sigma_d_table.samples_per_point", "must be at least 10000"));
        }
        self.magd.validate().map_err(|e| field("magd", &e.to_string()))?;
        self.defense.params.validate().map_err(|e| field("defense.params", &e.to_string()))?;
        if self.defense.rp && !self.defense.tad {
            return Err(field("defense.rp", "reputation propagation requires tad"));
        }
        if let Some(a) = &self.attack {
            a.mode.validate().map_err(|e| field("attack.mode", &e.to_string()))?;
            a.strategy.validate(self.horizon).map_err(|e| field("attack.strategy", &e.to_string()))?;
            if matches!(self.mobility, MobilityModel::Formation { .. }) {
                return Err(field("attack", "attacks require random_waypoint mobility"));
            }
            if a.malicious > self.fleet.anchors {
                return Err(field("attack.malicious", "exceeds the number of anchors"));
            }
            let victim_slot = u32::from(matches!(a.strategy, AttackStrategy::Stalking { .. }));
            if a.malicious_targets + victim_slot > self.fleet.targets {
                return Err(field("attack.malicious_targets", "exceeds the number of targets"));
            }
            if let AttackStrategy::Stalking { victim } = a.strategy {
                if victim >= self.fleet.targets {
                    return Err(field("attack.strategy.victim", "must be a target index"));
                }
            }
        }
        Ok(())
    }
}

pub const PRESET_NAMES: &[&str] = &[
    "setup1",
    "setup2",
    "setup2-tad",
    "setup2-coord-bias-30",
    "setup2-coord-bias-30-tad",
    "setup2-stalking",
    "setup2-stalking-tad",
    "setup2-stalking-tad-rp",
    "setup2-stalking-baseline",
];

/// Mobility-adaptive estimation around a single moving target.
pub fn setup1() -> ScenarioConfig {
    ScenarioConfig {
        name: "setup1".into(),
        seed: 2023,
        repetitions: 50,
        horizon: 50,
        map: Vec3::new(1000.0, 1000.0, 200.0),
        range: 50.0,
        fleet: FleetConfig { anchors: 20, targets: 1 },
        speed: [0.6, 3.4],
        position_noise: PositionNoiseModel { sigma_min_p: 0.1, sigma_max_p: 3.0, draw: PositionErrorDraw::Power },
        mobility: MobilityModel::Formation { half_extent: 50.0 / 3f64.sqrt(), speed_redraw_period: 10 },
        channel: ChannelParams::default(),
        sigma_d_table: TableConfig::default(),
        magd: MagdConfig::default(),
        attack: None,
        defense: DefenseConfig::default(),
    }
}

/// Ten targets crossing a field of 100 anchors.
pub fn setup2() -> ScenarioConfig {
    ScenarioConfig {
        name: "setup2".into(),
        seed: 2023,
        repetitions: 10,
        horizon: 100,
        map: Vec3::new(300.0, 300.0, 10.0),
        range: 50.0,
        fleet: FleetConfig { anchors: 100, targets: 10 },
        speed: [0.3, 1.7],
        position_noise: PositionNoiseModel { sigma_min_p: 0.1, sigma_max_p: 3.0, draw: PositionErrorDraw::Power },
        mobility: MobilityModel::RandomWaypoint { speed_redraw_period: 0 },
        channel: ChannelParams::default(),
        sigma_d_table: TableConfig::default(),
        magd: MagdConfig::default(),
        attack: None,
        defense: DefenseConfig::default(),
    }
}

pub fn with_tad(mut cfg: ScenarioConfig, rp: bool) -> ScenarioConfig {
    cfg.defense.tad = true;
    cfg.defense.rp = rp;
    cfg
}

pub fn bias_mode() -> AttackMode {
    AttackMode::Bias { offset: Vec3::new(200.0, 200.0, 5.0) }
}

pub fn coordinated(horizon: u32) -> AttackStrategy {
    AttackStrategy::Coordinated { window: horizon / 2, start: None }
}

/// Setup 2 with `malicious` attacking anchors.
pub fn setup2_attack(mode: AttackMode, strategy: AttackStrategy, malicious: u32) -> ScenarioConfig {
    let mut cfg = setup2();
    cfg.attack = Some(AttackerConfig {
        malicious,
        malicious_targets: 0,
        mode,
        strategy,
        tamper: true,
        sharing: SharingPolicy::Invert,
    });
    cfg
}

/// Bias-mode stalking of target 0 by 27 anchors and 3 targets.
pub fn setup2_stalking() -> ScenarioConfig {
    let mut cfg = setup2();
    cfg.repetitions = 20;
    cfg.attack = Some(AttackerConfig {
        malicious: 27,
        malicious_targets: 3,
        mode: bias_mode(),
        strategy: AttackStrategy::Stalking { victim: 0 },
        tamper: true,
        sharing: SharingPolicy::Invert,
    });
    cfg
}

pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let mut cfg = match name {
        "setup1" => setup1(),
        "setup2" => setup2(),
        "setup2-tad" => with_tad(setup2(), false),
        "setup2-coord-bias-30" => setup2_attack(bias_mode(), coordinated(100), 30),
        "setup2-coord-bias-30-tad" => with_tad(setup2_attack(bias_mode(), coordinated(100), 30), false),
        "setup2-stalking" => setup2_stalking(),
        "setup2-stalking-tad" => with_tad(setup2_stalking(), false),
        "setup2-stalking-tad-rp" => with_tad(setup2_stalking(), true),
        "setup2-stalking-baseline" => {
            let mut c = setup2_stalking();
            if let Some(a) = c.attack.as_mut() {
                a.tamper = false;
            }
            c
        }
        _ => return None,
    };
    cfg.name = name.to_string();
    Some(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate_and_round_trip() {
        for name in PRESET_NAMES {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(back, cfg, "{name}");
        }
    }

    #[test]
    fn unknown_field_is_rejected() {
        let mut text = setup2().to_toml();
        text.push_str("\nbogus = 1\n");
        assert!(ScenarioConfig::from_toml(&text).is_err());
    }

    #[test]
    fn too_many_malicious() {
        let cfg = setup2_attack(bias_mode(), coordinated(100), 101);
        match cfg.validate() {
            Err(ConfigError::Field { field, .. }) => assert_eq!(field, "attack.malicious"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
