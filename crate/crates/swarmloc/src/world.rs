//! Fleet state and mobility.

use rand::Rng;
use swarmloc_core::model::{Role, UavId, UavState};
use swarmloc_core::threat::{stalk_waypoint, AttackStrategy};
use swarmloc_core::Vec3;

use crate::config::{MobilityModel, ScenarioConfig};
use crate::error::ConfigError;

/// Stalkers stop this close to their victim.
pub const STOP_RADIUS: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    /// Indexed by id. Targets occupy ids `0..n_targets`.
    pub uavs: Vec<UavState>,
    pub n_targets: usize,
    pub malicious: Vec<bool>,
    /// Formation offset of each anchor relative to its leader.
    pub formation: Vec<Option<(usize, Vec3)>>,
    pub map: Vec3,
    pub speed_range: [f64; 2],
    pub speed_redraw_period: u32,
    pub victim: Option<usize>,
    pub ticks: u32,
}

fn uniform_in(lo: Vec3, hi: Vec3, rng: &mut impl Rng) -> Vec3 {
    let mut axis = |a: f64, b: f64| if b > a { rng.gen_range(a..b) } else { a };
    Vec3::new(axis(lo.x, hi.x), axis(lo.y, hi.y), axis(lo.z, hi.z))
}

fn draw_speed(range: [f64; 2], rng: &mut impl Rng) -> f64 {
    if range[1] > range[0] {
        rng.gen_range(range[0]..range[1])
    } else {
        range[0]
    }
}

impl WorldState {
    pub fn is_target(&self, idx: usize) -> bool {
        idx < self.n_targets
    }

    pub fn is_stalker(&self, idx: usize) -> bool {
        self.victim.is_some_and(|v| v != idx) && self.malicious[idx]
    }

    pub fn len(&self) -> usize {
        self.uavs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.uavs.is_empty()
    }
}

/// Places the fleet, draws per-UAV position error and speed, and assigns
/// malicious roles.
pub fn init_world(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<WorldState, ConfigError> {
    cfg.validate()?;
    let n_targets = cfg.fleet.targets as usize;
    let map = cfg.map;
    let mut uavs = Vec::new();
    let mut formation = Vec::new();

    for id in 0..n_targets {
        let (lo, hi) = match cfg.mobility {
            MobilityModel::Formation { half_extent, .. } => {
                let h = Vec3::new(half_extent, half_extent, half_extent.min(map.z / 2.0));
                (h, map - h)
            }
            MobilityModel::RandomWaypoint { .. } => (Vec3::ZERO, map),
        };
        let pos = uniform_in(lo, hi, rng);
        uavs.push(UavState {
            id: id as UavId,
            true_pos: pos,
            sigma_p: 0.0,
            speed: draw_speed(cfg.speed, rng),
            destination: uniform_in(Vec3::ZERO, map, rng),
            role: Role::Target,
        });
        formation.push(None);
    }

    let anchors_total = match cfg.mobility {
        MobilityModel::Formation { .. } => cfg.fleet.anchors as usize * n_targets,
        MobilityModel::RandomWaypoint { .. } => cfg.fleet.anchors as usize,
    };
    for k in 0..anchors_total {
        let id = uavs.len();
        let sigma_p = cfg.position_noise.draw_sigma(rng);
        let (pos, slot) = match cfg.mobility {
            MobilityModel::Formation { half_extent, .. } => {
                let leader = k / cfg.fleet.anchors as usize;
                let h = Vec3::new(half_extent, half_extent, half_extent);
                let offset = uniform_in(-h, h, rng);
                (uavs[leader].true_pos + offset, Some((leader, offset)))
            }
            MobilityModel::RandomWaypoint { .. } => (uniform_in(Vec3::ZERO, map, rng), None),
        };
        uavs.push(UavState {
            id: id as UavId,
            true_pos: pos,
            sigma_p,
            speed: draw_speed(cfg.speed, rng),
            destination: uniform_in(Vec3::ZERO, map, rng),
            role: Role::Anchor,
        });
        formation.push(slot);
    }

    // a target's advertised position error is the worst anchor's
    let worst = uavs[n_targets..].iter().map(|u| u.sigma_p).fold(0.0, f64::max);
    let worst = if anchors_total == 0 { cfg.position_noise.sigma_range().1 } else { worst };
    for u in &mut uavs[..n_targets] {
        u.sigma_p = worst;
    }

    let mut malicious = vec![false; uavs.len()];
    let mut victim = None;
    if let Some(a) = &cfg.attack {
        let anchor_ids: Vec<usize> = (n_targets..uavs.len()).collect();
        for idx in rand::seq::index::sample(rng, anchor_ids.len(), a.malicious as usize) {
            malicious[anchor_ids[idx]] = true;
        }
        if let AttackStrategy::Stalking { victim: v } = a.strategy {
            victim = Some(v as usize);
        }
        let candidates: Vec<usize> = (0..n_targets).filter(|&i| Some(i) != victim).collect();
        for idx in rand::seq::index::sample(rng, candidates.len(), a.malicious_targets as usize) {
            malicious[candidates[idx]] = true;
        }
        for (u, &m) in uavs.iter_mut().zip(&malicious) {
            if m {
                u.role = Role::Malicious;
            }
        }
    }

    Ok(WorldState {
        uavs,
        n_targets,
        malicious,
        formation,
        map,
        speed_range: cfg.speed,
        speed_redraw_period: cfg.mobility.speed_redraw_period(),
        victim,
        ticks: 0,
    })
}

/// Advances every UAV by one 1 s tick.
pub fn step_mobility(world: &mut WorldState, rng: &mut impl Rng) {
    world.ticks += 1;
    let redraw = world.speed_redraw_period > 0 && world.ticks > 1 && (world.ticks - 1).is_multiple_of(world.speed_redraw_period);
    let victim_pos = world.victim.map(|v| world.uavs[v].true_pos);
    let map = world.map;

    for idx in 0..world.uavs.len() {
        if world.formation[idx].is_some() {
            continue;
        }
        if redraw {
            world.uavs[idx].speed = draw_speed(world.speed_range, rng);
        }
        let stalking = world.is_stalker(idx);
        let u = &mut world.uavs[idx];
        if stalking {
            let dest = stalk_waypoint(victim_pos.expect("stalkers imply a victim"));
            u.destination = dest;
            let gap = u.true_pos.distance(dest);
            if gap > STOP_RADIUS {
                let step = u.speed.min(gap - STOP_RADIUS);
                u.true_pos += (dest - u.true_pos) * (step / gap);
            }
        } else {
            let gap = u.true_pos.distance(u.destination);
            if gap <= u.speed {
                u.true_pos = u.destination;
                u.destination = uniform_in(Vec3::ZERO, map, rng);
            } else {
                u.true_pos += (u.destination - u.true_pos) * (u.speed / gap);
            }
        }
        u.true_pos = u.true_pos.clamp(Vec3::ZERO, map);
    }

    for idx in 0..world.uavs.len() {
        if let Some((leader, offset)) = world.formation[idx] {
            world.uavs[idx].true_pos = world.uavs[leader].true_pos + offset;
        }
    }
}

/// Indices of all UAVs within `range` of `target` (true distance), excluding
/// the target itself.
pub fn neighbors_in_range(world: &WorldState, target: usize, range: f64) -> Vec<usize> {
    let p = world.uavs[target].true_pos;
    (0..world.uavs.len())
        .filter(|&i| i != target && world.uavs[i].true_pos.distance(p) <= range)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{setup1, setup2, setup2_stalking};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn same_seed_same_world() {
        let cfg = setup2();
        let a = init_world(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = init_world(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 110);
    }

    #[test]
    fn waypoint_arrival_takes_distance_over_speed() {
        let cfg = setup2();
        let mut w = init_world(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        w.uavs[0].true_pos = Vec3::new(100.0, 100.0, 5.0);
        w.uavs[0].destination = Vec3::new(110.0, 100.0, 5.0);
        w.uavs[0].speed = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..9 {
            step_mobility(&mut w, &mut rng);
            assert_eq!(w.uavs[0].destination, Vec3::new(110.0, 100.0, 5.0));
        }
        step_mobility(&mut w, &mut rng);
        assert!(w.uavs[0].true_pos.distance(Vec3::new(110.0, 100.0, 5.0)) < 1e-9);
        assert_ne!(w.uavs[0].destination, Vec3::new(110.0, 100.0, 5.0));
    }

    #[test]
    fn positions_stay_in_map() {
        let cfg = setup2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut w = init_world(&cfg, &mut rng).unwrap();
        for _ in 0..200 {
            step_mobility(&mut w, &mut rng);
            for u in &w.uavs {
                let p = u.true_pos;
                assert!(p.x >= 0.0 && p.x <= 300.0 && p.y >= 0.0 && p.y <= 300.0 && p.z >= 0.0 && p.z <= 10.0);
            }
        }
    }

    #[test]
    fn range_is_symmetric_and_excludes_self() {
        let cfg = setup2();
        let w = init_world(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for a in 0..w.len() {
            let na = neighbors_in_range(&w, a, 50.0);
            assert!(!na.contains(&a));
            for &b in &na {
                assert!(neighbors_in_range(&w, b, 50.0).contains(&a));
            }
        }
    }

    #[test]
    fn isolated_target_has_no_neighbors() {
        let cfg = setup2();
        let mut w = init_world(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for (i, u) in w.uavs.iter_mut().enumerate() {
            u.true_pos = Vec3::new(if i == 0 { 0.0 } else { 300.0 }, 0.0, 0.0);
        }
        assert!(neighbors_in_range(&w, 0, 50.0).is_empty());
    }

    #[test]
    fn stalkers_close_in_without_overshoot() {
        let cfg = setup2_stalking();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut w = init_world(&cfg, &mut rng).unwrap();
        assert_eq!(w.malicious.iter().filter(|&&m| m).count(), 30);
        assert!(!w.malicious[0]);
        let s = (0..w.len()).find(|&i| w.is_stalker(i)).unwrap();
        w.uavs[0].speed = 0.0;
        w.uavs[s].true_pos = w.uavs[0].true_pos + Vec3::new(0.5, 0.0, 0.0);
        let before = w.uavs[s].true_pos;
        step_mobility(&mut w, &mut rng);
        assert_eq!(w.uavs[s].true_pos, before);
        w.uavs[s].true_pos = w.uavs[0].true_pos + Vec3::new(1.3, 0.0, 0.0);
        w.uavs[s].speed = 1.7;
        step_mobility(&mut w, &mut rng);
        assert!((w.uavs[s].true_pos.distance(w.uavs[0].true_pos) - STOP_RADIUS).abs() < 1e-9);
    }

    #[test]
    fn formation_keeps_anchors_in_cube() {
        let cfg = setup1();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut w = init_world(&cfg, &mut rng).unwrap();
        for _ in 0..50 {
            step_mobility(&mut w, &mut rng);
            assert_eq!(neighbors_in_range(&w, 0, 50.0).len(), 20);
        }
    }
}
