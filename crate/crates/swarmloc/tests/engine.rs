use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmloc::config::{preset, setup2, ScenarioConfig, PRESET_NAMES};
use swarmloc::engine::{derive_seed, run_scenario};
use swarmloc::world::{init_world, neighbors_in_range};
use swarmloc_core::Vec3;

fn short(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.repetitions = 3;
    cfg.horizon = 15;
    if let Some(a) = cfg.attack.as_mut() {
        if let swarmloc_core::threat::AttackStrategy::Coordinated { window, .. } = &mut a.strategy {
            *window = 7;
        }
    }
    cfg
}

#[test]
fn runs_are_reproducible_under_any_parallelism() {
    let cfg = short(preset("setup2-stalking-tad-rp").unwrap());
    let a = run_scenario(&cfg, 0, 1, true).unwrap();
    let b = run_scenario(&cfg, 0, 4, true).unwrap();
    assert_eq!(a.records, b.records);
    assert_eq!(a.reputation_trace, b.reputation_trace);
    assert_eq!(a.records.len(), 3 * 15 * 10);
    assert!(!a.reputation_trace.is_empty());
}

#[test]
fn seed_and_cell_change_the_outcome() {
    let cfg = short(setup2());
    let base = run_scenario(&cfg, 0, 1, false).unwrap().records;
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(base, run_scenario(&other, 0, 1, false).unwrap().records);
    assert_ne!(base, run_scenario(&cfg, 1, 1, false).unwrap().records);
}

#[test]
fn derived_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for cell in 0..10 {
        for rep in 0..10 {
            for stream in 0..3 {
                assert!(seen.insert(derive_seed(2023, cell, rep, stream)));
            }
        }
    }
}

#[test]
fn records_are_ordered_and_finite() {
    let cfg = short(setup2());
    let records = run_scenario(&cfg, 0, 2, false).unwrap().records;
    let keys: Vec<(u32, u32, u32)> = records.iter().map(|r| (r.rep, r.t, r.target_id)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(records.iter().all(|r| r.err_m.is_finite() && r.err_m >= 0.0));
}

#[test]
fn without_detection_no_reputation_is_traced() {
    let cfg = short(preset("setup2-coord-bias-30").unwrap());
    let out = run_scenario(&cfg, 0, 1, true).unwrap();
    assert!(out.reputation_trace.is_empty());
}

#[test]
fn isolated_targets_coast_at_the_map_center() {
    let mut cfg = short(setup2());
    cfg.range = 1e-3;
    let records = run_scenario(&cfg, 0, 1, false).unwrap().records;
    assert!(records.iter().all(|r| r.coasting && r.n_in_range == 0));
    assert!(records.iter().all(|r| r.err_m <= cfg.map.norm() / 2.0 + 1e-9));
}

#[test]
fn non_tampering_attackers_keep_honest_accuracy() {
    let cfg = short(preset("setup2-stalking-baseline").unwrap());
    let records = run_scenario(&cfg, 0, 1, false).unwrap().records;
    let mean = records.iter().map(|r| r.err_m).sum::<f64>() / records.len() as f64;
    assert!(mean < 20.0, "{mean}");
}

/// Mean anchors within range of a target for uniform placement in the map,
/// by direct sampling.
fn uniform_density_oracle(cfg: &ScenarioConfig, worlds: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let map = cfg.map;
    let point = |rng: &mut ChaCha8Rng| {
        Vec3::new(rng.gen_range(0.0..map.x), rng.gen_range(0.0..map.y), rng.gen_range(0.0..map.z))
    };
    let mut total = 0usize;
    for _ in 0..worlds * cfg.fleet.targets as usize {
        let t = point(&mut rng);
        total += (0..cfg.fleet.anchors).filter(|_| point(&mut rng).distance(t) <= cfg.range).count();
    }
    total as f64 / (worlds * cfg.fleet.targets as usize) as f64
}

#[test]
fn initial_density_matches_uniform_placement() {
    let cfg = setup2();
    let worlds = 400;
    let mut total = 0usize;
    for w in 0..worlds {
        let world = init_world(&cfg, &mut ChaCha8Rng::seed_from_u64(w as u64)).unwrap();
        for k in 0..world.n_targets {
            total += neighbors_in_range(&world, k, cfg.range).iter().filter(|&&n| !world.is_target(n)).count();
        }
    }
    let got = total as f64 / (worlds * cfg.fleet.targets as usize) as f64;
    let expected = uniform_density_oracle(&cfg, worlds);
    assert!((got - expected).abs() / expected < 0.05, "{got} vs {expected}");
}

#[test]
fn presets_round_trip_through_toml() {
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn committed_preset_files_match_the_built_in_presets() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    for name in PRESET_NAMES {
        let text = std::fs::read_to_string(dir.join(format!("{name}.toml"))).unwrap();
        assert_eq!(ScenarioConfig::from_toml(&text).unwrap(), preset(name).unwrap(), "{name}");
    }
}

#[test]
fn config_errors_name_the_field() {
    let mut cfg = setup2();
    cfg.range = -1.0;
    assert!(cfg.validate().unwrap_err().to_string().contains("range"));

    let text = setup2().to_toml().replace("horizon = 100", "horizon = 100\nwarp = 9");
    assert!(ScenarioConfig::from_toml(&text).unwrap_err().to_string().contains("warp"));

    let mut cfg = setup2();
    cfg.seed = u64::MAX;
    assert!(cfg.validate().unwrap_err().to_string().contains("seed"));

    let mut cfg = preset("setup2-stalking").unwrap();
    cfg.defense.rp = true;
    assert!(cfg.validate().unwrap_err().to_string().contains("defense.rp"));
}

proptest::proptest! {
    #[test]
    fn perturbed_configs_round_trip(
        seed in 0..=i64::MAX as u64,
        reps in 1u32..100,
        range in 1.0f64..500.0,
        scale in 1e-6f64..1e-2,
        malicious in 0u32..100,
        tad in proptest::prelude::any::<bool>(),
    ) {
        let mut cfg = preset("setup2-coord-bias-30").unwrap();
        cfg.seed = seed;
        cfg.repetitions = reps;
        cfg.range = range;
        cfg.channel.scale = scale;
        cfg.attack.as_mut().unwrap().malicious = malicious;
        cfg.defense.tad = tad;
        proptest::prop_assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
