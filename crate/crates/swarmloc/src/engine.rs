//! The per-tick pipeline: move, observe, tamper, localise, detect, record.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use swarmloc_core::channel::{build_sigma_d_table, default_grid, ChannelParams, RangingChannel};
use swarmloc_core::defense::{propagate_reputation, tad_update, CloudRegistry, ReputationTable};
use swarmloc_core::localize::{ErrorConverter, ObservationSet};
use swarmloc_core::magd::Magd;
use swarmloc_core::model::{observe, AnchorReport};
use swarmloc_core::threat::{attack_active, tamper_report};

use crate::cache::SharedConversionCache;
use crate::config::{ScenarioConfig, SharingPolicy, TableConfig};
use crate::error::SimError;
use crate::world::{init_world, neighbors_in_range, step_mobility, WorldState};

/// One row of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub run_id: String,
    pub rep: u32,
    pub t: u32,
    pub target_id: u32,
    pub err_m: f64,
    pub n_in_range: u32,
    pub alpha_hat: f64,
    pub d_bar: f64,
    pub coasting: bool,
}

/// One row of the optional reputation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReputationRecord {
    pub rep: u32,
    pub t: u32,
    pub owner: u32,
    pub neighbor: u32,
    pub r: f64,
    pub r_blended: f64,
}

/// Independent random streams of a repetition.
#[derive(Debug, Clone, Copy)]
enum Stream {
    World = 1,
    Measurement = 2,
    Attack = 3,
}

/// Seed of stream `stream` for sweep cell `cell`, repetition `rep`:
/// splitmix64 folded over `(master, cell, rep, stream)`.
pub fn derive_seed(master: u64, cell: u64, rep: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    [cell, rep, stream].iter().fold(mix(master), |h, &v| mix(h ^ v))
}

/// Builds (or fetches) the channel with its distance-error table. Tables are
/// memoised per process on the parameters and derivation seed.
pub fn build_channel(cfg: &ScenarioConfig) -> Result<Arc<RangingChannel>, SimError> {
    channel_for(cfg.channel, cfg.sigma_d_table)
}

/// Channel for explicit parameters and table derivation settings (memoised
/// like [`build_channel`]).
pub fn channel_for(p: ChannelParams, table: TableConfig) -> Result<Arc<RangingChannel>, SimError> {
    type Key = ([u64; 6], usize, u64);
    static TABLES: OnceLock<Mutex<HashMap<Key, Arc<RangingChannel>>>> = OnceLock::new();
    let TableConfig { samples_per_point, seed } = table;
    let key = (
        [p.n_p, p.d0, p.pr_d0, p.sigma_min_r, p.sigma_max_r, p.scale].map(f64::to_bits),
        samples_per_point,
        seed,
    );
    let tables = TABLES.get_or_init(Default::default);
    if let Some(ch) = tables.lock().expect("table lock").get(&key) {
        return Ok(ch.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = build_sigma_d_table(&p, &default_grid(), samples_per_point, &mut rng)?;
    let ch = Arc::new(RangingChannel::new(p, table)?);
    tables.lock().expect("table lock").entry(key).or_insert(ch.clone());
    Ok(ch)
}

/// State of one repetition.
pub struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    channel: &'a RangingChannel,
    converter: &'a dyn ErrorConverter,
    pub world: WorldState,
    estimators: Vec<Magd>,
    pub tables: Vec<ReputationTable>,
    pub cloud: CloudRegistry,
    world_rng: ChaCha8Rng,
    measure_rng: ChaCha8Rng,
    attack_rng: ChaCha8Rng,
    rep: u32,
    t: u32,
    trace: Option<Vec<ReputationRecord>>,
}

impl<'a> Simulation<'a> {
    pub fn new(
        cfg: &'a ScenarioConfig,
        channel: &'a RangingChannel,
        converter: &'a dyn ErrorConverter,
        cell: u64,
        rep: u32,
    ) -> Result<Self, SimError> {
        let seed = |s: Stream| ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, cell, rep as u64, s as u64));
        let mut world_rng = seed(Stream::World);
        let world = init_world(cfg, &mut world_rng)?;
        let center = cfg.map / 2.0;
        let estimators = (0..world.n_targets)
            .map(|_| Magd::new(cfg.magd, center))
            .collect::<Result<Vec<_>, _>>()?;
        let tables = (0..world.n_targets).map(|k| ReputationTable::new(k as u32)).collect();
        Ok(Self {
            cfg,
            channel,
            converter,
            world,
            estimators,
            tables,
            cloud: CloudRegistry::new(),
            world_rng,
            measure_rng: seed(Stream::Measurement),
            attack_rng: seed(Stream::Attack),
            rep,
            t: 0,
            trace: None,
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Vec<ReputationRecord> {
        self.trace.take().unwrap_or_default()
    }

    pub fn estimate(&self, target: usize) -> swarmloc_core::Vec3 {
        self.estimators[target].estimate()
    }

    fn gather(&mut self, k: usize, neighbors: &[usize]) -> Result<Vec<AnchorReport>, SimError> {
        let target_pos = self.world.uavs[k].true_pos;
        let mut reports = Vec::with_capacity(neighbors.len());
        for &n in neighbors {
            let anchor = &self.world.uavs[n];
            if anchor.true_pos == target_pos {
                continue;
            }
            let mut report = observe(anchor, target_pos, self.channel, &mut self.measure_rng)?;
            if let Some(a) = self.cfg.attack.as_ref().filter(|a| a.tamper) {
                if self.world.malicious[n]
                    && attack_active(&a.strategy, n as u32, k as u32, self.t, self.cfg.horizon, &mut self.attack_rng)
                {
                    report = tamper_report(&a.mode, &report, &mut self.attack_rng);
                }
            }
            reports.push(report);
        }
        Ok(reports)
    }

    fn shared_table(&self, k: usize) -> ReputationTable {
        let table = &self.tables[k];
        if !self.world.malicious[k] {
            return table.clone();
        }
        match self.cfg.attack.map(|a| a.sharing).unwrap_or_default() {
            SharingPolicy::Honest => table.clone(),
            SharingPolicy::Invert => table.inverted(),
            SharingPolicy::Collude => {
                let mut out = ReputationTable::new(table.owner);
                for (n, _) in table.iter() {
                    out.set(n, if self.world.malicious[n as usize] { 1.0 } else { 0.0 });
                }
                out
            }
        }
    }

    /// Advances one tick and returns one record per target.
    pub fn tick(&mut self) -> Result<Vec<MetricsRecord>, SimError> {
        self.t += 1;
        step_mobility(&mut self.world, &mut self.world_rng);
        let defense = self.cfg.defense;
        let mut records = Vec::with_capacity(self.world.n_targets);

        for k in 0..self.world.n_targets {
            let neighbors = neighbors_in_range(&self.world, k, self.cfg.range);
            let reports = self.gather(k, &neighbors)?;
            let reputations: Vec<f64> = reports
                .iter()
                .map(|r| match (defense.tad, defense.rp) {
                    (false, _) => 1.0,
                    (true, false) => self.tables[k].get(r.anchor_id),
                    (true, true) => propagate_reputation(&self.tables[k], &self.cloud, r.anchor_id, defense.propagation),
                })
                .collect();
            let obs = ObservationSet::new(k as u32, reports)?;
            let outcome = self.estimators[k].tick(&obs, &reputations, self.channel, self.converter)?;

            if defense.tad {
                for (report, &blended) in obs.reports.iter().zip(&reputations) {
                    let conv = self.converter.convert(
                        report.measured_distance.max(f64::MIN_POSITIVE),
                        report.reported_sigma_p,
                        self.channel,
                    )?;
                    let verdict = tad_update(&mut self.tables[k], report, outcome.p_hat, &conv, &defense.params)?;
                    if let Some(trace) = self.trace.as_mut() {
                        trace.push(ReputationRecord {
                            rep: self.rep,
                            t: self.t,
                            owner: k as u32,
                            neighbor: report.anchor_id,
                            r: verdict.reputation,
                            r_blended: blended,
                        });
                    }
                }
            }

            records.push(MetricsRecord {
                run_id: self.cfg.name.clone(),
                rep: self.rep,
                t: self.t,
                target_id: k as u32,
                err_m: outcome.p_hat.distance(self.world.uavs[k].true_pos),
                n_in_range: obs.len() as u32,
                alpha_hat: outcome.alpha_hat,
                d_bar: outcome.d_bar,
                coasting: outcome.coasting,
            });
        }

        // readers saw the registry as of the start of the tick
        if defense.tad {
            let uploads: Vec<ReputationTable> = (0..self.world.n_targets).map(|k| self.shared_table(k)).collect();
            for table in &uploads {
                self.cloud.upload(table, self.t);
            }
        }
        Ok(records)
    }

    pub fn run(&mut self) -> Result<Vec<MetricsRecord>, SimError> {
        let mut out = Vec::with_capacity(self.cfg.horizon as usize * self.world.n_targets);
        for _ in 0..self.cfg.horizon {
            out.extend(self.tick()?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScenarioOutput {
    pub records: Vec<MetricsRecord>,
    pub reputation_trace: Vec<ReputationRecord>,
}

/// Runs `f` on a pool of `parallelism` threads, or on the calling thread
/// when `parallelism <= 1`.
pub fn with_parallelism<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> T {
    if parallelism <= 1 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

/// Runs every repetition of `cfg` (sweep cell `cell`) on up to `parallelism`
/// threads. Output order and values do not depend on `parallelism`.
pub fn run_scenario(cfg: &ScenarioConfig, cell: u64, parallelism: usize, trace: bool) -> Result<ScenarioOutput, SimError> {
    with_parallelism(parallelism, || run_scenario_here(cfg, cell, trace))
}

/// [`run_scenario`] on the current rayon pool.
pub fn run_scenario_here(cfg: &ScenarioConfig, cell: u64, trace: bool) -> Result<ScenarioOutput, SimError> {
    use rayon::prelude::*;
    cfg.validate()?;
    let channel = build_channel(cfg)?;
    let converter = SharedConversionCache::global();
    let results: Vec<_> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<_, SimError> {
            let mut sim = Simulation::new(cfg, &channel, converter, cell, rep)?;
            if trace {
                sim.enable_trace();
            }
            let records = sim.run()?;
            Ok((records, sim.take_trace()))
        })
        .collect();
    let mut out = ScenarioOutput::default();
    for r in results {
        let (records, trace) = r?;
        out.records.extend(records);
        out.reputation_trace.extend(trace);
    }
    Ok(out)
}

/// Mean localisation error over a record stream.
pub fn mean_error<'r>(records: impl IntoIterator<Item = &'r MetricsRecord>) -> f64 {
    let (sum, n) = records.into_iter().fold((0.0, 0usize), |(s, n), r| (s + r.err_m, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}
