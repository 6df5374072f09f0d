//! Result files: metrics and reputation CSVs, run summaries, manifests and
//! the channel export.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use swarmloc_core::channel::RangingChannel;

use crate::bench::{GeometryRow, StepsizeTable};
use crate::config::ScenarioConfig;
use crate::engine::{MetricsRecord, ReputationRecord};
use crate::error::SimError;

pub const METRICS_HEADER: [&str; 9] =
    ["run_id", "rep", "t", "target_id", "err_m", "n_in_range", "alpha_hat", "d_bar", "coasting"];
pub const REPUTATION_HEADER: [&str; 6] = ["rep", "t", "owner", "neighbor", "r", "r_blended"];
pub const CHANNEL_HEADER: [&str; 4] = ["d", "mean_rssi", "sampled_rssi", "sigma_d"];

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.display().to_string(), source }
}

/// Creates `dir` (and parents) if needed.
pub fn ensure_dir(dir: &Path) -> Result<(), SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<(), SimError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<(), SimError> {
    write_rows(path, records, &METRICS_HEADER)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>, SimError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(SimError::from)
}

pub fn write_reputation_csv(path: &Path, trace: &[ReputationRecord]) -> Result<(), SimError> {
    write_rows(path, trace, &REPUTATION_HEADER)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SimError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Per-scenario error statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub name: String,
    pub repetitions: u32,
    pub records: usize,
    pub mean_err_m: f64,
    pub std_err_m: f64,
    pub median_err_m: f64,
    pub coasting_records: usize,
    pub mean_in_range: f64,
}

impl Summary {
    pub fn from_records(name: &str, repetitions: u32, records: &[MetricsRecord]) -> Self {
        let n = records.len();
        let nf = n.max(1) as f64;
        let mean = records.iter().map(|r| r.err_m).sum::<f64>() / nf;
        let var = records.iter().map(|r| (r.err_m - mean).powi(2)).sum::<f64>() / nf;
        let mut errs: Vec<f64> = records.iter().map(|r| r.err_m).collect();
        errs.sort_by(f64::total_cmp);
        let median = match n {
            0 => f64::NAN,
            _ if n % 2 == 1 => errs[n / 2],
            _ => (errs[n / 2 - 1] + errs[n / 2]) / 2.0,
        };
        Self {
            name: name.to_string(),
            repetitions,
            records: n,
            mean_err_m: if n == 0 { f64::NAN } else { mean },
            std_err_m: if n == 0 { f64::NAN } else { var.sqrt() },
            median_err_m: median,
            coasting_records: records.iter().filter(|r| r.coasting).count(),
            mean_in_range: records.iter().map(|r| r.n_in_range as f64).sum::<f64>() / nf,
        }
    }
}

/// Hex SHA-256 of the canonical TOML form of `cfg`.
pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything needed to reproduce a set of output files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub tool_version: String,
    pub sigma_d_table_seed: u64,
    pub outputs: Vec<PathBuf>,
    pub duration_s: f64,
}

impl RunManifest {
    pub fn new(cfg: &ScenarioConfig, outputs: Vec<PathBuf>, duration_s: f64) -> Self {
        Self {
            config_hash: config_hash(cfg),
            seed: cfg.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            sigma_d_table_seed: cfg.sigma_d_table.seed,
            outputs,
            duration_s,
        }
    }
}

/// One row of the channel export.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRow {
    pub d: f64,
    pub mean_rssi: f64,
    pub sampled_rssi: f64,
    pub sigma_d: f64,
}

/// Mean RSSI, one sampled RSSI and the tabulated distance-error deviation at
/// each distance of `grid`.
pub fn channel_rows<R: Rng + ?Sized>(
    channel: &RangingChannel,
    grid: &[f64],
    rng: &mut R,
) -> Result<Vec<ChannelRow>, SimError> {
    grid.iter()
        .map(|&d| {
            let params = channel.params();
            Ok(ChannelRow {
                d,
                mean_rssi: params.rssi_at_distance(d)?,
                sampled_rssi: params.sample_rssi(d, rng)?,
                sigma_d: channel.sigma_d(d),
            })
        })
        .collect()
}

pub fn write_channel_csv(path: &Path, rows: &[ChannelRow]) -> Result<(), SimError> {
    write_rows(path, rows, &CHANNEL_HEADER)
}

pub fn write_geometry_csv(path: &Path, rows: &[GeometryRow]) -> Result<(), SimError> {
    write_rows(path, rows, &["half_xy", "half_z", "ls", "l1", "gd"])
}

/// Long form: one row per (anchor count, estimator); `alpha` is empty for the
/// adaptive estimator.
pub fn write_stepsize_csv(path: &Path, table: &StepsizeTable) -> Result<(), SimError> {
    #[derive(Serialize)]
    struct Row<'a> {
        n_anchors: u32,
        estimator: &'a str,
        alpha: Option<f64>,
        mean_err_m: f64,
    }
    let mut rows = Vec::new();
    for (c, &n_anchors) in table.anchor_counts.iter().enumerate() {
        for (a, &alpha) in table.alphas.iter().enumerate() {
            rows.push(Row { n_anchors, estimator: "fixed", alpha: Some(alpha), mean_err_m: table.fixed[a][c] });
        }
        rows.push(Row { n_anchors, estimator: "magd", alpha: None, mean_err_m: table.magd[c] });
    }
    write_rows(path, &rows, &["n_anchors", "estimator", "alpha", "mean_err_m"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::setup2;
    use rand::SeedableRng;

    fn record(err_m: f64, coasting: bool) -> MetricsRecord {
        MetricsRecord {
            run_id: "x".into(),
            rep: 0,
            t: 1,
            target_id: 0,
            err_m,
            n_in_range: 4,
            alpha_hat: 1.0,
            d_bar: 0.5,
            coasting,
        }
    }

    #[test]
    fn summary_statistics() {
        let s = Summary::from_records("x", 1, &[record(1.0, false), record(3.0, true), record(2.0, false)]);
        assert_eq!(s.mean_err_m, 2.0);
        assert_eq!(s.median_err_m, 2.0);
        assert!((s.std_err_m - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(s.coasting_records, 1);
        assert_eq!(s.mean_in_range, 4.0);
    }

    #[test]
    fn metrics_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![record(1.25, false), record(0.0, true)];
        write_metrics_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), METRICS_HEADER.join(","));
        assert_eq!(read_metrics_csv(&path).unwrap(), rows);
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = setup2();
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        let mut b = a.clone();
        b.seed += 1;
        assert_ne!(config_hash(&a), config_hash(&b));
    }

    #[test]
    fn noiseless_channel_samples_equal_means() {
        let ch = RangingChannel::noiseless();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rows = channel_rows(&ch, &[1.0, 10.0, 100.0], &mut rng).unwrap();
        assert_eq!(rows[0].mean_rssi, -30.0);
        for r in rows {
            assert_eq!(r.sampled_rssi, r.mean_rssi);
            assert_eq!(r.sigma_d, 0.0);
        }
    }
}
