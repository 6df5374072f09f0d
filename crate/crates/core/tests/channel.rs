use std::sync::OnceLock;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmloc_core::channel::{build_sigma_d_table, default_grid, ChannelParams, RangingChannel, DEFAULT_TABLE_SAMPLES};

const TABLE_SEED: u64 = 0x7AB1E;

fn default_channel() -> &'static RangingChannel {
    static CHANNEL: OnceLock<RangingChannel> = OnceLock::new();
    CHANNEL.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(TABLE_SEED);
        RangingChannel::with_default_table(ChannelParams::default(), &mut rng).unwrap()
    })
}

/// Relative deviation of the measured distance, by quadrature.
///
/// Given the RSSI deviation `s`, the measured distance is `d * 10^(-X/(10 n_p))`
/// with `X ~ N(0, s^2)`, a log-normal with moments
/// `E[Y^k] = exp(k^2 a^2 s^2 / 2)`, `a = ln 10 / (10 n_p)`. The deviation `s`
/// is the distance factor times a uniform draw, integrated with Simpson's rule.
fn relative_sigma_oracle(p: &ChannelParams, d: f64) -> f64 {
    let a = std::f64::consts::LN_10 / (10.0 * p.n_p);
    let gamma = p.scale * d * d + 1.0;
    let n = 2000;
    let h = (p.sigma_max_r - p.sigma_min_r) / n as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..=n {
        let u = p.sigma_min_r + i as f64 * h;
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let s2 = (gamma * u).powi(2);
        m1 += w * (a * a * s2 / 2.0).exp();
        m2 += w * (2.0 * a * a * s2).exp();
    }
    let norm = h / 3.0 / (p.sigma_max_r - p.sigma_min_r);
    let (m1, m2) = (m1 * norm, m2 * norm);
    (m2 - m1 * m1).sqrt()
}

fn sample_errors(ch: &RangingChannel, d: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| ch.measure_distance(d, &mut rng).unwrap() - d).collect()
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

proptest! {
    #[test]
    fn path_loss_round_trip(d in 0.1f64..1000.0) {
        let p = ChannelParams::default();
        let back = p.invert_rssi(p.rssi_at_distance(d).unwrap());
        prop_assert!(((back - d) / d).abs() <= 1e-9);
    }

    #[test]
    fn measured_distances_are_positive(d in 0.01f64..400.0, seed in any::<u64>()) {
        let ch = default_channel();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(ch.measure_distance(d, &mut rng).unwrap() > 0.0);
    }
}

#[test]
fn round_trip_at_listed_distances() {
    let p = ChannelParams::default();
    for d in [0.5, 37.0, 150.0] {
        let back = p.invert_rssi(p.rssi_at_distance(d).unwrap());
        assert!(((back - d) / d).abs() <= 1e-9, "{d}");
    }
}

#[test]
fn rssi_spread_mean_at_100m() {
    let p = ChannelParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mean = (0..n).map(|_| p.sample_rssi_sigma(100.0, &mut rng).unwrap()).sum::<f64>() / n as f64;
    assert!((mean - 2.5).abs() / 2.5 < 0.01, "{mean}");
}

#[test]
fn table_matches_quadrature_oracle() {
    let ch = default_channel();
    let p = *ch.params();
    for d in [10.0, 25.0, 50.0, 100.0, 150.0] {
        let expected = relative_sigma_oracle(&p, d) * d;
        let got = ch.sigma_d(d);
        assert!((got - expected).abs() / expected < 0.03, "d={d}: table {got} oracle {expected}");
    }
}

#[test]
fn sampled_spread_at_50m_matches_table() {
    let ch = default_channel();
    let errors = sample_errors(ch, 50.0, 100_000, 99);
    let sd = std_dev(&errors);
    let table = ch.sigma_d(50.0);
    assert!((sd - table).abs() / table < 0.05, "sample {sd} table {table}");
}

#[test]
fn spread_grows_over_a_decade() {
    let ch = default_channel();
    let near = std_dev(&sample_errors(ch, 10.0, 100_000, 5));
    let far = std_dev(&sample_errors(ch, 100.0, 100_000, 6));
    assert!(far / near > 5.0, "{near} {far}");
}

#[test]
fn median_error_is_unbiased() {
    let ch = default_channel();
    let n = 100_001;
    let mut errors = sample_errors(ch, 50.0, n, 21);
    errors.sort_by(f64::total_cmp);
    let median = errors[n / 2];
    let bound = 3.0 * ch.sigma_d(50.0) / (n as f64).sqrt();
    assert!(median.abs() <= bound, "median {median} bound {bound}");
    // the meter-domain error is right-skewed, so the mean sits above zero
    let mean = errors.iter().sum::<f64>() / n as f64;
    assert!(mean > 0.0);
}

#[test]
fn relative_spread_at_150m_versus_50m() {
    let ch = default_channel();
    let p = *ch.params();
    let table_ratio = (ch.sigma_d(150.0) / 150.0) / (ch.sigma_d(50.0) / 50.0);
    let oracle_ratio = relative_sigma_oracle(&p, 150.0) / relative_sigma_oracle(&p, 50.0);
    assert!((table_ratio - oracle_ratio).abs() / oracle_ratio < 0.03, "{table_ratio} {oracle_ratio}");
    // long links are markedly less reliable in relative terms
    assert!(table_ratio > 2.5, "{table_ratio}");
}

#[test]
fn binned_table_is_non_decreasing() {
    let ch = default_channel();
    let grid = ch.table().grid();
    let values = ch.table().values();
    let window = 5;
    let bins: Vec<f64> = grid
        .iter()
        .zip(values)
        .filter(|(d, _)| (10.0..=150.0).contains(*d))
        .map(|(_, s)| *s)
        .collect::<Vec<_>>()
        .chunks(window)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    assert!(bins.windows(2).all(|w| w[1] >= w[0]), "{bins:?}");
}

#[test]
fn table_is_a_pure_function_of_its_seed() {
    let p = ChannelParams::default();
    let grid = vec![5.0, 50.0, 120.0];
    let build = |seed| build_sigma_d_table(&p, &grid, DEFAULT_TABLE_SAMPLES, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(build(3), build(3));
    assert_ne!(build(3), build(4));
}

#[test]
fn noiseless_channel_table_is_zero_and_exact() {
    let p = ChannelParams::noiseless();
    let table = build_sigma_d_table(&p, &default_grid(), DEFAULT_TABLE_SAMPLES, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(table.values().iter().all(|&s| s == 0.0));
    let ch = RangingChannel::new(p, table).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    assert_eq!(ch.measure_distance(42.5, &mut rng).unwrap(), 42.5);
}
