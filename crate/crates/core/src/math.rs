//! Small numeric helpers shared by the solvers and the detector.

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// `P(|X| <= e)` for `X ~ N(mean, std^2)`, i.e. the folded-normal CDF.
pub fn folded_normal_cdf(e: f64, mean: f64, std: f64) -> f64 {
    if e <= 0.0 {
        return 0.0;
    }
    let p = normal_cdf((e - mean) / std) - normal_cdf((-e - mean) / std);
    p.clamp(0.0, 1.0)
}

/// Shrinkage toward zero by `k`: `sign(x) * max(|x| - k, 0)`.
pub fn soft_threshold(x: f64, k: f64) -> f64 {
    if x > k {
        x - k
    } else if x < -k {
        x + k
    } else {
        0.0
    }
}

/// Solves the symmetric positive definite system `m * x = rhs` (4x4) by
/// Cholesky factorisation. Returns `None` when `m` is not numerically
/// positive definite.
pub(crate) fn cholesky_solve4(m: &[[f64; 4]; 4], rhs: &[f64; 4]) -> Option<[f64; 4]> {
    let mut l = [[0.0f64; 4]; 4];
    let scale = (0..4).map(|i| m[i][i].abs()).fold(0.0f64, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for i in 0..4 {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                // relative pivot test catches coplanar and collinear anchor sets
                if s <= 1e-12 * m[i][i].abs().max(1e-300) {
                    return None;
                }
                l[i][i] = libm::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = [0.0f64; 4];
    for i in 0..4 {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = [0.0f64; 4];
    for i in (0..4).rev() {
        let mut s = y[i];
        for k in (i + 1)..4 {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    Some(x)
}
