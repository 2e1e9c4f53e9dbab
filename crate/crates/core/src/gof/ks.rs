//! One-sample Kolmogorov–Smirnov test against the unit exponential law.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// `D_N = sup_x |F̂_N(x) − (1 − e^{−x})|` with the asymptotic Kolmogorov p-value
/// at `√N · D_N`.
pub fn ks_exponential_test(sample: &[f64]) -> Result<KsResult> {
    if sample.is_empty() {
        return Err(Error::InsufficientEvents(
            "KS test needs at least one value".into(),
        ));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = -(-x.max(0.0)).exp_m1();
            let above = (i as f64 + 1.0) / n - cdf;
            let below = cdf - i as f64 / n;
            above.max(below)
        })
        .fold(0.0f64, f64::max);
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_sf(n.sqrt() * statistic),
    })
}

/// Survival function of the Kolmogorov distribution, `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    const TERM_TOL: f64 = 1e-12;
    if x <= 0.0 {
        return 1.0;
    }
    let p = if x < 1.0 {
        // P(K ≤ x) = √(2π)/x Σ_{k≥1} exp(−(2k−1)² π² / (8x²))
        let c = std::f64::consts::PI.powi(2) / (8.0 * x * x);
        let mut sum = 0.0;
        for k in 1.. {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < TERM_TOL || k > 1000 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * sum
    } else {
        // P(K > x) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²x²)
        let mut sum = 0.0;
        for k in 1.. {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < TERM_TOL || k > 1000 {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(0.0, 1.0)
}
