//! Regression and distribution-comparison helpers used by the Monte Carlo
//! layer: weighted least squares on log-log data, bootstrap resampling and
//! two-sample tests.

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, SeedLineage};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Result of a (weighted) linear regression y = intercept + slope * x.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub ci95: (f64, f64),
    /// Set when nonpositive estimates had to be dropped before taking logs.
    pub dropped_points: usize,
}

/// Ordinary least squares on (x, y) with optional per-point weights.
pub fn weighted_least_squares(x: &[f64], y: &[f64], w: Option<&[f64]>) -> Result<ExponentFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Precondition(format!(
            "regression needs >= 2 points, got {}",
            x.len()
        )));
    }
    let n = x.len();
    let weights: Vec<f64> = match w {
        Some(w) => w.to_vec(),
        None => vec![1.0; n],
    };
    let sw: f64 = weights.iter().sum();
    let mx = x.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / sw;
    let my = y.iter().zip(&weights).map(|(a, w)| a * w).sum::<f64>() / sw;
    let sxx: f64 = x
        .iter()
        .zip(&weights)
        .map(|(a, w)| w * (a - mx) * (a - mx))
        .sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((a, b), w)| w * (a - mx) * (b - my))
        .sum();
    if sxx <= 0.0 {
        return Err(Error::Precondition(
            "degenerate regression: no spread in x".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let ss_tot: f64 = y
        .iter()
        .zip(&weights)
        .map(|(b, w)| w * (b - my) * (b - my))
        .sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .zip(&weights)
        .map(|((a, b), w)| {
            let r = b - intercept - slope * a;
            w * r * r
        })
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    // Standard error of the slope from the weighted residual variance.
    let dof = (n as f64 - 2.0).max(1.0);
    let sigma2 = ss_res / dof * (n as f64) / sw;
    let se = (sigma2 / sxx).sqrt();
    let ci95 = (slope - 1.96 * se, slope + 1.96 * se);

    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
        ci95,
        dropped_points: 0,
    })
}

/// Log-log regression of `ys` against `xs`, dropping nonpositive entries.
pub fn log_log_fit(xs: &[f64], ys: &[f64], se: Option<&[f64]>) -> Result<ExponentFit> {
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut lw = Vec::new();
    let mut dropped = 0usize;
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        if x > 0.0 && y > 0.0 {
            lx.push(x.ln());
            ly.push(y.ln());
            // Error of log(y) is se/y; weight by its inverse square.
            let w = match se {
                Some(s) if s[i] > 0.0 => (y / s[i]).powi(2).min(1e12),
                _ => 1.0,
            };
            lw.push(w);
        } else {
            dropped += 1;
        }
    }
    let mut fit = weighted_least_squares(&lx, &ly, Some(&lw))?;
    fit.dropped_points = dropped;
    Ok(fit)
}

/// Empirical L^m norm (E|x|^m)^{1/m}.
pub fn lm_norm(samples: &[f64], m: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mean = samples.iter().map(|x| x.abs().powf(m)).sum::<f64>() / samples.len() as f64;
    mean.powf(1.0 / m)
}

/// Bootstrap standard error of the L^m norm over paths.
pub fn bootstrap_lm_se(samples: &[f64], m: f64, resamples: usize, lineage: SeedLineage) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let mut rng = stream(lineage, Purpose::Bootstrap);
    let n = samples.len();
    let mut estimates = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = samples[rng.gen_range(0..n)];
        }
        estimates.push(lm_norm(&buf, m));
    }
    let mean = estimates.iter().sum::<f64>() / resamples as f64;
    let var = estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (resamples - 1) as f64;
    var.sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (sa.len(), sb.len());
    let mut i = 0;
    let mut j = 0;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if sa[i] <= sb[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical_value(n: usize, m: usize, alpha: f64) -> f64 {
    // c(alpha) = sqrt(-ln(alpha/2)/2).
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

/// 1-Wasserstein distance between empirical distributions.
pub fn wasserstein1(a: &[f64], b: &[f64]) -> f64 {
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(|x, y| x.partial_cmp(y).unwrap());
    sb.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // Quantile-function integral on a common uniform grid.
    let k = (sa.len().max(sb.len())).max(2);
    let q = |s: &[f64], u: f64| -> f64 {
        let idx = (u * (s.len() as f64 - 1.0)).round() as usize;
        s[idx.min(s.len() - 1)]
    };
    (0..k)
        .map(|i| {
            let u = (i as f64 + 0.5) / k as f64;
            (q(&sa, u) - q(&sb, u)).abs()
        })
        .sum::<f64>()
        / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exact_power_law_is_recovered() {
        let xs: Vec<f64> = (1..8).map(|k| 2f64.powi(-k)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(0.7)).collect();
        let fit = log_log_fit(&xs, &ys, None).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.intercept.exp(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r_squared, 1.0, epsilon = 1e-12);
        assert!(fit.ci95.0 <= fit.slope && fit.slope <= fit.ci95.1);
    }

    #[test]
    fn constant_table_has_zero_slope() {
        let xs: Vec<f64> = (1..6).map(|k| 2f64.powi(-k)).collect();
        let ys = vec![2.5; 5];
        let fit = log_log_fit(&xs, &ys, None).unwrap();
        assert_abs_diff_eq!(fit.slope, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nonpositive_points_are_dropped_and_flagged() {
        let xs = vec![0.5, 0.25, 0.125, 0.0625];
        let ys = vec![1.0, 0.0, 0.5, 0.25];
        let fit = log_log_fit(&xs, &ys, None).unwrap();
        assert_eq!(fit.dropped_points, 1);
    }

    #[test]
    fn ks_of_identical_samples_is_zero() {
        let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(ks_statistic(&a, &a), 0.0);
    }

    #[test]
    fn ks_of_disjoint_samples_is_one() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let b: Vec<f64> = (100..150).map(|i| i as f64).collect();
        assert_abs_diff_eq!(ks_statistic(&a, &b), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ks_critical_value_matches_tables() {
        // c(0.01) = 1.628 for the asymptotic two-sample test.
        let c = ks_critical_value(10_000, 10_000, 0.01) / (2.0f64 / 10_000.0).sqrt();
        assert_abs_diff_eq!(c, 1.628, epsilon = 2e-3);
    }
}
