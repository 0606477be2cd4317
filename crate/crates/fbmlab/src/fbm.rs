//! Exact sampling of fractional Brownian motion on a uniform grid, the
//! discrete Bm<->fBm operator pair realized as a Volterra kernel matrix, and
//! the Gaussian conditional law of sampled paths.
//!
//! The default sampler is circulant embedding of the fractional Gaussian
//! noise covariance (O(n log n), exact in law). The kernel matrix is the
//! Cholesky factor of the same covariance in the increment basis; it maps
//! Brownian increments to fBm values and is exactly invertible by triangular
//! substitution, so both directions of the operator pair live on one object.

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose, SeedLineage};
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// What a sampled path represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    W,
    B,
    X,
    K,
}

/// Configuration for a family of fBm paths on a uniform grid.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FbmConfig {
    pub hurst: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub dimension: usize,
}

impl FbmConfig {
    pub fn new(hurst: f64, horizon: f64, n_steps: usize, dimension: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst <= 0.5) {
            return Err(Error::Domain(format!("hurst must be in (0, 0.5], got {hurst}")));
        }
        if horizon <= 0.0 {
            return Err(Error::Domain(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps < 2 {
            return Err(Error::Domain(format!("n_steps must be >= 2, got {n_steps}")));
        }
        if dimension == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        Ok(Self {
            hurst,
            horizon,
            n_steps,
            dimension,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }
}

/// A sampled path: uniform time grid plus one value series per coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridPath {
    pub times: Vec<f64>,
    /// One series of length `times.len()` per coordinate.
    pub coords: Vec<Vec<f64>>,
    pub kind: PathKind,
    pub hurst: f64,
    pub seed_lineage: Option<SeedLineage>,
}

impl GridPath {
    pub fn dimension(&self) -> usize {
        self.coords.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    /// Value at grid index `i` as a per-coordinate vector.
    pub fn value(&self, i: usize) -> Vec<f64> {
        self.coords.iter().map(|c| c[i]).collect()
    }

    pub fn uniform_grid(n_steps: usize, horizon: f64) -> Vec<f64> {
        let dt = horizon / n_steps as f64;
        (0..=n_steps).map(|i| i as f64 * dt).collect()
    }
}

/// Covariance of fractional Gaussian noise increments on a uniform grid.
///
/// Returns dt^{2H} * (|k+1|^{2H} - 2|k|^{2H} + |k-1|^{2H}) / 2 at lag k.
pub fn fgn_covariance(hurst: f64, lag: usize, dt: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst <= 1.0) {
        return Err(Error::Domain(format!("hurst must be in (0, 1], got {hurst}")));
    }
    if dt <= 0.0 {
        return Err(Error::Domain(format!("dt must be positive, got {dt}")));
    }
    let k = lag as f64;
    let h2 = 2.0 * hurst;
    let gamma = 0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).abs().powf(h2));
    Ok(dt.powf(h2) * gamma)
}

/// Analytic fBm covariance (s^{2H} + t^{2H} - |t-s|^{2H}) / 2.
pub fn fbm_covariance(hurst: f64, s: f64, t: f64) -> f64 {
    0.5 * (s.abs().powf(2.0 * hurst) + t.abs().powf(2.0 * hurst)
        - (t - s).abs().powf(2.0 * hurst))
}

/// Which synthesis route produced a batch of paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerMethod {
    CirculantEmbedding,
    CholeskyFallback,
}

/// Reusable sampler: precomputed circulant eigenvalues (or Cholesky factor)
/// and a shared FFT plan. Immutable after construction, safe to share across
/// workers.
pub struct FbmSampler {
    config: FbmConfig,
    method: SamplerMethod,
    /// sqrt(lambda_k / M) for the circulant route.
    sqrt_eig: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    /// Unit-grid increment Cholesky factor for the fallback route.
    chol: Option<PackedLower>,
}

impl FbmSampler {
    pub fn new(config: FbmConfig) -> Result<Self> {
        let n = config.n_steps;
        let m = 2 * n;
        // First row of the circulant embedding of the unit-grid fGn covariance.
        let mut row: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); m];
        for k in 0..=n {
            row[k] = Complex::new(fgn_covariance(config.hurst, k, 1.0)?, 0.0);
        }
        for k in (n + 1)..m {
            row[k] = row[m - k];
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(m);
        let mut eig = row;
        fft.process(&mut eig);

        let max_eig = eig.iter().map(|c| c.re).fold(f64::MIN, f64::max);
        let min_eig = eig.iter().map(|c| c.re).fold(f64::MAX, f64::min);
        if min_eig >= -1e-8 * max_eig.max(1.0) {
            let sqrt_eig = eig
                .iter()
                .map(|c| (c.re.max(0.0) / m as f64).sqrt())
                .collect();
            Ok(Self {
                config,
                method: SamplerMethod::CirculantEmbedding,
                sqrt_eig,
                fft,
                chol: None,
            })
        } else {
            // Embedding failed; fall back to the exact Cholesky factor.
            let chol = fgn_cholesky(config.hurst, n)?;
            Ok(Self {
                config,
                method: SamplerMethod::CholeskyFallback,
                sqrt_eig: Vec::new(),
                fft,
                chol: Some(chol),
            })
        }
    }

    pub fn method(&self) -> SamplerMethod {
        self.method
    }

    pub fn config(&self) -> &FbmConfig {
        &self.config
    }

    /// Sample one path. Bit-identical for identical `(config, lineage)`.
    pub fn sample(&self, lineage: SeedLineage) -> GridPath {
        let cfg = &self.config;
        let n = cfg.n_steps;
        let dt = cfg.dt();
        let scale = dt.powf(cfg.hurst);
        let mut coords = Vec::with_capacity(cfg.dimension);
        for c in 0..cfg.dimension {
            let mut rng = stream(lineage, Purpose::FbmCoordinate(c as u64));
            let fgn = match self.method {
                SamplerMethod::CirculantEmbedding => self.circulant_fgn(&mut rng),
                SamplerMethod::CholeskyFallback => {
                    let chol = self.chol.as_ref().expect("fallback factor present");
                    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
                    chol.matvec(&z)
                }
            };
            let mut series = Vec::with_capacity(n + 1);
            series.push(0.0);
            let mut acc = 0.0;
            for g in fgn {
                acc += g * scale;
                series.push(acc);
            }
            coords.push(series);
        }
        GridPath {
            times: GridPath::uniform_grid(n, cfg.horizon),
            coords,
            kind: PathKind::B,
            hurst: cfg.hurst,
            seed_lineage: Some(lineage),
        }
    }

    fn circulant_fgn(&self, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.config.n_steps;
        let m = 2 * n;
        let mut spec = vec![Complex::new(0.0, 0.0); m];
        let z0: f64 = rng.sample(StandardNormal);
        let zn: f64 = rng.sample(StandardNormal);
        spec[0] = Complex::new(self.sqrt_eig[0] * z0, 0.0);
        spec[n] = Complex::new(self.sqrt_eig[n] * zn, 0.0);
        let half = std::f64::consts::FRAC_1_SQRT_2;
        for k in 1..n {
            let u: f64 = rng.sample(StandardNormal);
            let v: f64 = rng.sample(StandardNormal);
            let a = self.sqrt_eig[k] * half;
            spec[k] = Complex::new(a * u, a * v);
            spec[m - k] = spec[k].conj();
        }
        self.fft.process(&mut spec);
        spec.truncate(n);
        spec.into_iter().map(|c| c.re).collect()
    }
}

/// Convenience one-shot sampler.
pub fn sample_fbm(config: &FbmConfig, lineage: SeedLineage) -> Result<GridPath> {
    Ok(FbmSampler::new(*config)?.sample(lineage))
}

/// Packed row-major lower-triangular matrix (row i holds i+1 entries).
#[derive(Debug, Clone)]
pub struct PackedLower {
    pub n: usize,
    data: Vec<f64>,
}

impl PackedLower {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * (n + 1) / 2],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.data[i * (i + 1) / 2 + j]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * (i + 1) / 2 + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * (i + 1) / 2..(i + 1) * (i + 2) / 2]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Forward substitution: solve L y = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = self.row(i);
            let dot: f64 = row[..i].iter().zip(&y).map(|(a, b)| a * b).sum();
            y[i] = (b[i] - dot) / row[i];
        }
        y
    }
}

/// Cholesky factor of the unit-grid fGn Toeplitz covariance.
fn fgn_cholesky(hurst: f64, n: usize) -> Result<PackedLower> {
    let gamma: Vec<f64> = (0..n)
        .map(|k| fgn_covariance(hurst, k, 1.0))
        .collect::<Result<_>>()?;
    let mut l = PackedLower::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = gamma[i - j];
            for k in 0..j {
                s -= l.at(i, k) * l.at(j, k);
            }
            if j == i {
                if s <= 0.0 {
                    return Err(Error::NotPsd { row: i, pivot: s });
                }
                *l.at_mut(i, j) = s.sqrt();
            } else {
                *l.at_mut(i, j) = s / l.at(j, j);
            }
        }
    }
    Ok(l)
}

/// Lower-triangular kernel mapping Brownian increments to fBm values on the
/// grid: B = K * dW with dW ~ N(0, dt I). At H = 1/2 it is the cumulative-sum
/// matrix. Row i corresponds to the value at t_{i+1}, column j to the
/// increment over (t_j, t_{j+1}].
pub struct VolterraKernelMatrix {
    pub hurst: f64,
    pub dt: f64,
    pub n: usize,
    /// Increment-to-increment factor: dB = inc * dW.
    inc: PackedLower,
    /// Increment-to-value kernel (column cumulative sums of `inc`).
    kernel: PackedLower,
}

/// Build the kernel via Cholesky of the exact fGn covariance.
pub fn build_volterra(config: &FbmConfig) -> Result<VolterraKernelMatrix> {
    let n = config.n_steps;
    let dt = config.dt();
    let mut inc = fgn_cholesky(config.hurst, n)?;
    // Rescale so the input increments carry variance dt instead of 1.
    let s = dt.powf(config.hurst - 0.5);
    for i in 0..n {
        for j in 0..=i {
            *inc.at_mut(i, j) *= s;
        }
    }
    let mut kernel = PackedLower::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let above = if i > 0 && j < i { kernel.at(i - 1, j) } else { 0.0 };
            *kernel.at_mut(i, j) = above + inc.at(i, j);
        }
    }
    Ok(VolterraKernelMatrix {
        hurst: config.hurst,
        dt,
        n,
        inc,
        kernel,
    })
}

impl VolterraKernelMatrix {
    /// Kernel weight K[i][j] (value row i, increment column j), in units such
    /// that B_{t_{i+1}} = sum_j K[i][j] dW_j.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.kernel.at(i, j)
    }

    fn check_grid(&self, path: &GridPath) -> Result<()> {
        if path.len() != self.n + 1 {
            return Err(Error::Precondition(format!(
                "path has {} points but kernel grid has {}",
                path.len(),
                self.n + 1
            )));
        }
        if (path.dt() - self.dt).abs() > 1e-12 * self.dt {
            return Err(Error::Precondition("path dt does not match kernel dt".into()));
        }
        Ok(())
    }

    /// Map a Brownian path to an fBm path (triangular matrix-vector product).
    pub fn apply_abar(&self, w: &GridPath) -> Result<GridPath> {
        self.check_grid(w)?;
        let coords = w
            .coords
            .iter()
            .map(|series| {
                let dw: Vec<f64> = series.windows(2).map(|p| p[1] - p[0]).collect();
                let db = self.inc.matvec(&dw);
                let mut out = Vec::with_capacity(self.n + 1);
                out.push(0.0);
                let mut acc = 0.0;
                for x in db {
                    acc += x;
                    out.push(acc);
                }
                out
            })
            .collect();
        Ok(GridPath {
            times: w.times.clone(),
            coords,
            kind: PathKind::B,
            hurst: self.hurst,
            seed_lineage: w.seed_lineage,
        })
    }

    /// Recover the Brownian path from an fBm path (triangular solve).
    pub fn apply_a(&self, b: &GridPath) -> Result<GridPath> {
        self.check_grid(b)?;
        let coords = b
            .coords
            .iter()
            .map(|series| {
                let db: Vec<f64> = series.windows(2).map(|p| p[1] - p[0]).collect();
                let dw = self.inc.solve(&db);
                let mut out = Vec::with_capacity(self.n + 1);
                out.push(0.0);
                let mut acc = 0.0;
                for x in dw {
                    acc += x;
                    out.push(acc);
                }
                out
            })
            .collect();
        Ok(GridPath {
            times: b.times.clone(),
            coords,
            kind: PathKind::W,
            hurst: 0.5,
            seed_lineage: b.seed_lineage,
        })
    }

    /// Conditional mean and variance of B_r given the history up to grid time
    /// index `u_idx`. The mean is per coordinate; the variance is the same
    /// scalar for every coordinate.
    pub fn conditional_law(
        &self,
        b: &GridPath,
        u_idx: usize,
        r_idx: usize,
    ) -> Result<(Vec<f64>, f64)> {
        self.check_grid(b)?;
        if u_idx >= r_idx || r_idx > self.n {
            return Err(Error::Precondition(format!(
                "need u < r <= n, got u_idx={u_idx}, r_idx={r_idx}"
            )));
        }
        let row = self.kernel.row(r_idx - 1);
        let mean = b
            .coords
            .iter()
            .map(|series| {
                let db: Vec<f64> = series.windows(2).map(|p| p[1] - p[0]).collect();
                let dw = self.inc.solve(&db);
                row[..u_idx].iter().zip(&dw).map(|(k, w)| k * w).sum()
            })
            .collect();
        let sigma2: f64 = row[u_idx..].iter().map(|k| k * k).sum::<f64>() * self.dt;
        Ok((mean, sigma2))
    }

    /// Conditional variance alone; does not need path data.
    pub fn conditional_variance(&self, u_idx: usize, r_idx: usize) -> Result<f64> {
        if u_idx >= r_idx || r_idx > self.n {
            return Err(Error::Precondition(format!(
                "need u < r <= n, got u_idx={u_idx}, r_idx={r_idx}"
            )));
        }
        let row = self.kernel.row(r_idx - 1);
        Ok(row[u_idx..].iter().map(|k| k * k).sum::<f64>() * self.dt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fgn_covariance_at_lag_zero_is_dt_2h() {
        assert_abs_diff_eq!(fgn_covariance(0.3, 0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            fgn_covariance(0.3, 0, 0.25).unwrap(),
            0.25f64.powf(0.6),
            epsilon = 1e-15
        );
    }

    #[test]
    fn brownian_increments_are_uncorrelated() {
        assert_abs_diff_eq!(fgn_covariance(0.5, 3, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fgn_covariance(0.5, 1, 1.0).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn quarter_hurst_lag_one_value() {
        // (2^{0.5} - 2) / 2, negatively correlated increments.
        let expected = 0.5 * (2f64.sqrt() - 2.0);
        assert_abs_diff_eq!(fgn_covariance(0.25, 1, 1.0).unwrap(), expected, epsilon = 1e-15);
    }

    #[test]
    fn covariance_rejects_bad_domain() {
        assert!(fgn_covariance(0.3, 0, 0.0).is_err());
        assert!(fgn_covariance(0.0, 0, 1.0).is_err());
        assert!(fgn_covariance(1.5, 0, 1.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = FbmConfig::new(0.3, 1.0, 64, 2).unwrap();
        let a = sample_fbm(&cfg, SeedLineage::new(11, 5)).unwrap();
        let b = sample_fbm(&cfg, SeedLineage::new(11, 5)).unwrap();
        assert_eq!(a.coords, b.coords);
        let c = sample_fbm(&cfg, SeedLineage::new(11, 6)).unwrap();
        assert_ne!(a.coords, c.coords);
    }

    #[test]
    fn paths_start_at_origin() {
        let cfg = FbmConfig::new(0.25, 2.0, 32, 3).unwrap();
        let p = sample_fbm(&cfg, SeedLineage::new(1, 0)).unwrap();
        assert_eq!(p.len(), 33);
        for c in &p.coords {
            assert_eq!(c[0], 0.0);
        }
    }

    #[test]
    fn volterra_reproduces_fbm_covariance() {
        let cfg = FbmConfig::new(0.3, 1.0, 32, 1).unwrap();
        let k = build_volterra(&cfg).unwrap();
        let dt = cfg.dt();
        for i in 0..32 {
            for j in 0..=i {
                let cov: f64 = (0..=j).map(|l| k.weight(i, l) * k.weight(j, l)).sum::<f64>() * dt;
                let t_i = (i + 1) as f64 * dt;
                let t_j = (j + 1) as f64 * dt;
                let exact = fbm_covariance(0.3, t_i, t_j);
                assert!(
                    (cov - exact).abs() <= 1e-10 * exact.abs().max(1e-10),
                    "covariance mismatch at ({i},{j}): {cov} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn volterra_is_cumsum_at_half() {
        let cfg = FbmConfig::new(0.5, 2.0, 16, 1).unwrap();
        let k = build_volterra(&cfg).unwrap();
        for i in 0..16 {
            for j in 0..=i {
                assert_abs_diff_eq!(k.weight(i, j), 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn volterra_two_by_two_matches_hand_cholesky() {
        let cfg = FbmConfig::new(0.3, 1.0, 2, 1).unwrap();
        let dt = cfg.dt();
        let k = build_volterra(&cfg).unwrap();
        // Hand Cholesky of the 2x2 fGn covariance, in increment units.
        let g0 = fgn_covariance(0.3, 0, dt).unwrap();
        let g1 = fgn_covariance(0.3, 1, dt).unwrap();
        let l00 = g0.sqrt();
        let l10 = g1 / l00;
        let l11 = (g0 - l10 * l10).sqrt();
        let s = dt.sqrt();
        assert_abs_diff_eq!(k.weight(0, 0), l00 / s, epsilon = 1e-12);
        // Row 1 of the value kernel is the column cumsum of the factor.
        assert_abs_diff_eq!(k.weight(1, 0), (l00 + l10) / s, epsilon = 1e-12);
        assert_abs_diff_eq!(k.weight(1, 1), l11 / s, epsilon = 1e-12);
    }

    #[test]
    fn operator_roundtrip_is_identity() {
        let cfg = FbmConfig::new(0.3, 1.0, 128, 1).unwrap();
        let kernel = build_volterra(&cfg).unwrap();
        let b = sample_fbm(&cfg, SeedLineage::new(3, 1)).unwrap();
        let w = kernel.apply_a(&b).unwrap();
        let b2 = kernel.apply_abar(&w).unwrap();
        let scale = b.coords[0].iter().fold(0f64, |m, x| m.max(x.abs()));
        for (x, y) in b.coords[0].iter().zip(&b2.coords[0]) {
            assert!((x - y).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn abar_is_identity_at_half() {
        let cfg = FbmConfig::new(0.5, 1.0, 64, 1).unwrap();
        let kernel = build_volterra(&cfg).unwrap();
        let w = sample_fbm(&cfg, SeedLineage::new(4, 0)).unwrap();
        let b = kernel.apply_abar(&w).unwrap();
        for (x, y) in w.coords[0].iter().zip(&b.coords[0]) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_variance_is_markov_at_half() {
        let cfg = FbmConfig::new(0.5, 1.0, 64, 1).unwrap();
        let kernel = build_volterra(&cfg).unwrap();
        let dt = cfg.dt();
        for (u, r) in [(0usize, 5usize), (10, 11), (3, 60)] {
            let s2 = kernel.conditional_variance(u, r).unwrap();
            assert_abs_diff_eq!(s2, (r - u) as f64 * dt, epsilon = 1e-12);
        }
    }

    #[test]
    fn conditional_mean_at_origin_is_zero() {
        let cfg = FbmConfig::new(0.3, 1.0, 64, 2).unwrap();
        let kernel = build_volterra(&cfg).unwrap();
        let b = sample_fbm(&cfg, SeedLineage::new(9, 2)).unwrap();
        for r in [1usize, 7, 32, 64] {
            let (mean, _) = kernel.conditional_law(&b, 0, r).unwrap();
            for m in mean {
                assert_eq!(m, 0.0);
            }
        }
    }

    #[test]
    fn conditional_law_rejects_bad_order() {
        let cfg = FbmConfig::new(0.3, 1.0, 16, 1).unwrap();
        let kernel = build_volterra(&cfg).unwrap();
        assert!(kernel.conditional_variance(5, 5).is_err());
        assert!(kernel.conditional_variance(8, 3).is_err());
    }

    #[test]
    fn lnd_constant_is_positive() {
        let cfg = FbmConfig::new(0.3, 1.0, 128, 1).unwrap();
        let kernel = build_volterra(&cfg).unwrap();
        let dt = cfg.dt();
        let mut min_ratio = f64::MAX;
        for u in (0..120).step_by(8) {
            for r in [u + 1, u + 4, u + 8] {
                let s2 = kernel.conditional_variance(u, r).unwrap();
                let lag = (r - u) as f64 * dt;
                min_ratio = min_ratio.min(s2 / lag.powf(0.6));
            }
        }
        assert!(min_ratio > 0.0, "LND ratio must stay positive, got {min_ratio}");
    }
}
