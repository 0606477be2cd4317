//! Periodic spatial lattice and lattice-sampled vector fields.
//!
//! The lattice covers [-L, L)^d with a power-of-two number of points per
//! axis, which makes it a direct carrier for FFT-based frequency analysis.
//! Functions are R^d-valued, stored one component per flat array.

use crate::error::{Error, Result};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialLattice {
    pub dimension: usize,
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl SpatialLattice {
    pub fn new(dimension: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if dimension == 0 || dimension > 2 {
            return Err(Error::Config(format!(
                "lattice dimension must be 1 or 2, got {dimension}"
            )));
        }
        if half_width <= 0.0 {
            return Err(Error::Config("half_width must be positive".into()));
        }
        if points_per_axis < 64 || !points_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "points_per_axis must be a power of two >= 64, got {points_per_axis}"
            )));
        }
        Ok(Self {
            dimension,
            half_width,
            points_per_axis,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    pub fn total_points(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    /// Axis coordinate of index k.
    pub fn coord(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }

    /// Angular frequency of FFT bin k along one axis.
    pub fn frequency(&self, k: usize) -> f64 {
        let n = self.points_per_axis;
        let signed = if k <= n / 2 { k as isize } else { k as isize - n as isize };
        std::f64::consts::PI * signed as f64 / self.half_width
    }

    /// Largest resolved |xi| (box corner of the frequency lattice).
    pub fn max_frequency(&self) -> f64 {
        let nyq = std::f64::consts::PI * (self.points_per_axis / 2) as f64 / self.half_width;
        nyq * (self.dimension as f64).sqrt()
    }

    /// Euclidean |xi| of the flat frequency index.
    pub fn frequency_norm(&self, flat: usize) -> f64 {
        match self.dimension {
            1 => self.frequency(flat).abs(),
            _ => {
                let n = self.points_per_axis;
                let fx = self.frequency(flat % n);
                let fy = self.frequency(flat / n);
                (fx * fx + fy * fy).sqrt()
            }
        }
    }

    /// Frequency component along `axis` of the flat index.
    pub fn frequency_component(&self, flat: usize, axis: usize) -> f64 {
        let n = self.points_per_axis;
        match axis {
            0 => self.frequency(flat % n),
            _ => self.frequency(flat / n),
        }
    }

    /// Spatial point of the flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let n = self.points_per_axis;
        match self.dimension {
            1 => vec![self.coord(flat)],
            _ => vec![self.coord(flat % n), self.coord(flat / n)],
        }
    }

    /// True when `x` is safely inside the box (one cell away from the edge,
    /// so multilinear interpolation never wraps around).
    pub fn contains(&self, x: &[f64]) -> bool {
        x[..self.dimension]
            .iter()
            .all(|&c| c.abs() <= self.half_width - self.spacing())
    }
}

/// A d-dimensional vector field sampled on the lattice.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridFunction {
    pub lattice: SpatialLattice,
    /// components[c][flat] with c < lattice.dimension.
    pub components: Vec<Vec<f64>>,
}

impl GridFunction {
    pub fn zeros(lattice: SpatialLattice) -> Self {
        Self {
            lattice,
            components: vec![vec![0.0; lattice.total_points()]; lattice.dimension],
        }
    }

    pub fn from_fn(lattice: SpatialLattice, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let mut g = Self::zeros(lattice);
        for flat in 0..lattice.total_points() {
            let x = lattice.point(flat);
            let v = f(&x);
            for c in 0..lattice.dimension {
                g.components[c][flat] = v[c];
            }
        }
        g
    }

    /// Scalar field broadcast to every component (convenient for drifts of
    /// the form b(x) = phi(x) * (1, ..., 1)).
    pub fn from_scalar_fn(lattice: SpatialLattice, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(lattice, |x| vec![f(x); lattice.dimension])
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m: f64, &x| m.max(x.abs()))
    }

    /// Riemann-sum integral of each component over the box.
    pub fn integral(&self) -> Vec<f64> {
        let vol = self.lattice.cell_volume();
        self.components
            .iter()
            .map(|c| c.iter().sum::<f64>() * vol)
            .collect()
    }

    /// Periodic multilinear interpolation; writes into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let lat = &self.lattice;
        let n = lat.points_per_axis;
        let inv_dx = 1.0 / lat.spacing();
        match lat.dimension {
            1 => {
                let u = (x[0] + lat.half_width) * inv_dx;
                let i0 = u.floor();
                let frac = u - i0;
                let a = (i0 as i64).rem_euclid(n as i64) as usize;
                let b = (a + 1) % n;
                for (c, o) in self.components.iter().zip(out.iter_mut()) {
                    *o = c[a] * (1.0 - frac) + c[b] * frac;
                }
            }
            _ => {
                let u = (x[0] + lat.half_width) * inv_dx;
                let v = (x[1] + lat.half_width) * inv_dx;
                let iu = u.floor();
                let iv = v.floor();
                let fu = u - iu;
                let fv = v - iv;
                let ax = (iu as i64).rem_euclid(n as i64) as usize;
                let bx = (ax + 1) % n;
                let ay = (iv as i64).rem_euclid(n as i64) as usize;
                let by = (ay + 1) % n;
                for (c, o) in self.components.iter().zip(out.iter_mut()) {
                    let f00 = c[ay * n + ax];
                    let f10 = c[ay * n + bx];
                    let f01 = c[by * n + ax];
                    let f11 = c[by * n + bx];
                    *o = f00 * (1.0 - fu) * (1.0 - fv)
                        + f10 * fu * (1.0 - fv)
                        + f01 * (1.0 - fu) * fv
                        + f11 * fu * fv;
                }
            }
        }
    }

    /// Nearest-neighbor interpolation (A/B alternative to multilinear).
    pub fn eval_nearest_into(&self, x: &[f64], out: &mut [f64]) {
        let lat = &self.lattice;
        let n = lat.points_per_axis;
        let inv_dx = 1.0 / lat.spacing();
        let idx = |c: f64| -> usize {
            (((c + lat.half_width) * inv_dx).round() as i64).rem_euclid(n as i64) as usize
        };
        let flat = match lat.dimension {
            1 => idx(x[0]),
            _ => idx(x[1]) * n + idx(x[0]),
        };
        for (c, o) in self.components.iter().zip(out.iter_mut()) {
            *o = c[flat];
        }
    }
}

/// FFT engine bound to one lattice; forward/inverse transforms of scalar
/// component arrays, dimension-aware.
pub struct Spectral {
    lattice: SpatialLattice,
    fwd: std::sync::Arc<dyn rustfft::Fft<f64>>,
    inv: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

impl Spectral {
    pub fn new(lattice: SpatialLattice) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(lattice.points_per_axis);
        let inv = planner.plan_fft_inverse(lattice.points_per_axis);
        Self { lattice, fwd, inv }
    }

    pub fn lattice(&self) -> &SpatialLattice {
        &self.lattice
    }

    pub fn forward(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> =
            values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        data
    }

    /// Inverse transform, returning the real part (inputs are spectra of
    /// real fields).
    pub fn inverse(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform(&mut spectrum, false);
        let norm = 1.0 / self.lattice.total_points() as f64;
        spectrum.into_iter().map(|c| c.re * norm).collect()
    }

    fn transform(&self, data: &mut [Complex<f64>], forward: bool) {
        let n = self.lattice.points_per_axis;
        let plan = if forward { &self.fwd } else { &self.inv };
        match self.lattice.dimension {
            1 => plan.process(data),
            _ => {
                // Rows, then columns.
                for row in data.chunks_exact_mut(n) {
                    plan.process(row);
                }
                let mut col = vec![Complex::new(0.0, 0.0); n];
                for x in 0..n {
                    for y in 0..n {
                        col[y] = data[y * n + x];
                    }
                    plan.process(&mut col);
                    for y in 0..n {
                        data[y * n + x] = col[y];
                    }
                }
            }
        }
    }

    /// Apply a radial frequency symbol to every component of `f`.
    pub fn apply_radial_symbol(&self, f: &GridFunction, symbol: impl Fn(f64) -> f64) -> GridFunction {
        let mut out = GridFunction::zeros(self.lattice);
        for (c, comp) in f.components.iter().enumerate() {
            let mut spec = self.forward(comp);
            for (flat, v) in spec.iter_mut().enumerate() {
                *v *= symbol(self.lattice.frequency_norm(flat));
            }
            out.components[c] = self.inverse(spec);
        }
        out
    }

    /// Spectral partial derivative along `axis` of one component array.
    pub fn derivative(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let mut spec = self.forward(values);
        let n = self.lattice.points_per_axis;
        let nyquist = n / 2;
        for (flat, v) in spec.iter_mut().enumerate() {
            let k = match axis {
                0 => flat % n,
                _ => flat / n,
            };
            // Zero the Nyquist bin: its derivative symbol is ambiguous.
            if k == nyquist {
                *v = Complex::new(0.0, 0.0);
            } else {
                *v *= Complex::new(0.0, self.lattice.frequency_component(flat, axis));
            }
        }
        self.inverse(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lattice_validation() {
        assert!(SpatialLattice::new(1, 1.0, 64).is_ok());
        assert!(SpatialLattice::new(1, 1.0, 63).is_err());
        assert!(SpatialLattice::new(1, 1.0, 32).is_err());
        assert!(SpatialLattice::new(3, 1.0, 64).is_err());
        assert!(SpatialLattice::new(1, -1.0, 64).is_err());
    }

    #[test]
    fn fft_roundtrip_1d() {
        let lat = SpatialLattice::new(1, 2.0, 128).unwrap();
        let sp = Spectral::new(lat);
        let f: Vec<f64> = (0..128).map(|k| (lat.coord(k) * 1.3).sin()).collect();
        let back = sp.inverse(sp.forward(&f));
        for (a, b) in f.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn fft_roundtrip_2d() {
        let lat = SpatialLattice::new(2, 1.0, 64).unwrap();
        let sp = Spectral::new(lat);
        let f: Vec<f64> = (0..lat.total_points())
            .map(|flat| {
                let p = lat.point(flat);
                (p[0] * 2.0).cos() + p[1]
            })
            .collect();
        let back = sp.inverse(sp.forward(&f));
        for (a, b) in f.iter().zip(&back) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-11);
        }
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let lat = SpatialLattice::new(1, 1.0, 256).unwrap();
        let sp = Spectral::new(lat);
        let omega = std::f64::consts::PI; // one full period over [-1, 1)
        let f: Vec<f64> = (0..256).map(|k| (omega * lat.coord(k)).sin()).collect();
        let df = sp.derivative(&f, 0);
        for k in 0..256 {
            let exact = omega * (omega * lat.coord(k)).cos();
            assert_abs_diff_eq!(df[k], exact, epsilon = 1e-9);
        }
    }

    #[test]
    fn multilinear_interpolation_is_exact_on_linear_data() {
        let lat = SpatialLattice::new(1, 4.0, 64).unwrap();
        // Use a hat profile away from the wrap seam.
        let g = GridFunction::from_scalar_fn(lat, |x| 1.0 - 0.5 * x[0].abs().min(2.0));
        let mut out = [0.0];
        g.eval_into(&[0.35], &mut out);
        assert_abs_diff_eq!(out[0], 1.0 - 0.5 * 0.35, epsilon = 1e-12);
    }

    #[test]
    fn bilinear_interpolation_matches_nodes() {
        let lat = SpatialLattice::new(2, 2.0, 64).unwrap();
        let g = GridFunction::from_fn(lat, |x| vec![x[0] + 2.0 * x[1], x[0] * 0.5]);
        let mut out = [0.0, 0.0];
        let p = lat.point(70);
        g.eval_into(&p, &mut out);
        assert_abs_diff_eq!(out[0], p[0] + 2.0 * p[1], epsilon = 1e-12);
        assert_abs_diff_eq!(out[1], p[0] * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn integral_of_constant() {
        let lat = SpatialLattice::new(2, 1.5, 64).unwrap();
        let g = GridFunction::from_fn(lat, |_| vec![2.0, -1.0]);
        let i = g.integral();
        assert_abs_diff_eq!(i[0], 2.0 * 9.0, epsilon = 1e-9);
        assert_abs_diff_eq!(i[1], -9.0, epsilon = 1e-9);
    }
}
