//! Grid-based Littlewood-Paley analysis: dyadic partition of unity, blocks,
//! Besov norms with sup-over-blocks summation, C^1 norms via spectral
//! differentiation, and the bounded-family/shrinking-distance convergence
//! check used to certify approximating drift sequences.

use crate::error::{Error, Result};
use crate::grid::{GridFunction, SpatialLattice, Spectral};
use serde::{Deserialize, Serialize};

/// Smooth radial cutoff: 1 on [0, 1], 0 on [4/3, inf), C^infty bridge.
fn cutoff(r: f64) -> f64 {
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 4.0 / 3.0 {
        return 0.0;
    }
    let s = (r - 1.0) * 3.0; // maps (1, 4/3) onto (0, 1)
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// Dyadic partition of unity on a lattice's frequency ball.
///
/// chi is supported in {|xi| <= 4/3}; rho = chi(./2) - chi is supported in
/// the annulus {1 <= |xi| <= 8/3}; rho_j(xi) = rho(2^{-j} xi). The telescoping
/// identity chi + sum_{j<=J} rho_j = chi(2^{-J-1} .) makes the partition
/// identity exact (to roundoff) on the resolved ball once J is large enough.
pub struct DyadicDecomposition {
    pub lattice: SpatialLattice,
    pub j_max: i32,
    spectral: Spectral,
}

impl DyadicDecomposition {
    pub fn chi(&self, xi_norm: f64) -> f64 {
        cutoff(xi_norm)
    }

    pub fn rho(&self, xi_norm: f64) -> f64 {
        cutoff(xi_norm / 2.0) - cutoff(xi_norm)
    }

    pub fn rho_j(&self, j: i32, xi_norm: f64) -> f64 {
        self.rho(xi_norm * 2f64.powi(-j))
    }

    /// Symbol of the j-th block (chi for j = -1, rho_j for j >= 0).
    pub fn symbol(&self, j: i32, xi_norm: f64) -> f64 {
        if j <= -2 {
            0.0
        } else if j == -1 {
            self.chi(xi_norm)
        } else {
            self.rho_j(j, xi_norm)
        }
    }
}

/// Build the partition for a lattice, sizing j_max so the telescoping
/// identity closes on every resolved frequency.
pub fn build_partition(lattice: SpatialLattice) -> Result<DyadicDecomposition> {
    let xi_max = lattice.max_frequency();
    // Smallest J >= 0 with 2^{-(J+1)} xi_max <= 1.
    let j_max = (xi_max.log2().ceil() as i32 - 1).max(0);
    if j_max < 3 {
        return Err(Error::Config(format!(
            "lattice too coarse: only {j_max} dyadic annuli fit below Nyquist (need >= 3)"
        )));
    }
    Ok(DyadicDecomposition {
        lattice,
        j_max,
        spectral: Spectral::new(lattice),
    })
}

/// j-th Littlewood-Paley block of `f`.
pub fn lp_block(decomp: &DyadicDecomposition, f: &GridFunction, j: i32) -> GridFunction {
    if j <= -2 {
        return GridFunction::zeros(f.lattice);
    }
    decomp
        .spectral
        .apply_radial_symbol(f, |xi| decomp.symbol(j, xi))
}

/// Lattice L^p norm of the pointwise l1 magnitude of `f`.
pub fn lp_norm(f: &GridFunction, p: f64) -> f64 {
    let magnitudes = (0..f.lattice.total_points()).map(|flat| {
        f.components
            .iter()
            .map(|c| c[flat].abs())
            .sum::<f64>()
    });
    if p.is_infinite() {
        magnitudes.fold(0.0, f64::max)
    } else {
        let vol = f.lattice.cell_volume();
        (magnitudes.map(|m| m.powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }
}

/// Nonhomogeneous Besov norm: sup over blocks of 2^{js} ||Delta_j f||_{L^p}.
///
/// The low block (j = -1) is weighted 1 rather than 2^{-s}; this is an
/// equivalent norm and makes the embedding s' <= s monotone with constant 1.
pub fn besov_norm(decomp: &DyadicDecomposition, f: &GridFunction, s: f64, p: f64) -> f64 {
    let mut sup = 0.0f64;
    for j in -1..=decomp.j_max {
        let block = lp_block(decomp, f, j);
        let weight = 2f64.powf(j.max(0) as f64 * s);
        sup = sup.max(weight * lp_norm(&block, p));
    }
    sup
}

/// C^1 norm: sup |f| + sup |grad f|, gradient by spectral differentiation,
/// l1 over components and axes.
pub fn c1_norm(f: &GridFunction) -> f64 {
    let sp = Spectral::new(f.lattice);
    let n = f.lattice.total_points();
    let sup_f = (0..n)
        .map(|flat| f.components.iter().map(|c| c[flat].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let derivs: Vec<Vec<f64>> = f
        .components
        .iter()
        .flat_map(|c| (0..f.lattice.dimension).map(move |axis| (c, axis)))
        .map(|(c, axis)| sp.derivative(c, axis))
        .collect();
    let sup_grad = (0..n)
        .map(|flat| derivs.iter().map(|d| d[flat].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    sup_f + sup_grad
}

/// Outcome of the bounded-family / shrinking-distance convergence check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BetaMinusReport {
    pub beta: f64,
    pub sup_norms: Vec<f64>,
    /// (beta', distances of f_n to the limit in B^{beta'}_inf) per probe.
    pub probe_distances: Vec<(f64, Vec<f64>)>,
    pub bounded: bool,
    pub converging: bool,
    pub passes: bool,
}

/// Tuning for the pass/fail rule of [`check_beta_minus`].
#[derive(Debug, Clone, Copy)]
pub struct BetaMinusTolerance {
    /// Max/min ratio allowed for the uniform B^beta bound across the family.
    pub bound_ratio: f64,
    /// Final probe distance must fall below this fraction of the first.
    pub decrease_factor: f64,
    /// Slack factor for non-monotonic wiggles between consecutive levels.
    pub wiggle: f64,
}

impl Default for BetaMinusTolerance {
    fn default() -> Self {
        Self {
            bound_ratio: 4.0,
            decrease_factor: 0.85,
            wiggle: 1.1,
        }
    }
}

/// Convergence-in-B^{beta-} check: uniform boundedness in B^beta plus
/// decreasing distances to the limit in every strictly weaker probe norm.
pub fn check_beta_minus(
    decomp: &DyadicDecomposition,
    family: &[GridFunction],
    limit: &GridFunction,
    beta: f64,
    probes: &[f64],
    tol: BetaMinusTolerance,
) -> Result<BetaMinusReport> {
    if family.is_empty() {
        return Err(Error::Precondition("empty approximating family".into()));
    }
    for p in probes {
        if *p >= beta {
            return Err(Error::Precondition(format!(
                "probe beta' = {p} must be strictly below beta = {beta}"
            )));
        }
    }
    let sup_norms: Vec<f64> = family
        .iter()
        .map(|f| besov_norm(decomp, f, beta, f64::INFINITY))
        .collect();
    let max = sup_norms.iter().fold(0.0f64, |m, &x| m.max(x));
    let min = sup_norms.iter().fold(f64::MAX, |m, &x| m.min(x));
    let bounded = max <= tol.bound_ratio * min.max(1e-300);

    let mut probe_distances = Vec::new();
    let mut converging = true;
    let abs_floor = 1e-12 * (besov_norm(decomp, limit, beta, f64::INFINITY) + 1.0);
    for &bp in probes {
        let dists: Vec<f64> = family
            .iter()
            .map(|f| {
                let mut diff = f.clone();
                for (c, lc) in diff.components.iter_mut().zip(&limit.components) {
                    for (v, l) in c.iter_mut().zip(lc) {
                        *v -= l;
                    }
                }
                besov_norm(decomp, &diff, bp, f64::INFINITY)
            })
            .collect();
        let first = dists[0];
        let last = *dists.last().unwrap();
        let shrinks = last <= tol.decrease_factor * first + abs_floor;
        let roughly_monotone = dists
            .windows(2)
            .all(|w| w[1] <= tol.wiggle * w[0] + abs_floor);
        if !(shrinks && roughly_monotone) {
            converging = false;
        }
        probe_distances.push((bp, dists));
    }
    let passes = bounded && converging;
    Ok(BetaMinusReport {
        beta,
        sup_norms,
        probe_distances,
        bounded,
        converging,
        passes,
    })
}
