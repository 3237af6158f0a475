//! Histogram comparisons between particle ensembles and densities.

use std::fmt;

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::{Axis, Grid};
use std::sync::Arc;

use super::ensemble::sample_ensemble;

/// Cell probabilities `ρ_p w_p / Σ ρ w`.
fn cell_masses(rho: &RealField) -> Result<Vec<f64>> {
    let grid = rho.grid();
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let m: Vec<f64> = rho.values().iter().enumerate().map(|(p, r)| r * grid.weight(p)).collect();
    let total: f64 = m.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyDensity);
    }
    Ok(m.into_iter().map(|x| x / total).collect())
}

fn histogram_tv(grid: &Grid, positions: &[f64], masses: &[f64]) -> f64 {
    let dim = grid.dim();
    let n = positions.len() / dim;
    let mut counts = vec![0u64; grid.len()];
    let mut outside = 0u64;
    for q in positions.chunks(dim) {
        match grid.cell_of(q) {
            Some(c) => counts[c] += 1,
            None => outside += 1,
        }
    }
    let inv = 1.0 / n as f64;
    let inside: f64 = counts.iter().zip(masses).map(|(&c, &m)| (c as f64 * inv - m).abs()).sum();
    0.5 * (inside + outside as f64 * inv)
}

/// Half the L1 distance between the grid-cell histogram of `positions` and the cell masses of `ρ`.
///
/// Particles outside the grid count fully toward the distance.
pub fn total_variation(positions: &[f64], rho: &RealField) -> Result<f64> {
    let dim = rho.grid().dim();
    if positions.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    if !positions.len().is_multiple_of(dim) {
        return Err(Error::ComponentCount { expected: dim, got: positions.len() % dim });
    }
    Ok(histogram_tv(rho.grid(), positions, &cell_masses(rho)?))
}

/// One-sample Kolmogorov-Smirnov statistic of each coordinate against the
/// marginal of `ρ`, with cell mass spread uniformly over each cell.
pub fn ks_statistics(positions: &[f64], rho: &RealField) -> Result<Vec<f64>> {
    let grid = rho.grid();
    let dim = grid.dim();
    let n = positions.len() / dim;
    if n == 0 {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    let masses = cell_masses(rho)?;
    (0..dim)
        .map(|a| {
            let ax = &grid.axes()[a];
            let mut marginal = vec![0.0; ax.count];
            for (p, m) in masses.iter().enumerate() {
                marginal[grid.index_along(p, a)] += m;
            }
            // Cell edges in increasing order; periodic cell 0 starts half a cell below `lower`.
            let edges: Vec<(f64, f64)> = (0..ax.count).map(|k| ax.cell(k)).collect();
            let start = edges[0].0;
            let mut cdf_at_edge = Vec::with_capacity(ax.count + 1);
            cdf_at_edge.push(0.0);
            for m in &marginal {
                cdf_at_edge.push(cdf_at_edge.last().copied().unwrap_or(0.0) + m);
            }
            let cdf = |x: f64| -> f64 {
                if x <= start {
                    return 0.0;
                }
                let k = match ax.nearest(x) {
                    Some(k) => k,
                    None => return if x < start { 0.0 } else { 1.0 },
                };
                let (lo, hi) = edges[k];
                let frac = if hi > lo { ((x - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 1.0 };
                cdf_at_edge[k] + frac * marginal[k]
            };
            let period = ax.length();
            let mut xs: Vec<f64> = positions
                .chunks(dim)
                .map(|q| {
                    let x = q[a];
                    if ax.is_periodic() && x >= start + period {
                        x - period
                    } else {
                        x
                    }
                })
                .collect();
            xs.sort_by(f64::total_cmp);
            let nf = n as f64;
            let mut d: f64 = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                let f = cdf(x);
                d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
            }
            Ok(d)
        })
        .collect()
}

/// Mean total-variation distance of `m` independent `n`-samples of `ρ` from `ρ` itself, and its spread.
pub fn resampling_baseline(rho: &RealField, n: usize, m: usize, seed: u64) -> Result<(f64, f64)> {
    if m < 2 {
        return Err(Error::TooFewSamples { need: 2, got: m });
    }
    let masses = cell_masses(rho)?;
    let tvs: Vec<f64> = (0..m)
        .map(|k| {
            let s = sample_ensemble(rho, n, seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(k as u64 + 1)))?;
            Ok(histogram_tv(rho.grid(), &s, &masses))
        })
        .collect::<Result<_>>()?;
    let mean = tvs.iter().sum::<f64>() / m as f64;
    let var = tvs.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Merges blocks of `factor` consecutive cells on every (periodic) axis into one cell.
///
/// Coarse cell `K` covers exactly fine cells `K·factor .. K·factor + factor − 1`;
/// its value is the block mean, so cell masses are preserved.
pub fn coarsen_density(rho: &RealField, factor: usize) -> Result<RealField> {
    let grid = rho.grid();
    if factor == 1 {
        return Ok(rho.clone());
    }
    if factor == 0 || !grid.is_fully_periodic() || !grid.metric().is_constant_diagonal() {
        return Err(Error::InvalidArgument("coarsening needs a positive factor and a periodic grid with constant metric".into()));
    }
    let mut axes = Vec::with_capacity(grid.dim());
    for ax in grid.axes() {
        if ax.count % factor != 0 || ax.count / factor < 4 {
            return Err(Error::InvalidArgument(format!("axis of {} points cannot be coarsened by {factor}", ax.count)));
        }
        let shift = 0.5 * (factor - 1) as f64 * ax.spacing();
        axes.push(Axis::periodic(ax.lower + shift, ax.upper + shift, ax.count / factor));
    }
    let coarse = Arc::new(Grid::with_metric(axes, grid.metric().clone())?);
    let mut sums = vec![0.0; coarse.len()];
    let mut idx = vec![0; grid.dim()];
    for (p, &v) in rho.values().iter().enumerate() {
        for (a, i) in idx.iter_mut().enumerate() {
            *i = grid.index_along(p, a) / factor;
        }
        sums[coarse.flat_index(&idx)] += v;
    }
    let norm = (factor as f64).powi(grid.dim() as i32);
    RealField::new(coarse, sums.into_iter().map(|s| s / norm).collect(), rho.time())
}

/// Statistics comparing an ensemble at one time to a density.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivarianceReport {
    pub time: f64,
    pub particles: usize,
    pub seed: u64,
    pub tv: f64,
    pub ks: Vec<f64>,
    /// Mean resampled TV at the same particle count.
    pub baseline: f64,
    pub baseline_spread: f64,
}

impl EquivarianceReport {
    /// `tv ≤ factor × baseline`.
    pub fn within(&self, factor: f64) -> bool {
        self.tv <= factor * self.baseline
    }
}

impl fmt::Display for EquivarianceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ks: Vec<String> = self.ks.iter().map(|k| format!("{k}")).collect();
        writeln!(f, "time = {}", self.time)?;
        writeln!(f, "particles = {}", self.particles)?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "tv = {}", self.tv)?;
        writeln!(f, "ks = {}", ks.join(" "))?;
        writeln!(f, "baseline = {}", self.baseline)?;
        write!(f, "baseline_spread = {}", self.baseline_spread)
    }
}

/// Compares `positions` at `rho.time()` against `rho`; the baseline uses
/// `resamples` fresh draws seeded from `seed`.
pub fn equivariance_report(positions: &[f64], rho: &RealField, seed: u64, resamples: usize) -> Result<EquivarianceReport> {
    let dim = rho.grid().dim();
    let particles = positions.len() / dim;
    let tv = total_variation(positions, rho)?;
    let ks = ks_statistics(positions, rho)?;
    let (baseline, baseline_spread) = resampling_baseline(rho, particles, resamples, seed ^ 0xB5E1_1E5E)?;
    Ok(EquivarianceReport { time: rho.time(), particles, seed, tv, ks, baseline, baseline_spread })
}
