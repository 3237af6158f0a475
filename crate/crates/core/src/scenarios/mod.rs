//! Named experiments with fixed default parameters.

mod double_slit;
mod gauge_pair;
mod hmm_cases;
mod phase_space_audit;

pub use double_slit::{prominent_maxima, DoubleSlit, DoubleSlitReport};
pub use gauge_pair::{GaugePair, GaugePairReport};
pub use hmm_cases::{CoefficientControl, HmmCases, MovingGaussianCheck, ShearedComparison};
pub use phase_space_audit::{PhaseSpaceAudit, PhaseSpaceReport};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bohm::{
    advance_ensemble, born_density, continuity_residual, equivariance_report, sample_ensemble, EquivarianceReport, Floor,
    TrajectoryEnsemble,
};
use crate::error::Result;
use crate::field::ComplexField;
use crate::grid::{Axis, Grid};
use crate::schrodinger::presets::{gaussian_packet, harmonic_ground, Packet};
use crate::schrodinger::{evolve, HamiltonianSpec, Potential, SnapshotSeries, Solver};

/// A free 1D Gaussian packet on a periodic line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreePacket {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
    pub center: f64,
    pub sigma: f64,
    pub momentum: f64,
    pub hbar: f64,
    pub t_end: f64,
    pub dt: f64,
    pub store_every: usize,
    pub particles: usize,
    pub dt_traj: f64,
    pub seed: u64,
    pub resamples: usize,
}

impl Default for FreePacket {
    fn default() -> Self {
        Self {
            lower: -20.0,
            upper: 20.0,
            points: 256,
            center: 0.0,
            sigma: 1.0,
            momentum: 0.0,
            hbar: 1.0,
            t_end: 1.0,
            dt: 0.005,
            store_every: 10,
            particles: 10_000,
            dt_traj: 0.01,
            seed: 1,
            resamples: 16,
        }
    }
}

/// Series, ensemble and per-frame comparison of an equivariance run.
#[derive(Debug, Clone)]
pub struct EquivarianceRun {
    pub series: SnapshotSeries,
    pub ensemble: TrajectoryEnsemble,
    pub reports: Vec<EquivarianceReport>,
}

impl EquivarianceRun {
    pub fn max_tv(&self) -> f64 {
        self.reports.iter().map(|r| r.tv).fold(0.0, f64::max)
    }
}

impl FreePacket {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(vec![Axis::periodic(self.lower, self.upper, self.points)])?))
    }

    pub fn initial(&self) -> Result<ComplexField> {
        let packet = Packet::new(vec![self.center], vec![self.sigma], vec![self.momentum]);
        gaussian_packet(self.grid()?, &packet, self.hbar)
    }

    pub fn evolve(&self) -> Result<SnapshotSeries> {
        let psi = self.initial()?;
        let spec = HamiltonianSpec::free(psi.grid().clone(), self.hbar)?;
        evolve(&psi, &spec, 0.0, self.t_end, self.dt, self.store_every, Solver::Auto)
    }

    /// Samples from `|Ψ₀|²`, guides the ensemble and compares at every stored time.
    pub fn run(&self) -> Result<EquivarianceRun> {
        let series = self.evolve()?;
        let initial = sample_ensemble(&born_density(series.first()), self.particles, self.seed)?;
        let ensemble = advance_ensemble(&series, initial, self.dt_traj, Floor::default(), self.seed)?;
        let reports = series
            .snapshots()
            .iter()
            .enumerate()
            .map(|(k, s)| equivariance_report(ensemble.positions_at(k), &born_density(s), self.seed.wrapping_add(k as u64), self.resamples))
            .collect::<Result<Vec<_>>>()?;
        Ok(EquivarianceRun { series, ensemble, reports })
    }

    /// Continuity residuals with `points` and `dt` refined together by factors of two, storing every step.
    pub fn continuity_refinement(&self, levels: usize) -> Result<Vec<ContinuityLevel>> {
        (0..levels)
            .map(|l| {
                let f = 1usize << l;
                let p = FreePacket { points: self.points * f, dt: self.dt / f as f64, store_every: 1, ..self.clone() };
                let residual = continuity_residual(&p.evolve()?)?;
                Ok(ContinuityLevel { points: p.points, dt: p.dt, residual })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuityLevel {
    pub points: usize,
    pub dt: f64,
    pub residual: f64,
}

/// Harmonic-oscillator ground state on a Dirichlet line, stepped with Crank-Nicolson.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StationaryHarmonic {
    pub half_width: f64,
    pub points: usize,
    pub spring: f64,
    pub hbar: f64,
    pub dt: f64,
    pub steps: usize,
    pub particles: usize,
    pub dt_traj: f64,
    pub seed: u64,
}

impl Default for StationaryHarmonic {
    fn default() -> Self {
        Self { half_width: 10.0, points: 201, spring: 1.0, hbar: 1.0, dt: 0.01, steps: 100, particles: 1000, dt_traj: 0.01, seed: 3 }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryReport {
    /// `sup_t sup_q |ρ(q, t) − ρ(q, 0)|`.
    pub density_drift: f64,
    pub norm_drift: f64,
    /// Largest particle displacement from its start over the run.
    pub max_displacement: f64,
    pub ensemble: TrajectoryEnsemble,
}

impl StationaryHarmonic {
    pub fn run(&self) -> Result<StationaryReport> {
        let grid = Arc::new(Grid::new(vec![Axis::dirichlet(-self.half_width, self.half_width, self.points)])?);
        let spec = HamiltonianSpec::new(grid.clone(), Potential::harmonic(&grid, self.spring), self.hbar)?;
        let psi0 = harmonic_ground(&spec)?;
        let t_end = self.dt * self.steps as f64;
        let series = evolve(&psi0, &spec, 0.0, t_end, self.dt, 1, Solver::CrankNicolson)?;
        let rho0 = born_density(&psi0);
        let density_drift = series
            .snapshots()
            .iter()
            .map(|s| born_density(s).values().iter().zip(rho0.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let initial = sample_ensemble(&rho0, self.particles, self.seed)?;
        let ensemble = advance_ensemble(&series, initial, self.dt_traj, Floor::default(), self.seed)?;
        let start = ensemble.positions_at(0);
        let max_displacement = (0..ensemble.times().len())
            .flat_map(|k| ensemble.positions_at(k).iter().zip(start).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        Ok(StationaryReport { density_drift, norm_drift: series.norm_drift(), max_displacement, ensemble })
    }
}
