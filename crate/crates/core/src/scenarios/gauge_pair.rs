//! Gauged versus ungauged guidance for a spreading 2D Gaussian.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bohm::{advance_with, born_density, continuity_residual_frames, sample_ensemble, Floor, FlowFrame, Guidance};
use crate::error::Result;
use crate::field::ComplexField;
use crate::gauge::{
    apply_gauge_config, check_restricted, gauge_flows, gauge_velocity_shift, trajectory_deviation, GaugeComparison, GaugeFunction,
};
use crate::grid::{Axis, Grid};
use crate::schrodinger::presets::{gaussian_packet, Packet};
use crate::schrodinger::{evolve, HamiltonianSpec, SnapshotSeries, Solver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugePair {
    pub half_width: f64,
    pub points: usize,
    pub sigma: f64,
    pub hbar: f64,
    pub winding: i32,
    pub core: f64,
    pub t_end: f64,
    pub dt: f64,
    pub store_every: usize,
    pub particles: usize,
    pub dt_traj: f64,
    pub seed: u64,
    pub resamples: usize,
    pub histogram_block: usize,
    /// Grid sizes for the restriction refinement study.
    pub refinement: Vec<usize>,
}

impl Default for GaugePair {
    fn default() -> Self {
        Self {
            half_width: 8.0,
            points: 256,
            sigma: 1.0,
            hbar: 1.0,
            winding: 2,
            core: 2.0,
            t_end: 1.0,
            dt: 0.01,
            store_every: 2,
            particles: 10_000,
            dt_traj: 0.01,
            seed: 4,
            resamples: 16,
            histogram_block: 8,
            refinement: vec![64, 128, 256],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaugePairReport {
    /// `sup |ρ' − ρ| / sup ρ` over stored frames.
    pub density_defect: f64,
    /// `sup |(S' − S − λ) mod 2πħ|` where `ρ` exceeds the floor.
    pub phase_defect: f64,
    pub comparison: GaugeComparison,
    /// Max single-trajectory change of the ungauged run when `dt_traj` is halved.
    pub integrator_tolerance: f64,
    /// `(points, residual)` of the restriction check on `ρ₀`.
    pub refinement: Vec<(usize, f64)>,
    pub continuity_original: f64,
    pub continuity_gauged: f64,
}

impl GaugePairReport {
    pub fn refinement_ratios(&self) -> Vec<f64> {
        self.refinement.windows(2).map(|w| w[0].1 / w[1].1).collect()
    }
}

impl fmt::Display for GaugePairReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.comparison)?;
        writeln!(f, "density_defect = {:e}", self.density_defect)?;
        writeln!(f, "phase_defect = {:e}", self.phase_defect)?;
        writeln!(f, "integrator_tolerance = {:e}", self.integrator_tolerance)?;
        for (n, r) in &self.refinement {
            writeln!(f, "restriction.{n} = {r:e}")?;
        }
        writeln!(f, "continuity_original = {:e}", self.continuity_original)?;
        write!(f, "continuity_gauged = {:e}", self.continuity_gauged)
    }
}

impl GaugePair {
    pub fn grid(&self, points: usize) -> Result<Arc<Grid>> {
        let a = Axis::periodic(-self.half_width, self.half_width, points);
        Ok(Arc::new(Grid::new(vec![a, a])?))
    }

    pub fn gauge(&self) -> GaugeFunction {
        GaugeFunction::azimuthal_winding(self.winding, self.hbar, self.core)
    }

    fn initial(&self, points: usize) -> Result<ComplexField> {
        let packet = Packet::new(vec![0.0, 0.0], vec![self.sigma; 2], vec![0.0, 0.0]);
        gaussian_packet(self.grid(points)?, &packet, self.hbar)
    }

    pub fn evolve(&self) -> Result<SnapshotSeries> {
        let psi = self.initial(self.points)?;
        let spec = HamiltonianSpec::free(psi.grid().clone(), self.hbar)?;
        evolve(&psi, &spec, 0.0, self.t_end, self.dt, self.store_every, Solver::Auto)
    }

    pub fn run(&self) -> Result<GaugePairReport> {
        let lambda = self.gauge();
        let series = self.evolve()?;
        let mut density_defect: f64 = 0.0;
        let mut phase_defect: f64 = 0.0;
        for psi in series.snapshots() {
            let gauged = apply_gauge_config(psi, &lambda, psi.time(), self.hbar)?;
            let (d, p) = gauge_defects(psi, &gauged, &lambda, self.hbar)?;
            density_defect = density_defect.max(d);
            phase_defect = phase_defect.max(p);
        }
        let flows = series.snapshots().iter().map(|s| FlowFrame::from_psi(s, self.hbar)).collect::<Result<Vec<_>>>()?;
        let initial = sample_ensemble(&flows[0].density, self.particles, self.seed)?;
        let plain = Guidance::from_flows(&flows, Floor::default())?;
        let coarse = advance_with(&plain, initial.clone(), self.dt_traj, self.seed)?;
        let fine = advance_with(&plain, initial.clone(), 0.5 * self.dt_traj, self.seed)?;
        let integrator_tolerance = trajectory_deviation(&coarse, &fine)?.into_iter().fold(0.0, f64::max);
        let comparison = gauge_velocity_shift(
            &flows,
            &lambda,
            initial,
            self.dt_traj,
            Floor::default(),
            self.seed,
            self.resamples,
            self.histogram_block,
        )?;
        let refinement = self
            .refinement
            .iter()
            .map(|&n| Ok((n, check_restricted(&lambda, &born_density(&self.initial(n)?), 0.0)?.residual)))
            .collect::<Result<Vec<_>>>()?;
        let continuity_original = continuity_residual_frames(&flows)?;
        let continuity_gauged = continuity_residual_frames(&gauge_flows(&flows, &lambda)?)?;
        Ok(GaugePairReport {
            density_defect,
            phase_defect,
            comparison,
            integrator_tolerance,
            refinement,
            continuity_original,
            continuity_gauged,
        })
    }
}

/// Relative density change and the phase error of `S' − S` against `λ` modulo `2πħ`.
fn gauge_defects(psi: &ComplexField, gauged: &ComplexField, lambda: &GaugeFunction, hbar: f64) -> Result<(f64, f64)> {
    let lam = lambda.value_field(psi.grid(), psi.time())?;
    let rho_max = psi.values().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    let floor = 1e-12 * rho_max;
    let grid = psi.grid();
    let mut density: f64 = 0.0;
    let mut phase: f64 = 0.0;
    for p in 0..psi.len() {
        let (a, b) = (psi.values()[p], gauged.values()[p]);
        density = density.max((b.norm_sqr() - a.norm_sqr()).abs() / rho_max);
        let q = grid.coords(p);
        if a.norm_sqr() <= floor || q[0] == 0.0 && q[1] == 0.0 {
            continue;
        }
        let shift = hbar * (b.arg() - a.arg()) - lam.values()[p];
        let period = 2.0 * PI * hbar;
        let r = shift.rem_euclid(period);
        phase = phase.max(r.min(period - r));
    }
    Ok((density, phase))
}
