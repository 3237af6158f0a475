//! Hidden-Markov-model builds from prescribed densities.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bohm::{advance_with, equivariance_report, sample_ensemble, EquivarianceReport, Floor, Guidance};
use crate::error::{Error, Result};
use crate::gauge::{density_stream_flows, trajectory_deviation};
use crate::grid::{Axis, Grid};
use crate::hmm::{build_model, certify_equivariance, Certification, DensityProvider, HmmModel, HmmOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmCases {
    pub x0: f64,
    pub velocity: f64,
    pub sigma: f64,
    pub half_width: f64,
    /// Grid spacing for the velocity-recovery check.
    pub fine_spacing: f64,
    /// Grid spacing for certification runs.
    pub coarse_spacing: f64,
    /// Velocity errors are measured where `ρ ≥ region × max ρ`.
    pub region: f64,
    pub t_end: f64,
    pub frame_dt: f64,
    pub particles: usize,
    pub dt_traj: f64,
    pub seed: u64,
    pub resamples: usize,
    pub breathing_eps: f64,
    pub breathing_omega: f64,
    pub shear_kappa: f64,
    pub shear_omega: f64,
    pub shear_half_width: f64,
    pub shear_points: usize,
    pub stream_beta: f64,
}

impl Default for HmmCases {
    fn default() -> Self {
        Self {
            x0: -1.0,
            velocity: 1.5,
            sigma: 1.0,
            half_width: 8.0,
            fine_spacing: 5e-4,
            coarse_spacing: 0.1,
            region: 1e-3,
            t_end: 1.0,
            frame_dt: 0.05,
            particles: 10_000,
            dt_traj: 0.01,
            seed: 6,
            resamples: 16,
            breathing_eps: 0.3,
            breathing_omega: 3.0,
            shear_kappa: 0.6,
            shear_omega: 2.0,
            shear_half_width: 6.0,
            shear_points: 97,
            stream_beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MovingGaussianCheck {
    pub points: usize,
    /// `sup |J/ρ − v|` in the region, over build times.
    pub velocity_error: f64,
    pub r_residual: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientControl {
    /// Whether the builder refused `Σc ≠ 1`.
    pub rejected: bool,
    /// Certification of the forced build.
    pub forced: Certification,
}

#[derive(Debug, Clone)]
pub struct ShearedComparison {
    pub labels: Vec<String>,
    /// Final-time reports for each variant.
    pub reports: Vec<EquivarianceReport>,
    /// Max single-trajectory separation of each variant from the first.
    pub deviations: Vec<f64>,
}

impl HmmCases {
    fn line(&self, spacing: f64) -> Result<Arc<Grid>> {
        let points = (2.0 * self.half_width / spacing).round() as usize + 1;
        Ok(Arc::new(Grid::new(vec![Axis::dirichlet(-self.half_width, self.half_width, points)])?))
    }

    pub fn frame_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.frame_dt).round() as usize;
        (0..=n).map(|k| k as f64 * self.frame_dt).collect()
    }

    pub fn moving(&self, spacing: f64) -> Result<DensityProvider> {
        Ok(DensityProvider::moving_gaussian(self.line(spacing)?, self.x0, self.velocity, self.sigma))
    }

    pub fn breathing(&self) -> Result<DensityProvider> {
        Ok(DensityProvider::breathing_gaussian(self.line(self.coarse_spacing)?, self.sigma, self.breathing_eps, self.breathing_omega))
    }

    pub fn sheared(&self) -> Result<DensityProvider> {
        let a = Axis::dirichlet(-self.shear_half_width, self.shear_half_width, self.shear_points);
        let g = Arc::new(Grid::new(vec![a, a])?);
        Ok(DensityProvider::sheared_gaussian(g, self.shear_kappa, self.shear_omega))
    }

    pub fn velocity_recovery(&self) -> Result<MovingGaussianCheck> {
        let provider = self.moving(self.fine_spacing)?;
        let model = build_model(&provider, &[0.0, 0.5 * self.t_end, self.t_end], &HmmOptions::default())?;
        let mut err: f64 = 0.0;
        for f in &model.flows {
            let rho = f.density.values();
            let cut = self.region * f.density.max();
            for (r, j) in rho.iter().zip(f.currents[0].values()) {
                if *r >= cut {
                    err = err.max((j / r - self.velocity).abs());
                }
            }
        }
        Ok(MovingGaussianCheck { points: provider.grid().len(), velocity_error: err, r_residual: model.r_residual })
    }

    pub fn certify(&self, provider: &DensityProvider) -> Result<Certification> {
        let model = build_model(provider, &self.frame_times(), &HmmOptions::default())?;
        certify_equivariance(&model, self.particles, self.seed, self.dt_traj, Floor::default(), self.resamples)
    }

    /// `c = 2` on the moving Gaussian: refused by default, and not equivariant when forced.
    pub fn coefficient_control(&self) -> Result<CoefficientControl> {
        let provider = self.moving(self.coarse_spacing)?;
        let bad = HmmOptions { coefficients: Some(vec![2.0]), ..HmmOptions::default() };
        let rejected = matches!(build_model(&provider, &self.frame_times(), &bad), Err(Error::CoefficientSum(_)));
        let forced = HmmOptions { allow_coefficient_violation: true, ..bad };
        let model = build_model(&provider, &self.frame_times(), &forced)?;
        let forced = certify_equivariance(&model, self.particles, self.seed, self.dt_traj, Floor::default(), self.resamples)?;
        Ok(CoefficientControl { rejected, forced })
    }

    /// The sheared density guided by `c = (1, 0)`, `c = (0, 1)`, and `c = (½, ½)` plus a density stream term.
    pub fn sheared_comparison(&self) -> Result<ShearedComparison> {
        let provider = self.sheared()?;
        let times = self.frame_times();
        let with = |c: Vec<f64>| -> Result<HmmModel> {
            build_model(&provider, &times, &HmmOptions { coefficients: Some(c), ..HmmOptions::default() })
        };
        let a = with(vec![1.0, 0.0])?;
        let b = with(vec![0.0, 1.0])?;
        let half = with(vec![0.5, 0.5])?;
        let stream = density_stream_flows(&half.flows, self.stream_beta, 1e-12)?;
        let variants = [
            ("c=(1,0)".to_string(), a.flows),
            ("c=(0,1)".to_string(), b.flows),
            (format!("c=(0.5,0.5)+stream beta={}", self.stream_beta), stream),
        ];
        let initial = sample_ensemble(&variants[0].1[0].density, self.particles, self.seed)?;
        let mut reports = Vec::new();
        let mut ensembles = Vec::new();
        for (_, flows) in &variants {
            let g = Guidance::from_flows(flows, Floor::default())?;
            let e = advance_with(&g, initial.clone(), self.dt_traj, self.seed)?;
            let last = &flows[flows.len() - 1].density;
            reports.push(equivariance_report(e.final_positions(), last, self.seed, self.resamples)?);
            ensembles.push(e);
        }
        let deviations = ensembles
            .iter()
            .map(|e| Ok(trajectory_deviation(&ensembles[0], e)?.into_iter().fold(0.0, f64::max)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ShearedComparison { labels: variants.into_iter().map(|v| v.0).collect(), reports, deviations })
    }
}
