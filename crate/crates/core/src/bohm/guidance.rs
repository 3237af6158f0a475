//! Velocity fields `v_i = J_i / ρ` evaluated off-grid.

use std::sync::Arc;

use super::{born_density, current_densities, FlowFrame};
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::Grid;

/// Guard on the density in `J/ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Floor {
    /// Multiple of the frame's maximum density.
    Relative(f64),
    Absolute(f64),
}

impl Default for Floor {
    fn default() -> Self {
        Floor::Relative(1e-12)
    }
}

impl Floor {
    fn resolve(self, rho_max: f64) -> Result<f64> {
        let f = match self {
            Floor::Relative(r) => r * rho_max,
            Floor::Absolute(a) => a,
        };
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidArgument(format!("density floor must be positive, got {f}")));
        }
        Ok(f)
    }
}

/// Density and currents at one time, ready for point evaluation.
#[derive(Debug, Clone)]
pub struct GuidanceFrame {
    grid: Arc<Grid>,
    time: f64,
    density: Vec<f64>,
    currents: Vec<Vec<f64>>,
    floor: f64,
}

impl GuidanceFrame {
    pub fn new(density: &RealField, currents: &[RealField], floor: Floor) -> Result<Self> {
        let dim = density.grid().dim();
        if currents.len() != dim {
            return Err(Error::ComponentCount { expected: dim, got: currents.len() });
        }
        if currents.iter().any(|c| !c.same_grid(density)) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: density.grid().clone(),
            time: density.time(),
            density: density.values().to_vec(),
            currents: currents.iter().map(|c| c.values().to_vec()).collect(),
            floor: floor.resolve(density.max())?,
        })
    }

    pub fn from_flow(flow: &FlowFrame, floor: Floor) -> Result<Self> {
        Self::new(&flow.density, &flow.currents, floor)
    }

    pub fn from_psi(psi: &ComplexField, hbar: f64, floor: Floor) -> Result<Self> {
        Self::new(&born_density(psi), &current_densities(psi, hbar)?, floor)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Writes `v(q)` into `out`; fails when `q` is off a Dirichlet axis.
    #[inline]
    pub fn velocity_into(&self, q: &[f64], out: &mut [f64]) -> Result<()> {
        let st = self.grid.stencil(q)?;
        let rho = st.apply(&self.density).max(self.floor);
        for (o, j) in out.iter_mut().zip(&self.currents) {
            *o = st.apply(j) / rho;
        }
        Ok(())
    }

    pub fn velocity(&self, q: &[f64]) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.grid.dim()];
        self.velocity_into(q, &mut v)?;
        Ok(v)
    }
}

/// Velocity provider of a single wave function.
pub fn velocity_field(psi: &ComplexField, hbar: f64, floor: Floor) -> Result<GuidanceFrame> {
    GuidanceFrame::from_psi(psi, hbar, floor)
}

/// Time-ordered frames; velocities blend linearly between neighbouring frames.
#[derive(Debug, Clone)]
pub struct Guidance {
    frames: Vec<GuidanceFrame>,
}

impl Guidance {
    pub fn new(frames: Vec<GuidanceFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("guidance needs at least one frame".into()));
        }
        for w in frames.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(Error::InvalidArgument("guidance frame times must increase".into()));
            }
            if *w[1].grid != *w[0].grid {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { frames })
    }

    pub fn from_flows(flows: &[FlowFrame], floor: Floor) -> Result<Self> {
        Self::new(flows.iter().map(|f| GuidanceFrame::from_flow(f, floor)).collect::<Result<_>>()?)
    }

    pub fn from_series(series: &crate::schrodinger::SnapshotSeries, floor: Floor) -> Result<Self> {
        let frames = series.snapshots().iter().map(|s| GuidanceFrame::from_psi(s, series.hbar(), floor)).collect::<Result<_>>()?;
        Self::new(frames)
    }

    pub fn frames(&self) -> &[GuidanceFrame] {
        &self.frames
    }

    pub fn times(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.time).collect()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.frames[0].grid
    }
}
