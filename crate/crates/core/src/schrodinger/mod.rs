//! Time evolution of `iħ ∂_t Ψ = −(ħ²/2) Σ_ij ∂_i μ_ij ∂_j Ψ + V Ψ`.

mod cn;
mod hamiltonian;
pub mod presets;
mod series;
mod split;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use cn::{imaginary_time_ground_state, CnOptions, CnStepper};
pub use hamiltonian::{dense_matrix, HamiltonianSpec, Kinetic, Potential, PotentialFn};
pub(crate) use series::write_grid_spec;
pub use series::SnapshotSeries;
pub use split::{KineticSymbol, SplitStepper};

use crate::error::{Error, Result};
use crate::field::ComplexField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// Split-step when the grid is fully periodic with a constant diagonal metric, else Crank-Nicolson.
    #[default]
    Auto,
    SplitFourier,
    CrankNicolson,
}

impl Solver {
    pub fn id(&self) -> &'static str {
        match self {
            Solver::Auto => "auto",
            Solver::SplitFourier => "split-fourier",
            Solver::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Solver::Auto),
            "split-fourier" => Ok(Solver::SplitFourier),
            "crank-nicolson" => Ok(Solver::CrankNicolson),
            other => Err(Error::UnsupportedSolver(format!("unknown solver id {other:?}"))),
        }
    }

    /// The concrete solver `Auto` resolves to for `spec`.
    pub fn resolve(self, spec: &HamiltonianSpec) -> Solver {
        match self {
            Solver::Auto => {
                let g = spec.grid();
                if g.is_fully_periodic() && g.metric().is_constant_diagonal() {
                    Solver::SplitFourier
                } else {
                    Solver::CrankNicolson
                }
            }
            s => s,
        }
    }
}

enum Inner {
    Split(Box<SplitStepper>),
    Cn(Box<CnStepper>),
}

/// A configured stepper with cached plans and operators.
pub struct Propagator {
    inner: Inner,
    solver: Solver,
    dt: f64,
}

impl Propagator {
    pub fn new(spec: Arc<HamiltonianSpec>, dt: f64, solver: Solver) -> Result<Self> {
        Self::with_options(spec, dt, solver, KineticSymbol::Spectral, CnOptions::default())
    }

    pub fn with_options(spec: Arc<HamiltonianSpec>, dt: f64, solver: Solver, symbol: KineticSymbol, cn: CnOptions) -> Result<Self> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be non-negative, got {dt}")));
        }
        let solver = solver.resolve(&spec);
        let inner = match solver {
            Solver::SplitFourier => Inner::Split(Box::new(SplitStepper::new(spec, dt, symbol)?)),
            _ => Inner::Cn(Box::new(CnStepper::new(spec, dt, cn)?)),
        };
        Ok(Self { inner, solver, dt })
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_in_place(&mut self, psi: &mut [Complex64], t: f64) -> Result<()> {
        match &mut self.inner {
            Inner::Split(s) => s.step_in_place(psi, t),
            Inner::Cn(s) => s.step_in_place(psi, t),
        }
    }

    pub fn step(&mut self, psi: &ComplexField) -> Result<ComplexField> {
        let mut v = psi.values().to_vec();
        self.step_in_place(&mut v, psi.time())?;
        ComplexField::new(psi.grid().clone(), v, psi.time() + self.dt)
    }
}

fn check_grid(psi: &ComplexField, spec: &HamiltonianSpec) -> Result<()> {
    if **psi.grid() != **spec.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// One Strang-split Fourier step.
pub fn step_split_fourier(psi: &ComplexField, spec: &HamiltonianSpec, dt: f64) -> Result<ComplexField> {
    check_grid(psi, spec)?;
    Propagator::new(Arc::new(spec.clone()), dt, Solver::SplitFourier)?.step(psi)
}

/// One Crank-Nicolson step.
pub fn step_crank_nicolson(psi: &ComplexField, spec: &HamiltonianSpec, dt: f64) -> Result<ComplexField> {
    check_grid(psi, spec)?;
    Propagator::new(Arc::new(spec.clone()), dt, Solver::CrankNicolson)?.step(psi)
}

/// Number of steps of size `dt` covering `[t0, t1]`, checked against the store cadence.
pub fn step_count(t0: f64, t1: f64, dt: f64, store_every: usize) -> Result<usize> {
    if store_every == 0 {
        return Err(Error::InvalidArgument("store_every must be at least 1".into()));
    }
    if !(t1 >= t0) {
        return Err(Error::InvalidArgument(format!("t1 = {t1} precedes t0 = {t0}")));
    }
    if t1 == t0 {
        return Ok(0);
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let steps = ((t1 - t0) / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - (t1 - t0)).abs() > 0.5 * dt {
        return Err(Error::InvalidArgument(format!("dt = {dt} does not fit [{t0}, {t1}]")));
    }
    if !steps.is_multiple_of(store_every) {
        return Err(Error::InvalidArgument(format!("{steps} steps are not a multiple of the store interval {store_every}")));
    }
    Ok(steps)
}

/// Steps from `t0` to `t1`, recording every `store_every` steps and at both ends.
pub fn evolve(
    psi0: &ComplexField,
    spec: &HamiltonianSpec,
    t0: f64,
    t1: f64,
    dt: f64,
    store_every: usize,
    solver: Solver,
) -> Result<SnapshotSeries> {
    check_grid(psi0, spec)?;
    let steps = step_count(t0, t1, dt, store_every)?;
    let mut prop = Propagator::new(Arc::new(spec.clone()), dt, solver)?;
    let mut psi = psi0.values().to_vec();
    let mut snaps = vec![ComplexField::new(psi0.grid().clone(), psi.clone(), t0)?];
    for k in 0..steps {
        prop.step_in_place(&mut psi, t0 + k as f64 * dt)?;
        if (k + 1) % store_every == 0 {
            snaps.push(ComplexField::new(psi0.grid().clone(), psi.clone(), t0 + (k + 1) as f64 * dt)?);
        }
    }
    SnapshotSeries::new(snaps, spec.hbar(), dt, prop.solver())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Grid};

    fn periodic(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(vec![Axis::periodic(-10.0, 10.0, n)]).unwrap())
    }

    #[test]
    fn plane_wave_gains_kinetic_phase() {
        let g = periodic(64);
        let p = 2.0 * std::f64::consts::PI * 3.0 / 20.0;
        let psi = ComplexField::from_fn(g.clone(), 0.0, |q| Complex64::from_polar(1.0, p * q[0])).unwrap();
        let spec = HamiltonianSpec::free(g, 1.0).unwrap();
        let dt = 0.05;
        let out = step_split_fourier(&psi, &spec, dt).unwrap();
        let phase = Complex64::from_polar(1.0, -0.5 * p * p * dt);
        for (a, b) in out.values().iter().zip(psi.values()) {
            assert!((a - b * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_potential_is_global_phase() {
        let g = periodic(32);
        let psi = ComplexField::from_fn(g.clone(), 0.0, |_| Complex64::new(0.3, 0.0)).unwrap();
        let spec = HamiltonianSpec::new(g, Potential::Constant(2.5), 1.0).unwrap();
        let out = step_split_fourier(&psi, &spec, 0.1).unwrap();
        let phase = Complex64::from_polar(1.0, -0.25);
        for (a, b) in out.values().iter().zip(psi.values()) {
            assert!((a - b * phase).norm() < 1e-14);
        }
    }

    #[test]
    fn split_rejects_dirichlet_grid() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(-1.0, 1.0, 16)]).unwrap());
        let psi = ComplexField::zeros(g.clone(), 0.0);
        let spec = HamiltonianSpec::free(g, 1.0).unwrap();
        assert!(matches!(step_split_fourier(&psi, &spec, 0.1), Err(Error::UnsupportedSolver(_))));
        assert_eq!(Solver::Auto.resolve(&spec), Solver::CrankNicolson);
    }

    #[test]
    fn zero_dt_is_identity() {
        let g = periodic(32);
        let psi = ComplexField::from_fn(g.clone(), 0.0, |q| Complex64::new((-q[0] * q[0]).exp(), q[0] * 0.01)).unwrap();
        let spec = HamiltonianSpec::free(g, 1.0).unwrap();
        let out = step_crank_nicolson(&psi, &spec, 0.0).unwrap();
        assert_eq!(out.values(), psi.values());
    }

    #[test]
    fn step_count_validation() {
        assert_eq!(step_count(0.0, 1.0, 0.01, 10).unwrap(), 100);
        assert_eq!(step_count(0.0, 0.0, 0.01, 10).unwrap(), 0);
        assert!(step_count(0.0, 1.0, 0.01, 7).is_err());
        assert!(step_count(1.0, 0.0, 0.01, 1).is_err());
    }
}
