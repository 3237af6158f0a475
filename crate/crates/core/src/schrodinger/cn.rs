//! Crank-Nicolson stepper: `(1 + iH dt/2ħ) Ψ' = (1 − iH dt/2ħ) Ψ`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::hamiltonian::{HamiltonianSpec, Kinetic};
use crate::error::Result;
use crate::linear::{bicgstab, norm};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnOptions {
    /// Residual tolerance relative to `‖Ψ‖`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CnOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 2000 }
    }
}

pub struct CnStepper {
    spec: Arc<HamiltonianSpec>,
    kinetic: Kinetic,
    dt: f64,
    options: CnOptions,
    cached_v: Option<Vec<f64>>,
    diag: Vec<f64>,
    rhs: Vec<C>,
    tmp: Vec<C>,
    last_iterations: usize,
}

impl CnStepper {
    pub fn new(spec: Arc<HamiltonianSpec>, dt: f64, options: CnOptions) -> Result<Self> {
        let kinetic = Kinetic::new(spec.grid().clone(), spec.hbar());
        let cached_v = if spec.potential().is_static() { Some(spec.potential_values(0.0)?) } else { None };
        let n = spec.grid().len();
        let diag = kinetic.diagonal();
        Ok(Self { spec, kinetic, dt, options, cached_v, diag, rhs: vec![C::default(); n], tmp: vec![C::default(); n], last_iterations: 0 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn kinetic(&self) -> &Kinetic {
        &self.kinetic
    }

    /// Krylov iterations used by the most recent step.
    pub fn last_iterations(&self) -> usize {
        self.last_iterations
    }

    /// Advances `psi` in place from `t` to `t + dt`.
    pub fn step_in_place(&mut self, psi: &mut [C], t: f64) -> Result<()> {
        self.kinetic.project(psi);
        if self.dt == 0.0 {
            return Ok(());
        }
        let owned;
        let v: &[f64] = match &self.cached_v {
            Some(v) => v,
            None => {
                owned = self.spec.potential_values(t + 0.5 * self.dt)?;
                &owned
            }
        };
        let z = C::new(0.0, 0.5 * self.dt / self.spec.hbar());
        let kin = &self.kinetic;
        let pinned = kin.pinned();

        // rhs = (1 − zH) ψ
        kin.apply(psi, &mut self.tmp);
        self.rhs
            .par_iter_mut()
            .enumerate()
            .with_min_len(4096)
            .for_each(|(p, r)| *r = if pinned[p] { C::default() } else { psi[p] - z * (self.tmp[p] + psi[p] * v[p]) });

        let apply = |x: &[C], out: &mut [C]| {
            kin.apply(x, out);
            out.par_iter_mut().enumerate().with_min_len(4096).for_each(|(p, o)| {
                *o = if pinned[p] { x[p] } else { x[p] + z * (*o + x[p] * v[p]) };
            });
        };
        let inv: Vec<C> = self
            .diag
            .iter()
            .zip(v)
            .zip(pinned)
            .map(|((d, v), &pin)| if pin { C::new(1.0, 0.0) } else { C::new(1.0, 0.0) / (C::new(1.0, 0.0) + z * (d + v)) })
            .collect();
        let tol = self.options.tol * norm(psi).max(f64::MIN_POSITIVE);
        self.last_iterations = bicgstab(apply, &inv, &self.rhs, psi, tol, self.options.max_iter)?;
        Ok(())
    }
}

/// Lowest eigenvector of the discrete Hamiltonian by implicit imaginary-time steps.
///
/// Each iteration solves `(1 + τH) x = ψ` and renormalizes; stops when
/// successive iterates differ by less than `tol` in the discrete L2 norm.
pub fn imaginary_time_ground_state(spec: &HamiltonianSpec, initial: &[C], tau: f64, tol: f64, max_outer: usize) -> Result<Vec<C>> {
    let kin = Kinetic::new(spec.grid().clone(), spec.hbar());
    let v = spec.potential_values(0.0)?;
    let weights = spec.grid().weights();
    let wnorm = |x: &[C]| x.iter().zip(&weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().sqrt();
    let pinned = kin.pinned().to_vec();
    let diag = kin.diagonal();
    let inv: Vec<C> =
        diag.iter().zip(&v).zip(&pinned).map(|((d, v), &pin)| C::new(if pin { 1.0 } else { 1.0 / (1.0 + tau * (d + v)) }, 0.0)).collect();
    let apply = |x: &[C], out: &mut [C]| {
        kin.apply(x, out);
        for p in 0..x.len() {
            out[p] = if pinned[p] { x[p] } else { x[p] + (out[p] + x[p] * v[p]) * tau };
        }
    };
    let mut psi = initial.to_vec();
    kin.project(&mut psi);
    let n0 = wnorm(&psi);
    psi.iter_mut().for_each(|x| *x /= n0);
    let mut next = psi.clone();
    for _ in 0..max_outer {
        bicgstab(apply, &inv, &psi, &mut next, 1e-14, 20_000)?;
        let n = wnorm(&next);
        next.iter_mut().for_each(|x| *x /= n);
        let diff = next.iter().zip(&psi).zip(&weights).map(|((a, b), w)| (a - b).norm_sqr() * w).sum::<f64>().sqrt();
        std::mem::swap(&mut psi, &mut next);
        if diff < tol {
            return Ok(psi);
        }
    }
    Err(crate::error::Error::NoConvergence { iterations: max_outer, residual: f64::NAN })
}
