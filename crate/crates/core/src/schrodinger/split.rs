//! Strang-split Fourier stepper for periodic grids with a constant diagonal metric.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::hamiltonian::HamiltonianSpec;
use crate::error::{Error, Result};
use crate::grid::Metric;

type C = Complex64;

/// How the kinetic symbol `k²` is represented in Fourier space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KineticSymbol {
    /// Exact `k²`.
    #[default]
    Spectral,
    /// `(2 − 2 cos kh)/h²`, the symbol of the three-point Laplacian.
    FiniteDifference,
}

struct AxisPlan {
    stride: usize,
    count: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `exp(−i ħ μ k² dt / 2) / count` per wavenumber index.
    phase: Vec<C>,
    scratch_len: usize,
}

pub struct SplitStepper {
    spec: Arc<HamiltonianSpec>,
    dt: f64,
    axes: Vec<AxisPlan>,
    /// Cached half-step potential factor for static potentials.
    half_v: Option<Vec<C>>,
    scratch: Vec<C>,
}

impl SplitStepper {
    pub fn new(spec: Arc<HamiltonianSpec>, dt: f64, symbol: KineticSymbol) -> Result<Self> {
        let grid = spec.grid().clone();
        if !grid.is_fully_periodic() {
            return Err(Error::UnsupportedSolver("split-step Fourier needs every axis periodic".into()));
        }
        let mu = match grid.metric() {
            Metric::Diagonal(d) => d.clone(),
            Metric::Field(_) => return Err(Error::UnsupportedSolver("split-step Fourier needs a constant diagonal metric".into())),
        };
        if !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step {dt} is not finite")));
        }
        let hbar = spec.hbar();
        let mut planner = FftPlanner::new();
        let axes = grid
            .axes()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let n = a.count;
                let h = a.spacing();
                let l = a.length();
                let phase = (0..n)
                    .map(|m| {
                        let signed = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
                        let k = 2.0 * std::f64::consts::PI * signed / l;
                        let k2 = match symbol {
                            KineticSymbol::Spectral => k * k,
                            KineticSymbol::FiniteDifference => (2.0 - 2.0 * (k * h).cos()) / (h * h),
                        };
                        C::from_polar(1.0 / n as f64, -0.5 * hbar * mu[i] * k2 * dt)
                    })
                    .collect();
                let forward = planner.plan_fft_forward(n);
                let inverse = planner.plan_fft_inverse(n);
                let scratch_len = forward.get_inplace_scratch_len().max(inverse.get_inplace_scratch_len());
                AxisPlan { stride: grid.strides()[i], count: n, forward, inverse, phase, scratch_len }
            })
            .collect();
        let half_v = if spec.potential().is_static() { Some(half_potential(&spec.potential_values(0.0)?, dt, hbar)) } else { None };
        let scratch = vec![C::default(); grid.len()];
        Ok(Self { spec, dt, axes, half_v, scratch })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `psi` in place from `t` to `t + dt`.
    pub fn step_in_place(&mut self, psi: &mut [C], t: f64) -> Result<()> {
        if self.dt == 0.0 {
            return Ok(());
        }
        let owned;
        let half: &[C] = match &self.half_v {
            Some(h) => h,
            None => {
                owned = half_potential(&self.spec.potential_values(t + 0.5 * self.dt)?, self.dt, self.spec.hbar());
                &owned
            }
        };
        mul_in_place(psi, half);
        for a in &self.axes {
            kinetic_axis(a, psi, &mut self.scratch);
        }
        mul_in_place(psi, half);
        Ok(())
    }
}

fn half_potential(v: &[f64], dt: f64, hbar: f64) -> Vec<C> {
    v.iter().map(|&v| C::from_polar(1.0, -0.5 * v * dt / hbar)).collect()
}

fn mul_in_place(psi: &mut [C], f: &[C]) {
    psi.par_iter_mut().zip(f.par_iter()).with_min_len(4096).for_each(|(p, f)| *p *= f);
}

/// Applies the kinetic propagator along one axis: gather lines, FFT, phase, inverse FFT, scatter.
fn kinetic_axis(a: &AxisPlan, psi: &mut [C], buf: &mut [C]) {
    let (n, s) = (a.count, a.stride);
    let block = n * s;
    let line_of = |line: usize, k: usize| (line / s) * block + k * s + line % s;
    if s == 1 {
        psi.par_chunks_mut(n).for_each_init(|| vec![C::default(); a.scratch_len], |scr, line| transform_line(a, line, scr));
        return;
    }
    buf.par_chunks_mut(n).enumerate().for_each_init(
        || vec![C::default(); a.scratch_len],
        |scr, (line, chunk)| {
            for (k, c) in chunk.iter_mut().enumerate() {
                *c = psi[line_of(line, k)];
            }
            transform_line(a, chunk, scr);
        },
    );
    psi.par_iter_mut().enumerate().with_min_len(4096).for_each(|(p, v)| {
        let outer = p / block;
        let inner = p % s;
        let k = (p / s) % n;
        *v = buf[(outer * s + inner) * n + k];
    });
}

fn transform_line(a: &AxisPlan, line: &mut [C], scratch: &mut [C]) {
    a.forward.process_with_scratch(line, scratch);
    line.iter_mut().zip(&a.phase).for_each(|(v, f)| *v *= f);
    a.inverse.process_with_scratch(line, scratch);
}
