//! Pilot-wave layer: Born density, polar form, currents, guidance and ensembles.

mod branch;
mod ensemble;
mod guidance;
mod stats;

pub use branch::{branch_decompose, isolate_branch, mask_field, Branch, BranchDecomposition};
pub use ensemble::{advance_ensemble, advance_with, sample_ensemble, Tracker, TrajectoryEnsemble};
pub use guidance::{velocity_field, Floor, Guidance, GuidanceFrame};
pub use stats::{coarsen_density, equivariance_report, ks_statistics, resampling_baseline, total_variation, EquivarianceReport};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{apply_metric, divergence, divergence_with_magnitude, gradient, ComplexField, RealField};
use crate::schrodinger::SnapshotSeries;

/// `ρ = |Ψ|²`.
pub fn born_density(psi: &ComplexField) -> RealField {
    let values = psi.values().iter().map(|v| v.norm_sqr()).collect();
    RealField::from_parts(psi.grid().clone(), values, psi.time())
}

/// `Ψ = R e^{iS/ħ}` with `S` defined only where `R ≥ floor`.
#[derive(Debug, Clone)]
pub struct PolarPair {
    pub r: RealField,
    /// Phase in action units, in `(−πħ, πħ]`; zero where undefined.
    pub s: RealField,
    pub defined: Vec<bool>,
    pub hbar: f64,
}

impl PolarPair {
    /// `R e^{iS/ħ}`, zero where `S` is undefined.
    pub fn reconstruct(&self) -> Result<ComplexField> {
        let values = self
            .r
            .values()
            .iter()
            .zip(self.s.values())
            .zip(&self.defined)
            .map(|((&r, &s), &d)| if d { Complex64::from_polar(r, s / self.hbar) } else { Complex64::default() })
            .collect();
        ComplexField::new(self.r.grid().clone(), values, self.r.time())
    }
}

pub fn polar_decompose(psi: &ComplexField, floor: f64, hbar: f64) -> Result<PolarPair> {
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!("polar floor must be positive, got {floor}")));
    }
    let n = psi.len();
    let mut r = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut defined = Vec::with_capacity(n);
    for v in psi.values() {
        let m = v.norm();
        r.push(m);
        if m >= floor {
            s.push(hbar * v.arg());
            defined.push(true);
        } else {
            s.push(0.0);
            defined.push(false);
        }
    }
    let grid = psi.grid().clone();
    Ok(PolarPair { r: RealField::new(grid.clone(), r, psi.time())?, s: RealField::new(grid, s, psi.time())?, defined, hbar })
}

/// `J_i = ħ Σ_j μ_ij Im(Ψ̄ ∂_j Ψ)`.
pub fn current_densities(psi: &ComplexField, hbar: f64) -> Result<Vec<RealField>> {
    let dim = psi.grid().dim();
    let w = (0..dim)
        .map(|j| {
            let d = gradient(psi, j)?;
            psi.zip_map(&d, |a, b| hbar * (a.conj() * b).im)
        })
        .collect::<Result<Vec<_>>>()?;
    apply_metric(&w)
}

/// `ρ Σ_j μ_ij ∂_j S` with `∂_j S` from wrapped phase differences of neighbours.
///
/// Points where either neighbour has `|Ψ| < floor`, and Dirichlet edge nodes,
/// are reported as undefined and set to zero.
pub fn phase_gradient_currents(psi: &ComplexField, hbar: f64, floor: f64) -> Result<(Vec<RealField>, Vec<bool>)> {
    let grid = psi.grid().clone();
    let dim = grid.dim();
    let v = psi.values();
    let mut defined = vec![true; grid.len()];
    let mut ds = Vec::with_capacity(dim);
    for j in 0..dim {
        let ax = *grid.axis(j)?;
        let s = grid.strides()[j];
        let n = ax.count;
        let h = ax.spacing();
        let mut d = vec![0.0; grid.len()];
        for p in 0..grid.len() {
            let k = (p / s) % n;
            let (up, dn) = if ax.is_periodic() {
                (if k + 1 == n { p + s - n * s } else { p + s }, if k == 0 { p + (n - 1) * s } else { p - s })
            } else if k == 0 || k + 1 == n {
                defined[p] = false;
                continue;
            } else {
                (p + s, p - s)
            };
            if v[up].norm() < floor || v[dn].norm() < floor || v[p].norm() < floor {
                defined[p] = false;
                continue;
            }
            d[p] = hbar * (v[up] * v[dn].conj()).arg() / (2.0 * h);
        }
        ds.push(RealField::from_parts(grid.clone(), d, psi.time()));
    }
    let rho = born_density(psi);
    let raised = apply_metric(&ds)?;
    let out = raised
        .iter()
        .map(|f| {
            let vals = f.values().iter().zip(rho.values()).zip(&defined).map(|((a, r), &d)| if d { a * r } else { 0.0 }).collect();
            RealField::from_parts(grid.clone(), vals, psi.time())
        })
        .collect();
    Ok((out, defined))
}

/// A density together with its current components at one time.
#[derive(Debug, Clone)]
pub struct FlowFrame {
    pub density: RealField,
    pub currents: Vec<RealField>,
}

impl FlowFrame {
    pub fn from_psi(psi: &ComplexField, hbar: f64) -> Result<Self> {
        Ok(Self { density: born_density(psi), currents: current_densities(psi, hbar)? })
    }

    pub fn time(&self) -> f64 {
        self.density.time()
    }
}

/// `max |∂_t ρ + Σ_i ∂_i J_i|` over interior frames, with `∂_t` centered over
/// neighbouring frames, scaled by `T / max ρ` where `T` spans all frames.
pub fn continuity_residual_frames(frames: &[FlowFrame]) -> Result<f64> {
    if frames.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: frames.len() });
    }
    let t_span = frames[frames.len() - 1].time() - frames[0].time();
    let rho_max = frames.iter().map(|f| f.density.max()).fold(0.0, f64::max);
    if !(rho_max > 0.0) || !(t_span > 0.0) {
        return Err(Error::EmptyDensity);
    }
    let mut worst: f64 = 0.0;
    for k in 1..frames.len() - 1 {
        let (a, b) = (&frames[k - 1], &frames[k + 1]);
        let dt = b.time() - a.time();
        let div = divergence(&frames[k].currents)?;
        for p in 0..div.len() {
            let dr = (b.density.values()[p] - a.density.values()[p]) / dt;
            worst = worst.max((dr + div.values()[p]).abs());
        }
    }
    Ok(worst * t_span / rho_max)
}

/// Continuity residual of a wave-function series, using its own `ħ` and metric.
pub fn continuity_residual(series: &SnapshotSeries) -> Result<f64> {
    if series.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: series.len() });
    }
    let frames = series.snapshots().iter().map(|s| FlowFrame::from_psi(s, series.hbar())).collect::<Result<Vec<_>>>()?;
    continuity_residual_frames(&frames)
}

/// Sup of `|Σ_i ∂_i F_i|` relative to the sup of `Σ_i |∂_i F_i|`; zero when `F` has no variation.
pub fn divergence_ratio(f: &[RealField], include: Option<&[bool]>) -> Result<f64> {
    let (div, mag) = divergence_with_magnitude(f)?;
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for p in 0..div.len() {
        if include.is_some_and(|m| !m[p]) {
            continue;
        }
        num = num.max(div.values()[p].abs());
        den = den.max(mag[p]);
    }
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Grid, Metric};
    use std::sync::Arc;

    fn line(n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(vec![Axis::periodic(0.0, 10.0, n)]).unwrap())
    }

    #[test]
    fn density_of_unit_modulus_is_one() {
        let g = line(32);
        let psi = ComplexField::from_fn(g, 0.0, |q| Complex64::from_polar(1.0, q[0] * q[0])).unwrap();
        assert!(born_density(&psi).values().iter().all(|&r| (r - 1.0).abs() < 1e-15));
    }

    #[test]
    fn real_wave_function_has_no_current() {
        let g = line(64);
        let psi = ComplexField::from_fn(g, 0.0, |q| Complex64::new((q[0] - 5.0).cos(), 0.0)).unwrap();
        for j in current_densities(&psi, 1.0).unwrap() {
            assert!(j.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn plane_wave_current_is_density_times_velocity() {
        let g = Grid::with_metric(vec![Axis::periodic(0.0, 10.0, 200)], Metric::masses(&[2.0])).unwrap();
        let p = 2.0 * std::f64::consts::PI * 4.0 / 10.0;
        let psi = ComplexField::from_fn(Arc::new(g), 0.0, |q| Complex64::from_polar(0.5, p * q[0])).unwrap();
        let j = &current_densities(&psi, 1.0).unwrap()[0];
        // Central differences see sin(ph)/h instead of p.
        let h = 10.0 / 200.0;
        let expect = 0.25 * (p * h).sin() / h / 2.0;
        assert!(j.values().iter().all(|v| (v - expect).abs() < 1e-12));
    }

    #[test]
    fn polar_phase_of_plane_wave() {
        let g = line(40);
        let p = 2.0 * std::f64::consts::PI / 10.0;
        let psi = ComplexField::from_fn(g.clone(), 0.0, |q| Complex64::from_polar(2.0, p * q[0])).unwrap();
        let pp = polar_decompose(&psi, 1e-12, 1.0).unwrap();
        for k in 0..40 {
            let x = g.coords(k)[0];
            let d = (pp.s.values()[k] - p * x).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(d < 1e-12 || (2.0 * std::f64::consts::PI - d) < 1e-12);
        }
        let back = pp.reconstruct().unwrap();
        for (a, b) in back.values().iter().zip(psi.values()) {
            assert!((a - b).norm() < 1e-12 * 2.0);
        }
        assert!(polar_decompose(&psi, 0.0, 1.0).is_err());
    }

    #[test]
    fn duplicated_static_frames_have_zero_residual() {
        let g = line(16);
        let rho = RealField::from_fn(g.clone(), 0.0, |q| (-q[0]).exp()).unwrap();
        let zero = RealField::zeros(g, 0.0);
        let frames: Vec<FlowFrame> =
            (0..3).map(|k| FlowFrame { density: rho.clone().with_time(k as f64), currents: vec![zero.clone()] }).collect();
        assert_eq!(continuity_residual_frames(&frames).unwrap(), 0.0);
        assert!(continuity_residual_frames(&frames[..2]).is_err());
    }
}
