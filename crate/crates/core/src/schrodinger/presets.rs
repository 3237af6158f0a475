//! Named initial states, each normalized numerically on its grid.

use std::sync::Arc;

use num_complex::Complex64;

use super::cn::imaginary_time_ground_state;
use super::hamiltonian::HamiltonianSpec;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;

/// Product Gaussian `Ψ ∝ Π_i exp(−(q_i − c_i)²/(4σ_i²) + i p_i q_i/ħ)`, so `ρ` has standard deviation `σ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Packet {
    pub center: Vec<f64>,
    pub sigma: Vec<f64>,
    pub momentum: Vec<f64>,
}

impl Packet {
    pub fn new(center: Vec<f64>, sigma: Vec<f64>, momentum: Vec<f64>) -> Self {
        Self { center, sigma, momentum }
    }

    fn check(&self, dim: usize) -> Result<()> {
        for (name, v) in [("center", &self.center), ("sigma", &self.sigma), ("momentum", &self.momentum)] {
            if v.len() != dim {
                return Err(Error::InvalidArgument(format!("packet {name} has {} entries for a {dim}-dimensional grid", v.len())));
            }
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("packet widths must be positive".into()));
        }
        Ok(())
    }

    /// Unnormalized amplitude at `q`, using minimum-image distance on periodic axes.
    fn amplitude(&self, grid: &Grid, q: &[f64], hbar: f64) -> Complex64 {
        let mut log = Complex64::default();
        for (i, a) in grid.axes().iter().enumerate() {
            let mut d = q[i] - self.center[i];
            if a.is_periodic() {
                let l = a.length();
                d -= l * (d / l).round();
            }
            log += Complex64::new(-d * d / (4.0 * self.sigma[i] * self.sigma[i]), self.momentum[i] * q[i] / hbar);
        }
        log.exp()
    }
}

pub fn gaussian_packet(grid: Arc<Grid>, packet: &Packet, hbar: f64) -> Result<ComplexField> {
    packet.check(grid.dim())?;
    let g = grid.clone();
    ComplexField::from_fn(grid, 0.0, |q| packet.amplitude(&g, q, hbar))?.normalized()
}

/// Normalized superposition `a Ψ_a + b Ψ_b` of two packets, each normalized first.
pub fn two_packet(grid: Arc<Grid>, a: &Packet, b: &Packet, weights: [Complex64; 2], hbar: f64) -> Result<ComplexField> {
    let pa = gaussian_packet(grid.clone(), a, hbar)?;
    let pb = gaussian_packet(grid, b, hbar)?;
    pa.zip_map(&pb, |x, y| weights[0] * x + weights[1] * y)?.normalized()
}

/// `e^{i p·q/ħ}`, normalized over the box.
pub fn plane_wave(grid: Arc<Grid>, momentum: &[f64], hbar: f64) -> Result<ComplexField> {
    if momentum.len() != grid.dim() {
        return Err(Error::ComponentCount { expected: grid.dim(), got: momentum.len() });
    }
    ComplexField::from_fn(grid, 0.0, |q| Complex64::from_polar(1.0, q.iter().zip(momentum).map(|(x, p)| x * p).sum::<f64>() / hbar))?
        .normalized()
}

/// Lowest eigenvector of the discrete `spec` Hamiltonian, real and positive.
pub fn harmonic_ground(spec: &HamiltonianSpec) -> Result<ComplexField> {
    let grid = spec.grid().clone();
    let guess = ComplexField::from_fn(grid.clone(), 0.0, |q| Complex64::new((-0.5 * q.iter().map(|x| x * x).sum::<f64>()).exp(), 0.0))?;
    let psi = imaginary_time_ground_state(spec, guess.values(), 5.0, 1e-13, 500)?;
    let psi = psi.into_iter().map(|v| Complex64::new(v.re.abs(), 0.0)).collect();
    ComplexField::new(grid, psi, 0.0)?.normalized()
}

/// Two-slit initial state: a product of a two-packet superposition across the
/// slits (axis 0) and a single packet moving toward the screen (axis 1).
pub fn double_slit(
    grid: Arc<Grid>,
    separation: f64,
    slit_width: f64,
    y0: f64,
    sigma_y: f64,
    momentum_y: f64,
    hbar: f64,
) -> Result<ComplexField> {
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument("double-slit state needs a 2-dimensional grid".into()));
    }
    let half = 0.5 * separation;
    let a = Packet::new(vec![-half, y0], vec![slit_width, sigma_y], vec![0.0, momentum_y]);
    let b = Packet::new(vec![half, y0], vec![slit_width, sigma_y], vec![0.0, momentum_y]);
    let one = Complex64::new(1.0, 0.0);
    two_packet(grid, &a, &b, [one, one], hbar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{integrate, RealField};
    use crate::grid::Axis;
    use crate::schrodinger::Potential;

    #[test]
    fn packet_is_normalized_with_requested_width() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(-12.0, 12.0, 512)]).unwrap());
        let psi = gaussian_packet(g.clone(), &Packet::new(vec![1.0], vec![1.5], vec![2.0]), 1.0).unwrap();
        let rho = psi.map(|v| v.norm_sqr()).unwrap();
        assert!((integrate(&rho) - 1.0).abs() < 1e-12);
        let mean = integrate(&weighted(&rho, |q| q[0]));
        let var = integrate(&weighted(&rho, |q| (q[0] - mean).powi(2)));
        assert!((mean - 1.0).abs() < 1e-9);
        assert!((var.sqrt() - 1.5).abs() < 1e-9);
    }

    fn weighted(rho: &RealField, f: impl Fn(&[f64]) -> f64) -> RealField {
        let g = rho.grid().clone();
        let vals = (0..g.len()).map(|p| rho.values()[p] * f(&g.coords(p))).collect();
        RealField::new(g, vals, 0.0).unwrap()
    }

    #[test]
    fn wrong_dimension_rejected() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(-1.0, 1.0, 16)]).unwrap());
        assert!(gaussian_packet(g.clone(), &Packet::new(vec![0.0, 0.0], vec![1.0], vec![0.0]), 1.0).is_err());
        assert!(double_slit(g, 1.0, 0.1, 0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn harmonic_ground_is_positive_and_close_to_gaussian() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(-8.0, 8.0, 321)]).unwrap());
        let spec = HamiltonianSpec::new(g.clone(), Potential::harmonic(&g, 1.0), 1.0).unwrap();
        let psi = harmonic_ground(&spec).unwrap();
        let exact = |x: f64| std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
        let err = (0..g.len()).map(|p| (psi.values()[p].re - exact(g.coords(p)[0])).abs()).fold(0.0, f64::max);
        assert!(err < 1e-3, "err {err}");
    }
}
