//! Audits of the real phase-space form of finite quantum systems.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::gauge::hilbert::{random_hermitian, random_state, random_unitary, CMatrix};
use crate::phase_space::{
    audit_frame_swap, canonical_check, ho_frame_swap, integrate, linear_map, poisson_bracket, unitary_real_form, ClassicalHamiltonian,
    FrameSwapAudit, PhasePoint,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseSpaceAudit {
    /// Random Hamiltonians whose classical flow is compared with `e^{−iHt/ħ}`.
    pub flow_trials: usize,
    /// Dimensions cycle through `2..=max_dim`.
    pub max_dim: usize,
    pub hbar: f64,
    pub dt: f64,
    pub steps: usize,
    pub bracket_dim: usize,
    pub unitaries: usize,
    pub samples: usize,
    /// Finite-difference step for brackets and Jacobians.
    pub delta: f64,
    pub seed: u64,
    /// Oscillator `(q, p, m, k)` for the frame-swap audit.
    pub swap: [f64; 4],
    pub swap_dt: f64,
    pub swap_steps: usize,
}

impl Default for PhaseSpaceAudit {
    fn default() -> Self {
        Self {
            flow_trials: 21,
            max_dim: 8,
            hbar: 1.0,
            dt: 1e-4,
            steps: 10_000,
            bracket_dim: 4,
            unitaries: 10,
            samples: 16,
            delta: 1e-4,
            seed: 8,
            swap: [0.3, 0.4, 2.0, 8.0],
            swap_dt: 1e-3,
            swap_steps: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceReport {
    /// Max `|c(t) − e^{−iHt/ħ} c(0)|` at the final time.
    pub flow_mismatch: f64,
    /// Max deviation of `{x_k, y_j}`, `{x_k, x_j}`, `{y_k, y_j}` from `δ_kj`, 0, 0.
    pub bracket_error: f64,
    /// Max `|MᵀΩM − Ω|` over the real forms of random unitaries.
    pub unitary_violation: f64,
    /// The same for `diag(2, 1)`, which is not canonical.
    pub scaling_violation: f64,
    /// `(q', p', m', k')` after the swap.
    pub swapped: (f64, f64, f64, f64),
    pub swap: FrameSwapAudit,
}

impl PhaseSpaceReport {
    pub fn passes(&self, audit: &PhaseSpaceAudit) -> bool {
        let [q, p, m, k] = audit.swap;
        self.flow_mismatch < 1e-6
            && self.bracket_error < 1e-8
            && self.unitary_violation < 1e-8
            && self.scaling_violation > 0.5
            && self.swapped == (p, -q, 1.0 / k, 1.0 / m)
            && self.swap.energy_difference < 1e-12
            && self.swap.trajectory_difference < 1e-9
    }
}

impl fmt::Display for PhaseSpaceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (q, p, m, k) = self.swapped;
        writeln!(f, "max_flow_mismatch = {:e}", self.flow_mismatch)?;
        writeln!(f, "max_bracket_error = {:e}", self.bracket_error)?;
        writeln!(f, "max_unitary_violation = {:e}", self.unitary_violation)?;
        writeln!(f, "scaling_violation = {}", self.scaling_violation)?;
        writeln!(f, "swapped = (q' = {q}, p' = {p}, m' = {m}, k' = {k})")?;
        write!(f, "{}", self.swap)
    }
}

impl PhaseSpaceAudit {
    fn dim(&self, k: usize) -> usize {
        2 + k % self.max_dim.saturating_sub(1).max(1)
    }

    pub fn run(&self) -> Result<PhaseSpaceReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let t = self.dt * self.steps as f64;
        let mut flow_mismatch: f64 = 0.0;
        for trial in 0..self.flow_trials {
            let d = self.dim(trial);
            let h = random_hermitian(d, 1.0, &mut rng);
            let c0 = random_state(d, &mut rng);
            let hcl = ClassicalHamiltonian::from_quantum(&h, self.hbar)?;
            let end = integrate(&PhasePoint::from_state(&c0, self.hbar), &hcl, 0.0, self.dt, self.steps)?.pop().unwrap();
            let eig = SymmetricEigen::new(h.clone());
            let phase = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t / self.hbar));
            let exact = &eig.eigenvectors * CMatrix::from_diagonal(&phase) * eig.eigenvectors.adjoint() * &c0;
            flow_mismatch = flow_mismatch.max((exact - end.to_state(self.hbar)).norm());
        }

        let d = self.bracket_dim;
        let z = DVector::from_fn(2 * d, |_, _| rng.random::<f64>() - 0.5);
        let p = PhasePoint::from_stacked(&z);
        let mut bracket_error: f64 = 0.0;
        for k in 0..d {
            for j in 0..d {
                let (xk, yj) = (move |p: &PhasePoint| p.x[k], move |p: &PhasePoint| p.y[j]);
                let (xj, yk) = (move |p: &PhasePoint| p.x[j], move |p: &PhasePoint| p.y[k]);
                let delta = if k == j { 1.0 } else { 0.0 };
                bracket_error = bracket_error.max((poisson_bracket(&xk, &yj, &p, self.delta)? - delta).abs());
                bracket_error = bracket_error.max(poisson_bracket(&xk, &xj, &p, self.delta)?.abs());
                bracket_error = bracket_error.max(poisson_bracket(&yk, &yj, &p, self.delta)?.abs());
            }
        }

        let mut unitary_violation: f64 = 0.0;
        for k in 0..self.unitaries {
            let d = self.dim(k);
            let u = random_unitary(d, &mut rng);
            let report = canonical_check(&linear_map(unitary_real_form(&u)), d, self.samples, k as u64, self.delta);
            unitary_violation = unitary_violation.max(report.max_violation);
        }
        let mut scale = DMatrix::identity(2, 2);
        scale[(0, 0)] = 2.0;
        let scaling_violation = canonical_check(&linear_map(scale), 1, self.samples, self.seed, self.delta).max_violation;

        let [q, p, m, k] = self.swap;
        let swapped = ho_frame_swap(q, p, m, k)?;
        let swap = audit_frame_swap(q, p, m, k, self.swap_dt, self.swap_steps)?;
        Ok(PhaseSpaceReport { flow_mismatch, bracket_error, unitary_violation, scaling_violation, swapped, swap })
    }
}
