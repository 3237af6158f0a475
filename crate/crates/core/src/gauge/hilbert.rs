//! Time-dependent unitary frames on a finite-dimensional Hilbert space.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;
pub type MatrixFn = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// Tolerance on `‖V V† − I‖` and on the Hermiticity defect of generated Hamiltonians.
pub const UNITARY_TOLERANCE: f64 = 1e-10;

/// A state with named observables and a possibly time-dependent Hamiltonian.
#[derive(Clone)]
pub struct FiniteQuantumSystem {
    pub state: CVector,
    pub observables: Vec<(String, CMatrix)>,
    pub hamiltonian: MatrixFn,
    pub hbar: f64,
}

impl fmt::Debug for FiniteQuantumSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteQuantumSystem")
            .field("dim", &self.state.len())
            .field("observables", &self.observables.iter().map(|o| &o.0).collect::<Vec<_>>())
            .field("hbar", &self.hbar)
            .finish()
    }
}

impl FiniteQuantumSystem {
    pub fn dim(&self) -> usize {
        self.state.len()
    }

    pub fn expectation(&self, a: &CMatrix) -> f64 {
        expectation(&self.state, a)
    }

    /// `iħ dψ/dt = H(t) ψ` from `t0` to `t1` with fixed-step RK4.
    pub fn evolve(&self, t0: f64, t1: f64, steps: usize) -> CVector {
        evolve_state(&self.hamiltonian, self.hbar, &self.state, t0, t1, steps)
    }
}

/// `⟨ψ|A|ψ⟩ / ⟨ψ|ψ⟩`, real part.
pub fn expectation(psi: &CVector, a: &CMatrix) -> f64 {
    (psi.adjoint() * a * psi)[(0, 0)].re / psi.norm_squared()
}

/// A smooth unitary path `V(t)`, optionally with its analytic derivative.
#[derive(Clone)]
pub struct UnitaryPath {
    pub v: MatrixFn,
    pub dv: Option<MatrixFn>,
    /// Characteristic time used for the finite-difference step when `dv` is absent.
    pub timescale: f64,
}

impl fmt::Debug for UnitaryPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryPath").field("analytic_derivative", &self.dv.is_some()).field("timescale", &self.timescale).finish()
    }
}

impl UnitaryPath {
    /// `V(t) = W exp(−i t K)` with `K` Hermitian.
    pub fn exponential(w: CMatrix, k: CMatrix) -> Result<Self> {
        check_hermitian(&k, UNITARY_TOLERANCE)?;
        check_unitary(&w, UNITARY_TOLERANCE)?;
        let eig = nalgebra::SymmetricEigen::new(k.clone());
        let (u, lambda) = (eig.eigenvectors, eig.eigenvalues);
        let scale = lambda.iter().fold(0.0_f64, |m, l| m.max(l.abs())).max(1e-12);
        let w2 = w.clone();
        let v: MatrixFn = Arc::new(move |t| {
            let d = CMatrix::from_diagonal(&lambda.map(|l| Complex64::from_polar(1.0, -l * t)));
            &w2 * &u * d * u.adjoint()
        });
        let v2 = v.clone();
        let minus_ik = k * Complex64::new(0.0, -1.0);
        let dv: MatrixFn = Arc::new(move |t| v2(t) * &minus_ik);
        Ok(Self { v, dv: Some(dv), timescale: 1.0 / scale })
    }

    pub fn without_derivative(mut self) -> Self {
        self.dv = None;
        self
    }

    pub fn at(&self, t: f64) -> CMatrix {
        (self.v)(t)
    }

    /// `∂_t V`, analytic or a centered difference with step `10⁻⁶ × timescale`.
    pub fn derivative(&self, t: f64) -> CMatrix {
        match &self.dv {
            Some(dv) => dv(t),
            None => {
                let h = 1e-6 * self.timescale;
                ((self.v)(t + h) - (self.v)(t - h)) / Complex64::new(2.0 * h, 0.0)
            }
        }
    }

    /// Sup of `‖V(t)V(t)† − I‖` over the given times.
    pub fn unitarity_defect(&self, times: &[f64]) -> f64 {
        times.iter().map(|&t| unitary_defect(&self.at(t))).fold(0.0, f64::max)
    }
}

fn unitary_defect(v: &CMatrix) -> f64 {
    let n = v.nrows();
    (v * v.adjoint() - CMatrix::identity(n, n)).norm()
}

fn hermitian_defect(h: &CMatrix) -> f64 {
    (h - h.adjoint()).norm() / h.norm().max(1.0)
}

pub fn check_unitary(v: &CMatrix, tol: f64) -> Result<()> {
    let d = unitary_defect(v);
    if d > tol {
        return Err(Error::NotUnitary(d));
    }
    Ok(())
}

pub fn check_hermitian(h: &CMatrix, tol: f64) -> Result<()> {
    if !h.is_square() {
        return Err(Error::InvalidArgument("matrix is not square".into()));
    }
    let d = hermitian_defect(h);
    if d > tol {
        return Err(Error::NotHermitian(d));
    }
    Ok(())
}

/// `H' = V H V† − iħ V ∂_t V†`, audited for Hermiticity and then symmetrized.
pub fn transformed_hamiltonian(h: &CMatrix, path: &UnitaryPath, t: f64, hbar: f64) -> Result<CMatrix> {
    let v = path.at(t);
    check_unitary(&v, UNITARY_TOLERANCE)?;
    let dv = path.derivative(t);
    let raw = &v * h * v.adjoint() - &v * dv.adjoint() * Complex64::new(0.0, hbar);
    // The finite-difference derivative leaves a small anti-Hermitian part.
    let tol = if path.dv.is_some() { UNITARY_TOLERANCE } else { 1e-6 };
    check_hermitian(&raw, tol)?;
    Ok((&raw + raw.adjoint()) * Complex64::new(0.5, 0.0))
}

/// The system as seen in the frame `Ψ' = V Ψ`, `A' = V A V†`, at time `t0`.
pub fn apply_gauge_hilbert(system: &FiniteQuantumSystem, path: &UnitaryPath, t0: f64) -> Result<FiniteQuantumSystem> {
    let v = path.at(t0);
    check_unitary(&v, UNITARY_TOLERANCE)?;
    if v.nrows() != system.dim() {
        return Err(Error::LengthMismatch { expected: system.dim(), got: v.nrows() });
    }
    let h = system.hamiltonian.clone();
    let p = path.clone();
    let hbar = system.hbar;
    // Audit once up front so the closure cannot fail silently on a bad path.
    transformed_hamiltonian(&h(t0), &p, t0, hbar)?;
    let hamiltonian: MatrixFn = Arc::new(move |t| transformed_hamiltonian(&h(t), &p, t, hbar).expect("audited path"));
    Ok(FiniteQuantumSystem {
        state: &v * &system.state,
        observables: system.observables.iter().map(|(n, a)| (n.clone(), &v * a * v.adjoint())).collect(),
        hamiltonian,
        hbar,
    })
}

/// Fixed-step RK4 for `dψ/dt = −(i/ħ) H(t) ψ`.
pub fn evolve_state(h: &MatrixFn, hbar: f64, psi0: &CVector, t0: f64, t1: f64, steps: usize) -> CVector {
    let steps = steps.max(1);
    let dt = (t1 - t0) / steps as f64;
    let c = Complex64::new(0.0, -1.0 / hbar);
    let f = |t: f64, y: &CVector| h(t) * y * c;
    let mut y = psi0.clone();
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let k1 = f(t, &y);
        let k2 = f(t + 0.5 * dt, &(&y + &k1 * Complex64::new(0.5 * dt, 0.0)));
        let k3 = f(t + 0.5 * dt, &(&y + &k2 * Complex64::new(0.5 * dt, 0.0)));
        let k4 = f(t + dt, &(&y + &k3 * Complex64::new(dt, 0.0)));
        y += (k1 + (k2 + k3) * Complex64::new(2.0, 0.0) + k4) * Complex64::new(dt / 6.0, 0.0);
    }
    y
}

/// `sup_k ‖iħ ∂_t ψ_k − H_k ψ_k‖ / sup_k ‖H_k ψ_k‖` with centered time differences.
pub fn covariant_derivative_residual(times: &[f64], states: &[CVector], h: &MatrixFn, hbar: f64) -> Result<f64> {
    if times.len() != states.len() {
        return Err(Error::LengthMismatch { expected: times.len(), got: states.len() });
    }
    if states.len() < 3 {
        return Err(Error::TooFewSamples { need: 3, got: states.len() });
    }
    let (mut num, mut den): (f64, f64) = (0.0, 0.0);
    for k in 1..states.len() - 1 {
        let dt = times[k + 1] - times[k - 1];
        let d = (&states[k + 1] - &states[k - 1]) * Complex64::new(0.0, hbar / dt);
        let hp = h(times[k]) * &states[k];
        num = num.max((d - &hp).norm());
        den = den.max(hp.norm());
    }
    Ok(if den > 0.0 { num / den } else { num })
}

/// Random Hermitian matrix with entries of order `scale`.
pub fn random_hermitian(d: usize, scale: f64, rng: &mut impl Rng) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(scale * (2.0 * rng.random::<f64>() - 1.0), 0.0);
        for j in i + 1..d {
            let z = Complex64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0) * scale;
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

/// Random unitary from the QR factorization of a random complex matrix.
pub fn random_unitary(d: usize, rng: &mut impl Rng) -> CMatrix {
    let a = CMatrix::from_fn(d, d, |_, _| Complex64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0));
    a.qr().q()
}

pub fn random_state(d: usize, rng: &mut impl Rng) -> CVector {
    let v = CVector::from_fn(d, |_, _| Complex64::new(2.0 * rng.random::<f64>() - 1.0, 2.0 * rng.random::<f64>() - 1.0));
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

/// A random system with `H(t) = H0 + sin(ω t) H1` and a random unitary path.
pub fn random_system(d: usize, seed: u64) -> Result<(FiniteQuantumSystem, UnitaryPath)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h0 = random_hermitian(d, 1.0, &mut rng);
    let h1 = random_hermitian(d, 0.5, &mut rng);
    let omega = 0.5 + rng.random::<f64>();
    let hamiltonian: MatrixFn = Arc::new(move |t| &h0 + &h1 * Complex64::new((omega * t).sin(), 0.0));
    let observables = (0..2).map(|i| (format!("A{i}"), random_hermitian(d, 1.0, &mut rng))).collect();
    let state = random_state(d, &mut rng);
    let w = random_unitary(d, &mut rng);
    let k = random_hermitian(d, 1.0, &mut rng);
    let path = UnitaryPath::exponential(w, k)?;
    Ok((FiniteQuantumSystem { state, observables, hamiltonian, hbar: 1.0 }, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectations_are_invariant() {
        let (sys, path) = random_system(5, 7).unwrap();
        let g = apply_gauge_hilbert(&sys, &path, 0.3).unwrap();
        for ((_, a), (_, b)) in sys.observables.iter().zip(&g.observables) {
            assert!((sys.expectation(a) - g.expectation(b)).abs() < 1e-12);
        }
    }

    #[test]
    fn gauged_evolution_matches_rotated_evolution() {
        let (sys, path) = random_system(4, 11).unwrap();
        let g = apply_gauge_hilbert(&sys, &path, 0.0).unwrap();
        let psi = sys.evolve(0.0, 1.0, 2000);
        let phi = g.evolve(0.0, 1.0, 2000);
        assert!((path.at(1.0) * psi - phi).norm() < 1e-8);
    }

    #[test]
    fn finite_difference_derivative_agrees() {
        let (sys, path) = random_system(3, 5).unwrap();
        let fd = path.clone().without_derivative();
        let h = sys.hamiltonian.as_ref()(0.4);
        let a = transformed_hamiltonian(&h, &path, 0.4, 1.0).unwrap();
        let b = transformed_hamiltonian(&h, &fd, 0.4, 1.0).unwrap();
        assert!((a - b).norm() < 1e-8);
    }

    #[test]
    fn covariant_residual_is_small_on_exact_path() {
        let (sys, _) = random_system(3, 2).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.01).collect();
        let states: Vec<CVector> = times.iter().map(|&t| sys.evolve(0.0, t, 200)).collect();
        let r = covariant_derivative_residual(&times, &states, &sys.hamiltonian, 1.0).unwrap();
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn non_unitary_is_rejected() {
        let bad = CMatrix::identity(2, 2) * Complex64::new(1.1, 0.0);
        assert!(matches!(check_unitary(&bad, 1e-10), Err(Error::NotUnitary(_))));
        let k = CMatrix::identity(2, 2);
        assert!(UnitaryPath::exponential(bad, k).is_err());
    }
}
