//! The state vector as a classical phase space: `c_k = (X_k + iY_k)/√(2ħ)`,
//! Hamilton's equations for `H_cl = ⟨c|H|c⟩`, Poisson brackets and canonical maps.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gauge::hilbert::{check_hermitian, CMatrix, CVector};

/// Fixed-point tolerance of the implicit midpoint solve.
pub const SOLVE_TOLERANCE: f64 = 1e-12;

/// Canonical coordinates `X` and momenta `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl PhasePoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
        }
        Ok(Self { x, y })
    }

    pub fn from_state(c: &CVector, hbar: f64) -> Self {
        let s = (2.0 * hbar).sqrt();
        Self { x: c.map(|z| s * z.re), y: c.map(|z| s * z.im) }
    }

    pub fn to_state(&self, hbar: f64) -> CVector {
        let s = 1.0 / (2.0 * hbar).sqrt();
        CVector::from_fn(self.dim(), |k, _| Complex64::new(s * self.x[k], s * self.y[k]))
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(X, Y)` stacked.
    pub fn stacked(&self) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(2 * d, |i, _| if i < d { self.x[i] } else { self.y[i - d] })
    }

    pub fn from_stacked(z: &DVector<f64>) -> Self {
        let d = z.len() / 2;
        Self { x: z.rows(0, d).into_owned(), y: z.rows(d, d).into_owned() }
    }

    /// `‖c‖² = (‖X‖² + ‖Y‖²)/(2ħ)`.
    pub fn state_norm_sqr(&self, hbar: f64) -> f64 {
        (self.x.norm_squared() + self.y.norm_squared()) / (2.0 * hbar)
    }
}

pub type PhaseFn = Arc<dyn Fn(&PhasePoint, f64) -> f64 + Send + Sync>;
/// Writes `(∂H/∂X, ∂H/∂Y)` stacked.
pub type PhaseGradientFn = Arc<dyn Fn(&PhasePoint, f64, &mut DVector<f64>) + Send + Sync>;

/// A classical Hamiltonian on the phase space.
#[derive(Clone)]
pub enum ClassicalHamiltonian {
    /// `½ zᵀ S z` with `S` symmetric, `z = (X, Y)`.
    Quadratic(DMatrix<f64>),
    General {
        value: PhaseFn,
        gradient: Option<PhaseGradientFn>,
        delta: f64,
    },
}

impl fmt::Debug for ClassicalHamiltonian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassicalHamiltonian::Quadratic(s) => write!(f, "Quadratic({}x{})", s.nrows(), s.ncols()),
            ClassicalHamiltonian::General { gradient, delta, .. } => {
                write!(f, "General(analytic_gradient={}, delta={delta})", gradient.is_some())
            }
        }
    }
}

/// `Ω = [[0, I], [−I, 0]]`.
pub fn symplectic_form(d: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * d, 2 * d);
    for k in 0..d {
        o[(k, d + k)] = 1.0;
        o[(d + k, k)] = -1.0;
    }
    o
}

impl ClassicalHamiltonian {
    /// `H_cl = ⟨c|H|c⟩` for Hermitian `H = A + iB`: `S = [[A, −B], [B, A]] / ħ`.
    pub fn from_quantum(h: &CMatrix, hbar: f64) -> Result<Self> {
        check_hermitian(h, 1e-12)?;
        let d = h.nrows();
        let mut s = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                let (a, b) = (h[(i, j)].re / hbar, h[(i, j)].im / hbar);
                s[(i, j)] = a;
                s[(d + i, d + j)] = a;
                s[(i, d + j)] = -b;
                s[(d + i, j)] = b;
            }
        }
        Ok(ClassicalHamiltonian::Quadratic(s))
    }

    /// `(X² + Y²) ω / 2` in each of `d` modes.
    pub fn oscillator(d: usize, omega: f64) -> Self {
        ClassicalHamiltonian::Quadratic(DMatrix::identity(2 * d, 2 * d) * omega)
    }

    /// `p²/2m + k q²/2` with `X = q`, `Y = p`.
    pub fn harmonic(m: f64, k: f64) -> Self {
        ClassicalHamiltonian::Quadratic(DMatrix::from_row_slice(2, 2, &[k, 0.0, 0.0, 1.0 / m]))
    }

    pub fn value(&self, p: &PhasePoint, t: f64) -> f64 {
        match self {
            ClassicalHamiltonian::Quadratic(s) => {
                let z = p.stacked();
                0.5 * z.dot(&(s * &z))
            }
            ClassicalHamiltonian::General { value, .. } => value(p, t),
        }
    }

    /// `∇H` stacked, analytic or by central differences.
    pub fn gradient(&self, p: &PhasePoint, t: f64) -> DVector<f64> {
        match self {
            ClassicalHamiltonian::Quadratic(s) => s * p.stacked(),
            ClassicalHamiltonian::General { gradient: Some(g), .. } => {
                let mut out = DVector::zeros(2 * p.dim());
                g(p, t, &mut out);
                out
            }
            ClassicalHamiltonian::General { value, delta, .. } => numeric_gradient(&|q: &PhasePoint| value(q, t), p, *delta),
        }
    }

    /// `Ω S` for quadratic forms.
    pub fn linear_generator(&self) -> Option<DMatrix<f64>> {
        match self {
            ClassicalHamiltonian::Quadratic(s) => Some(symplectic_form(s.nrows() / 2) * s),
            ClassicalHamiltonian::General { .. } => None,
        }
    }
}

fn numeric_gradient(f: &dyn Fn(&PhasePoint) -> f64, p: &PhasePoint, delta: f64) -> DVector<f64> {
    let z = p.stacked();
    DVector::from_fn(z.len(), |i, _| {
        let mut a = z.clone();
        let mut b = z.clone();
        a[i] += delta;
        b[i] -= delta;
        (f(&PhasePoint::from_stacked(&a)) - f(&PhasePoint::from_stacked(&b))) / (2.0 * delta)
    })
}

/// One implicit-midpoint step of `Ẋ = ∂H/∂Y`, `Ẏ = −∂H/∂X`.
///
/// Linear flows use the closed-form Cayley map; others use fixed-point iteration.
pub fn hamilton_step(p: &PhasePoint, h: &ClassicalHamiltonian, t: f64, dt: f64) -> Result<PhasePoint> {
    let z0 = p.stacked();
    if let Some(m) = h.linear_generator() {
        return Ok(PhasePoint::from_stacked(&(cayley(&m, dt)? * &z0)));
    }
    let omega = symplectic_form(p.dim());
    let mut z1 = z0.clone();
    for _ in 0..200 {
        let mid = PhasePoint::from_stacked(&((&z0 + &z1) * 0.5));
        let next = &z0 + &omega * h.gradient(&mid, t + 0.5 * dt) * dt;
        let change = (&next - &z1).norm();
        z1 = next;
        if change <= SOLVE_TOLERANCE * z1.norm().max(1.0) {
            return Ok(PhasePoint::from_stacked(&z1));
        }
    }
    Err(Error::NoConvergence { iterations: 200, residual: f64::NAN })
}

/// `(I − dt M/2)⁻¹ (I + dt M/2)`.
pub fn cayley(m: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let lhs = &id - m * (0.5 * dt);
    let rhs = &id + m * (0.5 * dt);
    lhs.lu().solve(&rhs).ok_or_else(|| Error::InvalidArgument("singular implicit-midpoint system".into()))
}

/// `steps` implicit-midpoint steps from `t0`; returns every point including the start.
pub fn integrate(p0: &PhasePoint, h: &ClassicalHamiltonian, t0: f64, dt: f64, steps: usize) -> Result<Vec<PhasePoint>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(p0.clone());
    if let Some(m) = h.linear_generator() {
        let c = cayley(&m, dt)?;
        let mut z = p0.stacked();
        for _ in 0..steps {
            z = &c * z;
            out.push(PhasePoint::from_stacked(&z));
        }
        return Ok(out);
    }
    let mut p = p0.clone();
    for k in 0..steps {
        p = hamilton_step(&p, h, t0 + k as f64 * dt, dt)?;
        out.push(p.clone());
    }
    Ok(out)
}

/// `{f, g} = Σ_k (∂f/∂X_k ∂g/∂Y_k − ∂g/∂X_k ∂f/∂Y_k)` with central differences of step `delta`.
pub fn poisson_bracket(f: &dyn Fn(&PhasePoint) -> f64, g: &dyn Fn(&PhasePoint) -> f64, p: &PhasePoint, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("bracket step must be positive, got {delta}")));
    }
    let d = p.dim();
    let df = numeric_gradient(f, p, delta);
    let dg = numeric_gradient(g, p, delta);
    Ok((0..d).map(|k| df[k] * dg[d + k] - dg[k] * df[d + k]).sum())
}

/// Real form `[[P, −Q], [Q, P]]` of `U = P + iQ` acting on `(X, Y)`.
pub fn unitary_real_form(u: &CMatrix) -> DMatrix<f64> {
    let d = u.nrows();
    let mut m = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let (p, q) = (u[(i, j)].re, u[(i, j)].im);
            m[(i, j)] = p;
            m[(d + i, d + j)] = p;
            m[(i, d + j)] = -q;
            m[(d + i, j)] = q;
        }
    }
    m
}

pub type PhaseMap = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

pub fn linear_map(m: DMatrix<f64>) -> PhaseMap {
    Arc::new(move |z| &m * z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalReport {
    pub samples: usize,
    pub seed: u64,
    /// Max entry of `|Mᵀ Ω M − Ω|` over samples.
    pub max_violation: f64,
}

impl CanonicalReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

impl fmt::Display for CanonicalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "samples = {}\nseed = {}\nmax_violation = {:e}", self.samples, self.seed, self.max_violation)
    }
}

/// Numeric Jacobian of `map` at `z` by central differences.
pub fn jacobian(map: &PhaseMap, z: &DVector<f64>, delta: f64) -> DMatrix<f64> {
    let n = z.len();
    let mut j = DMatrix::zeros(n, n);
    for c in 0..n {
        let mut a = z.clone();
        let mut b = z.clone();
        a[c] += delta;
        b[c] -= delta;
        let col = (map(&a) - map(&b)) / (2.0 * delta);
        j.set_column(c, &col);
    }
    j
}

/// Checks the symplectic condition at `samples` random points of the `2d`-dimensional space.
pub fn canonical_check(map: &PhaseMap, d: usize, samples: usize, seed: u64, delta: f64) -> CanonicalReport {
    let omega = symplectic_form(d);
    let max_violation = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(s as u64));
            let z = DVector::from_fn(2 * d, |_, _| 2.0 * rng.random::<f64>() - 1.0);
            let m = jacobian(map, &z, delta);
            (m.transpose() * &omega * &m - &omega).amax()
        })
        .reduce(|| 0.0, f64::max);
    CanonicalReport { samples, seed, max_violation }
}

/// Oscillator relabelling `(q, p, m, k) ↦ (p, −q, 1/k, 1/m)`.
pub fn ho_frame_swap(q: f64, p: f64, m: f64, k: f64) -> Result<(f64, f64, f64, f64)> {
    if !(m > 0.0 && k > 0.0) {
        return Err(Error::InvalidArgument(format!("mass and spring constant must be positive, got m={m} k={k}")));
    }
    Ok((p, -q, 1.0 / k, 1.0 / m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameSwapAudit {
    /// `|H'(q', p') − H(q, p)|` at the start.
    pub energy_difference: f64,
    /// Max distance between the original trajectory and the swapped one mapped back.
    pub trajectory_difference: f64,
}

impl fmt::Display for FrameSwapAudit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "energy_difference = {:e}\ntrajectory_difference = {:e}", self.energy_difference, self.trajectory_difference)
    }
}

/// Integrates both frames for `steps` of `dt` and compares after inverse mapping `q = −p'`, `p = q'`.
pub fn audit_frame_swap(q: f64, p: f64, m: f64, k: f64, dt: f64, steps: usize) -> Result<FrameSwapAudit> {
    let (q2, p2, m2, k2) = ho_frame_swap(q, p, m, k)?;
    let energy = |q: f64, p: f64, m: f64, k: f64| p * p / (2.0 * m) + 0.5 * k * q * q;
    let energy_difference = (energy(q2, p2, m2, k2) - energy(q, p, m, k)).abs();
    let point = |q: f64, p: f64| PhasePoint { x: DVector::from_element(1, q), y: DVector::from_element(1, p) };
    let a = integrate(&point(q, p), &ClassicalHamiltonian::harmonic(m, k), 0.0, dt, steps)?;
    let b = integrate(&point(q2, p2), &ClassicalHamiltonian::harmonic(m2, k2), 0.0, dt, steps)?;
    let trajectory_difference = a.iter().zip(&b).map(|(s, w)| (s.x[0] + w.y[0]).abs().max((s.y[0] - w.x[0]).abs())).fold(0.0, f64::max);
    Ok(FrameSwapAudit { energy_difference, trajectory_difference })
}
