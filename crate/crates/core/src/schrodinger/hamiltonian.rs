//! `H = −(ħ²/2) Σ_ij ∂_i μ_ij ∂_j + V` on a grid.
//!
//! The diagonal terms use the compact three-point stencil with `μ_ii`
//! averaged to half points; off-diagonal terms compose two central
//! differences. On Dirichlet axes the edge nodes are pinned to zero, so the
//! operator acts on interior nodes only and stays Hermitian.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::{Boundary, Grid, Metric};

type C = Complex64;

const PAR_MIN: usize = 4096;

/// Time-dependent point-wise potential `V(q, t)`.
pub type PotentialFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Potential {
    Zero,
    Constant(f64),
    /// Values sampled on the grid, time-independent.
    Static(Arc<Vec<f64>>),
    Dynamic(PotentialFn),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Constant(c) => write!(f, "Constant({c})"),
            Potential::Static(v) => write!(f, "Static({} values)", v.len()),
            Potential::Dynamic(_) => write!(f, "Dynamic"),
        }
    }
}

impl Potential {
    /// `V = (k/2) Σ_i q_i²`.
    pub fn harmonic(grid: &Grid, k: f64) -> Self {
        let v = (0..grid.len()).map(|p| 0.5 * k * grid.coords(p).iter().map(|x| x * x).sum::<f64>()).collect();
        Potential::Static(Arc::new(v))
    }

    pub fn from_field(v: &RealField) -> Self {
        Potential::Static(Arc::new(v.values().to_vec()))
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, Potential::Dynamic(_))
    }
}

/// Potential, metric (carried by the grid) and `ħ`.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    grid: Arc<Grid>,
    potential: Potential,
    hbar: f64,
}

impl HamiltonianSpec {
    pub fn new(grid: Arc<Grid>, potential: Potential, hbar: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidArgument(format!("hbar must be positive, got {hbar}")));
        }
        match &potential {
            Potential::Constant(c) if !c.is_finite() => return Err(Error::NonFinite { index: 0 }),
            Potential::Static(v) => {
                if v.len() != grid.len() {
                    return Err(Error::LengthMismatch { expected: grid.len(), got: v.len() });
                }
                if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { index });
                }
            }
            _ => {}
        }
        Ok(Self { grid, potential, hbar })
    }

    pub fn free(grid: Arc<Grid>, hbar: f64) -> Result<Self> {
        Self::new(grid, Potential::Zero, hbar)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// `V(·, t)` sampled on the grid.
    pub fn potential_values(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.grid.len();
        match &self.potential {
            Potential::Zero => Ok(vec![0.0; n]),
            Potential::Constant(c) => Ok(vec![*c; n]),
            Potential::Static(v) => Ok(v.to_vec()),
            Potential::Dynamic(f) => {
                let v = RealField::from_fn(self.grid.clone(), t, |q| f(q, t))?;
                Ok(v.into_values())
            }
        }
    }
}

/// Per-axis stencil data.
#[derive(Debug, Clone)]
struct AxisStencil {
    stride: usize,
    count: usize,
    inv_h2: f64,
    inv_2h: f64,
    periodic: bool,
}

/// Precomputed discrete kinetic operator `T = −(ħ²/2) Δ`.
#[derive(Debug, Clone)]
pub struct Kinetic {
    grid: Arc<Grid>,
    axes: Vec<AxisStencil>,
    /// `ħ²/2`.
    pref: f64,
    /// Half-point `μ_ii` toward `+` along each axis, when the metric varies.
    mu_up: Option<Vec<Vec<f64>>>,
    /// Off-diagonal pairs `(i, j, μ_ij values)` with `i ≠ j`.
    cross: Vec<(usize, usize, Vec<f64>)>,
    /// Constant `μ_ii` for the diagonal metric.
    mu_const: Vec<f64>,
    pinned: Vec<bool>,
    any_pinned: bool,
}

impl Kinetic {
    pub fn new(grid: Arc<Grid>, hbar: f64) -> Self {
        let dim = grid.dim();
        let axes: Vec<AxisStencil> = grid
            .axes()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let h = a.spacing();
                AxisStencil {
                    stride: grid.strides()[i],
                    count: a.count,
                    inv_h2: 1.0 / (h * h),
                    inv_2h: 0.5 / h,
                    periodic: a.boundary == Boundary::Periodic,
                }
            })
            .collect();
        let pinned: Vec<bool> = (0..grid.len())
            .map(|p| {
                axes.iter().any(|a| {
                    let k = (p / a.stride) % a.count;
                    !a.periodic && (k == 0 || k + 1 == a.count)
                })
            })
            .collect();
        let any_pinned = pinned.iter().any(|&b| b);
        let (mu_up, cross, mu_const) = match grid.metric() {
            Metric::Diagonal(d) => (None, Vec::new(), d.clone()),
            m @ Metric::Field(_) => {
                let ups = axes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        (0..grid.len())
                            .map(|p| {
                                let k = (p / a.stride) % a.count;
                                let up = if k + 1 < a.count {
                                    p + a.stride
                                } else if a.periodic {
                                    p + a.stride - a.count * a.stride
                                } else {
                                    p
                                };
                                0.5 * (m.entry(i, i, p) + m.entry(i, i, up))
                            })
                            .collect()
                    })
                    .collect();
                let mut cross = Vec::new();
                for i in 0..dim {
                    for j in 0..dim {
                        if i != j {
                            let vals: Vec<f64> = (0..grid.len()).map(|p| m.entry(i, j, p)).collect();
                            if vals.iter().any(|&v| v != 0.0) {
                                cross.push((i, j, vals));
                            }
                        }
                    }
                }
                (Some(ups), cross, vec![0.0; dim])
            }
        };
        Self { grid, axes, pref: 0.5 * hbar * hbar, mu_up, cross, mu_const, pinned, any_pinned }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// True on Dirichlet edge nodes, which are held at zero.
    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    /// Zeroes the pinned nodes of `psi`.
    pub fn project(&self, psi: &mut [C]) {
        if self.any_pinned {
            psi.iter_mut().zip(&self.pinned).for_each(|(v, &pin)| {
                if pin {
                    *v = C::default()
                }
            });
        }
    }

    #[inline]
    fn neighbours(a: &AxisStencil, p: usize) -> (usize, usize) {
        let k = (p / a.stride) % a.count;
        let up = if k + 1 == a.count { p + a.stride - a.count * a.stride } else { p + a.stride };
        let dn = if k == 0 { p + (a.count - 1) * a.stride } else { p - a.stride };
        (up, dn)
    }

    /// Diagonal entries of `T`.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|p| {
                if self.pinned[p] {
                    return 0.0;
                }
                self.axes
                    .iter()
                    .enumerate()
                    .map(|(i, a)| {
                        let (mu_u, mu_d) = match &self.mu_up {
                            None => (self.mu_const[i], self.mu_const[i]),
                            Some(up) => (up[i][p], up[i][Self::neighbours(a, p).1]),
                        };
                        self.pref * a.inv_h2 * (mu_u + mu_d)
                    })
                    .sum()
            })
            .collect()
    }

    /// `out = T x`. Pinned nodes of `x` must be zero; pinned rows of `out` are zero.
    pub fn apply(&self, x: &[C], out: &mut [C]) {
        let compute = |p: usize| -> C {
            if self.pinned[p] {
                return C::default();
            }
            let mut acc = C::default();
            for (i, a) in self.axes.iter().enumerate() {
                let (up, dn) = Self::neighbours(a, p);
                let t = match &self.mu_up {
                    None => (x[up] - x[p] * 2.0 + x[dn]) * self.mu_const[i],
                    Some(mu) => (x[up] - x[p]) * mu[i][p] - (x[p] - x[dn]) * mu[i][dn],
                };
                acc += t * a.inv_h2;
            }
            acc * (-self.pref)
        };
        out.par_iter_mut().enumerate().with_min_len(PAR_MIN).for_each(|(p, o)| *o = compute(p));
        if self.cross.is_empty() {
            return;
        }
        // Mixed terms: D_i (μ_ij D_j x), both central, interior-only.
        let central = |v: &[C], a: &AxisStencil, p: usize| -> C {
            let (up, dn) = Self::neighbours(a, p);
            (v[up] - v[dn]) * a.inv_2h
        };
        let mut w = vec![C::default(); self.grid.len()];
        for (i, j, mu) in &self.cross {
            let (ai, aj) = (&self.axes[*i], &self.axes[*j]);
            w.par_iter_mut()
                .enumerate()
                .with_min_len(PAR_MIN)
                .for_each(|(p, w)| *w = if self.pinned[p] { C::default() } else { central(x, aj, p) * mu[p] });
            out.par_iter_mut().enumerate().with_min_len(PAR_MIN).for_each(|(p, o)| {
                if !self.pinned[p] {
                    *o -= central(&w, ai, p) * self.pref;
                }
            });
        }
    }
}

/// Explicit matrix of `T + diag(V)`, row-major, for small-grid audits.
pub fn dense_matrix(spec: &HamiltonianSpec, t: f64) -> Result<Vec<Vec<C>>> {
    let n = spec.grid().len();
    if n > 4096 {
        return Err(Error::InvalidArgument(format!("dense matrix requested for {n} points")));
    }
    let kin = Kinetic::new(spec.grid().clone(), spec.hbar());
    let v = spec.potential_values(t)?;
    let mut cols = vec![vec![C::default(); n]; n];
    let mut e = vec![C::default(); n];
    for (c, col) in cols.iter_mut().enumerate() {
        if kin.pinned[c] {
            continue;
        }
        e[c] = C::new(1.0, 0.0);
        kin.apply(&e, col);
        col[c] += v[c];
        e[c] = C::default();
    }
    for (p, &pin) in kin.pinned.iter().enumerate() {
        if pin {
            cols[p][p] = C::new(v[p], 0.0);
        }
    }
    // Transpose columns to rows.
    Ok((0..n).map(|r| (0..n).map(|c| cols[c][r]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    #[test]
    fn laplacian_of_quadratic_is_constant() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(-1.0, 1.0, 21)]).unwrap());
        let kin = Kinetic::new(g.clone(), 1.0);
        let x: Vec<C> = (0..21).map(|p| C::new(g.coords(p)[0].powi(2), 0.0)).collect();
        let mut out = vec![C::default(); 21];
        kin.apply(&x, &mut out);
        // T x² = −(1/2)·2 = −1 away from the pinned edges; edge neighbours see x = 1 as is.
        for (p, v) in out.iter().enumerate().take(19).skip(2) {
            assert!((v.re + 1.0).abs() < 1e-10, "{p}: {v}");
        }
        assert_eq!(out[0], C::default());
    }

    #[test]
    fn diagonal_matches_dense_matrix() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 1.0, 6), Axis::dirichlet(0.0, 1.0, 5)]).unwrap());
        let spec = HamiltonianSpec::free(g.clone(), 0.7).unwrap();
        let m = dense_matrix(&spec, 0.0).unwrap();
        let d = Kinetic::new(g, 0.7).diagonal();
        for p in 0..30 {
            assert!((m[p][p].re - d[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_hbar_and_potential_length() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 1.0, 8)]).unwrap());
        assert!(HamiltonianSpec::free(g.clone(), 0.0).is_err());
        assert!(HamiltonianSpec::new(g, Potential::Static(Arc::new(vec![0.0; 3])), 1.0).is_err());
    }
}
