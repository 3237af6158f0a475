//! Discretized configuration spaces.
//!
//! A [`Grid`] is a tensor product of uniform axes with a per-axis boundary
//! mode and an inverse-mass metric `μ_ij`. Values are laid out row-major with
//! axis 0 slowest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cap on the total number of grid points.
pub const DEFAULT_MAX_POINTS: usize = 1 << 24;

/// Largest supported configuration-space dimension.
pub const MAX_DIM: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    /// Points at `lower + k h`, `k < count`, wrapping at `upper`.
    Periodic,
    /// Points at `lower + k h` including both ends; the field vanishes outside.
    DirichletZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub boundary: Boundary,
}

impl Axis {
    pub fn periodic(lower: f64, upper: f64, count: usize) -> Self {
        Self { lower, upper, count, boundary: Boundary::Periodic }
    }

    pub fn dirichlet(lower: f64, upper: f64, count: usize) -> Self {
        Self { lower, upper, count, boundary: Boundary::DirichletZero }
    }

    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => (self.upper - self.lower) / self.count as f64,
            Boundary::DirichletZero => (self.upper - self.lower) / (self.count as f64 - 1.0),
        }
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        self.lower + k as f64 * self.spacing()
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Maps `x` into `[lower, upper)` on periodic axes; identity otherwise.
    pub fn wrap(&self, x: f64) -> f64 {
        if !self.is_periodic() || (x >= self.lower && x < self.upper) {
            return x;
        }
        let len = self.length();
        let mut y = (x - self.lower).rem_euclid(len) + self.lower;
        if y >= self.upper {
            y = self.lower;
        }
        y
    }

    /// Index of the node whose cell contains `x`.
    pub fn nearest(&self, x: f64) -> Option<usize> {
        let h = self.spacing();
        match self.boundary {
            Boundary::Periodic => {
                let k = ((self.wrap(x) - self.lower) / h).round() as i64;
                Some(k.rem_euclid(self.count as i64) as usize)
            }
            Boundary::DirichletZero => {
                if x < self.lower || x > self.upper {
                    return None;
                }
                let k = ((x - self.lower) / h).round() as usize;
                Some(k.min(self.count - 1))
            }
        }
    }

    /// Extent `[a, b]` of the cell owned by node `k`.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        let h = self.spacing();
        let q = self.coordinate(k);
        match self.boundary {
            Boundary::Periodic => (q - 0.5 * h, q + 0.5 * h),
            Boundary::DirichletZero => {
                let a = if k == 0 { q } else { q - 0.5 * h };
                let b = if k + 1 == self.count { q } else { q + 0.5 * h };
                (a, b)
            }
        }
    }

    /// Quadrature weight of node `k`: `h` on periodic axes, trapezoid on Dirichlet axes.
    pub fn weight(&self, k: usize) -> f64 {
        let (a, b) = self.cell(k);
        b - a
    }

    /// Lower and upper interpolation nodes around `x` plus the weight of the upper one.
    fn bracket(&self, x: f64) -> Option<(usize, usize, f64)> {
        let h = self.spacing();
        match self.boundary {
            Boundary::Periodic => {
                let s = (self.wrap(x) - self.lower) / h;
                let k = (s.floor() as usize).min(self.count - 1);
                let w = (s - k as f64).clamp(0.0, 1.0);
                Some((k, (k + 1) % self.count, w))
            }
            Boundary::DirichletZero => {
                if !(x >= self.lower && x <= self.upper) {
                    return None;
                }
                let s = (x - self.lower) / h;
                let k = (s.floor() as usize).min(self.count - 2);
                Some((k, k + 1, (s - k as f64).clamp(0.0, 1.0)))
            }
        }
    }
}

/// Inverse-mass metric `μ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    /// Constant diagonal entries `μ_i = 1/m_i`.
    Diagonal(Vec<f64>),
    /// Position-dependent symmetric array: `components[i * n + j]` holds `μ_ij` at every point.
    Field(Vec<Vec<f64>>),
}

impl Metric {
    pub fn unit(dim: usize) -> Self {
        Metric::Diagonal(vec![1.0; dim])
    }

    pub fn masses(masses: &[f64]) -> Self {
        Metric::Diagonal(masses.iter().map(|m| 1.0 / m).collect())
    }

    pub fn is_constant_diagonal(&self) -> bool {
        matches!(self, Metric::Diagonal(_))
    }

    /// `μ_ij` at flat point index `p`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize, p: usize) -> f64 {
        match self {
            Metric::Diagonal(d) => {
                if i == j {
                    d[i]
                } else {
                    0.0
                }
            }
            Metric::Field(c) => {
                let n = c.len().isqrt();
                c[i * n + j][p]
            }
        }
    }
}

/// A uniform tensor-product grid over configuration space.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    axes: Vec<Axis>,
    metric: Metric,
    strides: Vec<usize>,
    len: usize,
}

impl Grid {
    /// Grid with unit diagonal metric and the default point cap.
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        let dim = axes.len();
        Self::with_options(axes, Metric::unit(dim), DEFAULT_MAX_POINTS)
    }

    pub fn with_metric(axes: Vec<Axis>, metric: Metric) -> Result<Self> {
        Self::with_options(axes, metric, DEFAULT_MAX_POINTS)
    }

    pub fn with_options(axes: Vec<Axis>, metric: Metric, max_points: usize) -> Result<Self> {
        let dim = axes.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..={MAX_DIM}")));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.count < 4 {
                return Err(Error::InvalidGrid(format!("axis {i} has {} points, need at least 4", a.count)));
            }
            if !(a.lower.is_finite() && a.upper.is_finite()) || !(a.spacing() > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {i} has non-positive spacing")));
            }
        }
        let mut len: usize = 1;
        for a in &axes {
            len = len.checked_mul(a.count).ok_or(Error::GridTooLarge { points: usize::MAX, cap: max_points })?;
        }
        if len > max_points {
            return Err(Error::GridTooLarge { points: len, cap: max_points });
        }
        match &metric {
            Metric::Diagonal(d) => {
                if d.len() != dim {
                    return Err(Error::InvalidGrid(format!("metric has {} entries for {dim} axes", d.len())));
                }
                if d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidGrid("metric entries must be finite".into()));
                }
            }
            Metric::Field(c) => {
                if c.len() != dim * dim || c.iter().any(|v| v.len() != len) {
                    return Err(Error::InvalidGrid("metric field must have n*n components of grid length".into()));
                }
                for i in 0..dim {
                    for j in i + 1..dim {
                        let (a, b) = (&c[i * dim + j], &c[j * dim + i]);
                        if a.iter().zip(b).any(|(x, y)| x != y) {
                            return Err(Error::InvalidGrid(format!("metric is not symmetric in ({i}, {j})")));
                        }
                    }
                }
                if c.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidGrid("metric entries must be finite".into()));
                }
            }
        }
        let mut strides = vec![1; dim];
        for i in (0..dim.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * axes[i + 1].count;
        }
        Ok(Self { axes, metric, strides, len })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, i: usize) -> Result<&Axis> {
        self.axes.get(i).ok_or(Error::AxisOutOfRange { axis: i, dim: self.dim() })
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::spacing).collect()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).fold(f64::INFINITY, f64::min)
    }

    pub fn is_fully_periodic(&self) -> bool {
        self.axes.iter().all(Axis::is_periodic)
    }

    /// Same axes with a different metric.
    pub fn replace_metric(&self, metric: Metric) -> Result<Self> {
        Self::with_options(self.axes.clone(), metric, usize::MAX)
    }

    /// Per-axis index of flat point `p`.
    #[inline]
    pub fn index_along(&self, p: usize, axis: usize) -> usize {
        (p / self.strides[axis]) % self.axes[axis].count
    }

    pub fn multi_index(&self, p: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.index_along(p, a)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinates of flat point `p` written into `out`.
    #[inline]
    pub fn coords_into(&self, p: usize, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.axes[a].coordinate(self.index_along(p, a));
        }
    }

    pub fn coords(&self, p: usize) -> Vec<f64> {
        let mut q = vec![0.0; self.dim()];
        self.coords_into(p, &mut q);
        q
    }

    /// Quadrature weight (cell volume) of flat point `p`.
    pub fn weight(&self, p: usize) -> f64 {
        (0..self.dim()).map(|a| self.axes[a].weight(self.index_along(p, a))).product()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len).map(|p| self.weight(p)).collect()
    }

    /// Wraps periodic coordinates in place.
    pub fn wrap(&self, q: &mut [f64]) {
        for (x, a) in q.iter_mut().zip(&self.axes) {
            *x = a.wrap(*x);
        }
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim() && q.iter().zip(&self.axes).all(|(x, a)| a.is_periodic() || (*x >= a.lower && *x <= a.upper))
    }

    /// Flat index of the cell containing `q`, if any.
    pub fn cell_of(&self, q: &[f64]) -> Option<usize> {
        let mut p = 0;
        for (a, x) in q.iter().enumerate() {
            p += self.axes[a].nearest(*x)? * self.strides[a];
        }
        Some(p)
    }

    /// Multilinear interpolation weights over the enclosing corners.
    pub fn stencil(&self, q: &[f64]) -> Result<Stencil> {
        if q.len() != self.dim() {
            return Err(Error::ComponentCount { expected: self.dim(), got: q.len() });
        }
        let mut br = [(0usize, 0usize, 0.0f64); MAX_DIM];
        for (a, x) in q.iter().enumerate() {
            br[a] = self.axes[a].bracket(*x).ok_or_else(|| Error::OutOfBounds(q.to_vec()))?;
        }
        let dim = self.dim();
        let mut st = Stencil { len: 1 << dim, nodes: [(0, 0.0); 1 << MAX_DIM] };
        for corner in 0..(1usize << dim) {
            let mut idx = 0;
            let mut w = 1.0;
            for (a, &(lo, hi, t)) in br.iter().enumerate().take(dim) {
                if corner >> a & 1 == 1 {
                    idx += hi * self.strides[a];
                    w *= t;
                } else {
                    idx += lo * self.strides[a];
                    w *= 1.0 - t;
                }
            }
            st.nodes[corner] = (idx, w);
        }
        Ok(st)
    }

    /// Displacement `b - a` using the minimum image on periodic axes.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .zip(&self.axes)
            .map(|((x, y), ax)| {
                let mut d = y - x;
                if ax.is_periodic() {
                    let l = ax.length();
                    d -= l * (d / l).round();
                }
                d
            })
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

/// Corner indices and weights for multilinear interpolation at one point.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    len: usize,
    nodes: [(usize, f64); 1 << MAX_DIM],
}

impl Stencil {
    pub fn nodes(&self) -> &[(usize, f64)] {
        &self.nodes[..self.len]
    }

    #[inline]
    pub fn apply(&self, values: &[f64]) -> f64 {
        self.nodes().iter().map(|&(i, w)| w * values[i]).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_follows_boundary_mode() {
        assert_eq!(Axis::periodic(0.0, 1.0, 4).spacing(), 0.25);
        assert!((Axis::dirichlet(0.0, 1.0, 5).spacing() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_small_axes_and_oversized_grids() {
        assert!(Grid::new(vec![Axis::periodic(0.0, 1.0, 3)]).is_err());
        let axes = vec![Axis::periodic(0.0, 1.0, 64); 2];
        assert!(matches!(Grid::with_options(axes, Metric::unit(2), 1000), Err(Error::GridTooLarge { points: 4096, cap: 1000 })));
        assert!(Grid::new(vec![Axis::periodic(1.0, 1.0, 8)]).is_err());
    }

    #[test]
    fn rejects_asymmetric_metric_field() {
        let axes = vec![Axis::periodic(0.0, 1.0, 4); 2];
        let n = 16;
        let comps = vec![vec![1.0; n], vec![0.2; n], vec![0.3; n], vec![1.0; n]];
        assert!(Grid::with_metric(axes.clone(), Metric::Field(comps)).is_err());
        let comps = vec![vec![1.0; n], vec![0.2; n], vec![0.2; n], vec![1.0; n]];
        assert!(Grid::with_metric(axes, Metric::Field(comps)).is_ok());
    }

    #[test]
    fn row_major_axis_zero_slowest() {
        let g = Grid::new(vec![Axis::periodic(0.0, 1.0, 4), Axis::periodic(0.0, 1.0, 5)]).unwrap();
        assert_eq!(g.strides(), &[5, 1]);
        assert_eq!(g.multi_index(7), vec![1, 2]);
        assert_eq!(g.flat_index(&[3, 4]), 19);
    }

    #[test]
    fn wrap_and_cells() {
        let a = Axis::periodic(-1.0, 1.0, 8);
        assert!((a.wrap(1.25) + 0.75).abs() < 1e-15);
        assert_eq!(a.nearest(0.99), Some(0));
        let d = Axis::dirichlet(0.0, 1.0, 5);
        assert_eq!(d.cell(0), (0.0, 0.125));
        assert_eq!(d.weight(2), 0.25);
        assert_eq!(d.nearest(1.01), None);
    }

    #[test]
    fn stencil_weights_sum_to_one() {
        let g = Grid::new(vec![Axis::periodic(0.0, 1.0, 8), Axis::dirichlet(0.0, 2.0, 9)]).unwrap();
        let s = g.stencil(&[0.93, 1.31]).unwrap();
        let total: f64 = s.nodes().iter().map(|n| n.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(g.stencil(&[0.5, 2.5]).is_err());
    }
}
