//! Scalar fields on a [`Grid`] and the stencil operators built on them.
//!
//! Every operation returns a new field; inputs are never mutated. First
//! derivatives use second-order central differences, wrapping on periodic
//! axes and switching to one-sided second-order stencils at Dirichlet edges.

use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, Metric};

const PAR_MIN: usize = 4096;

/// Values a field can hold: `f64` or `Complex64`.
pub trait FieldValue: Copy + Send + Sync + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + 'static {
    fn is_finite_value(&self) -> bool;
}

impl FieldValue for f64 {
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl FieldValue for Complex64 {
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Values on every grid point at one instant.
#[derive(Debug, Clone)]
pub struct Field<T> {
    grid: Arc<Grid>,
    values: Vec<T>,
    time: f64,
}

pub type RealField = Field<f64>;
pub type ComplexField = Field<Complex64>;

impl<T: FieldValue> Field<T> {
    pub fn new(grid: Arc<Grid>, values: Vec<T>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Arc<Grid>, time: f64) -> Self {
        let n = grid.len();
        Self { grid, values: vec![T::default(); n], time }
    }

    /// Samples `f(q)` at every node.
    pub fn from_fn(grid: Arc<Grid>, time: f64, f: impl Fn(&[f64]) -> T + Sync) -> Result<Self> {
        let dim = grid.dim();
        let values: Vec<T> = (0..grid.len())
            .into_par_iter()
            .with_min_len(PAR_MIN)
            .map_init(
                || vec![0.0; dim],
                |q, p| {
                    grid.coords_into(p, q);
                    f(q)
                },
            )
            .collect();
        Self::new(grid, values, time)
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(grid: Arc<Grid>, values: Vec<T>, time: f64) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &Field<impl FieldValue>) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// Point-wise map; fails if the result is not finite.
    pub fn map<U: FieldValue>(&self, f: impl Fn(T) -> U + Sync) -> Result<Field<U>> {
        let values: Vec<U> = self.values.par_iter().with_min_len(PAR_MIN).map(|&v| f(v)).collect();
        Field::new(self.grid.clone(), values, self.time)
    }

    pub fn zip_map<U: FieldValue, V: FieldValue>(&self, other: &Field<U>, f: impl Fn(T, U) -> V + Sync) -> Result<Field<V>> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        let values: Vec<V> = self.values.par_iter().zip(other.values.par_iter()).with_min_len(PAR_MIN).map(|(&a, &b)| f(a, b)).collect();
        Field::new(self.grid.clone(), values, self.time)
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        self.map(|v| v * s)
    }

    /// Zeroes every point where `mask` is false.
    pub fn masked(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), got: mask.len() });
        }
        let values = self.values.iter().zip(mask).map(|(&v, &m)| if m { v } else { T::default() }).collect();
        Ok(Self::from_parts(self.grid.clone(), values, self.time))
    }

    /// Multilinear interpolation at `q`; periodic axes wrap.
    pub fn interpolate(&self, q: &[f64]) -> Result<T> {
        let st = self.grid.stencil(q)?;
        Ok(st.nodes().iter().fold(T::default(), |acc, &(i, w)| acc + self.values[i] * w))
    }
}

impl RealField {
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl ComplexField {
    /// Discrete `L2` norm `sqrt(∫|Ψ|²)`.
    pub fn norm(&self) -> f64 {
        let w = self.grid.weights();
        self.values.iter().zip(&w).map(|(v, w)| v.norm_sqr() * w).sum::<f64>().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::EmptyDensity);
        }
        self.map(|v| v / n)
    }
}

/// First derivative along `axis`.
pub fn gradient<T: FieldValue>(f: &Field<T>, axis: usize) -> Result<Field<T>> {
    let grid = f.grid();
    let ax = *grid.axis(axis)?;
    let s = grid.strides()[axis];
    let n = ax.count;
    let inv2h = 0.5 / ax.spacing();
    let v = f.values();
    let values: Vec<T> = (0..grid.len())
        .into_par_iter()
        .with_min_len(PAR_MIN)
        .map(|p| {
            let k = (p / s) % n;
            match ax.boundary {
                Boundary::Periodic => {
                    let up = if k + 1 == n { p + s - n * s } else { p + s };
                    let dn = if k == 0 { p + (n - 1) * s } else { p - s };
                    (v[up] - v[dn]) * inv2h
                }
                Boundary::DirichletZero => {
                    if k == 0 {
                        ((v[p + s] - v[p]) * 4.0 - (v[p + 2 * s] - v[p])) * inv2h
                    } else if k + 1 == n {
                        ((v[p - 2 * s] - v[p]) - (v[p - s] - v[p]) * 4.0) * inv2h
                    } else {
                        (v[p + s] - v[p - s]) * inv2h
                    }
                }
            }
        })
        .collect();
    Field::new(grid.clone(), values, f.time())
}

/// `Σ_i ∂_i v_i` with the same stencils as [`gradient`].
pub fn divergence(v: &[RealField]) -> Result<RealField> {
    let first = v.first().ok_or(Error::ComponentCount { expected: 1, got: 0 })?;
    let dim = first.grid().dim();
    if v.len() != dim {
        return Err(Error::ComponentCount { expected: dim, got: v.len() });
    }
    let mut acc = gradient(first, 0)?.into_values();
    for (i, c) in v.iter().enumerate().skip(1) {
        if !c.same_grid(first) {
            return Err(Error::GridMismatch);
        }
        let g = gradient(c, i)?;
        acc.par_iter_mut().zip(g.values().par_iter()).for_each(|(a, b)| *a += b);
    }
    RealField::new(first.grid().clone(), acc, first.time())
}

/// Per-term divergence diagnostics: `(Σ_i ∂_i v_i, Σ_i |∂_i v_i|)`.
pub(crate) fn divergence_with_magnitude(v: &[RealField]) -> Result<(RealField, Vec<f64>)> {
    let div = divergence(v)?;
    let mut mag = vec![0.0; div.len()];
    for (i, c) in v.iter().enumerate() {
        let g = gradient(c, i)?;
        mag.iter_mut().zip(g.values()).for_each(|(m, x)| *m += x.abs());
    }
    Ok((div, mag))
}

/// Raises an index with the grid metric: `out_i = Σ_j μ_ij w_j`.
pub fn apply_metric(w: &[RealField]) -> Result<Vec<RealField>> {
    let first = w.first().ok_or(Error::ComponentCount { expected: 1, got: 0 })?;
    let grid = first.grid().clone();
    let dim = grid.dim();
    if w.len() != dim {
        return Err(Error::ComponentCount { expected: dim, got: w.len() });
    }
    match grid.metric() {
        Metric::Diagonal(d) => w.iter().zip(d).map(|(f, m)| f.scale(*m)).collect(),
        metric @ Metric::Field(_) => (0..dim)
            .map(|i| {
                let values = (0..grid.len()).map(|p| (0..dim).map(|j| metric.entry(i, j, p) * w[j].values()[p]).sum()).collect();
                RealField::new(grid.clone(), values, first.time())
            })
            .collect(),
    }
}

/// `∫ f` with cell volume `∏h_i` on periodic axes and trapezoid weights on Dirichlet axes.
pub fn integrate<T: FieldValue>(f: &Field<T>) -> T {
    let grid = f.grid();
    // Fixed chunks keep the summation order independent of thread scheduling.
    let parts: Vec<T> = f
        .values()
        .par_chunks(PAR_MIN)
        .enumerate()
        .map(|(c, chunk)| chunk.iter().enumerate().fold(T::default(), |acc, (k, &v)| acc + v * grid.weight(c * PAR_MIN + k)))
        .collect();
    parts.into_iter().fold(T::default(), |a, b| a + b)
}

/// Running trapezoid integral along `axis`, anchored at the node nearest `anchor`.
pub fn cumulative_integral<T: FieldValue>(f: &Field<T>, axis: usize, anchor: f64) -> Result<Field<T>> {
    let grid = f.grid();
    let ax = *grid.axis(axis)?;
    if !(anchor >= ax.lower && anchor <= ax.upper) {
        return Err(Error::InvalidArgument(format!("anchor {anchor} outside axis {axis} range [{}, {}]", ax.lower, ax.upper)));
    }
    let n = ax.count;
    let k0 = (((anchor - ax.lower) / ax.spacing()).round() as usize).min(n - 1);
    let s = grid.strides()[axis];
    let half_h = 0.5 * ax.spacing();
    let v = f.values();
    let mut out = vec![T::default(); grid.len()];
    for p in 0..grid.len() {
        if !(p / s).is_multiple_of(n) {
            continue;
        }
        // p is the first node of a line along `axis`.
        let at = |k: usize| p + k * s;
        for k in k0 + 1..n {
            out[at(k)] = out[at(k - 1)] + (v[at(k - 1)] + v[at(k)]) * half_h;
        }
        for k in (0..k0).rev() {
            out[at(k)] = out[at(k + 1)] - (v[at(k)] + v[at(k + 1)]) * half_h;
        }
    }
    Field::new(grid.clone(), out, f.time())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;
    use std::f64::consts::PI;

    fn grid1(axis: Axis) -> Arc<Grid> {
        Arc::new(Grid::new(vec![axis]).unwrap())
    }

    #[test]
    fn gradient_of_constant_is_exactly_zero() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 1.0, 8), Axis::dirichlet(0.0, 2.0, 9)]).unwrap());
        let f = RealField::from_fn(g, 0.0, |_| 3.7).unwrap();
        for axis in 0..2 {
            assert!(gradient(&f, axis).unwrap().values().iter().all(|&v| v == 0.0));
        }
        assert!(matches!(gradient(&f, 2), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn gradient_of_linear_is_one_on_dirichlet_axis() {
        let g = grid1(Axis::dirichlet(-1.0, 3.0, 17));
        let f = RealField::from_fn(g, 0.0, |q| q[0]).unwrap();
        let d = gradient(&f, 0).unwrap();
        assert!(d.values().iter().all(|v| (v - 1.0).abs() < 1e-13));
    }

    #[test]
    fn gradient_converges_at_second_order() {
        let err = |n: usize| {
            let g = grid1(Axis::periodic(0.0, 1.0, n));
            let f = RealField::from_fn(g.clone(), 0.0, |q| (2.0 * PI * q[0]).sin()).unwrap();
            let d = gradient(&f, 0).unwrap();
            (0..n).map(|p| (d.values()[p] - 2.0 * PI * (2.0 * PI * g.coords(p)[0]).cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 3.9 && ratio < 4.1, "ratio {ratio}");
    }

    #[test]
    fn divergence_of_constant_vector_field_is_zero() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(0.0, 1.0, 8), Axis::periodic(0.0, 1.0, 8)]).unwrap());
        let v = vec![RealField::from_fn(g.clone(), 0.0, |_| 2.0).unwrap(), RealField::from_fn(g.clone(), 0.0, |_| -1.0).unwrap()];
        assert!(divergence(&v).unwrap().sup_norm() < 1e-14);
        assert!(matches!(divergence(&v[..1]), Err(Error::ComponentCount { expected: 2, got: 1 })));
    }

    #[test]
    fn integrate_constant_and_linearity() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 2.0, 8), Axis::periodic(0.0, 3.0, 6)]).unwrap());
        let one = RealField::from_fn(g.clone(), 0.0, |_| 1.0).unwrap();
        assert!((integrate(&one) - 6.0).abs() < 1e-12);
        let d = grid1(Axis::dirichlet(0.0, 1.0, 11));
        let lin = RealField::from_fn(d, 0.0, |q| q[0]).unwrap();
        assert!((integrate(&lin) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn cumulative_integral_of_one_is_distance_from_anchor() {
        let g = grid1(Axis::dirichlet(-2.0, 2.0, 41));
        let one = RealField::from_fn(g.clone(), 0.0, |_| 1.0).unwrap();
        let c = cumulative_integral(&one, 0, -2.0).unwrap();
        for p in 0..g.len() {
            assert!((c.values()[p] - (g.coords(p)[0] + 2.0)).abs() < 1e-13);
        }
        let c = cumulative_integral(&one, 0, 0.02).unwrap();
        assert_eq!(c.values()[20], 0.0);
        assert!(cumulative_integral(&one, 0, 2.5).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_linear_fields() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(0.0, 1.0, 6), Axis::dirichlet(-1.0, 1.0, 7)]).unwrap());
        let f = RealField::from_fn(g.clone(), 0.0, |q| 2.0 * q[0] - 3.0 * q[1] + 0.5).unwrap();
        let q = g.coords(17);
        assert!((f.interpolate(&q).unwrap() - f.values()[17]).abs() < 1e-14);
        let x = [0.337, -0.41];
        assert!((f.interpolate(&x).unwrap() - (2.0 * x[0] - 3.0 * x[1] + 0.5)).abs() < 1e-13);
        assert!(matches!(f.interpolate(&[1.2, 0.0]), Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let g = grid1(Axis::periodic(0.0, 1.0, 4));
        assert!(matches!(RealField::new(g.clone(), vec![0.0, f64::NAN, 0.0, 0.0], 0.0), Err(Error::NonFinite { index: 1 })));
        assert!(RealField::new(g, vec![0.0; 3], 0.0).is_err());
    }
}
