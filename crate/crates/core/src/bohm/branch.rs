//! Splitting a density into connected super-threshold components.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::field::{ComplexField, Field, FieldValue, RealField};

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub label: usize,
    pub mask: Vec<bool>,
    /// Share of `∫ρ` carried by the component.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchDecomposition {
    /// Components by descending weight; labels follow this order.
    pub branches: Vec<Branch>,
    /// Share of `∫ρ` at points below the threshold.
    pub residual: f64,
}

/// Face-connected components of `{ρ > threshold}`, periodic axes wrapping.
pub fn branch_decompose(rho: &RealField, threshold: f64) -> Result<BranchDecomposition> {
    let grid = rho.grid();
    let max = rho.max();
    if !(threshold > 0.0 && threshold < max) {
        return Err(if max > 0.0 { Error::NoSupport } else { Error::EmptyDensity });
    }
    let v = rho.values();
    let w = grid.weights();
    let total: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
    let mut label = vec![usize::MAX; grid.len()];
    let mut comps: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut queue = VecDeque::new();
    for seed in 0..grid.len() {
        if v[seed] <= threshold || label[seed] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = Vec::new();
        let mut mass = 0.0;
        label[seed] = id;
        queue.push_back(seed);
        while let Some(p) = queue.pop_front() {
            members.push(p);
            mass += v[p] * w[p];
            for (a, ax) in grid.axes().iter().enumerate() {
                let s = grid.strides()[a];
                let k = grid.index_along(p, a);
                let n = ax.count;
                let mut try_push = |q: usize| {
                    if v[q] > threshold && label[q] == usize::MAX {
                        label[q] = id;
                        queue.push_back(q);
                    }
                };
                if k + 1 < n {
                    try_push(p + s);
                } else if ax.is_periodic() {
                    try_push(p + s - n * s);
                }
                if k > 0 {
                    try_push(p - s);
                } else if ax.is_periodic() {
                    try_push(p + (n - 1) * s);
                }
            }
        }
        comps.push((members, mass));
    }
    comps.sort_by(|a, b| b.1.total_cmp(&a.1));
    let captured: f64 = comps.iter().map(|c| c.1).sum();
    let branches = comps
        .into_iter()
        .enumerate()
        .map(|(label, (members, mass))| {
            let mut mask = vec![false; grid.len()];
            members.into_iter().for_each(|p| mask[p] = true);
            Branch { label, mask, weight: mass / total }
        })
        .collect();
    Ok(BranchDecomposition { branches, residual: (total - captured) / total })
}

/// Zeroes a field outside `mask`.
pub fn mask_field<T: FieldValue>(f: &Field<T>, mask: &[bool]) -> Result<Field<T>> {
    f.masked(mask)
}

/// Keeps only branch `keep` of `psi`, after growing its mask by `margin` cells
/// so the stencil around the component edge sees the original values.
pub fn isolate_branch(psi: &ComplexField, decomposition: &BranchDecomposition, keep: usize, margin: usize) -> Result<ComplexField> {
    let branch = decomposition.branches.get(keep).ok_or_else(|| Error::InvalidArgument(format!("no branch {keep}")))?;
    let grid = psi.grid();
    let mut mask = branch.mask.clone();
    for _ in 0..margin {
        let prev = mask.clone();
        for p in 0..grid.len() {
            if prev[p] {
                continue;
            }
            let touches = grid.axes().iter().enumerate().any(|(a, ax)| {
                let s = grid.strides()[a];
                let k = grid.index_along(p, a);
                let n = ax.count;
                let up = if k + 1 < n {
                    Some(p + s)
                } else if ax.is_periodic() {
                    Some(p + s - n * s)
                } else {
                    None
                };
                let dn = if k > 0 {
                    Some(p - s)
                } else if ax.is_periodic() {
                    Some(p + (n - 1) * s)
                } else {
                    None
                };
                up.is_some_and(|q| prev[q]) || dn.is_some_and(|q| prev[q])
            });
            if touches {
                mask[p] = true;
            }
        }
    }
    // Other branches are always removed, even where the margin reaches them.
    for (i, b) in decomposition.branches.iter().enumerate() {
        if i != keep {
            for (m, &o) in mask.iter_mut().zip(&b.mask) {
                if o {
                    *m = false;
                }
            }
        }
    }
    psi.masked(&mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Axis, Grid};
    use std::sync::Arc;

    #[test]
    fn two_bumps_give_two_branches() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(-10.0, 10.0, 400)]).unwrap());
        let pdf = |x: f64, m: f64| (-(x - m).powi(2) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let rho = RealField::from_fn(g, 0.0, |q| 0.5 * pdf(q[0], -5.0) + 0.5 * pdf(q[0], 5.0)).unwrap();
        let d = branch_decompose(&rho, 1e-4).unwrap();
        assert_eq!(d.branches.len(), 2);
        for b in &d.branches {
            assert!((b.weight - 0.5).abs() < 0.01);
        }
        let masks_disjoint = d.branches[0].mask.iter().zip(&d.branches[1].mask).all(|(a, b)| !(a & b));
        assert!(masks_disjoint);
        let total: f64 = d.branches.iter().map(|b| b.weight).sum::<f64>() + d.residual;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_wrap_joins_edge_cells() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 1.0, 10)]).unwrap());
        let mut v = vec![0.0; 10];
        v[0] = 1.0;
        v[9] = 1.0;
        let d = branch_decompose(&RealField::new(g, v, 0.0).unwrap(), 0.5).unwrap();
        assert_eq!(d.branches.len(), 1);
    }

    #[test]
    fn threshold_must_be_inside_range() {
        let g = Arc::new(Grid::new(vec![Axis::periodic(0.0, 1.0, 10)]).unwrap());
        let rho = RealField::from_fn(g, 0.0, |_| 1.0).unwrap();
        assert!(branch_decompose(&rho, 2.0).is_err());
        assert!(branch_decompose(&rho, 0.0).is_err());
    }
}
