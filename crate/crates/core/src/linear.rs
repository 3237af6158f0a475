//! Dense-vector kernels and a preconditioned BiCGSTAB solver for complex systems.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

const PAR_MIN: usize = 8192;

type C = Complex64;

/// `Σ conj(a_k) b_k`.
pub fn dot(a: &[C], b: &[C]) -> C {
    if a.len() < PAR_MIN {
        return a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    }
    // Fixed chunks keep the summation order independent of thread scheduling.
    let parts: Vec<C> =
        a.par_chunks(PAR_MIN / 4).zip(b.par_chunks(PAR_MIN / 4)).map(|(x, y)| x.iter().zip(y).map(|(x, y)| x.conj() * y).sum()).collect();
    parts.into_iter().sum()
}

pub fn norm(a: &[C]) -> f64 {
    if a.len() < PAR_MIN {
        return a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    }
    let parts: Vec<f64> = a.par_chunks(PAR_MIN / 4).map(|x| x.iter().map(|v| v.norm_sqr()).sum()).collect();
    parts.into_iter().sum::<f64>().sqrt()
}

/// Solves `A x = b` with right Jacobi preconditioning.
///
/// `apply(x, out)` writes `A x`; `inv_diag` holds `1 / A_kk`. `x` is the
/// initial guess on entry and the solution on exit. Convergence is declared
/// when `‖b − A x‖ ≤ tol`. Returns the iteration count.
pub fn bicgstab(apply: impl Fn(&[C], &mut [C]) + Sync, inv_diag: &[C], b: &[C], x: &mut [C], tol: f64, max_iter: usize) -> Result<usize> {
    let n = b.len();
    let mut r = vec![C::default(); n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut res = norm(&r);
    if res <= tol {
        return Ok(0);
    }
    let mut r_hat = r.clone();
    let mut p = vec![C::default(); n];
    let mut v = vec![C::default(); n];
    let mut y = vec![C::default(); n];
    let mut s = vec![C::default(); n];
    let mut z = vec![C::default(); n];
    let mut t = vec![C::default(); n];
    let (mut rho, mut alpha, mut omega) = (C::new(1.0, 0.0), C::new(1.0, 0.0), C::new(1.0, 0.0));
    let bnorm = norm(b).max(f64::MIN_POSITIVE);

    for it in 1..=max_iter {
        let mut rho_new = dot(&r_hat, &r);
        if rho_new.norm() <= 1e-300 * bnorm * bnorm {
            // Shadow residual became orthogonal; restart from the current residual.
            r_hat.copy_from_slice(&r);
            p.iter_mut().for_each(|v| *v = C::default());
            v.iter_mut().for_each(|v| *v = C::default());
            rho = C::new(1.0, 0.0);
            alpha = rho;
            omega = rho;
            rho_new = dot(&r_hat, &r);
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p.par_iter_mut().zip(r.par_iter().zip(v.par_iter())).for_each(|(p, (r, v))| *p = r + beta * (*p - omega * v));
        y.par_iter_mut().zip(p.par_iter().zip(inv_diag.par_iter())).for_each(|(y, (p, d))| *y = p * d);
        apply(&y, &mut v);
        let denom = dot(&r_hat, &v);
        if denom.norm() == 0.0 {
            return Err(Error::NoConvergence { iterations: it, residual: res / bnorm });
        }
        alpha = rho / denom;
        s.par_iter_mut().zip(r.par_iter().zip(v.par_iter())).for_each(|(s, (r, v))| *s = r - alpha * v);
        if norm(&s) <= tol {
            x.par_iter_mut().zip(y.par_iter()).for_each(|(x, y)| *x += alpha * y);
            return Ok(it);
        }
        z.par_iter_mut().zip(s.par_iter().zip(inv_diag.par_iter())).for_each(|(z, (s, d))| *z = s * d);
        apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt.norm() > 0.0 { dot(&t, &s) / tt } else { C::default() };
        x.par_iter_mut().zip(y.par_iter().zip(z.par_iter())).for_each(|(x, (y, z))| *x += alpha * y + omega * z);
        r.par_iter_mut().zip(s.par_iter().zip(t.par_iter())).for_each(|(r, (s, t))| *r = s - omega * t);
        res = norm(&r);
        if res <= tol {
            return Ok(it);
        }
        if omega.norm() == 0.0 {
            return Err(Error::NoConvergence { iterations: it, residual: res / bnorm });
        }
    }
    Err(Error::NoConvergence { iterations: max_iter, residual: res / bnorm })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_tridiagonal_shifted_system() {
        let n = 200;
        let z = C::new(0.0, 0.3);
        let apply = |x: &[C], out: &mut [C]| {
            for k in 0..n {
                let l = if k > 0 { x[k - 1] } else { C::default() };
                let r = if k + 1 < n { x[k + 1] } else { C::default() };
                out[k] = x[k] + z * (x[k] * 2.0 - l - r);
            }
        };
        let b: Vec<C> = (0..n).map(|k| C::new((k as f64 * 0.1).sin(), 0.2)).collect();
        let inv: Vec<C> = vec![C::new(1.0, 0.0) / (C::new(1.0, 0.0) + z * 2.0); n];
        let mut x = vec![C::default(); n];
        bicgstab(apply, &inv, &b, &mut x, 1e-12, 500).unwrap();
        let mut ax = vec![C::default(); n];
        apply(&x, &mut ax);
        let err: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-11, "residual {err}");
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let n = 400;
        let apply = |x: &[C], out: &mut [C]| {
            for k in 0..n {
                let l = if k > 0 { x[k - 1] } else { C::default() };
                let r = if k + 1 < n { x[k + 1] } else { C::default() };
                out[k] = x[k] * 2.0 - l - r;
            }
        };
        let b = vec![C::new(1.0, 0.0); n];
        let inv = vec![C::new(0.5, 0.0); n];
        let mut x = vec![C::default(); n];
        assert!(matches!(bicgstab(apply, &inv, &b, &mut x, 1e-14, 2), Err(Error::NoConvergence { .. })));
    }
}
