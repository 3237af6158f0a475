//! Deterministic hidden Markov models built from a prescribed time-dependent density.
//!
//! The latent field is `r = √ρ`, the currents are
//! `J_i = −c_i ∂_t ∫_{a_i}^{q_i} r² dq_i'` with `Σ c_i = 1`, and particles follow `J / r²`.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::sync::Arc;

use crate::bohm::{
    advance_with, continuity_residual_frames, equivariance_report, sample_ensemble, EquivarianceReport, Floor, FlowFrame, Guidance,
    TrajectoryEnsemble,
};
use crate::error::{Error, Result};
use crate::field::{cumulative_integral, integrate, RealField};
use crate::grid::Grid;
use crate::io;
use crate::schrodinger::{write_grid_spec, SnapshotSeries};

/// `ρ(q, t)` or `∂_t ρ(q, t)`.
pub type DensityFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Tolerance on `|∫ρ − 1|`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-4;
/// Tolerance on `|Σ c_i − 1|`.
pub const COEFFICIENT_TOLERANCE: f64 = 1e-12;

#[derive(Clone)]
pub enum DensityProvider {
    Analytic {
        descriptor: String,
        grid: Arc<Grid>,
        rho: DensityFn,
        drho_dt: Option<DensityFn>,
    },
    /// Frames with strictly increasing times on one grid, linearly interpolated in time.
    Tabulated {
        descriptor: String,
        frames: Vec<RealField>,
    },
}

impl fmt::Debug for DensityProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DensityProvider({})", self.descriptor())
    }
}

fn normal_pdf(x: f64, mean: f64, sigma: f64) -> f64 {
    let z = (x - mean) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

impl DensityProvider {
    pub fn analytic(descriptor: impl Into<String>, grid: Arc<Grid>, rho: DensityFn, drho_dt: Option<DensityFn>) -> Self {
        DensityProvider::Analytic { descriptor: descriptor.into(), grid, rho, drho_dt }
    }

    pub fn tabulated(descriptor: impl Into<String>, frames: Vec<RealField>) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::TooFewSamples { need: 2, got: frames.len() });
        }
        for w in frames.windows(2) {
            if !w[0].same_grid(&w[1]) {
                return Err(Error::GridMismatch);
            }
            if !(w[1].time() > w[0].time()) {
                return Err(Error::InvalidArgument("tabulated density times must increase strictly".into()));
            }
        }
        Ok(DensityProvider::Tabulated { descriptor: descriptor.into(), frames })
    }

    /// Born densities of a wave-function series.
    pub fn from_series(series: &SnapshotSeries) -> Result<Self> {
        let frames = series.snapshots().iter().map(crate::bohm::born_density).collect();
        Self::tabulated("born density of series", frames)
    }

    /// `N(q; x0 + v t, σ²)` on a one-dimensional grid.
    pub fn moving_gaussian(grid: Arc<Grid>, x0: f64, v: f64, sigma: f64) -> Self {
        let rho: DensityFn = Arc::new(move |q, t| normal_pdf(q[0], x0 + v * t, sigma));
        let drho: DensityFn = Arc::new(move |q, t| {
            let m = x0 + v * t;
            normal_pdf(q[0], m, sigma) * (q[0] - m) * v / (sigma * sigma)
        });
        Self::analytic(format!("moving gaussian x0={x0} v={v} sigma={sigma}"), grid, rho, Some(drho))
    }

    /// `N(q; 0, σ(t)²)` with `σ(t) = σ0 (1 + ε sin ωt)`.
    pub fn breathing_gaussian(grid: Arc<Grid>, sigma0: f64, eps: f64, omega: f64) -> Self {
        let sig = move |t: f64| sigma0 * (1.0 + eps * (omega * t).sin());
        let dsig = move |t: f64| sigma0 * eps * omega * (omega * t).cos();
        let rho: DensityFn = Arc::new(move |q, t| normal_pdf(q[0], 0.0, sig(t)));
        let drho: DensityFn = Arc::new(move |q, t| {
            let s = sig(t);
            normal_pdf(q[0], 0.0, s) * (q[0] * q[0] / (s * s) - 1.0) * dsig(t) / s
        });
        Self::analytic(format!("breathing gaussian sigma0={sigma0} eps={eps} omega={omega}"), grid, rho, Some(drho))
    }

    /// Unit-variance bivariate normal with correlation `κ(t) = κ0 sin ωt`; both marginals are static.
    pub fn sheared_gaussian(grid: Arc<Grid>, kappa0: f64, omega: f64) -> Self {
        let kap = move |t: f64| kappa0 * (omega * t).sin();
        let dkap = move |t: f64| kappa0 * omega * (omega * t).cos();
        let pdf = move |x: f64, y: f64, k: f64| {
            let s2 = 1.0 - k * k;
            (-(x * x - 2.0 * k * x * y + y * y) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2.sqrt())
        };
        let rho: DensityFn = Arc::new(move |q, t| pdf(q[0], q[1], kap(t)));
        let drho: DensityFn = Arc::new(move |q, t| {
            let (x, y, k) = (q[0], q[1], kap(t));
            let s2 = 1.0 - k * k;
            let quad = x * x - 2.0 * k * x * y + y * y;
            let dlog = x * y / s2 - quad * k / (s2 * s2) + k / s2;
            pdf(x, y, k) * dlog * dkap(t)
        });
        Self::analytic(format!("sheared gaussian kappa0={kappa0} omega={omega}"), grid, rho, Some(drho))
    }

    pub fn descriptor(&self) -> &str {
        match self {
            DensityProvider::Analytic { descriptor, .. } | DensityProvider::Tabulated { descriptor, .. } => descriptor,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        match self {
            DensityProvider::Analytic { grid, .. } => grid,
            DensityProvider::Tabulated { frames, .. } => frames[0].grid(),
        }
    }

    /// Time range covered; unbounded for analytic densities.
    pub fn span(&self) -> (f64, f64) {
        match self {
            DensityProvider::Analytic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            DensityProvider::Tabulated { frames, .. } => (frames[0].time(), frames[frames.len() - 1].time()),
        }
    }

    fn bracket(frames: &[RealField], t: f64) -> Result<(usize, f64)> {
        let (t0, t1) = (frames[0].time(), frames[frames.len() - 1].time());
        let slack = 1e-9 * (t1 - t0);
        if t < t0 - slack || t > t1 + slack {
            return Err(Error::InvalidArgument(format!("time {t} outside tabulated range [{t0}, {t1}]")));
        }
        let k = frames.partition_point(|f| f.time() <= t).clamp(1, frames.len() - 1) - 1;
        let (a, b) = (frames[k].time(), frames[k + 1].time());
        Ok((k, ((t - a) / (b - a)).clamp(0.0, 1.0)))
    }

    /// `ρ(·, t)` on the grid.
    pub fn density(&self, t: f64) -> Result<RealField> {
        match self {
            DensityProvider::Analytic { grid, rho, .. } => RealField::from_fn(grid.clone(), t, |q| rho(q, t)),
            DensityProvider::Tabulated { frames, .. } => {
                let (k, w) = Self::bracket(frames, t)?;
                Ok(frames[k].zip_map(&frames[k + 1], |a, b| (1.0 - w) * a + w * b)?.with_time(t))
            }
        }
    }

    /// `∂_t ρ(·, t)`: analytic when available, else centered over `dt` (analytic)
    /// or over the stored spacing (tabulated, one-sided at the ends).
    pub fn time_derivative(&self, t: f64, dt: f64) -> Result<RealField> {
        match self {
            DensityProvider::Analytic { grid, drho_dt: Some(d), .. } => RealField::from_fn(grid.clone(), t, |q| d(q, t)),
            DensityProvider::Analytic { .. } => {
                let (a, b) = (self.density(t - dt)?, self.density(t + dt)?);
                Ok(b.zip_map(&a, |x, y| (x - y) / (2.0 * dt))?.with_time(t))
            }
            DensityProvider::Tabulated { frames, .. } => {
                let n = frames.len();
                let tol = 1e-9 * (frames[n - 1].time() - frames[0].time());
                let (k, w) = Self::bracket(frames, t)?;
                let on_node = if w * (frames[k + 1].time() - frames[k].time()) <= tol {
                    Some(k)
                } else if (1.0 - w) * (frames[k + 1].time() - frames[k].time()) <= tol {
                    Some(k + 1)
                } else {
                    None
                };
                let (lo, hi) = match on_node {
                    Some(j) => (j.saturating_sub(1), (j + 1).min(n - 1)),
                    None => (k, k + 1),
                };
                let span = frames[hi].time() - frames[lo].time();
                Ok(frames[hi].zip_map(&frames[lo], |x, y| (x - y) / span)?.with_time(t))
            }
        }
    }

    /// Non-negativity and normalization of `ρ(·, t)`.
    pub fn validate(&self, t: f64) -> Result<RealField> {
        let rho = self.density(t)?;
        if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeDensity { index, value });
        }
        let total = integrate(&rho);
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::NotNormalized(total));
        }
        Ok(rho)
    }
}

/// `r = √ρ(·, t)`.
pub fn build_r(provider: &DensityProvider, t: f64) -> Result<RealField> {
    let rho = provider.density(t)?;
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    rho.map(f64::sqrt)
}

fn check_coefficients(grid: &Grid, c: &[f64], a: &[f64], allow_violation: bool) -> Result<()> {
    let dim = grid.dim();
    if c.len() != dim {
        return Err(Error::ComponentCount { expected: dim, got: c.len() });
    }
    if a.len() != dim {
        return Err(Error::ComponentCount { expected: dim, got: a.len() });
    }
    let sum: f64 = c.iter().sum();
    if !allow_violation && (sum - 1.0).abs() > COEFFICIENT_TOLERANCE {
        return Err(Error::CoefficientSum(sum));
    }
    for (i, (&ai, ax)) in a.iter().zip(grid.axes()).enumerate() {
        if !(ai >= ax.lower && ai <= ax.upper) {
            return Err(Error::InvalidArgument(format!("anchor a_{i} = {ai} outside [{}, {}]", ax.lower, ax.upper)));
        }
    }
    Ok(())
}

/// `J_i(·, t) = −c_i ∫_{a_i}^{q_i} ∂_t ρ dq_i'`.
pub fn build_currents(provider: &DensityProvider, c: &[f64], a: &[f64], t: f64, dt: f64) -> Result<Vec<RealField>> {
    check_coefficients(provider.grid(), c, a, false)?;
    currents_unchecked(provider, c, a, t, dt)
}

fn currents_unchecked(provider: &DensityProvider, c: &[f64], a: &[f64], t: f64, dt: f64) -> Result<Vec<RealField>> {
    let drho = provider.time_derivative(t, dt)?;
    (0..c.len()).map(|i| cumulative_integral(&drho, i, a[i])?.scale(-c[i])).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct HmmOptions {
    /// Defaults to `1/n` each.
    pub coefficients: Option<Vec<f64>>,
    /// Defaults to each axis' lower bound.
    pub anchors: Option<Vec<f64>>,
    /// Half-width of the centered time difference when no analytic `∂_t ρ` exists.
    pub derivative_dt: f64,
    /// Builds the model even when `Σ c_i ≠ 1` (for negative controls).
    pub allow_coefficient_violation: bool,
}

impl Default for HmmOptions {
    fn default() -> Self {
        Self { coefficients: None, anchors: None, derivative_dt: 1e-4, allow_coefficient_violation: false }
    }
}

#[derive(Debug, Clone)]
pub struct HmmModel {
    pub descriptor: String,
    pub c: Vec<f64>,
    pub a: Vec<f64>,
    /// Latent field at each build time.
    pub r: Vec<RealField>,
    /// `(ρ, J)` at each build time.
    pub flows: Vec<FlowFrame>,
    /// `sup |r² − ρ|` over the build times.
    pub r_residual: f64,
    /// Discrete continuity residual, when at least three frames exist.
    pub continuity_residual: Option<f64>,
    pub config_hash: Option<String>,
}

impl HmmModel {
    pub fn grid(&self) -> &Arc<Grid> {
        self.flows[0].density.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.flows.iter().map(FlowFrame::time).collect()
    }

    pub fn coefficient_sum(&self) -> f64 {
        self.c.iter().sum()
    }

    pub fn manifest(&self) -> String {
        let fmt_list = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" ");
        let mut m = String::new();
        writeln!(m, "format = pilotwave-hmm 1").unwrap();
        writeln!(m, "density = {}", self.descriptor).unwrap();
        writeln!(m, "config_hash = {}", self.config_hash.as_deref().unwrap_or("none")).unwrap();
        writeln!(m, "c = {}", fmt_list(&self.c)).unwrap();
        writeln!(m, "a = {}", fmt_list(&self.a)).unwrap();
        write_grid_spec(&mut m, self.grid());
        writeln!(m, "frames = {}", self.flows.len()).unwrap();
        writeln!(m, "r_residual = {:e}", self.r_residual).unwrap();
        match self.continuity_residual {
            Some(c) => writeln!(m, "continuity_residual = {c:e}").unwrap(),
            None => writeln!(m, "continuity_residual = none").unwrap(),
        }
        m
    }

    /// Writes the manifest plus density and current files per frame.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut m = self.manifest();
        for (k, f) in self.flows.iter().enumerate() {
            let name = format!("rho_{k:05}.pwf");
            io::write_field(&dir.join(&name), &f.density)?;
            writeln!(m, "frame.{k} = {} {name}", f.time()).unwrap();
            for (i, j) in f.currents.iter().enumerate() {
                io::write_field(&dir.join(format!("j{i}_{k:05}.pwf")), j)?;
            }
        }
        std::fs::write(dir.join("manifest.txt"), m)?;
        Ok(())
    }
}

/// Builds `(r, J)` at each of `times` and audits the result.
pub fn build_model(provider: &DensityProvider, times: &[f64], opts: &HmmOptions) -> Result<HmmModel> {
    let grid = provider.grid().clone();
    let dim = grid.dim();
    if times.is_empty() {
        return Err(Error::TooFewSamples { need: 1, got: 0 });
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("build times must increase strictly".into()));
    }
    let c = opts.coefficients.clone().unwrap_or_else(|| vec![1.0 / dim as f64; dim]);
    let a = opts.anchors.clone().unwrap_or_else(|| grid.axes().iter().map(|ax| ax.lower).collect());
    check_coefficients(&grid, &c, &a, opts.allow_coefficient_violation)?;
    let mut r = Vec::with_capacity(times.len());
    let mut flows = Vec::with_capacity(times.len());
    let mut r_residual: f64 = 0.0;
    for &t in times {
        let rho = provider.validate(t)?;
        let rt = build_r(provider, t)?;
        for (x, y) in rt.values().iter().zip(rho.values()) {
            r_residual = r_residual.max((x * x - y).abs());
        }
        let currents = currents_unchecked(provider, &c, &a, t, opts.derivative_dt)?;
        r.push(rt);
        flows.push(FlowFrame { density: rho, currents });
    }
    let continuity_residual = if flows.len() >= 3 { Some(continuity_residual_frames(&flows)?) } else { None };
    Ok(HmmModel { descriptor: provider.descriptor().to_string(), c, a, r, flows, r_residual, continuity_residual, config_hash: None })
}

/// The guidance field `J / r²` over the model's frames.
pub fn hmm_velocity(model: &HmmModel, floor: Floor) -> Result<Guidance> {
    Guidance::from_flows(&model.flows, floor)
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub reports: Vec<EquivarianceReport>,
    /// Every stored time satisfies `tv ≤ factor × baseline`.
    pub certified: bool,
    pub factor: f64,
    pub ensemble: TrajectoryEnsemble,
}

impl Certification {
    pub fn max_tv(&self) -> f64 {
        self.reports.iter().map(|r| r.tv).fold(0.0, f64::max)
    }
}

impl fmt::Display for Certification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "certified = {}", self.certified)?;
        writeln!(f, "factor = {}", self.factor)?;
        for r in &self.reports {
            writeln!(f, "t = {} tv = {} baseline = {} ks = {:?}", r.time, r.tv, r.baseline, r.ks)?;
        }
        write!(f, "max_tv = {}", self.max_tv())
    }
}

/// Samples `n` particles from `ρ(·, t0)`, flows them and compares with `ρ` at every frame.
pub fn certify_equivariance(model: &HmmModel, n: usize, seed: u64, dt_traj: f64, floor: Floor, resamples: usize) -> Result<Certification> {
    let guidance = hmm_velocity(model, floor)?;
    let initial = sample_ensemble(&model.flows[0].density, n, seed)?;
    let ensemble = advance_with(&guidance, initial, dt_traj, seed)?;
    let reports = model
        .flows
        .iter()
        .enumerate()
        .map(|(k, f)| equivariance_report(ensemble.positions_at(k), &f.density, seed.wrapping_add(k as u64), resamples))
        .collect::<Result<Vec<_>>>()?;
    let factor = 2.0;
    let certified = reports.iter().all(|r| r.within(factor));
    Ok(Certification { reports, certified, factor, ensemble })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn line(lo: f64, hi: f64, n: usize) -> Arc<Grid> {
        Arc::new(Grid::new(vec![Axis::dirichlet(lo, hi, n)]).unwrap())
    }

    #[test]
    fn static_density_has_zero_current_and_constant_r() {
        let g = line(-8.0, 8.0, 321);
        let p = DensityProvider::moving_gaussian(g, 0.0, 0.0, 1.0);
        let m = build_model(&p, &[0.0, 0.5, 1.0], &HmmOptions::default()).unwrap();
        assert!(m.flows.iter().all(|f| f.currents[0].sup_norm() == 0.0));
        assert_eq!(m.r[0].values(), m.r[2].values());
        assert!(m.r_residual < 1e-12);
    }

    #[test]
    fn coefficient_sum_is_enforced() {
        let g = line(-8.0, 8.0, 101);
        let p = DensityProvider::moving_gaussian(g, 0.0, 1.0, 1.0);
        let bad = HmmOptions { coefficients: Some(vec![2.0]), ..HmmOptions::default() };
        assert!(matches!(build_model(&p, &[0.0], &bad), Err(Error::CoefficientSum(_))));
        let forced = HmmOptions { allow_coefficient_violation: true, ..bad };
        assert!(build_model(&p, &[0.0], &forced).is_ok());
        let far = HmmOptions { anchors: Some(vec![20.0]), ..HmmOptions::default() };
        assert!(build_model(&p, &[0.0], &far).is_err());
    }

    #[test]
    fn unnormalized_density_is_rejected() {
        let g = line(-1.0, 1.0, 101);
        let p = DensityProvider::moving_gaussian(g, 0.0, 1.0, 1.0);
        assert!(matches!(build_model(&p, &[0.0], &HmmOptions::default()), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn tabulated_and_analytic_paths_agree() {
        let g = line(-8.0, 10.0, 721);
        let p = DensityProvider::moving_gaussian(g, 0.0, 1.0, 1.0);
        let dt = 0.01;
        let frames = (0..=100).map(|k| p.density(k as f64 * dt).unwrap()).collect();
        let tab = DensityProvider::tabulated("table", frames).unwrap();
        let times = [0.2, 0.5, 0.8];
        let ma = build_model(&p, &times, &HmmOptions::default()).unwrap();
        let mt = build_model(&tab, &times, &HmmOptions::default()).unwrap();
        for (a, b) in ma.flows.iter().zip(&mt.flows) {
            let d = a.currents[0].zip_map(&b.currents[0], |x, y| (x - y).abs()).unwrap().max();
            // Centered difference error ~ v³ dt² / 6 · |ρ'''|.
            assert!(d < 1e-4, "{d}");
        }
        let mid = tab.density(0.505).unwrap();
        let exact = p.density(0.505).unwrap();
        let d = mid.zip_map(&exact, |x, y| (x - y).abs()).unwrap().max();
        assert!(d < 1e-4, "{d}");
    }

    #[test]
    fn anchor_shift_keeps_continuity() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(-6.0, 6.0, 97), Axis::dirichlet(-6.0, 6.0, 97)]).unwrap());
        let p = DensityProvider::sheared_gaussian(g, 0.5, 2.0);
        let times: Vec<f64> = (0..=10).map(|k| k as f64 * 0.05).collect();
        let base = build_model(&p, &times, &HmmOptions::default()).unwrap();
        let moved = HmmOptions { anchors: Some(vec![-1.0, 2.0]), ..HmmOptions::default() };
        let other = build_model(&p, &times, &moved).unwrap();
        let (r0, r1) = (base.continuity_residual.unwrap(), other.continuity_residual.unwrap());
        assert!((r0 - r1).abs() <= 0.05 * r0.max(r1), "{r0} {r1}");
    }
}
