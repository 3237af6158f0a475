//! Time-ordered wave-function snapshots and their on-disk directory layout.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::Solver;
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealField};
use crate::grid::{Axis, Boundary, Grid, Metric};
use crate::io;

/// Relative tolerance on snapshot norms against the first snapshot.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    snapshots: Vec<ComplexField>,
    hbar: f64,
    dt: f64,
    solver: Solver,
    config_hash: Option<String>,
}

impl SnapshotSeries {
    pub fn new(snapshots: Vec<ComplexField>, hbar: f64, dt: f64, solver: Solver) -> Result<Self> {
        let first = snapshots.first().ok_or_else(|| Error::InvalidArgument("empty snapshot series".into()))?;
        let n0 = first.norm();
        for w in snapshots.windows(2) {
            if !(w[1].time() > w[0].time()) {
                return Err(Error::InvalidArgument(format!("snapshot times not strictly increasing at t = {}", w[1].time())));
            }
        }
        for s in &snapshots {
            if !s.same_grid(first) {
                return Err(Error::GridMismatch);
            }
            let n = s.norm();
            if (n - n0).abs() > NORM_TOLERANCE * n0.max(f64::MIN_POSITIVE) {
                return Err(Error::NotNormalized(n / n0));
            }
        }
        Ok(Self { snapshots, hbar, dt, solver, config_hash: None })
    }

    pub fn with_config_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = Some(hash.into());
        self
    }

    pub fn snapshots(&self) -> &[ComplexField] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.snapshots[0].grid()
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Integration time step.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Spacing between stored snapshots (0 for a single snapshot).
    pub fn store_dt(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            self.snapshots[1].time() - self.snapshots[0].time()
        }
    }

    pub fn solver(&self) -> Solver {
        self.solver
    }

    pub fn config_hash(&self) -> Option<&str> {
        self.config_hash.as_deref()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time()).collect()
    }

    pub fn first(&self) -> &ComplexField {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &ComplexField {
        &self.snapshots[self.len() - 1]
    }

    /// Largest relative deviation of any snapshot's squared norm from the first.
    pub fn norm_drift(&self) -> f64 {
        let n0 = self.first().norm().powi(2);
        self.snapshots.iter().map(|s| (s.norm().powi(2) - n0).abs() / n0).fold(0.0, f64::max)
    }

    /// Writes `manifest.txt` plus one binary file per snapshot into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let grid = self.grid();
        let mut m = String::new();
        let steps = if self.dt > 0.0 { ((self.last().time() - self.first().time()) / self.dt).round() as u64 } else { 0 };
        writeln!(m, "format = pilotwave-series 1").unwrap();
        writeln!(m, "hbar = {}", self.hbar).unwrap();
        writeln!(m, "dt = {}", self.dt).unwrap();
        writeln!(m, "steps = {steps}").unwrap();
        writeln!(m, "solver = {}", self.solver.id()).unwrap();
        writeln!(m, "config_hash = {}", self.config_hash.as_deref().unwrap_or("none")).unwrap();
        write_grid_spec(&mut m, grid);
        if let Metric::Field(comps) = grid.metric() {
            let n = grid.dim();
            for (c, vals) in comps.iter().enumerate() {
                let f = RealField::new(grid.clone(), vals.clone(), 0.0)?;
                io::write_field(&dir.join(format!("metric_{}{}.pwf", c / n, c % n)), &f)?;
            }
        }
        writeln!(m, "snapshots = {}", self.len()).unwrap();
        for (k, s) in self.snapshots.iter().enumerate() {
            let name = format!("snap_{k:05}.pwf");
            io::write_field(&dir.join(&name), s)?;
            writeln!(m, "snapshot.{k} = {} {name}", s.time()).unwrap();
        }
        std::fs::write(dir.join("manifest.txt"), m)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.txt"))?;
        let kv = parse_manifest(&text)?;
        let get = |k: &str| kv.get(k).ok_or_else(|| Error::Format(format!("manifest lacks {k}")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Format(format!("manifest key {k} is not a number"))) };
        if get("format")? != "pilotwave-series 1" {
            return Err(Error::Format("unsupported manifest format".into()));
        }
        let (axes, metric_kind) = read_grid_spec(&kv)?;
        let dim = axes.len();
        let metric = match metric_kind {
            Some(d) => Metric::Diagonal(d),
            None => {
                let mut comps = Vec::with_capacity(dim * dim);
                for c in 0..dim * dim {
                    let f = io::read_real(&dir.join(format!("metric_{}{}.pwf", c / dim, c % dim)))?;
                    comps.push(f.into_values());
                }
                Metric::Field(comps)
            }
        };
        let grid = Arc::new(Grid::with_metric(axes, metric.clone())?);
        let count: usize = get("snapshots")?.parse().map_err(|_| Error::Format("bad snapshot count".into()))?;
        let mut snaps = Vec::with_capacity(count);
        for k in 0..count {
            let entry = get(&format!("snapshot.{k}"))?;
            let name = entry.split_whitespace().nth(1).ok_or_else(|| Error::Format(format!("bad snapshot.{k}")))?;
            let f: ComplexField = io::read_field(&dir.join(name), Some(metric.clone()))?;
            if **f.grid() != *grid {
                return Err(Error::GridMismatch);
            }
            let t = f.time();
            snaps.push(ComplexField::new(grid.clone(), f.into_values(), t)?);
        }
        let mut s = Self::new(snaps, num("hbar")?, num("dt")?, Solver::parse(get("solver")?)?)?;
        let hash = get("config_hash")?;
        if hash != "none" {
            s.config_hash = Some(hash.clone());
        }
        Ok(s)
    }
}

/// `key = value` lines; `#` starts a comment.
pub(crate) fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut kv = BTreeMap::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Format(format!("manifest line {}: expected key = value", ln + 1)))?;
        kv.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(kv)
}

pub(crate) fn write_grid_spec(m: &mut String, grid: &Grid) {
    writeln!(m, "dim = {}", grid.dim()).unwrap();
    for (i, a) in grid.axes().iter().enumerate() {
        let b = match a.boundary {
            Boundary::Periodic => "periodic",
            Boundary::DirichletZero => "dirichlet-zero",
        };
        writeln!(m, "axis.{i} = {} {} {} {b}", a.lower, a.upper, a.count).unwrap();
    }
    match grid.metric() {
        Metric::Diagonal(d) => {
            let s: Vec<String> = d.iter().map(|x| format!("{x}")).collect();
            writeln!(m, "metric = diagonal {}", s.join(" ")).unwrap();
        }
        Metric::Field(_) => writeln!(m, "metric = field").unwrap(),
    }
}

/// Axes and, for a diagonal metric, its entries.
pub(crate) fn read_grid_spec(kv: &BTreeMap<String, String>) -> Result<(Vec<Axis>, Option<Vec<f64>>)> {
    let bad = |k: &str| Error::Format(format!("manifest key {k} malformed"));
    let dim: usize = kv.get("dim").and_then(|d| d.parse().ok()).ok_or_else(|| bad("dim"))?;
    let mut axes = Vec::with_capacity(dim);
    for i in 0..dim {
        let key = format!("axis.{i}");
        let v = kv.get(&key).ok_or_else(|| bad(&key))?;
        let parts: Vec<&str> = v.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(bad(&key));
        }
        let lower = parts[0].parse().map_err(|_| bad(&key))?;
        let upper = parts[1].parse().map_err(|_| bad(&key))?;
        let count = parts[2].parse().map_err(|_| bad(&key))?;
        let boundary = match parts[3] {
            "periodic" => Boundary::Periodic,
            "dirichlet-zero" => Boundary::DirichletZero,
            _ => return Err(bad(&key)),
        };
        axes.push(Axis { lower, upper, count, boundary });
    }
    let metric = kv.get("metric").ok_or_else(|| bad("metric"))?;
    let mut parts = metric.split_whitespace();
    match parts.next() {
        Some("diagonal") => {
            let d = parts.map(|x| x.parse().map_err(|_| bad("metric"))).collect::<Result<Vec<f64>>>()?;
            Ok((axes, Some(d)))
        }
        Some("field") => Ok((axes, None)),
        _ => Err(bad("metric")),
    }
}
