//! Particle ensembles: Born sampling and RK4 transport under a guidance field.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::guidance::{Floor, Guidance, GuidanceFrame};
use crate::error::{Error, Result};
use crate::field::RealField;
use crate::grid::Grid;
use crate::io::{read_axes, read_header, write_axes, write_header, Kind, Reader};
use crate::schrodinger::SnapshotSeries;

/// Deepest step-halving recursion before a step is accepted regardless.
const MAX_HALVINGS: u32 = 24;

/// Draws `count` positions from `ρ`: cells are chosen with probability
/// `ρ_p · w_p` and positions are uniform inside the chosen cell.
pub fn sample_ensemble(rho: &RealField, count: usize, seed: u64) -> Result<Vec<f64>> {
    let grid = rho.grid();
    if let Some((index, &value)) = rho.values().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeDensity { index, value });
    }
    let weights: Vec<f64> = rho.values().iter().enumerate().map(|(p, r)| r * grid.weight(p)).collect();
    if !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::EmptyDensity);
    }
    let picker = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = grid.dim();
    let mut out = Vec::with_capacity(count * dim);
    for _ in 0..count {
        let p = picker.sample(&mut rng);
        for a in 0..dim {
            let ax = &grid.axes()[a];
            let (lo, hi) = ax.cell(grid.index_along(p, a));
            let u: f64 = rng.random();
            out.push(ax.wrap(lo + u * (hi - lo)));
        }
    }
    Ok(out)
}

/// Paths of `N` particles recorded at a common list of times.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    grid: Arc<Grid>,
    times: Vec<f64>,
    /// `positions[k]` holds `N × n` coordinates at `times[k]`, particle-major.
    positions: Vec<Vec<f64>>,
    /// Time at which a particle left a Dirichlet axis, if it did.
    exits: Vec<Option<f64>>,
    seed: u64,
    source_hash: Option<String>,
    rejections: u64,
}

impl TrajectoryEnsemble {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.exits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exits.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source_hash(&self) -> Option<&str> {
        self.source_hash.as_deref()
    }

    pub fn with_source_hash(mut self, hash: impl Into<String>) -> Self {
        self.source_hash = Some(hash.into());
        self
    }

    /// All coordinates at stored time index `k`.
    pub fn positions_at(&self, k: usize) -> &[f64] {
        &self.positions[k]
    }

    pub fn final_positions(&self) -> &[f64] {
        &self.positions[self.positions.len() - 1]
    }

    pub fn particle(&self, i: usize, k: usize) -> &[f64] {
        let n = self.dim();
        &self.positions[k][i * n..(i + 1) * n]
    }

    pub fn exits(&self) -> &[Option<f64>] {
        &self.exits
    }

    pub fn exited_count(&self) -> usize {
        self.exits.iter().filter(|e| e.is_some()).count()
    }

    /// RK4 steps that were split because `|v| dt` exceeded twice the grid spacing.
    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// Index of the stored time closest to `t`.
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().enumerate().min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs())).map(|(k, _)| k)
    }

    /// `particle,t,q0,…` rows.
    pub fn to_csv(&self) -> String {
        let n = self.dim();
        let mut s = String::from("particle,t");
        for i in 0..n {
            write!(s, ",q{i}").unwrap();
        }
        s.push('\n');
        for i in 0..self.len() {
            for (k, t) in self.times.iter().enumerate() {
                write!(s, "{i},{t}").unwrap();
                for x in self.particle(i, k) {
                    write!(s, ",{x}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    /// Binary block: field-style header and axes, then `u64 N`, `u64 T`,
    /// `u64 seed`, `T` times, `T × N × n` coordinates, `N` exit times (NaN for none).
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(&mut out, Kind::Trajectory);
        write_axes(&mut out, &self.grid);
        for v in [self.len() as u64, self.times.len() as u64, self.seed] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for t in &self.times {
            out.extend_from_slice(&t.to_le_bytes());
        }
        for block in &self.positions {
            for x in block {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        for e in &self.exits {
            out.extend_from_slice(&e.unwrap_or(f64::NAN).to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if read_header(&mut r)? != Kind::Trajectory {
            return Err(Error::Format("not a trajectory block".into()));
        }
        let grid = Arc::new(Grid::new(read_axes(&mut r)?)?);
        let n = r.u64()? as usize;
        let count = r.u64()? as usize;
        let seed = r.u64()?;
        let dim = grid.dim();
        let times = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let positions = (0..count).map(|_| (0..n * dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
        let exits = (0..n).map(|_| r.f64().map(|e| if e.is_nan() { None } else { Some(e) })).collect::<Result<Vec<_>>>()?;
        if !r.is_done() {
            return Err(Error::Format("trailing bytes after trajectory block".into()));
        }
        Ok(Self { grid, times, positions, exits, seed, source_hash: None, rejections: 0 })
    }
}

/// Live particle state advanced frame by frame.
#[derive(Debug, Clone)]
pub struct Tracker {
    grid: Arc<Grid>,
    time: f64,
    positions: Vec<f64>,
    exits: Vec<Option<f64>>,
    rejections: u64,
}

struct Segment<'a> {
    a: &'a GuidanceFrame,
    b: &'a GuidanceFrame,
}

impl Segment<'_> {
    #[inline]
    fn velocity(&self, q: &[f64], t: f64, tmp: &mut [f64], out: &mut [f64]) -> Result<()> {
        let span = self.b.time() - self.a.time();
        let w = if span > 0.0 { ((t - self.a.time()) / span).clamp(0.0, 1.0) } else { 0.0 };
        self.a.velocity_into(q, out)?;
        if w > 0.0 {
            self.b.velocity_into(q, tmp)?;
            for (o, v) in out.iter_mut().zip(tmp.iter()) {
                *o = (1.0 - w) * *o + w * v;
            }
        }
        Ok(())
    }
}

enum StepOutcome {
    Done(u64),
    Exited(f64),
}

impl Tracker {
    pub fn new(grid: Arc<Grid>, positions: Vec<f64>, time: f64) -> Result<Self> {
        let dim = grid.dim();
        if !positions.len().is_multiple_of(dim) {
            return Err(Error::ComponentCount { expected: dim, got: positions.len() % dim });
        }
        let mut positions = positions;
        for q in positions.chunks_mut(dim) {
            grid.wrap(q);
            if !grid.contains(q) {
                return Err(Error::OutOfBounds(q.to_vec()));
            }
        }
        let n = positions.len() / dim;
        Ok(Self { grid, time, positions, exits: vec![None; n], rejections: 0 })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn exits(&self) -> &[Option<f64>] {
        &self.exits
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// Moves every active particle from frame `a`'s time to frame `b`'s.
    pub fn advance(&mut self, a: &GuidanceFrame, b: &GuidanceFrame, dt_traj: f64) -> Result<()> {
        if !(dt_traj > 0.0) {
            return Err(Error::InvalidArgument(format!("trajectory step must be positive, got {dt_traj}")));
        }
        if (a.time() - self.time).abs() > 1e-9 * (1.0 + self.time.abs()) {
            return Err(Error::InvalidArgument(format!("tracker at t = {} but segment starts at {}", self.time, a.time())));
        }
        let span = b.time() - a.time();
        if !(span > 0.0) {
            return Err(Error::InvalidArgument("segment must move forward in time".into()));
        }
        if dt_traj > span * (1.0 + 1e-12) {
            return Err(Error::InvalidArgument(format!("dt_traj = {dt_traj} exceeds the frame spacing {span}")));
        }
        let steps = (span / dt_traj - 1e-9).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let dim = self.grid.dim();
        let hmin = self.grid.min_spacing();
        let seg = Segment { a, b };
        let t0 = a.time();
        let grid = &self.grid;
        let results: Vec<Result<u64>> = self
            .positions
            .par_chunks_mut(dim)
            .zip(self.exits.par_iter_mut())
            .with_min_len(64)
            .map(|(q, exit)| {
                if exit.is_some() {
                    return Ok(0);
                }
                let mut rejected = 0;
                for s in 0..steps {
                    let t = t0 + s as f64 * h;
                    match rk4(&seg, grid, q, t, h, hmin, 0)? {
                        StepOutcome::Done(r) => rejected += r,
                        StepOutcome::Exited(te) => {
                            *exit = Some(te);
                            break;
                        }
                    }
                }
                Ok(rejected)
            })
            .collect();
        for r in results {
            self.rejections += r?;
        }
        self.time = b.time();
        Ok(())
    }
}

/// One classical RK4 step, split in two when a stage speed times `h` exceeds `2 h_min`.
fn rk4(seg: &Segment<'_>, grid: &Grid, q: &mut [f64], t: f64, h: f64, hmin: f64, depth: u32) -> Result<StepOutcome> {
    let dim = q.len();
    let mut k = [[0.0f64; crate::grid::MAX_DIM]; 4];
    let mut tmp = [0.0f64; crate::grid::MAX_DIM];
    let mut y = [0.0f64; crate::grid::MAX_DIM];
    let offsets = [0.0, 0.5, 0.5, 1.0];
    for s in 0..4 {
        for i in 0..dim {
            y[i] = if s == 0 { q[i] } else { q[i] + offsets[s] * h * k[s - 1][i] };
        }
        let mut ks = [0.0f64; crate::grid::MAX_DIM];
        match seg.velocity(&y[..dim], t + offsets[s] * h, &mut tmp[..dim], &mut ks[..dim]) {
            Ok(()) => {}
            Err(Error::OutOfBounds(_)) => {
                if depth < MAX_HALVINGS && h > 1e-12 {
                    return split(seg, grid, q, t, h, hmin, depth);
                }
                return Ok(StepOutcome::Exited(t));
            }
            Err(e) => return Err(e),
        }
        let speed = ks[..dim].iter().map(|v| v * v).sum::<f64>().sqrt();
        if speed * h > 2.0 * hmin && depth < MAX_HALVINGS {
            return split(seg, grid, q, t, h, hmin, depth);
        }
        k[s] = ks;
    }
    let mut next = [0.0f64; crate::grid::MAX_DIM];
    for i in 0..dim {
        next[i] = q[i] + h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
    grid.wrap(&mut next[..dim]);
    if !grid.contains(&next[..dim]) {
        return Ok(StepOutcome::Exited(t + h));
    }
    q.copy_from_slice(&next[..dim]);
    Ok(StepOutcome::Done(0))
}

fn split(seg: &Segment<'_>, grid: &Grid, q: &mut [f64], t: f64, h: f64, hmin: f64, depth: u32) -> Result<StepOutcome> {
    let mut total = 1;
    for half in 0..2 {
        match rk4(seg, grid, q, t + half as f64 * 0.5 * h, 0.5 * h, hmin, depth + 1)? {
            StepOutcome::Done(r) => total += r,
            exited => return Ok(exited),
        }
    }
    Ok(StepOutcome::Done(total))
}

/// Transports `initial` through every frame of `guidance`, recording at each frame time.
pub fn advance_with(guidance: &Guidance, initial: Vec<f64>, dt_traj: f64, seed: u64) -> Result<TrajectoryEnsemble> {
    let frames = guidance.frames();
    let grid = guidance.grid().clone();
    let mut tracker = Tracker::new(grid.clone(), initial, frames[0].time())?;
    let mut positions = vec![tracker.positions().to_vec()];
    for w in frames.windows(2) {
        tracker.advance(&w[0], &w[1], dt_traj)?;
        positions.push(tracker.positions().to_vec());
    }
    Ok(TrajectoryEnsemble {
        grid,
        times: guidance.times(),
        positions,
        exits: tracker.exits,
        seed,
        source_hash: None,
        rejections: tracker.rejections,
    })
}

/// Flows `initial` under the pilot wave of `series`.
pub fn advance_ensemble(series: &SnapshotSeries, initial: Vec<f64>, dt_traj: f64, floor: Floor, seed: u64) -> Result<TrajectoryEnsemble> {
    let guidance = Guidance::from_series(series, floor)?;
    let mut e = advance_with(&guidance, initial, dt_traj, seed)?;
    e.source_hash = series.config_hash().map(str::to_string);
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Axis;

    fn line() -> Arc<Grid> {
        Arc::new(Grid::new(vec![Axis::periodic(-5.0, 5.0, 50)]).unwrap())
    }

    #[test]
    fn concentrated_density_samples_one_cell() {
        let g = line();
        let mut v = vec![0.0; 50];
        v[17] = 3.0;
        let rho = RealField::new(g.clone(), v, 0.0).unwrap();
        let s = sample_ensemble(&rho, 500, 9).unwrap();
        let (lo, hi) = g.axes()[0].cell(17);
        assert!(s.iter().all(|&x| x >= lo && x <= hi));
    }

    #[test]
    fn sampling_is_deterministic_and_rejects_bad_densities() {
        let g = line();
        let rho = RealField::from_fn(g.clone(), 0.0, |q| (-q[0] * q[0]).exp()).unwrap();
        assert_eq!(sample_ensemble(&rho, 100, 4).unwrap(), sample_ensemble(&rho, 100, 4).unwrap());
        assert_ne!(sample_ensemble(&rho, 100, 4).unwrap(), sample_ensemble(&rho, 100, 5).unwrap());
        assert!(matches!(sample_ensemble(&RealField::zeros(g.clone(), 0.0), 10, 1), Err(Error::EmptyDensity)));
        let neg = rho.map(|v| v - 0.5).unwrap();
        assert!(matches!(sample_ensemble(&neg, 10, 1), Err(Error::NegativeDensity { .. })));
    }

    fn constant_frames(v: f64, times: &[f64]) -> Guidance {
        let g = line();
        let rho = RealField::from_fn(g.clone(), 0.0, |_| 0.1).unwrap();
        let j = rho.scale(v).unwrap();
        Guidance::new(
            times
                .iter()
                .map(|&t| GuidanceFrame::new(&rho.clone().with_time(t), &[j.clone().with_time(t)], Floor::default()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_velocity_displacement_and_wrapping() {
        let g = constant_frames(0.75, &[0.0, 0.5, 1.0, 1.5, 2.0]);
        let e = advance_with(&g, vec![-1.0, 4.5], 0.05, 0).unwrap();
        let last = e.final_positions();
        assert!((last[0] - 0.5).abs() < 1e-12);
        // 4.5 + 1.5 = 6.0 wraps to -4.0.
        assert!((last[1] + 4.0).abs() < 1e-12);
        assert_eq!(e.times().len(), 5);
    }

    #[test]
    fn zero_velocity_freezes_particles() {
        let g = constant_frames(0.0, &[0.0, 1.0]);
        let e = advance_with(&g, vec![0.3, -2.2], 0.1, 0).unwrap();
        assert_eq!(e.final_positions(), &[0.3, -2.2]);
    }

    #[test]
    fn dirichlet_exit_is_flagged_and_frozen() {
        let g = Arc::new(Grid::new(vec![Axis::dirichlet(0.0, 1.0, 11)]).unwrap());
        let rho = RealField::from_fn(g.clone(), 0.0, |_| 1.0).unwrap();
        let frames =
            [0.0, 0.6].map(|t| GuidanceFrame::new(&rho.clone().with_time(t), &[rho.clone().with_time(t)], Floor::default()).unwrap());
        let e = advance_with(&Guidance::new(frames.to_vec()).unwrap(), vec![0.5, 0.1], 0.05, 0).unwrap();
        assert_eq!(e.exited_count(), 1);
        assert!(e.exits()[0].unwrap() > 0.45 && e.exits()[0].unwrap() <= 0.5 + 1e-9);
        assert!(e.final_positions()[0] <= 1.0);
        assert!((e.final_positions()[1] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn binary_round_trip() {
        let g = constant_frames(0.2, &[0.0, 0.5]);
        let e = advance_with(&g, vec![0.0, 1.0, 2.0], 0.1, 77).unwrap();
        let back = TrajectoryEnsemble::decode(&e.encode()).unwrap();
        assert_eq!(back.final_positions(), e.final_positions());
        assert_eq!(back.seed(), 77);
        assert!(TrajectoryEnsemble::decode(&e.encode()[..20]).is_err());
    }

    #[test]
    fn dt_larger_than_frame_spacing_is_rejected() {
        let g = constant_frames(0.2, &[0.0, 0.5]);
        assert!(advance_with(&g, vec![0.0], 0.6, 0).is_err());
    }
}
