//! Two-slit interference: single landing sites at a screen line.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bohm::{born_density, sample_ensemble, Floor, FlowFrame, GuidanceFrame, Tracker};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::{Axis, Grid};
use crate::schrodinger::presets::double_slit;
use crate::schrodinger::{CnOptions, HamiltonianSpec, KineticSymbol, Propagator, Solver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DoubleSlit {
    pub x_range: [f64; 2],
    pub x_points: usize,
    pub y_range: [f64; 2],
    pub y_points: usize,
    pub separation: f64,
    pub slit_width: f64,
    pub y0: f64,
    pub sigma_y: f64,
    pub momentum_y: f64,
    pub hbar: f64,
    /// Step with the three-point kinetic symbol, whose group velocity matches the central-difference current.
    pub finite_difference_symbol: bool,
    /// Screen line `q₂ = L`, snapped to the nearest grid row.
    pub screen: f64,
    pub t_end: f64,
    pub dt: f64,
    pub dt_traj: f64,
    pub runs: usize,
    pub seed: u64,
    pub bins: usize,
    pub bin_range: [f64; 2],
}

impl Default for DoubleSlit {
    fn default() -> Self {
        Self {
            x_range: [-20.0, 20.0],
            x_points: 320,
            y_range: [-6.0, 42.0],
            y_points: 384,
            separation: 7.0,
            slit_width: 0.5,
            y0: 0.0,
            sigma_y: 1.0,
            momentum_y: 6.0,
            hbar: 1.0,
            finite_difference_symbol: true,
            screen: 18.0,
            t_end: 5.0,
            dt: 0.02,
            dt_traj: 0.01,
            runs: 5000,
            seed: 9,
            bins: 32,
            bin_range: [-12.0, 12.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct DoubleSlitReport {
    pub screen: f64,
    /// `(x, t)` of each run's first screen crossing, if any.
    pub landings: Vec<Option<(f64, f64)>>,
    /// Bin lower edges and width.
    pub bin_lower: f64,
    pub bin_width: f64,
    /// Counts per bin, then outside the bin range, then never landed.
    pub counts: Vec<u64>,
    /// Time-integrated screen flux per bin in the same layout.
    pub reference: Vec<f64>,
    pub tv: f64,
    /// Interior bins that are prominent local maxima.
    pub maxima: Vec<usize>,
    /// The subset of `maxima` whose bin centres lie between the slit images.
    pub maxima_between_images: Vec<usize>,
    pub separation: f64,
}

impl DoubleSlitReport {
    pub fn bin_center(&self, b: usize) -> f64 {
        self.bin_lower + (b as f64 + 0.5) * self.bin_width
    }

    pub fn landed(&self) -> usize {
        self.landings.iter().filter(|l| l.is_some()).count()
    }

    /// `run,x,t` rows; unlanded runs have empty fields.
    pub fn landings_csv(&self) -> String {
        let mut s = String::from("run,x,t\n");
        for (k, l) in self.landings.iter().enumerate() {
            match l {
                Some((x, t)) => writeln!(s, "{k},{x:.17e},{t:.17e}").unwrap(),
                None => writeln!(s, "{k},,").unwrap(),
            }
        }
        s
    }

    /// `bin,lower,upper,count,frequency,reference` rows, with `outside` and `none` as the last two.
    pub fn histogram_csv(&self) -> String {
        let n: u64 = self.counts.iter().sum();
        let mut s = String::from("bin,lower,upper,count,frequency,reference\n");
        let nb = self.counts.len() - 2;
        for (b, (&c, &r)) in self.counts.iter().zip(&self.reference).enumerate() {
            let f = c as f64 / n as f64;
            if b < nb {
                let lo = self.bin_lower + b as f64 * self.bin_width;
                writeln!(s, "{b},{lo},{},{c},{f},{r}", lo + self.bin_width).unwrap();
            } else {
                let name = if b == nb { "outside" } else { "none" };
                writeln!(s, "{name},,,{c},{f},{r}").unwrap();
            }
        }
        s
    }
}

impl fmt::Display for DoubleSlitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let centers = |v: &[usize]| v.iter().map(|&b| format!("{}", self.bin_center(b))).collect::<Vec<_>>().join(" ");
        writeln!(f, "runs = {}", self.landings.len())?;
        writeln!(f, "landed = {}", self.landed())?;
        writeln!(f, "screen = {}", self.screen)?;
        writeln!(f, "tv = {}", self.tv)?;
        writeln!(f, "maxima = {}", centers(&self.maxima))?;
        write!(f, "maxima_between_images = {}", centers(&self.maxima_between_images))
    }
}

/// Interior local maxima of `counts` whose topographic prominence is at least `3 √count`.
pub fn prominent_maxima(counts: &[u64]) -> Vec<usize> {
    let c: Vec<f64> = counts.iter().map(|&v| v as f64).collect();
    let n = c.len();
    let mut out = Vec::new();
    for i in 1..n.saturating_sub(1) {
        if !(c[i] > c[i - 1] && c[i] >= c[i + 1]) {
            continue;
        }
        let mut left = c[i];
        for j in (0..i).rev() {
            if c[j] > c[i] {
                break;
            }
            left = left.min(c[j]);
        }
        let mut right = c[i];
        for &v in &c[i + 1..] {
            if v > c[i] {
                break;
            }
            right = right.min(v);
        }
        if c[i] - left.max(right) >= 3.0 * c[i].sqrt() {
            out.push(i);
        }
    }
    out
}

impl DoubleSlit {
    pub fn grid(&self) -> Result<Arc<Grid>> {
        Ok(Arc::new(Grid::new(vec![
            Axis::periodic(self.x_range[0], self.x_range[1], self.x_points),
            Axis::periodic(self.y_range[0], self.y_range[1], self.y_points),
        ])?))
    }

    pub fn initial(&self) -> Result<ComplexField> {
        double_slit(self.grid()?, self.separation, self.slit_width, self.y0, self.sigma_y, self.momentum_y, self.hbar)
    }

    /// Streams the wave function and the runs together, keeping two frames in memory.
    pub fn run(&self) -> Result<DoubleSlitReport> {
        if self.bins == 0 || !(self.bin_range[1] > self.bin_range[0]) {
            return Err(Error::InvalidArgument("histogram needs at least one bin over a non-empty range".into()));
        }
        if self.bin_range[0] < self.x_range[0] || self.bin_range[1] > self.x_range[1] {
            return Err(Error::InvalidArgument("histogram range must lie inside the grid".into()));
        }
        let psi0 = self.initial()?;
        let grid = psi0.grid().clone();
        let yax = grid.axes()[1];
        let row = yax.nearest(self.screen).ok_or_else(|| Error::OutOfBounds(vec![self.screen]))?;
        let screen = yax.coordinate(row);
        if self.y0 + 3.0 * self.sigma_y >= screen {
            return Err(Error::InvalidArgument(format!("screen at {screen} overlaps the initial packet")));
        }
        let steps = crate::schrodinger::step_count(0.0, self.t_end, self.dt, 1)?;
        let spec = Arc::new(HamiltonianSpec::free(grid.clone(), self.hbar)?);
        let symbol = if self.finite_difference_symbol { KineticSymbol::FiniteDifference } else { KineticSymbol::Spectral };
        let mut prop = Propagator::with_options(spec, self.dt, Solver::SplitFourier, symbol, CnOptions::default())?;
        let mut psi = psi0.values().to_vec();

        let initial = sample_ensemble(&born_density(&psi0), self.runs, self.seed)?;
        let mut tracker = Tracker::new(grid.clone(), initial, 0.0)?;
        let mut landings: Vec<Option<(f64, f64)>> = vec![None; self.runs];
        let binner =
            Binner { lower: self.bin_range[0], width: (self.bin_range[1] - self.bin_range[0]) / self.bins as f64, bins: self.bins };
        let mut flux = vec![0.0; self.bins + 1];

        let mut flow = FlowFrame::from_psi(&psi0, self.hbar)?;
        let mut frame = GuidanceFrame::from_flow(&flow, Floor::default())?;
        for k in 0..steps {
            let t1 = (k + 1) as f64 * self.dt;
            prop.step_in_place(&mut psi, k as f64 * self.dt)?;
            let next_flow = FlowFrame::from_psi(&ComplexField::new(grid.clone(), psi.clone(), t1)?, self.hbar)?;
            let next = GuidanceFrame::from_flow(&next_flow, Floor::default())?;
            for f in [&flow, &next_flow] {
                accumulate_flux(&mut flux, &binner, &grid, f.currents[1].values(), row, 0.5 * self.dt);
            }
            let before = tracker.positions().to_vec();
            tracker.advance(&frame, &next, self.dt_traj)?;
            let after = tracker.positions();
            for (i, land) in landings.iter_mut().enumerate() {
                if land.is_some() {
                    continue;
                }
                let (a, b) = (&before[2 * i..2 * i + 2], &after[2 * i..2 * i + 2]);
                if a[1] < screen && b[1] >= screen {
                    let s = (screen - a[1]) / (b[1] - a[1]);
                    let dx = grid.displacement(a, b)[0];
                    let x = grid.axes()[0].wrap(a[0] + s * dx);
                    *land = Some((x, t1 - self.dt + s * self.dt));
                }
            }
            flow = next_flow;
            frame = next;
        }

        let mut counts = vec![0u64; self.bins + 2];
        for l in &landings {
            match l {
                Some((x, _)) => counts[binner.bin(*x)] += 1,
                None => counts[self.bins + 1] += 1,
            }
        }
        let landed_mass: f64 = flux.iter().sum();
        let mut reference = flux;
        reference.push(1.0 - landed_mass);
        let n = self.runs as f64;
        let tv = 0.5 * counts.iter().zip(&reference).map(|(&c, &r)| (c as f64 / n - r).abs()).sum::<f64>();
        let maxima = prominent_maxima(&counts[..self.bins]);
        let half = 0.5 * self.separation;
        let center = |b: usize| binner.lower + (b as f64 + 0.5) * binner.width;
        let maxima_between_images = maxima.iter().copied().filter(|&b| center(b).abs() < half).collect();
        Ok(DoubleSlitReport {
            screen,
            landings,
            bin_lower: binner.lower,
            bin_width: binner.width,
            counts,
            reference,
            tv,
            maxima,
            maxima_between_images,
            separation: self.separation,
        })
    }
}

struct Binner {
    lower: f64,
    width: f64,
    bins: usize,
}

impl Binner {
    /// Bin index, or `bins` for positions outside the range.
    fn bin(&self, x: f64) -> usize {
        let u = (x - self.lower) / self.width;
        if u >= 0.0 && u < self.bins as f64 {
            u as usize
        } else {
            self.bins
        }
    }
}

/// Adds `weight × ∫ J_y dx` over the screen row to each bin, integrating the
/// linear interpolant of `J_y` over every overlap of node interval and bin.
fn accumulate_flux(flux: &mut [f64], binner: &Binner, grid: &Grid, jy: &[f64], row: usize, weight: f64) {
    let xax = grid.axes()[0];
    let h = xax.spacing();
    let at = |i: usize| jy[grid.flat_index(&[i % xax.count, row])];
    for i in 0..xax.count {
        let (x0, j0, j1) = (xax.coordinate(i), at(i), at(i + 1));
        let value = |x: f64| j0 + (j1 - j0) * (x - x0) / h;
        let mut cuts = vec![x0];
        cuts.extend((0..=binner.bins).map(|b| binner.lower + b as f64 * binner.width).filter(|&e| e > x0 && e < x0 + h));
        cuts.push(x0 + h);
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            flux[binner.bin(0.5 * (a + b))] += weight * 0.5 * (b - a) * (value(a) + value(b));
        }
    }
}
