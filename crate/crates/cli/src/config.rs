//! TOML run configuration. Every section is optional and unknown keys are rejected.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use pilotwave::gauge::GaugeFunction;
use pilotwave::hmm::{DensityProvider, HmmOptions};
use pilotwave::scenarios::{DoubleSlit, PhaseSpaceAudit};
use pilotwave::schrodinger::presets::{double_slit, gaussian_packet, harmonic_ground, plane_wave, two_packet, Packet};
use pilotwave::schrodinger::{HamiltonianSpec, Potential, Solver};
use pilotwave::{Axis, ComplexField, Grid, Metric, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Seed for sampling in `evolve`, `trajectories`, `gauge-compare` and `hmm-build`.
    pub seed: Option<u64>,
    pub grid: GridConfig,
    pub initial: InitialConfig,
    pub potential: PotentialConfig,
    pub solver: SolverConfig,
    pub trajectories: TrajectoryConfig,
    pub gauge: GaugeConfig,
    pub hmm: HmmConfig,
    pub double_slit: DoubleSlit,
    pub shoemaker: ShoemakerConfig,
    pub phase_space: PhaseSpaceAudit,
}

impl Config {
    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub axes: Vec<Axis>,
    /// Per-axis masses; the unit metric when absent.
    pub masses: Option<Vec<f64>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { axes: vec![Axis::periodic(-20.0, 20.0, 256)], masses: None }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<Grid>> {
        let metric = match &self.masses {
            Some(m) => Metric::masses(m),
            None => Metric::unit(self.axes.len()),
        };
        Ok(Arc::new(Grid::with_metric(self.axes.clone(), metric)?))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacketConfig {
    /// Zeros when absent.
    pub center: Option<Vec<f64>>,
    /// Ones when absent.
    pub sigma: Option<Vec<f64>>,
    /// Zeros when absent.
    pub momentum: Option<Vec<f64>>,
}

impl PacketConfig {
    fn packet(&self, dim: usize) -> Packet {
        let or = |v: &Option<Vec<f64>>, x: f64| v.clone().unwrap_or_else(|| vec![x; dim]);
        Packet::new(or(&self.center, 0.0), or(&self.sigma, 1.0), or(&self.momentum, 0.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialConfig {
    GaussianPacket(PacketConfig),
    TwoPacket {
        a: PacketConfig,
        b: PacketConfig,
        /// Complex weights as `[re, im]` pairs.
        #[serde(default = "unit_weights")]
        weights: [[f64; 2]; 2],
    },
    /// Ground state of the configured Hamiltonian.
    HarmonicGround,
    PlaneWave {
        momentum: Vec<f64>,
    },
    DoubleSlit {
        separation: f64,
        slit_width: f64,
        y0: f64,
        sigma_y: f64,
        momentum_y: f64,
    },
}

fn unit_weights() -> [[f64; 2]; 2] {
    [[1.0, 0.0], [1.0, 0.0]]
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::GaussianPacket(PacketConfig::default())
    }
}

impl InitialConfig {
    pub fn build(&self, spec: &HamiltonianSpec) -> Result<ComplexField> {
        let grid = spec.grid().clone();
        let (dim, hbar) = (grid.dim(), spec.hbar());
        match self {
            InitialConfig::GaussianPacket(p) => gaussian_packet(grid, &p.packet(dim), hbar),
            InitialConfig::TwoPacket { a, b, weights } => {
                let w = weights.map(|[re, im]| Complex64::new(re, im));
                two_packet(grid, &a.packet(dim), &b.packet(dim), w, hbar)
            }
            InitialConfig::HarmonicGround => harmonic_ground(spec),
            InitialConfig::PlaneWave { momentum } => plane_wave(grid, momentum, hbar),
            InitialConfig::DoubleSlit { separation, slit_width, y0, sigma_y, momentum_y } => {
                double_slit(grid, *separation, *slit_width, *y0, *sigma_y, *momentum_y, hbar)
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    None,
    Constant {
        value: f64,
    },
    /// `V = (k/2) Σ q_i²`.
    Harmonic {
        spring: f64,
    },
}

impl PotentialConfig {
    pub fn build(&self, grid: &Grid) -> Potential {
        match self {
            PotentialConfig::None => Potential::Zero,
            PotentialConfig::Constant { value } => Potential::Constant(*value),
            PotentialConfig::Harmonic { spring } => Potential::harmonic(grid, *spring),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: Solver,
    pub hbar: f64,
    pub t_end: f64,
    pub dt: f64,
    pub store_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { kind: Solver::Auto, hbar: 1.0, t_end: 1.0, dt: 0.005, store_every: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub particles: usize,
    pub dt_traj: f64,
    /// Resampled ensembles for the finite-N baseline.
    pub resamples: usize,
    /// Density floor in `J/ρ` as a multiple of each frame's maximum.
    pub floor: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self { particles: 10_000, dt_traj: 0.01, resamples: 16, floor: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaugeConfig {
    pub function: GaugeFunctionConfig,
    /// Grid cells merged per axis for histogram comparisons.
    pub histogram_block: usize,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        Self { function: GaugeFunctionConfig::AzimuthalWinding { winding: 2, core: 2.0 }, histogram_block: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GaugeFunctionConfig {
    Constant {
        value: f64,
    },
    /// `λ = p·q`.
    Linear {
        p: Vec<f64>,
    },
    /// `λ = a q_axis²`.
    Quadratic {
        axis: usize,
        a: f64,
    },
    /// `λ = α θ` with the current shift zeroed inside radius `core`.
    Azimuthal {
        alpha: f64,
        core: f64,
    },
    /// `λ = m ħ θ`, single-valued in `e^{iλ/ħ}`.
    AzimuthalWinding {
        winding: i32,
        core: f64,
    },
}

impl GaugeFunctionConfig {
    pub fn build(&self, hbar: f64) -> GaugeFunction {
        match self {
            GaugeFunctionConfig::Constant { value } => GaugeFunction::constant(*value),
            GaugeFunctionConfig::Linear { p } => GaugeFunction::linear(p.clone()),
            GaugeFunctionConfig::Quadratic { axis, a } => GaugeFunction::quadratic(*axis, *a),
            GaugeFunctionConfig::Azimuthal { alpha, core } => GaugeFunction::azimuthal(*alpha, *core),
            GaugeFunctionConfig::AzimuthalWinding { winding, core } => GaugeFunction::azimuthal_winding(*winding, hbar, *core),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmmConfig {
    pub density: DensityConfig,
    /// `c_i`, summing to 1; `1/n` each when absent.
    pub coefficients: Option<Vec<f64>>,
    /// Integration anchors `a_i`; each axis' lower bound when absent.
    pub anchors: Option<Vec<f64>>,
    pub derivative_dt: f64,
    pub allow_coefficient_violation: bool,
    pub t_end: f64,
    pub frame_dt: f64,
}

impl Default for HmmConfig {
    fn default() -> Self {
        let o = HmmOptions::default();
        Self {
            density: DensityConfig::MovingGaussian { x0: -1.0, velocity: 1.5, sigma: 1.0 },
            coefficients: o.coefficients,
            anchors: o.anchors,
            derivative_dt: o.derivative_dt,
            allow_coefficient_violation: o.allow_coefficient_violation,
            t_end: 1.0,
            frame_dt: 0.05,
        }
    }
}

impl HmmConfig {
    pub fn options(&self) -> HmmOptions {
        HmmOptions {
            coefficients: self.coefficients.clone(),
            anchors: self.anchors.clone(),
            derivative_dt: self.derivative_dt,
            allow_coefficient_violation: self.allow_coefficient_violation,
        }
    }

    pub fn frame_times(&self) -> Vec<f64> {
        let n = (self.t_end / self.frame_dt).round() as usize;
        (0..=n).map(|k| k as f64 * self.frame_dt).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityConfig {
    MovingGaussian {
        x0: f64,
        velocity: f64,
        sigma: f64,
    },
    BreathingGaussian {
        sigma: f64,
        eps: f64,
        omega: f64,
    },
    ShearedGaussian {
        kappa: f64,
        omega: f64,
    },
    /// `|Ψ|²` of the configured evolution.
    Evolved,
}

impl DensityConfig {
    /// The analytic provider on `grid`, or `None` for `evolved`.
    pub fn analytic(&self, grid: Arc<Grid>) -> Option<DensityProvider> {
        Some(match *self {
            DensityConfig::MovingGaussian { x0, velocity, sigma } => DensityProvider::moving_gaussian(grid, x0, velocity, sigma),
            DensityConfig::BreathingGaussian { sigma, eps, omega } => DensityProvider::breathing_gaussian(grid, sigma, eps, omega),
            DensityConfig::ShearedGaussian { kappa, omega } => DensityProvider::sheared_gaussian(grid, kappa, omega),
            DensityConfig::Evolved => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShoemakerConfig {
    pub years: u64,
    /// Clock offset in days.
    pub q0: f64,
    /// Clock offsets for the augmented-state search.
    pub offsets: Vec<f64>,
    /// Write the day-by-day trace.
    pub trace: bool,
}

impl Default for ShoemakerConfig {
    fn default() -> Self {
        Self { years: 61, q0: 0.0, offsets: vec![0.0, 41.0, 82.0], trace: true }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn empty_file_is_the_default() {
        assert_eq!(Config::parse("").unwrap(), Config::default());
    }

    #[test]
    fn tagged_sections_reject_unknown_keys() {
        assert!(Config::parse("[potential]\nkind = \"harmonic\"\nspring = 1.0\nmass = 2.0\n").is_err());
        assert!(Config::parse("[gauge.function]\nkind = \"spiral\"\n").is_err());
        assert!(Config::parse("[[grid.axes]]\nlower = 0.0\nupper = 1.0\ncount = 8\nboundary = \"periodic\"\nname = \"x\"\n").is_err());
        assert!(Config::parse("[double_slit]\nslits = 3\n").is_err());
    }

    #[test]
    fn packet_fields_default_per_dimension() {
        let p = PacketConfig { sigma: Some(vec![2.0, 3.0]), ..PacketConfig::default() }.packet(2);
        assert_eq!(p.center, vec![0.0, 0.0]);
        assert_eq!(p.sigma, vec![2.0, 3.0]);
        assert_eq!(p.momentum, vec![0.0, 0.0]);
    }

    #[test]
    fn shipped_configs_parse_and_build() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let c = Config::parse(&std::fs::read_to_string(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let grid = c.grid.build().unwrap();
            let spec = HamiltonianSpec::new(grid.clone(), c.potential.build(&grid), c.solver.hbar).unwrap();
            c.initial.build(&spec).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
        assert!(seen >= 5);
    }

    #[test]
    fn frame_times_span_the_horizon() {
        let h = HmmConfig { t_end: 1.0, frame_dt: 0.25, ..HmmConfig::default() };
        assert_eq!(h.frame_times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
