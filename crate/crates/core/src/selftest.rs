//! The acceptance suite: one check per criterion, each with a readable record.

use std::fmt::{self, Write as _};
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::gauge::hilbert::{apply_gauge_hilbert, covariant_derivative_residual, evolve_state, random_system, CVector};
use crate::scenarios::{DoubleSlit, FreePacket, GaugePair, HmmCases, PhaseSpaceAudit, StationaryHarmonic};
use crate::shoemaker::{audit_cycle, augmented_witness, full_pause_years, non_markov_witness};

/// Wall-clock budget for the whole suite.
pub const SUITE_BUDGET: Duration = Duration::from_secs(600);
/// Wall-clock budget for the free-packet equivariance run.
pub const EQUIVARIANCE_BUDGET: Duration = Duration::from_secs(60);

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    /// `key = value` lines.
    pub details: String,
    pub elapsed: Duration,
}

impl CriterionResult {
    pub fn status(&self) -> &'static str {
        if self.passed {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} criterion {:>2} {} ({:.1} s)", self.status(), self.id, self.name, self.elapsed.as_secs_f64())
    }
}

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let start = Instant::now();
    let (passed, details) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error = {e}\n")),
    };
    CriterionResult { id, name, passed, details, elapsed: start.elapsed() }
}

macro_rules! put {
    ($s:expr, $($arg:tt)*) => {
        writeln!($s, $($arg)*).unwrap()
    };
}

/// Free-packet equivariance; also returns the ensemble bytes for the reproducibility check.
pub fn equivariance() -> (CriterionResult, Option<(Vec<u8>, String)>) {
    let mut bytes = None;
    let r = timed(1, "equivariance of a free packet", || {
        let start = Instant::now();
        let run = FreePacket::default().run()?;
        let elapsed = start.elapsed();
        let mut s = String::new();
        for rep in &run.reports {
            put!(s, "tv.t{:.3} = {:.5} (baseline {:.5})", rep.time, rep.tv, rep.baseline);
        }
        put!(s, "max_tv = {}", run.max_tv());
        put!(s, "runtime_s = {:.2}", elapsed.as_secs_f64());
        bytes = Some((run.ensemble.encode(), run.ensemble.to_csv()));
        Ok((run.max_tv() < 0.05 && elapsed < EQUIVARIANCE_BUDGET, s))
    });
    (r, bytes)
}

pub fn continuity() -> CriterionResult {
    timed(2, "continuity convergence", || {
        let base = FreePacket { momentum: 2.0, points: 256, dt: 0.01, ..FreePacket::default() };
        let levels = base.continuity_refinement(3)?;
        let mut s = String::new();
        for l in &levels {
            put!(s, "residual.n{}.dt{} = {:e}", l.points, l.dt, l.residual);
        }
        let ratios: Vec<f64> = levels.windows(2).map(|w| w[0].residual / w[1].residual).collect();
        put!(s, "ratios = {ratios:?}");
        Ok((ratios.iter().all(|&r| r >= 3.5), s))
    })
}

pub fn stationary() -> CriterionResult {
    timed(3, "stationary harmonic ground state", || {
        let r = StationaryHarmonic::default().run()?;
        let mut s = String::new();
        put!(s, "density_drift = {:e}", r.density_drift);
        put!(s, "norm_drift = {:e}", r.norm_drift);
        put!(s, "max_displacement = {:e}", r.max_displacement);
        Ok((r.density_drift < 1e-6 && r.max_displacement < 1e-6, s))
    })
}

pub fn gauge_pair() -> CriterionResult {
    timed(4, "configuration-space gauge pair test", || {
        let r = GaugePair::default().run()?;
        let c = &r.comparison;
        let tolerance = r.integrator_tolerance.max(1e-6);
        let ratios = r.refinement_ratios();
        let finest = r.refinement.last().map_or(f64::INFINITY, |x| x.1);
        let checks = [
            ("a_density", r.density_defect < 1e-14),
            ("b_phase", r.phase_defect < 1e-10),
            ("c_deviation", c.overall_max_deviation() > 1e3 * tolerance),
            ("d_histograms", c.original.within(2.0) && c.gauged.within(2.0)),
            ("e_restriction", ratios.iter().all(|&q| q >= 3.5) && finest < crate::gauge::RESTRICTION_TOLERANCE),
            ("continuity", r.continuity_gauged <= 2.0 * r.continuity_original),
        ];
        let mut s = format!("{r}\n");
        put!(s, "refinement_ratios = {ratios:?}");
        for (k, ok) in checks {
            put!(s, "{k} = {}", if ok { "pass" } else { "fail" });
        }
        Ok((checks.iter().all(|c| c.1), s))
    })
}

pub fn hilbert_gauge() -> CriterionResult {
    timed(5, "abstract unitary frame invariance", || {
        let mut expectation: f64 = 0.0;
        let mut evolution: f64 = 0.0;
        let mut ratio_lo = f64::INFINITY;
        let mut ratio_hi: f64 = 0.0;
        for i in 0..100u64 {
            let d = 2 + (i % 7) as usize;
            let (sys, path) = random_system(d, 1000 + i)?;
            let g = apply_gauge_hilbert(&sys, &path, 0.0)?;
            for ((_, a), (_, b)) in sys.observables.iter().zip(&g.observables) {
                expectation = expectation.max((sys.expectation(a) - g.expectation(b)).abs());
            }
            let psi = sys.evolve(0.0, 1.0, 1000);
            let phi = g.evolve(0.0, 1.0, 1000);
            evolution = evolution.max((path.at(1.0) * psi - phi).norm());
            let res = |dt: f64| -> Result<f64> {
                let times: Vec<f64> = (0..=10).map(|k| k as f64 * dt).collect();
                let mut states: Vec<CVector> = vec![g.state.clone()];
                for w in times.windows(2) {
                    let next = evolve_state(&g.hamiltonian, g.hbar, states.last().unwrap(), w[0], w[1], 20);
                    states.push(next);
                }
                covariant_derivative_residual(&times, &states, &g.hamiltonian, g.hbar)
            };
            let q = res(0.02)? / res(0.01)?;
            ratio_lo = ratio_lo.min(q);
            ratio_hi = ratio_hi.max(q);
        }
        let mut s = String::new();
        put!(s, "systems = 100");
        put!(s, "max_expectation_change = {expectation:e}");
        put!(s, "max_frame_evolution_mismatch = {evolution:e}");
        put!(s, "covariant_ratio_range = [{ratio_lo:.3}, {ratio_hi:.3}]");
        Ok((expectation < 1e-10 && evolution < 1e-6 && ratio_lo >= 3.5 && ratio_hi <= 4.5, s))
    })
}

pub fn hmm_builder() -> CriterionResult {
    timed(6, "hidden-Markov-model builder", || {
        let cases = HmmCases::default();
        let v = cases.velocity_recovery()?;
        let moving = cases.certify(&cases.moving(cases.coarse_spacing)?)?;
        let breathing = cases.certify(&cases.breathing()?)?;
        let control = cases.coefficient_control()?;
        let sheared = cases.sheared_comparison()?;
        let mut s = String::new();
        put!(s, "velocity_error = {:e} ({} points)", v.velocity_error, v.points);
        put!(s, "moving_certified = {} max_tv = {}", moving.certified, moving.max_tv());
        put!(s, "breathing_certified = {} max_tv = {}", breathing.certified, breathing.max_tv());
        put!(s, "coefficient_sum_rejected = {}", control.rejected);
        put!(s, "forced_c2_certified = {} max_tv = {}", control.forced.certified, control.forced.max_tv());
        for ((label, rep), dev) in sheared.labels.iter().zip(&sheared.reports).zip(&sheared.deviations) {
            put!(s, "{label}: tv = {:.4} baseline = {:.4} deviation_from_first = {dev:.4}", rep.tv, rep.baseline);
        }
        let altered = sheared.deviations[1..].iter().all(|&d| d > 1e-2);
        let within = sheared.reports.iter().all(|r| r.within(2.0));
        let ok = v.velocity_error < 1e-6
            && moving.certified
            && moving.max_tv() < 0.05
            && breathing.certified
            && control.rejected
            && !control.forced.certified
            && altered
            && within;
        Ok((ok, s))
    })
}

pub fn shoemaker() -> CriterionResult {
    timed(7, "shoemaker universe", || {
        let witness = non_markov_witness(61);
        let none_before = non_markov_witness(60).is_none();
        let augmented = (0..3).all(|k| augmented_witness(k as f64 * 41.0, 61).is_none());
        let audit = audit_cycle(0.0);
        let pauses = full_pause_years(600);
        let expected: Vec<u64> = (1..=10).map(|k| 60 * k).collect();
        let mut s = String::new();
        match &witness {
            Some(w) => put!(s, "{w}"),
            None => put!(s, "witness = none"),
        }
        put!(s, "no_witness_within_60_years = {none_before}");
        put!(s, "augmented_markov = {augmented}");
        put!(s, "cycle_audit = {audit:?}");
        put!(s, "full_pause_years = {pauses:?}");
        Ok((witness.is_some() && none_before && augmented && audit.passes() && pauses == expected, s))
    })
}

pub fn strocchi_heslot() -> CriterionResult {
    timed(8, "classical phase-space form", || {
        let audit = PhaseSpaceAudit::default();
        let r = audit.run()?;
        Ok((r.passes(&audit), format!("{r}\n")))
    })
}

pub fn double_slit() -> CriterionResult {
    timed(9, "double-slit landing histogram", || {
        let r = DoubleSlit::default().run()?;
        let s = format!("{r}\n");
        Ok((r.tv < 0.05 && r.maxima_between_images.len() >= 3, s))
    })
}

/// Runs criteria 1 to 9, then the reproducibility and budget check.
pub fn run_all(mut progress: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let start = Instant::now();
    let mut out = Vec::new();
    let mut emit = |r: CriterionResult, out: &mut Vec<CriterionResult>| {
        progress(&r);
        out.push(r);
    };
    let (first, bytes) = equivariance();
    emit(first, &mut out);
    for f in [continuity, stationary, gauge_pair, hilbert_gauge, hmm_builder, shoemaker, strocchi_heslot, double_slit] {
        emit(f(), &mut out);
    }
    let r = timed(10, "suite budget and reproducibility", || {
        let again = FreePacket::default().run()?;
        let same = bytes.as_ref().is_some_and(|(b, c)| *b == again.ensemble.encode() && *c == again.ensemble.to_csv());
        let total = start.elapsed();
        let mut s = String::new();
        put!(s, "identical_bytes = {same}");
        put!(s, "suite_runtime_s = {:.1}", total.as_secs_f64());
        Ok((same && total < SUITE_BUDGET, s))
    });
    emit(r, &mut out);
    out
}
