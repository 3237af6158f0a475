//! One function per subcommand. Each writes its artifacts and returns the outcome.

use std::fmt::Write as _;

use pilotwave::bohm::{advance_ensemble, born_density, equivariance_report, sample_ensemble, EquivarianceReport, Floor, FlowFrame};
use pilotwave::gauge::gauge_velocity_shift;
use pilotwave::hmm::{build_model, certify_equivariance, DensityProvider};
use pilotwave::schrodinger::{evolve, HamiltonianSpec, SnapshotSeries};
use pilotwave::selftest::run_all;
use pilotwave::shoemaker::{audit_cycle, augmented_witness, full_pause_years, non_markov_witness, trace, trace_csv, DAYS_PER_YEAR};
use pilotwave::Result;

use crate::config::Config;
use crate::output::OutputDir;
use crate::Failure;

pub struct Run {
    pub config: Config,
    pub hash: String,
    pub seed: u64,
    pub out: OutputDir,
}

pub enum Outcome {
    Ok,
    /// The run completed but a certification or audit did not pass.
    Uncertified(String),
}

impl Run {
    fn floor(&self) -> Floor {
        Floor::Relative(self.config.trajectories.floor)
    }

    fn series(&self) -> Result<SnapshotSeries> {
        let c = &self.config;
        let grid = c.grid.build()?;
        let spec = HamiltonianSpec::new(grid.clone(), c.potential.build(&grid), c.solver.hbar)?;
        let psi0 = c.initial.build(&spec)?;
        let s = &c.solver;
        Ok(evolve(&psi0, &spec, 0.0, s.t_end, s.dt, s.store_every, s.kind)?.with_config_hash(&self.hash))
    }

    fn saved_series(&mut self) -> std::result::Result<SnapshotSeries, Failure> {
        let series = self.series()?;
        series.save(&self.out.artifact("series"))?;
        Ok(series)
    }
}

pub fn evolve_cmd(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let series = run.saved_series()?;
    let mut csv = String::from("t,norm\n");
    for s in series.snapshots() {
        writeln!(csv, "{},{}", s.time(), s.norm()).unwrap();
    }
    run.out.write("norms.csv", csv)?;
    println!("snapshots = {}", series.len());
    println!("solver = {}", series.solver().id());
    println!("norm_drift = {:e}", series.norm_drift());
    Ok(Outcome::Ok)
}

fn reports_text(reports: &[EquivarianceReport]) -> String {
    reports.iter().map(|r| format!("{r}\n")).collect::<Vec<_>>().join("\n")
}

pub fn trajectories(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let series = run.saved_series()?;
    let t = run.config.trajectories.clone();
    let initial = sample_ensemble(&born_density(series.first()), t.particles, run.seed)?;
    let ensemble = advance_ensemble(&series, initial, t.dt_traj, run.floor(), run.seed)?;
    let reports = series
        .snapshots()
        .iter()
        .enumerate()
        .map(|(k, s)| equivariance_report(ensemble.positions_at(k), &born_density(s), run.seed.wrapping_add(k as u64), t.resamples))
        .collect::<Result<Vec<_>>>()?;
    let max_tv = reports.iter().map(|r| r.tv).fold(0.0, f64::max);
    let mut summary = String::new();
    writeln!(summary, "config_hash = {}", run.hash).unwrap();
    writeln!(summary, "particles = {}", ensemble.len()).unwrap();
    writeln!(summary, "exited = {}", ensemble.exited_count()).unwrap();
    writeln!(summary, "max_tv = {max_tv}").unwrap();
    if ensemble.exited_count() > 0 {
        log::warn!("{} particles left the grid and were frozen", ensemble.exited_count());
    }
    run.out.write("trajectories.csv", ensemble.to_csv())?;
    run.out.write("trajectories.pwt", ensemble.encode())?;
    run.out.write("equivariance.txt", format!("{summary}\n{}", reports_text(&reports)))?;
    print!("{summary}");
    Ok(Outcome::Ok)
}

pub fn gauge_compare(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let series = run.saved_series()?;
    let hbar = series.hbar();
    let flows = series.snapshots().iter().map(|s| FlowFrame::from_psi(s, hbar)).collect::<Result<Vec<_>>>()?;
    let (t, g) = (run.config.trajectories.clone(), run.config.gauge.clone());
    let lambda = g.function.build(hbar);
    let initial = sample_ensemble(&flows[0].density, t.particles, run.seed)?;
    let mut cmp = gauge_velocity_shift(&flows, &lambda, initial, t.dt_traj, run.floor(), run.seed, t.resamples, g.histogram_block)?;
    cmp.config_hash = Some(run.hash.clone());
    let text = format!("{cmp}\n");
    run.out.write("comparison.txt", &text)?;
    run.out.write("original.csv", cmp.ensembles.0.to_csv())?;
    run.out.write("gauged.csv", cmp.ensembles.1.to_csv())?;
    print!("{text}");
    Ok(Outcome::Ok)
}

pub fn hmm_build(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let h = run.config.hmm.clone();
    let provider = match h.density.analytic(run.config.grid.build()?) {
        Some(p) => p,
        None => DensityProvider::from_series(&run.saved_series()?)?,
    };
    let mut model = build_model(&provider, &h.frame_times(), &h.options())?;
    model.config_hash = Some(run.hash.clone());
    model.save(&run.out.artifact("model"))?;
    let t = run.config.trajectories.clone();
    let cert = certify_equivariance(&model, t.particles, run.seed, t.dt_traj, run.floor(), t.resamples)?;
    let text = format!("density = {}\nconfig_hash = {}\n{cert}\n", model.descriptor, run.hash);
    run.out.write("certification.txt", &text)?;
    run.out.write("trajectories.csv", cert.ensemble.to_csv())?;
    print!("{text}");
    if cert.certified {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Uncertified(format!("equivariance not certified (max tv {})", cert.max_tv())))
    }
}

pub fn double_slit(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let report = run.config.double_slit.run()?;
    let text = format!("config_hash = {}\n{report}\n", run.hash);
    run.out.write("landings.csv", report.landings_csv())?;
    run.out.write("histogram.csv", report.histogram_csv())?;
    run.out.write("report.txt", &text)?;
    print!("{text}");
    Ok(Outcome::Ok)
}

pub fn shoemaker(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let s = run.config.shoemaker.clone();
    let mut text = String::new();
    writeln!(text, "config_hash = {}", run.hash).unwrap();
    writeln!(text, "years = {}", s.years).unwrap();
    match non_markov_witness(s.years) {
        Some(w) => writeln!(text, "{w}").unwrap(),
        None => writeln!(text, "witness = none").unwrap(),
    }
    let conflicts: Vec<_> = s.offsets.iter().filter_map(|&q| augmented_witness(q, s.years).map(|c| (q, c))).collect();
    writeln!(text, "augmented_markov = {}", conflicts.is_empty()).unwrap();
    for (q, (a, b)) in &conflicts {
        writeln!(text, "augmented_conflict.q0_{q} = steps {a} {b}").unwrap();
    }
    let audit = audit_cycle(s.q0);
    writeln!(text, "cycle_audit = {audit:?}").unwrap();
    writeln!(text, "full_pause_years = {:?}", full_pause_years(s.years)).unwrap();
    if s.trace {
        run.out.write("trace.csv", trace_csv(&trace(s.q0, s.years * DAYS_PER_YEAR)))?;
    }
    run.out.write("report.txt", &text)?;
    print!("{text}");
    if conflicts.is_empty() && audit.passes() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Uncertified("the clock-augmented process failed its audit".into()))
    }
}

pub fn phase_space(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let audit = run.config.phase_space.clone();
    let report = audit.run()?;
    let passes = report.passes(&audit);
    let text = format!("config_hash = {}\npasses = {passes}\n{report}\n", run.hash);
    run.out.write("report.txt", &text)?;
    print!("{text}");
    if passes {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Uncertified("phase-space audit failed".into()))
    }
}

pub fn selftest(run: &mut Run) -> std::result::Result<Outcome, Failure> {
    let mut text = String::new();
    let results = run_all(|r| {
        println!("{r}");
        let block: String = r.details.lines().map(|l| format!("    {l}\n")).collect();
        print!("{block}");
        writeln!(text, "{r}\n{block}").unwrap();
    });
    run.out.write("selftest.txt", &text)?;
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        Ok(Outcome::Uncertified(format!("criteria failed: {}", failed.join(", "))))
    }
}
