use std::sync::Arc;

use pilotwave::bohm::{advance_ensemble, born_density, Floor, TrajectoryEnsemble};
use pilotwave::field::integrate;
use pilotwave::schrodinger::presets::{gaussian_packet, Packet};
use pilotwave::schrodinger::{evolve, HamiltonianSpec, Potential, SnapshotSeries, Solver};
use pilotwave::{Axis, ComplexField, Grid, RealField};

fn moments(rho: &RealField) -> (f64, f64) {
    let g = rho.grid().clone();
    let x = RealField::from_fn(g.clone(), 0.0, |q| q[0]).unwrap();
    let mean = integrate(&rho.zip_map(&x, |r, x| r * x).unwrap());
    let var = integrate(&rho.zip_map(&x, |r, x| r * (x - mean) * (x - mean)).unwrap());
    (mean, var)
}

fn line(lo: f64, hi: f64, n: usize) -> Arc<Grid> {
    Arc::new(Grid::new(vec![Axis::periodic(lo, hi, n)]).unwrap())
}

fn packet(g: Arc<Grid>, c: f64, s: f64, p: f64) -> ComplexField {
    gaussian_packet(g, &Packet::new(vec![c], vec![s], vec![p]), 1.0).unwrap()
}

/// `σ(t) = σ √(1 + (ħt / 2mσ²)²)` and `⟨x⟩ = c + pt/m`.
#[test]
fn free_packet_spreads_as_the_analytic_width() {
    let (c, s, p) = (-2.0, 1.0, 1.5);
    let psi = packet(line(-30.0, 30.0, 512), c, s, p);
    let spec = HamiltonianSpec::free(psi.grid().clone(), 1.0).unwrap();
    let series = evolve(&psi, &spec, 0.0, 2.0, 0.01, 50, Solver::SplitFourier).unwrap();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for snap in series.snapshots() {
        let t = snap.time();
        let (mean, var) = moments(&born_density(snap));
        let width = s * (1.0 + (t / (2.0 * s * s)).powi(2)).sqrt();
        worst.0 = worst.0.max((mean - (c + p * t)).abs());
        worst.1 = worst.1.max((var.sqrt() - width).abs() / width);
    }
    println!("free packet: mean error {:e}, relative width error {:e}", worst.0, worst.1);
    assert!(worst.0 < 1e-9 && worst.1 < 1e-9, "{worst:?}");
}

fn free_trajectory_error(points: usize, store_every: usize) -> f64 {
    let (c, s, p) = (0.5, 1.0, 1.0);
    let psi = packet(line(-30.0, 30.0, points), c, s, p);
    let spec = HamiltonianSpec::free(psi.grid().clone(), 1.0).unwrap();
    let series = evolve(&psi, &spec, 0.0, 2.0, 0.005, store_every, Solver::SplitFourier).unwrap();
    let starts: Vec<f64> = (-8..=8).map(|k| c + 0.25 * k as f64).collect();
    let e = advance_ensemble(&series, starts.clone(), 0.005, Floor::default(), 0).unwrap();
    let mut worst: f64 = 0.0;
    for (k, &t) in e.times().iter().enumerate() {
        let width = s * (1.0 + (t / (2.0 * s * s)).powi(2)).sqrt();
        for (i, q0) in starts.iter().enumerate() {
            let exact = c + p * t + (q0 - c) * width / s;
            worst = worst.max((e.particle(i, k)[0] - exact).abs());
        }
    }
    worst
}

/// Free Gaussian guidance: `q(t) = c + pt + (q₀ − c) σ(t)/σ`.
#[test]
fn free_trajectories_follow_the_scaling_solution() {
    let e: Vec<f64> = [512, 1024, 2048].iter().map(|&n| free_trajectory_error(n, 10)).collect();
    println!("free trajectories: errors {e:?}");
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.3..=4.7).contains(&ratio), "ratio {ratio}");
    }
    assert!(e[2] < 2e-3, "{e:?}");
}

/// Max centre and variance errors, and max path error against `q₀ + a(cos t − 1)`.
fn coherent_errors(points: usize) -> (f64, f64, f64) {
    let a = 2.0;
    let g = line(-20.0, 20.0, points);
    let spec = HamiltonianSpec::new(g.clone(), Potential::harmonic(&g, 1.0), 1.0).unwrap();
    let psi = packet(g, a, 0.5_f64.sqrt(), 0.0);
    let series = evolve(&psi, &spec, 0.0, 3.0, 0.005, 1, Solver::SplitFourier).unwrap();
    let mut centre: f64 = 0.0;
    let mut width: f64 = 0.0;
    for snap in series.snapshots() {
        let (mean, var) = moments(&born_density(snap));
        centre = centre.max((mean - a * snap.time().cos()).abs());
        width = width.max((var - 0.5).abs());
    }
    let starts: Vec<f64> = (-4..=4).map(|k| a + 0.3 * k as f64).collect();
    let e = advance_ensemble(&series, starts.clone(), 0.005, Floor::default(), 0).unwrap();
    let mut path: f64 = 0.0;
    for (k, &t) in e.times().iter().enumerate() {
        for (i, q0) in starts.iter().enumerate() {
            path = path.max((e.particle(i, k)[0] - (q0 + a * (t.cos() - 1.0))).abs());
        }
    }
    (centre, width, path)
}

/// A displaced oscillator ground state keeps its shape and every particle moves by `a(cos t − 1)`.
#[test]
fn coherent_state_moves_rigidly() {
    let runs: Vec<(f64, f64, f64)> = [256, 512, 1024].iter().map(|&n| coherent_errors(n)).collect();
    println!("coherent state: {runs:?}");
    let (centre, width, _) = runs[0];
    assert!(centre < 1e-4 && width < 1e-4, "{centre} {width}");
    for w in runs.windows(2) {
        let ratio = w[0].2 / w[1].2;
        assert!((3.3..=4.7).contains(&ratio), "path ratio {ratio}");
    }
    assert!(runs[2].2 < 1e-2, "{runs:?}");
}

#[test]
fn series_and_trajectories_round_trip_through_files() {
    let psi = packet(line(-10.0, 10.0, 64), 0.0, 1.0, 0.5);
    let spec = HamiltonianSpec::free(psi.grid().clone(), 1.0).unwrap();
    let series = evolve(&psi, &spec, 0.0, 0.2, 0.01, 5, Solver::Auto).unwrap().with_config_hash("abc");
    let dir = tempfile::tempdir().unwrap();
    series.save(dir.path()).unwrap();
    let back = SnapshotSeries::load(dir.path()).unwrap();
    assert_eq!(back.len(), series.len());
    assert_eq!(back.config_hash(), Some("abc"));
    assert_eq!(back.solver(), Solver::SplitFourier);
    for (a, b) in back.snapshots().iter().zip(series.snapshots()) {
        assert_eq!(a.values(), b.values());
        assert_eq!(a.time(), b.time());
    }
    let e = advance_ensemble(&series, vec![-1.0, 0.0, 1.0], 0.01, Floor::default(), 7).unwrap();
    assert_eq!(e.source_hash(), Some("abc"));
    let decoded = TrajectoryEnsemble::decode(&e.encode()).unwrap();
    assert_eq!(decoded.encode(), e.encode());
    assert_eq!(decoded.seed(), 7);
    assert_eq!(decoded.to_csv(), e.to_csv());
}
