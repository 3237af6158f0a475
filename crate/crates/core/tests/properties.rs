use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pilotwave::bohm::{born_density, sample_ensemble, total_variation};
use pilotwave::gauge::hilbert::random_unitary;
use pilotwave::gauge::{apply_gauge_config, GaugeFunction};
use pilotwave::io::{content_hash, decode_field, encode_field};
use pilotwave::phase_space::{ho_frame_swap, symplectic_form, unitary_real_form};
use pilotwave::schrodinger::presets::{gaussian_packet, Packet};
use pilotwave::schrodinger::{evolve, HamiltonianSpec, Potential, Solver};
use pilotwave::shoemaker::{full_pause_years, paused_in};
use pilotwave::{Axis, ComplexField, Grid, RealField};

fn line(axis: Axis) -> Arc<Grid> {
    Arc::new(Grid::new(vec![axis]).unwrap())
}

fn packet(grid: Arc<Grid>, c: f64, s: f64, p: f64) -> ComplexField {
    gaussian_packet(grid, &Packet::new(vec![c], vec![s], vec![p]), 1.0).unwrap()
}

fn norm_sqr(psi: &ComplexField) -> f64 {
    psi.norm().powi(2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_step_preserves_norm(c in -3.0..3.0f64, s in 0.5..2.0f64, p in -2.0..2.0f64, dt in 0.001..0.05f64) {
        let g = line(Axis::periodic(-20.0, 20.0, 128));
        let psi = packet(g.clone(), c, s, p);
        let spec = HamiltonianSpec::new(g.clone(), Potential::harmonic(&g, 0.1), 1.0).unwrap();
        let series = evolve(&psi, &spec, 0.0, 20.0 * dt, dt, 20, Solver::SplitFourier).unwrap();
        prop_assert!((norm_sqr(series.last()) - norm_sqr(&psi)).abs() < 1e-12);
    }

    #[test]
    fn crank_nicolson_preserves_norm(c in -3.0..3.0f64, s in 0.5..2.0f64, p in -2.0..2.0f64, dt in 0.001..0.05f64) {
        let g = line(Axis::dirichlet(-15.0, 15.0, 121));
        let psi = packet(g.clone(), c, s, p);
        let spec = HamiltonianSpec::new(g.clone(), Potential::harmonic(&g, 0.5), 1.0).unwrap();
        let series = evolve(&psi, &spec, 0.0, 10.0 * dt, dt, 10, Solver::CrankNicolson).unwrap();
        prop_assert!((norm_sqr(series.last()) - norm_sqr(&psi)).abs() < 1e-9);
    }

    #[test]
    fn configuration_gauge_keeps_density(c in -3.0..3.0f64, p in -2.0..2.0f64, k in -3.0..3.0f64, a in -1.0..1.0f64, which in 0usize..3) {
        let g = line(Axis::periodic(-10.0, 10.0, 200));
        let psi = packet(g, c, 1.0, p);
        let lambda = match which {
            0 => GaugeFunction::constant(k),
            1 => GaugeFunction::linear(vec![k]),
            _ => GaugeFunction::quadratic(0, a),
        };
        let gauged = apply_gauge_config(&psi, &lambda, 0.0, 1.0).unwrap();
        let rho_max = born_density(&psi).max();
        for (x, y) in psi.values().iter().zip(gauged.values()) {
            prop_assert!((x.norm_sqr() - y.norm_sqr()).abs() <= 1e-15 * rho_max);
        }
    }

    #[test]
    fn total_variation_is_a_probability_distance(seed in 0u64..1000, n in 1usize..400, shift in -5.0..5.0f64) {
        let g = line(Axis::periodic(-10.0, 10.0, 64));
        let rho = born_density(&packet(g.clone(), 0.0, 1.0, 0.0));
        let other = born_density(&packet(g, shift, 1.5, 0.0));
        let positions = sample_ensemble(&other, n, seed).unwrap();
        let tv = total_variation(&positions, &rho).unwrap();
        prop_assert!((0.0..=1.0).contains(&tv));
    }

    #[test]
    fn born_samples_stay_on_the_grid(seed in 0u64..1000, c in -4.0..4.0f64) {
        let g = line(Axis::dirichlet(-8.0, 8.0, 81));
        let rho = born_density(&packet(g.clone(), c, 1.0, 0.0));
        let a = sample_ensemble(&rho, 200, seed).unwrap();
        prop_assert!(a.iter().all(|&x| g.contains(&[x])));
        prop_assert_eq!(a, sample_ensemble(&rho, 200, seed).unwrap());
    }

    #[test]
    fn binary_fields_round_trip_exactly(n0 in 4usize..9, n1 in 4usize..9, t in -10.0..10.0f64, seed in 0u64..1000) {
        let g = Arc::new(Grid::new(vec![Axis::periodic(-1.0, 2.0, n0), Axis::dirichlet(0.0, 1.0, n1)]).unwrap());
        let s = seed as f64;
        let f = ComplexField::from_fn(g.clone(), t, |q| Complex64::new((q[0] * s).sin(), q[1] * s + 0.1)).unwrap();
        let back = decode_field::<Complex64>(&encode_field(&f), None).unwrap();
        prop_assert_eq!(back.values(), f.values());
        prop_assert_eq!(back.time(), t);
        prop_assert_eq!(back.grid().axes(), g.axes());
        let r = RealField::from_fn(g, t, |q| q[0] - q[1] * s).unwrap();
        let r_back = decode_field::<f64>(&encode_field(&r), None).unwrap();
        prop_assert_eq!(r_back.values(), r.values());
    }

    #[test]
    fn unitaries_act_symplectically(d in 1usize..7, seed in 0u64..1000) {
        let u = random_unitary(d, &mut ChaCha8Rng::seed_from_u64(seed));
        let m = unitary_real_form(&u);
        let omega = symplectic_form(d);
        prop_assert!((m.transpose() * &omega * &m - &omega).amax() < 1e-12);
    }

    #[test]
    fn frame_swap_twice_is_parity(q in -5.0..5.0f64, p in -5.0..5.0f64, m in 0.1..10.0f64, k in 0.1..10.0f64) {
        let (q1, p1, m1, k1) = ho_frame_swap(q, p, m, k).unwrap();
        let (q2, p2, m2, k2) = ho_frame_swap(q1, p1, m1, k1).unwrap();
        prop_assert_eq!((q2, p2), (-q, -p));
        prop_assert!((m2 - m).abs() <= 1e-12 * m && (k2 - k).abs() <= 1e-12 * k);
    }

    #[test]
    fn pause_schedule_has_period_sixty(year in 1u64..10_000) {
        prop_assert_eq!(paused_in(year), paused_in(year + 60));
        prop_assert_eq!(paused_in(year).iter().all(|&p| p), year % 60 == 0);
    }

    #[test]
    fn full_pauses_are_multiples_of_sixty(years in 1u64..2000) {
        let expected: Vec<u64> = (1..=years / 60).map(|k| 60 * k).collect();
        prop_assert_eq!(full_pause_years(years), expected);
    }

    #[test]
    fn content_hash_sees_every_byte(bytes in proptest::collection::vec(any::<u8>(), 1..64), at in any::<prop::sample::Index>()) {
        let mut other = bytes.clone();
        let i = at.index(bytes.len());
        other[i] ^= 1;
        prop_assert_eq!(content_hash(&bytes).len(), 64);
        prop_assert_ne!(content_hash(&bytes), content_hash(&other));
    }
}
