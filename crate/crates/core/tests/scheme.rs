use ambo::energy::{EnergyModel, PhaseField};
use ambo::geometry::{build_geometry, Geometry, Shape};
use ambo::grid::{ScalarField, TorusGrid};
use ambo::kernel::{scale, Kernel};
use ambo::scheme::*;
use ambo::tensions::ModifiedTensions;
use proptest::prelude::*;

fn torus(n: usize) -> Geometry {
    build_geometry(&Shape::Torus, TorusGrid::new(2, n).unwrap(), None).unwrap()
}

fn band(n: usize) -> Geometry {
    build_geometry(&Shape::Band { lower: 0.1, upper: 0.7, axis: None }, TorusGrid::new(2, n).unwrap(), None).unwrap()
}

fn model(g: &Geometry, t: &ModifiedTensions, h: f64) -> EnergyModel {
    EnergyModel::new(g, t, scale(&Kernel::gaussian(2), g.grid(), h).unwrap()).unwrap()
}

#[test]
fn full_volume_selects_every_container_cell() {
    let g = band(128);
    let phi = ScalarField::from_fn(g.grid(), |x| x[0]);
    let t = volume_threshold(&phi, &g, g.omega_measure()).unwrap();
    assert_eq!(t.level, f64::INFINITY);
    assert_eq!(threshold_exact(&phi, t, &g).volume(), g.omega_measure());
    assert!(matches!(volume_threshold(&phi, &g, 2.0 * g.omega_measure()), Err(SchemeError::VolumeUnrepresentable { .. })));
}

#[test]
fn ties_are_broken_in_cell_order() {
    let g = torus(16);
    let phi = ScalarField::constant(g.grid(), 0.25);
    let w = g.grid().cell_volume();
    let t = volume_threshold(&phi, &g, 5.0 * w).unwrap();
    let u = threshold_exact(&phi, t, &g);
    let chosen: Vec<usize> = (0..g.grid().len()).filter(|&c| u.get(c) == 1.0).collect();
    assert_eq!(chosen, vec![0, 1, 2, 3, 4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volume_threshold_hits_target_within_one_cell(seed in 0u64..1000, frac in 0.01f64..0.99) {
        let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 32).unwrap(), Some(0.05)).unwrap();
        let phi = PhaseField::random(&g, seed).into_field();
        let m = frac * g.omega_measure();
        let t = volume_threshold(&phi, &g, m).unwrap();
        let u = threshold_exact(&phi, t, &g);
        prop_assert!((u.volume() - m).abs() <= g.grid().cell_volume() * (1.0 + 1e-12));
        prop_assert_eq!(u.volume() / g.grid().cell_volume(), t.count as f64);
        // Every selected cell lies at or below the level and every other cell at or above.
        for c in g.omega_cells() {
            if u.get(c) == 1.0 { prop_assert!(phi.get(c) <= t.level) } else { prop_assert!(phi.get(c) >= t.level) }
        }
    }

    #[test]
    fn unconstrained_steps_never_raise_energy(seed in 0u64..1000) {
        let g = torus(48);
        let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), 4e-3);
        let u = PhaseField::random_binary(&g, seed);
        let mut cfg = SchemeConfig::new(4e-3);
        cfg.preserve_volume = false;
        cfg.max_steps = 5;
        let tr = run(u, &cfg, &m).unwrap();
        prop_assert!(tr.energy_monotone);
    }

    #[test]
    fn reflection_symmetry_is_preserved(a in 0.12f64..0.3, b in 0.12f64..0.3) {
        let g = torus(64);
        let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), 2e-3);
        let u = PhaseField::from_predicate(&g, |x| ((x[0] - 0.5) / a).powi(2) + ((x[1] - 0.5) / b).powi(2) < 1.0);
        let mut cfg = SchemeConfig::new(2e-3);
        cfg.preserve_volume = false;
        cfg.max_steps = 4;
        cfg.stop_early = false;
        cfg.snapshot_every = 1;
        let tr = run(u, &cfg, &m).unwrap();
        let n = 64;
        for (_, s) in &tr.snapshots {
            for j in 0..n {
                for i in 0..n {
                    let c = g.grid().linear([i, j, 0]);
                    let r = g.grid().linear([n - 1 - i, j, 0]);
                    prop_assert_eq!(s.get(c), s.get(r));
                }
            }
        }
    }
}

#[test]
fn synthetic_caps_give_their_angles() {
    let g = band(512);
    for angle in [60.0, 90.0, 120.0] {
        let (u, level) = synthetic_cap(&g, 0.5, 0.2, angle).unwrap();
        let local = measure_contact_angle(&u, &level, &g, AngleMethod::default()).unwrap();
        assert!((local.left - angle).abs() < 0.5 && (local.right - angle).abs() < 0.5, "{angle}: {local:?}");
        let arc = measure_contact_angle(&u, &level, &g, AngleMethod::Arc { exclusion: 0.03 }).unwrap();
        assert!((arc.mean() - angle).abs() < 0.1, "{angle}: {arc:?}");
    }
}

#[test]
fn cap_straddling_the_seam_is_measured() {
    let g = band(256);
    // Level of the cap centred at x = 0, periodically wrapped.
    let cy = 0.1 - 0.2 * 100f64.to_radians().cos();
    let level = ScalarField::from_fn(g.grid(), |x| {
        let dx = x[0] - x[0].round();
        dx.hypot(x[1] - cy) - 0.2
    });
    let u = PhaseField::from_predicate(&g, |x| {
        let dx = x[0] - x[0].round();
        dx.hypot(x[1] - cy) < 0.2
    });
    let a = measure_contact_angle(&u, &level, &g, AngleMethod::default()).unwrap();
    assert!((a.mean() - 100.0).abs() < 1.0, "{a:?}");
}

#[test]
fn two_particles_are_rejected() {
    let g = band(128);
    let u = PhaseField::from_predicate(&g, |x| x[1] < 0.2 && ((x[0] - 0.3).abs() < 0.05 || (x[0] - 0.7).abs() < 0.05));
    let level = u.field().map(|v| 0.5 - v);
    assert_eq!(count_components(&u, &g), 2);
    assert!(matches!(measure_contact_angle(&u, &level, &g, AngleMethod::default()), Err(SchemeError::Contact(_))));
}

#[test]
fn neutral_wetting_keeps_a_right_angle() {
    let g = band(256);
    let h = 4e-3;
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.75, 0.75), h);
    let (u, _) = synthetic_cap(&g, 0.5, 0.25, 90.0).unwrap();
    let tr = run(u, &SchemeConfig::new(h), &m).unwrap();
    assert_eq!(tr.status, RunStatus::Stationary);
    let s = &tr.final_state;
    let a = measure_contact_angle(&s.u, &s.level_field(), &g, AngleMethod::Arc { exclusion: 3.0 * h.sqrt() }).unwrap();
    assert!((a.mean() - 90.0).abs() < 5.0, "{a:?}");
    for d in &tr.diagnostics {
        assert!((d.volume - tr.target_volume).abs() <= g.grid().cell_volume());
    }
}

#[test]
fn shrinking_circle_loses_area_at_rate_two_pi() {
    // dA/dt = -2 pi for curve shortening; one step advances time by h.
    let g = torus(256);
    let h = 1e-3;
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), h);
    let u = PhaseField::from_predicate(&g, |x| (x[0] - 0.5).hypot(x[1] - 0.5) < 0.3);
    let mut cfg = SchemeConfig::new(h);
    cfg.preserve_volume = false;
    cfg.max_steps = 10;
    let tr = run(u, &cfg, &m).unwrap();
    let d = &tr.diagnostics;
    let rate = (d[0].volume - d[10].volume) / (10.0 * h);
    assert!((rate / (2.0 * std::f64::consts::PI) - 1.0).abs() < 0.1, "rate {rate}");
    assert!(tr.energy_monotone);
}

#[test]
fn run_rejects_inconsistent_configuration() {
    let g = torus(32);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), 1e-2);
    let u = PhaseField::from_predicate(&g, |x| (x[0] - 0.5).hypot(x[1] - 0.5) < 0.2);
    assert!(matches!(run(u.clone(), &SchemeConfig::new(2e-2), &m), Err(SchemeError::Config(_))));
    let mut cfg = SchemeConfig::new(1e-2);
    cfg.target_volume = Some(0.0);
    assert!(matches!(run(u, &cfg, &m), Err(SchemeError::Config(_))));
}

#[test]
fn stationary_state_is_detected() {
    let g = torus(32);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), 1e-2);
    let u = PhaseField::from_predicate(&g, |x| (x[0] - 0.5).hypot(x[1] - 0.5) < 0.25);
    let tr = run(u, &SchemeConfig::new(1e-2), &m).unwrap();
    assert_eq!(tr.status, RunStatus::Stationary);
    let k = tr.diagnostics.len();
    assert!(k >= 4);
    assert_eq!(tr.diagnostics[k - 1].interface_cells, tr.diagnostics[k - 2].interface_cells);
}

#[test]
fn half_space_comparison_field_is_odd_across_the_interface() {
    let g = torus(64);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.7, 0.0, 0.0), 4e-3);
    let u = PhaseField::from_predicate(&g, |x| x[1] < 0.5);
    let phi = m.comparison_field(&u).unwrap();
    let grid = g.grid();
    for i in 0..64 {
        for j in 0..32 {
            let a = phi.get(grid.linear([i, j, 0]));
            let b = phi.get(grid.linear([i, 63 - j, 0]));
            assert!((a + b).abs() < 1e-8, "{a} {b}");
        }
    }
    let mut cfg = SchemeConfig::new(4e-3);
    cfg.preserve_volume = false;
    let tr = run(u.clone(), &cfg, &m).unwrap();
    assert_eq!(tr.status, RunStatus::Stationary);
    assert_eq!(tr.final_state.u, u);
}

#[test]
fn equal_substrate_tensions_cancel() {
    let g = band(128);
    let u = synthetic_cap(&g, 0.5, 0.2, 90.0).unwrap().0;
    let without = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), 4e-3).comparison_field(&u).unwrap();
    let with = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.6, 0.6), 4e-3).comparison_field(&u).unwrap();
    assert_eq!(without, with);
}

#[test]
fn increasing_field_gives_exact_quantile() {
    let g = torus(32);
    let phi = ScalarField::from_values(g.grid(), (0..1024).map(|c| c as f64 * 0.5).collect()).unwrap();
    let w = g.grid().cell_volume();
    let t = volume_threshold(&phi, &g, 100.0 * w).unwrap();
    assert_eq!(t.level, 99.0 * 0.5);
    assert_eq!(threshold_exact(&phi, t, &g).volume(), 100.0 * w);
}

#[test]
fn radial_field_selects_a_centred_disk() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.4 }, TorusGrid::new(2, 128).unwrap(), None).unwrap();
    let phi = ScalarField::from_fn(g.grid(), |x| (x[0] - 0.5).hypot(x[1] - 0.5));
    let m = std::f64::consts::PI * 0.2 * 0.2;
    let t = volume_threshold(&phi, &g, m).unwrap();
    let u = threshold_exact(&phi, t, &g);
    // Brute-force oracle: sort the container cells by distance.
    let mut cells = g.omega_cells();
    cells.sort_by(|&a, &b| phi.get(a).total_cmp(&phi.get(b)).then(a.cmp(&b)));
    let k = t.count;
    for (rank, &c) in cells.iter().enumerate() {
        assert_eq!(u.get(c) == 1.0, rank < k);
    }
    assert!((u.volume() - m).abs() <= g.grid().cell_volume());
}

#[test]
fn threshold_sentinels_and_idempotence() {
    let g = band(128);
    let phi = PhaseField::random(&g, 4).into_field().map(|v| v - 0.5);
    assert_eq!(threshold(&phi, f64::NEG_INFINITY, &g).volume(), 0.0);
    assert_eq!(threshold(&phi, f64::INFINITY, &g).volume(), g.omega_measure());
    let a = threshold(&phi, 0.1, &g);
    assert_eq!(a, threshold(&phi, 0.1, &g));
    assert!(g.omega_cells().len() < g.grid().len());
    for c in 0..g.grid().len() {
        if !g.in_omega(c) {
            assert_eq!(a.get(c), 0.0);
        }
    }
}

#[test]
fn empty_phase_persists_when_wetting_is_unfavourable() {
    let g = band(128);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.9, 0.5), 4e-3);
    let mut cfg = SchemeConfig::new(4e-3);
    cfg.preserve_volume = false;
    let tr = run(PhaseField::zeros(g.grid()), &cfg, &m).unwrap();
    assert_eq!(tr.status, RunStatus::Stationary);
    assert_eq!(tr.final_state.step, cfg.stationarity_window);
    assert_eq!(tr.final_state.u.volume(), 0.0);
}

#[test]
fn semicircle_measures_ninety_degrees() {
    let g = band(256);
    let (u, level) = synthetic_cap(&g, 0.5, 0.2, 90.0).unwrap();
    let a = measure_contact_angle(&u, &level, &g, AngleMethod::default()).unwrap();
    assert!((a.left - 90.0).abs() < 1.0 && (a.right - 90.0).abs() < 1.0, "{a:?}");
}
