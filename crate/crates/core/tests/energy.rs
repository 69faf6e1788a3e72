use std::f64::consts::PI;

use ambo::anisotropy::Anisotropy;
use ambo::energy::*;
use ambo::geometry::{build_geometry, Geometry, Shape};
use ambo::grid::{ScalarField, TorusGrid};
use ambo::kernel::{scale, Kernel};
use ambo::shapes::{Curve, ShapeSpec};
use ambo::tensions::{ModifiedTensions, RawTensions};

fn torus(n: usize) -> Geometry {
    build_geometry(&Shape::Torus, TorusGrid::new(2, n).unwrap(), None).unwrap()
}

fn model(g: &Geometry, t: &ModifiedTensions, h: f64) -> EnergyModel {
    EnergyModel::new(g, t, scale(&Kernel::gaussian(2), g.grid(), h).unwrap()).unwrap()
}

fn varying_tensions(g: &Geometry) -> ModifiedTensions {
    let grid = g.grid();
    ModifiedTensions::from_fields(
        ScalarField::from_fn(grid, |x| 1.0 + 0.2 * x[0]),
        ScalarField::from_fn(grid, |x| 0.5 + 0.1 * x[1]),
        ScalarField::constant(grid, 0.4),
    )
    .unwrap()
}

#[test]
fn empty_particle_on_torus_has_zero_energy() {
    let g = torus(32);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.5, 0.5), 0.01);
    assert_eq!(m.energy(&PhaseField::zeros(g.grid())).unwrap(), 0.0);
}

#[test]
fn energy_scales_with_pv_tension() {
    let g = torus(64);
    let u = PhaseField::random(&g, 3);
    let e1 = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), 4e-3).energy(&u).unwrap();
    let e2 = model(&g, &ModifiedTensions::constant(g.grid(), 2.0, 0.0, 0.0), 4e-3).energy(&u).unwrap();
    assert!((e2 / e1 - 2.0).abs() < 1e-12);
}

#[test]
fn exchanging_phases_on_torus_keeps_energy() {
    let g = torus(64);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.3, 0.0, 0.0), 4e-3);
    let u = PhaseField::random(&g, 11);
    let v = PhaseField::new(u.field().map(|x| 1.0 - x), &g).unwrap();
    let (a, b) = (m.energy(&u).unwrap(), m.energy(&v).unwrap());
    assert!((a - b).abs() < 1e-12 * a);
}

#[test]
fn flat_stripe_matches_half_space_oracle() {
    // Two flat interfaces of unit length. The continuum value per interface is
    // gamma_PV / sqrt(pi); the cell-centred sum of z k(z) over z > 0 loses
    // dx^2 / (24 h) in relative terms (trapezoid endpoint correction).
    let n = 128;
    let g = torus(n);
    let dx = 1.0 / n as f64;
    let h = (8.0 * dx) * (8.0 * dx);
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0), h);
    let u = PhaseField::from_predicate(&g, |x| x[1] > 0.25 && x[1] < 0.75);
    let oracle = 2.0 / PI.sqrt() * (1.0 - dx * dx / (24.0 * h));
    let e = m.energy(&u).unwrap();
    assert!((e / oracle - 1.0).abs() < 1e-5, "{e} vs {oracle}");
}

#[test]
fn flip_formula_matches_recomputed_energy() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let m = model(&g, &varying_tensions(&g), 6e-3);
    let cells = g.omega_cells();
    for seed in 0..100u64 {
        let u = PhaseField::random_binary(&g, seed);
        let phi = m.comparison_field(&u).unwrap();
        let c = cells[(seed as usize * 7919) % cells.len()];
        let direct = m.energy(&u.flipped(c)).unwrap() - m.energy(&u).unwrap();
        let fast = m.flip_delta(&phi, &u, c);
        assert!((direct - fast).abs() < 1e-10 * m.energy(&u).unwrap().max(1.0), "seed {seed}: {direct} vs {fast}");
    }
}

#[test]
fn symmetric_form_equals_energy_for_constant_tensions() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let m = model(&g, &ModifiedTensions::constant(g.grid(), 1.0, 0.7, 0.6), 6e-3);
    let u = PhaseField::random(&g, 5);
    let (a, b) = (m.energy(&u).unwrap(), m.symmetric_energy(&u).unwrap());
    assert!((a - b).abs() < 1e-12 * a);
}

#[test]
fn terms_add_up() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let m = model(&g, &varying_tensions(&g), 6e-3);
    let t = m.terms(&PhaseField::random(&g, 9)).unwrap();
    assert!((t.pv + t.sp + t.sv - t.total).abs() < 1e-14 * t.total);
}

#[test]
fn sharp_energy_of_disk_is_exact() {
    let g = torus(64);
    let gamma = Anisotropy::isotropic(2, 1.0 / PI.sqrt()).unwrap();
    let shape = ShapeSpec::Circle { center: [0.5, 0.5], radius: 0.2 };
    let e = sharp_energy(&shape, &RawTensions::constant(1.0, 0.0, 0.0), &gamma, &g).unwrap();
    assert!((e - 2.0 * PI * 0.2 / PI.sqrt()).abs() < 1e-11);
}

#[test]
fn sharp_energy_of_cap_has_closed_form() {
    let g = build_geometry(&Shape::Band { lower: 0.2, upper: 0.8, axis: None }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let c = 1.0 / PI.sqrt();
    let gamma = Anisotropy::isotropic(2, c).unwrap();
    let (pv, sp, sv) = (1.2, 0.9, 0.4);
    for angle in [60.0f64, 90.0, 120.0] {
        let (r, th) = (0.2, angle.to_radians());
        let shape = ShapeSpec::Cap { center_x: 0.5, radius: r, angle_deg: angle };
        let e = sharp_energy(&shape, &RawTensions::constant(pv, sp, sv), &gamma, &g).unwrap();
        // Free arc 2 R theta, wetted chord 2 R sin theta, two substrate lines of unit length.
        let oracle = pv * c * 2.0 * r * th + 2.0 * sv + (sp - sv) * 2.0 * r * th.sin();
        assert!((e - oracle).abs() < 1e-10, "{angle}: {e} vs {oracle}");
        let area = shape.area(&g).unwrap();
        assert!((area - r * r * (th - th.sin() * th.cos())).abs() < 1e-12);
    }
}

#[test]
fn composite_simpson_converges_at_fourth_order() {
    let arc = Curve::EllipseArc { center: [0.5, 0.5], semi_axes: [0.3, 0.1], from: 0.0, to: 0.5 * PI };
    let f = |x: &ambo::grid::Point, _: &ambo::grid::Point| x[0] * x[0];
    let exact = arc.integrate(&f, 1e-14);
    let e1 = (arc.integrate_simpson(&f, 8) - exact).abs();
    let e2 = (arc.integrate_simpson(&f, 16) - exact).abs();
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn convergence_study_drops_unresolved_levels() {
    let g = torus(64);
    let gamma = Anisotropy::isotropic(2, 1.0 / PI.sqrt()).unwrap();
    let shape = ShapeSpec::Circle { center: [0.5, 0.5], radius: 0.2 };
    let t = ModifiedTensions::constant(g.grid(), 1.0, 0.0, 0.0);
    let table = convergence_study(&shape, &RawTensions::constant(1.0, 0.0, 0.0), &gamma, &g, &t, &Kernel::gaussian(2), &[1e-2, 4e-3, 1e-4]).unwrap();
    assert_eq!(table.rows.len(), 2);
    assert!(table.rows.iter().all(|r| r.rel_err < 0.1));
}

#[test]
fn monotone_for_constant_tensions_and_remainder_bound_otherwise() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let kernel = Kernel::gaussian(2);
    let u = PhaseField::random(&g, 1);
    let constant = ModifiedTensions::constant(g.grid(), 1.0, 0.5, 0.4);
    let m = monotonicity_check(&u, &g, &constant, &kernel, 2.5e-3, 2).unwrap();
    assert!(m.exact_holds() && m.remainder == 0.0);
    let m = monotonicity_check(&u, &g, &varying_tensions(&g), &kernel, 2.5e-3, 2).unwrap();
    assert!(m.bound_holds() && m.remainder > 0.0 && m.c_fit.is_finite());
}

#[test]
fn inequalities_hold_on_binary_disk() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let v = PhaseField::from_predicate(&g, |x| (x[0] - 0.5).hypot(x[1] - 0.5) < 0.2);
    for h in [4e-3, 8e-3] {
        let s = inequality_suite(&v, &g, &Kernel::gaussian(2), h).unwrap();
        assert!(s.all_hold(), "{:?}", s.checks());
    }
}

#[test]
fn phase_field_rejects_mass_outside_container() {
    let g = build_geometry(&Shape::Disk { center: vec![0.5, 0.5], radius: 0.3 }, TorusGrid::new(2, 64).unwrap(), None).unwrap();
    let f = ScalarField::constant(g.grid(), 1.0);
    assert!(PhaseField::new(f, &g).is_err());
    let f = ScalarField::constant(g.grid(), 1.5);
    assert!(PhaseField::new(f, &torus(32)).is_err());
}
