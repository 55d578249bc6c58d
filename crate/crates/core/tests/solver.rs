use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use num_complex::Complex64;

use vortexdyn::basis;
use vortexdyn::closed_form::{Family, PointVortex, VortexConfig};
use vortexdyn::solver::{self, Background, SolverParams, Stepper};
use vortexdyn::{grid, track, ComplexField2D, GridSpec};

fn params(beta: f64, points: usize) -> SolverParams {
    SolverParams::new(beta, GridSpec::new(8.0, points).unwrap()).unwrap()
}

fn gaussian(g: GridSpec) -> ComplexField2D {
    ComplexField2D::from_fn(g, 0.0, |x, y| Complex64::new((-(x * x + y * y) / 2.0).exp() / PI.sqrt(), 0.0))
}

fn max_abs_diff(a: &ComplexField2D, b: &ComplexField2D) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

#[test]
fn oscillator_ground_state_only_picks_up_a_phase() {
    let p = params(0.0, 256);
    let f0 = gaussian(p.grid);
    let f1 = solver::step_realtime(&f0, &p).unwrap();
    let expected = f0.scaled(Complex64::from_polar(1.0, -p.dt));
    assert!(max_abs_diff(&f1, &expected) < 1e-10);
    assert_abs_diff_eq!(f1.time(), p.dt, epsilon = 1e-15);
}

#[test]
fn ideal_vortex_quarter_turn() {
    let p = params(0.0, 256);
    let f0 = ComplexField2D::from_fn(p.grid, 0.0, |x, y| Complex64::new(x - 1.0, y) * (-(x * x + y * y) / 2.0).exp());
    let mut f = grid::normalize(&f0).unwrap();
    let n = (PI / 2.0 / p.dt).round() as usize;
    let p = p.with_dt(PI / 2.0 / n as f64).unwrap();
    Stepper::new(&p).unwrap().advance(&mut f, n).unwrap();
    let obs = track::detect(&f, 4.0).unwrap();
    assert_eq!(obs.len(), 1);
    let h = p.grid.spacing();
    assert!(obs[0].x.abs() < 0.01 * h && (obs[0].y - 1.0).abs() < 0.01 * h, "{:?}", obs[0]);
}

#[test]
fn ground_states() {
    let gs0 = solver::ground_state_relaxed(&params(0.0, 128)).unwrap();
    assert_abs_diff_eq!(gs0.energy, 1.0, epsilon = 1e-6);

    let p = params(1.0, 256);
    let gs = solver::ground_state_relaxed(&p).unwrap();
    assert!(gs.energy >= 1.0 && gs.energy <= 1.07665, "{}", gs.energy);
    assert_abs_diff_eq!(grid::energy(&gs.field, 1.0), gs.energy, epsilon = 1e-10);
    // transposition symmetry
    let v = gs.field.values();
    let asym = v.indexed_iter().map(|((i, j), z)| (z - v[[j, i]]).norm()).fold(0.0, f64::max);
    assert!(asym < 1e-8, "{asym}");
    // energy never rises between accepted iterations
    assert!(gs.history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
}

#[test]
fn ground_state_is_stationary_in_real_time() {
    let p = params(1.0, 256);
    let gs = solver::ground_state(&p).unwrap();
    let mut f = gs.clone();
    Stepper::new(&p).unwrap().advance(&mut f, 10_000).unwrap();
    let drift = f
        .values()
        .iter()
        .zip(gs.values())
        .map(|(a, b)| (a.norm_sqr() - b.norm_sqr()).abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-6, "{drift}");
}

#[test]
fn central_vortex_states() {
    let p0 = params(0.0, 128);
    let v0 = solver::central_vortex_relaxed(&p0, 1).unwrap();
    assert_abs_diff_eq!(v0.energy, 2.0, epsilon = 1e-5);
    let exact = grid::normalize(&ComplexField2D::from_fn(p0.grid, 0.0, |x, y| {
        Complex64::new(x, y) * (-(x * x + y * y) / 2.0).exp()
    }))
    .unwrap();
    // equal up to a global phase
    let overlap = exact.inner(&v0.field).norm();
    assert_abs_diff_eq!(overlap, 1.0, epsilon = 1e-8);

    let p1 = params(1.0, 128);
    let plus = solver::central_vortex_state(&p1, 1).unwrap();
    let minus = solver::central_vortex_state(&p1, -1).unwrap();
    let m = p1.grid.points_per_axis() / 2;
    assert!(plus.values()[[m, m]].norm() < 1e-12);
    for k in [1, 4, 16, 40] {
        assert_eq!(solver::loop_winding(plus.values(), m, m, k), 1, "loop {k}");
    }
    assert!(max_abs_diff(&minus, &plus.conj()) < 1e-8);
}

#[test]
fn background_factor_shape() {
    let bg0 = Background::compute(&params(0.0, 128)).unwrap();
    let p = solver::vortex_background_factor(&bg0, 1);
    // proportional to x + iy inside the disc
    let g = p.grid();
    let mut ratios = Vec::new();
    for ((i, j), z) in p.values().indexed_iter() {
        let (x, y) = (g.coord(i), g.coord(j));
        let r = x.hypot(y);
        if r > 0.2 && r < 3.0 {
            ratios.push(z / Complex64::new(x, y));
        }
    }
    let r0 = ratios[0];
    assert!(ratios.iter().all(|r| (r - r0).norm() < 1e-6 * r0.norm()));

    let bg1 = Background::compute(&params(1.0, 128)).unwrap();
    let plus = solver::vortex_background_factor(&bg1, 1);
    let minus = solver::vortex_background_factor(&bg1, -1);
    assert!(max_abs_diff(&minus, &plus.conj()) < 1e-8);
    // linear near the core, flattening outward
    let prof = &bg1.profile;
    assert_abs_diff_eq!(prof.eval(0.1) / prof.eval(0.05), 1.0, epsilon = 0.01);
    let grad = |r: f64| ((r + 0.1) * prof.eval(r + 0.1) - r * prof.eval(r)) / 0.1;
    assert!(grad(3.0) < grad(0.1), "{} vs {}", grad(3.0), grad(0.1));
}

#[test]
fn initial_states() {
    let bg = Background::compute(&params(0.0, 128)).unwrap();
    let empty = VortexConfig::new(Family::General, 0.0, vec![]).unwrap();
    let f = solver::build_initial_state(&empty, &bg).unwrap();
    assert!(max_abs_diff(&f, &bg.ground) < 1e-12);

    let single = VortexConfig::new(Family::Single, 0.0, vec![PointVortex::new(1.0, 0.0, 1)]).unwrap();
    let f = solver::build_initial_state(&single, &bg).unwrap();
    assert_abs_diff_eq!(grid::norm(&f), 1.0, epsilon = 1e-12);
    let exact = grid::normalize(&ComplexField2D::from_fn(*bg.grid(), 0.0, |x, y| {
        Complex64::new(x - 1.0, y) * (-(x * x + y * y) / 2.0).exp()
    }))
    .unwrap();
    let phase = exact.inner(&f);
    let aligned = exact.scaled(phase / phase.norm());
    assert!(f.l2_distance(&aligned).unwrap() < 1e-8);
}

#[test]
fn evolve_scenario_records() {
    let p = params(0.0, 64).with_snapshot_interval(0.01).unwrap();
    let f = gaussian(p.grid);
    let rec = solver::evolve_scenario(&f, &p, 0.0).unwrap();
    assert_eq!(rec.snapshots.len(), 1);
    let rec = solver::evolve_scenario(&f, &p, 0.05).unwrap();
    assert_eq!(rec.times().len(), 6);
    assert_abs_diff_eq!(*rec.times().last().unwrap(), 0.05, epsilon = 1e-12);
}

#[test]
fn norm_and_energy_conservation() {
    let p = params(1.0, 64);
    let bg = Background::compute(&p).unwrap();
    let cfg = VortexConfig::symmetric(Family::Dipole, 1.0, 1.0).unwrap();
    let mut f = solver::build_initial_state(&cfg, &bg).unwrap();
    let (n0, e0) = (grid::norm(&f), grid::energy(&f, 1.0));
    Stepper::new(&p).unwrap().advance(&mut f, 10_000).unwrap();
    assert!((grid::norm(&f) - n0).abs() < 1e-10);
    assert!(((grid::energy(&f, 1.0) - e0) / e0).abs() < 1e-6);
}

#[test]
fn halving_dt_quarters_the_error() {
    let p = params(1.0, 64);
    let bg = Background::compute(&p).unwrap();
    let cfg = VortexConfig::symmetric(Family::Tripole, 1.5, 1.0).unwrap();
    let init = solver::build_initial_state(&cfg, &bg).unwrap();
    let run = |dt: f64| {
        let mut f = init.clone();
        let p = p.clone().with_dt(dt).unwrap();
        Stepper::new(&p).unwrap().advance(&mut f, (0.5 / dt).round() as usize).unwrap();
        f
    };
    let dt = 0.01;
    let reference = run(dt / 8.0);
    let e1 = run(dt).l2_distance(&reference).unwrap();
    let e2 = run(dt / 2.0).l2_distance(&reference).unwrap();
    // exact order-two ratio against the dt/8 reference is (1 - 1/64)/(1/4 - 1/64)
    let ideal = (1.0 - 1.0 / 64.0) / (0.25 - 1.0 / 64.0);
    assert!((e1 / e2 / ideal - 1.0).abs() < 0.2, "ratio {}", e1 / e2);
}

#[test]
fn split_step_tracks_the_basis_at_beta_zero() {
    let g = GridSpec::new(8.0, 128).unwrap();
    let dt = 2e-4;
    let p = SolverParams::new(0.0, g).unwrap().with_dt(dt).unwrap();
    let bg = Background::compute(&p).unwrap();
    let cfg = VortexConfig::symmetric(Family::Tripole, 2f64.sqrt(), 0.0).unwrap();
    let mut f = solver::build_initial_state(&cfg, &bg).unwrap();
    let s = basis::project(&f, 0.0, basis::DEFAULT_MAX_DEGREE).unwrap();
    let mut stepper = Stepper::new(&p).unwrap();
    for k in 1..=4 {
        let t = 0.5 * k as f64;
        stepper.advance(&mut f, (0.5 / dt).round() as usize).unwrap();
        let d = f.l2_distance(&basis::synthesize(&basis::evolve(&s, t), &g)).unwrap();
        assert!(d <= 1e-8 * t, "t = {t}: {d:e}");
    }
}
