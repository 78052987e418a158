use std::sync::Arc;

use epde_core::oracles::{frac_adams_solve, l1_solve};
use epde_core::stability::RadiusMethod;
use epde_core::stepper::StartupMode;
use epde_core::{exact_solution, ml, region_scan, solve, CaseId, RegionSpec, SolveOptions, StabilityModel};
use num_complex::Complex64;

fn exact_startup(case: CaseId, alpha: f64) -> SolveOptions {
    SolveOptions {
        startup: StartupMode::Exact(Some(Arc::new(move |t, th| case.exact_state(alpha, None, t, th)))),
        ..SolveOptions::default()
    }
}

#[test]
fn case_two_endpoint() {
    let p = CaseId::II.problem(0.8, None, 1.0).unwrap();
    let want = ml(0.8, -1.0).unwrap();
    let err = |startup| {
        let opts = SolveOptions { startup, ..SolveOptions::default() };
        let traj = solve(&p, 30, 3, 1000, &opts).unwrap();
        assert_eq!(traj.phi[0], 1.0);
        (traj.final_phi() - want).abs()
    };
    assert!(err(StartupMode::Collocated) <= 1e-9);
    // Cascade startup is limited by its first BDF-1 step.
    assert!(err(StartupMode::Cascade) <= 1e-6);
}

#[test]
fn coarse_case_one() {
    let p = CaseId::I.problem(0.5, None, 1.0).unwrap();
    let traj = solve(&p, 30, 1, 10, &SolveOptions::default()).unwrap();
    assert!((traj.final_phi() - 1.0).abs() <= 0.05);
}

#[test]
fn case_four_third_order() {
    let alpha = 0.7;
    let p = CaseId::IV.problem(alpha, None, 1.0).unwrap();
    let err = |n| {
        let traj = solve(&p, 30, 3, n, &exact_startup(CaseId::IV, alpha)).unwrap();
        (traj.final_phi() - exact_solution(CaseId::IV, alpha, 1.0, 1.0).unwrap()).abs()
    };
    let ratio = err(80) / err(160);
    assert!((ratio.log2() - 3.0).abs() < 0.3, "observed order {}", ratio.log2());
}

#[test]
fn three_methods_agree_on_case_three() {
    let p = CaseId::III.problem(0.5, None, 1.0).unwrap();
    let epde = solve(&p, 30, 3, 1000, &SolveOptions::default()).unwrap().final_phi();
    let adams = frac_adams_solve(&p, 1000).unwrap().final_phi();
    let l1 = l1_solve(&p, 4000).unwrap().final_phi();
    assert!((epde - adams).abs() <= 1e-5, "{epde} vs {adams}");
    assert!((epde - l1).abs() <= 1e-4, "{epde} vs {l1}");
}

#[test]
fn storage_does_not_grow_with_steps() {
    let p = CaseId::II.problem(0.5, None, 1.0).unwrap();
    let a = solve(&p, 10, 4, 200, &SolveOptions::default()).unwrap();
    let b = solve(&p, 10, 4, 4000, &SolveOptions::default()).unwrap();
    assert_eq!(a.stats.peak_state_len, b.stats.peak_state_len);
    assert_eq!(frac_adams_solve(&p, 200).unwrap().stats.peak_state_len, 201);
}

#[test]
fn negative_real_axis_is_stable() {
    let model = StabilityModel::new(0.6, 3, 30, 0.01).unwrap();
    for i in 0..=100 {
        let sigma = Complex64::new(-10.0 * i as f64 / 100.0, 0.0);
        assert!(model.radius(sigma) < 1.0, "σ {sigma}");
    }
}

#[test]
fn single_point_region_at_origin() {
    let spec = RegionSpec {
        x_range: (0.0, 0.0),
        y_range: (0.0, 0.0),
        nx: 1,
        ny: 1,
        ..RegionSpec::default_window(0.6)
    };
    // Grids need two points per axis; a single σ goes through the model.
    assert!(region_scan(&spec).is_err());
    let model = spec.model().unwrap();
    assert!(model.radius(Complex64::new(0.0, 0.0)) < 1.0);
}

#[test]
fn region_shrinks_with_alpha() {
    let count = |alpha| {
        let spec = RegionSpec {
            nx: 41,
            ny: 41,
            x_range: (-2.0, 2.0),
            y_range: (-2.0, 2.0),
            ..RegionSpec::default_window(alpha)
        };
        region_scan(&spec).unwrap().stable_count()
    };
    assert!(count(0.8) < count(0.2));
}

#[test]
fn companion_and_reduced_routes_agree_on_a_small_grid() {
    let spec = RegionSpec {
        m: 4,
        nx: 5,
        ny: 5,
        x_range: (-3.0, 1.0),
        y_range: (-2.0, 2.0),
        ..RegionSpec::default_window(0.5)
    };
    let reduced = region_scan(&spec).unwrap();
    let companion = region_scan(&RegionSpec { method: RadiusMethod::Companion, ..spec }).unwrap();
    for (a, b) in reduced.values().iter().zip(companion.values()) {
        assert!((a - b).abs() <= 1e-6 * a.max(1.0), "{a} vs {b}");
    }
}

#[test]
fn temporal_order_against_the_collocated_system() {
    use epde_core::stepper::CollocatedLinear;
    // The collocated system's own exact solution carries no θ error, so the
    // observed order is purely temporal.
    for (case, alpha) in [(CaseId::I, 0.2), (CaseId::II, 0.8)] {
        let p = case.problem(alpha, None, 1.0).unwrap();
        let grid = epde_core::gauss_jacobi_grid(30, alpha).unwrap();
        let mut state = vec![0.0; grid.len()];
        CollocatedLinear::new(&p, &grid).unwrap().state(1.0, &mut state);
        let semi = grid.reconstruct(&state).unwrap();
        for k in 1..=4 {
            let opts = SolveOptions {
                startup: StartupMode::Collocated,
                ..SolveOptions::default()
            };
            let err = |n| (solve(&p, 30, k, n, &opts).unwrap().final_phi() - semi).abs();
            let (e1, e2) = (err(160), err(320));
            let order = (e1 / e2).log2();
            assert!((order - k as f64).abs() < 0.1, "{case} α {alpha} k {k}: {order}");
        }
    }
}
