use epde_core::{gauss_jacobi_grid, reconstruct};
use proptest::prelude::*;

/// `∫₀¹ θ^n ω_α dθ = Π_{i<n} (i + 1 - α)/(i + 1)`.
fn moment(n: usize, alpha: f64) -> f64 {
    (0..n).map(|i| (i as f64 + 1.0 - alpha) / (i as f64 + 1.0)).product()
}

#[test]
fn mass_and_first_moment() {
    for &alpha in &[0.2, 0.5, 0.8] {
        for &m in &[0, 5, 10, 30] {
            let g = gauss_jacobi_grid(m, alpha).unwrap();
            let mass: f64 = g.weights().iter().sum();
            let first: f64 = g.weights().iter().zip(g.nodes()).map(|(w, t)| w * t).sum();
            assert!((mass - 1.0).abs() <= 1e-13, "α {alpha} M {m}: {mass}");
            assert!((first - (1.0 - alpha)).abs() <= 1e-13, "α {alpha} M {m}: {first}");
        }
    }
}

#[test]
fn single_node() {
    for &alpha in &[0.1, 0.2, 0.5, 0.8, 0.95] {
        let g = gauss_jacobi_grid(0, alpha).unwrap();
        assert!((g.nodes()[0] - (1.0 - alpha)).abs() <= 1e-14);
        assert!((g.weights()[0] - 1.0).abs() <= 1e-14);
    }
}

#[test]
fn reconstruct_of_theta_times_complement() {
    let g = gauss_jacobi_grid(5, 0.5).unwrap();
    let values: Vec<f64> = g.nodes().iter().map(|t| t * (1.0 - t)).collect();
    let want = moment(1, 0.5) - moment(2, 0.5);
    assert!((reconstruct(&values, &g).unwrap() - want).abs() < 1e-14);
    assert!(reconstruct(&values[1..], &g).is_err());
}

#[test]
fn construction_is_bit_reproducible() {
    let a = gauss_jacobi_grid(30, 0.37).unwrap();
    let b = gauss_jacobi_grid(30, 0.37).unwrap();
    assert_eq!(a.nodes(), b.nodes());
    assert_eq!(a.weights(), b.weights());
}

proptest! {
    #[test]
    fn exact_up_to_degree_2m_plus_1(alpha in 0.05f64..0.95, m in 0usize..25) {
        let g = gauss_jacobi_grid(m, alpha).unwrap();
        for n in 0..=(2 * m + 1) {
            let q: f64 = g.weights().iter().zip(g.nodes()).map(|(w, t)| w * t.powi(n as i32)).sum();
            prop_assert!((q - moment(n, alpha)).abs() <= 1e-12, "degree {}: {} vs {}", n, q, moment(n, alpha));
        }
    }

    #[test]
    fn nodes_interlace(alpha in 0.05f64..0.95, m in 0usize..30) {
        let a = gauss_jacobi_grid(m, alpha).unwrap();
        let b = gauss_jacobi_grid(m + 1, alpha).unwrap();
        for (j, &t) in a.nodes().iter().enumerate() {
            prop_assert!(b.nodes()[j] < t && t < b.nodes()[j + 1]);
        }
    }
}
