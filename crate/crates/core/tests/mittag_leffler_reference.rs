//! `ml` against 40-digit values produced by `data/ml_oracle.py`.

use epde_core::ml;

const TABLE: &str = include_str!("data/ml_reference.csv");

fn rows() -> impl Iterator<Item = (f64, f64, f64)> {
    TABLE.lines().skip(1).filter(|l| !l.is_empty()).map(|line| {
        let mut it = line.split(',').map(|v| v.parse::<f64>().unwrap());
        (it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
    })
}

#[test]
fn table_is_complete() {
    assert_eq!(rows().count(), 141);
}

#[test]
fn non_positive_arguments() {
    for (alpha, z, want) in rows().filter(|r| r.1 <= 0.0) {
        let got = ml(alpha, z).unwrap();
        assert!((got - want).abs() <= 5e-15, "E_{alpha}({z}) = {got}, want {want}");
    }
}

#[test]
fn positive_arguments() {
    // The function itself amplifies relative perturbations of z by z^{1/α}.
    for (alpha, z, want) in rows().filter(|r| r.1 > 0.0) {
        let got = ml(alpha, z).unwrap();
        let cond = z.powf(1.0 / alpha).max(1.0);
        let tol = 2e-15 * cond * want.abs();
        assert!((got - want).abs() <= tol.max(1e-15), "E_{alpha}({z}) = {got}, want {want}");
    }
}

#[test]
fn exponential_limit() {
    for i in 0..50 {
        let x = -30.0 + 35.0 * i as f64 / 49.0;
        let got = ml(1.0, x).unwrap();
        assert!((got - x.exp()).abs() <= 1e-13 * x.exp().max(1.0));
    }
}
