//! BDF-k coefficients, `α_k φ^{n+1} - Σ_j b_j φ^{n-j} = Δt φ'(t_{n+1})`.

use crate::error::{Error, Result};

/// Table of `(denominator, α_k numerator, b_j numerators)` per order.
const TABLE: [(i64, i64, &[i64]); 5] = [
    (1, 1, &[1]),
    (2, 3, &[4, -1]),
    (6, 11, &[18, -9, 2]),
    (12, 25, &[48, -36, 16, -3]),
    (60, 137, &[300, -300, 200, -75, 12]),
];

/// Multiplier constants `τ_k` of the energy identity behind the stability
/// estimate; carried for diagnostics only.
const TAU: [f64; 5] = [0.0, 0.0, 0.0836, 0.2878, 0.8160];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdfScheme {
    k: usize,
    alpha_k: f64,
    b: [f64; 5],
    tau_k: f64,
}

impl BdfScheme {
    pub fn order(&self) -> usize {
        self.k
    }

    /// Leading coefficient `α_k`.
    pub fn alpha_k(&self) -> f64 {
        self.alpha_k
    }

    /// History coefficients `b_0 .. b_{k-1}`; `b_j` multiplies `φ^{n-j}`.
    pub fn b(&self) -> &[f64] {
        &self.b[..self.k]
    }

    pub fn tau_k(&self) -> f64 {
        self.tau_k
    }

    /// Exact rational form `(denominator, α_k numerator, b numerators)`.
    pub fn rational(&self) -> (i64, i64, &'static [i64]) {
        TABLE[self.k - 1]
    }
}

pub fn bdf_coefficients(k: usize) -> Result<BdfScheme> {
    if !(1..=5).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let (den, a_num, b_num) = TABLE[k - 1];
    let den = den as f64;
    let mut b = [0.0; 5];
    for (dst, &num) in b.iter_mut().zip(b_num) {
        *dst = num as f64 / den;
    }
    Ok(BdfScheme {
        k,
        alpha_k: a_num as f64 / den,
        b,
        tau_k: TAU[k - 1],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_values() {
        let s = bdf_coefficients(1).unwrap();
        assert_eq!((s.alpha_k(), s.b()), (1.0, &[1.0][..]));

        let s = bdf_coefficients(3).unwrap();
        assert_eq!(s.alpha_k(), 11.0 / 6.0);
        assert_eq!(s.b(), &[3.0, -1.5, 1.0 / 3.0]);

        let s = bdf_coefficients(5).unwrap();
        assert_eq!(s.alpha_k(), 137.0 / 60.0);
        assert_eq!(s.b(), &[5.0, -5.0, 10.0 / 3.0, -1.25, 0.2]);
        assert_eq!(s.tau_k(), 0.8160);
    }

    #[test]
    fn consistency_is_exact_in_rationals() {
        for k in 1..=5 {
            let (_, a, b) = bdf_coefficients(k).unwrap().rational();
            assert_eq!(b.iter().sum::<i64>(), a, "order {k}");
        }
    }

    #[test]
    fn order_conditions() {
        // Exact on t^q for q ≤ k: with Δt = 1, t_{n+1} = 1 and t_{n-j} = -j,
        // α_k - Σ_j b_j (-j)^q = q.
        for k in 1..=5 {
            let s = bdf_coefficients(k).unwrap();
            for q in 0..=k as i32 {
                let lhs = s.alpha_k()
                    - s.b()
                        .iter()
                        .enumerate()
                        .map(|(j, bj)| bj * (-(j as f64)).powi(q))
                        .sum::<f64>();
                let rhs = if q == 0 { 0.0 } else { q as f64 };
                assert!((lhs - rhs).abs() < 1e-12, "k {k} q {q}: {lhs}");
            }
        }
    }

    #[test]
    fn unsupported_orders() {
        assert_eq!(bdf_coefficients(0), Err(Error::UnsupportedOrder(0)));
        assert_eq!(bdf_coefficients(6), Err(Error::UnsupportedOrder(6)));
    }
}
