//! Small dense kernels: symmetric diagonal-plus-rank-one eigendecomposition
//! and LU with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, sqrt};

/// Eigendecomposition of `diag(d) + ρ u uᵀ`.
///
/// Eigenvalues solve the secular equation `1 + ρ Σ_j u_j²/(d_j - λ) = 0`,
/// one per interval between consecutive poles. Each root is stored as an
/// offset from its nearest pole so that the differences `d_j - λ_i` used by the
/// eigenvectors keep full relative accuracy. The vector `u` is then recomputed
/// from the computed spectrum (Gu-Eisenstat), which keeps the eigenvectors
/// orthogonal to working precision.
#[derive(Debug, Clone)]
pub struct RankOneEigen {
    /// Ascending.
    eigenvalues: Vec<f64>,
    /// Column-major, `vectors[i * n + j]` is component `j` of eigenvector `i`,
    /// in the caller's original ordering of `d`.
    vectors: Vec<f64>,
    n: usize,
}

/// Reasons the secular solver declines an input; callers fall back to a dense
/// factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deflation {
    /// `|ρ| u_j²` is negligible: `d_j` is (numerically) an eigenvalue itself.
    NegligibleComponent(usize),
    /// Two poles coincide to working precision.
    CoincidentPoles(usize),
}

impl RankOneEigen {
    pub fn new(d: &[f64], u: &[f64], rho: f64) -> core::result::Result<Self, Deflation> {
        let n = d.len();
        assert_eq!(n, u.len());
        if rho < 0.0 {
            // diag(d) + ρuuᵀ = -(diag(-d) + |ρ|uuᵀ)
            let neg: Vec<f64> = d.iter().map(|x| -x).collect();
            let mut e = Self::new(&neg, u, -rho)?;
            e.eigenvalues.reverse();
            for x in e.eigenvalues.iter_mut() {
                *x = -*x;
            }
            let mut vectors = vec![0.0; n * n];
            for i in 0..n {
                let src = n - 1 - i;
                vectors[i * n..(i + 1) * n].copy_from_slice(&e.vectors[src * n..(src + 1) * n]);
            }
            e.vectors = vectors;
            return Ok(e);
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
        let ds: Vec<f64> = order.iter().map(|&i| d[i]).collect();
        let us: Vec<f64> = order.iter().map(|&i| u[i]).collect();

        if rho == 0.0 {
            let mut vectors = vec![0.0; n * n];
            for (i, &orig) in order.iter().enumerate() {
                vectors[i * n + orig] = 1.0;
            }
            return Ok(RankOneEigen {
                eigenvalues: ds,
                vectors,
                n,
            });
        }

        let unorm2: f64 = us.iter().map(|x| x * x).sum();
        let scale = abs(ds[0]).max(abs(ds[n - 1])) + rho * unorm2;
        let tol = 64.0 * f64::EPSILON * scale;
        for j in 0..n {
            if rho * us[j] * us[j] <= tol {
                return Err(Deflation::NegligibleComponent(order[j]));
            }
            if j + 1 < n && ds[j + 1] - ds[j] <= tol {
                return Err(Deflation::CoincidentPoles(order[j]));
            }
        }

        let u2: Vec<f64> = us.iter().map(|x| x * x).collect();
        let secular = |origin: usize, tau: f64| -> f64 {
            let base = ds[origin];
            1.0 + rho
                * ds.iter()
                    .zip(&u2)
                    .map(|(&dj, &wj)| wj / ((dj - base) - tau))
                    .sum::<f64>()
        };

        // Root i as (origin pole index, offset τ from that pole).
        let mut roots: Vec<(usize, f64)> = Vec::with_capacity(n);
        for i in 0..n {
            let (origin, mut lo, mut hi) = if i + 1 < n {
                let half = 0.5 * (ds[i + 1] - ds[i]);
                if secular(i, half) >= 0.0 {
                    (i, 0.0, half)
                } else {
                    (i + 1, -half, 0.0)
                }
            } else {
                (i, 0.0, rho * unorm2)
            };
            loop {
                let mid = lo + 0.5 * (hi - lo);
                if mid <= lo || mid >= hi {
                    break;
                }
                // The pole offset itself (0) is never evaluated: lo/hi start
                // at a pole only as an open endpoint.
                if secular(origin, mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let tau = if origin == i { hi } else { lo };
            roots.push((origin, tau));
        }

        // λ_i - d_j with the pole offset kept separate.
        let gap = |i: usize, j: usize| -> f64 {
            let (origin, tau) = roots[i];
            (ds[origin] - ds[j]) + tau
        };

        let mut uhat = vec![0.0; n];
        for j in 0..n {
            let mut prod = gap(n - 1, j) / rho;
            for i in 0..j {
                prod *= gap(i, j) / (ds[i] - ds[j]);
            }
            for i in j..n - 1 {
                prod *= gap(i, j) / (ds[i + 1] - ds[j]);
            }
            uhat[j] = libm::copysign(sqrt(abs(prod)), us[j]);
        }

        let mut eigenvalues = Vec::with_capacity(n);
        let mut vectors = vec![0.0; n * n];
        let mut col = vec![0.0; n];
        for i in 0..n {
            let (origin, tau) = roots[i];
            eigenvalues.push(ds[origin] + tau);
            for j in 0..n {
                col[j] = uhat[j] / -gap(i, j);
            }
            let norm = sqrt(col.iter().map(|x| x * x).sum::<f64>());
            for j in 0..n {
                vectors[i * n + order[j]] = col[j] / norm;
            }
        }
        Ok(RankOneEigen {
            eigenvalues,
            vectors,
            n,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector `i` (unit norm) in the original ordering.
    pub fn vector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.n..(i + 1) * self.n]
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

/// Dense LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factorizes the row-major `n × n` matrix `a`.
    pub fn new(n: usize, mut a: Vec<f64>) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let amax = a.iter().fold(0.0f64, |m, x| m.max(abs(*x)));
        let tiny = n as f64 * f64::EPSILON * amax;
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if abs(a[r * n + col]) > abs(a[piv * n + col]) {
                    piv = r;
                }
            }
            let p = a[piv * n + col];
            if !(abs(p) > tiny) {
                return Err(Error::Singular {
                    index: col,
                    pivot: p,
                });
            }
            if piv != col {
                for c in 0..n {
                    a.swap(piv * n + c, col * n + c);
                }
                perm.swap(piv, col);
            }
            for r in col + 1..n {
                let factor = a[r * n + col] / p;
                a[r * n + col] = factor;
                for c in col + 1..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
            }
        }
        Ok(Lu { n, lu: a, perm })
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.n;
        scratch.clear();
        scratch.extend(self.perm.iter().map(|&p| b[p]));
        for r in 0..n {
            let mut s = scratch[r];
            for c in 0..r {
                s -= self.lu[r * n + c] * scratch[c];
            }
            scratch[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = scratch[r];
            for c in r + 1..n {
                s -= self.lu[r * n + c] * scratch[c];
            }
            scratch[r] = s / self.lu[r * n + r];
        }
        b.copy_from_slice(scratch);
    }
}
