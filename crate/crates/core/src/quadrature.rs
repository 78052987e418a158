//! Gauss-Jacobi collocation grid for the weight `θ^{-α}(1-θ)^{α-1}` on `[0, 1]`.
//!
//! Nodes and weights come from the Golub-Welsch construction: the eigenvalues
//! of the symmetric Jacobi matrix of the three-term recurrence are the nodes on
//! `[-1, 1]`, and the squared first components of its eigenvectors are
//! proportional to the weights. The weights are rescaled to sum to the total
//! mass of `ω_α`, which is exactly one.
//!
//! Only nodal values and weights are ever needed; the Lagrange basis on the
//! nodes is never formed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fmath::{abs, sqrt};

/// Symmetric tridiagonal Jacobi matrix of monic Jacobi polynomials on `[-1, 1]`
/// for the weight `(1-x)^a (1+x)^b`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMatrix {
    pub diag: Vec<f64>,
    /// `offdiag[i]` couples rows `i` and `i + 1`.
    pub offdiag: Vec<f64>,
}

pub fn jacobi_recurrence(n: usize, a: f64, b: f64) -> Result<JacobiMatrix> {
    if !(a > -1.0) {
        return Err(Error::Domain {
            param: "a",
            value: a,
            expected: "(-1, inf)",
        });
    }
    if !(b > -1.0) {
        return Err(Error::Domain {
            param: "b",
            value: b,
            expected: "(-1, inf)",
        });
    }
    if n == 0 {
        return Err(Error::Domain {
            param: "n",
            value: 0.0,
            expected: "n >= 1",
        });
    }
    let ab = a + b;
    let mut diag = Vec::with_capacity(n);
    diag.push((b - a) / (ab + 2.0));
    for i in 1..n {
        let s = 2.0 * i as f64 + ab;
        diag.push((b * b - a * a) / (s * (s + 2.0)));
    }

    let mut offdiag = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let fi = i as f64;
        let s = 2.0 * fi + ab;
        // The i = 1 term has a removable 0/0 when a + b = -1, which is exactly
        // the case for the θ-weight, so use the cancelled form.
        let beta = if i == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab))
        } else {
            4.0 * fi * (fi + a) * (fi + b) * (fi + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        offdiag.push(sqrt(beta));
    }
    Ok(JacobiMatrix { diag, offdiag })
}

const QL_REL_TOL: f64 = 1e-15;
const QL_MAX_SWEEPS: usize = 50;

/// Eigenvalues of a symmetric tridiagonal matrix together with the first
/// component of each normalized eigenvector (implicit-shift QL).
///
/// Returned in ascending eigenvalue order.
pub fn tridiagonal_eigen(m: &JacobiMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.diag.len();
    let mut d = m.diag.clone();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&m.offdiag);
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut mm = l;
            while mm + 1 < n {
                let dd = abs(d[mm]) + abs(d[mm + 1]);
                if abs(e[mm]) <= QL_REL_TOL * dd {
                    break;
                }
                mm += 1;
            }
            if mm == l {
                break;
            }
            if iter == QL_MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    what: "tridiagonal QL",
                    index: l,
                    iterations: iter,
                });
            }
            iter += 1;

            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = libm::hypot(g, 1.0);
            g = d[mm] - d[l] + e[l] / (g + libm::copysign(r, g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut i = mm;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = libm::hypot(f, g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[mm] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[mm] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    Ok((
        order.iter().map(|&i| d[i]).collect(),
        order.iter().map(|&i| z[i]).collect(),
    ))
}

/// Gauss-Jacobi nodes `θ_j` and normalized weights `ω_j` for `ω_α` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaGrid {
    alpha: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ThetaGrid {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Highest node index; the grid has `m() + 1` nodes.
    pub fn m(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ_j ω_j v_j`, the discrete reconstruction `C[v]`.
    pub fn reconstruct(&self, values: &[f64]) -> Result<f64> {
        reconstruct(values, self)
    }

    /// Same as [`ThetaGrid::reconstruct`] without the length check.
    #[inline]
    pub(crate) fn apply(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

/// Builds the `(M+1)`-point Gauss rule for `ω_α`.
pub fn gauss_jacobi_grid(m: usize, alpha: f64) -> Result<ThetaGrid> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain {
            param: "alpha",
            value: alpha,
            expected: "(0, 1)",
        });
    }
    // θ = (1 + x)/2 maps θ^{-α}(1-θ)^{α-1} to (1+x)^{-α}(1-x)^{α-1}.
    let jm = jacobi_recurrence(m + 1, alpha - 1.0, -alpha)?;
    let (x, first) = tridiagonal_eigen(&jm)?;

    let nodes: Vec<f64> = x.iter().map(|&xi| 0.5 * (1.0 + xi)).collect();
    let raw: Vec<f64> = first.iter().map(|v| v * v).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();

    for (j, &t) in nodes.iter().enumerate() {
        assert!(t > 0.0 && t < 1.0, "node {j} = {t} is not interior");
    }
    Ok(ThetaGrid {
        alpha,
        nodes,
        weights,
    })
}

/// Approximates `C[φ] = ∫₀¹ φ ω_α dθ` from nodal values.
pub fn reconstruct(values: &[f64], grid: &ThetaGrid) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::LengthMismatch {
            expected: grid.len(),
            found: values.len(),
        });
    }
    Ok(grid.apply(values))
}
