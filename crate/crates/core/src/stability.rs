//! Linear stability of the fully discrete scheme on `F = -λφ`.
//!
//! With `σ = -Δtλ ∈ ℂ` one step reads `A(σ) Φ^{n+1} = Σ_j b_j B Φ^{n-j}` where
//! `A(σ) = diag(α_k(1-θ_s) + Δtθ_s) - σ 𝟙wᵀ` and `B = diag(1-θ_s)`. The
//! amplification operator `E(σ)` is the block companion matrix of this
//! recurrence and the scheme is stable at `σ` when `ρ(E(σ)) < 1`.
//!
//! Two routes to `ρ` are provided. [`amplification_matrix`] with
//! [`spectral_radius`] works on the explicit `k(M+1)`-dimensional companion
//! matrix. The default route used by [`region_scan`] reduces the same spectrum
//! exactly: `ζ` is an eigenvalue of `E(σ)` iff `μζ^k = Σ_j b_j ζ^{k-1-j}` for an
//! eigenvalue `μ` of `N(σ) = B⁻¹A(σ) = diag(α_k + Δt c₁(θ_s)) - σ g 𝟙ᵀ`,
//! `g_s = w_s/(1-θ_s)`, and the eigenvalues of `N(σ)` are the roots of the
//! secular equation `1 - σ Σ_s g_s/(d_s - μ) = 0`.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::bdf::{bdf_coefficients, BdfScheme};
use crate::error::{Error, Result};
use crate::fmath::{abs, ln, sqrt};
use crate::linalg::RankOneEigen;
use crate::quadrature::{gauss_jacobi_grid, ThetaGrid};

type C64 = Complex64;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    n: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_diagonal(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    /// Row-major constructor.
    pub fn from_rows(n: usize, data: Vec<C64>) -> Self {
        assert_eq!(data.len(), n * n);
        CMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn frobenius(&self) -> f64 {
        sqrt(self.data.iter().map(|z| z.norm_sqr()).sum())
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[l * n..(l + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn scale(&mut self, s: f64) {
        for z in self.data.iter_mut() {
            *z *= s;
        }
    }
}

impl core::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.n + c]
    }
}

impl core::ops::IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.n + c]
    }
}

/// Scheme data shared by every `σ` of a scan.
#[derive(Debug, Clone)]
pub struct StabilityModel {
    scheme: BdfScheme,
    /// `α_k(1-θ_s) + Δtθ_s`
    diag: Vec<f64>,
    /// `1 - θ_s`
    bdiag: Vec<f64>,
    weights: Vec<f64>,
    /// `α_k + Δt c₁(θ_s)`, poles of the secular equation
    poles: Vec<f64>,
    /// `w_s/(1-θ_s)`
    g: Vec<f64>,
}

impl StabilityModel {
    pub fn new(alpha: f64, k: usize, m: usize, dt: f64) -> Result<Self> {
        let grid = gauss_jacobi_grid(m, alpha)?;
        Self::with_grid(&grid, k, dt)
    }

    pub fn with_grid(grid: &ThetaGrid, k: usize, dt: f64) -> Result<Self> {
        let scheme = bdf_coefficients(k)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain {
                param: "dt",
                value: dt,
                expected: "(0, ∞)",
            });
        }
        let ak = scheme.alpha_k();
        let bdiag: Vec<f64> = grid.nodes().iter().map(|&th| 1.0 - th).collect();
        let diag = grid
            .nodes()
            .iter()
            .zip(&bdiag)
            .map(|(&th, &b)| ak * b + dt * th)
            .collect();
        let poles = grid
            .nodes()
            .iter()
            .zip(&bdiag)
            .map(|(&th, &b)| ak + dt * th / b)
            .collect();
        let g = grid
            .weights()
            .iter()
            .zip(&bdiag)
            .map(|(&w, &b)| w / b)
            .collect();
        Ok(StabilityModel {
            scheme,
            diag,
            bdiag,
            weights: grid.weights().to_vec(),
            poles,
            g,
        })
    }

    pub fn order(&self) -> usize {
        self.scheme.order()
    }

    /// Width `M + 1` of one block.
    pub fn width(&self) -> usize {
        self.diag.len()
    }

    /// Block companion matrix `E(σ)`.
    pub fn companion(&self, sigma: C64) -> Result<CMatrix> {
        let n = self.width();
        let k = self.order();
        // A(σ)⁻¹ = D⁻¹ + σ D⁻¹𝟙wᵀD⁻¹ / (1 - σ wᵀD⁻¹𝟙)
        let den = C64::new(1.0, 0.0)
            - sigma * self.weights.iter().zip(&self.diag).map(|(w, d)| w / d).sum::<f64>();
        if den.norm() <= 1e-14 {
            return Err(Error::Singular {
                index: 0,
                pivot: den.norm(),
            });
        }
        let coupling = sigma / den;
        let mut e = CMatrix::zeros(k * n);
        for r in 0..n {
            for c in 0..n {
                let mut inv = coupling * (self.weights[c] / (self.diag[r] * self.diag[c]));
                if r == c {
                    inv += 1.0 / self.diag[r];
                }
                let base = inv * self.bdiag[c];
                for (j, &bj) in self.scheme.b().iter().enumerate() {
                    e[(r, j * n + c)] = base * bj;
                }
            }
        }
        for blk in 1..k {
            for i in 0..n {
                e[(blk * n + i, (blk - 1) * n + i)] = C64::new(1.0, 0.0);
            }
        }
        Ok(e)
    }

    /// Eigenvalues of `N(σ) = diag(poles) - σ g 𝟙ᵀ`.
    pub fn reduced_eigenvalues(&self, sigma: C64) -> Option<Vec<C64>> {
        self.eigenvalues_from(sigma, &[])
    }

    /// First-order perturbation of the poles.
    fn first_order_guess(&self, sigma: C64) -> Vec<C64> {
        self.poles
            .iter()
            .zip(&self.g)
            .map(|(&d, &g)| C64::new(d, 0.0) - sigma * g)
            .collect()
    }

    /// Aberth iteration on the secular equation, starting from `z`. Roots are
    /// frozen once their correction is at rounding level.
    fn refine_secular(&self, sigma: C64, z: &mut [C64]) -> bool {
        const MAX_SWEEPS: usize = 100;
        let n = self.width();
        if sigma == C64::new(0.0, 0.0) {
            for (zi, &d) in z.iter_mut().zip(&self.poles) {
                *zi = C64::new(d, 0.0);
            }
            return true;
        }
        let floor = self.poles.iter().fold(f64::INFINITY, |m, &d| m.min(d));
        let one = C64::new(1.0, 0.0);
        let mut done = vec![false; n];
        let mut worst = f64::INFINITY;
        for _ in 0..MAX_SWEEPS {
            worst = 0.0;
            for i in 0..n {
                if done[i] {
                    continue;
                }
                let zi = z[i];
                let mut s1 = C64::new(0.0, 0.0);
                let mut s2 = C64::new(0.0, 0.0);
                let mut q = C64::new(0.0, 0.0);
                for (&d, &g) in self.poles.iter().zip(&self.g) {
                    let r = one / (C64::new(d, 0.0) - zi);
                    s1 += r * g;
                    s2 += r * r * g;
                    q -= r;
                }
                let f = one - sigma * s1;
                if f == C64::new(0.0, 0.0) {
                    done[i] = true;
                    continue;
                }
                // P = f·Π(d_s - μ) is the characteristic polynomial.
                let newton = one / (-sigma * s2 / f + q);
                let mut repulsion = C64::new(0.0, 0.0);
                for (j, &zj) in z.iter().enumerate() {
                    if j != i {
                        repulsion += one / (zi - zj);
                    }
                }
                let step = newton / (one - newton * repulsion);
                if !step.is_finite() {
                    return false;
                }
                z[i] = zi - step;
                let rel = step.norm() / z[i].norm().max(floor);
                if rel <= 8.0 * f64::EPSILON {
                    done[i] = true;
                } else {
                    worst = worst.max(rel);
                }
            }
            if done.iter().all(|&d| d) {
                return true;
            }
        }
        // Corrections stuck just above rounding level do not affect ρ at the
        // 1e-6 level the classification needs.
        worst <= 1e-10
    }

    /// `ρ(E(σ))` through the reduced eigenproblem, falling back to the
    /// companion matrix when the secular iteration fails. `NaN` marks a
    /// singular `A(σ)`.
    pub fn radius(&self, sigma: C64) -> f64 {
        let mut guess = Vec::new();
        self.radius_warm(sigma, &mut guess)
    }

    /// [`radius`](Self::radius) starting the secular iteration from `guess`,
    /// typically the eigenvalues at a neighbouring `σ`; `guess` is replaced by
    /// the eigenvalues at `σ`. An empty or degenerate guess is ignored.
    pub fn radius_warm(&self, sigma: C64, guess: &mut Vec<C64>) -> f64 {
        match self.eigenvalues_from(sigma, guess) {
            Some(z) => {
                let mut rho = 0.0f64;
                for &mu in &z {
                    if mu.norm() <= 1e-300 {
                        rho = f64::NAN;
                        break;
                    }
                    rho = rho.max(self.mode_radius(mu));
                }
                *guess = z;
                rho
            }
            None => {
                guess.clear();
                self.radius_companion(sigma)
            }
        }
    }

    /// Eigenvalues of `N(σ)`, trying in turn the symmetric secular solver
    /// (real `σ`), Aberth from `guess`, from the first-order guess, and from
    /// the eigenvalues at `Re σ`.
    fn eigenvalues_from(&self, sigma: C64, guess: &[C64]) -> Option<Vec<C64>> {
        if sigma.im == 0.0 {
            if let Some(z) = self.real_axis_eigenvalues(sigma.re) {
                return Some(z);
            }
        }
        let usable = guess.len() == self.width()
            && guess.iter().all(|z| z.is_finite())
            && (0..guess.len()).all(|i| (0..i).all(|j| guess[i] != guess[j]));
        if usable {
            let mut z = guess.to_vec();
            if self.refine_secular(sigma, &mut z) {
                return Some(z);
            }
        }
        let mut z = self.first_order_guess(sigma);
        if self.refine_secular(sigma, &mut z) {
            return Some(z);
        }
        let mut z = self.real_axis_eigenvalues(sigma.re)?;
        self.refine_secular(sigma, &mut z).then_some(z)
    }

    /// For real `σ`, `N(σ)` is similar to `diag(poles) - σ √g √gᵀ`.
    fn real_axis_eigenvalues(&self, sigma: f64) -> Option<Vec<C64>> {
        let u: Vec<f64> = self.g.iter().map(|&g| sqrt(g)).collect();
        let eig = RankOneEigen::new(&self.poles, &u, -sigma).ok()?;
        Some(eig.eigenvalues().iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Radii along one row of a scan, warm-starting each point from the last.
    pub fn radius_row(&self, sigmas: impl IntoIterator<Item = C64>) -> Vec<f64> {
        let mut guess = Vec::new();
        sigmas.into_iter().map(|s| self.radius_warm(s, &mut guess)).collect()
    }

    /// `ρ(E(σ))` from the explicit companion matrix.
    pub fn radius_companion(&self, sigma: C64) -> f64 {
        match self.companion(sigma) {
            Ok(e) => spectral_radius(&e),
            Err(_) => f64::NAN,
        }
    }

    /// Largest root modulus of `μζ^k - Σ_j b_j ζ^{k-1-j}`.
    fn mode_radius(&self, mu: C64) -> f64 {
        let b = self.scheme.b();
        match b.len() {
            1 => (b[0] / mu).norm(),
            2 => {
                // μζ² - b₀ζ - b₁ = 0
                let disc = (C64::new(b[0] * b[0], 0.0) + mu * (4.0 * b[1])).sqrt();
                let big = if (C64::new(b[0], 0.0) + disc).norm() >= (C64::new(b[0], 0.0) - disc).norm() {
                    C64::new(b[0], 0.0) + disc
                } else {
                    C64::new(b[0], 0.0) - disc
                };
                let r1 = big / (mu * 2.0);
                // Product of roots is -b₁/μ.
                let r2 = if r1.norm() > 0.0 { -b[1] / (mu * r1) } else { C64::new(0.0, 0.0) };
                r1.norm().max(r2.norm())
            }
            _ => {
                let mut coeffs = Vec::with_capacity(b.len() + 1);
                coeffs.push(mu);
                coeffs.extend(b.iter().map(|&x| C64::new(-x, 0.0)));
                poly_roots(&coeffs)
                    .iter()
                    .fold(0.0f64, |m, z| m.max(z.norm()))
            }
        }
    }
}

/// Roots of `Σ_i c_i z^{d-i}` (highest degree first) by Aberth iteration.
pub fn poly_roots(coeffs: &[C64]) -> Vec<C64> {
    let d = coeffs.len() - 1;
    let lead = coeffs[0];
    let c: Vec<C64> = coeffs.iter().map(|&x| x / lead).collect();
    // Cauchy bound for the initial circle.
    let bound = 1.0 + c[1..].iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let radius = 0.5 * bound;
    let mut z: Vec<C64> = (0..d)
        .map(|i| {
            let angle = 2.0 * core::f64::consts::PI * (i as f64 + 0.25) / d as f64 + 0.4;
            C64::from_polar(radius, angle)
        })
        .collect();
    let eval = |x: C64| -> (C64, C64) {
        let mut p = c[0];
        let mut dp = C64::new(0.0, 0.0);
        for &ci in &c[1..] {
            dp = dp * x + p;
            p = p * x + ci;
        }
        (p, dp)
    };
    for _ in 0..500 {
        let mut worst = 0.0f64;
        for i in 0..d {
            let (p, dp) = eval(z[i]);
            if p == C64::new(0.0, 0.0) {
                continue;
            }
            let newton = p / dp;
            let mut repulsion = C64::new(0.0, 0.0);
            for j in 0..d {
                if j != i {
                    repulsion += C64::new(1.0, 0.0) / (z[i] - z[j]);
                }
            }
            let step = newton / (C64::new(1.0, 0.0) - newton * repulsion);
            if step.is_finite() {
                z[i] -= step;
                worst = worst.max(step.norm() / z[i].norm().max(1e-300));
            }
        }
        if worst <= 1e-15 {
            break;
        }
    }
    z
}

/// `E(σ)` for the model problem.
pub fn amplification_matrix(sigma: C64, alpha: f64, k: usize, m: usize, dt: f64) -> Result<CMatrix> {
    StabilityModel::new(alpha, k, m, dt)?.companion(sigma)
}

/// Spectral radius of a square complex matrix.
///
/// Up to 14 normalized squarings give the Gelfand estimate
/// `‖B^{2^p}‖^{1/2^p}`, and the columns of the normalized power span the
/// dominant invariant subspace. A Rayleigh-Ritz step on that subspace then
/// recovers the dominant eigenvalues to working precision; Ritz values whose
/// residual is not small are discarded and the Gelfand estimate is kept if
/// none survive.
pub fn spectral_radius(b: &CMatrix) -> f64 {
    const SQUARINGS: u32 = 14;
    const BLOCK: usize = 4;
    let n = b.dim();
    if n == 0 {
        return 0.0;
    }
    let norm = b.frobenius();
    if norm == 0.0 {
        return 0.0;
    }
    if !norm.is_finite() {
        return f64::NAN;
    }

    let mut p = b.clone();
    p.scale(1.0 / norm);
    // log ρ ≈ (log_scale + log ‖P‖) / 2^i where P = B^{2^i} / e^{log_scale}
    let mut log_scale = ln(norm);
    let mut power = 1.0f64;
    let mut gelfand = norm;
    for _ in 0..SQUARINGS {
        let sq = p.mul(&p);
        let f = sq.frobenius();
        if f == 0.0 {
            // Nilpotent to working precision.
            return 0.0;
        }
        log_scale *= 2.0;
        power *= 2.0;
        log_scale += ln(f);
        p = sq;
        p.scale(1.0 / f);
        gelfand = crate::fmath::exp(log_scale / power);
    }

    // Rayleigh-Ritz on span(P X₀).
    let cols = BLOCK.min(n);
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let x0: Vec<C64> = (0..n)
            .map(|i| {
                let h = ((i * 7919 + j * 104_729 + 13) % 1009) as f64 / 1009.0;
                C64::new(h - 0.5, ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.5)
            })
            .collect();
        let mut v = p.mul_vec(&x0);
        for _ in 0..2 {
            for q in &basis {
                let proj: C64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let nv = sqrt(v.iter().map(|z| z.norm_sqr()).sum());
        if nv > 1e-10 {
            basis.push(v.into_iter().map(|z| z / nv).collect());
        }
    }
    if basis.is_empty() {
        return gelfand;
    }
    let bq: Vec<Vec<C64>> = basis.iter().map(|q| b.mul_vec(q)).collect();
    let r = basis.len();
    let mut h = vec![C64::new(0.0, 0.0); r * r];
    for i in 0..r {
        for j in 0..r {
            h[i * r + j] = basis[i].iter().zip(&bq[j]).map(|(a, b)| a.conj() * b).sum();
        }
    }
    let ritz = small_eigenvalues(r, &h);
    let mut best: Option<f64> = None;
    for theta in ritz {
        // Ritz vector y = Q s with (H - θI)s = 0.
        let Some(s) = null_vector(r, &h, theta) else { continue };
        let y: Vec<C64> = (0..n).map(|i| (0..r).map(|j| basis[j][i] * s[j]).sum()).collect();
        let by: Vec<C64> = (0..n).map(|i| (0..r).map(|j| bq[j][i] * s[j]).sum()).collect();
        let ny2: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        let ny = sqrt(ny2);
        if ny == 0.0 {
            continue;
        }
        // Rayleigh quotient on B itself; exact for multiple normal eigenvalues
        // where the characteristic roots of H are only ε^{1/r} accurate.
        let theta = y.iter().zip(&by).map(|(a, b)| a.conj() * b).sum::<C64>() / ny2;
        let res = sqrt(by.iter().zip(&y).map(|(a, b)| (a - b * theta).norm_sqr()).sum::<f64>());
        if ny > 0.0 && res <= 1e-8 * norm * ny {
            best = Some(best.map_or(theta.norm(), |m: f64| m.max(theta.norm())));
        }
    }
    match best {
        Some(rho) if abs(rho - gelfand) <= 1e-2 * gelfand.max(1e-300) => rho,
        _ => gelfand,
    }
}

/// Eigenvalues of a small dense matrix from its characteristic polynomial.
fn small_eigenvalues(r: usize, h: &[C64]) -> Vec<C64> {
    if r == 1 {
        return vec![h[0]];
    }
    // Faddeev-LeVerrier: c_{r-m} coefficients of det(zI - H).
    let mut coeffs = vec![C64::new(1.0, 0.0)];
    let mut mk = vec![C64::new(0.0, 0.0); r * r];
    let mut ck = C64::new(1.0, 0.0);
    for m in 1..=r {
        // M_m = H M_{m-1} + c_{m-1} I
        let mut next = vec![C64::new(0.0, 0.0); r * r];
        for i in 0..r {
            for j in 0..r {
                let mut acc = C64::new(0.0, 0.0);
                for l in 0..r {
                    acc += h[i * r + l] * mk[l * r + j];
                }
                next[i * r + j] = acc;
            }
            next[i * r + i] += ck;
        }
        mk = next;
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..r {
            for l in 0..r {
                tr += h[i * r + l] * mk[l * r + i];
            }
        }
        ck = -tr / m as f64;
        coeffs.push(ck);
    }
    poly_roots(&coeffs)
}

/// A unit vector nearly in the null space of `H - θI` (`r ≤ 4`).
fn null_vector(r: usize, h: &[C64], theta: C64) -> Option<Vec<C64>> {
    // Inverse iteration with a slightly perturbed shift.
    let shift = theta + C64::new(1e-10, 1e-10) * (1.0 + theta.norm());
    let mut a: Vec<C64> = h.to_vec();
    for i in 0..r {
        a[i * r + i] -= shift;
    }
    let mut x = vec![C64::new(1.0, 0.3); r];
    for _ in 0..3 {
        x = complex_solve(r, &a, &x)?;
        let nx = sqrt(x.iter().map(|z| z.norm_sqr()).sum());
        if !(nx > 0.0 && nx.is_finite()) {
            return None;
        }
        for z in x.iter_mut() {
            *z /= nx;
        }
    }
    Some(x)
}

fn complex_solve(r: usize, a: &[C64], b: &[C64]) -> Option<Vec<C64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..r {
        let piv = (col..r).max_by(|&i, &j| m[i * r + col].norm().total_cmp(&m[j * r + col].norm()))?;
        if m[piv * r + col].norm() == 0.0 {
            return None;
        }
        if piv != col {
            for c in 0..r {
                m.swap(piv * r + c, col * r + c);
            }
            x.swap(piv, col);
        }
        for row in col + 1..r {
            let f = m[row * r + col] / m[col * r + col];
            for c in col..r {
                let v = m[col * r + c];
                m[row * r + c] -= f * v;
            }
            let v = x[col];
            x[row] -= f * v;
        }
    }
    for row in (0..r).rev() {
        let mut s = x[row];
        for c in row + 1..r {
            s -= m[row * r + c] * x[c];
        }
        x[row] = s / m[row * r + row];
    }
    Some(x)
}

/// Which route computes `ρ` in a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusMethod {
    /// Secular equation plus per-mode roots.
    #[default]
    Reduced,
    /// Explicit companion matrix with repeated squaring.
    Companion,
}

/// Grid of `σ = x + iy` values and the scheme to classify.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub alpha: f64,
    pub k: usize,
    pub m: usize,
    pub dt: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub nx: usize,
    pub ny: usize,
    pub method: RadiusMethod,
}

/// Points within this distance of `ρ = 1` are reported as boundary points.
pub const BOUNDARY_BAND: f64 = 1e-6;

impl RegionSpec {
    /// `T = 1`, `N = 100`, `M = 30`, BDF-3 on `[-15, 5] × [-10, 10]` at
    /// 301 × 301 points.
    pub fn default_window(alpha: f64) -> Self {
        RegionSpec {
            alpha,
            k: 3,
            m: 30,
            dt: 0.01,
            x_range: (-15.0, 5.0),
            y_range: (-10.0, 10.0),
            nx: 301,
            ny: 301,
            method: RadiusMethod::Reduced,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 {
            return Err(Error::Domain {
                param: "nx",
                value: self.nx as f64,
                expected: "[2, ∞)",
            });
        }
        if self.ny < 2 {
            return Err(Error::Domain {
                param: "ny",
                value: self.ny as f64,
                expected: "[2, ∞)",
            });
        }
        for (name, (lo, hi)) in [("x_range", self.x_range), ("y_range", self.y_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Domain {
                    param: name,
                    value: lo,
                    expected: "a finite interval",
                });
            }
        }
        Ok(())
    }

    pub fn x(&self, ix: usize) -> f64 {
        let (lo, hi) = self.x_range;
        lo + (hi - lo) * ix as f64 / (self.nx - 1) as f64
    }

    pub fn y(&self, iy: usize) -> f64 {
        let (lo, hi) = self.y_range;
        lo + (hi - lo) * iy as f64 / (self.ny - 1) as f64
    }

    /// `σ` of flat index `iy·nx + ix`.
    pub fn sigma(&self, index: usize) -> C64 {
        C64::new(self.x(index % self.nx), self.y(index / self.nx))
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn model(&self) -> Result<StabilityModel> {
        StabilityModel::new(self.alpha, self.k, self.m, self.dt)
    }
}

/// Classification of one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointClass {
    Stable,
    Unstable,
    Boundary,
    Undefined,
}

impl PointClass {
    pub fn of(rho: f64) -> Self {
        if rho.is_nan() {
            PointClass::Undefined
        } else if abs(rho - 1.0) <= BOUNDARY_BAND {
            PointClass::Boundary
        } else if rho < 1.0 {
            PointClass::Stable
        } else {
            PointClass::Unstable
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PointClass::Stable => "stable",
            PointClass::Unstable => "unstable",
            PointClass::Boundary => "boundary",
            PointClass::Undefined => "undefined",
        }
    }
}

/// `ρ(E(σ))` over a [`RegionSpec`] grid; `NaN` marks singular points.
#[derive(Debug, Clone)]
pub struct RegionField {
    spec: RegionSpec,
    rho: Vec<f64>,
}

impl RegionField {
    /// Wraps values computed elsewhere, in flat index order `iy·nx + ix`.
    pub fn from_values(spec: RegionSpec, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != spec.len() {
            return Err(Error::LengthMismatch {
                expected: spec.len(),
                found: rho.len(),
            });
        }
        Ok(RegionField { spec, rho })
    }

    pub fn spec(&self) -> &RegionSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.rho
    }

    pub fn rho(&self, ix: usize, iy: usize) -> f64 {
        self.rho[iy * self.spec.nx + ix]
    }

    /// Points with `ρ < 1`, the boundary band included.
    pub fn stable_count(&self) -> usize {
        self.rho.iter().filter(|&&r| r < 1.0).count()
    }

    pub fn undefined_count(&self) -> usize {
        self.rho.iter().filter(|r| r.is_nan()).count()
    }

    pub fn count(&self, class: PointClass) -> usize {
        self.rho.iter().filter(|&&r| PointClass::of(r) == class).count()
    }
}

/// Radii of row `iy` (fixed `Im σ`) in order of increasing `Re σ`.
pub fn scan_row(spec: &RegionSpec, model: &StabilityModel, iy: usize) -> Vec<f64> {
    let sigmas = (0..spec.nx).map(|ix| C64::new(spec.x(ix), spec.y(iy)));
    match spec.method {
        RadiusMethod::Reduced => model.radius_row(sigmas),
        RadiusMethod::Companion => sigmas.map(|s| model.radius_companion(s)).collect(),
    }
}

/// Evaluates `ρ` at every grid point, sequentially.
pub fn region_scan(spec: &RegionSpec) -> Result<RegionField> {
    spec.validate()?;
    let model = spec.model()?;
    let mut rho = Vec::with_capacity(spec.len());
    for iy in 0..spec.ny {
        rho.extend(scan_row(spec, &model, iy));
    }
    RegionField::from_values(spec.clone(), rho)
}

/// Both sides of the discrete energy estimate for `F = -λφ + f`.
///
/// The left side is `λ_min(G)‖Φ^N‖²_{ω₀} + (Δt/2)(1-τ_k²) Σ_{n≥k} (‖Φ^n‖²_{ω₁} + λ|φ^n|²)`
/// with the discrete norms `‖v‖²_{ω₀} = Σ w_s(1-θ_s)v_s²` and
/// `‖v‖²_{ω₁} = Σ w_s θ_s v_s²`. The right side
/// `[λ_max(G) α + (T/2)(1-α)] φ₀² / (1-τ_k²)` needs the multiplier matrix `G`,
/// known in closed form for `k ≤ 2` only; for higher orders `g_bounds` is
/// `None`, `λ_min` is taken as 1 and only boundedness can be checked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyCheck {
    pub lhs: f64,
    pub rhs: Option<f64>,
    pub g_bounds: Option<(f64, f64)>,
    /// `‖Φ^N‖²_{ω₀}`
    pub final_norm: f64,
    /// `Δt Σ_{n≥k} (‖Φ^n‖²_{ω₁} + λ|φ^n|²)`
    pub dissipation: f64,
}

/// Relative slack in [`EnergyCheck::holds`]; with `λ = f = 0` the two sides
/// agree exactly and only summation rounding separates them.
pub const ENERGY_ROUNDING: f64 = 1e-12;

impl EnergyCheck {
    pub fn holds(&self) -> Option<bool> {
        self.rhs.map(|r| self.lhs <= r * (1.0 + ENERGY_ROUNDING))
    }
}

/// Eigenvalue bounds of the multiplier matrix for BDF-1 (`G = [1/2]`) and
/// BDF-2 (`G = ¼[[1, -2], [-2, 5]]`).
pub fn multiplier_bounds(k: usize) -> Option<(f64, f64)> {
    match k {
        1 => Some((0.5, 0.5)),
        2 => {
            let r = 2.0 * core::f64::consts::SQRT_2;
            Some(((3.0 - r) / 4.0, (3.0 + r) / 4.0))
        }
        _ => None,
    }
}

/// Marches `problem` (linear right-hand side) and evaluates [`EnergyCheck`].
pub fn energy_inequality(
    problem: &crate::problem::FdeProblem,
    m: usize,
    k: usize,
    n_steps: usize,
    options: crate::stepper::SolveOptions,
) -> Result<EnergyCheck> {
    let crate::problem::RhsSpec::Linear { lambda, .. } = problem.rhs() else {
        return Err(Error::Unsupported("the energy estimate is for linear right-hand sides"));
    };
    let lambda = *lambda;
    let tau = bdf_coefficients(k)?.tau_k();
    let mut solver = crate::stepper::Solver::new(problem, m, k, n_steps, options)?;
    let (nodes, weights) = (solver.grid().nodes().to_vec(), solver.grid().weights().to_vec());
    let norm = |v: &[f64], first: bool| -> f64 {
        v.iter()
            .zip(&nodes)
            .zip(&weights)
            .map(|((x, th), w)| w * if first { 1.0 - th } else { *th } * x * x)
            .sum()
    };
    let dt = solver.dt();
    let mut sum = 0.0;
    while !solver.is_done() {
        let phi = solver.step()?;
        if solver.step_index() >= k {
            sum += norm(solver.current(), false) + lambda * phi * phi;
        }
    }
    let final_norm = norm(solver.current(), true);
    let g_bounds = multiplier_bounds(k);
    let lmin = g_bounds.map_or(1.0, |g| g.0);
    let lhs = lmin * final_norm + 0.5 * dt * (1.0 - tau * tau) * sum;
    let alpha = problem.alpha();
    let phi0 = problem.phi0();
    let rhs = g_bounds.map(|(_, lmax)| {
        (lmax * alpha + 0.5 * problem.horizon() * (1.0 - alpha)) * phi0 * phi0 / (1.0 - tau * tau)
    });
    Ok(EnergyCheck {
        lhs,
        rhs,
        g_bounds,
        final_norm,
        dissipation: dt * sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn radius_of_simple_matrices() {
        assert!((spectral_radius(&CMatrix::identity(3)) - 1.0).abs() < 1e-12);
        let d = CMatrix::from_diagonal(&[c(0.5, 0.0), c(-0.25, 0.0)]);
        assert!((spectral_radius(&d) - 0.5).abs() < 1e-12);
        // Rotation: eigenvalues ±i, equal modulus.
        let r = CMatrix::from_rows(2, vec![c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        assert!((spectral_radius(&r) - 1.0).abs() < 1e-10);
        // Jordan block.
        let j = CMatrix::from_rows(2, vec![c(0.9, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.9, 0.0)]);
        assert!((spectral_radius(&j) - 0.9).abs() < 1e-3);
        assert_eq!(spectral_radius(&CMatrix::zeros(3)), 0.0);
    }

    #[test]
    fn random_matrix_matches_characteristic_roots() {
        let n = 6;
        let mut state = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 10_000) as f64 / 5_000.0 - 1.0
        };
        for _ in 0..5 {
            let data: Vec<C64> = (0..n * n).map(|_| c(next(), next())).collect();
            let a = CMatrix::from_rows(n, data.clone());
            let roots = small_eigenvalues_dense(n, &data);
            let want = roots.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let got = spectral_radius(&a);
            assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
        }
    }

    /// Characteristic polynomial by Faddeev-LeVerrier, any size.
    fn small_eigenvalues_dense(n: usize, h: &[C64]) -> Vec<C64> {
        super::small_eigenvalues(n, h)
    }

    #[test]
    fn sigma_zero_bdf1_is_diagonal() {
        let alpha = 0.5;
        let dt = 0.1;
        let grid = gauss_jacobi_grid(4, alpha).unwrap();
        let model = StabilityModel::with_grid(&grid, 1, dt).unwrap();
        let e = model.companion(c(0.0, 0.0)).unwrap();
        for (s, &th) in grid.nodes().iter().enumerate() {
            let want = (1.0 - th) / ((1.0 - th) + dt * th);
            assert!((e[(s, s)].re - want).abs() < 1e-15);
            assert!(want > 0.0 && want < 1.0);
            for col in 0..grid.len() {
                if col != s {
                    assert_eq!(e[(s, col)], c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn sigma_zero_bdf2_decouples_into_modes() {
        let (alpha, dt) = (0.6, 0.05);
        let grid = gauss_jacobi_grid(5, alpha).unwrap();
        let model = StabilityModel::with_grid(&grid, 2, dt).unwrap();
        let s = bdf_coefficients(2).unwrap();
        // Per mode: α₂ζ² - b₀γζ - b₁γ = 0 with γ = (1-θ)/(α₂(1-θ)+Δtθ) · α₂.
        let mut want = 0.0f64;
        for &th in grid.nodes() {
            let gamma = (1.0 - th) / (s.alpha_k() * (1.0 - th) + dt * th);
            let roots = poly_roots(&[c(1.0, 0.0), c(-s.b()[0] * gamma, 0.0), c(-s.b()[1] * gamma, 0.0)]);
            want = want.max(roots.iter().fold(0.0f64, |m, z| m.max(z.norm())));
        }
        let e = model.companion(c(0.0, 0.0)).unwrap();
        assert_eq!(e.dim(), 2 * grid.len());
        let full = spectral_radius(&e);
        assert!((full - want).abs() < 1e-6 * want, "{full} vs {want}");
        assert!((model.radius(c(0.0, 0.0)) - want).abs() < 1e-12);
    }

    #[test]
    fn reduced_route_matches_companion() {
        for k in 1..=5 {
            let model = StabilityModel::new(0.4, k, 6, 0.01).unwrap();
            for &sigma in &[c(-0.3, 0.2), c(-5.0, 3.0), c(1.5, -0.5), c(-40.0, 0.0), c(0.0, 7.0)] {
                let fast = model.radius(sigma);
                let slow = model.radius_companion(sigma);
                assert!((fast - slow).abs() <= 1e-6 * slow.max(1.0), "k {k} σ {sigma}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn negative_real_axis_is_stable_for_bdf3() {
        let model = StabilityModel::new(0.6, 3, 30, 0.01).unwrap();
        for i in 0..=50 {
            let sigma = c(-10.0 * i as f64 / 50.0, 0.0);
            assert!(model.radius(sigma) < 1.0, "σ {sigma}");
        }
    }

    #[test]
    fn region_spec_validation() {
        let mut spec = RegionSpec::default_window(0.5);
        spec.nx = 1;
        assert!(region_scan(&spec).is_err());
    }

    #[test]
    fn single_point_at_origin() {
        let spec = RegionSpec {
            x_range: (0.0, 0.0),
            y_range: (0.0, 0.0),
            nx: 2,
            ny: 2,
            ..RegionSpec::default_window(0.6)
        };
        let field = region_scan(&spec).unwrap();
        assert!(field.values().iter().all(|&r| r < 1.0));
        assert_eq!(field.stable_count(), 4);
    }

    #[test]
    fn classification() {
        assert_eq!(PointClass::of(0.5), PointClass::Stable);
        assert_eq!(PointClass::of(1.0 - 1e-7), PointClass::Boundary);
        assert_eq!(PointClass::of(1.5), PointClass::Unstable);
        assert_eq!(PointClass::of(f64::NAN), PointClass::Undefined);
    }


    #[test]
    fn multiplier_identity_for_bdf2() {
        // 2(3a - 4b + c)a/2 = Gform(a, b) - Gform(b, c) + |a - 2b + c|²/4
        let g = |b: f64, a: f64| 0.25 * (b * b - 4.0 * a * b + 5.0 * a * a);
        for &(a, b, c) in &[(1.0, 0.3, -2.0), (0.5, 0.5, 0.5), (-1.2, 3.0, 0.7)] {
            let left = (1.5 * a - 2.0 * b + 0.5 * c) * a;
            let right = g(b, a) - g(c, b) + 0.25 * (a - 2.0 * b + c) * (a - 2.0 * b + c);
            assert!((left - right).abs() < 1e-14);
        }
        let (lo, hi) = multiplier_bounds(2).unwrap();
        assert!((lo * hi - 1.0 / 16.0).abs() < 1e-15 && (lo + hi - 1.5).abs() < 1e-15);
    }

    #[test]
    fn energy_estimate_for_low_orders() {
        for &lambda in &[0.0, 1.0, 10.0] {
            let p = crate::problem::FdeProblem::new(0.5, 1.0, 1.0, crate::problem::RhsSpec::linear(lambda, |_| 0.0)).unwrap();
            for k in 1..=2 {
                let e = energy_inequality(&p, 10, k, 200, Default::default()).unwrap();
                assert_eq!(e.holds(), Some(true), "λ {lambda} k {k}: {e:?}");
            }
            let e = energy_inequality(&p, 10, 4, 200, Default::default()).unwrap();
            assert!(e.rhs.is_none() && e.lhs.is_finite());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn conjugate_symmetry(x in -15.0f64..5.0, y in 0.0f64..10.0, k in 1usize..=5) {
            let model = StabilityModel::new(0.3, k, 8, 0.01).unwrap();
            let a = model.radius(c(x, y));
            let b = model.radius(c(x, -y));
            prop_assert!((a - b).abs() <= 1e-8 * a.max(1.0));
        }
    }
}
