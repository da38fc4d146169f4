//! Desk-scale numerics for the abstract reconstruction theory: spectral
//! model operators, range invariance, the penalty projection, the
//! regularized frozen Newton method, and the Hankel / linearized
//! injectivity verifications.
//!
//! Discretization: 1-D domain (0,1) with the cosine eigenbasis of the
//! Neumann Laplacian, normalized so coefficient l2 equals L2:
//! `phi_0 = 1`, `phi_j = sqrt(2) cos(j pi x)`, `lambda_j = (j pi)^2`.
//! Multiplication operators act through a midpoint collocation grid of
//! `4J` points, which represents products of modes below `J` without
//! aliasing. The observation functional is point evaluation at `x0 = 1`.
//!
//! All frozen-Newton linear algebra runs over the reals (stacked Re/Im)
//! because variant (a) involves conjugations and is only R-linear.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

type C = Complex64;

/// Truncation variant of the multiharmonic expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// keeps the sesquilinear tail `1/2 sum conj(c_i) c_{m+i}`
    A,
    /// plain quadratic cascade `1/4 sum c_l c_{m-l}`
    B,
}

/// Spectral data of the commuting operator triple (A, M, D) plus the
/// observation point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSystem {
    pub j_modes: usize,
    pub omega: f64,
    pub c: f64,
    pub b: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: Vec<C>,
    pub mu: Vec<C>,
    pub rho: Vec<C>,
    pub x0: f64,
}

impl SpectralSystem {
    /// Reference system: `lambda_j = (j pi)^2`, `mu_j = 1`,
    /// `rho_j = b lambda_j`, observation at `x0 = 1`.
    pub fn standard(j_modes: usize, omega: f64, c: f64, b: f64) -> Result<Self> {
        let lambda: Vec<C> = (0..j_modes)
            .map(|j| C::new((j as f64 * std::f64::consts::PI).powi(2), 0.0))
            .collect();
        let mu = vec![C::new(1.0, 0.0); j_modes];
        let rho: Vec<C> = lambda.iter().map(|l| l * b).collect();
        Self::new(j_modes, omega, c, b, lambda, mu, rho, 1.0)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        j_modes: usize,
        omega: f64,
        c: f64,
        b: f64,
        lambda: Vec<C>,
        mu: Vec<C>,
        rho: Vec<C>,
        x0: f64,
    ) -> Result<Self> {
        let sys = Self::new_unchecked(j_modes, omega, c, b, lambda, mu, rho, x0);
        sys.check_rho_lambda_mu()?;
        Ok(sys)
    }

    /// Constructor without the eigenvalue-condition check; used to build
    /// deliberately degenerate systems in diagnostics.
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(
        j_modes: usize,
        omega: f64,
        c: f64,
        b: f64,
        lambda: Vec<C>,
        mu: Vec<C>,
        rho: Vec<C>,
        x0: f64,
    ) -> Self {
        assert_eq!(lambda.len(), j_modes);
        assert_eq!(mu.len(), j_modes);
        assert_eq!(rho.len(), j_modes);
        Self { j_modes, omega, c, b, beta: 0.0, gamma: 0.0, lambda, mu, rho, x0 }
    }

    /// The uniqueness condition: `rho_j/lambda_j = rho_l/lambda_l` and
    /// `mu_j/lambda_j^2 = mu_l/lambda_l^2` force `j = l`. Checked by
    /// cross-multiplication so `lambda_0 = 0` needs no special casing.
    pub fn check_rho_lambda_mu(&self) -> Result<()> {
        let tol = 1e-12;
        for j in 0..self.j_modes {
            for l in (j + 1)..self.j_modes {
                if (self.lambda[j] - self.lambda[l]).norm() < tol {
                    return Err(Error::Domain(format!(
                        "eigenvalues lambda_{j} and lambda_{l} coincide"
                    )));
                }
                let rho_eq = (self.rho[j] * self.lambda[l] - self.rho[l] * self.lambda[j])
                    .norm()
                    < tol * (1.0 + self.rho[j].norm() * self.lambda[l].norm());
                let mu_eq = (self.mu[j] * self.lambda[l] * self.lambda[l]
                    - self.mu[l] * self.lambda[j] * self.lambda[j])
                    .norm()
                    < tol * (1.0 + self.lambda[l].norm_sqr());
                if rho_eq && mu_eq {
                    return Err(Error::Domain(format!(
                        "(rho, lambda, mu) condition violated for modes {j}, {l}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Normalized cosine basis value `phi_j(x)`.
    pub fn basis(&self, j: usize, x: f64) -> f64 {
        if j == 0 {
            1.0
        } else {
            std::f64::consts::SQRT_2 * (j as f64 * std::f64::consts::PI * x).cos()
        }
    }

    /// Collocation grid: `4J` midpoints of (0,1).
    pub fn collocation_points(&self) -> Vec<f64> {
        let n = 4 * self.j_modes;
        (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
    }

    /// Evaluate a coefficient vector on the collocation grid.
    pub fn to_grid(&self, coeff: &[C]) -> Vec<C> {
        self.collocation_points()
            .iter()
            .map(|&x| {
                coeff
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * self.basis(j, x))
                    .sum()
            })
            .collect()
    }

    /// Project grid values back to the first `J` coefficients (midpoint
    /// rule; exact for band-limited products).
    pub fn to_coeff(&self, grid: &[C]) -> Vec<C> {
        let n = grid.len();
        let pts = self.collocation_points();
        (0..self.j_modes)
            .map(|j| {
                grid.iter()
                    .zip(&pts)
                    .map(|(g, &x)| g * self.basis(j, x))
                    .sum::<C>()
                    / n as f64
            })
            .collect()
    }

    /// Observation row: `C_m phat_m = sum_j phat_{m,j} phi_j(x0)`.
    pub fn observe(&self, coeff: &[C]) -> C {
        coeff
            .iter()
            .enumerate()
            .map(|(j, c)| c * self.basis(j, self.x0))
            .sum()
    }

    /// Symbol of `D_m`: `-m^2 omega^2 mu_j + c^2 lambda_j + i m omega rho_j`.
    pub fn dm_symbol(&self, m: usize, j: usize) -> C {
        let mf = m as f64;
        -mf * mf * self.omega * self.omega * self.mu[j]
            + self.c * self.c * self.lambda[j]
            + C::new(0.0, mf * self.omega) * self.rho[j]
    }
}

/// State of the abstract problem: one eta and one phat coefficient vector
/// per harmonic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractState {
    pub eta: Vec<Vec<C>>,
    pub phat: Vec<Vec<C>>,
}

impl AbstractState {
    pub fn zero(m_harmonics: usize, j_modes: usize) -> Self {
        Self {
            eta: vec![vec![C::new(0.0, 0.0); j_modes]; m_harmonics],
            phat: vec![vec![C::new(0.0, 0.0); j_modes]; m_harmonics],
        }
    }

    pub fn m_harmonics(&self) -> usize {
        self.eta.len()
    }

    /// eta-space weight of harmonic m (1-based): `w_m = m^{-2}`.
    pub fn weight(m: usize) -> f64 {
        1.0 / ((m * m) as f64)
    }

    /// Weighted state norm: `sqrt(sum_m w_m |eta_m|^2 + sum_m |phat_m|^2)`.
    pub fn norm(&self) -> f64 {
        let mut acc = 0.0;
        for (i, e) in self.eta.iter().enumerate() {
            acc += Self::weight(i + 1) * e.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        for p in &self.phat {
            acc += p.iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
        acc.sqrt()
    }

    pub fn sub(&self, other: &AbstractState) -> AbstractState {
        AbstractState {
            eta: self
                .eta
                .iter()
                .zip(&other.eta)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
            phat: self
                .phat
                .iter()
                .zip(&other.phat)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        }
    }
}

/// Modewise multiplication by the `D_m` symbol.
pub fn apply_dm(sys: &SpectralSystem, m: usize, phat_m: &[C]) -> Vec<C> {
    phat_m
        .iter()
        .enumerate()
        .map(|(j, p)| sys.dm_symbol(m, j) * p)
        .collect()
}

/// The bilinear (variant b) / sesquilinear-augmented (variant a) harmonic
/// combination `B~_m(c)` for a vector of harmonic amplitudes `c_1..c_M`.
pub fn b_tilde(variant: Variant, m: usize, c: &[C]) -> C {
    let mm = c.len();
    let mut out = C::new(0.0, 0.0);
    // 1/4 sum_{l=1}^{m-1} c_l c_{m-l}; empty for m = 1
    for l in 1..m {
        if l <= mm && m - l <= mm {
            out += 0.25 * c[l - 1] * c[m - l - 1];
        }
    }
    if variant == Variant::A {
        // 1/2 sum over k = m+2, m+4, ...: conj(c_{(k-m)/2}) c_{(k+m)/2}
        let mut i = 1;
        while m + i <= mm {
            out += 0.5 * c[i - 1].conj() * c[m + i - 1];
            i += 1;
        }
    }
    out
}

/// Exact derivative of the quadratic map `c -> B~_m(c)` in direction `d`
/// (the odd part of a quadratic is its differential).
pub fn d_b_tilde(variant: Variant, m: usize, c: &[C], d: &[C]) -> C {
    let cp: Vec<C> = c.iter().zip(d).map(|(a, b)| a + b).collect();
    let cm: Vec<C> = c.iter().zip(d).map(|(a, b)| a - b).collect();
    0.5 * (b_tilde(variant, m, &cp) - b_tilde(variant, m, &cm))
}

/// Grid values of `B~_m(phat(x))` for a full state.
fn b_tilde_grid(sys: &SpectralSystem, variant: Variant, m: usize, phat: &[Vec<C>]) -> Vec<C> {
    let grids: Vec<Vec<C>> = phat.iter().map(|p| sys.to_grid(p)).collect();
    let n = 4 * sys.j_modes;
    (0..n)
        .map(|i| {
            let c: Vec<C> = grids.iter().map(|g| g[i]).collect();
            b_tilde(variant, m, &c)
        })
        .collect()
}

/// Multiplication operator `B_m(phat)`: coefficientwise
/// `eta_m -> m^2 omega^2 B~_m(phat(x)) eta_m(x)`.
pub fn apply_bm(
    sys: &SpectralSystem,
    variant: Variant,
    m: usize,
    phat: &[Vec<C>],
    eta_m: &[C],
) -> Vec<C> {
    let bt = b_tilde_grid(sys, variant, m, phat);
    let eg = sys.to_grid(eta_m);
    let scale = (m * m) as f64 * sys.omega * sys.omega;
    let prod: Vec<C> = bt.iter().zip(&eg).map(|(b, e)| scale * b * e).collect();
    sys.to_coeff(&prod)
}

/// `B_m(phat)` as a J x J complex matrix (it is C-linear in eta).
pub fn bm_matrix(
    sys: &SpectralSystem,
    variant: Variant,
    m: usize,
    phat: &[Vec<C>],
) -> nalgebra::DMatrix<C> {
    let j = sys.j_modes;
    let mut mat = nalgebra::DMatrix::<C>::zeros(j, j);
    for col in 0..j {
        let mut e = vec![C::new(0.0, 0.0); j];
        e[col] = C::new(1.0, 0.0);
        let out = apply_bm(sys, variant, m, phat, &e);
        for (row, v) in out.iter().enumerate() {
            mat[(row, col)] = *v;
        }
    }
    mat
}

/// Full forward map `F(x) = (G_m(eta, phat), C_m phat_m)_m` with
/// `G_m = D_m phat_m + B_m(phat) eta_m`.
pub fn forward_op(
    sys: &SpectralSystem,
    variant: Variant,
    state: &AbstractState,
) -> (Vec<Vec<C>>, Vec<C>) {
    let m_h = state.m_harmonics();
    let mut models = Vec::with_capacity(m_h);
    let mut obs = Vec::with_capacity(m_h);
    for m in 1..=m_h {
        let dm = apply_dm(sys, m, &state.phat[m - 1]);
        let bm = apply_bm(sys, variant, m, &state.phat, &state.eta[m - 1]);
        models.push(dm.iter().zip(&bm).map(|(a, b)| a + b).collect());
        obs.push(sys.observe(&state.phat[m - 1]));
    }
    (models, obs)
}

/// Exact directional derivative `F'(x0)[dx]`, assembled from the formula
/// (the dB term uses the exact quadratic differential).
pub fn apply_fprime(
    sys: &SpectralSystem,
    variant: Variant,
    x0: &AbstractState,
    dx: &AbstractState,
) -> (Vec<Vec<C>>, Vec<C>) {
    let m_h = x0.m_harmonics();
    let pts = 4 * sys.j_modes;
    let grids0: Vec<Vec<C>> = x0.phat.iter().map(|p| sys.to_grid(p)).collect();
    let dgrids: Vec<Vec<C>> = dx.phat.iter().map(|p| sys.to_grid(p)).collect();
    let mut models = Vec::with_capacity(m_h);
    let mut obs = Vec::with_capacity(m_h);
    for m in 1..=m_h {
        let scale = (m * m) as f64 * sys.omega * sys.omega;
        // D_m d phat_m
        let mut out = apply_dm(sys, m, &dx.phat[m - 1]);
        // B_m(phat0) d eta_m
        let b0 = apply_bm(sys, variant, m, &x0.phat, &dx.eta[m - 1]);
        // (dB_m(phat0)[d phat]) eta0_m — pointwise on the grid
        let eg0 = sys.to_grid(&x0.eta[m - 1]);
        let mut grid = vec![C::new(0.0, 0.0); pts];
        for (i, g) in grid.iter_mut().enumerate() {
            let c0: Vec<C> = grids0.iter().map(|g| g[i]).collect();
            let dd: Vec<C> = dgrids.iter().map(|g| g[i]).collect();
            *g = scale * d_b_tilde(variant, m, &c0, &dd) * eg0[i];
        }
        let db = sys.to_coeff(&grid);
        for ((o, b), d) in out.iter_mut().zip(&b0).zip(&db) {
            *o += b + d;
        }
        models.push(out);
        obs.push(sys.observe(&dx.phat[m - 1]));
    }
    (models, obs)
}

/// Range-invariance remainder `r(x)` with
/// `r_phat_m = phat_m - phat0_m` and
/// `r_eta_m = eta_m - eta0_m + B_m(phat0)^{-1}[(B_m(phat) - B_m(phat0)) eta_m
///            - dB_m(phat0)[phat - phat0] eta0_m]`.
pub fn range_invar_remainder(
    sys: &SpectralSystem,
    variant: Variant,
    x0: &AbstractState,
    x: &AbstractState,
) -> Result<AbstractState> {
    let m_h = x0.m_harmonics();
    let pts = 4 * sys.j_modes;
    let grids0: Vec<Vec<C>> = x0.phat.iter().map(|p| sys.to_grid(p)).collect();
    let grids: Vec<Vec<C>> = x.phat.iter().map(|p| sys.to_grid(p)).collect();
    let mut r = AbstractState::zero(m_h, sys.j_modes);
    for m in 1..=m_h {
        for j in 0..sys.j_modes {
            r.phat[m - 1][j] = x.phat[m - 1][j] - x0.phat[m - 1][j];
        }
        let scale = (m * m) as f64 * sys.omega * sys.omega;
        // grid values of the bracket
        let eg = sys.to_grid(&x.eta[m - 1]);
        let eg0 = sys.to_grid(&x0.eta[m - 1]);
        let mut grid = vec![C::new(0.0, 0.0); pts];
        for (i, g) in grid.iter_mut().enumerate() {
            let c0: Vec<C> = grids0.iter().map(|gr| gr[i]).collect();
            let cc: Vec<C> = grids.iter().map(|gr| gr[i]).collect();
            let dd: Vec<C> = cc.iter().zip(&c0).map(|(a, b)| a - b).collect();
            let diff_b = b_tilde(variant, m, &cc) - b_tilde(variant, m, &c0);
            let db = d_b_tilde(variant, m, &c0, &dd);
            *g = scale * (diff_b * eg[i] - db * eg0[i]);
        }
        let bracket = sys.to_coeff(&grid);
        let bracket_norm: f64 = bracket.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        if bracket_norm < 1e-13 * (1.0 + scale) {
            // harmonic carries no eta coupling at this base point (e.g.
            // m = 1 in variant (b), where B~_1 vanishes identically)
            for j in 0..sys.j_modes {
                r.eta[m - 1][j] = x.eta[m - 1][j] - x0.eta[m - 1][j];
            }
            continue;
        }
        // invert B_m(phat0) on the discretization
        let bmat = bm_matrix(sys, variant, m, &x0.phat);
        let sv = bmat.clone().singular_values();
        let smin = sv[sv.len() - 1];
        if smin < 1e-10 {
            return Err(Error::IsomorphismViolation(format!(
                "B_{m}(phat0) smallest singular value {smin:.3e}"
            )));
        }
        let sol = bmat
            .lu()
            .solve(&nalgebra::DVector::from_column_slice(&bracket))
            .ok_or_else(|| Error::LinearSolve(format!("B_{m}(phat0) inverse")))?;
        for j in 0..sys.j_modes {
            r.eta[m - 1][j] = x.eta[m - 1][j] - x0.eta[m - 1][j] + sol[j];
        }
    }
    Ok(r)
}

/// Empirical closeness constant of the remainder: maximum over random
/// samples at distance `delta_x` of `||r(x) - (x - x0)|| / ||x - x0||`.
pub fn remainder_closeness_constant(
    sys: &SpectralSystem,
    variant: Variant,
    x0: &AbstractState,
    delta_x: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m_h = x0.m_harmonics();
    let mut worst = 0.0_f64;
    for _ in 0..n_samples {
        let mut dx = AbstractState::zero(m_h, sys.j_modes);
        for m in 0..m_h {
            for j in 0..sys.j_modes {
                dx.eta[m][j] = C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                dx.phat[m][j] = C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
            }
        }
        let nn = dx.norm();
        let mut x = x0.clone();
        for m in 0..m_h {
            for j in 0..sys.j_modes {
                x.eta[m][j] += dx.eta[m][j] * (delta_x / nn);
                x.phat[m][j] += dx.phat[m][j] * (delta_x / nn);
            }
        }
        let r = range_invar_remainder(sys, variant, x0, &x)?;
        let diff = r.sub(&x.sub(x0));
        worst = worst.max(diff.norm() / delta_x);
    }
    Ok(worst)
}

/// Penalty projection `(P eta)_m = eta_m - (sum_n n^{-2} eta_n) / (sum_n n^{-2})`.
pub fn penalty_p(eta: &[Vec<C>]) -> Vec<Vec<C>> {
    let m_h = eta.len();
    let s: f64 = (1..=m_h).map(|n| 1.0 / ((n * n) as f64)).sum();
    let j = eta.first().map(|e| e.len()).unwrap_or(0);
    let mut mean = vec![C::new(0.0, 0.0); j];
    for (n, e) in eta.iter().enumerate() {
        let w = 1.0 / (((n + 1) * (n + 1)) as f64);
        for (mj, v) in mean.iter_mut().zip(e) {
            *mj += w * v;
        }
    }
    for mj in &mut mean {
        *mj /= s;
    }
    eta.iter()
        .map(|e| e.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect()
}

// real packing order: [Re eta | Im eta | Re phat | Im phat], each block MJ
fn state_to_vec(x: &AbstractState) -> nalgebra::DVector<f64> {
    let m_h = x.m_harmonics();
    let j = x.eta[0].len();
    let mj = m_h * j;
    let mut v = nalgebra::DVector::zeros(4 * mj);
    for m in 0..m_h {
        for jj in 0..j {
            v[m * j + jj] = x.eta[m][jj].re;
            v[mj + m * j + jj] = x.eta[m][jj].im;
            v[2 * mj + m * j + jj] = x.phat[m][jj].re;
            v[3 * mj + m * j + jj] = x.phat[m][jj].im;
        }
    }
    v
}

fn vec_to_state(v: &nalgebra::DVector<f64>, m_h: usize, j: usize) -> AbstractState {
    let mj = m_h * j;
    let mut x = AbstractState::zero(m_h, j);
    for m in 0..m_h {
        for jj in 0..j {
            x.eta[m][jj] = C::new(v[m * j + jj], v[mj + m * j + jj]);
            x.phat[m][jj] = C::new(v[2 * mj + m * j + jj], v[3 * mj + m * j + jj]);
        }
    }
    x
}

/// Stack the forward-map output `(G_m, C_m phat_m)` into the real data
/// vector layout used by [`frozen_newton_run`].
pub fn f_to_vec(models: &[Vec<C>], obs: &[C]) -> nalgebra::DVector<f64> {
    let m_h = models.len();
    let j = models[0].len();
    let mj = m_h * j;
    let mut v = nalgebra::DVector::zeros(2 * mj + 2 * m_h);
    for m in 0..m_h {
        for jj in 0..j {
            v[m * j + jj] = models[m][jj].re;
            v[mj + m * j + jj] = models[m][jj].im;
        }
        v[2 * mj + m] = obs[m].re;
        v[2 * mj + m_h + m] = obs[m].im;
    }
    v
}

/// Frozen Jacobian as a real matrix (columns = exact directional
/// derivatives along the real coordinate directions).
pub fn fprime_matrix(
    sys: &SpectralSystem,
    variant: Variant,
    x0: &AbstractState,
) -> nalgebra::DMatrix<f64> {
    let m_h = x0.m_harmonics();
    let j = sys.j_modes;
    let n = 4 * m_h * j;
    let rows = 2 * m_h * j + 2 * m_h;
    let mut a = nalgebra::DMatrix::zeros(rows, n);
    for col in 0..n {
        let mut e = nalgebra::DVector::zeros(n);
        e[col] = 1.0;
        let dx = vec_to_state(&e, m_h, j);
        let (dm, dobs) = apply_fprime(sys, variant, x0, &dx);
        a.set_column(col, &f_to_vec(&dm, &dobs));
    }
    a
}

/// Report of one frozen Newton run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrozenNewtonReport {
    /// `||x_n - x_truth||` per iterate (when the truth is supplied)
    pub errors: Vec<f64>,
    /// data misfit per iterate
    pub misfits: Vec<f64>,
    pub alphas: Vec<f64>,
    pub stopped_at: usize,
    pub final_state: AbstractState,
}

/// Configuration of the regularized frozen Newton iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrozenNewtonConfig {
    pub alpha0: f64,
    pub q: f64,
    pub max_iterations: usize,
    /// noise level used by the discrepancy-style stop `alpha_n >= delta^(2/3)`
    pub delta: f64,
}

impl Default for FrozenNewtonConfig {
    fn default() -> Self {
        Self { alpha0: 1e-1, q: 0.5, max_iterations: 40, delta: 0.0 }
    }
}

/// Regularized frozen Newton: each step minimizes
/// `||F'(x0)(x - x_n) + F(x_n) - y||^2 + alpha_n ||eta - eta0||_w^2 + ||P eta||_w^2`.
pub fn frozen_newton_run(
    sys: &SpectralSystem,
    variant: Variant,
    x0: &AbstractState,
    data: &nalgebra::DVector<f64>,
    cfg: &FrozenNewtonConfig,
    truth: Option<&AbstractState>,
) -> Result<FrozenNewtonReport> {
    let m_h = x0.m_harmonics();
    let j = sys.j_modes;
    let mj = m_h * j;
    let a = fprime_matrix(sys, variant, x0);
    let ata = a.transpose() * &a;

    // weighted eta-block matrices on the real vector layout
    let n = 4 * mj;
    let mut w_eta = nalgebra::DMatrix::zeros(n, n);
    for m in 0..m_h {
        let w = AbstractState::weight(m + 1);
        for jj in 0..j {
            w_eta[(m * j + jj, m * j + jj)] = w;
            w_eta[(mj + m * j + jj, mj + m * j + jj)] = w;
        }
    }
    // penalty P acting on the eta blocks (same coupling for Re and Im)
    let s: f64 = (1..=m_h).map(|q| 1.0 / ((q * q) as f64)).sum();
    let mut p = nalgebra::DMatrix::zeros(n, n);
    for part in 0..2 {
        let off = part * mj;
        for m in 0..m_h {
            for l in 0..m_h {
                let wl = 1.0 / (((l + 1) * (l + 1)) as f64);
                for jj in 0..j {
                    let row = off + m * j + jj;
                    let col = off + l * j + jj;
                    p[(row, col)] = if m == l { 1.0 } else { 0.0 } - wl / s;
                }
            }
        }
    }
    let ptwp = p.transpose() * &w_eta * &p;

    let x0v = state_to_vec(x0);
    let mut xv = x0v.clone();
    let mut errors = Vec::new();
    let mut misfits = Vec::new();
    let mut alphas = Vec::new();
    let mut stopped_at = cfg.max_iterations;
    for it in 0..cfg.max_iterations {
        let alpha = cfg.alpha0 * cfg.q.powi(it as i32);
        // discrepancy-style stop: run while alpha_n >= delta^(2/3)
        if cfg.delta > 0.0 && alpha < cfg.delta.powf(2.0 / 3.0) {
            stopped_at = it;
            break;
        }
        alphas.push(alpha);
        let xn = vec_to_state(&xv, m_h, j);
        if let Some(t) = truth {
            errors.push(xn.sub(t).norm());
        }
        let (fm, fo) = forward_op(sys, variant, &xn);
        let fv = f_to_vec(&fm, &fo);
        misfits.push((&fv - data).norm());
        // normal equations for the linear-quadratic step
        let mut lhs = ata.clone() + &ptwp;
        lhs += &w_eta * alpha;
        let rhs = a.transpose() * (&a * &xv - &fv + data) + (&w_eta * &x0v) * alpha;
        let sol = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("frozen Newton normal equations".into()))?;
        xv = sol;
    }
    let final_state = vec_to_state(&xv, m_h, j);
    if let Some(t) = truth {
        errors.push(final_state.sub(t).norm());
    }
    Ok(FrozenNewtonReport { errors, misfits, alphas, stopped_at, final_state })
}

/// Double-double arithmetic (Dekker/Knuth error-free transformations),
/// roughly 31 significant digits. The generalized Hankel matrix becomes
/// numerically singular for f64 SVD around size 14 (its true smallest
/// singular value decays below 1e-16 relative); verifying nonsingularity
/// at 20x20 needs the extra precision.
mod dd {
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct Dd {
        pub hi: f64,
        pub lo: f64,
    }

    fn quick_two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        Dd { hi: s, lo: b - (s - a) }
    }

    fn two_sum(a: f64, b: f64) -> Dd {
        let s = a + b;
        let bb = s - a;
        Dd { hi: s, lo: (a - (s - bb)) + (b - bb) }
    }

    fn two_prod(a: f64, b: f64) -> Dd {
        let p = a * b;
        Dd { hi: p, lo: f64::mul_add(a, b, -p) }
    }

    impl Dd {
        pub fn from(v: f64) -> Self {
            Dd { hi: v, lo: 0.0 }
        }

        pub fn add(self, o: Dd) -> Dd {
            let s = two_sum(self.hi, o.hi);
            quick_two_sum(s.hi, s.lo + self.lo + o.lo)
        }

        pub fn sub(self, o: Dd) -> Dd {
            self.add(Dd { hi: -o.hi, lo: -o.lo })
        }

        pub fn mul(self, o: Dd) -> Dd {
            let p = two_prod(self.hi, o.hi);
            quick_two_sum(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
        }

        pub fn div(self, o: Dd) -> Dd {
            let q1 = self.hi / o.hi;
            let r = self.sub(o.mul(Dd::from(q1)));
            let q2 = r.hi / o.hi;
            let r2 = r.sub(o.mul(Dd::from(q2)));
            let q3 = r2.hi / o.hi;
            quick_two_sum(q1, q2).add(Dd::from(q3))
        }

        pub fn sqrt(self) -> Dd {
            if self.hi <= 0.0 {
                return Dd::from(0.0);
            }
            // one dd Newton correction of the f64 seed doubles the digits
            let y0 = Dd::from(self.hi.sqrt());
            let corr = self.sub(y0.mul(y0)).div(y0.mul(Dd::from(2.0)));
            y0.add(corr)
        }
    }

    #[derive(Debug, Clone, Copy)]
    pub struct Cdd {
        pub re: Dd,
        pub im: Dd,
    }

    impl Cdd {
        pub fn from(c: num_complex::Complex64) -> Self {
            Cdd { re: Dd::from(c.re), im: Dd::from(c.im) }
        }

        pub fn zero() -> Self {
            Cdd { re: Dd::from(0.0), im: Dd::from(0.0) }
        }

        #[allow(dead_code)]
        pub fn add(self, o: Cdd) -> Cdd {
            Cdd { re: self.re.add(o.re), im: self.im.add(o.im) }
        }

        pub fn sub(self, o: Cdd) -> Cdd {
            Cdd { re: self.re.sub(o.re), im: self.im.sub(o.im) }
        }

        pub fn mul(self, o: Cdd) -> Cdd {
            Cdd {
                re: self.re.mul(o.re).sub(self.im.mul(o.im)),
                im: self.re.mul(o.im).add(self.im.mul(o.re)),
            }
        }

        pub fn conj(self) -> Cdd {
            Cdd { re: self.re, im: Dd { hi: -self.im.hi, lo: -self.im.lo } }
        }

        pub fn div(self, o: Cdd) -> Cdd {
            let den = o.re.mul(o.re).add(o.im.mul(o.im));
            let num = self.mul(o.conj());
            Cdd { re: num.re.div(den), im: num.im.div(den) }
        }

        pub fn norm_sqr(self) -> Dd {
            self.re.mul(self.re).add(self.im.mul(self.im))
        }
    }

    /// LU with partial pivoting; returns None when a pivot vanishes
    /// (matrix singular at dd precision).
    pub struct Lu {
        n: usize,
        a: Vec<Cdd>,
        piv: Vec<usize>,
    }

    pub fn lu(mut a: Vec<Cdd>, n: usize) -> Option<Lu> {
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            let mut best_v = a[k * n + k].norm_sqr().hi;
            for r in (k + 1)..n {
                let v = a[r * n + k].norm_sqr().hi;
                if v > best_v {
                    best_v = v;
                    best = r;
                }
            }
            if best_v == 0.0 {
                return None;
            }
            if best != k {
                for c in 0..n {
                    a.swap(k * n + c, best * n + c);
                }
                piv.swap(k, best);
            }
            let pivot = a[k * n + k];
            for r in (k + 1)..n {
                let f = a[r * n + k].div(pivot);
                a[r * n + k] = f;
                for c in (k + 1)..n {
                    let t = a[k * n + c].mul(f);
                    a[r * n + c] = a[r * n + c].sub(t);
                }
            }
        }
        Some(Lu { n, a, piv })
    }

    impl Lu {
        pub fn solve(&self, b: &[Cdd]) -> Vec<Cdd> {
            let n = self.n;
            let mut y: Vec<Cdd> = self.piv.iter().map(|&p| b[p]).collect();
            for r in 0..n {
                for c in 0..r {
                    let t = self.a[r * n + c].mul(y[c]);
                    y[r] = y[r].sub(t);
                }
            }
            for r in (0..n).rev() {
                for c in (r + 1)..n {
                    let t = self.a[r * n + c].mul(y[c]);
                    y[r] = y[r].sub(t);
                }
                y[r] = y[r].div(self.a[r * n + r]);
            }
            y
        }
    }
}

/// Smallest singular value of the truncated generalized Hankel matrix with
/// entries `m^2 / (-m^2 omega^2 mu_j + c^2 lambda_j + i m omega rho_j)`.
/// Computed in double-double precision (inverse-power iteration on H^H H
/// through LU solves with H and H^H) because the f64 spectrum underflows
/// beyond size ~14; returns 0 when the matrix is singular.
pub fn hankel_sigma_min(sys: &SpectralSystem, m_max: usize, j_max: usize) -> Result<f64> {
    use dd::{Cdd, lu};
    let j_max = j_max.min(sys.j_modes);
    if m_max != j_max {
        // rectangular truncations fall back to f64 SVD
        let mut h = nalgebra::DMatrix::<C>::zeros(m_max, j_max);
        for m in 1..=m_max {
            for j in 0..j_max {
                let d = sys.dm_symbol(m, j);
                if d.norm() < 1e-14 {
                    return Err(Error::Singularity);
                }
                h[(m - 1, j)] = (m * m) as f64 / d;
            }
        }
        let sv = h.singular_values();
        return Ok(sv[sv.len() - 1]);
    }
    let n = m_max;
    let mut a = vec![Cdd::zero(); n * n];
    let mut at = vec![Cdd::zero(); n * n];
    for m in 1..=n {
        for j in 0..n {
            let d = sys.dm_symbol(m, j);
            if d.norm() < 1e-14 {
                return Err(Error::Singularity);
            }
            let v = Cdd::from(C::new((m * m) as f64, 0.0)).div(Cdd::from(d));
            a[(m - 1) * n + j] = v;
            at[j * n + (m - 1)] = v.conj();
        }
    }
    let (lu_a, lu_at) = match (lu(a, n), lu(at, n)) {
        (Some(x), Some(y)) => (x, y),
        _ => return Ok(0.0),
    };
    // inverse-power iteration: z = (H^H H)^{-1} y via two triangular solves
    let mut y: Vec<Cdd> = (0..n)
        .map(|i| Cdd::from(C::new(1.0 / ((i + 1) as f64), 0.3 / ((i + 2) as f64))))
        .collect();
    let norm = |v: &[Cdd]| -> f64 {
        v.iter()
            .fold(dd::Dd::from(0.0), |acc, c| acc.add(c.norm_sqr()))
            .sqrt()
            .hi
    };
    let ny = norm(&y);
    for c in &mut y {
        *c = c.div(Cdd::from(C::new(ny, 0.0)));
    }
    let mut sigma = 0.0_f64;
    for _ in 0..60 {
        let w = lu_a.solve(&y);
        let z = lu_at.solve(&w);
        let nz = norm(&z);
        if !nz.is_finite() || nz == 0.0 {
            return Ok(0.0);
        }
        let new_sigma = 1.0 / nz.sqrt();
        let converged = (new_sigma - sigma).abs() <= 1e-10 * new_sigma;
        sigma = new_sigma;
        for c in &mut z.iter().enumerate() {
            y[c.0] = c.1.div(Cdd::from(C::new(nz, 0.0)));
        }
        if converged {
            break;
        }
    }
    Ok(sigma)
}

/// Appendix root formulas
/// `t_{k,±} = -(i omega / 2 c^2) (rho_k ∓ sqrt(rho_k^2 - mu_k)) / lambda_k`
/// for all modes with `lambda_k != 0`; returns the minimum pairwise
/// distance (positive for valid systems).
pub fn hankel_root_separation(sys: &SpectralSystem) -> f64 {
    let mut roots: Vec<C> = Vec::new();
    for k in 0..sys.j_modes {
        if sys.lambda[k].norm() < 1e-14 {
            continue;
        }
        let disc = (sys.rho[k] * sys.rho[k] - sys.mu[k]).sqrt();
        let pref = -C::new(0.0, sys.omega / (2.0 * sys.c * sys.c));
        roots.push(pref * (sys.rho[k] - disc) / sys.lambda[k]);
        roots.push(pref * (sys.rho[k] + disc) / sys.lambda[k]);
    }
    let mut min_d = f64::MAX;
    for i in 0..roots.len() {
        for l in (i + 1)..roots.len() {
            min_d = min_d.min((roots[i] - roots[l]).norm());
        }
    }
    min_d
}

/// Smallest singular value of the linearization at `eta0 = 0`,
/// `phat0_m(x) = phi(x) psi_m`, restricted to the constraint set
/// `P eta = 0` (all harmonics share one eta), after eliminating `d phat`
/// through the model rows: the observation sees
/// `eta -> (-C_m D_m^{-1} [m^2 omega^2 f_m phi eta])_m` with
/// `f_m = B~_m(psi)`. Rows with `f_m = 0` are dropped; if every row drops
/// the result is 0 (no information).
pub fn linearized_injectivity_sigma_min(
    sys: &SpectralSystem,
    variant: Variant,
    phi_grid: &[f64],
    psi: &[C],
) -> Result<f64> {
    let m_h = psi.len();
    let j = sys.j_modes;
    let pts = sys.collocation_points();
    if phi_grid.len() != pts.len() {
        return Err(Error::Domain("phi grid size must equal the collocation grid".into()));
    }
    if phi_grid.iter().all(|&v| v.abs() < 1e-14) {
        return Err(Error::HypothesisViolation("phi vanishes identically".into()));
    }
    let mut rows: Vec<Vec<C>> = Vec::new();
    for m in 1..=m_h {
        let fm = b_tilde(variant, m, psi);
        if fm.norm() < 1e-14 {
            continue; // uninformative harmonic
        }
        let scale = (m * m) as f64 * sys.omega * sys.omega * fm;
        let mut row = vec![C::new(0.0, 0.0); j];
        for (col, r) in row.iter_mut().enumerate() {
            // eta = basis vector `col`; multiply by phi on the grid
            let grid: Vec<C> = pts
                .iter()
                .enumerate()
                .map(|(i, &x)| scale * phi_grid[i] * sys.basis(col, x))
                .collect();
            let coeff = sys.to_coeff(&grid);
            // d phat_m = -D_m^{-1} (...), observed at x0
            let mut obs = C::new(0.0, 0.0);
            for (jj, cf) in coeff.iter().enumerate() {
                obs += -cf / sys.dm_symbol(m, jj) * sys.basis(jj, sys.x0);
            }
            *r = obs;
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(0.0);
    }
    let mut mat = nalgebra::DMatrix::<C>::zeros(rows.len(), j);
    for (i, row) in rows.iter().enumerate() {
        for (col, v) in row.iter().enumerate() {
            mat[(i, col)] = *v;
        }
    }
    let sv = mat.singular_values();
    Ok(sv[sv.len() - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn sys(j: usize) -> SpectralSystem {
        SpectralSystem::standard(j, 2.0, 1.0, 0.1).unwrap()
    }

    fn random_state(m_h: usize, j: usize, seed: u64, scale: f64) -> AbstractState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = AbstractState::zero(m_h, j);
        for m in 0..m_h {
            for jj in 0..j {
                x.eta[m][jj] =
                    C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale;
                x.phat[m][jj] =
                    C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * scale;
            }
        }
        x
    }

    #[test]
    fn dm_symbol_hand_check() {
        // (m, j) = (2, 3), beta = 0, b = 0.1: -4 omega^2 + c^2 lambda_3 + 2 i omega b lambda_3
        let s = sys(8);
        let l3 = (3.0 * std::f64::consts::PI).powi(2);
        let want = C::new(-4.0 * 4.0 + l3, 2.0 * 2.0 * 0.1 * l3);
        let got = s.dm_symbol(2, 3);
        assert_relative_eq!(got.re, want.re, max_relative = 1e-14);
        assert_relative_eq!(got.im, want.im, max_relative = 1e-14);
        // zero input stays zero, single mode is scalar multiplication
        assert!(apply_dm(&s, 2, &vec![C::new(0.0, 0.0); 8])
            .iter()
            .all(|v| v.norm() == 0.0));
    }

    #[test]
    fn b_tilde_quoted_values() {
        let one = C::new(1.0, 0.0);
        let zero = C::new(0.0, 0.0);
        // variant (b), m = 2, c = (1, 0, ...) -> 1/4
        let v = b_tilde(Variant::B, 2, &[one, zero, zero]);
        assert_relative_eq!(v.re, 0.25, max_relative = 1e-15);
        // variant (b), m = 3, c = (1, 1, 0, ...) -> 1/2
        let v = b_tilde(Variant::B, 3, &[one, one, zero]);
        assert_relative_eq!(v.re, 0.5, max_relative = 1e-15);
        // variant (a), m = 1, c = (1, 1, 0, ...) -> 1/2
        let v = b_tilde(Variant::A, 1, &[one, one, zero]);
        assert_relative_eq!(v.re, 0.5, max_relative = 1e-15);
        // variant (b), m = 1: first sum empty
        assert_eq!(b_tilde(Variant::B, 1, &[one, one, one]), zero);
    }

    #[test]
    fn apply_bm_constant_phat_is_scalar() {
        // space-independent phat: B_m eta = m^2 omega^2 B~_m(psi) eta
        let s = sys(6);
        let m_h = 3;
        let psi = [C::new(1.0, 0.3), C::new(0.4, -0.2), C::new(0.1, 0.0)];
        let mut phat = vec![vec![C::new(0.0, 0.0); 6]; m_h];
        for (m, p) in psi.iter().enumerate() {
            phat[m][0] = *p; // phi_0 = 1 carries the constant
        }
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let eta: Vec<C> = (0..6)
            .map(|_| C::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        for m in 1..=m_h {
            let out = apply_bm(&s, Variant::B, m, &phat, &eta);
            let f = b_tilde(Variant::B, m, &psi);
            let scale = (m * m) as f64 * s.omega * s.omega * f;
            for (o, e) in out.iter().zip(&eta) {
                assert!((o - scale * e).norm() < 1e-12, "m={m}");
            }
        }
        // eta = 0 -> 0, and linearity in eta
        let zero = apply_bm(&s, Variant::A, 2, &phat, &vec![C::new(0.0, 0.0); 6]);
        assert!(zero.iter().all(|v| v.norm() == 0.0));
        let e2: Vec<C> = eta.iter().map(|v| v * C::new(2.0, 1.0)).collect();
        let o1 = apply_bm(&s, Variant::A, 2, &phat, &eta);
        let o2 = apply_bm(&s, Variant::A, 2, &phat, &e2);
        for (a, b) in o1.iter().zip(&o2) {
            assert!((a * C::new(2.0, 1.0) - b).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_zero_state_is_zero() {
        let s = sys(5);
        let x = AbstractState::zero(3, 5);
        let (models, obs) = forward_op(&s, Variant::A, &x);
        assert!(models.iter().flatten().all(|v| v.norm() == 0.0));
        assert!(obs.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn range_invariance_identity() {
        // F(x) - F(x0) = F'(x0) r(x) to 1e-10 relative, both variants,
        // M in {2, 3, 6}
        for &variant in &[Variant::A, Variant::B] {
            for &m_h in &[2usize, 3, 6] {
                let s = sys(5);
                // base point with invertible B_m(phat0): constant-dominated
                let mut x0 = random_state(m_h, 5, 7 + m_h as u64, 0.05);
                for m in 0..m_h {
                    x0.phat[m][0] += C::new(1.0, 0.2); // keep B~ away from 0
                }
                for trial in 0..100 {
                    let dx = random_state(m_h, 5, 1000 + trial, 0.02);
                    let mut x = x0.clone();
                    for m in 0..m_h {
                        for j in 0..5 {
                            x.eta[m][j] += dx.eta[m][j];
                            x.phat[m][j] += dx.phat[m][j];
                        }
                    }
                    let r = range_invar_remainder(&s, variant, &x0, &x).unwrap();
                    let (fm, fo) = forward_op(&s, variant, &x);
                    let (fm0, fo0) = forward_op(&s, variant, &x0);
                    let (am, ao) = apply_fprime(&s, variant, &x0, &r);
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for m in 0..m_h {
                        for j in 0..5 {
                            let lhs = fm[m][j] - fm0[m][j];
                            num += (lhs - am[m][j]).norm_sqr();
                            den += lhs.norm_sqr();
                        }
                        let lhs = fo[m] - fo0[m];
                        num += (lhs - ao[m]).norm_sqr();
                        den += lhs.norm_sqr();
                    }
                    let rel = (num / den.max(1e-300)).sqrt();
                    assert!(
                        rel < 1e-10,
                        "variant {variant:?} M={m_h} trial {trial}: rel {rel:.3e}"
                    );
                }
            }
        }
    }

    #[test]
    fn remainder_trivial_cases() {
        let s = sys(5);
        let m_h = 3;
        let mut x0 = random_state(m_h, 5, 1, 0.05);
        for m in 0..m_h {
            x0.phat[m][0] += C::new(1.0, 0.0);
        }
        // x = x0 -> r = 0
        let r = range_invar_remainder(&s, Variant::B, &x0, &x0).unwrap();
        assert!(r.norm() < 1e-14);
        // phat = phat0, eta arbitrary -> r = (eta - eta0, 0)
        let mut x = x0.clone();
        x.eta = random_state(m_h, 5, 2, 0.3).eta;
        let r = range_invar_remainder(&s, Variant::B, &x0, &x).unwrap();
        assert!(r.phat.iter().flatten().all(|v| v.norm() < 1e-14));
        for m in 0..m_h {
            for j in 0..5 {
                assert!((r.eta[m][j] - (x.eta[m][j] - x0.eta[m][j])).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn closeness_constant_scales_linearly() {
        let s = sys(5);
        let m_h = 3;
        let mut x0 = random_state(m_h, 5, 11, 0.05);
        for m in 0..m_h {
            x0.phat[m][0] += C::new(1.0, 0.1);
        }
        let c1 = remainder_closeness_constant(&s, Variant::B, &x0, 0.1, 40, 5).unwrap();
        let c2 = remainder_closeness_constant(&s, Variant::B, &x0, 0.01, 40, 5).unwrap();
        let c3 = remainder_closeness_constant(&s, Variant::B, &x0, 0.001, 40, 5).unwrap();
        // log-log slope 1 +- 0.1 and c < 1 at delta = 0.1
        let slope12 = (c1 / c2).ln() / 10f64.ln();
        let slope23 = (c2 / c3).ln() / 10f64.ln();
        assert!((slope12 - 1.0).abs() < 0.1, "slope {slope12}");
        assert!((slope23 - 1.0).abs() < 0.1, "slope {slope23}");
        assert!(c1 < 1.0, "c = {c1} at delta = 0.1");
    }

    #[test]
    fn penalty_properties() {
        // constant vector -> 0
        let eta = vec![vec![C::new(0.7, -0.2); 4]; 5];
        let p = penalty_p(&eta);
        assert!(p.iter().flatten().all(|v| v.norm() < 1e-14));
        // M = 2 algebra: (P eta)_1 = (eta_1 - eta_2) / 5
        let eta = vec![vec![C::new(1.0, 0.0)], vec![C::new(0.0, 0.0)]];
        let p = penalty_p(&eta);
        assert_relative_eq!(p[0][0].re, 0.2, max_relative = 1e-14);
        // idempotence on random inputs
        let x = random_state(4, 6, 9, 1.0);
        let p1 = penalty_p(&x.eta);
        let p2 = penalty_p(&p1);
        for (a, b) in p1.iter().flatten().zip(p2.iter().flatten()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    /// Build a consistent truth (G_m(x) = h_m manufactured) and its data
    /// vector.
    fn manufactured(
        s: &SpectralSystem,
        variant: Variant,
        m_h: usize,
        seed: u64,
    ) -> (AbstractState, nalgebra::DVector<f64>) {
        let mut truth = random_state(m_h, s.j_modes, seed, 0.1);
        // shared eta across harmonics so P eta(truth) = 0
        let eta0 = truth.eta[0].clone();
        for e in &mut truth.eta {
            e.clone_from(&eta0);
        }
        for m in 0..m_h {
            truth.phat[m][0] += C::new(1.0, 0.2);
        }
        let (fm, fo) = forward_op(s, variant, &truth);
        (truth, f_to_vec(&fm, &fo))
    }

    #[test]
    fn frozen_newton_fixed_point_and_convergence() {
        let s = sys(8);
        let m_h = 3;
        let (truth, data) = manufactured(&s, Variant::B, m_h, 21);
        // x0 = truth: iterates stay put
        let cfg = FrozenNewtonConfig { max_iterations: 5, ..Default::default() };
        let rep = frozen_newton_run(&s, Variant::B, &truth, &data, &cfg, Some(&truth)).unwrap();
        assert!(rep.errors.iter().all(|&e| e < 1e-8), "errors {:?}", rep.errors);
        // x0 near truth: converges below 1e-6. With finitely many
        // harmonics the eta block has unobservable directions, so the
        // convergence scenario perturbs the p-hat block only
        // (x0 - truth orthogonal to the Jacobian null space).
        let mut x0 = truth.clone();
        let pert = random_state(m_h, 8, 33, 0.01);
        for m in 0..m_h {
            for j in 0..8 {
                x0.phat[m][j] += pert.phat[m][j];
            }
        }
        // stop while alpha stays above the rounding floor of the normal
        // equations (cond ~ sigma_max(A)^2 / alpha)
        let cfg = FrozenNewtonConfig { max_iterations: 12, ..Default::default() };
        let rep = frozen_newton_run(&s, Variant::B, &x0, &data, &cfg, Some(&truth)).unwrap();
        let last = *rep.errors.last().unwrap();
        assert!(last < 1e-6, "final error {last}, history {:?}", rep.errors);
        // monotone decrease until the error reaches the numerical floor
        for w in rep.errors.windows(2) {
            if w[0] < 1e-8 {
                break;
            }
            assert!(w[1] <= w[0] * (1.0 + 1e-10), "non-monotone {:?}", rep.errors);
        }
    }

    #[test]
    fn frozen_newton_semi_convergence_in_noise() {
        let s = sys(8);
        let m_h = 3;
        let (truth, data) = manufactured(&s, Variant::B, m_h, 55);
        let mut x0 = truth.clone();
        let pert = random_state(m_h, 8, 77, 0.01);
        for m in 0..m_h {
            for j in 0..8 {
                x0.phat[m][j] += pert.phat[m][j];
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noise_dir: nalgebra::DVector<f64> =
            nalgebra::DVector::from_fn(data.len(), |_, _| rng.gen::<f64>() - 0.5);
        let noise_dir = &noise_dir / noise_dir.norm();
        let mut prev = f64::MAX;
        for &delta in &[1e-2, 1e-3, 1e-4] {
            let noisy = &data + &noise_dir * (delta * data.norm());
            // stopping uses the relative noise level; alpha0 = 1 keeps the
            // stopping index inside the iteration range for all deltas
            let cfg = FrozenNewtonConfig {
                alpha0: 1.0,
                delta,
                max_iterations: 60,
                ..Default::default()
            };
            let rep =
                frozen_newton_run(&s, Variant::B, &x0, &noisy, &cfg, Some(&truth)).unwrap();
            let err = *rep.errors.last().unwrap();
            assert!(err < prev, "stopped error {err} not below {prev} at delta {delta}");
            prev = err;
        }
    }

    #[test]
    fn hankel_sigma_min_positive_and_degenerate() {
        let s = sys(20);
        let smin = hankel_sigma_min(&s, 8, 8).unwrap();
        assert!(smin > 0.0, "sigma_min {smin}");
        // decreasing with j_max (ill-posedness trend)
        let s20 = hankel_sigma_min(&s, 20, 20).unwrap();
        assert!(s20 > 0.0 && s20 < smin);
        // duplicate triple -> two identical columns -> sigma_min = 0
        let mut lambda = s.lambda.clone();
        let mut mu = s.mu.clone();
        let mut rho = s.rho.clone();
        lambda[3] = lambda[2];
        mu[3] = mu[2];
        rho[3] = rho[2];
        let bad = SpectralSystem::new_unchecked(20, 2.0, 1.0, 0.1, lambda, mu, rho, 1.0);
        assert!(bad.check_rho_lambda_mu().is_err());
        let smin_bad = hankel_sigma_min(&bad, 8, 8).unwrap();
        assert!(smin_bad <= 1e-12, "degenerate sigma_min {smin_bad}");
        // root distinctness for the valid system
        assert!(hankel_root_separation(&s) > 1e-10);
    }

    #[test]
    fn linearized_injectivity() {
        let s = sys(6);
        let pts = s.collocation_points();
        let phi = vec![1.0; pts.len()];
        // psi chosen so f_m != 0 for m >= 2
        let psi = [C::new(1.0, 0.0), C::new(0.8, 0.1), C::new(0.5, -0.2),
            C::new(0.3, 0.0), C::new(0.2, 0.1), C::new(0.1, 0.0), C::new(0.05, 0.0)];
        let smin = linearized_injectivity_sigma_min(&s, Variant::B, &phi, &psi).unwrap();
        assert!(smin > 0.0, "sigma_min {smin}");
        // M = 1 only: B~_1 = 0 in variant (b) -> no informative rows
        let smin1 =
            linearized_injectivity_sigma_min(&s, Variant::B, &phi, &psi[..1]).unwrap();
        assert_eq!(smin1, 0.0);
        // phi with a growing dead zone degrades sigma_min
        let mut prev = smin;
        for dead in [0.3, 0.6] {
            let phi: Vec<f64> = pts
                .iter()
                .map(|&x| if x < dead { 0.0 } else { 1.0 })
                .collect();
            let v = linearized_injectivity_sigma_min(&s, Variant::B, &phi, &psi).unwrap();
            assert!(v < prev, "dead zone {dead}: {v} !< {prev}");
            prev = v;
        }
    }

    #[test]
    fn constructor_rejects_violating_system() {
        // mu_j = lambda_j^2 and rho_j = lambda_j make the ratios constant
        let lambda: Vec<C> = (1..=4).map(|j| C::new(j as f64, 0.0)).collect();
        let mu: Vec<C> = lambda.iter().map(|l| l * l).collect();
        let rho = lambda.clone();
        assert!(SpectralSystem::new(4, 2.0, 1.0, 0.1, lambda, mu, rho, 1.0).is_err());
    }
}
