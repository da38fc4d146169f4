//! Regularized Gauss-Newton iteration on the object boundary curves
//! plus a moment-matching diagnostic for constant-background sources.
//!
//! Object centers stay frozen: radial coefficients with k = 1 harmonics can
//! translate a star-shaped curve, so freeing the centers would introduce
//! Jacobian null directions. Each object contributes `1 + 2K` unknowns
//! packed object-major as `[a_0, a_1..a_K, b_1..b_K]`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forward::{
    fundamental, fundamental_grad_coeff, BoundaryTrace, DiscreteMeasure, DomainConfig,
    Excitation, HelmholtzSolver, SolvedField, SourceSpec, TraceKind,
};
use crate::geometry::{InclusionSet, Point, StarCurve};
use crate::specfun::bessel_jn;
use crate::{Error, Result};

type C = Complex64;
const I: C = C::new(0.0, 1.0);

/// Flat parameter vector, object-major `[a_0, a_1..a_K, b_1..b_K]` each.
pub type ShapeUnknowns = Vec<f64>;

/// Minimum admissible radius along any curve (positivity guard).
pub const R_MIN: f64 = 1e-3;

/// Newton iteration schedule over the harmonics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Schedule {
    M2Only,
    /// converge on m=2 data first, then refine with m=2 and m=3 together
    Sequential,
    /// use m=2 and m=3 data from the first iteration
    Simultaneous,
}

/// Record of one Gauss-Newton run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonReport {
    pub residual_norms: Vec<f64>,
    pub step_norms: Vec<f64>,
    pub jacobian_conds: Vec<f64>,
    pub final_params: ShapeUnknowns,
    pub final_curves: Vec<StarCurve>,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    /// relative radial L2 error per object, when a phantom is known
    pub shape_errors: Option<Vec<f64>>,
}

/// Inverse shape problem: fixed centers, flux data per harmonic.
pub struct ShapeProblem<'a> {
    pub cfg: DomainConfig,
    pub excitation: Excitation,
    pub centers: Vec<Point>,
    /// Fourier order K of the radial parametrization
    pub fourier_order: usize,
    /// interior quadrature orders used during inversion
    pub radial_order: usize,
    pub angular_order: usize,
    pub solver2: &'a HelmholtzSolver,
    pub solver3: Option<&'a HelmholtzSolver>,
    /// measured traces, keyed by harmonic
    pub data: Vec<(usize, BoundaryTrace)>,
}

impl<'a> ShapeProblem<'a> {
    pub fn params_per_object(&self) -> usize {
        1 + 2 * self.fourier_order
    }

    pub fn n_params(&self) -> usize {
        self.centers.len() * self.params_per_object()
    }

    /// Flatten curves into the parameter vector (centers must match).
    pub fn pack(&self, curves: &[StarCurve]) -> ShapeUnknowns {
        let k = self.fourier_order;
        let mut out = Vec::with_capacity(self.n_params());
        for c in curves {
            out.push(c.a0);
            for i in 0..k {
                out.push(c.a.get(i).copied().unwrap_or(0.0));
            }
            for i in 0..k {
                out.push(c.b.get(i).copied().unwrap_or(0.0));
            }
        }
        out
    }

    /// Rebuild validated curves from the parameter vector.
    pub fn unpack(&self, params: &ShapeUnknowns) -> Result<Vec<StarCurve>> {
        let pp = self.params_per_object();
        if params.len() != self.n_params() {
            return Err(Error::Domain(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                params.len()
            )));
        }
        let k = self.fourier_order;
        let mut curves = Vec::with_capacity(self.centers.len());
        for (o, &center) in self.centers.iter().enumerate() {
            let p = &params[o * pp..(o + 1) * pp];
            let curve =
                StarCurve::new(center, p[0], p[1..1 + k].to_vec(), p[1 + k..].to_vec())?;
            // positivity guard stricter than plain validity
            for i in 0..256 {
                let t = 2.0 * std::f64::consts::PI * i as f64 / 256.0;
                if curve.radius(t) <= R_MIN {
                    return Err(Error::InvalidCurve(format!(
                        "radius {} below guard {R_MIN}",
                        curve.radius(t)
                    )));
                }
            }
            curves.push(curve);
        }
        Ok(curves)
    }

    fn solver_for(&self, m: usize) -> Result<&HelmholtzSolver> {
        match m {
            2 => Ok(self.solver2),
            3 => self
                .solver3
                .ok_or_else(|| Error::Domain("no solver for harmonic 3".into())),
            _ => Err(Error::Domain(format!("unsupported harmonic {m}"))),
        }
    }

    /// Predicted traces on the data arcs for the requested harmonics.
    pub fn predict(
        &self,
        curves: &[StarCurve],
        harmonics: &[usize],
    ) -> Result<Vec<(usize, BoundaryTrace)>> {
        let set = InclusionSet::with_orders(
            curves.to_vec(),
            self.radial_order,
            self.angular_order,
        )?;
        let m_max = harmonics.iter().copied().max().unwrap_or(2);
        let s2 = self.solver_for(2)?;
        let solvers: Vec<&HelmholtzSolver> = if m_max >= 3 {
            vec![s2, self.solver_for(3)?]
        } else {
            vec![s2]
        };
        let cascade =
            crate::forward::harmonic_cascade(&self.cfg, &set, &self.excitation, m_max, &solvers)?;
        let mut out = Vec::new();
        for (m, trace) in &self.data {
            if !harmonics.contains(m) {
                continue;
            }
            let field = &cascade.fields[m - 2];
            let solver = self.solver_for(*m)?;
            out.push((
                *m,
                solver.extract_trace(field, trace.kind, trace.arc_fraction, trace.arc_center),
            ));
        }
        Ok(out)
    }

    /// Stacked real residual: sqrt(w) * (predicted - measured), Re then Im
    /// per harmonic block.
    pub fn data_residual(
        &self,
        params: &ShapeUnknowns,
        harmonics: &[usize],
    ) -> Result<Vec<f64>> {
        let curves = self.unpack(params)?;
        let preds = self.predict(&curves, harmonics)?;
        let mut out = Vec::new();
        for (m, pred) in &preds {
            let (_, data) = self
                .data
                .iter()
                .find(|(dm, _)| dm == m)
                .expect("predict only returns harmonics present in data");
            assert_eq!(pred.len(), data.len(), "trace sampling mismatch");
            let sw = data.node_weight.sqrt();
            for (p, d) in pred.samples.iter().zip(&data.samples) {
                out.push(sw * (p - d).re);
                out.push(sw * (p - d).im);
            }
        }
        Ok(out)
    }

    /// Central finite-difference Jacobian, columns in parallel. Relative
    /// step `1e-6 * max(1, |a_0|)` of the owning object.
    pub fn jacobian(
        &self,
        params: &ShapeUnknowns,
        harmonics: &[usize],
    ) -> Result<nalgebra::DMatrix<f64>> {
        let n = params.len();
        let pp = self.params_per_object();
        let cols: Result<Vec<Vec<f64>>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let a0 = params[(j / pp) * pp].abs();
                let h = 1e-6 * a0.max(1.0);
                let mut pl = params.clone();
                let mut pr = params.clone();
                pl[j] -= h;
                pr[j] += h;
                // near the positivity guard one of the perturbed curves can
                // be invalid; fall back to a one-sided difference there
                let (rl, rr, dh) = match (
                    self.data_residual(&pl, harmonics),
                    self.data_residual(&pr, harmonics),
                ) {
                    (Ok(rl), Ok(rr)) => (rl, rr, 2.0 * h),
                    (Err(Error::InvalidCurve(_)), Ok(rr)) => {
                        (self.data_residual(params, harmonics)?, rr, h)
                    }
                    (Ok(rl), Err(Error::InvalidCurve(_))) => {
                        (rl, self.data_residual(params, harmonics)?, h)
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                };
                let col: Vec<f64> = rr
                    .iter()
                    .zip(&rl)
                    .map(|(a, b)| (a - b) / dh)
                    .collect();
                if col.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Domain(format!(
                        "non-finite Jacobian column for coefficient {j}"
                    )));
                }
                Ok(col)
            })
            .collect();
        let cols = cols?;
        let rows = cols.first().map(|c| c.len()).unwrap_or(0);
        let mut jac = nalgebra::DMatrix::zeros(rows, n);
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }

    /// Analytic Jacobian for the m=2 block: the shape derivative of the
    /// free-space potential in direction `delta r = basis_k` is the
    /// boundary integral `kappa^2 f(q(t)) Phi(x, q(t)) basis_k(t) r(t) dt`
    /// over the perturbed object, propagated linearly through the impedance
    /// correction.
    pub fn jacobian_analytic_m2(
        &self,
        params: &ShapeUnknowns,
    ) -> Result<nalgebra::DMatrix<f64>> {
        let curves = self.unpack(params)?;
        let solver = self.solver_for(2)?;
        let kappa = solver.kappa;
        let kappa1 = self.cfg.kappa1();
        let (_, data) = self
            .data
            .iter()
            .find(|(m, _)| *m == 2)
            .ok_or_else(|| Error::Domain("no m=2 data".into()))?;
        let pp = self.params_per_object();
        let k = self.fourier_order;
        let nq = 4 * self.angular_order; // boundary quadrature per object
        let h = 2.0 * std::f64::consts::PI / nq as f64;
        let bnd = solver.boundary_points();
        let n_bnd = bnd.len();
        let cols: Result<Vec<Vec<f64>>> = (0..self.n_params())
            .into_par_iter()
            .map(|jp| {
                let (obj, local) = (jp / pp, jp % pp);
                let curve = &curves[obj];
                // basis function of the radial perturbation
                let basis = |t: f64| -> f64 {
                    if local == 0 {
                        1.0
                    } else if local <= k {
                        (local as f64 * t).cos()
                    } else {
                        ((local - k) as f64 * t).sin()
                    }
                };
                // free-space shape derivative at the outer boundary nodes
                let mut du = vec![C::new(0.0, 0.0); n_bnd];
                let mut dun = vec![C::new(0.0, 0.0); n_bnd];
                for iq in 0..nq {
                    let t = h * iq as f64;
                    let r = curve.radius(t);
                    let y = curve.point(t);
                    let p1 = self.excitation.p1(kappa1, y);
                    let f = 0.25 * self.cfg.eta0 * p1 * p1;
                    let scale = kappa * kappa * f * basis(t) * r * h;
                    for (ib, &x) in bnd.iter().enumerate() {
                        let dx = x[0] - y[0];
                        let dy = x[1] - y[1];
                        let rr = (dx * dx + dy * dy).sqrt();
                        du[ib] += scale * fundamental(kappa, rr)?;
                        let gc = fundamental_grad_coeff(kappa, rr)?;
                        let nu = [x[0] / solver.radius, x[1] / solver.radius];
                        dun[ib] += scale * gc * (dx * nu[0] + dy * nu[1]);
                    }
                }
                // impedance correction of the perturbation
                let g: Vec<C> = du
                    .iter()
                    .zip(&dun)
                    .map(|(u, un)| -(un + I * kappa * u))
                    .collect();
                let density = solver.impedance_correction_density(&g)?;
                let (ld, ln_) = solver.layer_traces(&density);
                let dirichlet: Vec<C> = du.iter().zip(&ld).map(|(a, b)| a + b).collect();
                let neumann: Vec<C> = dun.iter().zip(&ln_).map(|(a, b)| a + b).collect();
                let full = match data.kind {
                    TraceKind::Dirichlet => dirichlet,
                    TraceKind::Neumann => neumann,
                };
                // restrict to the data arc
                let field = SolvedField {
                    harmonic: 2,
                    kappa,
                    dirichlet: full.clone(),
                    neumann: full,
                    source: SourceSpec::Measure(DiscreteMeasure::default()),
                    density: vec![],
                };
                let tr =
                    solver.extract_trace(&field, data.kind, data.arc_fraction, data.arc_center);
                let sw = data.node_weight.sqrt();
                let mut col = Vec::with_capacity(2 * tr.len());
                for s in &tr.samples {
                    col.push(sw * s.re);
                    col.push(sw * s.im);
                }
                Ok(col)
            })
            .collect();
        let cols = cols?;
        let rows = cols.first().map(|c| c.len()).unwrap_or(0);
        let mut jac = nalgebra::DMatrix::zeros(rows, self.n_params());
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        Ok(jac)
    }

    /// One damped Gauss-Newton candidate step:
    /// `(J^T J + lambda diag(J^T J)) delta = -J^T r`.
    pub fn gauss_newton_step(
        &self,
        jac: &nalgebra::DMatrix<f64>,
        residual: &[f64],
        lambda: f64,
    ) -> Result<nalgebra::DVector<f64>> {
        let r = nalgebra::DVector::from_column_slice(residual);
        let jtj = jac.transpose() * jac;
        let jtr = jac.transpose() * r;
        let mut lhs = jtj.clone();
        let dmax = (0..lhs.nrows()).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
        for i in 0..lhs.nrows() {
            lhs[(i, i)] += lambda * jtj[(i, i)].max(1e-14 * dmax.max(1e-300));
        }
        lhs.lu()
            .solve(&(-jtr))
            .ok_or_else(|| Error::LinearSolve("Gauss-Newton normal equations".into()))
    }

    /// Full Gauss-Newton run with Levenberg-Marquardt damping and
    /// backtracking line search.
    pub fn run_newton(
        &self,
        start: &[StarCurve],
        schedule: Schedule,
    ) -> Result<NewtonReport> {
        let phases: Vec<Vec<usize>> = match schedule {
            Schedule::M2Only => vec![vec![2]],
            Schedule::Sequential => vec![vec![2], vec![2, 3]],
            Schedule::Simultaneous => vec![vec![2, 3]],
        };
        let mut params = self.pack(start);
        let mut report = NewtonReport {
            residual_norms: Vec::new(),
            step_norms: Vec::new(),
            jacobian_conds: Vec::new(),
            final_params: params.clone(),
            final_curves: start.to_vec(),
            iterations: 0,
            converged: false,
            diverged: false,
            shape_errors: None,
        };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for harmonics in &phases {
            let mut lambda = 1e-3;
            let mut residual = self.data_residual(&params, harmonics)?;
            let mut rnorm = norm(&residual);
            report.residual_norms.push(rnorm);
            let mut growth_streak = 0;
            for _ in 0..30 {
                report.iterations += 1;
                let jac = self.jacobian(&params, harmonics)?;
                let sv = jac.clone().singular_values();
                report
                    .jacobian_conds
                    .push(sv[0] / sv[sv.len() - 1].max(1e-300));
                // LM outer loop: grow lambda until a step is accepted
                let mut accepted = false;
                let mut step_norm = 0.0;
                for _ in 0..12 {
                    let delta = self.gauss_newton_step(&jac, &residual, lambda)?;
                    // backtracking line search with positivity guard
                    let mut scale = 1.0;
                    for _ in 0..20 {
                        let trial: Vec<f64> = params
                            .iter()
                            .zip(delta.iter())
                            .map(|(p, d)| p + scale * d)
                            .collect();
                        // safety floor well above the StarCurve positivity
                        // guard, so FD Jacobian perturbations stay valid and
                        // objects cannot silently collapse to slivers
                        let degenerate = self.unpack(&trial).map(|cs| {
                            cs.iter().any(|c| {
                                (0..64).any(|i| {
                                    c.radius(2.0 * std::f64::consts::PI * i as f64 / 64.0)
                                        < 5e-3
                                })
                            })
                        });
                        if !matches!(degenerate, Ok(false)) {
                            scale *= 0.5;
                            continue;
                        }
                        match self.data_residual(&trial, harmonics) {
                            Ok(tr) => {
                                let tn = norm(&tr);
                                if tn < rnorm {
                                    // accepted step: residual strictly decreases
                                    step_norm = scale * delta.norm();
                                    params = trial;
                                    residual = tr;
                                    if tn > rnorm * 0.9999 {
                                        growth_streak += 1;
                                    } else {
                                        growth_streak = 0;
                                    }
                                    rnorm = tn;
                                    accepted = true;
                                    break;
                                }
                            }
                            Err(Error::InvalidCurve(_)) => {}
                            Err(e) => return Err(e),
                        }
                        scale *= 0.5;
                    }
                    if accepted {
                        lambda = (lambda / 3.0).max(1e-12);
                        break;
                    }
                    lambda *= 10.0;
                    if lambda > 1e10 {
                        break;
                    }
                }
                if !accepted {
                    // no descent direction found: treat as stagnation
                    break;
                }
                report.residual_norms.push(rnorm);
                report.step_norms.push(step_norm);
                if growth_streak >= 3 {
                    report.diverged = true;
                    break;
                }
                if step_norm < 1e-8 {
                    report.converged = true;
                    break;
                }
            }
            if report.diverged {
                break;
            }
        }
        // converged if the last phase ended on the step-size criterion or
        // the residual is already negligible
        if !report.converged && !report.diverged {
            if let Some(&last) = report.residual_norms.last() {
                let first = report.residual_norms[0];
                report.converged = last < 1e-10 * first.max(1e-300) || last < 1e-12;
            }
        }
        report.final_curves = self.unpack(&params)?;
        report.final_params = params;
        Ok(report)
    }
}

/// Refine equivalent-disc centers and radii against the measured traces
/// before the frozen-center shape Newton. PDAP localizes the *equivalent
/// source* of an extended, phase-varying inclusion, which can sit several
/// hundredths away from the geometric center; a Gauss-Newton fit of the
/// disc forward model over `[c_x, c_y, r]` per object removes that bias.
/// Only the m = 2 trace is used (discs are a crude model; the cheapest
/// harmonic suffices).
pub fn refine_disc_centers(
    base: &ShapeProblem<'_>,
    centers: &[Point],
    radii: &[f64],
    max_iterations: usize,
) -> Result<(Vec<Point>, Vec<f64>)> {
    let n = centers.len();
    assert_eq!(radii.len(), n);
    let harmonics = [2usize];
    let eval = |x: &[f64]| -> Result<Vec<f64>> {
        let mut cs = Vec::with_capacity(n);
        let mut rs = Vec::with_capacity(n);
        for i in 0..n {
            let c = [x[3 * i], x[3 * i + 1]];
            let r = x[3 * i + 2];
            if r < 5e-3 || (c[0] * c[0] + c[1] * c[1]).sqrt() + r > 0.98 {
                return Err(Error::InvalidCurve("disc refinement out of bounds".into()));
            }
            cs.push(c);
            rs.push(r);
        }
        let prob = ShapeProblem {
            cfg: base.cfg.clone(),
            excitation: base.excitation.clone(),
            centers: cs,
            fourier_order: 0,
            radial_order: base.radial_order,
            angular_order: base.angular_order,
            solver2: base.solver2,
            solver3: None,
            data: base.data.clone(),
        };
        prob.data_residual(&rs, &harmonics)
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut x: Vec<f64> = centers
        .iter()
        .zip(radii)
        .flat_map(|(c, &r)| [c[0], c[1], r])
        .collect();
    let mut residual = eval(&x)?;
    let mut rnorm = norm(&residual);
    let mut lambda = 1e-3;
    for _ in 0..max_iterations {
        // forward-difference Jacobian over the 3n disc parameters
        let h = 1e-5;
        let cols: Result<Vec<Vec<f64>>> = (0..x.len())
            .into_par_iter()
            .map(|j| {
                let mut xp = x.clone();
                xp[j] += h;
                let rp = eval(&xp)?;
                Ok(rp.iter().zip(&residual).map(|(a, b)| (a - b) / h).collect())
            })
            .collect();
        let cols = cols?;
        let rows = residual.len();
        let mut jac = nalgebra::DMatrix::zeros(rows, x.len());
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        let mut accepted = false;
        for _ in 0..8 {
            let jtj = jac.transpose() * &jac;
            let reg = &jtj + nalgebra::DMatrix::identity(x.len(), x.len()) * (lambda * jtj.trace() / x.len() as f64);
            let rhs = jac.transpose() * nalgebra::DVector::from_column_slice(&residual);
            let Some(delta) = reg.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, d)| a - d).collect();
            match eval(&trial) {
                Ok(tr) => {
                    let tn = norm(&tr);
                    if tn < rnorm {
                        x = trial;
                        residual = tr;
                        let drop = (rnorm - tn) / rnorm.max(1e-300);
                        rnorm = tn;
                        lambda = (lambda / 3.0).max(1e-10);
                        accepted = true;
                        if drop < 1e-4 {
                            // stagnation: the disc model cannot fit better
                            return Ok(unstack_discs(&x, n));
                        }
                        break;
                    }
                }
                Err(Error::InvalidCurve(_)) => {}
                Err(e) => return Err(e),
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(unstack_discs(&x, n))
}

fn unstack_discs(x: &[f64], n: usize) -> (Vec<Point>, Vec<f64>) {
    let centers: Vec<Point> = (0..n).map(|i| [x[3 * i], x[3 * i + 1]]).collect();
    let radii: Vec<f64> = (0..n).map(|i| x[3 * i + 2]).collect();
    (centers, radii)
}

/// Moment-matching residual: for the circular-wave family
/// `w_n(rho, theta) = J_|n|(kappa rho) e^{i n theta}`, return
/// `|int_Sigma g (d_nu w_n + i kappa w_n) ds - i kappa Q(w_n)|`
/// for `n = -n_w..=n_w`, where `Q(w) = kappa^2 int_D f w` for an inclusion
/// source and `Q(w) = sum_k lambda_k w(S_k)` for a measure.
pub fn moment_match_residual(
    data: &BoundaryTrace,
    rhs: &SourceSpec,
    kappa: f64,
    omega_radius: f64,
    n_w: i32,
) -> Vec<f64> {
    assert_eq!(data.kind, TraceKind::Neumann, "moment matching uses flux data");
    let mut out = Vec::with_capacity((2 * n_w + 1) as usize);
    for n in -n_w..=n_w {
        let na = n.unsigned_abs();
        let wn = |x: Point| -> C {
            let rho = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let theta = x[1].atan2(x[0]);
            bessel_jn(na, kappa * rho) * C::from_polar(1.0, n as f64 * theta)
        };
        // radial derivative on the outer circle: kappa J'_|n|(kappa rho)
        let djn = |z: f64| -> f64 {
            if na == 0 {
                -bessel_jn(1, z)
            } else {
                0.5 * (bessel_jn(na - 1, z) - bessel_jn(na + 1, z))
            }
        };
        let mut lhs = C::new(0.0, 0.0);
        for (&t, g) in data.angles.iter().zip(&data.samples) {
            let x = [omega_radius * t.cos(), omega_radius * t.sin()];
            let wv = wn(x);
            let dw = kappa
                * djn(kappa * omega_radius)
                * C::from_polar(1.0, n as f64 * t);
            lhs += g * (dw + I * kappa * wv) * data.node_weight;
        }
        let q: C = match rhs {
            SourceSpec::Measure(m) => m
                .points
                .iter()
                .zip(&m.weights)
                .map(|(&p, lam)| lam * wn(p))
                .sum(),
            SourceSpec::Inclusion { nodes, f } => {
                kappa
                    * kappa
                    * nodes
                        .iter()
                        .zip(f.iter())
                        .map(|(nq, fv)| nq.w * fv * wn(nq.x))
                        .sum::<C>()
            }
        };
        out.push((lhs - I * kappa * q).norm());
    }
    out
}

/// Distance from `origin` to the boundary of `curve` along direction
/// angle `t`, by bisection. `origin` must lie inside the curve; the curve
/// must be star-shaped as seen from `origin` (true whenever `origin` is
/// close to the curve's own center).
pub fn radius_about(curve: &StarCurve, origin: [f64; 2], t: f64) -> f64 {
    if (origin[0] - curve.center[0]).abs() < 1e-15
        && (origin[1] - curve.center[1]).abs() < 1e-15
    {
        return curve.radius(t);
    }
    let d = [t.cos(), t.sin()];
    let offset = ((origin[0] - curve.center[0]).powi(2)
        + (origin[1] - curve.center[1]).powi(2))
    .sqrt();
    let inside = |s: f64| -> bool {
        curve.contains([origin[0] + s * d[0], origin[1] + s * d[1]])
    };
    let mut lo = 0.0;
    let mut hi = curve.max_radius() + offset + 1e-9;
    debug_assert!(inside(lo), "origin must lie inside the curve");
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Relative L2 distance of the radial functions after optimal rotation
/// alignment: `min_tau ||r_a(. + tau) - r_b|| / ||r_b||`. Both radius
/// functions are measured about the truth's center, so a reconstruction
/// parametrized around a slightly offset center is not penalized for the
/// offset itself.
pub fn radial_l2_error(recon: &StarCurve, truth: &StarCurve) -> f64 {
    let n = 720;
    let rb: Vec<f64> = (0..n)
        .map(|i| truth.radius(2.0 * std::f64::consts::PI * i as f64 / n as f64))
        .collect();
    let ra: Vec<f64> = (0..n)
        .map(|i| {
            radius_about(recon, truth.center, 2.0 * std::f64::consts::PI * i as f64 / n as f64)
        })
        .collect();
    let den: f64 = rb.iter().map(|r| r * r).sum::<f64>().sqrt();
    let mut best = f64::MAX;
    for shift in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            let d = ra[(i + shift) % n] - rb[i];
            acc += d * d;
        }
        best = best.min(acc);
    }
    best.sqrt() / den
}

/// Symmetric-difference area of two inclusion configurations by grid
/// counting over their joint bounding box.
pub fn symmetric_difference_area(a: &[StarCurve], b: &[StarCurve], grid: usize) -> f64 {
    let mut lo = [f64::MAX; 2];
    let mut hi = [f64::MIN; 2];
    for c in a.iter().chain(b.iter()) {
        let r = c.max_radius();
        for d in 0..2 {
            lo[d] = lo[d].min(c.center[d] - r);
            hi[d] = hi[d].max(c.center[d] + r);
        }
    }
    if lo[0] > hi[0] {
        return 0.0;
    }
    let hx = (hi[0] - lo[0]) / grid as f64;
    let hy = (hi[1] - lo[1]) / grid as f64;
    let count: usize = (0..grid)
        .into_par_iter()
        .map(|ix| {
            let x = lo[0] + (ix as f64 + 0.5) * hx;
            let mut c = 0;
            for iy in 0..grid {
                let y = lo[1] + (iy as f64 + 0.5) * hy;
                let ina = a.iter().any(|curve| curve.contains([x, y]));
                let inb = b.iter().any(|curve| curve.contains([x, y]));
                if ina != inb {
                    c += 1;
                }
            }
            c
        })
        .sum();
    count as f64 * hx * hy
}
