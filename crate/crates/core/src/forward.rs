//! Helmholtz source problems on a disc domain with impedance boundary
//! conditions, and the multiharmonic cascade.
//!
//! The solution is split as `u = u_free + u_d`: the free-space part is the
//! convolution of the source with the fundamental solution, and the
//! correction `u_d` solves the homogeneous Helmholtz equation with the
//! impedance data of `-u_free`, via a single-layer Nystrom scheme whose
//! boundary operator combines the single layer and its normal derivative.
//! The logarithmic kernel singularities are handled by spectral
//! (trigonometric) product quadrature on the circle.
//!
//! Sign convention: the kernel used for sources is
//! `Phi(x, y) = -(i/4) H0^1(kappa |x - y|)`, normalized so that
//! `(Laplacian + kappa^2) Phi(., y) = delta_y`; it is pinned by the
//! finite-difference PDE residual test rather than by transcription.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{InclusionSet, Point, QuadNode, StarCurve};
use crate::specfun::{bessel_j, hankel1};
use crate::{Error, Result};

pub type C = Complex64;

const I: C = C::new(0.0, 1.0);
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Fundamental solution with `(Lap + kappa^2) phi = delta`:
/// `phi(r) = -(i/4) H0^1(kappa r)`.
pub fn fundamental(kappa: f64, r: f64) -> Result<C> {
    Ok(-0.25 * I * hankel1(0, kappa * r)?)
}

/// Gradient factor: `grad_x phi = grad_coeff * (x - y)` with
/// `grad_coeff = (i kappa / 4) H1^1(kappa r) / r`.
pub fn fundamental_grad_coeff(kappa: f64, r: f64) -> Result<C> {
    Ok(0.25 * I * kappa * hankel1(1, kappa * r)? / r)
}

/// Domain and physical configuration for the forward map. The domain is the
/// disc of radius `omega_radius` centered at the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainConfig {
    pub omega_radius: f64,
    /// boundary quadrature size (even)
    pub n_boundary: usize,
    /// angular frequency
    pub omega: f64,
    /// sound speed
    pub c: f64,
    /// nonlinearity coefficient value on the inclusions
    pub eta0: f64,
}

impl DomainConfig {
    /// Operating point used throughout: unit disc, kappa = 10 at the second
    /// harmonic and 15 at the third.
    pub fn standard(n_boundary: usize) -> Self {
        Self { omega_radius: 1.0, n_boundary, omega: 5.0, c: 1.0, eta0: 1.0 }
    }

    /// Fundamental wave number `kappa_1 = omega / c`.
    pub fn kappa1(&self) -> f64 {
        self.omega / self.c
    }

    /// Wave number of the m-th harmonic.
    pub fn kappa_m(&self, m: usize) -> f64 {
        m as f64 * self.kappa1()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_boundary < 64 || self.n_boundary % 2 != 0 {
            return Err(Error::Domain(format!(
                "n_boundary must be even and >= 64, got {}",
                self.n_boundary
            )));
        }
        if self.omega_radius <= 0.0 || self.omega <= 0.0 || self.c <= 0.0 {
            return Err(Error::Domain("omega_radius, omega, c must be positive".into()));
        }
        Ok(())
    }
}

/// Weighted point-source collection.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<C>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<C>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Domain("points/weights length mismatch".into()));
        }
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                if (p[0] - q[0]).abs() < 1e-14 && (p[1] - q[1]).abs() < 1e-14 {
                    return Err(Error::Domain("source points must be pairwise distinct".into()));
                }
            }
        }
        Ok(Self { points, weights })
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn total_weight(&self) -> C {
        self.weights.iter().sum()
    }
}

/// Trace kind on the observation arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    Dirichlet,
    Neumann,
}

/// Complex samples on the observation arc `Sigma`, equispaced in angle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub kind: TraceKind,
    /// arc fraction `alpha / 2 pi` in (0, 1]
    pub arc_fraction: f64,
    /// center angle of the arc
    pub arc_center: f64,
    pub angles: Vec<f64>,
    pub samples: Vec<C>,
    /// quadrature weight of one node (arclength measure)
    pub node_weight: f64,
}

impl BoundaryTrace {
    /// L2(Sigma) norm.
    pub fn norm(&self) -> f64 {
        (self.node_weight * self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Pointwise difference; panics on incompatible sampling.
    pub fn sub(&self, other: &BoundaryTrace) -> BoundaryTrace {
        assert_eq!(self.samples.len(), other.samples.len(), "trace length mismatch");
        assert_eq!(self.kind, other.kind, "trace kind mismatch");
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect();
        BoundaryTrace { samples, ..self.clone() }
    }

    /// Convert a Dirichlet trace to the Neumann trace implied by the
    /// impedance condition `g = -(i kappa + gamma) y` (here gamma = 0).
    pub fn dirichlet_to_neumann(&self, kappa: f64) -> BoundaryTrace {
        assert_eq!(self.kind, TraceKind::Dirichlet);
        BoundaryTrace {
            kind: TraceKind::Neumann,
            samples: self.samples.iter().map(|y| -I * kappa * y).collect(),
            ..self.clone()
        }
    }
}

/// Source of a single Helmholtz solve.
#[derive(Debug, Clone)]
pub enum SourceSpec {
    /// right-hand side `mu` (weighted point sources)
    Measure(DiscreteMeasure),
    /// right-hand side `kappa^2 chi_D f` sampled on interior quadrature nodes
    Inclusion { nodes: Vec<QuadNode>, f: Vec<C> },
}

/// One solved harmonic: boundary traces plus everything needed to evaluate
/// the field anywhere in the domain.
#[derive(Debug, Clone)]
pub struct SolvedField {
    pub harmonic: usize,
    pub kappa: f64,
    pub dirichlet: Vec<C>,
    pub neumann: Vec<C>,
    pub source: SourceSpec,
    /// single-layer density of the impedance correction
    pub density: Vec<C>,
}

/// Nystrom solver for the impedance problem on the disc of radius `R`,
/// at a fixed wave number. Immutable after construction.
pub struct HelmholtzSolver {
    pub radius: f64,
    pub kappa: f64,
    pub n_bnd: usize,
    thetas: Vec<f64>,
    bnd_pts: Vec<Point>,
    /// S with arclength factor folded in (Kress product quadrature)
    s_mat: nalgebra::DMatrix<C>,
    /// interior Neumann trace operator of the single layer, `K' + I/2`
    dn_mat: nalgebra::DMatrix<C>,
    lu: nalgebra::LU<C, nalgebra::Dyn, nalgebra::Dyn>,
    pub condition_number: f64,
}

/// Kress quadrature weights for the log kernel on an even grid of size `n`:
/// `R_{|i-j|}` integrates `ln(4 sin^2((t - tau)/2))` against trig
/// interpolants exactly.
fn kress_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    (0..n)
        .map(|k| {
            let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            let mut r = 0.0;
            for m in 1..half {
                r += (m as f64 * t).cos() / m as f64;
            }
            -4.0 * std::f64::consts::PI / n as f64 * r
                - 4.0 * std::f64::consts::PI / (n * n) as f64 * (half as f64 * t).cos()
        })
        .collect()
}

impl HelmholtzSolver {
    pub fn new(radius: f64, kappa: f64, n_bnd: usize) -> Result<Self> {
        if n_bnd < 64 || n_bnd % 2 != 0 {
            return Err(Error::Domain(format!("n_bnd must be even and >= 64, got {n_bnd}")));
        }
        if kappa <= 0.0 || radius <= 0.0 {
            return Err(Error::Domain("kappa and radius must be positive".into()));
        }
        let n = n_bnd;
        let thetas: Vec<f64> =
            (0..n).map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64).collect();
        let bnd_pts: Vec<Point> =
            thetas.iter().map(|&t| [radius * t.cos(), radius * t.sin()]).collect();
        let rw = kress_weights(n);
        let h = 2.0 * std::f64::consts::PI / n as f64;

        // layer kernels use G = (i/4) H0^1 internally; the density sign
        // adjusts automatically through the right-hand side
        let mut s_mat = nalgebra::DMatrix::<C>::zeros(n, n);
        let mut dn_mat = nalgebra::DMatrix::<C>::zeros(n, n);
        let log_r = kappa.ln() + radius.ln();
        for i in 0..n {
            for j in 0..n {
                let k = (i + n - j) % n;
                if i == j {
                    // diagonal limits of the smooth parts
                    let m1 = -1.0 / (4.0 * std::f64::consts::PI);
                    let m2 = C::new(
                        -(EULER_GAMMA + (0.5 * kappa * radius).ln())
                            / (2.0 * std::f64::consts::PI),
                        0.25,
                    );
                    s_mat[(i, j)] = radius * (rw[k] * m1 + h * m2);
                    let n2 = C::new(-1.0 / (4.0 * std::f64::consts::PI * radius), 0.0);
                    dn_mat[(i, j)] = radius * h * n2 + C::new(0.5, 0.0);
                } else {
                    let dt = thetas[i] - thetas[j];
                    let sin2 = (0.5 * dt).sin().powi(2);
                    let log4sin2 = (4.0 * sin2).ln();
                    let rho = 2.0 * radius * (0.5 * dt).sin().abs();
                    let z = kappa * rho;
                    let h0 = hankel1(0, z)?;
                    let h1 = hankel1(1, z)?;
                    // single layer: M = (i/4) H0, split against the log
                    let m1 = -bessel_j(0, z) / (4.0 * std::f64::consts::PI);
                    let m2 = 0.25 * I * h0 - m1 * log4sin2;
                    s_mat[(i, j)] = radius * (rw[k] * m1 + h * m2);
                    // normal derivative: A = -(i/(8R)) z H1(z)
                    let a = -I / (8.0 * radius) * z * h1;
                    let n1 = z * bessel_j(1, z) / (8.0 * std::f64::consts::PI * radius);
                    let n2 = a - n1 * log4sin2;
                    dn_mat[(i, j)] = radius * (rw[k] * n1 + h * n2);
                    let _ = log_r;
                }
            }
        }
        // boundary operator of the impedance problem
        let mut t_mat = dn_mat.clone();
        t_mat += &s_mat * C::new(0.0, kappa);

        let sv = t_mat.clone().singular_values();
        let cond = sv[0] / sv[sv.len() - 1];
        if !cond.is_finite() || cond > 1e12 {
            return Err(Error::IllConditioned(cond));
        }
        let lu = t_mat.lu();
        Ok(Self { radius, kappa, n_bnd: n, thetas, bnd_pts, s_mat, dn_mat, lu, condition_number: cond })
    }

    pub fn boundary_angles(&self) -> &[f64] {
        &self.thetas
    }

    pub fn boundary_points(&self) -> &[Point] {
        &self.bnd_pts
    }

    /// Arclength quadrature weight of one boundary node.
    pub fn node_weight(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius / self.n_bnd as f64
    }

    /// Free-space field and its radial derivative of the source at the
    /// boundary nodes.
    fn free_traces(&self, source: &SourceSpec) -> Result<(Vec<C>, Vec<C>)> {
        let kappa = self.kappa;
        let vals: Result<Vec<(C, C)>> = self
            .bnd_pts
            .par_iter()
            .map(|&x| {
                let nu = [x[0] / self.radius, x[1] / self.radius];
                free_value_grad(source, kappa, x, nu)
            })
            .collect();
        let vals = vals?;
        Ok((vals.iter().map(|v| v.0).collect(), vals.iter().map(|v| v.1).collect()))
    }

    /// Solve the homogeneous impedance problem with boundary data `g`
    /// (`d_nu u + i kappa u = g`), returning the layer density.
    pub fn impedance_correction_density(&self, g: &[C]) -> Result<Vec<C>> {
        let rhs = nalgebra::DVector::from_column_slice(g);
        let phi = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("boundary system LU solve failed".into()))?;
        Ok(phi.as_slice().to_vec())
    }

    /// Dirichlet and interior Neumann traces of the single layer with
    /// density `phi`.
    pub fn layer_traces(&self, phi: &[C]) -> (Vec<C>, Vec<C>) {
        let v = nalgebra::DVector::from_column_slice(phi);
        let d = &self.s_mat * &v;
        let n = &self.dn_mat * &v;
        (d.as_slice().to_vec(), n.as_slice().to_vec())
    }

    /// Single-layer potential at an interior point.
    pub fn layer_eval(&self, phi: &[C], x: Point) -> Result<C> {
        let w = self.node_weight();
        let mut u = C::new(0.0, 0.0);
        for (j, y) in self.bnd_pts.iter().enumerate() {
            let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt();
            // internal layer kernel is (i/4) H0 = -Phi
            u += -fundamental(self.kappa, r)? * phi[j] * w;
        }
        Ok(u)
    }

    /// Full solve of the impedance source problem.
    pub fn solve(&self, source: SourceSpec) -> Result<SolvedField> {
        self.solve_harmonic(source, 1)
    }

    pub fn solve_harmonic(&self, source: SourceSpec, harmonic: usize) -> Result<SolvedField> {
        if let SourceSpec::Measure(m) = &source {
            for p in &m.points {
                if (p[0] * p[0] + p[1] * p[1]).sqrt() >= self.radius {
                    return Err(Error::Domain("source point outside the domain".into()));
                }
            }
        }
        let (uf, duf) = self.free_traces(&source)?;
        // impedance defect of the free-space field
        let g: Vec<C> = uf
            .iter()
            .zip(&duf)
            .map(|(u, du)| -(du + I * self.kappa * u))
            .collect();
        let density = self.impedance_correction_density(&g)?;
        let (ld, ln_) = self.layer_traces(&density);
        let dirichlet: Vec<C> = uf.iter().zip(&ld).map(|(a, b)| a + b).collect();
        let neumann: Vec<C> = duf.iter().zip(&ln_).map(|(a, b)| a + b).collect();
        Ok(SolvedField { harmonic, kappa: self.kappa, dirichlet, neumann, source, density })
    }

    /// Value of the solved field at an interior point away from the source
    /// support.
    pub fn eval(&self, field: &SolvedField, x: Point) -> Result<C> {
        let (v, _) = free_value_grad(&field.source, self.kappa, x, [0.0, 0.0])?;
        Ok(v + self.layer_eval(&field.density, x)?)
    }

    /// Values of the solved field at the interior quadrature nodes of `set`,
    /// using singularity subtraction for the owning object. When `grad_f`
    /// (gradient of the source density at the nodes) is supplied, the linear
    /// Taylor term is subtracted as well, gaining one order of accuracy.
    pub fn eval_at_quad_nodes(
        &self,
        field: &SolvedField,
        set: &InclusionSet,
        nodes: &[QuadNode],
        grad_f: Option<&[[C; 2]]>,
    ) -> Result<Vec<C>> {
        let (src_nodes, f) = match &field.source {
            SourceSpec::Inclusion { nodes, f } => (nodes.as_slice(), f.as_slice()),
            SourceSpec::Measure(_) => {
                // point sources: plain evaluation (targets must avoid them)
                return nodes.par_iter().map(|n| self.eval(field, n.x)).collect();
            }
        };
        let kappa = self.kappa;
        let k2 = kappa * kappa;
        // boundary sampling for the moment volume integrals
        let nb = 8 * set.angular_order;
        nodes
            .par_iter()
            .enumerate()
            .map(|(ti, tgt)| {
                let x = tgt.x;
                // local source value and gradient at the target node
                let fx = f[ti];
                let gx = grad_f.map(|g| g[ti]).unwrap_or([C::new(0.0, 0.0); 2]);
                let mut u = C::new(0.0, 0.0);
                for (qi, q) in src_nodes.iter().enumerate() {
                    let same = q.object == tgt.object;
                    let dx = q.x[0] - x[0];
                    let dy = q.x[1] - x[1];
                    let r = (dx * dx + dy * dy).sqrt();
                    if same {
                        if qi == ti {
                            continue; // subtracted integrand vanishes here
                        }
                        let taylor = fx + gx[0] * dx + gx[1] * dy;
                        u += q.w * k2 * (f[qi] - taylor) * fundamental(kappa, r)?;
                    } else {
                        u += q.w * k2 * f[qi] * fundamental(kappa, r)?;
                    }
                }
                let obj = &set.objects[tgt.object];
                let vd = volume_potential_of_one(obj, kappa, x, nb)?;
                u += k2 * fx * vd;
                if grad_f.is_some() {
                    let v1 = volume_moment_of_one(obj, kappa, x, nb)?;
                    u += k2 * (gx[0] * v1[0] + gx[1] * v1[1]);
                }
                u += self.layer_eval(&field.density, x)?;
                Ok(u)
            })
            .collect()
    }

    /// Restrict a trace of the solved field to an arc.
    pub fn extract_trace(
        &self,
        field: &SolvedField,
        kind: TraceKind,
        arc_fraction: f64,
        arc_center: f64,
    ) -> BoundaryTrace {
        assert!(arc_fraction > 0.0 && arc_fraction <= 1.0, "arc fraction in (0,1]");
        let src = match kind {
            TraceKind::Dirichlet => &field.dirichlet,
            TraceKind::Neumann => &field.neumann,
        };
        let half = std::f64::consts::PI * arc_fraction;
        let mut angles = Vec::new();
        let mut samples = Vec::new();
        for (i, &t) in self.thetas.iter().enumerate() {
            let mut d = (t - arc_center).rem_euclid(2.0 * std::f64::consts::PI);
            if d > std::f64::consts::PI {
                d -= 2.0 * std::f64::consts::PI;
            }
            // half-open arc [center - half, center + half) so that a
            // fraction p keeps exactly p * n_bnd equispaced nodes
            if (d >= -half - 1e-12 && d < half - 1e-12) || arc_fraction >= 1.0 {
                angles.push(t);
                samples.push(src[i]);
            }
        }
        BoundaryTrace {
            kind,
            arc_fraction,
            arc_center,
            angles,
            samples,
            node_weight: self.node_weight(),
        }
    }
}

/// `int_D Phi(x, y) dy` for `x` strictly inside the star-shaped object, via
/// `V(x) = (1 - oint_dD d_nu(y) Phi(x,y) ds(y)) / kappa^2`. The Gauss
/// kernel `<y-x, nu> / (2 pi rho^2)` (whose closed integral is exactly 1
/// for interior targets) is subtracted analytically, so the trapezoid rule
/// only sees a log-type kernel and stays accurate for targets near the
/// boundary.
pub fn volume_potential_of_one(
    obj: &StarCurve,
    kappa: f64,
    x: Point,
    nb: usize,
) -> Result<C> {
    let h = 2.0 * std::f64::consts::PI / nb as f64;
    let mut bint = C::new(0.0, 0.0);
    for i in 0..nb {
        let t = h * i as f64;
        let (p, nu, speed) = obj.boundary_frame(t);
        let dx = x[0] - p[0];
        let dy = x[1] - p[1];
        let r2 = dx * dx + dy * dy;
        let r = r2.sqrt();
        // d_nu(y) Phi(x, y) = grad_coeff * <y - x, nu>
        let gc = fundamental_grad_coeff(kappa, r)?;
        let gauss = 1.0 / (2.0 * std::f64::consts::PI * r2);
        bint += -(gc - gauss) * (dx * nu[0] + dy * nu[1]) * speed * h;
    }
    Ok(-bint / (kappa * kappa))
}

/// `int_D (y - x) Phi(x, y) dy` for `x` strictly inside the object: the
/// integrand is `grad_y psi(|y - x|)` with `psi(s) = int_0^s t Phi(t) dt`,
/// so the integral reduces to `oint_dD psi nu ds`.
pub fn volume_moment_of_one(
    obj: &StarCurve,
    kappa: f64,
    x: Point,
    nb: usize,
) -> Result<[C; 2]> {
    let h = 2.0 * std::f64::consts::PI / nb as f64;
    let mut m = [C::new(0.0, 0.0); 2];
    for i in 0..nb {
        let t = h * i as f64;
        let (p, nu, speed) = obj.boundary_frame(t);
        let r = ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt();
        let z = kappa * r;
        // psi(s) = -(i/(4 kappa^2)) (z H1(z) + 2i/pi)
        let psi = -0.25 * I / (kappa * kappa)
            * (z * hankel1(1, z)? + 2.0 * I / std::f64::consts::PI);
        m[0] += psi * nu[0] * speed * h;
        m[1] += psi * nu[1] * speed * h;
    }
    Ok(m)
}

/// Free-space value and directional derivative (along `nu`) of a source at
/// point `x`, both by direct kernel summation.
fn free_value_grad(source: &SourceSpec, kappa: f64, x: Point, nu: [f64; 2]) -> Result<(C, C)> {
    let mut v = C::new(0.0, 0.0);
    let mut dv = C::new(0.0, 0.0);
    match source {
        SourceSpec::Measure(m) => {
            for (p, lam) in m.points.iter().zip(&m.weights) {
                let dx = x[0] - p[0];
                let dy = x[1] - p[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r < 1e-12 {
                    return Err(Error::Singularity);
                }
                v += lam * fundamental(kappa, r)?;
                let gc = fundamental_grad_coeff(kappa, r)?;
                dv += lam * gc * (dx * nu[0] + dy * nu[1]);
            }
        }
        SourceSpec::Inclusion { nodes, f } => {
            let k2 = kappa * kappa;
            for (n, fv) in nodes.iter().zip(f) {
                let dx = x[0] - n.x[0];
                let dy = x[1] - n.x[1];
                let r = (dx * dx + dy * dy).sqrt();
                if r < 1e-12 {
                    return Err(Error::Singularity);
                }
                v += n.w * k2 * fv * fundamental(kappa, r)?;
                let gc = fundamental_grad_coeff(kappa, r)?;
                dv += n.w * k2 * fv * gc * (dx * nu[0] + dy * nu[1]);
            }
        }
    }
    Ok((v, dv))
}

/// Excitation of the fundamental harmonic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Excitation {
    /// `p1(x) = amplitude * exp(i kappa1 d . x)` used directly as the
    /// background field
    PlaneWave { direction: [f64; 2], amplitude: f64 },
}

impl Excitation {
    pub fn default_plane_wave() -> Self {
        Excitation::PlaneWave { direction: [1.0, 0.0], amplitude: 1.0 }
    }

    pub fn p1(&self, kappa1: f64, x: Point) -> C {
        match self {
            Excitation::PlaneWave { direction, amplitude } => {
                let phase = kappa1 * (direction[0] * x[0] + direction[1] * x[1]);
                C::from_polar(*amplitude, phase)
            }
        }
    }

    pub fn grad_p1(&self, kappa1: f64, x: Point) -> [C; 2] {
        match self {
            Excitation::PlaneWave { direction, .. } => {
                let p = self.p1(kappa1, x);
                [I * kappa1 * direction[0] * p, I * kappa1 * direction[1] * p]
            }
        }
    }
}

/// All harmonics of one cascade run, plus the interior values used to build
/// the next source.
pub struct CascadeResult {
    pub fields: Vec<SolvedField>,
    /// interior values of each solved harmonic at the quadrature nodes
    pub interior: Vec<Vec<C>>,
    pub nodes: Vec<QuadNode>,
}

/// Sequentially solve the higher harmonics `m = 2..=m_max` for truncation
/// variant (b): the m-th source is
/// `(eta0/4) m^2 kappa1^2 chi_D sum_{l=1}^{m-1} p_l p_{m-l}`.
pub fn harmonic_cascade(
    cfg: &DomainConfig,
    set: &InclusionSet,
    excitation: &Excitation,
    m_max: usize,
    solvers: &[&HelmholtzSolver],
) -> Result<CascadeResult> {
    cfg.validate()?;
    if !(2..=3).contains(&m_max) {
        return Err(Error::Domain(format!("m_max must be 2 or 3, got {m_max}")));
    }
    assert_eq!(solvers.len(), m_max - 1, "one solver per harmonic m = 2..=m_max");
    let nodes = crate::geometry::interior_quadrature(set)?;
    let kappa1 = cfg.kappa1();
    let p1: Vec<C> = nodes.iter().map(|n| excitation.p1(kappa1, n.x)).collect();

    let mut fields = Vec::new();
    let mut interior = Vec::new();

    // m = 2: source (eta0/4) p1^2 at kappa = 2 kappa1
    let f2: Vec<C> = p1.iter().map(|p| 0.25 * cfg.eta0 * p * p).collect();
    let s2 = solvers[0];
    debug_assert!((s2.kappa - cfg.kappa_m(2)).abs() < 1e-12, "solver kappa mismatch at m=2");
    let field2 = s2.solve_harmonic(SourceSpec::Inclusion { nodes: nodes.clone(), f: f2 }, 2)?;
    if m_max >= 3 {
        // grad f2 = (eta0/2) p1 grad p1 at the nodes (analytic)
        let g2: Vec<[C; 2]> = nodes
            .iter()
            .zip(&p1)
            .map(|(n, p)| {
                let g = excitation.grad_p1(kappa1, n.x);
                [0.5 * cfg.eta0 * p * g[0], 0.5 * cfg.eta0 * p * g[1]]
            })
            .collect();
        let p2 = s2.eval_at_quad_nodes(&field2, set, &nodes, Some(&g2))?;
        let f3: Vec<C> = p1.iter().zip(&p2).map(|(a, b)| 0.25 * cfg.eta0 * 2.0 * a * b).collect();
        let s3 = solvers[1];
        debug_assert!((s3.kappa - cfg.kappa_m(3)).abs() < 1e-12, "solver kappa mismatch at m=3");
        let field3 =
            s3.solve_harmonic(SourceSpec::Inclusion { nodes: nodes.clone(), f: f3 }, 3)?;
        interior.push(p2);
        interior.push(Vec::new());
        fields.push(field2);
        fields.push(field3);
    } else {
        interior.push(Vec::new());
        fields.push(field2);
    }
    Ok(CascadeResult { fields, interior, nodes })
}
