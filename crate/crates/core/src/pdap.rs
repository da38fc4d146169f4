//! Sparse point-source recovery from arc data by a primal-dual active
//! point (greedy insertion) strategy.
//!
//! One boundary factorization is reused for every kernel column: the column
//! for a candidate location `x` is the observed Neumann trace on the arc
//! `Sigma` of the unit point source at `x`. Each outer iteration inserts
//! the maximizer of the dual certificate
//! `xi(x) = sum_s w_s conj(K(s, x)) res_s`,
//! refines it by golden-section coordinate descent, re-fits all complex
//! weights by least squares, and prunes negligible atoms.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::forward::{BoundaryTrace, DiscreteMeasure, HelmholtzSolver, SourceSpec, TraceKind};
use crate::geometry::Point;
use crate::{Error, Result};

type C = Complex64;

/// Tuning knobs of the sparse recovery.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdapConfig {
    /// radial grid size of the candidate set
    pub grid_nr: usize,
    /// angular grid size of the candidate set
    pub grid_ntheta: usize,
    /// candidate radii live in (0, r_fraction * R)
    pub r_fraction: f64,
    pub max_atoms: usize,
    pub max_iterations: usize,
    /// golden-section sweeps per inserted atom (0 disables refinement)
    pub refine_sweeps: usize,
    /// drop atoms with |lambda| below this fraction of the largest
    pub prune_rel: f64,
    /// stop once the residual norm falls below this value
    pub target_residual: f64,
}

impl Default for PdapConfig {
    fn default() -> Self {
        Self {
            grid_nr: 48,
            grid_ntheta: 96,
            r_fraction: 0.9,
            max_atoms: 24,
            max_iterations: 24,
            refine_sweeps: 2,
            prune_rel: 1e-3,
            target_residual: 0.0,
        }
    }
}

/// Result of a recovery run.
#[derive(Debug, Clone)]
pub struct PdapOutcome {
    pub measure: DiscreteMeasure,
    pub residual_norm: f64,
    /// residual norm after each outer iteration
    pub history: Vec<f64>,
    pub iterations: usize,
    /// true if the loop exited on stagnation rather than the discrepancy
    /// target
    pub stagnated: bool,
}

/// Inverse problem context: inversion-grid solver plus the observed data.
pub struct PdapProblem<'a> {
    solver: &'a HelmholtzSolver,
    data: Vec<C>,
    arc_indices: Vec<usize>,
    arc_fraction: f64,
    arc_center: f64,
    node_weight: f64,
}

impl<'a> PdapProblem<'a> {
    /// The data trace must be a Neumann trace sampled at (a subset of) the
    /// solver's boundary nodes.
    pub fn new(solver: &'a HelmholtzSolver, data: &BoundaryTrace) -> Result<Self> {
        if data.kind != TraceKind::Neumann {
            return Err(Error::Domain("pdap expects Neumann data".into()));
        }
        let mut arc_indices = Vec::with_capacity(data.angles.len());
        let thetas = solver.boundary_angles();
        for &a in &data.angles {
            let idx = thetas
                .iter()
                .position(|&t| (t - a).abs() < 1e-10)
                .ok_or_else(|| {
                    Error::Domain("data angles do not align with solver nodes".into())
                })?;
            arc_indices.push(idx);
        }
        Ok(Self {
            solver,
            data: data.samples.clone(),
            arc_indices,
            arc_fraction: data.arc_fraction,
            arc_center: data.arc_center,
            node_weight: data.node_weight,
        })
    }

    /// Observed trace of a unit point source at `x` (one kernel column).
    pub fn kernel_column(&self, x: Point) -> Result<Vec<C>> {
        let m = DiscreteMeasure::new(vec![x], vec![C::new(1.0, 0.0)])?;
        let field = self.solver.solve(SourceSpec::Measure(m))?;
        Ok(self.arc_indices.iter().map(|&i| field.neumann[i]).collect())
    }

    /// Forward map of a measure onto the arc samples.
    pub fn apply_f(&self, measure: &DiscreteMeasure) -> Result<Vec<C>> {
        let field = self.solver.solve(SourceSpec::Measure(measure.clone()))?;
        Ok(self.arc_indices.iter().map(|&i| field.neumann[i]).collect())
    }

    /// Dual certificate value at `x` for the residual `res`:
    /// `xi(x) = sum_s w conj(K(s,x)) res_s`.
    pub fn apply_fstar(&self, res: &[C], x: Point) -> Result<C> {
        let col = self.kernel_column(x)?;
        Ok(self.node_weight
            * col.iter().zip(res).map(|(k, r)| k.conj() * r).sum::<C>())
    }

    fn weighted_norm(&self, v: &[C]) -> f64 {
        (self.node_weight * v.iter().map(|s| s.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Grid of candidate locations (polar, open at r = 0).
    fn candidate_grid(&self, cfg: &PdapConfig) -> Vec<Point> {
        let rmax = cfg.r_fraction * self.solver.radius;
        let mut pts = Vec::with_capacity(cfg.grid_nr * cfg.grid_ntheta);
        for ir in 0..cfg.grid_nr {
            let r = rmax * (ir as f64 + 0.5) / cfg.grid_nr as f64;
            for it in 0..cfg.grid_ntheta {
                let th = 2.0 * std::f64::consts::PI * it as f64 / cfg.grid_ntheta as f64;
                pts.push([r * th.cos(), r * th.sin()]);
            }
        }
        pts
    }

    /// Least-squares fit of complex weights for fixed locations. Returns
    /// the weights, the residual, and the kernel columns.
    fn fit_weights(&self, points: &[Point]) -> Result<(Vec<C>, Vec<C>, Vec<Vec<C>>)> {
        let ns = self.data.len();
        let k = points.len();
        let cols: Result<Vec<Vec<C>>> =
            points.par_iter().map(|&p| self.kernel_column(p)).collect();
        let cols = cols?;
        let mut a = nalgebra::DMatrix::<C>::zeros(ns, k);
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        let b = nalgebra::DVector::from_column_slice(&self.data);
        let svd = a.clone().svd(true, true);
        let w = svd
            .solve(&b, 1e-12)
            .map_err(|e| Error::LinearSolve(format!("weight fit failed: {e}")))?;
        let fit = &a * &w;
        let res: Vec<C> = self.data.iter().zip(fit.iter()).map(|(d, f)| d - f).collect();
        Ok((w.as_slice().to_vec(), res, cols))
    }

    /// Joint Gauss-Newton refinement of all atom positions; the weights are
    /// eliminated by least squares at every evaluation (variable
    /// projection). Returns the refit weights and residual.
    fn joint_refine(&self, points: &mut Vec<Point>) -> Result<(Vec<C>, Vec<C>, Vec<Vec<C>>)> {
        let (mut w, mut res, mut cols) = self.fit_weights(points)?;
        if points.is_empty() {
            return Ok((w, res, cols));
        }
        let ns = self.data.len();
        let np = 2 * points.len();
        let fd = 1e-6 * self.solver.radius;
        let mut rnorm = self.weighted_norm(&res);
        for _ in 0..15 {
            // finite-difference Jacobian of the projected residual
            let jcols: Result<Vec<Vec<C>>> = (0..np)
                .into_par_iter()
                .map(|i| {
                    let (k, c) = (i / 2, i % 2);
                    let mut pp = points.clone();
                    let mut pm = points.clone();
                    pp[k][c] += fd;
                    pm[k][c] -= fd;
                    let (_, rp, _) = self.fit_weights(&pp)?;
                    let (_, rm, _) = self.fit_weights(&pm)?;
                    Ok(rp
                        .iter()
                        .zip(&rm)
                        .map(|(a, b)| (a - b) / (2.0 * fd))
                        .collect())
                })
                .collect();
            let jcols = jcols?;
            // real least squares on stacked Re/Im parts
            let mut jr = nalgebra::DMatrix::<f64>::zeros(2 * ns, np);
            let mut br = nalgebra::DVector::<f64>::zeros(2 * ns);
            for i in 0..ns {
                br[i] = -res[i].re;
                br[ns + i] = -res[i].im;
                for j in 0..np {
                    jr[(i, j)] = jcols[j][i].re;
                    jr[(ns + i, j)] = jcols[j][i].im;
                }
            }
            let step = jr
                .svd(true, true)
                .solve(&br, 1e-10)
                .map_err(|e| Error::LinearSolve(format!("position refinement: {e}")))?;
            // damped update: halve until the residual decreases
            let mut scale = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let mut trial = points.clone();
                for (i, t) in trial.iter_mut().enumerate() {
                    t[0] += scale * step[2 * i];
                    t[1] += scale * step[2 * i + 1];
                }
                if trial
                    .iter()
                    .any(|p| (p[0] * p[0] + p[1] * p[1]).sqrt() >= 0.98 * self.solver.radius)
                {
                    scale *= 0.5;
                    continue;
                }
                let (tw, tres, tcols) = self.fit_weights(&trial)?;
                let trnorm = self.weighted_norm(&tres);
                if trnorm < rnorm {
                    *points = trial;
                    w = tw;
                    res = tres;
                    cols = tcols;
                    let improved = rnorm - trnorm;
                    rnorm = trnorm;
                    accepted = true;
                    if improved < 1e-14 {
                        return Ok((w, res, cols));
                    }
                    break;
                }
                scale *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        Ok((w, res, cols))
    }

    /// Golden-section refinement of one coordinate of `x` maximizing
    /// `|xi|`, bracket half-width `h`.
    fn refine_coord(&self, res: &[C], x: Point, coord: usize, h: f64) -> Result<Point> {
        const GR: f64 = 0.618_033_988_749_895;
        let rmax = 0.98 * self.solver.radius;
        let eval = |v: f64| -> Result<f64> {
            let mut p = x;
            p[coord] = v;
            if (p[0] * p[0] + p[1] * p[1]).sqrt() >= rmax {
                return Ok(0.0);
            }
            Ok(self.apply_fstar(res, p)?.norm())
        };
        let mut lo = x[coord] - h;
        let mut hi = x[coord] + h;
        let mut m1 = hi - GR * (hi - lo);
        let mut m2 = lo + GR * (hi - lo);
        let mut f1 = eval(m1)?;
        let mut f2 = eval(m2)?;
        for _ in 0..24 {
            if f1 < f2 {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + GR * (hi - lo);
                f2 = eval(m2)?;
            } else {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - GR * (hi - lo);
                f1 = eval(m1)?;
            }
        }
        let mut out = x;
        out[coord] = 0.5 * (lo + hi);
        Ok(out)
    }

    /// Run the greedy recovery.
    pub fn run(&self, cfg: &PdapConfig) -> Result<PdapOutcome> {
        let grid = self.candidate_grid(cfg);
        // kernel matrix over the grid, computed once
        let grid_cols: Result<Vec<Vec<C>>> =
            grid.par_iter().map(|&p| self.kernel_column(p)).collect();
        let grid_cols = grid_cols?;

        let mut points: Vec<Point> = Vec::new();
        let mut weights: Vec<C> = Vec::new();
        let mut residual: Vec<C> = self.data.clone();
        let mut history = vec![self.weighted_norm(&residual)];
        let mut stagnated = false;
        let grid_h = cfg.r_fraction * self.solver.radius / cfg.grid_nr as f64;

        let mut it = 0;
        while it < cfg.max_iterations && points.len() < cfg.max_atoms {
            it += 1;
            if history.last().copied().unwrap_or(f64::MAX) <= cfg.target_residual {
                break;
            }
            // dual certificate on the precomputed grid
            let best = grid_cols
                .par_iter()
                .enumerate()
                .map(|(gi, col)| {
                    let xi: C = col
                        .iter()
                        .zip(&residual)
                        .map(|(k, r)| k.conj() * r)
                        .sum::<C>()
                        * self.node_weight;
                    (gi, xi.norm())
                })
                .reduce(|| (0, 0.0), |a, b| if a.1 >= b.1 { a } else { b });
            let mut x = grid[best.0];
            for _ in 0..cfg.refine_sweeps {
                x = self.refine_coord(&residual, x, 0, grid_h)?;
                x = self.refine_coord(&residual, x, 1, grid_h)?;
            }
            // avoid duplicate atoms: snap to an existing one if too close
            let dup = points.iter().position(|p| {
                ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt() < 1e-4
            });
            if dup.is_none() {
                points.push(x);
            }
            let (w, res, _cols) = self.joint_refine(&mut points)?;
            weights = w;
            residual = res;
            // prune negligible atoms
            let wmax = weights.iter().map(|w| w.norm()).fold(0.0, f64::max);
            let keep: Vec<usize> = (0..points.len())
                .filter(|&i| weights[i].norm() >= cfg.prune_rel * wmax)
                .collect();
            if keep.len() < points.len() {
                points = keep.iter().map(|&i| points[i]).collect();
                let (w, res, _) = self.joint_refine(&mut points)?;
                weights = w;
                residual = res;
            }
            let rn = self.weighted_norm(&residual);
            history.push(rn);
            // stagnation: no meaningful progress over the last three steps
            if history.len() > 3 {
                let prev = history[history.len() - 4];
                if rn > prev * (1.0 - 1e-6) {
                    stagnated = true;
                    break;
                }
            }
        }
        let measure = DiscreteMeasure::new(points, weights)?;
        Ok(PdapOutcome {
            measure,
            residual_norm: *history.last().unwrap(),
            history,
            iterations: it,
            stagnated,
        })
    }

    pub fn arc_fraction(&self) -> f64 {
        self.arc_fraction
    }

    pub fn arc_center(&self) -> f64 {
        self.arc_center
    }
}

/// Keep every `factor`-th sample of a trace generated on a `factor`-times
/// finer nested boundary grid, so data and inversion nodes coincide.
pub fn subsample_trace(trace: &BoundaryTrace, factor: usize) -> BoundaryTrace {
    assert!(factor >= 1);
    let angles: Vec<f64> = trace.angles.iter().copied().step_by(factor).collect();
    let samples: Vec<C> = trace.samples.iter().copied().step_by(factor).collect();
    BoundaryTrace {
        angles,
        samples,
        node_weight: trace.node_weight * factor as f64,
        ..trace.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::Excitation;

    fn make_data(
        gen_solver: &HelmholtzSolver,
        measure: &DiscreteMeasure,
        factor: usize,
    ) -> BoundaryTrace {
        let field = gen_solver.solve(SourceSpec::Measure(measure.clone())).unwrap();
        let tr = gen_solver.extract_trace(&field, TraceKind::Neumann, 1.0, 0.0);
        subsample_trace(&tr, factor)
    }

    #[test]
    fn adjoint_consistency() {
        // <F mu, res>_Sigma == sum_k lambda_k conj(xi(S_k))
        let solver = HelmholtzSolver::new(1.0, 10.0, 128).unwrap();
        let data = {
            let m = DiscreteMeasure::new(vec![[0.3, 0.1]], vec![C::new(1.0, 0.2)]).unwrap();
            make_data(&solver, &m, 1)
        };
        let prob = PdapProblem::new(&solver, &data).unwrap();
        let mu = DiscreteMeasure::new(
            vec![[0.1, -0.2], [-0.4, 0.3]],
            vec![C::new(0.7, -0.1), C::new(-0.2, 0.5)],
        )
        .unwrap();
        let fmu = prob.apply_f(&mu).unwrap();
        // arbitrary "residual" vector
        let res: Vec<C> = data.samples.iter().map(|s| s * C::new(0.3, 0.9)).collect();
        let lhs: C = fmu
            .iter()
            .zip(&res)
            .map(|(a, r)| a * r.conj())
            .sum::<C>()
            * prob.node_weight;
        let rhs: C = mu
            .points
            .iter()
            .zip(&mu.weights)
            .map(|(&p, lam)| lam * prob.apply_fstar(&res, p).unwrap().conj())
            .sum();
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm(), "lhs={lhs} rhs={rhs}");
    }

    #[test]
    fn recovers_two_point_sources() {
        // data generated on a twice finer boundary grid (inverse-crime guard)
        let gen = HelmholtzSolver::new(1.0, 10.0, 256).unwrap();
        let inv = HelmholtzSolver::new(1.0, 10.0, 128).unwrap();
        let truth = DiscreteMeasure::new(
            vec![[0.35, 0.1], [-0.3, -0.4]],
            vec![C::new(1.0, 0.0), C::new(0.6, 0.3)],
        )
        .unwrap();
        let data = make_data(&gen, &truth, 2);
        let prob = PdapProblem::new(&inv, &data).unwrap();
        let cfg = PdapConfig { max_atoms: 6, max_iterations: 8, ..PdapConfig::default() };
        let out = prob.run(&cfg).unwrap();
        assert!(out.residual_norm < 1e-4 * data.norm(), "residual {}", out.residual_norm);
        assert_eq!(out.measure.len(), 2, "recovered {} atoms", out.measure.len());
        for (tp, tw) in truth.points.iter().zip(&truth.weights) {
            let (bi, bd) = out
                .measure
                .points
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    (i, ((p[0] - tp[0]).powi(2) + (p[1] - tp[1]).powi(2)).sqrt())
                })
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(bd < 2e-3, "position error {bd}");
            let werr = (out.measure.weights[bi] - tw).norm() / tw.norm();
            assert!(werr < 1e-2, "weight error {werr}");
        }
    }

    #[test]
    fn partial_arc_recovery_single_source() {
        let gen = HelmholtzSolver::new(1.0, 10.0, 256).unwrap();
        let inv = HelmholtzSolver::new(1.0, 10.0, 128).unwrap();
        let truth =
            DiscreteMeasure::new(vec![[0.2, 0.25]], vec![C::new(0.8, -0.4)]).unwrap();
        let field = gen.solve(SourceSpec::Measure(truth.clone())).unwrap();
        let tr = gen.extract_trace(&field, TraceKind::Neumann, 0.75, 0.0);
        let data = subsample_trace(&tr, 2);
        let prob = PdapProblem::new(&inv, &data).unwrap();
        let out = prob.run(&PdapConfig { max_atoms: 4, ..PdapConfig::default() }).unwrap();
        assert_eq!(out.measure.len(), 1);
        let p = out.measure.points[0];
        let d = ((p[0] - 0.2f64).powi(2) + (p[1] - 0.25).powi(2)).sqrt();
        assert!(d < 5e-3, "position error {d}");
    }

    #[test]
    fn zero_data_yields_empty_measure() {
        let solver = HelmholtzSolver::new(1.0, 10.0, 128).unwrap();
        let field = solver
            .solve(SourceSpec::Measure(DiscreteMeasure::default()))
            .unwrap();
        let data = solver.extract_trace(&field, TraceKind::Neumann, 1.0, 0.0);
        let prob = PdapProblem::new(&solver, &data).unwrap();
        let out = prob
            .run(&PdapConfig { target_residual: 1e-12, ..PdapConfig::default() })
            .unwrap();
        assert!(out.measure.is_empty());
        assert!(out.residual_norm < 1e-12);
    }

    #[test]
    fn certificate_peaks_near_true_source() {
        let solver = HelmholtzSolver::new(1.0, 10.0, 128).unwrap();
        let truth = DiscreteMeasure::new(vec![[0.3, 0.0]], vec![C::new(1.0, 0.0)]).unwrap();
        let data = make_data(&solver, &truth, 1);
        let prob = PdapProblem::new(&solver, &data).unwrap();
        let at_true = prob.apply_fstar(&data.samples, [0.3, 0.0]).unwrap().norm();
        for &x in &[[0.0, 0.0], [-0.3, 0.0], [0.0, 0.5], [0.55, 0.0]] {
            let v = prob.apply_fstar(&data.samples, x).unwrap().norm();
            assert!(v < at_true, "certificate not peaked: {v} vs {at_true} at {x:?}");
        }
        let _ = Excitation::default_plane_wave();
    }
}
