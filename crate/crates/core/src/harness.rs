//! Scenario orchestration: declarative experiment configuration, noise
//! injection, the end-to-end pipeline (data generation → PDAP →
//! equivalent discs → shape Newton), limited-aperture conditioning
//! diagnostics, and gnuplot-ready artifact emission.

use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eqdiscs::{build_starting_guesses, StartingGuess};
use crate::forward::{
    harmonic_cascade, BoundaryTrace, DomainConfig, Excitation, HelmholtzSolver, TraceKind,
};
use crate::geometry::{InclusionSet, StarCurve};
use crate::pdap::{subsample_trace, PdapConfig, PdapOutcome, PdapProblem};
use crate::shape_newton::{radial_l2_error, refine_disc_centers, symmetric_difference_area,
    NewtonReport, Schedule, ShapeProblem};
use crate::{Error, Result};

type C = Complex64;

/// One phantom star curve in a scenario file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub center: [f64; 2],
    pub a0: f64,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

impl PhantomSpec {
    pub fn to_curve(&self) -> Result<StarCurve> {
        // pad the shorter coefficient list so scenarios can omit trailing zeros
        let k = self.a.len().max(self.b.len());
        let mut a = self.a.clone();
        let mut b = self.b.clone();
        a.resize(k, 0.0);
        b.resize(k, 0.0);
        StarCurve::new(self.center, self.a0, a, b)
    }
}

fn default_direction() -> [f64; 2] {
    [1.0, 0.0]
}
fn default_one() -> f64 {
    1.0
}
fn default_omega() -> f64 {
    5.0
}
fn default_amplitude() -> f64 {
    0.05
}
fn default_harmonics() -> usize {
    2
}
fn default_fourier_order() -> usize {
    4
}
fn default_schedule() -> Schedule {
    Schedule::M2Only
}
fn default_gen_boundary() -> usize {
    256
}
fn default_gen_radial() -> usize {
    32
}
fn default_gen_angular() -> usize {
    64
}
fn default_inv_boundary() -> usize {
    128
}
fn default_inv_radial() -> usize {
    16
}
fn default_inv_angular() -> usize {
    32
}
fn default_max_atoms() -> usize {
    12
}

/// Declarative experiment description (TOML or JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub phantoms: Vec<PhantomSpec>,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_one")]
    pub c: f64,
    #[serde(default = "default_one")]
    pub eta0: f64,
    /// plane-wave excitation amplitude; sized so |p3|/|p2| stays two to
    /// three orders of magnitude below 1
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_direction")]
    pub direction: [f64; 2],
    /// highest harmonic generated (2 or 3)
    #[serde(default = "default_harmonics")]
    pub harmonics: usize,
    /// observed fraction alpha / 2 pi of the boundary
    #[serde(default = "default_one")]
    pub arc_fraction: f64,
    #[serde(default)]
    pub arc_center: f64,
    /// relative noise level delta
    #[serde(default)]
    pub noise_delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_gen_boundary")]
    pub gen_boundary: usize,
    #[serde(default = "default_gen_radial")]
    pub gen_radial: usize,
    #[serde(default = "default_gen_angular")]
    pub gen_angular: usize,
    #[serde(default = "default_inv_boundary")]
    pub inv_boundary: usize,
    #[serde(default = "default_inv_radial")]
    pub inv_radial: usize,
    #[serde(default = "default_inv_angular")]
    pub inv_angular: usize,
    #[serde(default = "default_schedule")]
    pub schedule: Schedule,
    #[serde(default = "default_fourier_order")]
    pub fourier_order: usize,
    #[serde(default = "default_max_atoms")]
    pub pdap_max_atoms: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.phantoms.is_empty() {
            return Err(Error::Domain("scenario needs at least one phantom".into()));
        }
        if !(self.arc_fraction > 0.0 && self.arc_fraction <= 1.0) {
            return Err(Error::Domain("arc fraction must lie in (0, 1]".into()));
        }
        if self.noise_delta < 0.0 {
            return Err(Error::Domain("noise level must be nonnegative".into()));
        }
        // inverse-crime guard: data generation at least twice as fine
        if self.gen_boundary < 2 * self.inv_boundary {
            return Err(Error::Domain(format!(
                "inverse-crime guard: gen_boundary {} < 2 * inv_boundary {}",
                self.gen_boundary, self.inv_boundary
            )));
        }
        if self.gen_boundary % self.inv_boundary != 0 {
            return Err(Error::Domain(
                "gen_boundary must be a multiple of inv_boundary".into(),
            ));
        }
        if !(2..=3).contains(&self.harmonics) {
            return Err(Error::Domain("harmonics must be 2 or 3".into()));
        }
        if self.harmonics < 3 && self.schedule != Schedule::M2Only {
            return Err(Error::Domain(
                "sequential/simultaneous schedules need harmonics = 3".into(),
            ));
        }
        for p in &self.phantoms {
            p.to_curve()?;
        }
        Ok(())
    }

    /// Load from TOML (default) or JSON (by `.json` extension).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let s: Scenario = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Serde(e.to_string()))?
        };
        s.validate()?;
        Ok(s)
    }

    pub fn gen_config(&self) -> DomainConfig {
        DomainConfig {
            omega_radius: 1.0,
            n_boundary: self.gen_boundary,
            omega: self.omega,
            c: self.c,
            eta0: self.eta0,
        }
    }

    pub fn inv_config(&self) -> DomainConfig {
        DomainConfig { n_boundary: self.inv_boundary, ..self.gen_config() }
    }

    pub fn excitation(&self) -> Excitation {
        Excitation::PlaneWave { direction: self.direction, amplitude: self.amplitude }
    }
}

/// Additive complex Gaussian noise at an exact relative level:
/// `trace + delta * ||trace|| * (normalized Gaussian vector)`.
pub fn add_noise(trace: &BoundaryTrace, delta: f64, seed: u64) -> BoundaryTrace {
    if delta == 0.0 || trace.is_empty() {
        return trace.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Box-Muller standard normals
    let mut normal = || {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    let raw: Vec<C> = (0..trace.len()).map(|_| C::new(normal(), normal())).collect();
    let raw_norm =
        (trace.node_weight * raw.iter().map(|c| c.norm_sqr()).sum::<f64>()).sqrt();
    let scale = delta * trace.norm() / raw_norm;
    let mut out = trace.clone();
    for (s, n) in out.samples.iter_mut().zip(&raw) {
        *s += scale * n;
    }
    out
}

/// `gamma(alpha) = log((sqrt 2 + sqrt(1+cos alpha)) / (sqrt 2 - sqrt(1+cos alpha)))`
/// for data completion from an arc.
pub fn slepian_gamma(alpha: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 2.0 * std::f64::consts::PI) {
        return Err(Error::Domain("alpha must lie in (0, 2 pi)".into()));
    }
    let s = (1.0 + alpha.cos()).max(0.0).sqrt();
    let r2 = std::f64::consts::SQRT_2;
    if r2 - s < 1e-15 {
        return Err(Error::Divergence(
            "gamma(alpha) diverges as alpha -> 0".into(),
        ));
    }
    Ok(((r2 + s) / (r2 - s)).ln())
}

/// Condition-number estimate `c_N = e^{gamma(alpha) N}` for completing
/// data observed on an arc.
pub fn slepian_condition_number(n: usize, alpha: f64) -> Result<f64> {
    Ok((slepian_gamma(alpha)? * n as f64).exp())
}

/// How far through the pipeline a run should go.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopAfter {
    Data,
    Pdap,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub ok: bool,
    pub message: Option<String>,
}

/// Per-object reconstruction quality relative to its matched phantom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectMetric {
    pub object: usize,
    pub phantom: usize,
    pub start_symdiff: f64,
    pub final_symdiff: f64,
    pub radial_error: f64,
}

/// Everything a pipeline run produced (pure data; see [`emit_artifacts`]
/// for the file side).
#[derive(Default)]
pub struct ScenarioResult {
    pub stages: Vec<StageStatus>,
    /// noisy, arc-masked traces at inversion resolution, keyed by harmonic
    pub data: Vec<(usize, BoundaryTrace)>,
    /// ||p3||/||p2|| on the full boundary before noise
    pub harmonic_ratio: Option<f64>,
    pub pdap: Option<PdapOutcome>,
    pub guesses: Vec<StartingGuess>,
    pub start_curves: Vec<StarCurve>,
    pub newton: Option<NewtonReport>,
    pub metrics: Vec<ObjectMetric>,
    /// phantom indices no reconstructed object was matched to
    pub missed_phantoms: Vec<usize>,
}

impl ScenarioResult {
    pub fn ok(&self) -> bool {
        self.stages.iter().all(|s| s.ok)
    }

    fn pass(&mut self, stage: &str) {
        self.stages.push(StageStatus { stage: stage.into(), ok: true, message: None });
    }

    fn fail(&mut self, stage: &str, err: &Error) {
        self.stages.push(StageStatus {
            stage: stage.into(),
            ok: false,
            message: Some(err.to_string()),
        });
    }
}

/// Restrict an inversion-resolution trace to the scenario's arc with the
/// same half-open convention as the solver's own extraction.
fn mask_arc(trace: &BoundaryTrace, arc_fraction: f64, arc_center: f64) -> BoundaryTrace {
    let half = std::f64::consts::PI * arc_fraction;
    let mut angles = Vec::new();
    let mut samples = Vec::new();
    for (&t, &s) in trace.angles.iter().zip(&trace.samples) {
        let mut d = (t - arc_center).rem_euclid(2.0 * std::f64::consts::PI);
        if d > std::f64::consts::PI {
            d -= 2.0 * std::f64::consts::PI;
        }
        if (d >= -half - 1e-12 && d < half - 1e-12) || arc_fraction >= 1.0 {
            angles.push(t);
            samples.push(s);
        }
    }
    BoundaryTrace {
        kind: trace.kind,
        arc_fraction,
        arc_center,
        angles,
        samples,
        node_weight: trace.node_weight,
    }
}

/// Generate synthetic data for a scenario: full-aperture traces at
/// generation resolution, subsampled to inversion resolution, arc-masked,
/// then noise-injected. Returns `(traces by harmonic, ||p3||/||p2||)`.
pub fn generate_data(s: &Scenario) -> Result<(Vec<(usize, BoundaryTrace)>, Option<f64>)> {
    s.validate()?;
    let gen_cfg = s.gen_config();
    let g2 = HelmholtzSolver::new(1.0, gen_cfg.kappa_m(2), s.gen_boundary)?;
    let g3 = if s.harmonics >= 3 {
        Some(HelmholtzSolver::new(1.0, gen_cfg.kappa_m(3), s.gen_boundary)?)
    } else {
        None
    };
    let curves: Result<Vec<StarCurve>> = s.phantoms.iter().map(|p| p.to_curve()).collect();
    let set = InclusionSet::with_orders(curves?, s.gen_radial, s.gen_angular)?;
    let solvers: Vec<&HelmholtzSolver> = match &g3 {
        Some(g3) => vec![&g2, g3],
        None => vec![&g2],
    };
    let cascade = harmonic_cascade(&gen_cfg, &set, &s.excitation(), s.harmonics, &solvers)?;
    let factor = s.gen_boundary / s.inv_boundary;
    let mut out = Vec::new();
    let mut full_norms = Vec::new();
    for (i, field) in cascade.fields.iter().enumerate() {
        let m = i + 2;
        let full = solvers[i].extract_trace(field, TraceKind::Neumann, 1.0, 0.0);
        full_norms.push(full.norm());
        let sub = subsample_trace(&full, factor);
        let masked = mask_arc(&sub, s.arc_fraction, s.arc_center);
        let noisy = add_noise(&masked, s.noise_delta, s.seed.wrapping_add(m as u64));
        out.push((m, noisy));
    }
    let ratio = if full_norms.len() >= 2 && full_norms[0] > 0.0 {
        Some(full_norms[1] / full_norms[0])
    } else {
        None
    };
    Ok((out, ratio))
}

/// Run the pipeline; stage failures are recorded and later stages skipped,
/// so partial artifacts always come back.
pub fn execute_scenario(s: &Scenario, stop: StopAfter) -> ScenarioResult {
    let mut res = ScenarioResult::default();

    // stage 1: data generation
    match generate_data(s) {
        Ok((data, ratio)) => {
            res.data = data;
            res.harmonic_ratio = ratio;
            res.pass("generate");
        }
        Err(e) => {
            res.fail("generate", &e);
            return res;
        }
    }
    if stop == StopAfter::Data {
        return res;
    }

    // stage 2: PDAP on the second harmonic
    let inv_cfg = s.inv_config();
    let inv_s2 = match HelmholtzSolver::new(1.0, inv_cfg.kappa_m(2), s.inv_boundary) {
        Ok(v) => v,
        Err(e) => {
            res.fail("pdap", &e);
            return res;
        }
    };
    let tr2 = res.data.iter().find(|(m, _)| *m == 2).map(|(_, t)| t.clone());
    let Some(tr2) = tr2 else {
        res.fail("pdap", &Error::Domain("no second-harmonic data".into()));
        return res;
    };
    let pdap_cfg = PdapConfig {
        max_atoms: s.pdap_max_atoms,
        // with noisy data, fitting below the noise level only produces
        // spurious atoms
        target_residual: 1.1 * s.noise_delta * tr2.norm(),
        ..PdapConfig::default()
    };
    match PdapProblem::new(&inv_s2, &tr2).and_then(|p| p.run(&pdap_cfg)) {
        Ok(outcome) => {
            res.pdap = Some(outcome);
            res.pass("pdap");
        }
        Err(e) => {
            res.fail("pdap", &e);
            return res;
        }
    }
    if stop == StopAfter::Pdap {
        return res;
    }

    // stage 3: equivalent discs
    let measure = &res.pdap.as_ref().unwrap().measure;
    // |f| on the inclusion: (eta0 / 4) |p1|^2 with |p1| = amplitude
    let f_mag = 0.25 * s.eta0 * s.amplitude * s.amplitude;
    match build_starting_guesses(measure, inv_cfg.kappa_m(2), f_mag) {
        Ok(guesses) if !guesses.is_empty() => {
            res.start_curves = guesses
                .iter()
                .map(|g| StarCurve::circle(g.center, g.radius))
                .collect();
            res.guesses = guesses;
            res.pass("discs");
        }
        Ok(_) => {
            res.fail("discs", &Error::Domain("no starting discs produced".into()));
            return res;
        }
        Err(e) => {
            res.fail("discs", &e);
            return res;
        }
    }

    // stage 4: shape Newton
    let inv_s3 = if s.harmonics >= 3 {
        match HelmholtzSolver::new(1.0, inv_cfg.kappa_m(3), s.inv_boundary) {
            Ok(v) => Some(v),
            Err(e) => {
                res.fail("newton", &e);
                return res;
            }
        }
    } else {
        None
    };
    let mut prob = ShapeProblem {
        cfg: inv_cfg,
        excitation: s.excitation(),
        centers: res.guesses.iter().map(|g| g.center).collect(),
        fourier_order: s.fourier_order,
        radial_order: s.inv_radial,
        angular_order: s.inv_angular,
        solver2: &inv_s2,
        solver3: inv_s3.as_ref(),
        data: res.data.clone(),
    };
    // PDAP located the equivalent sources, not the geometric centers;
    // refine the disc parametrization against the data before freezing
    // the centers for the shape Newton
    let radii: Vec<f64> = res.guesses.iter().map(|g| g.radius).collect();
    match refine_disc_centers(&prob, &prob.centers.clone(), &radii, 12) {
        Ok((centers, radii)) => {
            res.start_curves = centers
                .iter()
                .zip(&radii)
                .map(|(&c, &r)| StarCurve::circle(c, r))
                .collect();
            for (g, (&c, &r)) in res.guesses.iter_mut().zip(centers.iter().zip(&radii)) {
                g.center = c;
                g.radius = r;
            }
            prob.centers = centers;
        }
        Err(e) => {
            res.fail("newton", &e);
            return res;
        }
    }
    match prob.run_newton(&res.start_curves, s.schedule) {
        Ok(report) => {
            res.newton = Some(report);
            res.pass("newton");
        }
        Err(e) => {
            res.fail("newton", &e);
            return res;
        }
    }

    // stage 5: metrics against the phantom
    let phantoms: Vec<StarCurve> =
        s.phantoms.iter().map(|p| p.to_curve().expect("validated")).collect();
    let finals = &res.newton.as_ref().unwrap().final_curves;
    let mut used = vec![false; phantoms.len()];
    for (i, cur) in finals.iter().enumerate() {
        let mut best = None;
        let mut best_d = f64::MAX;
        for (j, ph) in phantoms.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = ((cur.center[0] - ph.center[0]).powi(2)
                + (cur.center[1] - ph.center[1]).powi(2))
            .sqrt();
            if d < best_d {
                best_d = d;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            used[j] = true;
            res.metrics.push(ObjectMetric {
                object: i,
                phantom: j,
                start_symdiff: symmetric_difference_area(
                    &[res.start_curves[i].clone()],
                    &[phantoms[j].clone()],
                    400,
                ),
                final_symdiff: symmetric_difference_area(
                    &[cur.clone()],
                    &[phantoms[j].clone()],
                    400,
                ),
                radial_error: radial_l2_error(cur, &phantoms[j]),
            });
        }
    }
    res.missed_phantoms =
        used.iter().enumerate().filter(|(_, &u)| !u).map(|(j, _)| j).collect();
    res.pass("metrics");
    res
}

/// One row of the Table-1-style conditioning study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditioningRow {
    pub arc_fraction: f64,
    pub cond_j: f64,
    /// c_N with alpha read as the observed arc
    pub c_n_observed: f64,
    /// c_N with alpha read as the missing arc (equal by cosine symmetry;
    /// printed to document the ambiguity)
    pub c_n_missing: f64,
}

/// cond(J) at the Newton solution (evaluated at the phantom, the
/// noise-free solution) versus the Slepian estimate, per arc fraction.
/// `n_basis` counts radial basis functions: `n_basis = 1 + 2 K`.
pub fn conditioning_report(
    base: &Scenario,
    fractions: &[f64],
    n_basis: usize,
) -> Result<Vec<ConditioningRow>> {
    if base.phantoms.len() != 1 {
        return Err(Error::Domain("conditioning study wants a single inclusion".into()));
    }
    if n_basis % 2 == 0 {
        return Err(Error::Domain("n_basis must be odd (a0 plus K cos/sin pairs)".into()));
    }
    let inv_cfg = base.inv_config();
    let inv_s2 = HelmholtzSolver::new(1.0, inv_cfg.kappa_m(2), base.inv_boundary)?;
    let phantom = base.phantoms[0].to_curve()?;
    let mut rows = Vec::new();
    for &fr in fractions {
        let mut sc = base.clone();
        sc.arc_fraction = fr;
        sc.noise_delta = 0.0;
        sc.harmonics = 2;
        sc.schedule = Schedule::M2Only;
        let (data, _) = generate_data(&sc)?;
        let prob = ShapeProblem {
            cfg: inv_cfg.clone(),
            excitation: sc.excitation(),
            centers: vec![phantom.center],
            fourier_order: (n_basis - 1) / 2,
            radial_order: sc.inv_radial,
            angular_order: sc.inv_angular,
            solver2: &inv_s2,
            solver3: None,
            data,
        };
        // pad the phantom's coefficients to the requested order
        let k = (n_basis - 1) / 2;
        let mut a = phantom.a.clone();
        let mut b = phantom.b.clone();
        a.resize(k, 0.0);
        b.resize(k, 0.0);
        let at_phantom =
            StarCurve::new(phantom.center, phantom.a0, a, b)?;
        let jac = prob.jacobian(&prob.pack(&[at_phantom]), &[2])?;
        let sv = jac.svd(false, false).singular_values;
        let cond = sv[0] / sv[sv.len() - 1];
        let alpha_obs = 2.0 * std::f64::consts::PI * fr;
        let alpha_mis = 2.0 * std::f64::consts::PI * (1.0 - fr);
        rows.push(ConditioningRow {
            arc_fraction: fr,
            cond_j: cond,
            // both readings diverge at the endpoints of (0, 2 pi);
            // report that as an infinite bound rather than an error
            c_n_observed: slepian_condition_number(n_basis, alpha_obs)
                .unwrap_or(f64::INFINITY),
            c_n_missing: slepian_condition_number(n_basis, alpha_mis)
                .unwrap_or(f64::INFINITY),
        });
    }
    Ok(rows)
}

fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for r in rows {
        writeln!(f, "{r}")?;
    }
    Ok(())
}

fn curve_csv(path: &Path, curve: &StarCurve, n: usize) -> Result<()> {
    let rows: Vec<String> = (0..=n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            let r = curve.radius(t);
            let p = curve.point(t);
            format!("{t},{r},{},{}", p[0], p[1])
        })
        .collect();
    write_csv(path, "theta,radius,x,y", &rows)
}

/// Write the CSV/JSON/gnuplot bundle for a run.
pub fn emit_artifacts(s: &Scenario, res: &ScenarioResult, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    // scenario round-trip copy
    std::fs::write(out.join("scenario.json"), serde_json::to_string_pretty(s)?)?;

    // traces
    for (m, tr) in &res.data {
        let rows: Vec<String> = tr
            .angles
            .iter()
            .zip(&tr.samples)
            .map(|(a, v)| format!("{a},{},{}", v.re, v.im))
            .collect();
        write_csv(&out.join(format!("trace_m{m}.csv")), "theta,re,im", &rows)?;
    }

    // PDAP atoms and residual history
    if let Some(p) = &res.pdap {
        let rows: Vec<String> = p
            .measure
            .points
            .iter()
            .zip(&p.measure.weights)
            .map(|(x, w)| format!("{},{},{},{}", x[0], x[1], w.re, w.im))
            .collect();
        write_csv(&out.join("pdap_atoms.csv"), "x,y,weight_re,weight_im", &rows)?;
        let rows: Vec<String> =
            p.history.iter().enumerate().map(|(i, r)| format!("{i},{r}")).collect();
        write_csv(&out.join("pdap_residuals.csv"), "iteration,residual", &rows)?;
    }

    // starting discs and final curves, polar form per object
    for (i, g) in res.guesses.iter().enumerate() {
        curve_csv(
            &out.join(format!("disc_obj{i}.csv")),
            &StarCurve::circle(g.center, g.radius),
            256,
        )?;
    }
    if let Some(n) = &res.newton {
        for (i, c) in n.final_curves.iter().enumerate() {
            curve_csv(&out.join(format!("newton_obj{i}.csv")), c, 256)?;
        }
        let rows: Vec<String> =
            n.residual_norms.iter().enumerate().map(|(i, r)| format!("{i},{r}")).collect();
        write_csv(&out.join("newton_residuals.csv"), "iteration,residual", &rows)?;
    }
    for (j, p) in s.phantoms.iter().enumerate() {
        if let Ok(c) = p.to_curve() {
            curve_csv(&out.join(format!("phantom_obj{j}.csv")), &c, 256)?;
        }
    }

    // report
    let report = serde_json::json!({
        "name": s.name,
        "ok": res.ok(),
        "stages": res.stages,
        "harmonic_ratio": res.harmonic_ratio,
        "pdap": res.pdap.as_ref().map(|p| serde_json::json!({
            "atoms": p.measure.len(),
            "residual": p.residual_norm,
            "iterations": p.iterations,
            "stagnated": p.stagnated,
        })),
        "guesses": res.guesses,
        "newton": res.newton.as_ref().map(|n| serde_json::json!({
            "iterations": n.iterations,
            "converged": n.converged,
            "diverged": n.diverged,
            "residuals": n.residual_norms,
            "jacobian_conds": n.jacobian_conds,
        })),
        "metrics": res.metrics,
        "missed_phantoms": res.missed_phantoms,
    });
    std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;

    // gnuplot script over the polar CSVs
    let mut gp = String::from(
        "set size ratio -1\nset key outside\nset datafile separator ','\nplot \\\n",
    );
    let mut parts = Vec::new();
    for j in 0..s.phantoms.len() {
        parts.push(format!(
            "  'phantom_obj{j}.csv' using 3:4 with lines lc 'black' title 'phantom {j}'"
        ));
    }
    for i in 0..res.guesses.len() {
        parts.push(format!(
            "  'disc_obj{i}.csv' using 3:4 with lines dashtype 2 lc 'blue' title 'disc {i}'"
        ));
    }
    if res.newton.is_some() {
        for i in 0..res.newton.as_ref().unwrap().final_curves.len() {
            parts.push(format!(
                "  'newton_obj{i}.csv' using 3:4 with lines lc 'red' title 'newton {i}'"
            ));
        }
    }
    gp.push_str(&parts.join(", \\\n"));
    gp.push('\n');
    std::fs::write(out.join("plot.gp"), gp)?;
    Ok(())
}

/// Execute and emit in one call.
pub fn run_scenario(s: &Scenario, out: &Path) -> Result<ScenarioResult> {
    let res = execute_scenario(s, StopAfter::Full);
    emit_artifacts(s, &res, out)?;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn toy_scenario() -> Scenario {
        Scenario {
            name: "toy".into(),
            phantoms: vec![PhantomSpec { center: [0.3, 0.2], a0: 0.15, a: vec![], b: vec![] }],
            omega: 5.0,
            c: 1.0,
            eta0: 1.0,
            amplitude: 0.05,
            direction: [1.0, 0.0],
            harmonics: 2,
            arc_fraction: 1.0,
            arc_center: 0.0,
            noise_delta: 0.0,
            seed: 1,
            gen_boundary: 256,
            gen_radial: 24,
            gen_angular: 48,
            inv_boundary: 128,
            inv_radial: 12,
            inv_angular: 24,
            schedule: Schedule::M2Only,
            fourier_order: 2,
            pdap_max_atoms: 6,
        }
    }

    #[test]
    fn noise_injection_properties() {
        let trace = BoundaryTrace {
            kind: TraceKind::Neumann,
            arc_fraction: 1.0,
            arc_center: 0.0,
            angles: (0..64).map(|i| i as f64 * 0.1).collect(),
            samples: (0..64).map(|i| C::new((i as f64).sin(), (i as f64).cos())).collect(),
            node_weight: 0.1,
        };
        // delta = 0 -> identity
        let same = add_noise(&trace, 0.0, 3);
        assert_eq!(same.samples, trace.samples);
        // realized relative norm equals delta to 1e-12
        let noisy = add_noise(&trace, 0.05, 3);
        let rel = noisy.sub(&trace).norm() / trace.norm();
        assert_relative_eq!(rel, 0.05, max_relative = 1e-12);
        // reproducible by seed; different across seeds, same norm
        let again = add_noise(&trace, 0.05, 3);
        assert_eq!(noisy.samples, again.samples);
        let other = add_noise(&trace, 0.05, 4);
        assert_ne!(noisy.samples, other.samples);
        assert_relative_eq!(
            other.sub(&trace).norm() / trace.norm(),
            0.05,
            max_relative = 1e-12
        );
    }

    #[test]
    fn slepian_closed_form_values() {
        // alpha = pi: sqrt(1 + cos pi) = 0 -> gamma = 0 -> c_N = 1
        assert_relative_eq!(
            slepian_condition_number(9, std::f64::consts::PI).unwrap(),
            1.0,
            max_relative = 1e-12
        );
        // cos alpha = 0: gamma = log(3 + 2 sqrt 2) ~ 1.7627
        let g = slepian_gamma(std::f64::consts::FRAC_PI_2).unwrap();
        assert_relative_eq!(g, (3.0 + 2.0 * std::f64::consts::SQRT_2).ln(), max_relative = 1e-12);
        assert_relative_eq!(g, 1.762747174, max_relative = 1e-8);
        // alpha -> 0 diverges
        assert!(slepian_gamma(0.0).is_err());
        assert!(slepian_gamma(1e-12).is_err());
        // monotone growth in N
        let a = 0.6 * std::f64::consts::PI;
        assert!(
            slepian_condition_number(9, a).unwrap() > slepian_condition_number(5, a).unwrap()
        );
    }

    #[test]
    fn scenario_validation_guards() {
        let mut s = toy_scenario();
        s.gen_boundary = 128; // violates the inverse-crime guard
        assert!(s.validate().is_err());
        let mut s = toy_scenario();
        s.arc_fraction = 0.0;
        assert!(s.validate().is_err());
        let mut s = toy_scenario();
        s.schedule = Schedule::Simultaneous; // needs harmonics = 3
        assert!(s.validate().is_err());
        assert!(toy_scenario().validate().is_ok());
    }

    #[test]
    fn scenario_toml_round_trip() {
        let s = toy_scenario();
        let text = toml::to_string(&s).unwrap();
        let back: Scenario = toml::from_str(&text).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&s).unwrap());
    }

    #[test]
    fn pipeline_single_disc_end_to_end() {
        let s = toy_scenario();
        let res = execute_scenario(&s, StopAfter::Full);
        for st in &res.stages {
            assert!(st.ok, "stage {} failed: {:?}", st.stage, st.message);
        }
        assert!(res.missed_phantoms.is_empty());
        let m = &res.metrics[0];
        assert!(
            m.final_symdiff <= m.start_symdiff,
            "newton {} vs disc {}",
            m.final_symdiff,
            m.start_symdiff
        );
        assert!(m.radial_error < 5e-2, "radial error {}", m.radial_error);
    }

    #[test]
    fn artifacts_emitted_and_report_parses() {
        let s = toy_scenario();
        let dir = std::env::temp_dir().join("nlpt_harness_artifacts_test");
        let _ = std::fs::remove_dir_all(&dir);
        let res = run_scenario(&s, &dir).unwrap();
        assert!(res.ok());
        for f in [
            "scenario.json",
            "trace_m2.csv",
            "pdap_atoms.csv",
            "disc_obj0.csv",
            "newton_obj0.csv",
            "phantom_obj0.csv",
            "newton_residuals.csv",
            "report.json",
            "plot.gp",
        ] {
            assert!(dir.join(f).exists(), "missing artifact {f}");
        }
        // round-trip: the emitted scenario loads and revalidates
        let loaded = Scenario::load(&dir.join("scenario.json")).unwrap();
        assert_eq!(loaded.name, s.name);
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap())
                .unwrap();
        assert_eq!(report["ok"], serde_json::Value::Bool(true));
        let _ = std::fs::remove_dir_all(&dir);
    }
}
