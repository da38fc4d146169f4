//! Inclusion geometry: star-shaped boundary curves, discs, interior
//! quadrature and disc merging.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point = [f64; 2];

/// Closed boundary curve of one inclusion in star-shaped radial Fourier
/// parametrization: `q(t) = center + r(t) (cos t, sin t)` with
/// `r(t) = a0 + sum_k (a_k cos kt + b_k sin kt)`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StarCurve {
    pub center: Point,
    pub a0: f64,
    #[serde(default)]
    pub a: Vec<f64>,
    #[serde(default)]
    pub b: Vec<f64>,
}

impl StarCurve {
    pub fn circle(center: Point, radius: f64) -> Self {
        Self { center, a0: radius, a: Vec::new(), b: Vec::new() }
    }

    pub fn new(center: Point, a0: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let c = Self { center, a0, a, b };
        c.validate()?;
        Ok(c)
    }

    /// Positivity of the radial function, checked on a fine grid.
    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(Error::InvalidCurve(format!(
                "coefficient lists must have equal length ({} vs {})",
                self.a.len(),
                self.b.len()
            )));
        }
        let n = 512.max(16 * (self.a.len() + 1));
        for i in 0..n {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            if self.radius(t) <= 0.0 {
                return Err(Error::InvalidCurve(format!("r(t) <= 0 at t = {t:.4}")));
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.a.len()
    }

    pub fn radius(&self, t: f64) -> f64 {
        let mut r = self.a0;
        for (k, (&ak, &bk)) in self.a.iter().zip(&self.b).enumerate() {
            let kt = (k + 1) as f64 * t;
            r += ak * kt.cos() + bk * kt.sin();
        }
        r
    }

    pub fn radius_deriv(&self, t: f64) -> f64 {
        let mut dr = 0.0;
        for (k, (&ak, &bk)) in self.a.iter().zip(&self.b).enumerate() {
            let kf = (k + 1) as f64;
            let kt = kf * t;
            dr += kf * (-ak * kt.sin() + bk * kt.cos());
        }
        dr
    }

    pub fn point(&self, t: f64) -> Point {
        let r = self.radius(t);
        [self.center[0] + r * t.cos(), self.center[1] + r * t.sin()]
    }

    /// Point, outward unit normal and arclength element at parameter `t`.
    pub fn boundary_frame(&self, t: f64) -> (Point, [f64; 2], f64) {
        let r = self.radius(t);
        let dr = self.radius_deriv(t);
        let (st, ct) = t.sin_cos();
        let p = [self.center[0] + r * ct, self.center[1] + r * st];
        // q'(t) = dr u + r u_perp, u = (ct, st), u_perp = (-st, ct)
        let tx = dr * ct - r * st;
        let ty = dr * st + r * ct;
        let speed = (tx * tx + ty * ty).sqrt();
        // counterclockwise curve: outward normal = (ty, -tx)/|q'|
        let nu = [ty / speed, -tx / speed];
        (p, nu, speed)
    }

    /// True iff `x` lies strictly inside the curve.
    pub fn contains(&self, x: Point) -> bool {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let d = (dx * dx + dy * dy).sqrt();
        if d == 0.0 {
            return true;
        }
        d < self.radius(dy.atan2(dx))
    }

    /// Area (polar formula) and centroid in global coordinates, by periodic
    /// trapezoidal quadrature.
    pub fn area_centroid(&self) -> (f64, Point) {
        let n = 1024.max(32 * (self.a.len() + 1));
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let (mut area, mut mx, mut my) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let t = h * i as f64;
            let r = self.radius(t);
            area += 0.5 * r * r;
            let r3 = r * r * r / 3.0;
            mx += r3 * t.cos();
            my += r3 * t.sin();
        }
        area *= h;
        mx *= h;
        my *= h;
        (area, [self.center[0] + mx / area, self.center[1] + my / area])
    }

    /// Maximum of `r(t)` over the period (sampled).
    pub fn max_radius(&self) -> f64 {
        let n = 1024;
        (0..n)
            .map(|i| self.radius(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .fold(f64::MIN, f64::max)
    }

    /// Distance from an interior point to the boundary (sampled minimum).
    pub fn boundary_distance(&self, x: Point, samples: usize) -> f64 {
        (0..samples)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / samples as f64;
                let p = self.point(t);
                ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)).sqrt()
            })
            .fold(f64::MAX, f64::min)
    }
}

/// A disc: the shape produced by the equivalent-source conversion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Disc {
    pub center: Point,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Domain(format!("disc radius must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn to_curve(self) -> StarCurve {
        StarCurve::circle(self.center, self.radius)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.radius * self.radius
    }
}

/// A collection of pairwise disjoint star-shaped inclusions plus the
/// quadrature orders used for volume integrals over them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InclusionSet {
    pub objects: Vec<StarCurve>,
    /// radial Gauss-Legendre order per object
    pub radial_order: usize,
    /// angular trapezoid points per object
    pub angular_order: usize,
}

impl InclusionSet {
    pub fn new(objects: Vec<StarCurve>) -> Result<Self> {
        Self::with_orders(objects, 32, 64)
    }

    pub fn with_orders(
        objects: Vec<StarCurve>,
        radial_order: usize,
        angular_order: usize,
    ) -> Result<Self> {
        for o in &objects {
            o.validate()?;
        }
        let s = Self { objects, radial_order, angular_order };
        if let Some((i, j)) = s.find_overlap() {
            return Err(Error::InvalidCurve(format!("objects {i} and {j} overlap")));
        }
        Ok(s)
    }

    pub fn empty() -> Self {
        Self { objects: Vec::new(), radial_order: 32, angular_order: 64 }
    }

    /// Numerical overlap check on boundary samples.
    pub fn find_overlap(&self) -> Option<(usize, usize)> {
        let n = 256;
        for i in 0..self.objects.len() {
            for j in 0..self.objects.len() {
                if i == j {
                    continue;
                }
                for s in 0..n {
                    let t = 2.0 * std::f64::consts::PI * s as f64 / n as f64;
                    if self.objects[j].contains(self.objects[i].point(t)) {
                        return Some((i.min(j), i.max(j)));
                    }
                }
            }
        }
        None
    }

    pub fn contains(&self, x: Point) -> bool {
        self.objects.iter().any(|o| o.contains(x))
    }
}

/// One node of an interior quadrature rule; weights are strictly positive
/// and sum to the object area.
#[derive(Debug, Clone, Copy)]
pub struct QuadNode {
    pub x: Point,
    pub w: f64,
    /// index of the owning object
    pub object: usize,
}

/// Gauss-Legendre nodes/weights on [0, 1] by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 1..=n {
        // initial guess on [-1, 1]
        let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Tensor polar rule per object: radial Gauss-Legendre times angular
/// trapezoid. Weights per object sum to the object area.
pub fn interior_quadrature(set: &InclusionSet) -> Result<Vec<QuadNode>> {
    let gl = gauss_legendre_unit(set.radial_order);
    let na = set.angular_order;
    let mut nodes = Vec::with_capacity(set.objects.len() * set.radial_order * na);
    for (oi, obj) in set.objects.iter().enumerate() {
        obj.validate()?;
        let dth = 2.0 * std::f64::consts::PI / na as f64;
        for ia in 0..na {
            let t = dth * ia as f64;
            let rt = obj.radius(t);
            let (ct, st) = (t.cos(), t.sin());
            for &(s, ws) in &gl {
                let rr = s * rt;
                nodes.push(QuadNode {
                    x: [obj.center[0] + rr * ct, obj.center[1] + rr * st],
                    w: ws * rt * rr * dth,
                    object: oi,
                });
            }
        }
    }
    Ok(nodes)
}

/// Connected components of the disc intersection graph (closed-disc reading:
/// tangent discs merge). Components are ordered by their smallest member
/// index; members are listed in increasing index order.
pub fn merge_discs(discs: &[Disc]) -> Vec<Vec<usize>> {
    let n = discs.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut i = i;
        while parent[i] != root {
            let next = parent[i];
            parent[i] = root;
            i = next;
        }
        root
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = discs[i].center[0] - discs[j].center[0];
            let dy = discs[i].center[1] - discs[j].center[1];
            let d = (dx * dx + dy * dy).sqrt();
            if d <= discs[i].radius + discs[j].radius + 1e-12 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    groups.into_values().collect()
}

/// Area-weighted centroid of a set of member discs.
pub fn disc_group_centroid(discs: &[Disc]) -> Point {
    let mut a = 0.0;
    let mut c = [0.0, 0.0];
    for d in discs {
        let ad = d.area();
        a += ad;
        c[0] += ad * d.center[0];
        c[1] += ad * d.center[1];
    }
    [c[0] / a, c[1] / a]
}
