//! Equivalent discs: translating sparse point-source weights into disc
//! radii and back through the mean-value identity.
//!
//! For a disc of radius `r` centered at `S` with constant density `f`, the
//! far data at wave number `kappa` match those of the point source
//! `lambda delta_S` with
//! `lambda = kappa^2 f pi r^2 * 2 J1(kappa r) / (kappa r)
//!        = 2 pi f kappa r J1(kappa r)`.
//! The map `r -> lambda` is strictly increasing for
//! `kappa r in (0, j_{1,1})` with `j_{1,1} = 3.8317...` the first positive
//! zero of J1, because `d/dz (z J1(z)) = z J0(z) > 0` until the first zero
//! of J0 (`j_{0,1} = 2.4048...`); we invert on the monotone branch
//! `kappa r in (0, j_{0,1})`.

use serde::{Deserialize, Serialize};

use crate::forward::DiscreteMeasure;
use crate::geometry::{merge_discs, Disc};
use crate::specfun::{bessel_j, J0_FIRST_ZERO};
use crate::{Error, Result};

/// Weight of the point source equivalent to a disc of radius `r` and
/// constant density `f` at wave number `kappa`.
pub fn weight_from_radius(kappa: f64, f: f64, r: f64) -> Result<f64> {
    if kappa <= 0.0 || r < 0.0 {
        return Err(Error::Domain("kappa must be positive and r nonnegative".into()));
    }
    Ok(2.0 * std::f64::consts::PI * f * kappa * r * bessel_j(1, kappa * r))
}

/// Invert [`weight_from_radius`] on the monotone branch
/// `kappa r in (0, j_{0,1})` by bisection to absolute tolerance 1e-12 in
/// `kappa r`. Weights beyond the branch maximum produce
/// [`Error::OutOfBranch`].
pub fn radius_from_weight(kappa: f64, f: f64, lambda: f64) -> Result<f64> {
    if kappa <= 0.0 || f <= 0.0 {
        return Err(Error::Domain("kappa and f must be positive".into()));
    }
    if lambda < 0.0 {
        return Err(Error::Domain("lambda must be nonnegative".into()));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    // scaled problem: find z in (0, j01) with z J1(z) = lambda / (2 pi f)
    let target = lambda / (2.0 * std::f64::consts::PI * f);
    let zmax = J0_FIRST_ZERO;
    let max_target = zmax * bessel_j(1, zmax);
    if target > max_target {
        return Err(Error::OutOfBranch {
            requested: lambda,
            max: 2.0 * std::f64::consts::PI * f * max_target,
        });
    }
    let g = |z: f64| z * bessel_j(1, z) - target;
    let mut lo = 0.0;
    let mut hi = zmax;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi) / kappa)
}

/// Maximum weight representable on the monotone branch.
pub fn max_branch_weight(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * f * J0_FIRST_ZERO * bessel_j(1, J0_FIRST_ZERO)
}

/// One starting guess produced from the sparse reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StartingGuess {
    pub center: [f64; 2],
    pub radius: f64,
    /// indices of the measure atoms merged into this disc
    pub atom_indices: Vec<usize>,
}

/// Convert a recovered measure into disc starting guesses: each atom gets
/// its equivalent disc; overlapping discs are merged into one disc at the
/// weight-weighted centroid carrying the summed weight.
/// Clusters whose net weight falls below this fraction of the strongest
/// cluster are treated as fitting artifacts and dropped.
pub const CLUSTER_PRUNE_REL: f64 = 0.1;

pub fn build_starting_guesses(
    measure: &DiscreteMeasure,
    kappa: f64,
    f: f64,
) -> Result<Vec<StartingGuess>> {
    if measure.is_empty() {
        return Ok(Vec::new());
    }
    // 1. proximity clustering. PDAP may resolve one extended source into a
    // tight multipole (nearly canceling weights); summing the complex
    // weights of a cluster recovers the net source strength. The cluster
    // radius is half the largest representable equivalent-disc radius.
    let d_cluster = 0.5 * J0_FIRST_ZERO / kappa;
    let n = measure.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = measure.points[i][0] - measure.points[j][0];
            let dy = measure.points[i][1] - measure.points[j][1];
            if (dx * dx + dy * dy).sqrt() < d_cluster {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut clusters: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = find(&mut parent, i);
        clusters.entry(r).or_default().push(i);
    }

    // 2. per cluster: net complex weight, |weight|-weighted centroid
    struct Cluster {
        center: [f64; 2],
        strength: f64,
        atoms: Vec<usize>,
    }
    let mut built: Vec<Cluster> = Vec::new();
    for atoms in clusters.into_values() {
        let net: crate::forward::C = atoms.iter().map(|&i| measure.weights[i]).sum();
        let total_abs: f64 = atoms.iter().map(|&i| measure.weights[i].norm()).sum();
        if total_abs <= 0.0 {
            continue;
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        for &i in &atoms {
            let w = measure.weights[i].norm();
            cx += w * measure.points[i][0];
            cy += w * measure.points[i][1];
        }
        built.push(Cluster {
            center: [cx / total_abs, cy / total_abs],
            strength: net.norm(),
            atoms,
        });
    }
    // 3. prune clusters far below the strongest (fit artifacts)
    let max_strength = built.iter().map(|c| c.strength).fold(0.0, f64::max);
    built.retain(|c| c.strength > CLUSTER_PRUNE_REL * max_strength);

    // 4. equivalent radius per cluster, clamped to the monotone branch
    let radius_of = |strength: f64| -> Result<f64> {
        match radius_from_weight(kappa, f, strength) {
            Ok(r) => Ok(r),
            Err(Error::OutOfBranch { .. }) => Ok(J0_FIRST_ZERO / kappa),
            Err(e) => Err(e),
        }
    };
    let mut discs = Vec::with_capacity(built.len());
    for c in &built {
        discs.push(Disc { center: c.center, radius: radius_of(c.strength)? });
    }

    // 5. merge overlapping discs (weight-weighted centroid, summed weight)
    let groups = merge_discs(&discs);
    let mut out = Vec::new();
    for group in groups {
        let total: f64 = group.iter().map(|&i| built[i].strength).sum();
        if total <= 0.0 {
            continue;
        }
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut atoms = Vec::new();
        for &i in &group {
            cx += built[i].strength * built[i].center[0];
            cy += built[i].strength * built[i].center[1];
            atoms.extend(built[i].atoms.iter().copied());
        }
        atoms.sort_unstable();
        let radius =
            if group.len() == 1 { discs[group[0]].radius } else { radius_of(total)? };
        if radius > 0.0 {
            out.push(StartingGuess {
                center: [cx / total, cy / total],
                radius,
                atom_indices: atoms,
            });
        }
    }
    Ok(out)
}
