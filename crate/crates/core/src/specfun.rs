//! Real-argument Bessel and Hankel functions and the Helmholtz mean-value
//! factor.
//!
//! Everything downstream — the fundamental solution, the layer potentials,
//! the equivalent-disc radius solve — reduces to `J0`, `J1`, `Y0`, `Y1` on
//! real arguments of moderate size. Ascending series are used below
//! `x = 12`, Hankel asymptotic expansions beyond; no external
//! special-function dependency is required at the accuracy targeted here.

use num_complex::Complex64;

use crate::{Error, Result};

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// First positive zero of J1. The mean-value factor in two dimensions
/// vanishes there, which bounds the usable equivalent-disc branch.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512_3;

/// First positive zero of J0: end of the monotone branch of z J1(z).
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_772_8;

const SERIES_CUTOFF: f64 = 12.0;

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= -q / ((k * k) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

fn j1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5 * x;
    let mut sum = term;
    for k in 1..60 {
        term *= -q / ((k * (k + 1)) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-30) {
            break;
        }
    }
    sum
}

/// Hankel asymptotic amplitude/phase series: returns (P, Q) for order `n`,
/// so that J_n = sqrt(2/(pi x)) (P cos chi - Q sin chi) with
/// chi = x - n pi/2 - pi/4, and Y_n = sqrt(2/(pi x)) (P sin chi + Q cos chi).
fn hankel_pq(n: u32, x: f64) -> (f64, f64) {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for m in 1..40u32 {
        let fm = m as f64;
        term *= (mu - (2.0 * fm - 1.0).powi(2)) / (fm * 8.0 * x);
        if term.abs() >= prev {
            break; // asymptotic series: stop at the smallest term
        }
        prev = term.abs();
        match m % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-18 {
            break;
        }
    }
    (p, q)
}

fn j0_impl(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_CUTOFF {
        j0_series(ax)
    } else {
        let (p, q) = hankel_pq(0, ax);
        let chi = ax - std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * ax)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

fn j1_impl(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_CUTOFF {
        j1_series(ax)
    } else {
        let (p, q) = hankel_pq(1, ax);
        let chi = ax - 3.0 * std::f64::consts::FRAC_PI_4;
        (2.0 / (std::f64::consts::PI * ax)).sqrt() * (p * chi.cos() - q * chi.sin())
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

/// Bessel function of the first kind, orders 0..=2.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    match n {
        0 => j0_impl(x),
        1 => j1_impl(x),
        2 => {
            let ax = x.abs();
            if ax < 1e-8 {
                // leading series term, avoids 0/0 in the recurrence
                0.125 * x * x
            } else {
                2.0 / x * j1_impl(x) - j0_impl(x)
            }
        }
        _ => panic!("bessel_j: order {n} not supported"),
    }
}

/// Bessel function of the first kind of arbitrary nonnegative integer
/// order, by Miller's normalized downward recurrence when the upward
/// recurrence would be unstable (`n >= x`).
pub fn bessel_jn(n: u32, x: f64) -> f64 {
    if n <= 2 {
        return bessel_j(n, x);
    }
    let ax = x.abs();
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    if ax == 0.0 {
        return 0.0;
    }
    if (n as f64) < 0.8 * ax {
        // stable upward recurrence J_{k+1} = 2k/x J_k - J_{k-1}
        let mut jm = j0_impl(ax);
        let mut j = j1_impl(ax);
        for k in 1..n {
            let jn = 2.0 * k as f64 / ax * j - jm;
            jm = j;
            j = jn;
        }
        return sign * j;
    }
    // downward recurrence from a safely high order, normalized by
    // J_0 + 2 sum_k J_{2k} = 1
    let start = (n + (ax as u32) + 32) & !1;
    let mut jp = 0.0_f64;
    let mut j = 1e-30_f64;
    let mut norm = 0.0;
    let mut result = 0.0;
    for k in (1..=start).rev() {
        // given j = J_k and jp = J_{k+1}, step down to J_{k-1}
        let jm = 2.0 * k as f64 / ax * j - jp;
        jp = j;
        j = jm;
        if (k - 1) % 2 == 0 {
            norm += 2.0 * j; // accumulate even orders
        }
        if k - 1 == n {
            result = j;
        }
        // rescale to avoid overflow
        if j.abs() > 1e200 {
            j *= 1e-200;
            jp *= 1e-200;
            norm *= 1e-200;
            result *= 1e-200;
        }
    }
    norm -= j; // the loop added 2*J_0; the sum wants J_0 + 2 sum J_{2k}
    sign * result / norm
}

fn harmonic(k: u32) -> f64 {
    (1..=k).map(|j| 1.0 / j as f64).sum()
}

fn y0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..60u32 {
        term *= -q / ((k * k) as f64);
        // (-1)^{k+1} H_k q^k / (k!)^2 == -term * H_k with term carrying (-1)^k
        sum -= term * harmonic(k);
        if term.abs() < 1e-18 {
            break;
        }
    }
    2.0 / std::f64::consts::PI * (((0.5 * x).ln() + EULER_GAMMA) * j0_series(x) + sum)
}

fn y1_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    // sum_{k>=0} (-1)^k (H_k + H_{k+1}) q^k / (k! (k+1)!)
    let mut term = 1.0;
    let mut sum = harmonic(0) + harmonic(1);
    for k in 1..60u32 {
        term *= -q / ((k * (k + 1)) as f64);
        sum += term * (harmonic(k) + harmonic(k + 1));
        if term.abs() < 1e-18 {
            break;
        }
    }
    2.0 / std::f64::consts::PI * ((0.5 * x).ln() + EULER_GAMMA) * j1_series(x)
        - 2.0 / (std::f64::consts::PI * x)
        - x / (2.0 * std::f64::consts::PI) * sum
}

/// Bessel function of the second kind, orders 0 and 1. Requires `x > 0`.
pub fn bessel_y(n: u32, x: f64) -> Result<f64> {
    if x <= 0.0 {
        return Err(Error::Domain(format!("bessel_y requires x > 0, got {x}")));
    }
    if x < SERIES_CUTOFF {
        match n {
            0 => Ok(y0_series(x)),
            1 => Ok(y1_series(x)),
            _ => Err(Error::Domain(format!("bessel_y: order {n} not supported"))),
        }
    } else {
        let (p, q) = hankel_pq(n, x);
        let chi = x - (n as f64) * std::f64::consts::FRAC_PI_2 - std::f64::consts::FRAC_PI_4;
        match n {
            0 | 1 => {
                Ok((2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.sin() + q * chi.cos()))
            }
            _ => Err(Error::Domain(format!("bessel_y: order {n} not supported"))),
        }
    }
}

/// Hankel function of the first kind, `H_n^1(x) = J_n(x) + i Y_n(x)`,
/// orders 0 and 1. Requires `x > 0` (logarithmic singularity at the origin).
pub fn hankel1(n: u32, x: f64) -> Result<Complex64> {
    Ok(Complex64::new(bessel_j(n, x), bessel_y(n, x)?))
}

/// Query for the Helmholtz mean-value factor: dimension and the
/// dimensionless product `z = kappa * r`.
#[derive(Debug, Clone, Copy)]
pub struct MeanValueFactorQuery {
    pub dimension: u32,
    pub z: f64,
}

impl MeanValueFactorQuery {
    pub fn new(dimension: u32, z: f64) -> Result<Self> {
        if dimension != 2 && dimension != 3 {
            return Err(Error::Domain(format!("dimension must be 2 or 3, got {dimension}")));
        }
        if !(z >= 0.0) {
            return Err(Error::Domain(format!("z must be nonnegative, got {z}")));
        }
        Ok(Self { dimension, z })
    }
}

/// Average of a Helmholtz kernel element over a ball of radius `r`, relative
/// to its center value: `Gamma(d/2+1) J_{d/2}(z) / (z/2)^{d/2}` with
/// `z = kappa * r`. Continuous limit 1 at `z = 0`.
pub fn mean_value_factor(dimension: u32, z: f64) -> Result<f64> {
    let q = MeanValueFactorQuery::new(dimension, z)?;
    Ok(mean_value_factor_query(q))
}

pub fn mean_value_factor_query(q: MeanValueFactorQuery) -> f64 {
    let z = q.z;
    match q.dimension {
        2 => {
            if z < 1e-7 {
                // 2 J1(z)/z = 1 - z^2/8 + O(z^4)
                1.0 - z * z / 8.0
            } else {
                2.0 * bessel_j(1, z) / z
            }
        }
        3 => {
            if z < 0.05 {
                let z2 = z * z;
                1.0 - z2 / 10.0 + z2 * z2 / 280.0 - z2 * z2 * z2 / 15120.0
            } else {
                // Gamma(5/2) J_{3/2}(z) / (z/2)^{3/2} = 3 (sin z - z cos z) / z^3
                3.0 * (z.sin() - z * z.cos()) / (z * z * z)
            }
        }
        _ => unreachable!("validated in MeanValueFactorQuery"),
    }
}

#[cfg(test)]
mod tests_jn {
    use super::*;

    // frozen mpmath besselj references
    const JN_REFS: &[(u32, f64, f64)] = &[
        (3, 0.5, 0.0025637299945872441),
        (5, 2.0, 0.0070396297558716855),
        (5, 10.0, -0.23406152818679364),
        (8, 10.0, 0.31785412684385723),
        (12, 3.0, 2.275725448320572e-7),
        (10, 40.0, 0.11938336278226095),
        (4, 15.0, -0.11917898110329953),
        (7, 7.0, 0.23358356950569608),
    ];

    #[test]
    fn jn_matches_frozen_references() {
        for &(n, x, want) in JN_REFS {
            let got = bessel_jn(n, x);
            assert!(
                (got - want).abs() < 1e-12 * want.abs().max(1e-10),
                "J_{n}({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn jn_consistent_with_low_orders() {
        for &x in &[0.3, 1.0, 5.0, 12.0] {
            for n in 0..=2u32 {
                assert!((bessel_jn(n, x) - bessel_j(n, x)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn jn_three_term_recurrence() {
        for &x in &[0.7, 4.0, 11.0] {
            for n in 3..10u32 {
                let lhs = bessel_jn(n - 1, x) + bessel_jn(n + 1, x);
                let rhs = 2.0 * n as f64 / x * bessel_jn(n, x);
                assert!((lhs - rhs).abs() < 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn jn_odd_parity() {
        assert!((bessel_jn(3, -2.0) + bessel_jn(3, 2.0)).abs() < 1e-16);
        assert!((bessel_jn(4, -2.0) - bessel_jn(4, 2.0)).abs() < 1e-16);
    }
}
