//! Eigen-decomposition of small real symmetric matrices.
//!
//! The dressed Hamiltonian is 3×3, so a cyclic Jacobi sweep is both exact to
//! rounding and fast. A closed-form (trigonometric) lowest eigenvalue is
//! provided for band scans where only the energy is needed.

use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Matrix3 = [[f64; 3]; 3];

/// Maximum tolerated `|H_ij - H_ji|`, relative to `max(1, max|H|)`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Unit eigenvector. Sign fixed so the first non-negligible component is
    /// positive.
    pub vector: [f64; 3],
}

fn max_abs(h: &Matrix3) -> f64 {
    h.iter()
        .flat_map(|row| row.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn check_symmetric(h: &Matrix3) -> Result<()> {
    let asym = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (h[i][j] - h[j][i]).abs())
        .fold(0.0_f64, f64::max);
    if !(asym <= SYMMETRY_TOLERANCE * max_abs(h).max(1.0)) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

pub fn mat_vec(h: &Matrix3, v: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (i, row) in h.iter().enumerate() {
        out[i] = row[0] * v[0] + row[1] * v[1] + row[2] * v[2];
    }
    out
}

pub fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `‖H v − λ v‖∞`
pub fn residual(h: &Matrix3, pair: &EigenPair) -> f64 {
    let hv = mat_vec(h, &pair.vector);
    (0..3)
        .map(|i| (hv[i] - pair.value * pair.vector[i]).abs())
        .fold(0.0, f64::max)
}

fn canonical_sign(v: &mut [f64; 3]) {
    if let Some(&lead) = v.iter().find(|x| x.abs() > 1e-12) {
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Compare two eigenpairs: ascending eigenvalue, and for (near-)degenerate
/// values the vector that is larger in its first differing component first.
fn order(a: &EigenPair, b: &EigenPair, scale: f64) -> Ordering {
    if (a.value - b.value).abs() > 1e-12 * scale {
        return a.value.total_cmp(&b.value);
    }
    for k in 0..3 {
        let d = a.vector[k] - b.vector[k];
        if d.abs() > 1e-12 {
            return if d > 0.0 {
                Ordering::Less
            } else {
                Ordering::Greater
            };
        }
    }
    Ordering::Equal
}

/// All three eigenpairs of a real symmetric 3×3 matrix, ascending.
pub fn eigensystem(h: &Matrix3) -> Result<[EigenPair; 3]> {
    check_symmetric(h)?;
    let mut a = *h;
    // enforce exact symmetry from here on
    for i in 0..3 {
        for j in 0..i {
            let m = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = m;
            a[j][i] = m;
        }
    }
    let mut v: Matrix3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale = max_abs(&a).max(f64::MIN_POSITIVE);

    for _ in 0..MAX_SWEEPS {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= f64::EPSILON * 1e-3 * scale {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            // signum(0.0) == 1.0, so θ = 0 rotates by π/4
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let vp = row[p];
                let vq = row[q];
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }

    let mut pairs = [0, 1, 2].map(|k| {
        let mut vector = [v[0][k], v[1][k], v[2][k]];
        let norm = dot(&vector, &vector).sqrt();
        vector.iter_mut().for_each(|x| *x /= norm);
        canonical_sign(&mut vector);
        EigenPair {
            value: a[k][k],
            vector,
        }
    });
    // three elements: insertion sort keeps the tolerant comparator well-behaved
    for i in 1..3 {
        let mut j = i;
        while j > 0 && order(&pairs[j - 1], &pairs[j], scale) == Ordering::Greater {
            pairs.swap(j - 1, j);
            j -= 1;
        }
    }
    Ok(pairs)
}

/// Smallest eigenvalue of a symmetric 3×3 matrix from the trigonometric
/// solution of the characteristic cubic. Symmetry is assumed, not checked.
pub fn lowest_eigenvalue(h: &Matrix3) -> f64 {
    let p1 = h[0][1] * h[0][1] + h[0][2] * h[0][2] + h[1][2] * h[1][2];
    let mean = (h[0][0] + h[1][1] + h[2][2]) / 3.0;
    let d0 = h[0][0] - mean;
    let d1 = h[1][1] - mean;
    let d2 = h[2][2] - mean;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    if p2 == 0.0 {
        return mean;
    }
    let p = (p2 / 6.0).sqrt();
    // det((H - mean I) / p) / 2
    let det = d0 * (d1 * d2 - h[1][2] * h[1][2]) - h[0][1] * (h[0][1] * d2 - h[1][2] * h[0][2])
        + h[0][2] * (h[0][1] * h[1][2] - d1 * h[0][2]);
    let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    mean + 2.0 * p * (phi + 2.0 * PI / 3.0).cos()
}
