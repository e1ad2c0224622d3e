//! Rigid motions in d = 2, 3: the pose type, group operations, and small
//! rotation utilities shared across the crate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::Error;
use crate::Result;

/// Frobenius tolerance for accepting a matrix as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// A rigid motion `(t, R)` with `R ∈ SO(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    pub t: DVector<f64>,
    pub r: DMatrix<f64>,
}

impl Pose {
    pub fn new(t: DVector<f64>, r: DMatrix<f64>) -> Result<Self> {
        check_special_orthogonal(&r, ROTATION_TOL)?;
        if t.len() != r.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "translation has length {} but rotation is {}x{}",
                t.len(),
                r.nrows(),
                r.ncols()
            )));
        }
        Ok(Pose { t, r })
    }

    pub fn identity(d: usize) -> Self {
        Pose {
            t: DVector::zeros(d),
            r: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.t.len()
    }
}

/// Group composition `(t1, R1)·(t2, R2) = (t1 + R1 t2, R1 R2)`.
pub fn pose_compose(a: &Pose, b: &Pose) -> Pose {
    Pose {
        t: &a.t + &a.r * &b.t,
        r: &a.r * &b.r,
    }
}

/// Group inverse `(t, R)⁻¹ = (−Rᵀ t, Rᵀ)`.
pub fn pose_inverse(a: &Pose) -> Pose {
    let rt = a.r.transpose();
    Pose {
        t: -(&rt * &a.t),
        r: rt,
    }
}

/// Relative transform `a⁻¹·b`.
pub fn pose_between(a: &Pose, b: &Pose) -> Pose {
    pose_compose(&pose_inverse(a), b)
}

pub fn check_special_orthogonal(r: &DMatrix<f64>, tol: f64) -> Result<()> {
    if r.nrows() != r.ncols() {
        return Err(Error::InvalidMeasurement(format!(
            "rotation must be square, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let d = r.nrows();
    let gram_err = (r.transpose() * r - DMatrix::identity(d, d)).norm();
    if gram_err > tol {
        return Err(Error::InvalidMeasurement(format!(
            "matrix is not orthogonal (RᵀR − I has norm {gram_err:.3e})"
        )));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::InvalidMeasurement(format!(
            "matrix has determinant {det:.12} rather than +1"
        )));
    }
    Ok(())
}

/// Counter-clockwise planar rotation by `theta`.
pub fn rot2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rotation angle of a 2x2 rotation matrix, in (−π, π].
pub fn rot2_angle(r: &DMatrix<f64>) -> f64 {
    r[(1, 0)].atan2(r[(0, 0)])
}

/// Rodrigues formula: rotation by `theta` about the unit axis `axis`.
pub fn rot3_axis_angle(axis: &[f64; 3], theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    let [x, y, z] = *axis;
    let k = DMatrix::from_row_slice(3, 3, &[0.0, -z, y, z, 0.0, -x, -y, x, 0.0]);
    DMatrix::identity(3, 3) + s * &k + (1.0 - c) * (&k * &k)
}

/// Geodesic rotation angle of `r ∈ SO(d)`, d = 2, 3.
pub fn rotation_angle(r: &DMatrix<f64>) -> f64 {
    match r.nrows() {
        2 => rot2_angle(r).abs(),
        3 => {
            let c = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
            c.acos()
        }
        d => panic!("rotation_angle: unsupported dimension {d}"),
    }
}

/// Unit quaternion `(qx, qy, qz, qw)` (Hamilton) to a rotation matrix.
///
/// The quaternion is renormalized if its norm is within `1e-6` of one and
/// rejected otherwise.
pub fn quaternion_to_rotation(qx: f64, qy: f64, qz: f64, qw: f64) -> Result<DMatrix<f64>> {
    let norm = (qx * qx + qy * qy + qz * qz + qw * qw).sqrt();
    if (norm - 1.0).abs() >= 1e-6 {
        return Err(Error::InvalidMeasurement(format!(
            "quaternion norm {norm:.9} deviates from 1 by more than 1e-6"
        )));
    }
    let (x, y, z, w) = (qx / norm, qy / norm, qz / norm, qw / norm);
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ))
}

/// Rotation matrix to a unit quaternion `(qx, qy, qz, qw)` with `qw ≥ 0`.
pub fn rotation_to_quaternion(r: &DMatrix<f64>) -> [f64; 4] {
    assert_eq!(r.nrows(), 3, "quaternions are for 3x3 rotations");
    let trace = r.trace();
    let (mut x, mut y, mut z, mut w);
    if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        w = 0.25 * s;
        x = (r[(2, 1)] - r[(1, 2)]) / s;
        y = (r[(0, 2)] - r[(2, 0)]) / s;
        z = (r[(1, 0)] - r[(0, 1)]) / s;
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(2, 1)] - r[(1, 2)]) / s;
        x = 0.25 * s;
        y = (r[(0, 1)] + r[(1, 0)]) / s;
        z = (r[(0, 2)] + r[(2, 0)]) / s;
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        w = (r[(0, 2)] - r[(2, 0)]) / s;
        x = (r[(0, 1)] + r[(1, 0)]) / s;
        y = 0.25 * s;
        z = (r[(1, 2)] + r[(2, 1)]) / s;
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        w = (r[(1, 0)] - r[(0, 1)]) / s;
        x = (r[(0, 2)] + r[(2, 0)]) / s;
        y = (r[(1, 2)] + r[(2, 1)]) / s;
        z = 0.25 * s;
    }
    if w < 0.0 {
        x = -x;
        y = -y;
        z = -z;
        w = -w;
    }
    let n = (x * x + y * y + z * z + w * w).sqrt();
    [x / n, y / n, z / n, w / n]
}

/// Draws a rotation from the Haar (uniform) distribution on SO(d).
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let gauss = DMatrix::from_fn(d, d, |_, _| {
        rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng)
    });
    let mut q = orthonormalize_columns(&gauss);
    // Haar on O(d); fold into SO(d) by flipping one column if needed.
    if q.determinant() < 0.0 {
        let mut last = q.column_mut(d - 1);
        last *= -1.0;
    }
    q
}

/// Thin QR orthonormalization of the columns (modified Gram-Schmidt, run
/// twice, with the sign convention that the implicit R factor has a positive
/// diagonal).
pub fn orthonormalize_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = m.clone();
    for _pass in 0..2 {
        for j in 0..q.ncols() {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                let mut qj = q.column_mut(j);
                qj.axpy(-proj, &qi, 1.0);
            }
            let norm = q.column(j).norm();
            assert!(norm > 1e-14, "rank-deficient input to orthonormalization");
            q.column_mut(j).scale_mut(1.0 / norm);
        }
    }
    // Fix signs against the original matrix so qf(·) is deterministic.
    for j in 0..q.ncols() {
        let r_jj = q.column(j).dot(&m.column(j));
        if r_jj < 0.0 {
            q.column_mut(j).scale_mut(-1.0);
        }
    }
    q
}
