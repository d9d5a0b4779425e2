//! Least-squares warp fitting from point correspondences.

use nalgebra::{Matrix2, Matrix3, Point2, Vector2};

use super::homog;
use super::SsmKind;
use crate::error::{Error, Result};

fn centroid(pts: &[Point2<f64>]) -> Vector2<f64> {
    pts.iter().fold(Vector2::zeros(), |acc, p| acc + p.coords) / pts.len() as f64
}

/// Transform of `kind` minimizing the summed squared distance between the
/// mapped `src` and `dst` (algebraic error for the projective kinds).
pub(crate) fn fit_matrix(
    kind: SsmKind,
    src: &[Point2<f64>],
    dst: &[Point2<f64>],
) -> Result<Matrix3<f64>> {
    if src.len() != dst.len() {
        return Err(Error::invalid(format!(
            "{} source points but {} destination points",
            src.len(),
            dst.len()
        )));
    }
    if src.len() < kind.minimal_points() {
        return Err(Error::Fit(format!(
            "{kind} needs at least {} correspondences, got {}",
            kind.minimal_points(),
            src.len()
        )));
    }
    let cs = centroid(src);
    let cd = centroid(dst);
    // Centered sums shared by the rigid and affine fits.
    let mut dot = 0.0;
    let mut cross = 0.0;
    let mut src_sq = 0.0;
    let mut cov_src = Matrix2::zeros();
    let mut cov_cross = Matrix2::zeros();
    for (s, d) in src.iter().zip(dst) {
        let a = s.coords - cs;
        let b = d.coords - cd;
        dot += a.dot(&b);
        cross += a.x * b.y - a.y * b.x;
        src_sq += a.norm_squared();
        cov_src += a * a.transpose();
        cov_cross += b * a.transpose();
    }
    let scale = src
        .iter()
        .map(|p| (p.coords - cs).norm())
        .fold(0.0, f64::max)
        .max(1e-300);

    let rigid = |lin: Matrix2<f64>| {
        let t = cd - lin * cs;
        Matrix3::new(
            lin[(0, 0)],
            lin[(0, 1)],
            t.x,
            lin[(1, 0)],
            lin[(1, 1)],
            t.y,
            0.0,
            0.0,
            1.0,
        )
    };

    match kind {
        SsmKind::Translation => Ok(rigid(Matrix2::identity())),
        SsmKind::Isometry => {
            if src_sq <= 1e-18 {
                return Err(Error::Fit("source points coincide".into()));
            }
            let theta = cross.atan2(dot);
            let (s, c) = theta.sin_cos();
            Ok(rigid(Matrix2::new(c, -s, s, c)))
        }
        SsmKind::Similitude => {
            if src_sq <= 1e-18 {
                return Err(Error::Fit("source points coincide".into()));
            }
            let a = dot / src_sq;
            let b = cross / src_sq;
            if a.hypot(b) <= 1e-12 {
                return Err(Error::Fit("fitted similitude has zero scale".into()));
            }
            Ok(rigid(Matrix2::new(a, -b, b, a)))
        }
        SsmKind::Affine => {
            let det = cov_src.determinant();
            if det.abs() <= 1e-12 * scale.powi(4) {
                return Err(Error::Fit("source points are collinear".into()));
            }
            let inv = cov_src
                .try_inverse()
                .ok_or_else(|| Error::Fit("singular".into()))?;
            Ok(rigid(cov_cross * inv))
        }
        SsmKind::Homography | SsmKind::Sl3 | SsmKind::Corners => homog::normalized_dlt(src, dst),
    }
}
