//! Projective helpers shared by the warp models and the sampling grid.

use nalgebra::{DMatrix, Matrix2x3, Matrix3, Point2, Vector3};

use crate::error::{Error, Result};

const AT_INFINITY: f64 = 1e-12;

/// Applies `h` to `pt` with homogeneous normalization.
#[inline]
pub fn apply(h: &Matrix3<f64>, pt: Point2<f64>) -> Result<Point2<f64>> {
    let v = h * Vector3::new(pt.x, pt.y, 1.0);
    if v.z.abs() < AT_INFINITY || !v.z.is_finite() {
        return Err(Error::geometry(format!(
            "point ({}, {}) maps to the plane at infinity",
            pt.x, pt.y
        )));
    }
    Ok(Point2::new(v.x / v.z, v.y / v.z))
}

/// Derivative of the dehomogenization `(X, Y, Z) -> (X/Z, Y/Z)`.
#[inline]
pub fn projection_jacobian(v: &Vector3<f64>) -> Matrix2x3<f64> {
    let iz = 1.0 / v.z;
    Matrix2x3::new(iz, 0.0, -v.x * iz * iz, 0.0, iz, -v.y * iz * iz)
}

/// Homography taking (0,0), (1,0), (1,1), (0,1) to the four corners, in order.
pub fn unit_square_to_quad(c: &[Point2<f64>; 4]) -> Result<Matrix3<f64>> {
    let (x0, y0) = (c[0].x, c[0].y);
    let (x1, y1) = (c[1].x, c[1].y);
    let (x2, y2) = (c[2].x, c[2].y);
    let (x3, y3) = (c[3].x, c[3].y);
    let dx3 = x0 - x1 + x2 - x3;
    let dy3 = y0 - y1 + y2 - y3;
    let scale = c
        .iter()
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0, f64::max);

    let m = if dx3.abs() <= 1e-14 * scale && dy3.abs() <= 1e-14 * scale {
        Matrix3::new(x1 - x0, x3 - x0, x0, y1 - y0, y3 - y0, y0, 0.0, 0.0, 1.0)
    } else {
        let dx1 = x1 - x2;
        let dx2 = x3 - x2;
        let dy1 = y1 - y2;
        let dy2 = y3 - y2;
        let den = dx1 * dy2 - dx2 * dy1;
        if den.abs() <= 1e-14 * scale * scale {
            return Err(Error::geometry("degenerate quadrilateral"));
        }
        let g = (dx3 * dy2 - dx2 * dy3) / den;
        let h = (dx1 * dy3 - dx3 * dy1) / den;
        Matrix3::new(
            x1 - x0 + g * x1,
            x3 - x0 + h * x3,
            x0,
            y1 - y0 + g * y1,
            y3 - y0 + h * y3,
            y0,
            g,
            h,
            1.0,
        )
    };
    if m.determinant().abs() <= 1e-14 * scale * scale {
        return Err(Error::geometry("degenerate quadrilateral"));
    }
    Ok(m)
}

/// Similarity that moves the centroid to the origin and makes the mean distance sqrt(2).
fn hartley_normalizer(pts: &[Point2<f64>]) -> Result<Matrix3<f64>> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = pts
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist <= 1e-12 {
        return Err(Error::Fit("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * cx,
        0.0,
        s,
        -s * cy,
        0.0,
        0.0,
        1.0,
    ))
}

/// Normalized direct linear transform. Exact for four points in general
/// position, algebraic least squares otherwise.
pub fn normalized_dlt(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Matrix3<f64>> {
    if src.len() != dst.len() {
        return Err(Error::invalid("point sets differ in length"));
    }
    if src.len() < 4 {
        return Err(Error::Fit(format!(
            "homography needs at least 4 correspondences, got {}",
            src.len()
        )));
    }
    let ts = hartley_normalizer(src)?;
    let td = hartley_normalizer(dst)?;
    let rows = (2 * src.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let s = ts * Vector3::new(s.x, s.y, 1.0);
        let d = td * Vector3::new(d.x, d.y, 1.0);
        let (x, y) = (s.x / s.z, s.y / s.z);
        let (u, v) = (d.x / d.z, d.y / d.z);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        a.row_mut(r + 1)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
    }
    let svd = a.svd(false, true);
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Fit("SVD did not converge".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].partial_cmp(&sv[j]).unwrap());
    // Rank 8 is required for a unique solution.
    if sv[order[1]] <= 1e-10 * sv[order[sv.len() - 1]] {
        return Err(Error::Fit("degenerate point configuration".into()));
    }
    let h = vt.row(order[0]);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular normalizer".into()))?;
    let m = td_inv * hn * ts;
    if m.determinant().abs() <= 1e-14 * m.norm().powi(3) {
        return Err(Error::Fit("fitted homography is singular".into()));
    }
    Ok(m)
}
