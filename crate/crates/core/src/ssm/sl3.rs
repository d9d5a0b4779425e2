//! Lie-algebra parameterization of homographies.
//!
//! A parameter vector `v` maps to `exp(sum_i v_i G_i)` where the `G_i` span the
//! traceless 3x3 matrices:
//!
//! | i | generator        | motion            |
//! |---|------------------|-------------------|
//! | 0 | e13              | x translation     |
//! | 1 | e23              | y translation     |
//! | 2 | e12              | x shear           |
//! | 3 | e21              | y shear           |
//! | 4 | e11 - e22        | anisotropic scale |
//! | 5 | e22 - e33        | isotropic-ish scale |
//! | 6 | e31              | x perspective     |
//! | 7 | e32              | y perspective     |

use nalgebra::{Matrix3, Matrix6};

use crate::error::{Error, Result};

pub fn generator(i: usize) -> Matrix3<f64> {
    let mut g = Matrix3::zeros();
    match i {
        0 => g[(0, 2)] = 1.0,
        1 => g[(1, 2)] = 1.0,
        2 => g[(0, 1)] = 1.0,
        3 => g[(1, 0)] = 1.0,
        4 => {
            g[(0, 0)] = 1.0;
            g[(1, 1)] = -1.0;
        }
        5 => {
            g[(1, 1)] = 1.0;
            g[(2, 2)] = -1.0;
        }
        6 => g[(2, 0)] = 1.0,
        7 => g[(2, 1)] = 1.0,
        _ => panic!("sl3 has 8 generators, asked for {i}"),
    }
    g
}

pub fn algebra(v: &[f64]) -> Matrix3<f64> {
    debug_assert_eq!(v.len(), 8);
    Matrix3::new(
        v[4],
        v[2],
        v[0],
        v[3],
        -v[4] + v[5],
        v[1],
        v[6],
        v[7],
        -v[5],
    )
}

/// Coordinates of a traceless matrix in the generator basis.
pub fn coordinates(a: &Matrix3<f64>) -> [f64; 8] {
    [
        a[(0, 2)],
        a[(1, 2)],
        a[(0, 1)],
        a[(1, 0)],
        a[(0, 0)],
        -a[(2, 2)],
        a[(2, 0)],
        a[(2, 1)],
    ]
}

/// Series terms below this magnitude are dropped.
const TERM_TOL: f64 = 1e-17;

macro_rules! expm_impl {
    ($name:ident, $mat:ty) => {
        /// Matrix exponential by scaling and squaring with a truncated Taylor series.
        pub fn $name(a: &$mat) -> $mat {
            let norm = a.abs().row_sum().max();
            let mut squarings = 0;
            let mut scaled = *a;
            if norm > 0.5 {
                squarings = (norm / 0.5).log2().ceil() as i32;
                scaled = a / 2f64.powi(squarings);
            }
            let mut result = <$mat>::identity();
            let mut term = <$mat>::identity();
            for k in 1..40 {
                term = term * scaled / k as f64;
                result += term;
                if term.abs().max() < TERM_TOL {
                    break;
                }
            }
            for _ in 0..squarings {
                result = result * result;
            }
            result
        }
    };
}

expm_impl!(expm3, Matrix3<f64>);
expm_impl!(expm6, Matrix6<f64>);

/// `exp(algebra(v))`.
pub fn exp(v: &[f64]) -> Matrix3<f64> {
    expm3(&algebra(v))
}

/// Fréchet derivative of the exponential at `a` in direction `e`, read off the
/// upper-right block of `exp([[a, e], [0, a]])`.
pub fn exp_derivative(a: &Matrix3<f64>, e: &Matrix3<f64>) -> Matrix3<f64> {
    let mut block = Matrix6::zeros();
    block.fixed_view_mut::<3, 3>(0, 0).copy_from(a);
    block.fixed_view_mut::<3, 3>(0, 3).copy_from(e);
    block.fixed_view_mut::<3, 3>(3, 3).copy_from(a);
    expm6(&block).fixed_view::<3, 3>(0, 3).into_owned()
}

/// Principal matrix logarithm by inverse scaling and squaring: repeated
/// Denman-Beavers square roots until close to the identity, then the
/// Mercator series.
pub fn logm(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let mut x = *m;
    let mut roots = 0;
    while (x - Matrix3::identity()).abs().row_sum().max() > 0.1 {
        x = sqrtm(&x)?;
        roots += 1;
        if roots > 60 {
            return Err(Error::geometry("matrix logarithm did not converge"));
        }
    }
    let d = x - Matrix3::identity();
    let mut result = Matrix3::zeros();
    let mut power = d;
    for k in 1..80 {
        let term = power / k as f64;
        if k % 2 == 1 {
            result += term;
        } else {
            result -= term;
        }
        if term.abs().max() < 1e-18 {
            break;
        }
        power *= d;
    }
    Ok(result * 2f64.powi(roots))
}

fn sqrtm(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let mut y = *m;
    let mut z = Matrix3::identity();
    for _ in 0..100 {
        let yi = y
            .try_inverse()
            .ok_or_else(|| Error::geometry("singular matrix in square root"))?;
        let zi = z
            .try_inverse()
            .ok_or_else(|| Error::geometry("singular matrix in square root"))?;
        let y_next = 0.5 * (y + zi);
        let z_next = 0.5 * (z + yi);
        let delta = (y_next - y).abs().max();
        y = y_next;
        z = z_next;
        if delta < 1e-15 * y.abs().max().max(1.0) {
            break;
        }
    }
    if !y.iter().all(|v| v.is_finite()) {
        return Err(Error::geometry("matrix square root diverged"));
    }
    Ok(y)
}

/// Projects a homography onto SL(3) (unit determinant) and returns its algebra coordinates.
pub fn from_homography(h: &Matrix3<f64>) -> Result<[f64; 8]> {
    let det = h.determinant();
    if det.abs() < 1e-300 || !det.is_finite() {
        return Err(Error::geometry("singular homography"));
    }
    let m = h / det.cbrt();
    let a = logm(&m)?;
    Ok(coordinates(&a))
}
