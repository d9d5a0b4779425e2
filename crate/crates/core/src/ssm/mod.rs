//! State-space models: parameterized warps `w(x, p)` over image coordinates.
//!
//! Every kind is a subgroup of the projective group acting on homogeneous
//! image coordinates, so composition and inversion are carried out on the
//! 3x3 matrix and converted back to the kind's parameters. The corner-based
//! kind needs the box it was initialized with; [`Ssm`] carries that box for
//! all kinds so callers never special-case it.

pub mod homog;
pub mod sl3;

mod fit;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2, Matrix3, Point2, SMatrix, Vector3};

use crate::error::{Error, Result};
use crate::image::PixelCoords;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SsmKind {
    Translation,
    Isometry,
    Similitude,
    Affine,
    Homography,
    Sl3,
    Corners,
}

impl SsmKind {
    pub const ALL: [SsmKind; 7] = [
        SsmKind::Translation,
        SsmKind::Isometry,
        SsmKind::Similitude,
        SsmKind::Affine,
        SsmKind::Homography,
        SsmKind::Sl3,
        SsmKind::Corners,
    ];

    pub fn dof(self) -> usize {
        match self {
            SsmKind::Translation => 2,
            SsmKind::Isometry => 3,
            SsmKind::Similitude => 4,
            SsmKind::Affine => 6,
            SsmKind::Homography | SsmKind::Sl3 | SsmKind::Corners => 8,
        }
    }

    /// Smallest correspondence count that determines the warp.
    pub fn minimal_points(self) -> usize {
        match self {
            SsmKind::Translation => 1,
            SsmKind::Isometry | SsmKind::Similitude => 2,
            SsmKind::Affine => 3,
            SsmKind::Homography | SsmKind::Sl3 | SsmKind::Corners => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SsmKind::Translation => "translation",
            SsmKind::Isometry => "isometry",
            SsmKind::Similitude => "similitude",
            SsmKind::Affine => "affine",
            SsmKind::Homography => "homography",
            SsmKind::Sl3 => "sl3",
            SsmKind::Corners => "corners",
        }
    }
}

impl fmt::Display for SsmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SsmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SsmKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown state-space model '{s}'")))
    }
}

/// Four box corners ordered top-left, top-right, bottom-right, bottom-left.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornersBox([Point2<f64>; 4]);

impl CornersBox {
    pub fn new(points: [Point2<f64>; 4]) -> Self {
        Self(points)
    }

    pub fn axis_aligned(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self([
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ])
    }

    /// From `x1 y1 x2 y2 x3 y3 x4 y4`.
    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() != 8 {
            return Err(Error::invalid(format!(
                "a box needs 8 numbers, got {}",
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite corner coordinate"));
        }
        Ok(Self([
            Point2::new(v[0], v[1]),
            Point2::new(v[2], v[3]),
            Point2::new(v[4], v[5]),
            Point2::new(v[6], v[7]),
        ]))
    }

    pub fn to_flat(&self) -> [f64; 8] {
        let p = &self.0;
        [
            p[0].x, p[0].y, p[1].x, p[1].y, p[2].x, p[2].y, p[3].x, p[3].y,
        ]
    }

    pub fn points(&self) -> &[Point2<f64>; 4] {
        &self.0
    }

    pub fn to_coords(&self) -> PixelCoords {
        PixelCoords::new(self.0.to_vec()).expect("four points")
    }

    pub fn centroid(&self) -> Point2<f64> {
        let s = self
            .0
            .iter()
            .fold(nalgebra::Vector2::zeros(), |acc, p| acc + p.coords);
        Point2::from(s / 4.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|p| p.x.is_finite() && p.y.is_finite())
    }

    /// Requires a convex quadrilateral with non-zero area, in either orientation.
    pub fn check_non_degenerate(&self) -> Result<()> {
        if !self.is_finite() {
            return Err(Error::geometry("box has non-finite corners"));
        }
        let p = &self.0;
        let scale = (0..4)
            .map(|i| (p[(i + 1) % 4] - p[i]).norm())
            .fold(0.0, f64::max);
        if scale <= 1e-12 {
            return Err(Error::geometry("box collapsed to a point"));
        }
        let mut sign = 0.0;
        for i in 0..4 {
            let a = p[(i + 1) % 4] - p[i];
            let b = p[(i + 2) % 4] - p[(i + 1) % 4];
            let cross = a.x * b.y - a.y * b.x;
            if cross.abs() <= 1e-9 * scale * scale {
                return Err(Error::geometry("box has collinear corners"));
            }
            if sign == 0.0 {
                sign = cross.signum();
            } else if cross.signum() != sign {
                return Err(Error::geometry("box is not convex or self-intersects"));
            }
        }
        Ok(())
    }
}

/// Warp parameters tagged with the kind that interprets them.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpParams {
    kind: SsmKind,
    values: Vec<f64>,
}

impl WarpParams {
    pub fn new(kind: SsmKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.dof() {
            return Err(Error::invalid(format!(
                "{kind} takes {} parameters, got {}",
                kind.dof(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite warp parameter"));
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> SsmKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Additive update `p + dp`.
    pub fn offset(&self, dp: &[f64]) -> Result<Self> {
        if dp.len() != self.values.len() {
            return Err(Error::invalid("additive update has the wrong length"));
        }
        Self::new(
            self.kind,
            self.values.iter().zip(dp).map(|(a, b)| a + b).collect(),
        )
    }
}

/// `2N x S` stack of per-point `dw/dp` blocks; rows `2k` and `2k + 1` hold
/// the x and y derivatives for point `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct WarpJacobian(DMatrix<f64>);

impl WarpJacobian {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn points(&self) -> usize {
        self.0.nrows() / 2
    }

    pub fn params(&self) -> usize {
        self.0.ncols()
    }

    #[inline]
    pub fn dx(&self, k: usize, i: usize) -> f64 {
        self.0[(2 * k, i)]
    }

    #[inline]
    pub fn dy(&self, k: usize, i: usize) -> f64 {
        self.0[(2 * k + 1, i)]
    }
}

/// A state-space model bound to the box it tracks.
#[derive(Clone, Debug, PartialEq)]
pub struct Ssm {
    kind: SsmKind,
    base: CornersBox,
}

impl Ssm {
    pub fn new(kind: SsmKind, base: CornersBox) -> Self {
        Self { kind, base }
    }

    /// Model over the unit square; fine for every kind but `corners`, whose
    /// parameters are the warped base box.
    pub fn unit(kind: SsmKind) -> Self {
        Self::new(kind, CornersBox::axis_aligned(0.0, 0.0, 1.0, 1.0))
    }

    pub fn kind(&self) -> SsmKind {
        self.kind
    }

    pub fn base(&self) -> &CornersBox {
        &self.base
    }

    pub fn dof(&self) -> usize {
        self.kind.dof()
    }

    pub fn identity(&self) -> WarpParams {
        let values = match self.kind {
            SsmKind::Homography => vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            SsmKind::Corners => self.base.to_flat().to_vec(),
            k => vec![0.0; k.dof()],
        };
        WarpParams {
            kind: self.kind,
            values,
        }
    }

    fn check(&self, p: &WarpParams) -> Result<()> {
        if p.kind != self.kind {
            return Err(Error::invalid(format!(
                "parameters of kind {} given to a {} model",
                p.kind, self.kind
            )));
        }
        Ok(())
    }

    /// Homogeneous 3x3 transform of `p`.
    pub fn matrix(&self, p: &WarpParams) -> Result<Matrix3<f64>> {
        self.check(p)?;
        let v = &p.values;
        let m = match self.kind {
            SsmKind::Translation => Matrix3::new(1.0, 0.0, v[0], 0.0, 1.0, v[1], 0.0, 0.0, 1.0),
            SsmKind::Isometry => {
                let (s, c) = v[2].sin_cos();
                Matrix3::new(c, -s, v[0], s, c, v[1], 0.0, 0.0, 1.0)
            }
            SsmKind::Similitude => {
                let k = v[2].exp();
                let (s, c) = v[3].sin_cos();
                Matrix3::new(k * c, -k * s, v[0], k * s, k * c, v[1], 0.0, 0.0, 1.0)
            }
            SsmKind::Affine => Matrix3::new(
                1.0 + v[2],
                v[3],
                v[0],
                v[4],
                1.0 + v[5],
                v[1],
                0.0,
                0.0,
                1.0,
            ),
            SsmKind::Homography => {
                Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], 1.0)
            }
            SsmKind::Sl3 => sl3::exp(v),
            SsmKind::Corners => {
                let target = CornersBox::from_flat(v)?;
                let to_target = homog::unit_square_to_quad(target.points())?;
                let to_base = homog::unit_square_to_quad(self.base.points())?;
                let inv = to_base
                    .try_inverse()
                    .ok_or_else(|| Error::geometry("degenerate base box"))?;
                normalize_h33(&(to_target * inv))?
            }
        };
        let scale = m.abs().max().max(1e-300);
        if m.determinant().abs() <= 1e-14 * scale.powi(3) {
            return Err(Error::geometry(format!("{} warp is singular", self.kind)));
        }
        Ok(m)
    }

    /// Parameters of the member of this kind with transform `m` (up to scale).
    /// Entries outside the kind's group are ignored.
    pub fn params_from_matrix(&self, m: &Matrix3<f64>) -> Result<WarpParams> {
        let values = match self.kind {
            SsmKind::Sl3 => sl3::from_homography(m)?.to_vec(),
            SsmKind::Corners => {
                let mut out = Vec::with_capacity(8);
                for c in self.base.points() {
                    let q = homog::apply(m, *c)?;
                    out.push(q.x);
                    out.push(q.y);
                }
                out
            }
            kind => {
                let m = normalize_h33(m)?;
                match kind {
                    SsmKind::Translation => vec![m[(0, 2)], m[(1, 2)]],
                    SsmKind::Isometry => {
                        vec![m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)])]
                    }
                    SsmKind::Similitude => {
                        let scale = m[(0, 0)].hypot(m[(1, 0)]);
                        if scale <= 0.0 {
                            return Err(Error::geometry("similitude with zero scale"));
                        }
                        vec![m[(0, 2)], m[(1, 2)], scale.ln(), m[(1, 0)].atan2(m[(0, 0)])]
                    }
                    SsmKind::Affine => vec![
                        m[(0, 2)],
                        m[(1, 2)],
                        m[(0, 0)] - 1.0,
                        m[(0, 1)],
                        m[(1, 0)],
                        m[(1, 1)] - 1.0,
                    ],
                    SsmKind::Homography => vec![
                        m[(0, 0)],
                        m[(0, 1)],
                        m[(0, 2)],
                        m[(1, 0)],
                        m[(1, 1)],
                        m[(1, 2)],
                        m[(2, 0)],
                        m[(2, 1)],
                    ],
                    _ => unreachable!(),
                }
            }
        };
        WarpParams::new(self.kind, values)
    }

    pub fn warp_points(&self, p: &WarpParams, x: &PixelCoords) -> Result<PixelCoords> {
        let m = self.matrix(p)?;
        let pts = x
            .points()
            .iter()
            .map(|pt| homog::apply(&m, *pt))
            .collect::<Result<Vec<_>>>()?;
        PixelCoords::new(pts)
    }

    /// Warps raw points; used on hot paths where the caller owns the buffer.
    pub(crate) fn warp_into(
        &self,
        p: &WarpParams,
        x: &[Point2<f64>],
        out: &mut Vec<Point2<f64>>,
    ) -> Result<()> {
        let m = self.matrix(p)?;
        out.clear();
        for pt in x {
            out.push(homog::apply(&m, *pt)?);
        }
        Ok(())
    }

    /// `p'` with `w(x, p') = w(w(x, dp), p)`.
    pub fn compose(&self, p: &WarpParams, dp: &WarpParams) -> Result<WarpParams> {
        let m = self.matrix(p)? * self.matrix(dp)?;
        let scale = m.abs().max();
        if !(scale.is_finite() && m.determinant().abs() > 1e-14 * scale.powi(3)) {
            return Err(Error::geometry("composed warp is singular"));
        }
        self.params_from_matrix(&m)
    }

    pub fn invert(&self, p: &WarpParams) -> Result<WarpParams> {
        if self.kind == SsmKind::Sl3 {
            self.check(p)?;
            return WarpParams::new(self.kind, p.values.iter().map(|v| -v).collect());
        }
        let m = self.matrix(p)?;
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::geometry("warp is not invertible"))?;
        self.params_from_matrix(&inv)
    }

    /// Transform and its partial derivatives `dM/dp_i`.
    pub fn matrix_derivatives(&self, p: &WarpParams) -> Result<(Matrix3<f64>, Vec<Matrix3<f64>>)> {
        let m = self.matrix(p)?;
        let v = &p.values;
        let unit = |r: usize, c: usize| {
            let mut e = Matrix3::zeros();
            e[(r, c)] = 1.0;
            e
        };
        let d = match self.kind {
            SsmKind::Translation => vec![unit(0, 2), unit(1, 2)],
            SsmKind::Isometry => {
                let (s, c) = v[2].sin_cos();
                vec![
                    unit(0, 2),
                    unit(1, 2),
                    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0),
                ]
            }
            SsmKind::Similitude => {
                let k = v[2].exp();
                let (s, c) = v[3].sin_cos();
                vec![
                    unit(0, 2),
                    unit(1, 2),
                    Matrix3::new(k * c, -k * s, 0.0, k * s, k * c, 0.0, 0.0, 0.0, 0.0),
                    Matrix3::new(-k * s, -k * c, 0.0, k * c, -k * s, 0.0, 0.0, 0.0, 0.0),
                ]
            }
            SsmKind::Affine => vec![
                unit(0, 2),
                unit(1, 2),
                unit(0, 0),
                unit(0, 1),
                unit(1, 0),
                unit(1, 1),
            ],
            SsmKind::Homography => homography_units(),
            SsmKind::Sl3 => {
                let a = sl3::algebra(v);
                (0..8)
                    .map(|i| sl3::exp_derivative(&a, &sl3::generator(i)))
                    .collect()
            }
            SsmKind::Corners => {
                // Corners are a function of the 8 normalized entries h of M;
                // invert dc/dh to get dh/dc.
                let units = homography_units();
                let mut dc_dh = SMatrix::<f64, 8, 8>::zeros();
                for (k, c) in self.base.points().iter().enumerate() {
                    let x = Vector3::new(c.x, c.y, 1.0);
                    let pj = homog::projection_jacobian(&(m * x));
                    for (i, e) in units.iter().enumerate() {
                        let d = pj * (e * x);
                        dc_dh[(2 * k, i)] = d.x;
                        dc_dh[(2 * k + 1, i)] = d.y;
                    }
                }
                let dh_dc = dc_dh
                    .try_inverse()
                    .ok_or_else(|| Error::geometry("corner parameterization is singular"))?;
                (0..8)
                    .map(|j| {
                        units
                            .iter()
                            .enumerate()
                            .fold(Matrix3::zeros(), |acc, (i, e)| acc + e * dh_dc[(i, j)])
                    })
                    .collect()
            }
        };
        Ok((m, d))
    }

    /// Analytic `dw(x_k, p)/dp` for every point.
    pub fn warp_jacobian(&self, p: &WarpParams, x: &PixelCoords) -> Result<WarpJacobian> {
        self.warp_jacobian_raw(p, x.points())
    }

    pub(crate) fn warp_jacobian_raw(
        &self,
        p: &WarpParams,
        x: &[Point2<f64>],
    ) -> Result<WarpJacobian> {
        let (m, dm) = self.matrix_derivatives(p)?;
        let s = self.dof();
        let mut out = DMatrix::zeros(2 * x.len(), s);
        for (k, pt) in x.iter().enumerate() {
            let xh = Vector3::new(pt.x, pt.y, 1.0);
            let y = m * xh;
            if y.z.abs() < 1e-12 {
                return Err(Error::geometry("point maps to the plane at infinity"));
            }
            let pj = homog::projection_jacobian(&y);
            for (i, d) in dm.iter().enumerate() {
                let col = pj * (d * xh);
                out[(2 * k, i)] = col.x;
                out[(2 * k + 1, i)] = col.y;
            }
        }
        Ok(WarpJacobian(out))
    }

    /// Spatial derivative `dw/dx` at `pt`.
    pub fn point_jacobian(m: &Matrix3<f64>, pt: Point2<f64>) -> Matrix2<f64> {
        let y = m * Vector3::new(pt.x, pt.y, 1.0);
        let pj = homog::projection_jacobian(&y);
        pj * m.fixed_view::<3, 2>(0, 0)
    }

    pub fn params_from_points(&self, src: &PixelCoords, dst: &PixelCoords) -> Result<WarpParams> {
        let m = fit::fit_matrix(self.kind, src.points(), dst.points())?;
        self.params_from_matrix(&m)
    }

    pub(crate) fn fit_raw(&self, src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<WarpParams> {
        let m = fit::fit_matrix(self.kind, src, dst)?;
        self.params_from_matrix(&m)
    }

    pub fn params_to_corners(&self, p: &WarpParams, init: &CornersBox) -> Result<CornersBox> {
        let m = self.matrix(p)?;
        let c = init.points();
        Ok(CornersBox::new([
            homog::apply(&m, c[0])?,
            homog::apply(&m, c[1])?,
            homog::apply(&m, c[2])?,
            homog::apply(&m, c[3])?,
        ]))
    }

    /// Corners of the base box under `p`.
    pub fn corners(&self, p: &WarpParams) -> Result<CornersBox> {
        if self.kind == SsmKind::Corners {
            self.check(p)?;
            return CornersBox::from_flat(&p.values);
        }
        self.params_to_corners(p, &self.base)
    }
}

fn homography_units() -> Vec<Matrix3<f64>> {
    (0..8)
        .map(|i| {
            let mut e = Matrix3::zeros();
            e[(i / 3, i % 3)] = 1.0;
            e
        })
        .collect()
}

fn normalize_h33(m: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let h33 = m[(2, 2)];
    if h33.abs() <= 1e-12 * m.abs().max() || !h33.is_finite() {
        return Err(Error::geometry(
            "homography with h33 = 0 is not representable",
        ));
    }
    Ok(m / h33)
}

pub fn warp_points(ssm: &Ssm, p: &WarpParams, x: &PixelCoords) -> Result<PixelCoords> {
    ssm.warp_points(p, x)
}

pub fn compose(ssm: &Ssm, p: &WarpParams, dp: &WarpParams) -> Result<WarpParams> {
    ssm.compose(p, dp)
}

pub fn invert(ssm: &Ssm, dp: &WarpParams) -> Result<WarpParams> {
    ssm.invert(dp)
}

pub fn warp_jacobian(ssm: &Ssm, p: &WarpParams, x: &PixelCoords) -> Result<WarpJacobian> {
    ssm.warp_jacobian(p, x)
}

pub fn params_from_points(ssm: &Ssm, src: &PixelCoords, dst: &PixelCoords) -> Result<WarpParams> {
    ssm.params_from_points(src, dst)
}

pub fn params_to_corners(ssm: &Ssm, p: &WarpParams, init: &CornersBox) -> Result<CornersBox> {
    ssm.params_to_corners(p, init)
}
