//! Grayscale image container, sub-pixel sampling, smoothing and the sampling
//! grid shared by every tracker.
//!
//! Coordinates follow the usual image convention: `x` grows to the right,
//! `y` grows downwards and pixel `(i, j)` sits at the integer location
//! `(i as f64, j as f64)`. Reads outside the image are clamped to the valid
//! rectangle, so a tracker that transiently leaves the frame still sees a
//! well-defined (if flat) patch.

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::ssm::homog;
use crate::ssm::CornersBox;

/// Default standard deviation of the 5-tap smoothing kernel.
pub const DEFAULT_SMOOTHING_SIGMA: f64 = 1.0;
/// Default step of the central-difference image gradient, in pixels.
pub const DEFAULT_GRADIENT_STEP: f64 = 1.0;

/// Single-channel image with real-valued intensities stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::invalid(format!(
                "image must be at least 2x2, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} intensities for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite intensity at index {i}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Converts interleaved 8-bit RGB to luma with the 0.299/0.587/0.114 weights.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::invalid(
                "rgb buffer length does not match dimensions",
            ));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Bilinear read with clamping. The caller guarantees finite coordinates.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let xmax = (self.width - 1) as f64;
        let ymax = (self.height - 1) as f64;
        let x = x.clamp(0.0, xmax);
        let y = y.clamp(0.0, ymax);
        let x0 = (x.floor() as usize).min(self.width - 2);
        let y0 = (y.floor() as usize).min(self.height - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let row0 = y0 * self.width;
        let row1 = row0 + self.width;
        let top = self.data[row0 + x0] * (1.0 - fx) + self.data[row0 + x0 + 1] * fx;
        let bottom = self.data[row1 + x0] * (1.0 - fx) + self.data[row1 + x0 + 1] * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Sub-pixel read at `pt`, exact at integer coordinates.
    pub fn sample_bilinear(&self, pt: Point2<f64>) -> Result<f64> {
        if !pt.x.is_finite() || !pt.y.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite sample coordinate ({}, {})",
                pt.x, pt.y
            )));
        }
        Ok(self.sample(pt.x, pt.y))
    }
}

/// Ordered set of real-valued pixel locations.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelCoords(Vec<Point2<f64>>);

impl PixelCoords {
    pub fn new(points: Vec<Point2<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("coordinate set is empty"));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid("non-finite coordinate"));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[Point2<f64>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<Point2<f64>> {
        self.0
    }
}

/// Sampled intensities together with the grid they were read from.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    values: Vec<f64>,
    coords: PixelCoords,
}

impl Patch {
    pub fn new(values: Vec<f64>, coords: PixelCoords) -> Result<Self> {
        if values.len() != coords.len() {
            return Err(Error::invalid(format!(
                "patch has {} values but {} coordinates",
                values.len(),
                coords.len()
            )));
        }
        Ok(Self { values, coords })
    }

    /// Patch whose coordinates are irrelevant (appearance-model tests, stored samples).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let coords = PixelCoords::new(
            (0..values.len())
                .map(|k| Point2::new(k as f64, 0.0))
                .collect(),
        )?;
        Self::new(values, coords)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coords(&self) -> &PixelCoords {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-point spatial gradient `(dI/dx, dI/dy)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PatchGradient(Vec<Vector2<f64>>);

impl PatchGradient {
    pub fn rows(&self) -> &[Vector2<f64>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn sample_bilinear(img: &GrayImage, pt: Point2<f64>) -> Result<f64> {
    img.sample_bilinear(pt)
}

pub fn extract_patch(img: &GrayImage, coords: &PixelCoords) -> Result<Patch> {
    if coords.is_empty() {
        return Err(Error::invalid("cannot extract a patch from no coordinates"));
    }
    let values = extract_values(img, coords.points());
    Patch::new(values, coords.clone())
}

#[inline]
pub(crate) fn extract_values(img: &GrayImage, pts: &[Point2<f64>]) -> Vec<f64> {
    pts.iter().map(|p| img.sample(p.x, p.y)).collect()
}

/// Normalized 5-tap Gaussian kernel.
pub fn gaussian_kernel5(sigma: f64) -> [f64; 5] {
    let mut k = [0.0; 5];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - 2.0;
        *v = (-d * d / (2.0 * sigma * sigma)).exp();
    }
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

pub fn gaussian_smooth(img: &GrayImage) -> GrayImage {
    gaussian_smooth_with(img, DEFAULT_SMOOTHING_SIGMA)
}

/// Separable 5x5 Gaussian convolution with replicated borders.
pub fn gaussian_smooth_with(img: &GrayImage, sigma: f64) -> GrayImage {
    let k = gaussian_kernel5(sigma);
    let (w, h) = (img.width, img.height);
    let clamp_x = |x: isize| x.clamp(0, w as isize - 1) as usize;
    let clamp_y = |y: isize| y.clamp(0, h as isize - 1) as usize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * img.get(clamp_x(x as isize + i as isize - 2), y);
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp_y(y as isize + i as isize - 2) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    GrayImage {
        width: w,
        height: h,
        data: out,
    }
}

pub fn image_gradient(img: &GrayImage, coords: &PixelCoords) -> PatchGradient {
    image_gradient_with_step(img, coords, DEFAULT_GRADIENT_STEP)
}

/// Central differences of the bilinear sampler at every coordinate.
pub fn image_gradient_with_step(img: &GrayImage, coords: &PixelCoords, step: f64) -> PatchGradient {
    PatchGradient(gradients_at(img, coords.points(), step))
}

pub(crate) fn gradients_at(img: &GrayImage, pts: &[Point2<f64>], step: f64) -> Vec<Vector2<f64>> {
    let inv = 0.5 / step;
    pts.iter()
        .map(|p| {
            Vector2::new(
                (img.sample(p.x + step, p.y) - img.sample(p.x - step, p.y)) * inv,
                (img.sample(p.x, p.y + step) - img.sample(p.x, p.y - step)) * inv,
            )
        })
        .collect()
}

/// `res_x * res_y` points covering the quadrilateral, row-major, obtained by
/// pushing a uniform grid on the unit square through the unit-square-to-box
/// homography.
pub fn sampling_grid(corners: &CornersBox, res_x: usize, res_y: usize) -> Result<PixelCoords> {
    if res_x < 2 || res_y < 2 {
        return Err(Error::invalid(format!(
            "sampling resolution must be at least 2x2, got {res_x}x{res_y}"
        )));
    }
    corners.check_non_degenerate()?;
    let h = homog::unit_square_to_quad(corners.points())?;
    let mut pts = Vec::with_capacity(res_x * res_y);
    for j in 0..res_y {
        let v = j as f64 / (res_y - 1) as f64;
        for i in 0..res_x {
            let u = i as f64 / (res_x - 1) as f64;
            pts.push(homog::apply(&h, Point2::new(u, v))?);
        }
    }
    PixelCoords::new(pts)
}
