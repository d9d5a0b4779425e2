#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Point2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use regtrack::eval::{alignment_error, GroundTruth};
use regtrack::image::{gaussian_smooth, GrayImage, PixelCoords};
use regtrack::pipeline::{generate_synthetic, texture, SyntheticSpec};
use regtrack::sm::{FrameFlags, FrameOutcome, Tracker};
use regtrack::ssm::{homog, CornersBox, Ssm, SsmKind, WarpParams};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Intensities in [lo, hi].
pub fn random_patch(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Intensities kept at least 0.05 away from the half-integers where the
/// conditional-variance models switch histogram bins.
pub fn binned_patch(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.random_range(10..246) as f64 + rng.random_range(-0.45..0.45))
        .collect()
}

pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let plus = f(&y);
            y[i] = x[i] - h;
            let minus = f(&y);
            y[i] = x[i];
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Jacobian of a vector function by central differences, one column per input.
pub fn central_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let rows = f(x).len();
    let mut out = DMatrix::zeros(rows, x.len());
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let plus = f(&y);
        y[i] = x[i] - h;
        let minus = f(&y);
        y[i] = x[i];
        for r in 0..rows {
            out[(r, i)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    out
}

pub fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(1e-300)
}

pub fn random_points(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> PixelCoords {
    PixelCoords::new(
        (0..n)
            .map(|_| Point2::new(rng.random_range(lo..hi), rng.random_range(lo..hi)))
            .collect(),
    )
    .unwrap()
}

pub fn max_point_gap(a: &PixelCoords, b: &PixelCoords) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}

/// Box used by the synthetic harnesses.
pub fn harness_box() -> CornersBox {
    CornersBox::axis_aligned(96.0, 96.0, 160.0, 160.0)
}

/// Moves the corners of `init` by a random direction scaled so the alignment
/// error between the two boxes is `err`.
pub fn displaced_box(rng: &mut impl Rng, init: &CornersBox, err: f64) -> CornersBox {
    let g: Vec<f64> = (0..8).map(|_| StandardNormal.sample(rng)).collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let flat: Vec<f64> = init
        .to_flat()
        .iter()
        .zip(&g)
        .map(|(c, d)| c + 2.0 * err * d / norm)
        .collect();
    CornersBox::from_flat(&flat).unwrap()
}

/// Homography parameters (over `init`) that carry `init` onto `target`.
pub fn params_between(init: &CornersBox, target: &CornersBox) -> WarpParams {
    let a = homog::unit_square_to_quad(init.points()).unwrap();
    let b = homog::unit_square_to_quad(target.points()).unwrap();
    let m: Matrix3<f64> = b * a.try_inverse().unwrap();
    Ssm::new(SsmKind::Homography, *init)
        .params_from_matrix(&m)
        .unwrap()
}

/// Renders `source` under one homography per target box, smooths every frame,
/// and checks that the generator's ground truth is the requested boxes.
pub fn render_sequence(
    source: &GrayImage,
    init: &CornersBox,
    targets: &[CornersBox],
    photometric: Vec<(f64, f64)>,
    noise_sigma: f64,
    seed: u64,
) -> (Vec<GrayImage>, GroundTruth) {
    let spec = SyntheticSpec {
        source: source.clone(),
        init: *init,
        motion: targets.iter().map(|t| params_between(init, t)).collect(),
        photometric,
        noise_sigma,
    };
    let (frames, gt) = generate_synthetic(&spec, seed).unwrap();
    for (want, got) in targets.iter().zip(gt.boxes()) {
        assert!(alignment_error(want, got) < 1e-9);
    }
    (frames.iter().map(gaussian_smooth).collect(), gt)
}

pub fn harness_texture() -> GrayImage {
    texture(256, 256, 7).unwrap()
}

/// Texture with features a third the size of [`harness_texture`]'s, made by
/// box-averaging a larger render; narrows the gradient methods' basin.
pub fn fine_texture() -> GrayImage {
    let k = 3;
    let big = texture(256 * k, 256 * k, 7).unwrap();
    GrayImage::from_fn(256, 256, |x, y| {
        let mut s = 0.0;
        for dy in 0..k {
            for dx in 0..k {
                s += big.get(x * k + dx, y * k + dy);
            }
        }
        s / (k * k) as f64
    })
    .unwrap()
}

/// Frames whose pixels all hold their own index, for driving [`Scripted`].
pub fn index_frames(n: usize) -> Vec<GrayImage> {
    (0..n)
        .map(|t| GrayImage::filled(2, 2, t as f64).unwrap())
        .collect()
}

/// Reports a fixed box per frame index, read back from [`index_frames`].
/// With `script` empty it stays on its initialization box.
pub struct Scripted {
    script: Vec<CornersBox>,
    current: Option<(WarpParams, CornersBox)>,
}

impl Scripted {
    pub fn new(script: Vec<CornersBox>) -> Self {
        Self {
            script,
            current: None,
        }
    }

    fn set(&mut self, b: CornersBox) {
        let p = WarpParams::new(SsmKind::Corners, b.to_flat().to_vec()).unwrap();
        self.current = Some((p, b));
    }
}

impl Tracker for Scripted {
    fn initialize(&mut self, _frame: &GrayImage, corners: &CornersBox) -> regtrack::Result<()> {
        self.set(*corners);
        Ok(())
    }

    fn update(&mut self, frame: &GrayImage) -> regtrack::Result<FrameOutcome> {
        let t = frame.get(0, 0) as usize;
        if !self.script.is_empty() {
            let b = self.script[t];
            self.set(b);
        }
        let (params, corners) = self.current.clone().unwrap();
        Ok(FrameOutcome {
            params,
            corners,
            iterations: 1,
            flags: FrameFlags::default(),
        })
    }

    fn set_params(&mut self, params: WarpParams) -> regtrack::Result<()> {
        let b = CornersBox::from_flat(params.values())?;
        self.set(b);
        Ok(())
    }

    fn current(&self) -> Option<(&WarpParams, &CornersBox)> {
        self.current.as_ref().map(|(p, c)| (p, c))
    }
}

/// Box translated by `(dx, dy)`.
pub fn shifted(b: &CornersBox, dx: f64, dy: f64) -> CornersBox {
    let f: Vec<f64> = b
        .to_flat()
        .iter()
        .enumerate()
        .map(|(i, v)| v + if i % 2 == 0 { dx } else { dy })
        .collect();
    CornersBox::from_flat(&f).unwrap()
}
