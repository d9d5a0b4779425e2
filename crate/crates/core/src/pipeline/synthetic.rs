//! Synthetic sequences with exact ground truth.
//!
//! Frame `t` shows the source image moved by the warp `H_t`:
//! `frame_t(y) = g_t * source(H_t^-1 y) + b_t + noise`, clipped to `[0, 255]`,
//! and its ground truth is `H_t` applied to the initial box.

use std::path::Path;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::key_values;
use super::io::load_frame;
use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::image::GrayImage;
use crate::sm::WarpSampler;
use crate::ssm::{homog, CornersBox, Ssm, SsmKind, WarpParams};

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub source: GrayImage,
    /// Object box in the source image; frame `t` shows it at `H_t(init)`.
    pub init: CornersBox,
    /// One warp per frame, interpreted relative to `init`.
    pub motion: Vec<WarpParams>,
    /// Per-frame `(gain, bias)`; empty for none.
    pub photometric: Vec<(f64, f64)>,
    pub noise_sigma: f64,
}

/// Smooth value noise summed over octaves, scaled to `[20, 235]`.
pub fn texture(width: usize, height: usize, seed: u64) -> Result<GrayImage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let octaves = [
        (48.0, 1.0),
        (24.0, 0.7),
        (12.0, 0.5),
        (6.0, 0.35),
        (3.0, 0.2),
    ];
    let mut acc = vec![0.0; width * height];
    for (cell, amp) in octaves {
        let gw = (width as f64 / cell).ceil() as usize + 2;
        let gh = (height as f64 / cell).ceil() as usize + 2;
        let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.random_range(-1.0..1.0)).collect();
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        for y in 0..height {
            let fy = y as f64 / cell;
            let (j, ty) = (fy.floor() as usize, smooth(fy.fract()));
            for x in 0..width {
                let fx = x as f64 / cell;
                let (i, tx) = (fx.floor() as usize, smooth(fx.fract()));
                let v00 = lattice[j * gw + i];
                let v10 = lattice[j * gw + i + 1];
                let v01 = lattice[(j + 1) * gw + i];
                let v11 = lattice[(j + 1) * gw + i + 1];
                let top = v00 + (v10 - v00) * tx;
                let bottom = v01 + (v11 - v01) * tx;
                acc[y * width + x] += amp * (top + (bottom - top) * ty);
            }
        }
    }
    let lo = acc.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = acc.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    GrayImage::new(
        width,
        height,
        acc.into_iter()
            .map(|v| 20.0 + 215.0 * (v - lo) / span)
            .collect(),
    )
}

pub fn generate_synthetic(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(Vec<GrayImage>, GroundTruth)> {
    if spec.motion.is_empty() {
        return Err(Error::invalid("synthetic motion has no frames"));
    }
    if !spec.photometric.is_empty() && spec.photometric.len() != spec.motion.len() {
        return Err(Error::invalid(
            "photometric script length differs from the motion",
        ));
    }
    if !(spec.noise_sigma >= 0.0 && spec.noise_sigma.is_finite()) {
        return Err(Error::invalid("noise sigma must be non-negative"));
    }
    spec.init.check_non_degenerate()?;
    let kind = spec.motion[0].kind();
    let ssm = Ssm::new(kind, spec.init);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (spec.source.width(), spec.source.height());
    let mut frames = Vec::with_capacity(spec.motion.len());
    let mut boxes = Vec::with_capacity(spec.motion.len());
    for (t, p) in spec.motion.iter().enumerate() {
        if p.kind() != kind {
            return Err(Error::invalid("synthetic motion mixes warp kinds"));
        }
        let m = ssm.matrix(p)?;
        let gt = ssm.corners(p)?;
        gt.check_non_degenerate()
            .map_err(|e| Error::geometry(format!("frame {t}: {e}")))?;
        let inv: Matrix3<f64> = m
            .try_inverse()
            .ok_or_else(|| Error::geometry(format!("frame {t}: warp is singular")))?;
        let (gain, bias) = spec.photometric.get(t).copied().unwrap_or((1.0, 0.0));
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let q = homog::apply(&inv, nalgebra::Point2::new(x as f64, y as f64))
                    .map_err(|e| Error::geometry(format!("frame {t}: {e}")))?;
                let mut v = gain * spec.source.sample(q.x, q.y) + bias;
                if spec.noise_sigma > 0.0 {
                    v += noise.sample(&mut rng);
                }
                data.push(v.clamp(0.0, 255.0));
            }
        }
        frames.push(GrayImage::new(w, h, data)?);
        boxes.push(gt);
    }
    Ok((frames, GroundTruth::new(boxes)?))
}

/// How the warp evolves over a scripted sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionModel {
    Static,
    /// Independent draws around the identity every frame.
    Jitter,
    /// Each frame adds a fresh draw to the previous warp.
    Walk,
}

/// Line-oriented description of a synthetic sequence (see the README).
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScript {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub texture_seed: u64,
    pub source: Option<std::path::PathBuf>,
    pub init: CornersBox,
    pub ssm: SsmKind,
    pub motion: MotionModel,
    pub amplitude_px: f64,
    pub gain: Option<(f64, f64)>,
    pub bias: Option<(f64, f64)>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SyntheticScript {
    fn default() -> Self {
        Self {
            width: 256,
            height: 256,
            frames: 20,
            texture_seed: 1,
            source: None,
            init: CornersBox::axis_aligned(96.0, 96.0, 160.0, 160.0),
            ssm: SsmKind::Homography,
            motion: MotionModel::Jitter,
            amplitude_px: 2.0,
            gain: None,
            bias: None,
            noise_sigma: 0.0,
            seed: 1,
        }
    }
}

fn numbers(key: &str, value: &str, n: &[usize]) -> Result<Vec<f64>> {
    let v = value
        .split_whitespace()
        .map(|t| t.parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Config(format!("{key}: expected numbers, got '{value}'")))?;
    if !n.contains(&v.len()) {
        return Err(Error::Config(format!(
            "{key}: expected {n:?} numbers, got {}",
            v.len()
        )));
    }
    Ok(v)
}

fn parsed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

impl SyntheticScript {
    /// Parses `key = value` lines. A relative `source` path is resolved
    /// against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut s = Self::default();
        for (line, key, value) in key_values(text)? {
            match key.as_str() {
                "synthetic" => {}
                "width" => s.width = parsed(&key, &value)?,
                "height" => s.height = parsed(&key, &value)?,
                "frames" => s.frames = parsed(&key, &value)?,
                "texture-seed" => s.texture_seed = parsed(&key, &value)?,
                "source" => s.source = Some(base_dir.join(value)),
                "box" => {
                    let v = numbers(&key, &value, &[4, 8])?;
                    s.init = if v.len() == 4 {
                        CornersBox::axis_aligned(v[0], v[1], v[2], v[3])
                    } else {
                        CornersBox::from_flat(&v)?
                    };
                }
                "ssm" => s.ssm = parsed(&key, &value)?,
                "motion" => {
                    s.motion = match value.as_str() {
                        "static" => MotionModel::Static,
                        "jitter" => MotionModel::Jitter,
                        "walk" => MotionModel::Walk,
                        _ => return Err(Error::Config(format!("motion: unknown model '{value}'"))),
                    }
                }
                "amplitude" => s.amplitude_px = parsed(&key, &value)?,
                "gain" => {
                    let v = numbers(&key, &value, &[2])?;
                    s.gain = Some((v[0], v[1]));
                }
                "bias" => {
                    let v = numbers(&key, &value, &[2])?;
                    s.bias = Some((v[0], v[1]));
                }
                "noise" => s.noise_sigma = parsed(&key, &value)?,
                "seed" => s.seed = parsed(&key, &value)?,
                _ => return Err(Error::Config(format!("line {line}: unknown key '{key}'"))),
            }
        }
        if s.frames < 2 {
            return Err(Error::Config(
                "a synthetic sequence needs at least 2 frames".into(),
            ));
        }
        Ok(s)
    }

    /// Whether `text` looks like a synthetic script rather than some other file.
    pub fn is_script(text: &str) -> bool {
        key_values(text).is_ok_and(|kv| kv.iter().any(|(_, k, _)| k == "synthetic"))
    }

    pub fn to_spec(&self) -> Result<SyntheticSpec> {
        let source = match &self.source {
            Some(p) => load_frame(p)?,
            None => texture(self.width, self.height, self.texture_seed)?,
        };
        let ssm = Ssm::new(self.ssm, self.init);
        let sampler = WarpSampler::new(&ssm, self.amplitude_px)?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut motion = vec![ssm.identity()];
        while motion.len() < self.frames {
            let next = match self.motion {
                MotionModel::Static => ssm.identity(),
                MotionModel::Jitter => sampler.draw(&mut rng),
                MotionModel::Walk => {
                    ssm.compose(motion.last().expect("non-empty"), &sampler.draw(&mut rng))?
                }
            };
            motion.push(next);
        }
        let mut photometric = Vec::new();
        if self.gain.is_some() || self.bias.is_some() {
            photometric.push((1.0, 0.0));
            for _ in 1..self.frames {
                let g = self.gain.map_or(1.0, |(a, b)| rng.random_range(a..=b));
                let b = self.bias.map_or(0.0, |(a, b)| rng.random_range(a..=b));
                photometric.push((g, b));
            }
        }
        Ok(SyntheticSpec {
            source,
            init: self.init,
            motion,
            photometric,
            noise_sigma: self.noise_sigma,
        })
    }

    pub fn generate(&self) -> Result<(Vec<GrayImage>, GroundTruth)> {
        generate_synthetic(&self.to_spec()?, self.seed ^ 0x5EED)
    }
}
