//! Sequential importance resampling over warp parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{stream_seed, FrameFlags, FrameOutcome, Template, Tracker, WarpSampler};
use crate::am::AppearanceModel;
use crate::error::{Error, Result};
use crate::image::{extract_values, GrayImage};
use crate::ssm::{CornersBox, Ssm, SsmKind, WarpParams};

#[derive(Clone, Debug, PartialEq)]
pub struct PfConfig {
    pub particles: usize,
    /// Corner displacement (pixels) of a one-sigma draw of any single
    /// parameter of the dynamics noise.
    pub sigma_px: f64,
    /// Inverse temperature applied to the normalized similarity.
    pub beta: f64,
    /// Resample when the effective sample size drops below this fraction
    /// of the particle count.
    pub resample_fraction: f64,
}

impl Default for PfConfig {
    fn default() -> Self {
        Self {
            particles: 500,
            sigma_px: 2.0,
            beta: 50.0,
            resample_fraction: 0.5,
        }
    }
}

impl PfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particles < 1 {
            return Err(Error::Config("pf needs at least one particle".into()));
        }
        if !(self.sigma_px >= 0.0 && self.sigma_px.is_finite()) {
            return Err(Error::Config("pf sigma must be non-negative".into()));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config("pf beta must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.resample_fraction) {
            return Err(Error::Config(
                "pf resample fraction must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Weighted warp hypotheses; weights always sum to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    params: Vec<WarpParams>,
    weights: Vec<f64>,
}

impl ParticleSet {
    /// Normalizes `weights`; they must be non-negative with a positive sum.
    pub fn new(params: Vec<WarpParams>, weights: Vec<f64>) -> Result<Self> {
        if params.is_empty() || params.len() != weights.len() {
            return Err(Error::invalid(
                "particle and weight counts differ or are zero",
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::invalid(
                "particle weights must be finite and non-negative",
            ));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::invalid("particle weights sum to zero"));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { params, weights })
    }

    pub fn uniform(p: WarpParams, n: usize) -> Self {
        Self {
            params: vec![p; n],
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[WarpParams] {
        &self.params
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn effective_size(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Weighted mean of the parameter vectors. For the corners kind the
    /// parameters are the corners, so this is the mean box.
    pub fn estimate(&self) -> Result<WarpParams> {
        let kind = self.params[0].kind();
        let mut mean = vec![0.0; kind.dof()];
        for (p, w) in self.params.iter().zip(&self.weights) {
            for (m, v) in mean.iter_mut().zip(p.values()) {
                *m += w * v;
            }
        }
        WarpParams::new(kind, mean)
    }

    /// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.len();
        let u0: f64 = rng.random::<f64>() / n as f64;
        let mut out = Vec::with_capacity(n);
        let mut cum = self.weights[0];
        let mut i = 0;
        for k in 0..n {
            let u = u0 + k as f64 / n as f64;
            while u > cum && i + 1 < n {
                i += 1;
                cum += self.weights[i];
            }
            out.push(self.params[i].clone());
        }
        self.params = out;
        self.weights = vec![1.0 / n as f64; n];
    }
}

#[derive(Clone, Debug)]
struct PfState {
    template: Template,
    sampler: WarpSampler,
    particles: ParticleSet,
    params: WarpParams,
    corners: CornersBox,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug)]
pub struct PfTracker {
    am: AppearanceModel,
    kind: SsmKind,
    resolution: (usize, usize),
    cfg: PfConfig,
    seed: u64,
    state: Option<PfState>,
}

impl PfTracker {
    pub fn new(
        am: AppearanceModel,
        kind: SsmKind,
        resolution: (usize, usize),
        cfg: PfConfig,
        seed: u64,
    ) -> Self {
        Self {
            am,
            kind,
            resolution,
            cfg,
            seed,
            state: None,
        }
    }

    pub fn particles(&self) -> Option<&ParticleSet> {
        self.state.as_ref().map(|s| &s.particles)
    }
}

/// Particle estimate, falling back to the heaviest particle if the mean warp
/// is degenerate.
fn safe_estimate(ssm: &Ssm, set: &ParticleSet) -> Result<(WarpParams, CornersBox)> {
    if let Ok(p) = set.estimate() {
        if let Ok(c) = ssm.corners(&p) {
            if c.check_non_degenerate().is_ok() {
                return Ok((p, c));
            }
        }
    }
    let best = set
        .weights
        .iter()
        .enumerate()
        .fold(0, |b, (i, w)| if *w > set.weights[b] { i } else { b });
    let p = set.params[best].clone();
    let c = ssm.corners(&p)?;
    Ok((p, c))
}

impl Tracker for PfTracker {
    fn initialize(&mut self, frame: &GrayImage, corners: &CornersBox) -> Result<()> {
        let template = Template::new(self.kind, frame, corners, self.resolution)?;
        let sampler = WarpSampler::new(template.ssm(), self.cfg.sigma_px)?;
        let identity = template.ssm().identity();
        self.state = Some(PfState {
            particles: ParticleSet::uniform(identity.clone(), self.cfg.particles),
            params: identity,
            corners: *corners,
            template,
            sampler,
            rng: ChaCha8Rng::seed_from_u64(stream_seed(self.seed, 2)),
        });
        Ok(())
    }

    fn update(&mut self, frame: &GrayImage) -> Result<FrameOutcome> {
        let st = self
            .state
            .as_mut()
            .ok_or_else(|| Error::invalid("tracker used before initialization"))?;
        let ssm = st.template.ssm().clone();
        let mut flags = FrameFlags::default();

        let noise: Vec<WarpParams> = (0..st.particles.len())
            .map(|_| st.sampler.draw(&mut st.rng))
            .collect();
        let moved: Vec<WarpParams> = st
            .particles
            .params
            .iter()
            .zip(&noise)
            .map(|(p, n)| ssm.compose(p, n).unwrap_or_else(|_| p.clone()))
            .collect();

        let template = &st.template;
        let am = &self.am;
        let scores: Vec<f64> = moved
            .par_iter()
            .map(|p| match template.warped_grid(p) {
                Ok(pts) => {
                    let patch = extract_values(frame, &pts);
                    let f = am.similarity_unchecked(template.values(), &patch);
                    am.normalized(f, template.values())
                }
                Err(_) => f64::NEG_INFINITY,
            })
            .collect();
        let top = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = scores
            .iter()
            .map(|s| (self.cfg.beta * (s - top)).exp())
            .collect();
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            flags.weights_reset = true;
            weights = vec![1.0; weights.len()];
        }
        st.particles = ParticleSet::new(moved, weights)?;

        let (p, c) = safe_estimate(&ssm, &st.particles)?;
        st.params = p;
        st.corners = c;
        if st.particles.effective_size() < self.cfg.resample_fraction * st.particles.len() as f64 {
            st.particles.resample(&mut st.rng);
        }
        Ok(FrameOutcome {
            params: st.params.clone(),
            corners: st.corners,
            iterations: 1,
            flags,
        })
    }

    /// Collapses every particle onto `params`.
    fn set_params(&mut self, params: WarpParams) -> Result<()> {
        let st = self
            .state
            .as_mut()
            .ok_or_else(|| Error::invalid("tracker used before initialization"))?;
        st.corners = st.template.ssm().corners(&params)?;
        st.particles = ParticleSet::uniform(params.clone(), st.particles.len());
        st.params = params;
        Ok(())
    }

    fn current(&self) -> Option<(&WarpParams, &CornersBox)> {
        self.state.as_ref().map(|s| (&s.params, &s.corners))
    }
}
