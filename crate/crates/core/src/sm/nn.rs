//! Nearest-neighbour search over template-side warps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{stream_seed, FrameFlags, FrameOutcome, Template, Tracker, WarpSampler};
use crate::am::AppearanceModel;
use crate::error::{Error, Result};
use crate::image::{extract_values, GrayImage};
use crate::ssm::{CornersBox, SsmKind, WarpParams};

#[derive(Clone, Debug, PartialEq)]
pub struct NnConfig {
    /// Stored warps including the identity.
    pub samples: usize,
    /// Corner displacement (pixels) of a one-sigma draw of any single parameter.
    pub sigma_px: f64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            sigma_px: 6.0,
        }
    }
}

impl NnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(Error::Config("nn needs at least one sample".into()));
        }
        if !(self.sigma_px >= 0.0 && self.sigma_px.is_finite()) {
            return Err(Error::Config("nn sigma must be non-negative".into()));
        }
        Ok(())
    }
}

/// Template-frame patches seen through a set of small warps.
#[derive(Clone, Debug)]
pub struct NnIndex {
    warps: Vec<WarpParams>,
    inverses: Vec<WarpParams>,
    patches: Vec<Vec<f64>>,
}

impl NnIndex {
    /// Entry 0 is the identity; the rest are drawn from `sampler`.
    pub fn build(
        template: &Template,
        frame: &GrayImage,
        sampler: &WarpSampler,
        samples: usize,
        seed: u64,
    ) -> Result<Self> {
        let ssm = template.ssm();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut warps = vec![ssm.identity()];
        while warps.len() < samples {
            warps.push(sampler.draw(&mut rng));
        }
        let inverses = warps
            .iter()
            .map(|w| ssm.invert(w))
            .collect::<Result<Vec<_>>>()?;
        let patches = warps
            .par_iter()
            .map(|w| Ok(extract_values(frame, &template.warped_grid(w)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            warps,
            inverses,
            patches,
        })
    }

    pub fn len(&self) -> usize {
        self.warps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.warps.is_empty()
    }

    pub fn warp(&self, i: usize) -> &WarpParams {
        &self.warps[i]
    }

    pub fn patch(&self, i: usize) -> &[f64] {
        &self.patches[i]
    }

    /// Index of the stored patch most similar to `patch`; ties go to the
    /// lowest index.
    pub fn query(&self, am: &AppearanceModel, patch: &[f64]) -> usize {
        let scores: Vec<f64> = self
            .patches
            .par_iter()
            .map(|stored| am.similarity_unchecked(stored, patch))
            .collect();
        let mut best = 0;
        for (i, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Clone, Debug)]
struct NnState {
    template: Template,
    index: NnIndex,
    params: WarpParams,
    corners: CornersBox,
}

#[derive(Clone, Debug)]
pub struct NnTracker {
    am: AppearanceModel,
    kind: SsmKind,
    resolution: (usize, usize),
    cfg: NnConfig,
    seed: u64,
    state: Option<NnState>,
}

impl NnTracker {
    pub fn new(
        am: AppearanceModel,
        kind: SsmKind,
        resolution: (usize, usize),
        cfg: NnConfig,
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

    pub fn index(&self) -> Option<&NnIndex> {
        self.state.as_ref().map(|s| &s.index)
    }
}

impl Tracker for NnTracker {
    fn initialize(&mut self, frame: &GrayImage, corners: &CornersBox) -> Result<()> {
        let template = Template::new(self.kind, frame, corners, self.resolution)?;
        let sampler = WarpSampler::new(template.ssm(), self.cfg.sigma_px)?;
        let index = NnIndex::build(
            &template,
            frame,
            &sampler,
            self.cfg.samples,
            stream_seed(self.seed, 1),
        )?;
        self.state = Some(NnState {
            params: template.ssm().identity(),
            corners: *corners,
            template,
            index,
        });
        Ok(())
    }

    /// The current patch looks like the template seen through stored warp
    /// `dp`, so the object sits at `p o dp^-1`.
    fn update(&mut self, frame: &GrayImage) -> Result<FrameOutcome> {
        let st = self
            .state
            .as_mut()
            .ok_or_else(|| Error::invalid("tracker used before initialization"))?;
        let mut flags = FrameFlags::default();
        let ssm = st.template.ssm();
        let patch = st.template.patch(frame, &st.params)?;
        let best = st.index.query(&self.am, &patch);
        match ssm
            .compose(&st.params, &st.index.inverses[best])
            .and_then(|p| ssm.corners(&p).map(|c| (p, c)))
        {
            Ok((p, c)) => {
                st.params = p;
                st.corners = c;
            }
            Err(Error::Geometry(_)) => flags.lost_step = true,
            Err(e) => return Err(e),
        }
        Ok(FrameOutcome {
            params: st.params.clone(),
            corners: st.corners,
            iterations: 1,
            flags,
        })
    }

    fn set_params(&mut self, params: WarpParams) -> Result<()> {
        let st = self
            .state
            .as_mut()
            .ok_or_else(|| Error::invalid("tracker used before initialization"))?;
        st.corners = st.template.ssm().corners(&params)?;
        st.params = params;
        Ok(())
    }

    fn current(&self) -> Option<(&WarpParams, &CornersBox)> {
        self.state.as_ref().map(|s| (&s.params, &s.corners))
    }
}
