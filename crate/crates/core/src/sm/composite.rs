//! A stochastic stage followed by gradient-descent refinement.

use super::{FrameOutcome, GdTracker, Tracker};
use crate::error::Result;
use crate::image::GrayImage;
use crate::ssm::{CornersBox, WarpParams};

/// Runs `coarse`, seeds `fine` with its result and returns the refined warp,
/// which is also fed back to `coarse`. If refinement loses its step the
/// coarse result stands.
pub struct CompositeTracker {
    coarse: Box<dyn Tracker>,
    fine: GdTracker,
}

impl CompositeTracker {
    pub fn new(coarse: Box<dyn Tracker>, fine: GdTracker) -> Self {
        Self { coarse, fine }
    }
}

impl Tracker for CompositeTracker {
    fn initialize(&mut self, frame: &GrayImage, corners: &CornersBox) -> Result<()> {
        self.coarse.initialize(frame, corners)?;
        self.fine.initialize(frame, corners)
    }

    fn update(&mut self, frame: &GrayImage) -> Result<FrameOutcome> {
        let first = self.coarse.update(frame)?;
        self.fine.set_params(first.params.clone())?;
        let second = self.fine.track(frame)?;
        if second.flags.lost_step {
            return Ok(FrameOutcome {
                iterations: first.iterations + second.iterations,
                flags: first.flags.merge(second.flags),
                ..first
            });
        }
        self.coarse.set_params(second.params.clone())?;
        Ok(FrameOutcome {
            iterations: first.iterations + second.iterations,
            flags: first.flags.merge(second.flags),
            ..second
        })
    }

    fn set_params(&mut self, params: WarpParams) -> Result<()> {
        self.coarse.set_params(params.clone())?;
        self.fine.set_params(params)
    }

    fn current(&self) -> Option<(&WarpParams, &CornersBox)> {
        self.fine.current()
    }
}
