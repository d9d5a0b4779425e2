//! Search methods: the gradient-descent family (FCLK, ICLK, FALK, IALK, ESM),
//! the stochastic family (NN, PF, RANSAC) and their composites (NNIC, PFFC,
//! RKLT). Every method works with any appearance model and any state-space
//! model.
//!
//! Warps map the template grid, laid out in the initialization frame, into the
//! current frame. Every tracker starts from the identity warp.

mod composite;
mod gd;
mod nn;
mod pf;
mod ransac;
mod sampler;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, Point2};

pub use composite::CompositeTracker;
pub use gd::{GdConfig, GdTracker, GdVariant, Linearization};
pub use nn::{NnConfig, NnIndex, NnTracker};
pub use pf::{ParticleSet, PfConfig, PfTracker};
pub use ransac::{ransac_fit, RansacConfig, RansacFit, RansacTracker, SubtrackerGrid};
pub use sampler::WarpSampler;

use crate::am::{AmKind, AppearanceModel};
use crate::error::{Error, Result};
use crate::image::{extract_values, sampling_grid, GrayImage};
use crate::ssm::{CornersBox, Ssm, SsmKind, WarpParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmKind {
    Iclk,
    Fclk,
    Falk,
    Ialk,
    Esm,
    Nn,
    Pf,
    Ransac,
    Nnic,
    Pffc,
    Rklt,
}

impl SmKind {
    pub const ALL: [SmKind; 11] = [
        SmKind::Iclk,
        SmKind::Fclk,
        SmKind::Falk,
        SmKind::Ialk,
        SmKind::Esm,
        SmKind::Nn,
        SmKind::Pf,
        SmKind::Ransac,
        SmKind::Nnic,
        SmKind::Pffc,
        SmKind::Rklt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SmKind::Iclk => "iclk",
            SmKind::Fclk => "fclk",
            SmKind::Falk => "falk",
            SmKind::Ialk => "ialk",
            SmKind::Esm => "esm",
            SmKind::Nn => "nn",
            SmKind::Pf => "pf",
            SmKind::Ransac => "ransac",
            SmKind::Nnic => "nnic",
            SmKind::Pffc => "pffc",
            SmKind::Rklt => "rklt",
        }
    }

    /// The gradient-descent variant run alone or as the second stage.
    pub fn gd_variant(self) -> Option<GdVariant> {
        match self {
            SmKind::Iclk | SmKind::Nnic => Some(GdVariant::Iclk),
            SmKind::Fclk | SmKind::Pffc | SmKind::Rklt => Some(GdVariant::Fclk),
            SmKind::Falk => Some(GdVariant::Falk),
            SmKind::Ialk => Some(GdVariant::Ialk),
            SmKind::Esm => Some(GdVariant::Esm),
            SmKind::Nn | SmKind::Pf | SmKind::Ransac => None,
        }
    }
}

impl fmt::Display for SmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SmKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown search method '{s}'")))
    }
}

/// Per-frame conditions that did not abort tracking.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrameFlags {
    /// The Newton system could not be solved or the warp degenerated; the
    /// frame's entry parameters were kept.
    pub lost_step: bool,
    /// Every particle weight underflowed and the weights were reset.
    pub weights_reset: bool,
    /// Too few RANSAC inliers; parameters were held.
    pub consensus_failed: bool,
}

impl FrameFlags {
    pub fn any(&self) -> bool {
        self.lost_step || self.weights_reset || self.consensus_failed
    }

    pub fn merge(self, other: FrameFlags) -> FrameFlags {
        FrameFlags {
            lost_step: self.lost_step || other.lost_step,
            weights_reset: self.weights_reset || other.weights_reset,
            consensus_failed: self.consensus_failed || other.consensus_failed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameOutcome {
    pub params: WarpParams,
    pub corners: CornersBox,
    pub iterations: usize,
    pub flags: FrameFlags,
}

pub trait Tracker: Send {
    /// Samples the template from `frame` inside `corners` and resets the warp
    /// to the identity.
    fn initialize(&mut self, frame: &GrayImage, corners: &CornersBox) -> Result<()>;

    fn update(&mut self, frame: &GrayImage) -> Result<FrameOutcome>;

    /// Moves the tracker to `params` without looking at any frame.
    fn set_params(&mut self, params: WarpParams) -> Result<()>;

    fn current(&self) -> Option<(&WarpParams, &CornersBox)>;
}

/// The fixed template: a sampling grid in the initialization frame, the
/// intensities found there, and the warp model anchored on the initial box.
#[derive(Clone, Debug)]
pub struct Template {
    ssm: Ssm,
    grid: Vec<Point2<f64>>,
    values: Vec<f64>,
}

impl Template {
    pub fn new(
        kind: SsmKind,
        frame: &GrayImage,
        corners: &CornersBox,
        resolution: (usize, usize),
    ) -> Result<Self> {
        let grid = sampling_grid(corners, resolution.0, resolution.1)?.into_inner();
        let values = extract_values(frame, &grid);
        Ok(Self {
            ssm: Ssm::new(kind, *corners),
            grid,
            values,
        })
    }

    pub fn ssm(&self) -> &Ssm {
        &self.ssm
    }

    pub fn grid(&self) -> &[Point2<f64>] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn warped_grid(&self, p: &WarpParams) -> Result<Vec<Point2<f64>>> {
        let mut out = Vec::with_capacity(self.grid.len());
        self.ssm.warp_into(p, &self.grid, &mut out)?;
        Ok(out)
    }

    /// `img(w(x0, p))` over the grid.
    pub fn patch(&self, img: &GrayImage, p: &WarpParams) -> Result<Vec<f64>> {
        Ok(extract_values(img, &self.warped_grid(p)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackerConfig {
    /// Template grid size `(columns, rows)`.
    pub resolution: (usize, usize),
    pub gd: GdConfig,
    pub nn: NnConfig,
    pub pf: PfConfig,
    pub ransac: RansacConfig,
    pub seed: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            resolution: (50, 50),
            gd: GdConfig::default(),
            nn: NnConfig::default(),
            pf: PfConfig::default(),
            ransac: RansacConfig::default(),
            seed: 0,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution.0 < 2 || self.resolution.1 < 2 {
            return Err(Error::Config(format!(
                "sampling resolution must be at least 2x2, got {}x{}",
                self.resolution.0, self.resolution.1
            )));
        }
        self.gd.validate()?;
        self.nn.validate()?;
        self.pf.validate()?;
        self.ransac.validate()
    }
}

/// Seeds for the stochastic stages are derived from the configured seed so
/// that composites do not share a stream with their stand-alone variants.
pub(crate) fn stream_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn build_tracker(
    am: AmKind,
    ssm: SsmKind,
    sm: SmKind,
    cfg: &TrackerConfig,
) -> Result<Box<dyn Tracker>> {
    cfg.validate()?;
    let model = AppearanceModel::new(am);
    let gd = |variant| GdTracker::new(variant, model, ssm, cfg.resolution, cfg.gd.clone());
    Ok(match sm {
        SmKind::Iclk | SmKind::Fclk | SmKind::Falk | SmKind::Ialk | SmKind::Esm => {
            Box::new(gd(sm.gd_variant().expect("gradient method"))?)
        }
        SmKind::Nn => Box::new(NnTracker::new(
            model,
            ssm,
            cfg.resolution,
            cfg.nn.clone(),
            cfg.seed,
        )),
        SmKind::Pf => Box::new(PfTracker::new(
            model,
            ssm,
            cfg.resolution,
            cfg.pf.clone(),
            cfg.seed,
        )),
        SmKind::Ransac => Box::new(RansacTracker::new(
            model,
            ssm,
            cfg.ransac.clone(),
            cfg.gd.clone(),
            cfg.seed,
        )?),
        SmKind::Nnic => Box::new(CompositeTracker::new(
            Box::new(NnTracker::new(
                model,
                ssm,
                cfg.resolution,
                cfg.nn.clone(),
                cfg.seed,
            )),
            gd(GdVariant::Iclk)?,
        )),
        SmKind::Pffc => Box::new(CompositeTracker::new(
            Box::new(PfTracker::new(
                model,
                ssm,
                cfg.resolution,
                cfg.pf.clone(),
                cfg.seed,
            )),
            gd(GdVariant::Fclk)?,
        )),
        SmKind::Rklt => Box::new(CompositeTracker::new(
            Box::new(RansacTracker::new(
                model,
                ssm,
                cfg.ransac.clone(),
                cfg.gd.clone(),
                cfg.seed,
            )?),
            gd(GdVariant::Fclk)?,
        )),
    })
}

/// Largest ratio between regularization and the (unit) equilibrated diagonal
/// tried before giving up on a Newton system.
const MAX_REGULARIZATION: f64 = 1e4;

/// Solves `H dp = -J^T` for a maximization step.
///
/// `H` should be negative definite. The system is equilibrated by its
/// diagonal first; when `-H` is still not positive definite, a growing
/// multiple of the identity is added until it is.
pub fn newton_step(j: &DVector<f64>, h: &DMatrix<f64>) -> Result<DVector<f64>> {
    let s = j.len();
    if h.nrows() != s || h.ncols() != s {
        return Err(Error::invalid(format!(
            "Hessian is {}x{} but the Jacobian has {s} entries",
            h.nrows(),
            h.ncols()
        )));
    }
    if j.iter().chain(h.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Step("non-finite Newton system".into()));
    }
    if j.iter().all(|v| *v == 0.0) {
        return Ok(DVector::zeros(s));
    }
    let a = -h;
    let d = DVector::from_iterator(
        s,
        (0..s).map(|i| {
            // Powers of two keep the scaling itself free of rounding.
            let v = a[(i, i)].abs();
            if v > 0.0 && v.is_finite() {
                (-0.5 * v.log2()).round().exp2()
            } else {
                1.0
            }
        }),
    );
    let scaled = DMatrix::from_fn(s, s, |r, c| d[r] * a[(r, c)] * d[c]);
    let rhs = j.component_mul(&d);
    let mut mu = 0.0;
    while mu <= MAX_REGULARIZATION {
        let m = &scaled + DMatrix::identity(s, s) * mu;
        if let Some(ch) = m.cholesky() {
            return Ok(ch.solve(&rhs).component_mul(&d));
        }
        mu = if mu == 0.0 { 1e-10 } else { mu * 10.0 };
    }
    Err(Error::Step(
        "Hessian is not negative definite even after regularization".into(),
    ))
}

/// L2 norm of the stacked corner differences.
pub(crate) fn corner_change(a: &CornersBox, b: &CornersBox) -> f64 {
    a.to_flat()
        .iter()
        .zip(b.to_flat().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Largest single-corner displacement.
pub(crate) fn max_corner_move(a: &CornersBox, b: &CornersBox) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max)
}
