//! Consensus over a grid of independently tracked sub-patches.

use std::cmp::Ordering;

use nalgebra::Point2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{stream_seed, FrameFlags, FrameOutcome, GdConfig, GdTracker, GdVariant, Tracker};
use crate::am::AppearanceModel;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::ssm::{homog, CornersBox, Ssm, SsmKind, WarpParams};

#[derive(Clone, Debug, PartialEq)]
pub struct RansacConfig {
    /// Sub-patches per side.
    pub grid: usize,
    /// Sampling resolution of each sub-patch (per side).
    pub sub_resolution: usize,
    /// Sub-patch side as a fraction of the object box side.
    pub sub_patch_fraction: f64,
    pub hypotheses: usize,
    /// Reprojection distance below which a correspondence is an inlier.
    pub inlier_px: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            grid: 10,
            sub_resolution: 25,
            sub_patch_fraction: 0.5,
            hypotheses: 50,
            inlier_px: 2.0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 1 || self.sub_resolution < 2 || self.hypotheses < 1 {
            return Err(Error::Config(
                "ransac needs a non-empty grid, sub-resolution >= 2 and at least one hypothesis"
                    .into(),
            ));
        }
        if !(self.sub_patch_fraction > 0.0 && self.sub_patch_fraction.is_finite()) {
            return Err(Error::Config(
                "ransac sub-patch fraction must be positive".into(),
            ));
        }
        if !(self.inlier_px > 0.0) {
            return Err(Error::Config(
                "ransac inlier threshold must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RansacFit {
    pub params: WarpParams,
    /// Indices into the caller's correspondence lists, ascending.
    pub inliers: Vec<usize>,
}

fn cmp_pair(a: (&Point2<f64>, &Point2<f64>), b: (&Point2<f64>, &Point2<f64>)) -> Ordering {
    a.0.x
        .total_cmp(&b.0.x)
        .then(a.0.y.total_cmp(&b.0.y))
        .then(a.1.x.total_cmp(&b.1.x))
        .then(a.1.y.total_cmp(&b.1.y))
}

fn inliers_of(
    ssm: &Ssm,
    p: &WarpParams,
    src: &[Point2<f64>],
    dst: &[Point2<f64>],
    tau: f64,
) -> Vec<usize> {
    let Ok(m) = ssm.matrix(p) else {
        return Vec::new();
    };
    (0..src.len())
        .filter(|&i| matches!(homog::apply(&m, src[i]), Ok(q) if (q - dst[i]).norm() < tau))
        .collect()
}

/// Robust fit of `ssm` to `src -> dst`.
///
/// Correspondences are put in a canonical order first, so the result does
/// not depend on the order they are given in.
pub fn ransac_fit<R: Rng + ?Sized>(
    ssm: &Ssm,
    src: &[Point2<f64>],
    dst: &[Point2<f64>],
    hypotheses: usize,
    inlier_px: f64,
    rng: &mut R,
) -> Result<RansacFit> {
    if src.len() != dst.len() {
        return Err(Error::invalid("correspondence lists differ in length"));
    }
    let minimal = ssm.kind().minimal_points();
    let n = src.len();
    if n < minimal {
        return Err(Error::Fit(format!(
            "{} correspondences cannot support a {} fit",
            n,
            ssm.kind()
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_pair((&src[a], &dst[a]), (&src[b], &dst[b])));
    let s: Vec<Point2<f64>> = order.iter().map(|&i| src[i]).collect();
    let d: Vec<Point2<f64>> = order.iter().map(|&i| dst[i]).collect();

    let mut best: Option<(WarpParams, Vec<usize>)> = None;
    for _ in 0..hypotheses {
        let pick = sample(rng, n, minimal).into_vec();
        let ps: Vec<Point2<f64>> = pick.iter().map(|&i| s[i]).collect();
        let pd: Vec<Point2<f64>> = pick.iter().map(|&i| d[i]).collect();
        let Ok(p) = ssm.fit_raw(&ps, &pd) else {
            continue;
        };
        let inl = inliers_of(ssm, &p, &s, &d, inlier_px);
        if best.as_ref().is_none_or(|(_, b)| inl.len() > b.len()) {
            best = Some((p, inl));
        }
    }
    let Some((hyp, inl)) = best.filter(|(_, inl)| inl.len() >= minimal) else {
        return Err(Error::Fit("too few inliers for a consensus".into()));
    };
    let ps: Vec<Point2<f64>> = inl.iter().map(|&i| s[i]).collect();
    let pd: Vec<Point2<f64>> = inl.iter().map(|&i| d[i]).collect();
    let (params, inl) = match ssm.fit_raw(&ps, &pd) {
        Ok(p) => {
            let refit = inliers_of(ssm, &p, &s, &d, inlier_px);
            if refit.len() >= inl.len() {
                (p, refit)
            } else {
                (hyp, inl)
            }
        }
        Err(_) => (hyp, inl),
    };
    let mut inliers: Vec<usize> = inl.into_iter().map(|i| order[i]).collect();
    inliers.sort_unstable();
    Ok(RansacFit { params, inliers })
}

/// Translation-only trackers on a regular grid of sub-patches.
#[derive(Clone, Debug)]
pub struct SubtrackerGrid {
    trackers: Vec<GdTracker>,
    centers: Vec<Point2<f64>>,
}

impl SubtrackerGrid {
    pub fn new(
        am: AppearanceModel,
        frame: &GrayImage,
        corners: &CornersBox,
        cfg: &RansacConfig,
        gd: &GdConfig,
    ) -> Result<Self> {
        corners.check_non_degenerate()?;
        let to_box = homog::unit_square_to_quad(corners.points())?;
        let c = corners.points();
        let width = ((c[1] - c[0]).norm() + (c[2] - c[3]).norm()) / 2.0;
        let height = ((c[3] - c[0]).norm() + (c[2] - c[1]).norm()) / 2.0;
        let hw = width * cfg.sub_patch_fraction / 2.0;
        let hh = height * cfg.sub_patch_fraction / 2.0;
        let g = cfg.grid as f64;
        let mut trackers = Vec::with_capacity(cfg.grid * cfg.grid);
        let mut centers = Vec::with_capacity(cfg.grid * cfg.grid);
        for j in 0..cfg.grid {
            for i in 0..cfg.grid {
                let u = (i as f64 + 0.5) / g;
                let v = (j as f64 + 0.5) / g;
                let ctr = homog::apply(&to_box, Point2::new(u, v))?;
                let sub = CornersBox::axis_aligned(ctr.x - hw, ctr.y - hh, ctr.x + hw, ctr.y + hh);
                let mut t = GdTracker::new(
                    GdVariant::Fclk,
                    am,
                    SsmKind::Translation,
                    (cfg.sub_resolution, cfg.sub_resolution),
                    gd.clone(),
                )?;
                t.initialize(frame, &sub)?;
                trackers.push(t);
                centers.push(ctr);
            }
        }
        Ok(Self { trackers, centers })
    }

    pub fn len(&self) -> usize {
        self.trackers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trackers.is_empty()
    }

    /// Sub-patch centres in the initialization frame.
    pub fn centers(&self) -> &[Point2<f64>] {
        &self.centers
    }

    /// Tracks every sub-patch; `None` where the subtracker lost its step.
    pub fn track(&mut self, frame: &GrayImage) -> Vec<Option<Point2<f64>>> {
        self.trackers
            .par_iter_mut()
            .zip(self.centers.par_iter())
            .map(|(t, c)| match t.track(frame) {
                Ok(o) if !o.flags.lost_step => {
                    let v = o.params.values();
                    Some(Point2::new(c.x + v[0], c.y + v[1]))
                }
                _ => None,
            })
            .collect()
    }

    /// Moves every sub-patch to where `p` puts its centre.
    pub fn reset(&mut self, ssm: &Ssm, p: &WarpParams) -> Result<()> {
        let m = ssm.matrix(p)?;
        for (t, c) in self.trackers.iter_mut().zip(&self.centers) {
            if let Ok(q) = homog::apply(&m, *c) {
                t.set_params(WarpParams::new(
                    SsmKind::Translation,
                    vec![q.x - c.x, q.y - c.y],
                )?)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
struct RansacState {
    ssm: Ssm,
    grid: SubtrackerGrid,
    params: WarpParams,
    corners: CornersBox,
    rng: ChaCha8Rng,
}

#[derive(Clone, Debug)]
pub struct RansacTracker {
    am: AppearanceModel,
    kind: SsmKind,
    cfg: RansacConfig,
    gd: GdConfig,
    seed: u64,
    state: Option<RansacState>,
}

impl RansacTracker {
    pub fn new(
        am: AppearanceModel,
        kind: SsmKind,
        cfg: RansacConfig,
        gd: GdConfig,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        gd.validate()?;
        Ok(Self {
            am,
            kind,
            cfg,
            gd,
            seed,
            state: None,
        })
    }

    pub fn subtrackers(&self) -> Option<&SubtrackerGrid> {
        self.state.as_ref().map(|s| &s.grid)
    }
}

impl Tracker for RansacTracker {
    fn initialize(&mut self, frame: &GrayImage, corners: &CornersBox) -> Result<()> {
        let ssm = Ssm::new(self.kind, *corners);
        let grid = SubtrackerGrid::new(self.am, frame, corners, &self.cfg, &self.gd)?;
        self.state = Some(RansacState {
            params: ssm.identity(),
            corners: *corners,
            ssm,
            grid,
            rng: ChaCha8Rng::seed_from_u64(stream_seed(self.seed, 3)),
        });
        Ok(())
    }

    fn update(&mut self, frame: &GrayImage) -> Result<FrameOutcome> {
        let st = self
            .state
            .as_mut()
            .ok_or_else(|| Error::invalid("tracker used before initialization"))?;
        let mut flags = FrameFlags::default();
        let tracked = st.grid.track(frame);
        let (src, dst): (Vec<_>, Vec<_>) = st
            .grid
            .centers()
            .iter()
            .zip(&tracked)
            .filter_map(|(c, t)| t.map(|t| (*c, t)))
            .unzip();
        match ransac_fit(
            &st.ssm,
            &src,
            &dst,
            self.cfg.hypotheses,
            self.cfg.inlier_px,
            &mut st.rng,
        )
        .and_then(|fit| {
            let c = st.ssm.corners(&fit.params)?;
            c.check_non_degenerate()?;
            Ok((fit.params, c))
        }) {
            Ok((p, c)) => {
                st.params = p;
                st.corners = c;
            }
            Err(Error::Fit(_) | Error::Geometry(_)) => flags.consensus_failed = true,
            Err(e) => return Err(e),
        }
        st.grid.reset(&st.ssm, &st.params)?;
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
        st.corners = st.ssm.corners(&params)?;
        st.grid.reset(&st.ssm, &params)?;
        st.params = params;
        Ok(())
    }

    fn current(&self) -> Option<(&WarpParams, &CornersBox)> {
        self.state.as_ref().map(|s| (&s.params, &s.corners))
    }
}
