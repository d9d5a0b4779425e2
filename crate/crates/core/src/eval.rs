//! Alignment error, success rates and the benchmark protocols.
//!
//! The alignment error of a frame is the root-mean-square of the four
//! corner-to-corner distances between the tracked and ground-truth boxes.
//! A frame succeeds at threshold `t` when its error is strictly below `t`.
//! The initialization frame of a run carries no error entry.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::sm::{FrameFlags, Tracker};
use crate::ssm::{CornersBox, Ssm, SsmKind, WarpParams};

pub const REINIT_THRESHOLD: f64 = 20.0;
pub const REINIT_SKIP: usize = 5;
pub const MULTI_INIT_RUNS: usize = 10;
const PROJECTION_MAX_ITERS: usize = 100;

pub fn alignment_error(gt: &CornersBox, tracked: &CornersBox) -> f64 {
    let ms = gt
        .points()
        .iter()
        .zip(tracked.points())
        .map(|(a, b)| (a - b).norm_squared())
        .sum::<f64>()
        / 4.0;
    ms.sqrt()
}

pub fn success_rate(errors: &[f64], threshold: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid("success rate of an empty error list"));
    }
    if !(threshold >= 0.0) {
        return Err(Error::invalid("success threshold must be non-negative"));
    }
    Ok(errors.iter().filter(|e| **e < threshold).count() as f64 / errors.len() as f64)
}

/// 0, 0.5, ..., 20.
pub fn default_thresholds() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.5).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrCurve {
    pub thresholds: Vec<f64>,
    pub rates: Vec<f64>,
    /// Mean success rate over the thresholds, in `[0, 1]`.
    pub auc: f64,
}

pub fn sr_curve(errors: &[f64], thresholds: &[f64]) -> Result<SrCurve> {
    if thresholds.is_empty() {
        return Err(Error::invalid("empty threshold grid"));
    }
    let rates = thresholds
        .iter()
        .map(|t| success_rate(errors, *t))
        .collect::<Result<Vec<_>>>()?;
    let auc = rates.iter().sum::<f64>() / rates.len() as f64;
    Ok(SrCurve {
        thresholds: thresholds.to_vec(),
        rates,
        auc,
    })
}

/// How success rates from several sequences are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Reducer {
    /// One curve over the concatenated errors.
    Pooled,
    /// The mean of the per-sequence curves.
    #[default]
    SequenceMean,
}

pub fn combine_sr(sequences: &[Vec<f64>], thresholds: &[f64], reducer: Reducer) -> Result<SrCurve> {
    if sequences.is_empty() {
        return Err(Error::invalid("no sequences to combine"));
    }
    match reducer {
        Reducer::Pooled => {
            let all: Vec<f64> = sequences.iter().flatten().copied().collect();
            sr_curve(&all, thresholds)
        }
        Reducer::SequenceMean => {
            let curves = sequences
                .iter()
                .map(|e| sr_curve(e, thresholds))
                .collect::<Result<Vec<_>>>()?;
            let k = curves.len() as f64;
            let rates: Vec<f64> = (0..thresholds.len())
                .map(|i| curves.iter().map(|c| c.rates[i]).sum::<f64>() / k)
                .collect();
            let auc = rates.iter().sum::<f64>() / rates.len() as f64;
            Ok(SrCurve {
                thresholds: thresholds.to_vec(),
                rates,
                auc,
            })
        }
    }
}

/// Per-frame ground-truth boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruth(Vec<CornersBox>);

impl GroundTruth {
    pub fn new(boxes: Vec<CornersBox>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::invalid("ground truth has no frames"));
        }
        if let Some(i) = boxes.iter().position(|b| !b.is_finite()) {
            return Err(Error::invalid(format!(
                "ground truth frame {i} is not finite"
            )));
        }
        Ok(Self(boxes))
    }

    pub fn boxes(&self) -> &[CornersBox] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> &CornersBox {
        &self.0[i]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub error: f64,
    pub corners: CornersBox,
    pub iterations: usize,
    /// Wall time of the update, or 0 when timing is off.
    pub millis: f64,
    pub flags: FrameFlags,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub init_frame: usize,
    pub records: Vec<FrameRecord>,
}

impl RunResult {
    pub fn errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error).collect()
    }
}

/// Builds a fresh, uninitialized tracker.
pub type TrackerFactory<'a> = dyn Fn() -> Result<Box<dyn Tracker>> + Sync + 'a;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// Compare against ground truth projected onto this kind, anchored at
    /// each run's initialization box.
    pub projection: Option<SsmKind>,
    pub timing: bool,
}

fn check_lengths(frames: &[GrayImage], gt: &GroundTruth) -> Result<()> {
    if frames.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} ground-truth boxes",
            frames.len(),
            gt.len()
        )));
    }
    Ok(())
}

/// Ground truth for frames `start..` as seen by a tracker initialized at `start`.
fn reference(gt: &GroundTruth, start: usize, opts: &RunOptions) -> Result<Vec<CornersBox>> {
    let tail = gt.boxes()[start..].to_vec();
    match opts.projection {
        Some(kind) if kind.dof() < 8 => {
            Ok(
                project_ground_truth(&GroundTruth::new(tail)?, kind, gt.get(start))?
                    .gt
                    .0,
            )
        }
        _ => Ok(tail),
    }
}

/// Tracks frames `start + 1 .. end` after initializing on frame `start`.
fn track_span(
    tracker: &mut dyn Tracker,
    frames: &[GrayImage],
    refs: &[CornersBox],
    start: usize,
    end: usize,
    timing: bool,
    out: &mut Vec<FrameRecord>,
    stop_above: Option<f64>,
) -> Result<Option<usize>> {
    tracker.initialize(&frames[start], &refs[0])?;
    for t in start + 1..end {
        let clock = timing.then(Instant::now);
        let o = tracker.update(&frames[t])?;
        let millis = clock.map_or(0.0, |c| c.elapsed().as_secs_f64() * 1e3);
        let error = alignment_error(&refs[t - start], &o.corners);
        out.push(FrameRecord {
            frame: t,
            error,
            corners: o.corners,
            iterations: o.iterations,
            millis,
            flags: o.flags,
        });
        if stop_above.is_some_and(|th| error > th) {
            return Ok(Some(t));
        }
    }
    Ok(None)
}

/// One run initialized at `init` and tracked to the end of the sequence.
pub fn run_single(
    factory: &TrackerFactory,
    frames: &[GrayImage],
    gt: &GroundTruth,
    init: usize,
    opts: &RunOptions,
) -> Result<RunResult> {
    check_lengths(frames, gt)?;
    if init >= frames.len() {
        return Err(Error::invalid("initialization frame past the end"));
    }
    let refs = reference(gt, init, opts)?;
    let mut tracker = factory()?;
    let mut records = Vec::new();
    track_span(
        tracker.as_mut(),
        frames,
        &refs,
        init,
        frames.len(),
        opts.timing,
        &mut records,
        None,
    )?;
    Ok(RunResult {
        init_frame: init,
        records,
    })
}

/// `floor(j (L - 1) / 10)` for `j = 0..10`, or every frame when `L <= 10`.
pub fn init_frames(len: usize) -> Vec<usize> {
    if len <= MULTI_INIT_RUNS {
        return (0..len).collect();
    }
    (0..MULTI_INIT_RUNS)
        .map(|j| j * (len - 1) / MULTI_INIT_RUNS)
        .collect()
}

pub fn run_multi_init(
    factory: &TrackerFactory,
    frames: &[GrayImage],
    gt: &GroundTruth,
    opts: &RunOptions,
) -> Result<Vec<RunResult>> {
    check_lengths(frames, gt)?;
    init_frames(frames.len())
        .into_par_iter()
        .map(|init| run_single(factory, frames, gt, init, opts))
        .collect()
}

pub fn pooled_errors(runs: &[RunResult]) -> Vec<f64> {
    runs.iter().flat_map(|r| r.errors()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReinitResult {
    pub reinits: usize,
    pub run: RunResult,
}

/// Tracks from frame 0; whenever the error exceeds `fail_threshold` the
/// failing frame is recorded, `skip` frames are passed over and the tracker
/// is re-seeded from ground truth.
pub fn run_reinit(
    factory: &TrackerFactory,
    frames: &[GrayImage],
    gt: &GroundTruth,
    fail_threshold: f64,
    skip: usize,
    opts: &RunOptions,
) -> Result<ReinitResult> {
    check_lengths(frames, gt)?;
    let mut tracker = factory()?;
    let mut records = Vec::new();
    let mut reinits = 0;
    let mut start = 0;
    loop {
        let refs = reference(gt, start, opts)?;
        let failed = track_span(
            tracker.as_mut(),
            frames,
            &refs,
            start,
            frames.len(),
            opts.timing,
            &mut records,
            Some(fail_threshold),
        )?;
        let Some(t) = failed else { break };
        reinits += 1;
        start = t + skip;
        if start >= frames.len() {
            break;
        }
    }
    Ok(ReinitResult {
        reinits,
        run: RunResult {
            init_frame: 0,
            records,
        },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub gt: GroundTruth,
    pub params: Vec<WarpParams>,
    /// Frames whose refinement did not converge; the best iterate was kept.
    pub flagged: Vec<usize>,
}

fn corner_residual(ssm: &Ssm, p: &WarpParams, target: &CornersBox) -> Option<DVector<f64>> {
    let c = ssm.corners(p).ok()?;
    let a = c.to_flat();
    let b = target.to_flat();
    Some(DVector::from_iterator(
        8,
        a.iter().zip(b.iter()).map(|(x, y)| x - y),
    ))
}

/// Gauss-Newton on the corner residual; returns the best iterate and whether
/// the iteration settled.
fn polish(ssm: &Ssm, seed: WarpParams, target: &CornersBox) -> (WarpParams, bool) {
    let Some(mut r) = corner_residual(ssm, &seed, target) else {
        return (seed, false);
    };
    let mut best = seed;
    let corners = ssm.base().to_coords();
    for _ in 0..PROJECTION_MAX_ITERS {
        let Ok(jac) = ssm.warp_jacobian(&best, &corners) else {
            return (best, false);
        };
        let j: &DMatrix<f64> = jac.matrix();
        let Some(step) = (j.transpose() * j)
            .cholesky()
            .map(|c| c.solve(&(j.transpose() * &r)))
        else {
            return (best, true);
        };
        if step.norm() < 1e-12 * (1.0 + best.values().iter().map(|v| v.abs()).fold(0.0, f64::max)) {
            return (best, true);
        }
        let Ok(next) = best.offset((-step).as_slice()) else {
            return (best, false);
        };
        match corner_residual(ssm, &next, target) {
            Some(rn) if rn.norm() < r.norm() => {
                best = next;
                r = rn;
            }
            _ => return (best, true),
        }
    }
    (best, false)
}

/// Best approximation of each ground-truth box by warping `init` with a
/// warp of `kind`, in the least-squares corner sense.
pub fn project_ground_truth(
    gt: &GroundTruth,
    kind: SsmKind,
    init: &CornersBox,
) -> Result<Projection> {
    let ssm = Ssm::new(kind, *init);
    let src = init.to_coords();
    let mut boxes = Vec::with_capacity(gt.len());
    let mut params = Vec::with_capacity(gt.len());
    let mut flagged = Vec::new();
    for (i, target) in gt.boxes().iter().enumerate() {
        let seed = ssm.params_from_points(&src, &target.to_coords())?;
        let (p, settled) = polish(&ssm, seed, target);
        if !settled {
            flagged.push(i);
        }
        boxes.push(ssm.corners(&p)?);
        params.push(p);
    }
    Ok(Projection {
        gt: GroundTruth::new(boxes)?,
        params,
        flagged,
    })
}
