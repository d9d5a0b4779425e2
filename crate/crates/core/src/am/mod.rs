//! Appearance models: the similarity `f(I0, It)` between a template and a
//! candidate patch, its gradient and its second derivative.
//!
//! Every model is oriented for maximization, so the distance-like models
//! (SSD, ZNCC, SCV, RSCV) are negated. Derivatives are with respect to the
//! candidate unless [`Side::Template`] is asked for.
//!
//! The Self Hessian of a model is its second derivative evaluated at a
//! perfect match. It is what the gradient-descent search methods use;
//! because every model here is stationary at a perfect match, dropping the
//! second-order image term costs nothing there.

mod hessian;
mod scv;
mod ssim;
mod stats;

use std::fmt;
use std::str::FromStr;

pub use hessian::{Rank1, StructuredHessian};
pub use scv::{build_intensity_map, IntensityMap};
pub use ssim::{SsimConstants, SsimIntermediates};

use crate::error::{Error, Result};
use crate::image::Patch;
use stats::Centered;

/// Standard deviations below this are treated as a flat patch.
pub const FLAT_SIGMA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AmKind {
    Ssd,
    Ncc,
    Zncc,
    Scv,
    Rscv,
    Ssim,
    Spss,
}

impl AmKind {
    pub const ALL: [AmKind; 7] = [
        AmKind::Ssd,
        AmKind::Ncc,
        AmKind::Zncc,
        AmKind::Scv,
        AmKind::Rscv,
        AmKind::Ssim,
        AmKind::Spss,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AmKind::Ssd => "ssd",
            AmKind::Ncc => "ncc",
            AmKind::Zncc => "zncc",
            AmKind::Scv => "scv",
            AmKind::Rscv => "rscv",
            AmKind::Ssim => "ssim",
            AmKind::Spss => "spss",
        }
    }

    /// `f(A, B) == f(B, A)`.
    pub fn is_symmetric(self) -> bool {
        !matches!(self, AmKind::Scv | AmKind::Rscv)
    }

    pub fn min_len(self) -> usize {
        match self {
            AmKind::Ssd | AmKind::Spss | AmKind::Scv | AmKind::Rscv => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for AmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AmKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown appearance model '{s}'")))
    }
}

/// Which patch a derivative is taken with respect to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Template,
    Candidate,
}

/// Value, candidate-side gradient and second derivative at one patch pair.
#[derive(Clone, Debug)]
pub struct SimilarityBundle {
    pub f: f64,
    pub dfdi: Vec<f64>,
    pub d2fdi2: StructuredHessian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AppearanceModel {
    kind: AmKind,
    constants: SsimConstants,
}

impl AppearanceModel {
    pub fn new(kind: AmKind) -> Self {
        Self {
            kind,
            constants: SsimConstants::default(),
        }
    }

    pub fn with_constants(kind: AmKind, constants: SsimConstants) -> Self {
        Self { kind, constants }
    }

    pub fn kind(&self) -> AmKind {
        self.kind
    }

    pub fn constants(&self) -> &SsimConstants {
        &self.constants
    }

    fn check(&self, template: &[f64], candidate: &[f64]) -> Result<()> {
        if template.len() != candidate.len() {
            return Err(Error::invalid(format!(
                "patch sizes differ: {} vs {}",
                template.len(),
                candidate.len()
            )));
        }
        if candidate.len() < self.kind.min_len() {
            return Err(Error::invalid(format!(
                "{} needs at least {} pixels",
                self.kind,
                self.kind.min_len()
            )));
        }
        Ok(())
    }

    pub fn similarity(&self, template: &[f64], candidate: &[f64]) -> Result<f64> {
        self.check(template, candidate)?;
        Ok(self.similarity_unchecked(template, candidate))
    }

    pub(crate) fn similarity_unchecked(&self, template: &[f64], candidate: &[f64]) -> f64 {
        match self.kind {
            AmKind::Ssd => -template
                .iter()
                .zip(candidate)
                .map(|(o, t)| (t - o) * (t - o))
                .sum::<f64>(),
            AmKind::Ncc => ncc_value(template, candidate),
            AmKind::Zncc => {
                let zt = zscore(candidate);
                let z0 = zscore(template);
                -zt.iter()
                    .zip(&z0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            }
            AmKind::Scv | AmKind::Rscv => -scv::residual(self.kind, template, candidate)
                .iter()
                .map(|r| r * r)
                .sum::<f64>(),
            AmKind::Ssim => SsimIntermediates::new(template, candidate, &self.constants).f,
            AmKind::Spss => ssim::spss_value(template, candidate, &self.constants),
        }
    }

    pub fn gradient(&self, template: &[f64], candidate: &[f64], wrt: Side) -> Result<Vec<f64>> {
        self.check(template, candidate)?;
        Ok(self.gradient_unchecked(template, candidate, wrt))
    }

    pub(crate) fn gradient_unchecked(
        &self,
        template: &[f64],
        candidate: &[f64],
        wrt: Side,
    ) -> Vec<f64> {
        if wrt == Side::Template && self.kind.is_symmetric() {
            return self.gradient_unchecked(candidate, template, Side::Candidate);
        }
        match self.kind {
            AmKind::Ssd => candidate
                .iter()
                .zip(template)
                .map(|(t, o)| -2.0 * (t - o))
                .collect(),
            AmKind::Ncc => ncc_gradient(template, candidate),
            AmKind::Zncc => {
                let scale = 2.0 * (candidate.len() as f64 - 1.0);
                ncc_gradient(template, candidate)
                    .into_iter()
                    .map(|g| g * scale)
                    .collect()
            }
            AmKind::Scv | AmKind::Rscv => {
                // The bin-mean terms sum to zero within each bin, so the
                // derivative is that of SSD with the substitution held fixed.
                let sign = if wrt == Side::Candidate { -2.0 } else { 2.0 };
                scv::residual(self.kind, template, candidate)
                    .into_iter()
                    .map(|r| sign * r)
                    .collect()
            }
            AmKind::Ssim => SsimIntermediates::new(template, candidate, &self.constants).gradient(),
            AmKind::Spss => ssim::spss_gradient(template, candidate, &self.constants),
        }
    }

    /// Exact candidate-side second derivative; available for SSIM and SPSS.
    pub fn hessian_full(&self, template: &[f64], candidate: &[f64]) -> Result<StructuredHessian> {
        self.check(template, candidate)?;
        match self.kind {
            AmKind::Ssim => {
                Ok(SsimIntermediates::new(template, candidate, &self.constants).hessian())
            }
            AmKind::Spss => Ok(ssim::spss_hessian(template, candidate, &self.constants)),
            AmKind::Ssd => Ok(StructuredHessian::scaled_identity(candidate.len(), -2.0)),
            k => Err(Error::invalid(format!(
                "full second derivative is not provided for {k}"
            ))),
        }
    }

    /// Second derivative at the perfect match `f(I, I)`.
    pub fn self_hessian(&self, values: &[f64]) -> Result<StructuredHessian> {
        self.check(values, values)?;
        Ok(self.self_hessian_unchecked(values))
    }

    pub(crate) fn self_hessian_unchecked(&self, values: &[f64]) -> StructuredHessian {
        let n = values.len();
        match self.kind {
            // The substitution is held fixed, as in the gradient.
            AmKind::Ssd | AmKind::Scv | AmKind::Rscv => StructuredHessian::scaled_identity(n, -2.0),
            AmKind::Ncc => ncc_self_hessian(values),
            AmKind::Zncc => ncc_self_hessian(values).scale(2.0 * (n as f64 - 1.0)),
            AmKind::Ssim => ssim::ssim_self_hessian(values, &self.constants),
            AmKind::Spss => ssim::spss_self_hessian(values, &self.constants),
        }
    }

    /// Value, candidate gradient and the candidate's Self Hessian.
    pub fn bundle(&self, template: &[f64], candidate: &[f64]) -> Result<SimilarityBundle> {
        self.check(template, candidate)?;
        Ok(SimilarityBundle {
            f: self.similarity_unchecked(template, candidate),
            dfdi: self.gradient_unchecked(template, candidate, Side::Candidate),
            d2fdi2: self.self_hessian_unchecked(candidate),
        })
    }

    /// Similarity rescaled so that the spread between a perfect match and an
    /// unrelated patch is of order one; used to temper particle weights.
    pub fn normalized(&self, f: f64, template: &[f64]) -> f64 {
        let n = template.len() as f64;
        match self.kind {
            AmKind::Ncc | AmKind::Ssim => f,
            AmKind::Spss => f / n,
            AmKind::Zncc => f / (2.0 * (n - 1.0)),
            AmKind::Ssd | AmKind::Scv | AmKind::Rscv => {
                let var = Centered::new(template).var.max(1.0);
                f / (2.0 * n * var)
            }
        }
    }
}

fn ncc_parts(template: &[f64], candidate: &[f64]) -> Option<(Centered, Centered, f64, f64)> {
    let t = Centered::new(candidate);
    let o = Centered::new(template);
    let at = t.sum_sq().sqrt();
    let ao = o.sum_sq().sqrt();
    let flat = FLAT_SIGMA * (candidate.len() as f64 - 1.0).sqrt();
    if at < flat || ao < flat {
        return None;
    }
    Some((t, o, at, ao))
}

fn ncc_value(template: &[f64], candidate: &[f64]) -> f64 {
    match ncc_parts(template, candidate) {
        None => 0.0,
        Some((t, o, at, ao)) => {
            t.values
                .iter()
                .zip(&o.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (at * ao)
        }
    }
}

fn ncc_gradient(template: &[f64], candidate: &[f64]) -> Vec<f64> {
    match ncc_parts(template, candidate) {
        None => vec![0.0; candidate.len()],
        Some((t, o, at, ao)) => {
            let f = t
                .values
                .iter()
                .zip(&o.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / (at * ao);
            t.values
                .iter()
                .zip(&o.values)
                .map(|(a, b)| b / (at * ao) - f * a / (at * at))
                .collect()
        }
    }
}

/// `-(1/A^2) I + (1/(N A^2)) 11^T + (1/A^4) I_c I_c^T` with `I_c` the centered
/// patch and `A = |I_c|`.
fn ncc_self_hessian(values: &[f64]) -> StructuredHessian {
    let n = values.len();
    let c = Centered::new(values);
    let a2 = c.sum_sq();
    if a2.sqrt() < FLAT_SIGMA * (n as f64 - 1.0).sqrt() {
        return StructuredHessian::zeros(n);
    }
    StructuredHessian::scaled_identity(n, -1.0 / a2)
        .with_rank1(1.0 / (n as f64 * a2), vec![1.0; n], vec![1.0; n])
        .with_rank1(1.0 / (a2 * a2), c.values.clone(), c.values)
}

fn zscore(v: &[f64]) -> Vec<f64> {
    let c = Centered::new(v);
    let sigma = c.var.sqrt();
    if sigma < FLAT_SIGMA {
        return vec![0.0; v.len()];
    }
    c.values.into_iter().map(|x| x / sigma).collect()
}

pub fn similarity(kind: AmKind, template: &Patch, candidate: &Patch) -> Result<f64> {
    AppearanceModel::new(kind).similarity(template.values(), candidate.values())
}

pub fn gradient(kind: AmKind, template: &Patch, candidate: &Patch, wrt: Side) -> Result<Vec<f64>> {
    AppearanceModel::new(kind).gradient(template.values(), candidate.values(), wrt)
}

pub fn hessian_full(
    kind: AmKind,
    template: &Patch,
    candidate: &Patch,
) -> Result<StructuredHessian> {
    AppearanceModel::new(kind).hessian_full(template.values(), candidate.values())
}

pub fn self_hessian(kind: AmKind, patch: &Patch) -> Result<StructuredHessian> {
    AppearanceModel::new(kind).self_hessian(patch.values())
}

/// `(I - mean) / sample_std`; flat patches map to zeros.
pub fn zscore_normalize(patch: &Patch) -> Result<Patch> {
    if patch.len() < 2 {
        return Err(Error::invalid("z-score needs at least two pixels"));
    }
    Patch::new(zscore(patch.values()), patch.coords().clone())
}
