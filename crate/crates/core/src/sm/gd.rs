//! Lucas-Kanade variants and ESM.
//!
//! Each iteration linearizes the similarity around the current warp,
//! `J = df/dI * dI/dp` and `H = (dI/dp)^T * S * (dI/dp)` with `S` a Self
//! Hessian, and takes the Newton step `-H^-1 J^T`. The variants differ in
//! which image the steepest-descent images come from and in how the step is
//! folded back into the warp.

use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix2, Point2, Vector2};

use super::{
    corner_change, max_corner_move, newton_step, FrameFlags, FrameOutcome, Template, Tracker,
};
use crate::am::{AmKind, AppearanceModel, Side};
use crate::error::{Error, Result};
use crate::image::{extract_values, gradients_at, GrayImage, DEFAULT_GRADIENT_STEP};
use crate::ssm::{homog, CornersBox, Ssm, SsmKind, WarpParams};

#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub max_iters: usize,
    /// Iteration stops once the corners move less than this (L2 over all
    /// eight coordinates, pixels).
    pub stop_norm: f64,
    /// A single step may not move any corner further than this; larger steps
    /// are halved until they comply.
    pub max_corner_step: f64,
    /// Use `-2 G^T G`; only meaningful for SSD, where it equals the Self Hessian.
    pub gauss_newton: bool,
}

impl Default for GdConfig {
    fn default() -> Self {
        Self {
            max_iters: 30,
            stop_norm: 1e-4,
            max_corner_step: 50.0,
            gauss_newton: false,
        }
    }
}

impl GdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.stop_norm > 0.0 && self.stop_norm.is_finite()) {
            return Err(Error::Config("stop_norm must be positive".into()));
        }
        if !(self.max_corner_step > 0.0) {
            return Err(Error::Config("max_corner_step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GdVariant {
    Fclk,
    Iclk,
    Falk,
    Ialk,
    Esm,
}

impl GdVariant {
    pub fn name(self) -> &'static str {
        match self {
            GdVariant::Fclk => "fclk",
            GdVariant::Iclk => "iclk",
            GdVariant::Falk => "falk",
            GdVariant::Ialk => "ialk",
            GdVariant::Esm => "esm",
        }
    }

    fn uses_template_side(self) -> bool {
        matches!(self, GdVariant::Iclk | GdVariant::Esm)
    }
}

impl fmt::Display for GdVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Local quadratic model of the similarity in the step parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Linearization {
    pub value: f64,
    pub jacobian: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Clone, Debug)]
struct GdState {
    template: Template,
    params: WarpParams,
    corners: CornersBox,
    /// `dw(x0, p)/dp` at the identity, `2N x S`.
    identity_jacobian: DMatrix<f64>,
    /// `grad I0(x0)` on the template grid.
    template_gradient: Vec<Vector2<f64>>,
    /// `grad I0 * dw/dp` at the identity and its projected Self Hessian;
    /// fixed for the life of the template.
    template_sd: Option<DMatrix<f64>>,
    template_hessian: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug)]
pub struct GdTracker {
    variant: GdVariant,
    am: AppearanceModel,
    kind: SsmKind,
    resolution: (usize, usize),
    cfg: GdConfig,
    state: Option<GdState>,
}

fn gradients(img: &GrayImage, pts: &[Point2<f64>]) -> Vec<Vector2<f64>> {
    gradients_at(img, pts, DEFAULT_GRADIENT_STEP)
}

/// Steepest-descent images: row `k` is `g_k^T * dw(x_k)/dp`.
fn steepest_descent(grads: &[Vector2<f64>], jw: &DMatrix<f64>) -> DMatrix<f64> {
    let s = jw.ncols();
    DMatrix::from_fn(grads.len(), s, |k, i| {
        grads[k].x * jw[(2 * k, i)] + grads[k].y * jw[(2 * k + 1, i)]
    })
}

fn row_times(g: &[f64], sd: &DMatrix<f64>) -> DVector<f64> {
    sd.tr_mul(&DVector::from_column_slice(g))
}

impl GdTracker {
    pub fn new(
        variant: GdVariant,
        am: AppearanceModel,
        kind: SsmKind,
        resolution: (usize, usize),
        cfg: GdConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if cfg.gauss_newton && am.kind() != AmKind::Ssd {
            return Err(Error::Config(format!(
                "the Gauss-Newton Hessian is only available for ssd, not {}",
                am.kind()
            )));
        }
        Ok(Self {
            variant,
            am,
            kind,
            resolution,
            cfg,
            state: None,
        })
    }

    pub fn variant(&self) -> GdVariant {
        self.variant
    }

    pub fn config(&self) -> &GdConfig {
        &self.cfg
    }

    pub fn template(&self) -> Option<&Template> {
        self.state.as_ref().map(|s| &s.template)
    }

    /// Cached template-side steepest-descent images and Hessian (ICLK, ESM).
    pub fn template_cache(&self) -> Option<(&DMatrix<f64>, &DMatrix<f64>)> {
        let st = self.state.as_ref()?;
        Some((st.template_sd.as_ref()?, st.template_hessian.as_ref()?))
    }

    fn state(&self) -> Result<&GdState> {
        self.state
            .as_ref()
            .ok_or_else(|| Error::invalid("tracker used before initialization"))
    }

    fn projected(&self, patch: &[f64], sd: &DMatrix<f64>) -> DMatrix<f64> {
        if self.cfg.gauss_newton {
            return sd.tr_mul(sd) * -2.0;
        }
        self.am.self_hessian_unchecked(patch).project(sd)
    }

    /// Quadratic model of the similarity around the current warp for `frame`.
    pub fn linearize(&self, frame: &GrayImage) -> Result<Linearization> {
        let st = self.state()?;
        let ssm = st.template.ssm();
        let p = &st.params;
        let m = ssm.matrix(p)?;
        let grid = st.template.grid();
        let pts = grid
            .iter()
            .map(|x| homog::apply(&m, *x))
            .collect::<Result<Vec<_>>>()?;
        let it = extract_values(frame, &pts);
        let i0 = st.template.values();
        let value = self.am.similarity_unchecked(i0, &it);

        // Forward compositional: gradient of the warped frame at x0, pushed
        // through dw/dp at the identity.
        let forward = |this: &Self| -> (DVector<f64>, DMatrix<f64>) {
            let warped: Vec<Vector2<f64>> = gradients(frame, &pts)
                .into_iter()
                .zip(grid)
                .map(|(g, x)| Ssm::point_jacobian(&m, *x).transpose() * g)
                .collect();
            let sd = steepest_descent(&warped, &st.identity_jacobian);
            let dfdi = this.am.gradient_unchecked(i0, &it, Side::Candidate);
            (row_times(&dfdi, &sd), this.projected(&it, &sd))
        };
        let inverse = || -> DVector<f64> {
            let sd = st.template_sd.as_ref().expect("template cache");
            let dfdi0 = self.am.gradient_unchecked(i0, &it, Side::Template);
            row_times(&dfdi0, sd)
        };

        let (jacobian, hessian) = match self.variant {
            GdVariant::Fclk => forward(self),
            GdVariant::Iclk => (
                inverse(),
                st.template_hessian.clone().expect("template cache"),
            ),
            GdVariant::Esm => {
                let (jf, hf) = forward(self);
                let ji = inverse();
                (
                    jf - ji,
                    hf + st.template_hessian.as_ref().expect("template cache"),
                )
            }
            GdVariant::Falk | GdVariant::Ialk => {
                let jw = ssm.warp_jacobian_raw(p, grid)?;
                let grads: Vec<Vector2<f64>> = if self.variant == GdVariant::Falk {
                    gradients(frame, &pts)
                } else {
                    // grad It(w) = grad I0 * (dw/dx)^-1 once aligned.
                    st.template_gradient
                        .iter()
                        .zip(grid)
                        .map(|(g, x)| {
                            let d: Matrix2<f64> = Ssm::point_jacobian(&m, *x);
                            let inv = d.try_inverse().unwrap_or_else(Matrix2::zeros);
                            inv.transpose() * g
                        })
                        .collect()
                };
                let sd = steepest_descent(&grads, jw.matrix());
                let dfdi = self.am.gradient_unchecked(i0, &it, Side::Candidate);
                (row_times(&dfdi, &sd), self.projected(&it, &sd))
            }
        };
        Ok(Linearization {
            value,
            jacobian,
            hessian,
        })
    }

    fn apply(&self, p: &WarpParams, dp: &[f64]) -> Result<WarpParams> {
        let ssm = self.state()?.template.ssm();
        match self.variant {
            GdVariant::Fclk | GdVariant::Esm => ssm.compose(p, &ssm.identity().offset(dp)?),
            GdVariant::Iclk => ssm.compose(p, &ssm.invert(&ssm.identity().offset(dp)?)?),
            GdVariant::Falk | GdVariant::Ialk => p.offset(dp),
        }
    }

    /// Applies `dp`, halving it until no corner moves further than the clamp.
    fn clamped_update(&self, dp: &DVector<f64>) -> Option<(WarpParams, CornersBox)> {
        let st = self.state.as_ref()?;
        let mut step = dp.clone();
        for _ in 0..40 {
            if let Ok(next) = self.apply(&st.params, step.as_slice()) {
                if let Ok(c) = st.template.ssm().corners(&next) {
                    if c.is_finite() && max_corner_move(&st.corners, &c) <= self.cfg.max_corner_step
                    {
                        return Some((next, c));
                    }
                }
            }
            step *= 0.5;
        }
        None
    }

    /// Iterates Newton steps on `frame` from the current warp.
    pub fn track(&mut self, frame: &GrayImage) -> Result<FrameOutcome> {
        let entry = {
            let st = self.state()?;
            (st.params.clone(), st.corners)
        };
        let mut flags = FrameFlags::default();
        let mut iterations = 0;
        for _ in 0..self.cfg.max_iters {
            let lin = match self.linearize(frame) {
                Ok(l) => l,
                Err(Error::Geometry(_)) => {
                    flags.lost_step = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            let dp = match newton_step(&lin.jacobian, &lin.hessian) {
                Ok(dp) => dp,
                Err(Error::Step(_)) => {
                    flags.lost_step = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            iterations += 1;
            let Some((next, corners)) = self.clamped_update(&dp) else {
                flags.lost_step = true;
                break;
            };
            let st = self.state.as_mut().expect("initialized");
            let change = corner_change(&st.corners, &corners);
            st.params = next;
            st.corners = corners;
            if change < self.cfg.stop_norm {
                break;
            }
        }
        let st = self.state.as_mut().expect("initialized");
        if flags.lost_step {
            st.params = entry.0;
            st.corners = entry.1;
        }
        Ok(FrameOutcome {
            params: st.params.clone(),
            corners: st.corners,
            iterations,
            flags,
        })
    }
}

impl Tracker for GdTracker {
    fn initialize(&mut self, frame: &GrayImage, corners: &CornersBox) -> Result<()> {
        let template = Template::new(self.kind, frame, corners, self.resolution)?;
        let ssm = template.ssm();
        let identity = ssm.identity();
        let identity_jacobian = ssm
            .warp_jacobian_raw(&identity, template.grid())?
            .matrix()
            .clone();
        let template_gradient = gradients(frame, template.grid());
        let (template_sd, template_hessian) = if self.variant.uses_template_side() {
            let sd = steepest_descent(&template_gradient, &identity_jacobian);
            let h = self.projected(template.values(), &sd);
            (Some(sd), Some(h))
        } else {
            (None, None)
        };
        self.state = Some(GdState {
            params: identity,
            corners: *corners,
            template,
            identity_jacobian,
            template_gradient,
            template_sd,
            template_hessian,
        });
        Ok(())
    }

    fn update(&mut self, frame: &GrayImage) -> Result<FrameOutcome> {
        self.track(frame)
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
