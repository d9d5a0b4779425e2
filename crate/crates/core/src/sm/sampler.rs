//! Random warps near the identity.

use nalgebra::{Matrix3, Point2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::ssm::{CornersBox, Ssm, WarpParams};

const MAX_RETRIES: usize = 10;

/// Zero-mean Gaussian perturbations drawn per parameter.
///
/// Parameters are perturbed in a frame centred on the box, so rotations and
/// scalings act about the object rather than the image origin. Each
/// parameter's standard deviation is chosen so that perturbing it alone moves
/// the box corners by `scale_px` (RMS over the four corners).
#[derive(Clone, Debug)]
pub struct WarpSampler {
    ssm: Ssm,
    centered: Ssm,
    shift: Matrix3<f64>,
    unshift: Matrix3<f64>,
    sigma: Vec<f64>,
}

impl WarpSampler {
    pub fn new(ssm: &Ssm, scale_px: f64) -> Result<Self> {
        if !(scale_px >= 0.0 && scale_px.is_finite()) {
            return Err(Error::invalid(
                "sampler scale must be a non-negative number",
            ));
        }
        let c = ssm.base().centroid();
        let moved = ssm.base().points().map(|p| Point2::from(p - c));
        let centered = Ssm::new(ssm.kind(), CornersBox::new(moved));
        let jac = centered.warp_jacobian_raw(&centered.identity(), &moved)?;
        let sigma = (0..ssm.dof())
            .map(|i| {
                let ms = (0..4)
                    .map(|k| jac.dx(k, i).powi(2) + jac.dy(k, i).powi(2))
                    .sum::<f64>()
                    / 4.0;
                if ms > 0.0 {
                    scale_px / ms.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let shift = Matrix3::new(1.0, 0.0, c.x, 0.0, 1.0, c.y, 0.0, 0.0, 1.0);
        let unshift = Matrix3::new(1.0, 0.0, -c.x, 0.0, 1.0, -c.y, 0.0, 0.0, 1.0);
        Ok(Self {
            ssm: ssm.clone(),
            centered,
            shift,
            unshift,
            sigma,
        })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// The warp whose centred-frame parameters are `sigma * z`.
    pub fn warp_for(&self, z: &[f64]) -> Result<WarpParams> {
        let delta: Vec<f64> = z.iter().zip(&self.sigma).map(|(z, s)| z * s).collect();
        let local = self
            .centered
            .matrix(&self.centered.identity().offset(&delta)?)?;
        let p = self
            .ssm
            .params_from_matrix(&(self.shift * local * self.unshift))?;
        self.ssm.corners(&p)?.check_non_degenerate()?;
        Ok(p)
    }

    /// A random warp; degenerate draws are redrawn, and the identity is
    /// returned if every retry fails.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> WarpParams {
        for _ in 0..=MAX_RETRIES {
            let z: Vec<f64> = (0..self.sigma.len())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            if let Ok(p) = self.warp_for(&z) {
                return p;
            }
        }
        self.ssm.identity()
    }
}
