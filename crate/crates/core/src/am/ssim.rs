//! Structural similarity over the whole patch and its pixelwise variant.

use super::hessian::StructuredHessian;
use super::stats::Centered;

/// Stabilizing constants; the defaults are the usual 8-bit values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SsimConstants {
    pub k1: f64,
    pub k2: f64,
    pub l: f64,
}

impl Default for SsimConstants {
    fn default() -> Self {
        Self {
            k1: 0.01,
            k2: 0.03,
            l: 255.0,
        }
    }
}

impl SsimConstants {
    pub fn c1(&self) -> f64 {
        (self.k1 * self.l).powi(2)
    }

    pub fn c2(&self) -> f64 {
        (self.k2 * self.l).powi(2)
    }

    /// Structure-term constant; cancels against the contrast term with unit exponents.
    pub fn c3(&self) -> f64 {
        self.c2() / 2.0
    }
}

/// Everything the SSIM value and derivatives are built from.
#[derive(Clone, Debug)]
pub struct SsimIntermediates {
    pub n: usize,
    pub mu_t: f64,
    pub mu_0: f64,
    pub var_t: f64,
    pub var_0: f64,
    pub cov: f64,
    pub centered_t: Vec<f64>,
    pub centered_0: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub f: f64,
}

impl SsimIntermediates {
    pub fn new(template: &[f64], candidate: &[f64], k: &SsimConstants) -> Self {
        let n = candidate.len();
        let t = Centered::new(candidate);
        let o = Centered::new(template);
        let cov = t.covariance(&o);
        let (c1, c2) = (k.c1(), k.c2());
        let a = 2.0 * t.mean * o.mean + c1;
        let b = 2.0 * cov + c2;
        let c = t.mean * t.mean + o.mean * o.mean + c1;
        let d = t.var + o.var + c2;
        Self {
            n,
            mu_t: t.mean,
            mu_0: o.mean,
            var_t: t.var,
            var_0: o.var,
            cov,
            centered_t: t.values,
            centered_0: o.values,
            a,
            b,
            c,
            d,
            f: (a * b) / (c * d),
        }
    }

    /// `df/dI_t`.
    pub fn gradient(&self) -> Vec<f64> {
        let n = self.n as f64;
        let scale = 2.0 / (self.c * self.d);
        let constant = (self.mu_0 * self.b - self.mu_t * self.f * self.d) / n;
        self.centered_0
            .iter()
            .zip(&self.centered_t)
            .map(|(i0, it)| scale * ((self.a * i0 - self.c * self.f * it) / (n - 1.0) + constant))
            .collect()
    }

    /// Exact `d2f/dI_t^2`. Each cross term appears with its transpose so the
    /// represented matrix is symmetric.
    pub fn hessian(&self) -> StructuredHessian {
        let n = self.n as f64;
        let nn = self.n;
        let (c, d, f) = (self.c, self.d, self.f);
        let s = 2.0 / (c * d);
        let g = self.gradient();
        let ones = vec![1.0; nn];
        let it = self.centered_t.clone();
        let i0 = self.centered_0.clone();

        StructuredHessian::scaled_identity(nn, -s * c * f / (n - 1.0))
            .with_rank1(
                s * (c * f / (n * (n - 1.0)) - f * d / (n * n)),
                ones.clone(),
                ones.clone(),
            )
            .with_symmetric_pair(s * 2.0 * self.mu_0 / (n * (n - 1.0)), i0, ones.clone())
            .with_symmetric_pair(
                -s * 2.0 * f * self.mu_t / (n * (n - 1.0)),
                it.clone(),
                ones.clone(),
            )
            .with_symmetric_pair(-s * c / (n - 1.0), it, g.clone())
            .with_symmetric_pair(-s * self.mu_t * d / n, ones, g)
    }
}

/// Self Hessian `d2f(I, I)/dI^2`: a scaled identity plus a constant matrix.
pub fn ssim_self_hessian(values: &[f64], k: &SsimConstants) -> StructuredHessian {
    let n = values.len() as f64;
    let c = Centered::new(values);
    let c_bar = 2.0 * c.mean * c.mean + k.c1();
    let d_bar = 2.0 * c.var + k.c2();
    let s = -2.0 / (c_bar * d_bar);
    StructuredHessian::scaled_identity(values.len(), s * c_bar / (n - 1.0)).with_rank1(
        s * (d_bar / (n * n) - c_bar / (n * (n - 1.0))),
        vec![1.0; values.len()],
        vec![1.0; values.len()],
    )
}

#[inline]
fn spss_term(t: f64, o: f64, c1: f64) -> (f64, f64) {
    let den = t * t + o * o + c1;
    ((2.0 * t * o + c1) / den, den)
}

pub fn spss_value(template: &[f64], candidate: &[f64], k: &SsimConstants) -> f64 {
    let c1 = k.c1();
    template
        .iter()
        .zip(candidate)
        .map(|(&o, &t)| spss_term(t, o, c1).0)
        .sum()
}

pub fn spss_gradient(template: &[f64], candidate: &[f64], k: &SsimConstants) -> Vec<f64> {
    let c1 = k.c1();
    template
        .iter()
        .zip(candidate)
        .map(|(&o, &t)| {
            let (f, den) = spss_term(t, o, c1);
            2.0 * (o - t * f) / den
        })
        .collect()
}

/// Diagonal second derivative of SPSS with respect to the candidate.
pub fn spss_hessian(template: &[f64], candidate: &[f64], k: &SsimConstants) -> StructuredHessian {
    let c1 = k.c1();
    StructuredHessian::from_diag(
        template
            .iter()
            .zip(candidate)
            .map(|(&o, &t)| {
                let (f, den) = spss_term(t, o, c1);
                let fp = 2.0 * (o - t * f) / den;
                -2.0 * (f + 2.0 * t * fp) / den
            })
            .collect(),
    )
}

pub fn spss_self_hessian(values: &[f64], k: &SsimConstants) -> StructuredHessian {
    let c1 = k.c1();
    StructuredHessian::from_diag(values.iter().map(|&v| -2.0 / (2.0 * v * v + c1)).collect())
}
