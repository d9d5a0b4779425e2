//! Conditional-variance appearance models.
//!
//! Both models compare the patches after replacing one of them with its
//! conditional expectation given the other, estimated from the joint
//! histogram of rounded intensities. The substitution keeps each pixel's
//! offset from its bin mean, which makes it exact for identical patches and
//! reduces to a plain table lookup on integer-valued data.

use super::AmKind;

pub const BINS: usize = 256;

#[inline]
pub fn bin_of(v: f64) -> usize {
    v.round().clamp(0.0, (BINS - 1) as f64) as usize
}

/// Expected target intensity per source bin.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensityMap {
    table: Vec<f64>,
    source_mean: Vec<f64>,
}

impl IntensityMap {
    /// Maps bins of `source` to the conditional mean of `target`. Empty bins map
    /// to their own center.
    pub fn build(source: &[f64], target: &[f64]) -> Self {
        let mut count = vec![0usize; BINS];
        let mut target_sum = vec![0.0; BINS];
        let mut source_sum = vec![0.0; BINS];
        for (&s, &t) in source.iter().zip(target) {
            let b = bin_of(s);
            count[b] += 1;
            target_sum[b] += t;
            source_sum[b] += s;
        }
        let mut table = vec![0.0; BINS];
        let mut source_mean = vec![0.0; BINS];
        for b in 0..BINS {
            if count[b] == 0 {
                table[b] = b as f64;
                source_mean[b] = b as f64;
            } else {
                table[b] = target_sum[b] / count[b] as f64;
                source_mean[b] = source_sum[b] / count[b] as f64;
            }
        }
        Self { table, source_mean }
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Expected target intensity for a source intensity `v`.
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        let b = bin_of(v);
        self.table[b] + (v - self.source_mean[b])
    }
}

/// SCV maps template bins to candidate expectations; RSCV the reverse.
pub fn build_intensity_map(kind: AmKind, template: &[f64], candidate: &[f64]) -> IntensityMap {
    match kind {
        AmKind::Rscv => IntensityMap::build(candidate, template),
        _ => IntensityMap::build(template, candidate),
    }
}

/// Residual `candidate - template` after substitution.
pub fn residual(kind: AmKind, template: &[f64], candidate: &[f64]) -> Vec<f64> {
    let map = build_intensity_map(kind, template, candidate);
    match kind {
        AmKind::Rscv => candidate
            .iter()
            .zip(template)
            .map(|(&t, &o)| map.apply(t) - o)
            .collect(),
        _ => candidate
            .iter()
            .zip(template)
            .map(|(&t, &o)| t - map.apply(o))
            .collect(),
    }
}
