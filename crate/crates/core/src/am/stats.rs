/// Patch statistics with the sample (N - 1) divisor.
pub(crate) struct Centered {
    pub mean: f64,
    pub var: f64,
    pub values: Vec<f64>,
}

impl Centered {
    pub fn new(v: &[f64]) -> Self {
        let mean = mean(v);
        let values: Vec<f64> = v.iter().map(|x| x - mean).collect();
        let var = values.iter().map(|x| x * x).sum::<f64>() / (v.len() as f64 - 1.0);
        Self { mean, var, values }
    }

    pub fn covariance(&self, other: &Centered) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / (self.values.len() as f64 - 1.0)
    }

    pub fn sum_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
