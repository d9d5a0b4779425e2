use nalgebra::DMatrix;

/// `scale * u * v^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rank1 {
    pub scale: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// N x N second derivative kept as a diagonal plus a short list of outer
/// products, so that `G^T H G` never needs the dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct StructuredHessian {
    n: usize,
    diag: Option<Vec<f64>>,
    rank1: Vec<Rank1>,
}

impl StructuredHessian {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            diag: None,
            rank1: Vec::new(),
        }
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::from_diag(vec![s; n])
    }

    pub fn from_diag(diag: Vec<f64>) -> Self {
        Self {
            n: diag.len(),
            diag: Some(diag),
            rank1: Vec::new(),
        }
    }

    pub fn with_rank1(mut self, scale: f64, u: Vec<f64>, v: Vec<f64>) -> Self {
        debug_assert_eq!(u.len(), self.n);
        debug_assert_eq!(v.len(), self.n);
        self.rank1.push(Rank1 { scale, u, v });
        self
    }

    /// Adds `scale * (u v^T + v u^T)`.
    pub fn with_symmetric_pair(self, scale: f64, u: Vec<f64>, v: Vec<f64>) -> Self {
        self.with_rank1(scale, u.clone(), v.clone())
            .with_rank1(scale, v, u)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> Option<&[f64]> {
        self.diag.as_deref()
    }

    pub fn rank1_terms(&self) -> &[Rank1] {
        &self.rank1
    }

    pub fn scale(mut self, s: f64) -> Self {
        if let Some(d) = self.diag.as_mut() {
            d.iter_mut().for_each(|v| *v *= s);
        }
        self.rank1.iter_mut().for_each(|r| r.scale *= s);
        self
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        if let Some(d) = &self.diag {
            for (i, v) in d.iter().enumerate() {
                m[(i, i)] += v;
            }
        }
        for r in &self.rank1 {
            for i in 0..self.n {
                let ui = r.scale * r.u[i];
                if ui == 0.0 {
                    continue;
                }
                for j in 0..self.n {
                    m[(i, j)] += ui * r.v[j];
                }
            }
        }
        m
    }

    /// `G^T H G` for an `N x S` matrix `G`, computed factor by factor.
    pub fn project(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(g.nrows(), self.n);
        let s = g.ncols();
        let mut out = DMatrix::zeros(s, s);
        if let Some(d) = &self.diag {
            for k in 0..self.n {
                let dk = d[k];
                if dk == 0.0 {
                    continue;
                }
                for a in 0..s {
                    let ga = dk * g[(k, a)];
                    for b in 0..s {
                        out[(a, b)] += ga * g[(k, b)];
                    }
                }
            }
        }
        for r in &self.rank1 {
            let gu = g.tr_mul(&DMatrix::from_column_slice(self.n, 1, &r.u));
            let gv = g.tr_mul(&DMatrix::from_column_slice(self.n, 1, &r.v));
            out += r.scale * &gu * gv.transpose();
        }
        out
    }
}

impl std::ops::Add for StructuredHessian {
    type Output = StructuredHessian;

    fn add(mut self, rhs: StructuredHessian) -> StructuredHessian {
        assert_eq!(self.n, rhs.n);
        self.diag = match (self.diag.take(), rhs.diag) {
            (Some(a), Some(b)) => Some(a.iter().zip(&b).map(|(x, y)| x + y).collect()),
            (a, b) => a.or(b),
        };
        self.rank1.extend(rhs.rank1);
        self
    }
}
