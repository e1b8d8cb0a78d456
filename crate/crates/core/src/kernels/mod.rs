//! Kernel evaluation, Gram matrices, centring and cross-centring.
//!
//! All statistics in this crate are built from the `2n x 2n` Gram matrix of a
//! split sample: indices `0..n` hold the first half, `n..2n` the second. The
//! split statistics only ever read the upper-right `n x n` block, and the
//! upper-right block of a cross-centred matrix depends only on the
//! upper-right block of its input, so the hot paths in [`crate::teststats`]
//! work on those blocks directly. The full-matrix operations here define the
//! semantics and back the oracle tests.

mod cholesky;

pub use cholesky::{cholesky_psd, cholesky_solve};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    /// `exp(-|x - y|^2 / (2 sigma^2))`
    Gaussian,
    /// `exp(-|x - y|_1 / sigma)`
    Laplace,
    /// `(1 + |x - y|^2 / (2 alpha sigma^2))^(-alpha)`
    RationalQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    Fixed(f64),
    /// Median Euclidean distance over all distinct pairs of the sample the
    /// kernel is evaluated on.
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub bandwidth: Bandwidth,
    /// Shape parameter; only read by [`KernelFamily::RationalQuadratic`].
    pub rq_alpha: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self::gaussian_median()
    }
}

impl KernelSpec {
    pub fn gaussian_median() -> Self {
        Self {
            family: KernelFamily::Gaussian,
            bandwidth: Bandwidth::MedianHeuristic,
            rq_alpha: 1.0,
        }
    }

    pub fn new(family: KernelFamily, bandwidth: Bandwidth) -> Self {
        Self {
            family,
            bandwidth,
            rq_alpha: 1.0,
        }
    }

    pub fn with_rq_alpha(mut self, alpha: f64) -> Self {
        self.rq_alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Bandwidth::Fixed(s) = self.bandwidth {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid(format!("bandwidth must be positive, got {s}")));
            }
        }
        if !(self.rq_alpha > 0.0 && self.rq_alpha.is_finite()) {
            return Err(invalid(format!(
                "rational-quadratic alpha must be positive, got {}",
                self.rq_alpha
            )));
        }
        Ok(())
    }

    /// Fix the bandwidth against the sample `x` (rows are samples).
    pub fn resolve(&self, x: &Matrix) -> Result<Kernel> {
        self.validate()?;
        let sigma = match self.bandwidth {
            Bandwidth::Fixed(s) => s,
            Bandwidth::MedianHeuristic => median_heuristic(x)?,
        };
        Ok(Kernel {
            family: self.family,
            sigma,
            rq_alpha: self.rq_alpha,
        })
    }
}

/// A kernel with a concrete bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    pub sigma: f64,
    pub rq_alpha: f64,
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            family: KernelFamily::Gaussian,
            sigma,
            rq_alpha: 1.0,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.family {
            KernelFamily::Gaussian => {
                (-squared_distance(x, y) / (2.0 * self.sigma * self.sigma)).exp()
            }
            KernelFamily::Laplace => {
                let l1: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
                (-l1 / self.sigma).exp()
            }
            KernelFamily::RationalQuadratic => {
                let a = self.rq_alpha;
                (1.0 + squared_distance(x, y) / (2.0 * a * self.sigma * self.sigma)).powf(-a)
            }
        }
    }

    /// `K[i, j] = k(a_i, b_j)` for the rows of `a` and `b`.
    pub fn cross_matrix(&self, a: &Matrix, b: &Matrix) -> Matrix {
        assert_eq!(a.cols(), b.cols(), "sample dimensions differ");
        let mut out = Matrix::zeros(a.rows(), b.rows());
        for i in 0..a.rows() {
            let xi = a.row(i);
            let dst = out.row_mut(i);
            for (j, d) in dst.iter_mut().enumerate() {
                *d = self.eval(xi, b.row(j));
            }
        }
        out
    }

    /// Symmetric Gram matrix of the rows of `x` (diagonal exactly 1).
    pub fn gram_matrix(&self, x: &Matrix) -> Matrix {
        let m = x.rows();
        let mut out = Matrix::zeros(m, m);
        for i in 0..m {
            out[(i, i)] = 1.0;
            for j in 0..i {
                let v = self.eval(x.row(i), x.row(j));
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }
}

#[inline]
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Median of the Euclidean distances over all unordered pairs of distinct
/// samples (rows of `x`). Zero distances count. Returns 1.0 when the median
/// is 0.
pub fn median_heuristic(x: &Matrix) -> Result<f64> {
    let m = x.rows();
    if m < 2 {
        return Err(invalid(format!(
            "median heuristic needs at least 2 samples, got {m}"
        )));
    }
    let mut dists = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        let xi = x.row(i);
        for j in 0..i {
            dists.push(squared_distance(xi, x.row(j)));
        }
    }
    // Squared distances share the ordering of distances; take roots last.
    let len = dists.len();
    let mid = len / 2;
    let (_, upper, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = upper.sqrt();
    let median = if len % 2 == 1 {
        upper
    } else {
        let lower = dists[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .sqrt();
        0.5 * (lower + upper)
    };
    Ok(if median > 0.0 { median } else { 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramState {
    Raw,
    Centred,
    CrossCentred,
}

/// A `2n x 2n` kernel matrix over a split sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: Matrix,
    n: usize,
    state: GramState,
}

impl GramMatrix {
    /// Wrap an existing square matrix of even size as a raw Gram matrix.
    pub fn from_raw(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid("gram matrix must be square"));
        }
        let m = entries.rows();
        if m < 2 || m % 2 == 1 {
            return Err(Error::Split(format!(
                "gram matrix dimension must be even and >= 2, got {m}"
            )));
        }
        Ok(Self {
            entries,
            n: m / 2,
            state: GramState::Raw,
        })
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_entries(self) -> Matrix {
        self.entries
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> GramState {
        self.state
    }

    /// Upper-right `n x n` block: first-half rows against second-half columns.
    pub fn off_diagonal_block(&self) -> Matrix {
        self.entries.block(0, self.n, self.n, self.n)
    }

    fn expect(&self, state: GramState) -> Result<()> {
        if self.state == state {
            Ok(())
        } else {
            Err(Error::WrongState {
                expected: state,
                found: self.state,
            })
        }
    }
}

/// Raw Gram matrix of the `2n` samples in `x` (rows).
pub fn gram(spec: &KernelSpec, x: &Matrix) -> Result<GramMatrix> {
    if x.rows() < 2 || x.rows() % 2 == 1 {
        return Err(Error::Split(format!(
            "need an even number (>= 2) of samples, got {}",
            x.rows()
        )));
    }
    if !x.all_finite() {
        return Err(invalid("sample contains non-finite values"));
    }
    let kernel = spec.resolve(x)?;
    GramMatrix::from_raw(kernel.gram_matrix(x))
}

/// Conventional centring `C K C` with `C = I - 11^T / m` over the full size.
pub fn centre(k: &GramMatrix) -> Result<GramMatrix> {
    k.expect(GramState::Raw)?;
    let mut entries = k.entries.clone();
    double_centre(&mut entries);
    Ok(GramMatrix {
        entries,
        n: k.n,
        state: GramState::Centred,
    })
}

/// Cross-centring `C_u K C_l`: rows are centred against the first-half rows,
/// columns against the second-half columns.
///
/// Afterwards every column sums to zero over rows `0..n`, and every row sums
/// to zero over columns `n..2n`.
pub fn cross_centre(k: &GramMatrix) -> Result<GramMatrix> {
    k.expect(GramState::Raw)?;
    let n = k.n;
    let m = 2 * n;
    let inv_n = 1.0 / n as f64;
    let src = &k.entries;

    // C_u K: subtract the first-half column means from the first n rows.
    let mut upper_means = vec![0.0; m];
    for a in 0..n {
        for (u, v) in upper_means.iter_mut().zip(src.row(a)) {
            *u += v;
        }
    }
    for u in &mut upper_means {
        *u *= inv_n;
    }
    let mut out = src.clone();
    for i in 0..n {
        for (o, u) in out.row_mut(i).iter_mut().zip(&upper_means) {
            *o -= u;
        }
    }
    // (C_u K) C_l: subtract each row's mean over the second-half columns.
    for i in 0..m {
        let row = out.row_mut(i);
        let mean = crate::matrix::pairwise_sum(&row[n..]) * inv_n;
        for v in &mut row[n..] {
            *v -= mean;
        }
    }
    Ok(GramMatrix {
        entries: out,
        n,
        state: GramState::CrossCentred,
    })
}

/// In-place `C B C` for a square block: subtract row and column means, add
/// back the grand mean.
///
/// On the upper-right block of a Gram matrix this is exactly the upper-right
/// block of [`cross_centre`].
pub fn double_centre(b: &mut Matrix) {
    assert!(b.is_square());
    let n = b.rows();
    if n == 0 {
        return;
    }
    let inv = 1.0 / n as f64;
    let row_means: Vec<f64> = b.row_sums().into_iter().map(|s| s * inv).collect();
    let col_means: Vec<f64> = b.col_sums().into_iter().map(|s| s * inv).collect();
    let grand = crate::matrix::pairwise_sum(&row_means) * inv;
    for (i, rm) in row_means.iter().enumerate() {
        let shift = grand - rm;
        for (v, cm) in b.row_mut(i).iter_mut().zip(&col_means) {
            *v += shift - cm;
        }
    }
}
