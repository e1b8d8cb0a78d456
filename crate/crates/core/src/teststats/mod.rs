//! Normalised split-sample interaction statistics.
//!
//! Every statistic here is asymptotically `N(0, 1)` under its null, so a
//! subtest is a comparison against a normal quantile: no permutations.
//!
//! Internally each variable is represented by two `n x n` matrices: the raw
//! cross block `K[0..n, n..2n]` and its double-centred version, which equals
//! the upper-right block of the cross-centred Gram matrix. Nothing else of the
//! `2n x 2n` matrices is read by any statistic.
//!
//! The joint-independence variance singles out variable 1 in one of its terms,
//! so that statistic's *denominator* (not its numerator) depends on variable
//! order.

mod normal;

pub use normal::{ks_test_std_normal, std_normal_cdf, std_normal_quantile, std_normal_sf, KsResult};

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::kernels::{cross_centre, double_centre, GramMatrix, GramState, KernelSpec};
use crate::matrix::{pairwise_sum, Matrix};
use crate::partitions::Bipartition;

/// Relative variance floor below which a statistic is reported as degenerate.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Per-variable kernel blocks of a split sample.
#[derive(Debug, Clone)]
pub struct SplitKernels {
    /// `C B C` for each raw cross block `B`.
    centred: Vec<Matrix>,
    /// Raw cross blocks `K^j[0..n, n..2n]`.
    raw: Vec<Matrix>,
    /// Largest absolute entry of each raw and centred block.
    raw_max: Vec<f64>,
    centred_max: Vec<f64>,
    n: usize,
}

impl SplitKernels {
    /// Evaluate one kernel spec per variable on the first `2n` samples, where
    /// `n = floor(n_total / 2)`. Median bandwidths use all `2n` samples.
    pub fn from_dataset(data: &Dataset, spec: &KernelSpec) -> Result<Self> {
        let specs = vec![*spec; data.d()];
        Self::from_dataset_with(data, &specs)
    }

    /// As [`SplitKernels::from_dataset`] with a separate spec per variable.
    pub fn from_dataset_with(data: &Dataset, specs: &[KernelSpec]) -> Result<Self> {
        if specs.len() != data.d() {
            return Err(Error::DimensionMismatch {
                expected: data.d(),
                got: specs.len(),
            });
        }
        let n = data.half_size()?;
        let mut raw = Vec::with_capacity(data.d());
        for (x, spec) in data.variables().iter().zip(specs) {
            let x = x.row_range(0, 2 * n);
            let kernel = spec.resolve(&x)?;
            let first = x.row_range(0, n);
            let second = x.row_range(n, 2 * n);
            raw.push(kernel.cross_matrix(&first, &second));
        }
        Self::from_blocks(raw)
    }

    /// Build from raw `2n x 2n` Gram matrices, cross-centring each in full.
    pub fn from_grams(grams: &[GramMatrix]) -> Result<Self> {
        let n = grams.first().ok_or_else(|| invalid("no gram matrices"))?.n();
        let mut centred = Vec::with_capacity(grams.len());
        let mut raw = Vec::with_capacity(grams.len());
        for g in grams {
            if g.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: 2 * n,
                    got: 2 * g.n(),
                });
            }
            raw.push(g.off_diagonal_block());
            centred.push(cross_centre(g)?.off_diagonal_block());
        }
        Ok(Self::assemble(centred, raw, n))
    }

    /// Build from raw `n x n` cross blocks.
    pub fn from_blocks(raw: Vec<Matrix>) -> Result<Self> {
        let n = raw.first().ok_or_else(|| invalid("no kernel blocks"))?.rows();
        if n < 2 {
            return Err(Error::Split(format!("half size must be >= 2, got {n}")));
        }
        for b in &raw {
            if b.rows() != n || b.cols() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: if b.rows() != n { b.rows() } else { b.cols() },
                });
            }
            if !b.all_finite() {
                return Err(invalid("kernel block contains non-finite values"));
            }
        }
        let centred = raw
            .iter()
            .map(|b| {
                let mut c = b.clone();
                double_centre(&mut c);
                c
            })
            .collect();
        Ok(Self::assemble(centred, raw, n))
    }

    pub fn d(&self) -> usize {
        self.raw.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn raw_blocks(&self) -> &[Matrix] {
        &self.raw
    }

    pub fn centred_blocks(&self) -> &[Matrix] {
        &self.centred
    }

    /// The kernels of the given (0-based) variables, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("empty variable subset"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.d()) {
            return Err(invalid(format!("variable index {bad} outside 0..{}", self.d())));
        }
        Ok(Self {
            centred: indices.iter().map(|&i| self.centred[i].clone()).collect(),
            raw: indices.iter().map(|&i| self.raw[i].clone()).collect(),
            raw_max: indices.iter().map(|&i| self.raw_max[i]).collect(),
            centred_max: indices.iter().map(|&i| self.centred_max[i]).collect(),
            n: self.n,
        })
    }

    fn assemble(centred: Vec<Matrix>, raw: Vec<Matrix>, n: usize) -> Self {
        Self {
            raw_max: raw.iter().map(Matrix::max_abs).collect(),
            centred_max: centred.iter().map(Matrix::max_abs).collect(),
            centred,
            raw,
            n,
        }
    }

    /// Scale of the degeneracy floor for products of centred blocks.
    ///
    /// Centring one block cancels terms of its raw size, so its rounding error
    /// is relative to `max|raw_j|` and enters the product multiplied by the
    /// other centred blocks. The largest such term bounds the rounding noise
    /// of the summands. A constant kernel therefore stays degenerate, while
    /// legitimately small high-order products (many centred factors below 1)
    /// are not mistaken for rounding noise.
    fn centred_product_scale(&self, vars: &[usize]) -> f64 {
        vars.iter()
            .map(|&j| {
                self.raw_max[j]
                    * vars.iter().filter(|&&l| l != j).map(|&l| self.centred_max[l]).product::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// A normalised statistic together with its ingredients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedStatistic {
    /// `sqrt(n) * numerator / std`, or 0 when degenerate.
    pub value: f64,
    pub numerator: f64,
    /// Estimated standard deviation `s`.
    pub std: f64,
    pub degenerate: bool,
}

impl NormalizedStatistic {
    /// One-sided p-value `1 - Phi(value)`; exactly 1 for degenerate results.
    pub fn p_value(&self) -> f64 {
        if self.degenerate {
            1.0
        } else {
            std_normal_sf(self.value)
        }
    }

    /// Whether the statistic exceeds the `1 - alpha` normal quantile.
    pub fn rejects(&self, alpha: f64) -> Result<bool> {
        let z = std_normal_quantile(1.0 - alpha)?;
        Ok(!self.degenerate && self.value > z)
    }
}

/// Turn per-row contributions `g_i` (whose mean is `numerator`) into a
/// normalised statistic with `s^2 = mean((g_i - numerator)^2)`.
fn normalise(n: usize, numerator: f64, rows: &[f64], scale: f64) -> NormalizedStatistic {
    let dev: Vec<f64> = rows.iter().map(|g| (g - numerator) * (g - numerator)).collect();
    let var = (pairwise_sum(&dev) / rows.len() as f64).max(0.0);
    let std = var.sqrt();
    if !(var > VARIANCE_FLOOR * scale * scale) || !numerator.is_finite() {
        return NormalizedStatistic {
            value: 0.0,
            numerator,
            std,
            degenerate: true,
        };
    }
    NormalizedStatistic {
        value: (n as f64).sqrt() * numerator / std,
        numerator,
        std,
        degenerate: false,
    }
}

/// How the joint-independence statistic estimates its standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointVariance {
    /// Spread of the first-order projection of the numerator onto the
    /// first-half samples, holding the second half fixed. Every term of the
    /// numerator contributes its own linearisation, so the resulting statistic
    /// is approximately `N(0, 1)` under joint independence for any `d`.
    #[default]
    Projection,
    /// The closed-form five-term row vector: Hadamard row sums, block 1's row
    /// sums times the other blocks' totals, the row-sum product and the
    /// column-sum product. It singles out variable 1 and, for `d >= 3`,
    /// overestimates the spread by a factor of order `sqrt(n)`, which makes
    /// the test very conservative. Kept for comparison.
    Printed,
}

/// Normalised joint-independence statistic over all variables, using
/// [`JointVariance::Projection`].
///
/// The numerator is the squared distance between the embedding of the joint
/// distribution and the product of marginal embeddings, estimated across the
/// two halves; it is symmetric in the variables.
pub fn xdhsic(kernels: &SplitKernels) -> Result<NormalizedStatistic> {
    xdhsic_with(kernels, JointVariance::Projection)
}

/// [`xdhsic`] with an explicit variance estimator.
pub fn xdhsic_with(kernels: &SplitKernels, variance: JointVariance) -> Result<NormalizedStatistic> {
    let d = kernels.d();
    if d < 2 {
        return Err(invalid(format!("joint independence needs d >= 2, got {d}")));
    }
    let n = kernels.n;
    let nf = n as f64;
    let blocks = &kernels.raw;

    let mut product = blocks[0].clone();
    for b in &blocks[1..] {
        product.hadamard_assign(b);
    }
    let prod_rows = product.row_sums();
    // Normalised sums keep the n^{-2d} and n^{-d} factors from under/overflowing.
    let row_means: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| b.row_sums().into_iter().map(|s| s / nf).collect())
        .collect();
    let col_means: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| b.col_sums().into_iter().map(|s| s / nf).collect())
        .collect();
    let grand: Vec<f64> = row_means.iter().map(|r| pairwise_sum(r) / nf).collect();

    let row_prod: Vec<f64> = (0..n).map(|i| row_means.iter().map(|r| r[i]).product()).collect();
    let col_prod: Vec<f64> = (0..n).map(|i| col_means.iter().map(|c| c[i]).product()).collect();

    let t1 = pairwise_sum(&prod_rows) / (nf * nf);
    let t2: f64 = grand.iter().product();
    let t3 = pairwise_sum(&row_prod) / nf;
    let t4 = pairwise_sum(&col_prod) / nf;
    let numerator = t1 + t2 - t3 - t4;

    let rows: Vec<f64> = match variance {
        JointVariance::Printed => {
            let tail: f64 = grand[1..].iter().product();
            (0..n)
                .map(|i| prod_rows[i] / nf + row_means[0][i] * tail - row_prod[i] - col_prod[i])
                .collect()
        }
        JointVariance::Projection => {
            // Product-of-means terms are multilinear in the first-half means;
            // differentiate each factor in turn. Exclusion products are formed
            // directly so zero factors need no special casing.
            let others = |j: usize, v: &dyn Fn(usize) -> f64| -> f64 {
                (0..d).filter(|&l| l != j).map(v).product()
            };
            let mut rows: Vec<f64> = (0..n)
                .map(|i| prod_rows[i] / nf - row_prod[i] + (d as f64 - 1.0) * (t4 - t2))
                .collect();
            for j in 0..d {
                let grand_others = others(j, &|l| grand[l]);
                let weights: Vec<f64> = (0..n).map(|k| others(j, &|l| col_means[l][k])).collect();
                let mixed = blocks[j].matvec(&weights);
                for i in 0..n {
                    rows[i] += row_means[j][i] * grand_others - mixed[i] / nf;
                }
            }
            rows
        }
    };
    let scale = [t1, t2, t3, t4].iter().fold(0.0_f64, |m, t| m.max(t.abs()));
    Ok(normalise(n, numerator, &rows, scale))
}

/// `C (prod_{j in vars} centred_j) C` when `recentre`, else the bare product.
fn block_product(kernels: &SplitKernels, vars: &[usize], recentre: bool) -> Matrix {
    let mut out = kernels.centred[vars[0]].clone();
    for &j in &vars[1..] {
        out.hadamard_assign(&kernels.centred[j]);
    }
    if recentre {
        double_centre(&mut out);
    }
    out
}

/// Statistic for the element-wise product of two prepared blocks.
fn product_statistic(n: usize, left: &Matrix, right: &Matrix, scale: f64) -> NormalizedStatistic {
    let m = left.hadamard(right);
    let nf = n as f64;
    let rows: Vec<f64> = m.row_sums().into_iter().map(|s| s / nf).collect();
    let numerator = pairwise_sum(&rows) / nf;
    normalise(n, numerator, &rows, scale)
}

fn check_blocks(kernels: &SplitKernels, b1: &[usize], b2: &[usize]) -> Result<()> {
    let d = kernels.d();
    if b1.is_empty() || b2.is_empty() {
        return Err(invalid("both blocks must be nonempty"));
    }
    let mut seen = vec![false; d];
    for &j in b1.iter().chain(b2) {
        if j >= d {
            return Err(invalid(format!("variable index {j} outside 0..{d}")));
        }
        if seen[j] {
            return Err(invalid(format!("variable index {j} appears twice")));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Interaction statistic between two disjoint groups of (0-based) variables.
///
/// A singleton group enters as its centred kernel block; larger groups as the
/// re-centred Hadamard product of their members. The groups need not cover
/// every variable, which lets callers test `S | T` for any disjoint `S`, `T`.
pub fn bipartition_statistic(
    kernels: &SplitKernels,
    b1: &[usize],
    b2: &[usize],
) -> Result<NormalizedStatistic> {
    check_blocks(kernels, b1, b2)?;
    let left = block_product(kernels, b1, b1.len() > 1);
    let right = block_product(kernels, b2, b2.len() > 1);
    let vars: Vec<usize> = b1.iter().chain(b2).copied().collect();
    let scale = kernels.centred_product_scale(&vars);
    Ok(product_statistic(kernels.n, &left, &right, scale))
}

/// Lancaster-type subtest isolating variable `m` (1-based) from the rest.
///
/// The rest's product is always re-centred, including when it has a single
/// member (`d = 2`), where this reduces to [`xhsic_v`].
pub fn xli_subtest(kernels: &SplitKernels, m: usize) -> Result<NormalizedStatistic> {
    let d = kernels.d();
    if d < 2 {
        return Err(invalid(format!("need d >= 2, got {d}")));
    }
    if m == 0 || m > d {
        return Err(invalid(format!("singleton index {m} outside 1..={d}")));
    }
    let rest: Vec<usize> = (0..d).filter(|&j| j != m - 1).collect();
    let left = kernels.centred[m - 1].clone();
    let right = block_product(kernels, &rest, true);
    let scale = kernels.centred_product_scale(&(0..d).collect::<Vec<_>>());
    Ok(product_statistic(kernels.n, &left, &right, scale))
}

/// Streitberg-type subtest for a bipartition with both blocks of size >= 2.
pub fn xsi_subtest(kernels: &SplitKernels, pi: &Bipartition) -> Result<NormalizedStatistic> {
    if pi.d() != kernels.d() {
        return Err(Error::DimensionMismatch {
            expected: kernels.d(),
            got: pi.d(),
        });
    }
    if pi.has_singleton() {
        return Err(invalid(format!(
            "{pi} has a singleton block; use the Lancaster subtest"
        )));
    }
    let (b1, b2) = pi.zero_based();
    let left = block_product(kernels, &b1, true);
    let right = block_product(kernels, &b2, true);
    let scale = kernels.centred_product_scale(&(0..kernels.d()).collect::<Vec<_>>());
    Ok(product_statistic(kernels.n, &left, &right, scale))
}

/// Subtest for any canonical bipartition: Lancaster form when it isolates a
/// variable, Streitberg form otherwise.
pub fn subtest(kernels: &SplitKernels, pi: &Bipartition) -> Result<NormalizedStatistic> {
    match pi.singleton() {
        Some(m) => xli_subtest(kernels, m),
        None => xsi_subtest(kernels, pi),
    }
}

/// Pairwise statistic from two cross-centred Gram matrices.
pub fn xhsic_v(k1: &GramMatrix, k2: &GramMatrix) -> Result<NormalizedStatistic> {
    for k in [k1, k2] {
        if k.state() != GramState::CrossCentred {
            return Err(Error::WrongState {
                expected: GramState::CrossCentred,
                found: k.state(),
            });
        }
    }
    if k1.n() != k2.n() {
        return Err(Error::DimensionMismatch {
            expected: 2 * k1.n(),
            got: 2 * k2.n(),
        });
    }
    let a = k1.off_diagonal_block();
    let b = k2.off_diagonal_block();
    let scale = a.max_abs() * b.max_abs();
    Ok(product_statistic(k1.n(), &a, &b, scale))
}
