//! Seeded synthetic datasets.
//!
//! All randomness comes from [`StreamRng`], so a `(parameters, seed)` pair
//! reproduces the same values on every platform. Each generator draws from
//! its own fixed stream ids; independent parts of a dataset use separate
//! streams so changing one parameter does not reshuffle unrelated draws.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::kernels::cholesky_psd;
use crate::matrix::Matrix;
use crate::rng::StreamRng;

/// Covariance with unit variances, correlation `beta` inside each block and
/// zero across blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCovariance {
    d: usize,
    /// 1-based variable groups partitioning `1..=d`.
    blocks: Vec<Vec<usize>>,
    beta: f64,
}

impl BlockCovariance {
    pub fn new(d: usize, blocks: Vec<Vec<usize>>, beta: f64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("covariance needs d >= 1"));
        }
        let mut seen = vec![false; d + 1];
        for &i in blocks.iter().flatten() {
            if i == 0 || i > d || seen[i] {
                return Err(invalid(format!(
                    "blocks must partition 1..={d}; bad or repeated index {i}"
                )));
            }
            seen[i] = true;
        }
        if seen[1..].iter().any(|s| !s) {
            return Err(invalid(format!("blocks must cover every variable 1..={d}")));
        }
        if !(beta.abs() < 1.0) {
            return Err(invalid(format!("beta must satisfy |beta| < 1, got {beta}")));
        }
        Ok(Self { d, blocks, beta })
    }

    /// Every variable in its own block.
    pub fn independent(d: usize) -> Result<Self> {
        Self::new(d, (1..=d).map(|i| vec![i]).collect(), 0.0)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn matrix(&self) -> Matrix {
        let mut group = vec![0; self.d];
        for (g, b) in self.blocks.iter().enumerate() {
            for &i in b {
                group[i - 1] = g;
            }
        }
        Matrix::from_fn(self.d, self.d, |i, j| {
            if i == j {
                1.0
            } else if group[i] == group[j] {
                self.beta
            } else {
                0.0
            }
        })
    }
}

/// `n` draws from `N(0, Sigma)`, one scalar variable per coordinate.
pub fn gen_mvg(n: usize, cov: &BlockCovariance, seed: u64) -> Result<Dataset> {
    let sigma = cov.matrix();
    let l = cholesky_psd(&sigma, 0.0).map_err(|e| match e {
        Error::NotPsd { .. } => invalid(format!(
            "covariance with beta = {} is not positive definite for these blocks",
            cov.beta
        )),
        other => other,
    })?;
    let d = cov.d;
    let mut rng = StreamRng::new(seed, 1);
    let mut cols = vec![Vec::with_capacity(n); d];
    let mut z = vec![0.0; d];
    for _ in 0..n {
        for v in z.iter_mut() {
            *v = rng.normal();
        }
        for (i, col) in cols.iter_mut().enumerate() {
            col.push(crate::matrix::dot(&l.row(i)[..=i], &z[..=i]));
        }
    }
    Dataset::from_columns(&cols)
}

/// XOR-type data: `d - 1` independent `U(0, 4)` variables; the last one is
/// their sum mod 4 on the first `floor(proportion * n)` samples and an
/// independent `U(0, 4)` draw on the rest. Any `d - 1` of the variables are
/// then jointly independent, so all dependence is of order `d`.
pub fn gen_xor(n: usize, d: usize, proportion: f64, seed: u64) -> Result<Dataset> {
    if d < 3 {
        return Err(invalid(format!("XOR data needs d >= 3, got {d}")));
    }
    if !(0.0..=1.0).contains(&proportion) {
        return Err(invalid(format!("proportion must lie in [0, 1], got {proportion}")));
    }
    let mut cols: Vec<Vec<f64>> = (0..d - 1)
        .map(|j| {
            let mut r = StreamRng::new(seed, 10 + j as u64);
            (0..n).map(|_| r.uniform(0.0, 4.0)).collect()
        })
        .collect();
    let linked = (proportion * n as f64).floor() as usize;
    let mut noise = StreamRng::new(seed, 9);
    let last: Vec<f64> = (0..n)
        .map(|i| {
            let u = noise.uniform(0.0, 4.0);
            if i < linked {
                let s: f64 = cols.iter().map(|c| c[i]).sum();
                // Guard against rem_euclid rounding up to exactly 4.0.
                let r = s.rem_euclid(4.0);
                if r >= 4.0 {
                    0.0
                } else {
                    r
                }
            } else {
                u
            }
        })
        .collect();
    cols.push(last);
    Dataset::from_columns(&cols)
}

fn normal_matrix(rng: &mut StreamRng, n: usize, p: usize) -> Matrix {
    Matrix::from_fn(n, p, |_, _| rng.normal())
}

/// Collider `X -> Z <- Y` with `Z_1 = sign(X_1 Y_1) W`, `W ~ Exp(rate 1/sqrt 2)`;
/// all other coordinates are independent standard normals.
pub fn gen_vstructure_a(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    if p == 0 {
        return Err(invalid("noise dimension p must be >= 1"));
    }
    let x = normal_matrix(&mut StreamRng::new(seed, 1), n, p);
    let y = normal_matrix(&mut StreamRng::new(seed, 2), n, p);
    let mut z = normal_matrix(&mut StreamRng::new(seed, 3), n, p);
    let mut w = StreamRng::new(seed, 4);
    let rate = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        let sign = if x[(i, 0)] * y[(i, 0)] < 0.0 { -1.0 } else { 1.0 };
        z[(i, 0)] = sign * w.exponential(rate);
    }
    Dataset::new(vec![x, y, z])
}

/// Collider where `Z_1` is `X_1^2`, `Y_1^2` or `X_1 Y_1` (one third each)
/// plus `N(0, 0.01)` noise. Also returns the branch index (0, 1, 2) per sample.
pub fn gen_vstructure_b_with_branches(n: usize, p: usize, seed: u64) -> Result<(Dataset, Vec<u8>)> {
    if p == 0 {
        return Err(invalid("noise dimension p must be >= 1"));
    }
    let x = normal_matrix(&mut StreamRng::new(seed, 1), n, p);
    let y = normal_matrix(&mut StreamRng::new(seed, 2), n, p);
    let mut z = normal_matrix(&mut StreamRng::new(seed, 3), n, p);
    let mut pick = StreamRng::new(seed, 4);
    let mut eps = StreamRng::new(seed, 5);
    let mut branches = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (x[(i, 0)], y[(i, 0)]);
        let branch = pick.below(3) as u8;
        let base = match branch {
            0 => a * a,
            1 => b * b,
            _ => a * b,
        };
        z[(i, 0)] = base + 0.1 * eps.normal();
        branches.push(branch);
    }
    Ok((Dataset::new(vec![x, y, z])?, branches))
}

pub fn gen_vstructure_b(n: usize, p: usize, seed: u64) -> Result<Dataset> {
    gen_vstructure_b_with_branches(n, p, seed).map(|(data, _)| data)
}

/// A directed acyclic graph on nodes `1..=d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DagSpec {
    d: usize,
    /// Sorted, deduplicated `(parent, child)` pairs.
    edges: Vec<(usize, usize)>,
}

impl DagSpec {
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if d == 0 {
            return Err(invalid("a DAG needs at least one node"));
        }
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        for &(a, b) in &edges {
            if a == 0 || b == 0 || a > d || b > d {
                return Err(invalid(format!("edge {a}>{b} references a node outside 1..={d}")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at node {a}")));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let dag = Self { d, edges };
        dag.topological_order()?;
        Ok(dag)
    }

    pub fn empty(d: usize) -> Result<Self> {
        Self::new(d, [])
    }

    /// The complete DAG whose edges all point forward along `order` (1-based).
    pub fn fully_connected(order: &[usize]) -> Result<Self> {
        let d = order.len();
        let mut edges = Vec::new();
        for (i, &a) in order.iter().enumerate() {
            for &b in &order[i + 1..] {
                edges.push((a, b));
            }
        }
        Self::new(d, edges)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, parent: usize, child: usize) -> bool {
        self.edges.binary_search(&(parent, child)).is_ok()
    }

    /// Parents of `node` (1-based), ascending.
    pub fn parents(&self, node: usize) -> Vec<usize> {
        self.edges.iter().filter(|e| e.1 == node).map(|e| e.0).collect()
    }

    /// Kahn's algorithm, smallest available node first; errors on a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>> {
        let mut indegree = vec![0usize; self.d + 1];
        for &(_, b) in &self.edges {
            indegree[b] += 1;
        }
        let mut ready: std::collections::BTreeSet<usize> =
            (1..=self.d).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(self.d);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &(a, b) in &self.edges {
                if a == v {
                    indegree[b] -= 1;
                    if indegree[b] == 0 {
                        ready.insert(b);
                    }
                }
            }
        }
        if order.len() == self.d {
            Ok(order)
        } else {
            Err(invalid("graph contains a cycle"))
        }
    }
}

impl std::fmt::Display for DagSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.edges.iter().map(|(a, b)| format!("{a}>{b}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

/// Ground-truth graph of the causal-search experiment: the complete DAG
/// along the order `1, 2, 3, 4`.
pub fn dag1() -> DagSpec {
    DagSpec::fully_connected(&[1, 2, 3, 4]).expect("valid by construction")
}

/// Joint draw of a zero-mean Gaussian process with unit-bandwidth Gaussian
/// covariance at the points `x`.
fn gp_draw(x: &[f64], rng: &mut StreamRng) -> Result<Vec<f64>> {
    let n = x.len();
    let k = Matrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            let t = x[a] - x[b];
            (-0.5 * t * t).exp()
        }
    });
    let l = cholesky_psd(&k, 1e-8)?;
    let z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    Ok((0..n).map(|i| crate::matrix::dot(&l.row(i)[..=i], &z[..=i])).collect())
}

/// Additive-noise data `X^j = sum_{k in pa(j)} f_{jk}(X^k) + N^j` along a
/// topological order. Root standard deviations are uniform on
/// `[5 sqrt 2, 10]`, noise standard deviations uniform on `[sqrt 2, 2]`, and
/// every edge function is a fresh Gaussian-process draw.
pub fn gen_anm_dag(n: usize, dag: &DagSpec, seed: u64) -> Result<(Dataset, DagSpec)> {
    if n < 2 {
        return Err(invalid("need at least 2 samples"));
    }
    let d = dag.d();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); d];
    for node in dag.topological_order()? {
        let mut rng = StreamRng::new(seed, 100 + node as u64);
        let parents = dag.parents(node);
        let scale = if parents.is_empty() {
            rng.uniform(5.0 * std::f64::consts::SQRT_2, 10.0)
        } else {
            rng.uniform(std::f64::consts::SQRT_2, 2.0)
        };
        let mut v: Vec<f64> = (0..n).map(|_| scale * rng.normal()).collect();
        for &p in &parents {
            let f = gp_draw(&cols[p - 1], &mut rng)?;
            for (vi, fi) in v.iter_mut().zip(f) {
                *vi += fi;
            }
        }
        cols[node - 1] = v;
    }
    Ok((Dataset::from_columns(&cols)?, dag.clone()))
}

/// Feature-screening data: seven fair `{0, 1}` coins whose parity is the
/// target, plus two correlated (0.9) Gaussian decoys unrelated to it.
/// Returns `(features, target)` with the features as nine scalar variables.
pub fn gen_parity_screen(n: usize, seed: u64) -> Result<(Dataset, Matrix)> {
    let mut coins = StreamRng::new(seed, 1);
    let mut cols: Vec<Vec<f64>> = (0..9).map(|_| Vec::with_capacity(n)).collect();
    let mut target = Vec::with_capacity(n);
    for _ in 0..n {
        let mut parity = 0u64;
        for col in cols.iter_mut().take(7) {
            let bit = coins.below(2);
            parity ^= bit;
            col.push(bit as f64);
        }
        target.push(parity as f64);
    }
    let decoys = gen_mvg(n, &BlockCovariance::new(2, vec![vec![1, 2]], 0.9)?, seed ^ 0xdec0)?;
    cols[7] = decoys.variable(0).col_vec(0);
    cols[8] = decoys.variable(1).col_vec(0);
    Ok((Dataset::from_columns(&cols)?, Matrix::column(&target)))
}
