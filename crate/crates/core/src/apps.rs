//! Applications built on the composite tests: collider detection, causal
//! search over additive-noise models, feature screening and interaction
//! profiling of variable groups.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::composite::{self, run_on_kernels, TestKind, TestOptions, TestOutcome};
use crate::dataset::Dataset;
use crate::error::{invalid, Error, Result};
use crate::kernels::{cholesky_psd, cholesky_solve, KernelSpec};
use crate::matrix::Matrix;
use crate::partitions::combinations;
use crate::rng::StreamRng;
use crate::teststats::{self, std_normal_quantile, SplitKernels};

pub use crate::synth::DagSpec as Dag;

/// Default ridge penalty for the residual regressions.
pub const DEFAULT_LAMBDA: f64 = 1e-3;

/// How the parents of a node enter the regression kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParentKernel {
    /// One kernel on the stacked parent matrix, with a single bandwidth.
    Joint,
    /// Sum of one kernel per parent, each with its own bandwidth. This
    /// matches the additive structure of the generating model.
    #[default]
    Additive,
}

/// Kernel ridge residuals `y - mean(y) - K (K + n lambda I)^{-1} (y - mean(y))`
/// with one kernel on the joint parent matrix (rows are samples). With no
/// parent columns the residual is `y - mean(y)`.
pub fn krr_residuals(parents: &Matrix, y: &[f64], spec: &KernelSpec, lambda: f64) -> Result<Vec<f64>> {
    if parents.cols() == 0 {
        return krr_residuals_grouped(&[], y, spec, lambda, ParentKernel::Joint);
    }
    krr_residuals_grouped(std::slice::from_ref(parents), y, spec, lambda, ParentKernel::Joint)
}

/// Residuals for a list of parent variables combined according to `mode`.
pub fn krr_residuals_grouped(
    parents: &[Matrix],
    y: &[f64],
    spec: &KernelSpec,
    lambda: f64,
    mode: ParentKernel,
) -> Result<Vec<f64>> {
    let n = y.len();
    if n < 2 {
        return Err(invalid("regression needs at least 2 samples"));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid(format!("ridge penalty must be positive, got {lambda}")));
    }
    if let Some(p) = parents.iter().find(|p| p.rows() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.rows(),
        });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    if parents.is_empty() {
        return Ok(centred);
    }
    let k = match mode {
        ParentKernel::Joint => {
            let refs: Vec<&Matrix> = parents.iter().collect();
            let x = Matrix::hstack(&refs);
            spec.resolve(&x)?.gram_matrix(&x)
        }
        ParentKernel::Additive => {
            let grams = parents
                .iter()
                .map(|p| Ok(spec.resolve(p)?.gram_matrix(p)))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&Matrix> = grams.iter().collect();
            sum_matrices(&refs)
        }
    };
    ridge_residuals(k, &centred, lambda)
}

fn sum_matrices(parts: &[&Matrix]) -> Matrix {
    let mut sum = parts[0].clone();
    for g in &parts[1..] {
        for (s, v) in sum.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *s += v;
        }
    }
    sum
}

/// `n lambda (K + n lambda I)^{-1} y_c`, which equals `y_c - K (K + n lambda I)^{-1} y_c`.
fn ridge_residuals(mut k: Matrix, centred: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let ridge = centred.len() as f64 * lambda;
    k.add_diagonal(ridge);
    let l = cholesky_psd(&k, 0.0)?;
    let mut r = cholesky_solve(&l, centred);
    for v in &mut r {
        *v *= ridge;
    }
    Ok(r)
}

/// Structural Hamming distance: node pairs whose edge status (absent,
/// forward, backward) differs. A reversed edge counts once.
pub fn shd(a: &Dag, b: &Dag) -> Result<usize> {
    if a.d() != b.d() {
        return Err(Error::DimensionMismatch {
            expected: a.d(),
            got: b.d(),
        });
    }
    let status = |g: &Dag, u: usize, v: usize| (g.has_edge(u, v), g.has_edge(v, u));
    let d = a.d();
    Ok((1..=d)
        .flat_map(|u| (u + 1..=d).map(move |v| (u, v)))
        .filter(|&(u, v)| status(a, u, v) != status(b, u, v))
        .count())
}

/// All `d!` complete DAGs, one per causal order, orders in lexicographic
/// sequence (so index 0 is `1 -> 2 -> ... -> d`).
pub fn fully_connected_dags(d: usize) -> Result<Vec<Dag>> {
    if d == 0 || d > 5 {
        return Err(invalid(format!(
            "complete-DAG enumeration is limited to 1 <= d <= 5, got {d}"
        )));
    }
    let mut out = Vec::new();
    let mut order: Vec<usize> = (1..=d).collect();
    loop {
        out.push(Dag::fully_connected(&order)?);
        if !next_permutation(&mut order) {
            return Ok(out);
        }
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedDag {
    pub dag: Dag,
    /// Position in the candidate list.
    pub index: usize,
    pub p_value: f64,
    pub statistic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DagSearchConfig {
    pub lambda: f64,
    pub parent_kernel: ParentKernel,
}

impl Default for DagSearchConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            parent_kernel: ParentKernel::Additive,
        }
    }
}

/// Score candidate DAGs by the joint independence of their additive-noise
/// residuals and rank them by p-value, largest first.
pub fn dag_search(data: &Dataset, candidates: &[Dag], spec: &KernelSpec, lambda: f64) -> Result<Vec<RankedDag>> {
    let cfg = DagSearchConfig {
        lambda,
        ..DagSearchConfig::default()
    };
    dag_search_with(data, candidates, spec, &cfg)
}

/// As [`dag_search`] with an explicit regression configuration.
///
/// Ties in p-value (common when many p-values round to 1) are broken by the
/// smaller statistic, then by candidate index.
pub fn dag_search_with(
    data: &Dataset,
    candidates: &[Dag],
    spec: &KernelSpec,
    cfg: &DagSearchConfig,
) -> Result<Vec<RankedDag>> {
    if candidates.is_empty() {
        return Err(invalid("no candidate DAGs"));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(invalid(format!("ridge penalty must be positive, got {}", cfg.lambda)));
    }
    let d = data.d();
    if let Some(bad) = candidates.iter().find(|g| g.d() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.d(),
        });
    }
    let n = data.half_size()?;
    let mut search = Search {
        data,
        spec,
        cfg,
        n,
        grams: HashMap::new(),
        blocks: HashMap::new(),
    };
    let mut ranked = Vec::with_capacity(candidates.len());
    for (index, dag) in candidates.iter().enumerate() {
        let blocks = (1..=d)
            .map(|node| search.residual_block(node, dag.parents(node)))
            .collect::<Result<Vec<_>>>()?;
        let stat = teststats::xdhsic(&SplitKernels::from_blocks(blocks)?)?;
        ranked.push(RankedDag {
            dag: dag.clone(),
            index,
            p_value: stat.p_value(),
            statistic: stat.value,
        });
    }
    ranked.sort_by(|a, b| {
        b.p_value
            .total_cmp(&a.p_value)
            .then(a.statistic.total_cmp(&b.statistic))
            .then(a.index.cmp(&b.index))
    });
    Ok(ranked)
}

/// Memoised regression state for one search: per-variable Gram matrices and
/// per-(node, parent set) residual kernel blocks.
struct Search<'a> {
    data: &'a Dataset,
    spec: &'a KernelSpec,
    cfg: &'a DagSearchConfig,
    n: usize,
    grams: HashMap<usize, Matrix>,
    blocks: HashMap<(usize, Vec<usize>), Matrix>,
}

impl Search<'_> {
    fn variable(&self, node: usize) -> Matrix {
        self.data.variable(node - 1).row_range(0, 2 * self.n)
    }

    fn residual_block(&mut self, node: usize, parents: Vec<usize>) -> Result<Matrix> {
        let key = (node, parents);
        if let Some(b) = self.blocks.get(&key) {
            return Ok(b.clone());
        }
        let y = self.variable(node);
        if y.cols() != 1 {
            return Err(invalid("causal search needs scalar variables"));
        }
        let y = y.col_vec(0);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let parents = &key.1;
        let r = if parents.is_empty() {
            centred
        } else if self.cfg.parent_kernel == ParentKernel::Additive {
            for &p in parents {
                if !self.grams.contains_key(&p) {
                    let x = self.variable(p);
                    let g = self.spec.resolve(&x)?.gram_matrix(&x);
                    self.grams.insert(p, g);
                }
            }
            let refs: Vec<&Matrix> = parents.iter().map(|p| &self.grams[p]).collect();
            ridge_residuals(sum_matrices(&refs), &centred, self.cfg.lambda)?
        } else {
            let vars: Vec<Matrix> = parents.iter().map(|&p| self.variable(p)).collect();
            krr_residuals_grouped(&vars, &y, self.spec, self.cfg.lambda, ParentKernel::Joint)?
        };
        let single = Dataset::from_columns(&[r])?;
        let block = SplitKernels::from_dataset(&single, self.spec)?.raw_blocks()[0].clone();
        self.blocks.insert(key, block.clone());
        Ok(block)
    }
}

/// Collider check on `(x, y, z)`: with `X` and `Y` independent (the caller's
/// assumption), rejecting the Lancaster factorisation means `X` and `Y`
/// become dependent given `Z`.
pub fn vstructure_detect(x: &Matrix, y: &Matrix, z: &Matrix, spec: &KernelSpec, alpha: f64) -> Result<TestOutcome> {
    let data = Dataset::new(vec![x.clone(), y.clone(), z.clone()])?;
    composite::test_lancaster(&data, spec, alpha, false)
}

/// Greedy screening of features that take part in the target's dependence.
///
/// Starting from every feature, subsets `S` of the retained features are
/// visited by size (`1..=max_order`) and lexicographically. `S` is pruned
/// when the bipartition `(S + pruned) | (target + retained - S)` does not
/// reject, i.e. when it can be split off without losing dependence. Passes
/// repeat until nothing changes. Returns the retained 0-based indices.
pub fn feature_screen(
    features: &Dataset,
    target: &Matrix,
    max_order: usize,
    spec: &KernelSpec,
    alpha: f64,
) -> Result<Vec<usize>> {
    if max_order < 2 {
        return Err(invalid(format!("max_order must be >= 2, got {max_order}")));
    }
    let z = std_normal_quantile(1.0 - alpha)?;
    let p = features.d();
    let mut vars = features.variables().to_vec();
    vars.push(target.clone());
    let kernels = SplitKernels::from_dataset(&Dataset::new(vars)?, spec)?;
    let target_idx = p;

    let mut retained: Vec<usize> = (0..p).collect();
    let mut pruned: Vec<usize> = Vec::new();
    loop {
        let mut changed = false;
        for size in 1..=max_order {
            for subset in combinations(retained.clone(), size) {
                if !subset.iter().all(|i| retained.contains(i)) {
                    continue;
                }
                let mut left: Vec<usize> = subset.iter().chain(&pruned).copied().collect();
                left.sort_unstable();
                let mut right = vec![target_idx];
                right.extend(retained.iter().filter(|i| !subset.contains(i)));
                let stat = teststats::bipartition_statistic(&kernels, &left, &right)?;
                let rejects = !stat.degenerate && stat.value > z;
                if !rejects {
                    retained.retain(|i| !subset.contains(i));
                    pruned.extend(&subset);
                    pruned.sort_unstable();
                    changed = true;
                }
            }
        }
        if !changed || retained.is_empty() {
            return Ok(retained);
        }
    }
}

/// A labelled group of 0-based variable indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableGroup {
    pub label: String,
    pub members: Vec<usize>,
}

/// Label used for the baseline that draws each set across distinct groups.
pub const CROSS_GROUP: &str = "cross-group";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub group: String,
    pub order: usize,
    pub n_sets: usize,
    pub rejections: usize,
    /// Share of rejecting sets, in percent.
    pub percentage: f64,
    /// Why the row was skipped, if it was.
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileReport {
    pub rows: Vec<ProfileRow>,
    pub alpha: f64,
    pub seed: u64,
    pub n_sets: usize,
}

/// For every group and order `k`, sample `n_sets` random `k`-sets and report
/// how often the `k`-way interaction test rejects. Order 2 uses the pairwise
/// statistic; higher orders the complete-factorisation test. A cross-group
/// row draws each set's members from `k` distinct groups.
pub fn profile_interactions(
    data: &Dataset,
    groups: &[VariableGroup],
    orders: &[usize],
    n_sets: usize,
    spec: &KernelSpec,
    alpha: f64,
    seed: u64,
) -> Result<ProfileReport> {
    if let Some(&k) = orders.iter().find(|&&k| k < 2) {
        return Err(invalid(format!("interaction order must be >= 2, got {k}")));
    }
    for g in groups {
        if let Some(&bad) = g.members.iter().find(|&&i| i >= data.d()) {
            return Err(invalid(format!(
                "group {} references variable {bad} outside 0..{}",
                g.label,
                data.d()
            )));
        }
    }
    let mut report = ProfileReport {
        rows: Vec::new(),
        alpha,
        seed,
        n_sets,
    };
    if n_sets == 0 {
        return Ok(report);
    }
    let kernels = SplitKernels::from_dataset(data, spec)?;
    let opts = TestOptions::with_alpha(alpha).early_stop(true);
    let root = StreamRng::new(seed, 0x9f0f);

    let run_set = |vars: &[usize]| -> Result<bool> {
        let sub = kernels.subset(vars)?;
        let kind = if vars.len() == 2 {
            TestKind::Pairwise
        } else {
            TestKind::CompleteFactorisation
        };
        Ok(run_on_kernels(kind, &sub, &opts)?.overall_rejected)
    };

    let marker = cross_group_marker();
    for (gi, group) in groups.iter().enumerate().chain(std::iter::once((groups.len(), &marker))) {
        let cross = gi == groups.len();
        for &k in orders {
            let available = if cross { groups.len() } else { group.members.len() };
            if available < k {
                report.rows.push(ProfileRow {
                    group: group.label.clone(),
                    order: k,
                    n_sets: 0,
                    rejections: 0,
                    percentage: 0.0,
                    warning: Some(format!(
                        "{} {} available, order {k} requested",
                        available,
                        if cross { "groups" } else { "members" }
                    )),
                });
                log::warn!("skipping group {} at order {k}: too few members", group.label);
                continue;
            }
            let mut rng = root.substream(((gi as u64) << 16) | k as u64);
            let mut rejections = 0;
            for _ in 0..n_sets {
                let vars: Vec<usize> = if cross {
                    rng.sample_indices(groups.len(), k)
                        .into_iter()
                        .map(|g| {
                            let m = &groups[g].members;
                            m[rng.below(m.len() as u64) as usize]
                        })
                        .collect()
                } else {
                    rng.sample_indices(group.members.len(), k)
                        .into_iter()
                        .map(|i| group.members[i])
                        .collect()
                };
                if run_set(&vars)? {
                    rejections += 1;
                }
            }
            report.rows.push(ProfileRow {
                group: group.label.clone(),
                order: k,
                n_sets,
                rejections,
                percentage: 100.0 * rejections as f64 / n_sets as f64,
                warning: None,
            });
        }
    }
    Ok(report)
}

fn cross_group_marker() -> VariableGroup {
    VariableGroup {
        label: CROSS_GROUP.to_string(),
        members: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residuals_trivial_cases() {
        let spec = KernelSpec::default();
        let none = Matrix::zeros(3, 0);
        assert_eq!(krr_residuals(&none, &[1.0, 2.0, 3.0], &spec, 1e-3).unwrap(), vec![-1.0, 0.0, 1.0]);
        let x = Matrix::column(&[0.1, 0.5, 0.9, 1.3, 2.0]);
        let r = krr_residuals(&x, &[4.0; 5], &spec, 1e-3).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-8));
        assert!(krr_residuals(&x, &[1.0; 5], &spec, 0.0).is_err());
        assert!(krr_residuals(&x, &[1.0; 4], &spec, 1e-3).is_err());
    }

    #[test]
    fn residuals_fit_smooth_function() {
        let n = 200;
        let mut r = StreamRng::from_seed(3);
        let xs: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> = xs.iter().map(|x| x.sin() + 0.1 * r.normal()).collect();
        let res = krr_residuals(&Matrix::column(&xs), &y, &KernelSpec::default(), 1e-3).unwrap();
        let mean = y.iter().sum::<f64>() / n as f64;
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        let spread: Vec<f64> = y.iter().map(|v| v - mean).collect();
        assert!(rms(&res) < 0.2 * rms(&spread), "{} vs {}", rms(&res), rms(&spread));
    }

    #[test]
    fn additive_equals_joint_for_one_parent() {
        let mut r = StreamRng::from_seed(4);
        let x = Matrix::from_fn(30, 1, |_, _| r.normal());
        let y: Vec<f64> = (0..30).map(|i| x[(i, 0)].powi(2) + r.normal()).collect();
        let spec = KernelSpec::default();
        let a = krr_residuals_grouped(std::slice::from_ref(&x), &y, &spec, 1e-3, ParentKernel::Additive).unwrap();
        let b = krr_residuals_grouped(&[x], &y, &spec, 1e-3, ParentKernel::Joint).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn shd_examples() {
        let a = Dag::new(2, [(1, 2)]).unwrap();
        let b = Dag::new(2, [(2, 1)]).unwrap();
        assert_eq!(shd(&a, &a).unwrap(), 0);
        assert_eq!(shd(&a, &b).unwrap(), 1);
        let c = Dag::new(3, [(1, 2), (1, 3)]).unwrap();
        let e = Dag::new(3, [(1, 2)]).unwrap();
        assert_eq!(shd(&c, &e).unwrap(), 1);
        assert!(shd(&a, &c).is_err());
    }

    #[test]
    fn complete_dag_enumeration() {
        let all = fully_connected_dags(4).unwrap();
        assert_eq!(all.len(), 24);
        assert_eq!(all[0], crate::synth::dag1());
        let unique: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), 24);
        assert!(all.iter().all(|g| g.edges().len() == 6));
        assert_eq!(fully_connected_dags(1).unwrap().len(), 1);
        assert!(fully_connected_dags(6).is_err());
    }

    #[test]
    fn single_candidate_returned() {
        let (data, truth) = crate::synth::gen_anm_dag(60, &Dag::new(2, [(1, 2)]).unwrap(), 1).unwrap();
        let ranked = dag_search(&data, std::slice::from_ref(&truth), &KernelSpec::default(), 1e-3).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].dag, truth);
        assert!((0.0..=1.0).contains(&ranked[0].p_value));
        assert!(dag_search(&data, &[], &KernelSpec::default(), 1e-3).is_err());
    }

    #[test]
    fn screen_keeps_copy_of_target() {
        let mut r = StreamRng::from_seed(5);
        let x: Vec<f64> = (0..100).map(|_| r.normal()).collect();
        let features = Dataset::from_columns(std::slice::from_ref(&x)).unwrap();
        let picked = feature_screen(&features, &Matrix::column(&x), 2, &KernelSpec::default(), 0.05).unwrap();
        assert_eq!(picked, vec![0]);
    }

    #[test]
    fn profile_skips_small_groups_and_handles_zero_sets() {
        let mut r = StreamRng::from_seed(6);
        let cols: Vec<Vec<f64>> = (0..4).map(|_| (0..40).map(|_| r.normal()).collect()).collect();
        let data = Dataset::from_columns(&cols).unwrap();
        let groups = vec![
            VariableGroup { label: "a".into(), members: vec![0, 1, 2] },
            VariableGroup { label: "b".into(), members: vec![3] },
        ];
        let spec = KernelSpec::default();
        let empty = profile_interactions(&data, &groups, &[2], 0, &spec, 0.05, 1).unwrap();
        assert!(empty.rows.is_empty());
        let rep = profile_interactions(&data, &groups, &[2, 3], 5, &spec, 0.05, 1).unwrap();
        let b2 = rep.rows.iter().find(|r| r.group == "b" && r.order == 2).unwrap();
        assert!(b2.warning.is_some());
        let a3 = rep.rows.iter().find(|r| r.group == "a" && r.order == 3).unwrap();
        assert_eq!(a3.n_sets, 5);
        assert!((0.0..=100.0).contains(&a3.percentage));
        let cross3 = rep.rows.iter().find(|r| r.group == CROSS_GROUP && r.order == 3).unwrap();
        assert!(cross3.warning.is_some());
        assert_eq!(rep, profile_interactions(&data, &groups, &[2, 3], 5, &spec, 0.05, 1).unwrap());
        assert!(profile_interactions(&data, &groups, &[1], 5, &spec, 0.05, 1).is_err());
    }
}
