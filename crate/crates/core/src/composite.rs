//! Composite hypothesis tests assembled from normalised subtests.
//!
//! A composite null is the union of its subhypotheses, so it is rejected only
//! when every subtest rejects (intersection rule). Each subtest runs at the
//! full level `alpha` unless Bonferroni mode is switched on.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{invalid, Result};
use crate::kernels::KernelSpec;
use crate::partitions::{nonsingleton_bipartitions, singleton_bipartitions, Bipartition};
use crate::teststats::{self, std_normal_quantile, NormalizedStatistic, SplitKernels};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    JointIndependence,
    LancasterFactorisation,
    CompleteFactorisation,
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtestResult {
    pub label: String,
    pub statistic: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_kind: TestKind,
    pub subtests: Vec<SubtestResult>,
    pub overall_rejected: bool,
    /// Label of the non-rejecting subtest after which execution stopped.
    pub terminated_early_at: Option<String>,
    pub alpha: f64,
    /// Half-sample size `n`.
    pub n_used: usize,
}

impl TestOutcome {
    /// Number of subtests the test would run without early termination.
    pub fn planned_subtests(kind: TestKind, d: usize) -> usize {
        match kind {
            TestKind::JointIndependence | TestKind::Pairwise => 1,
            TestKind::LancasterFactorisation => d,
            TestKind::CompleteFactorisation => (1usize << (d - 1)) - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOptions {
    pub alpha: f64,
    /// Stop at the first non-rejecting subtest.
    pub early_stop: bool,
    /// Run every subtest at `alpha / #subtests` instead of `alpha`.
    pub bonferroni: bool,
    /// Shuffle the samples once with this seed before splitting.
    pub shuffle_seed: Option<u64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            early_stop: false,
            bonferroni: false,
            shuffle_seed: None,
        }
    }
}

impl TestOptions {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }

    pub fn early_stop(mut self, on: bool) -> Self {
        self.early_stop = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

pub fn test_joint_independence(data: &Dataset, spec: &KernelSpec, alpha: f64) -> Result<TestOutcome> {
    run_test(TestKind::JointIndependence, data, spec, &TestOptions::with_alpha(alpha))
}

pub fn test_lancaster(
    data: &Dataset,
    spec: &KernelSpec,
    alpha: f64,
    early_stop: bool,
) -> Result<TestOutcome> {
    let opts = TestOptions::with_alpha(alpha).early_stop(early_stop);
    run_test(TestKind::LancasterFactorisation, data, spec, &opts)
}

pub fn test_complete_factorisation(
    data: &Dataset,
    spec: &KernelSpec,
    alpha: f64,
    early_stop: bool,
) -> Result<TestOutcome> {
    let opts = TestOptions::with_alpha(alpha).early_stop(early_stop);
    run_test(TestKind::CompleteFactorisation, data, spec, &opts)
}

/// Pairwise independence of two variables.
pub fn test_pairwise(data: &Dataset, spec: &KernelSpec, alpha: f64) -> Result<TestOutcome> {
    run_test(TestKind::Pairwise, data, spec, &TestOptions::with_alpha(alpha))
}

/// Evaluate kernels on (optionally shuffled) data and run the test.
pub fn run_test(
    kind: TestKind,
    data: &Dataset,
    spec: &KernelSpec,
    opts: &TestOptions,
) -> Result<TestOutcome> {
    opts.validate()?;
    check_dimension(kind, data.d())?;
    let kernels = match opts.shuffle_seed {
        Some(seed) => SplitKernels::from_dataset(&data.shuffled(seed), spec)?,
        None => SplitKernels::from_dataset(data, spec)?,
    };
    run_on_kernels(kind, &kernels, opts)
}

fn check_dimension(kind: TestKind, d: usize) -> Result<()> {
    let ok = match kind {
        TestKind::JointIndependence => d >= 2,
        TestKind::Pairwise => d == 2,
        TestKind::LancasterFactorisation | TestKind::CompleteFactorisation => d >= 3,
    };
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("{kind:?} is not defined for d = {d}")))
    }
}

/// Run a test on precomputed kernels.
pub fn run_on_kernels(kind: TestKind, kernels: &SplitKernels, opts: &TestOptions) -> Result<TestOutcome> {
    opts.validate()?;
    let d = kernels.d();
    check_dimension(kind, d)?;
    let planned = TestOutcome::planned_subtests(kind, d);
    let level = if opts.bonferroni {
        opts.alpha / planned as f64
    } else {
        opts.alpha
    };
    let z = std_normal_quantile(1.0 - level)?;

    let mut outcome = TestOutcome {
        test_kind: kind,
        subtests: Vec::with_capacity(planned),
        overall_rejected: false,
        terminated_early_at: None,
        alpha: opts.alpha,
        n_used: kernels.n(),
    };

    let mut record = |label: String, stat: NormalizedStatistic| -> bool {
        let rejected = !stat.degenerate && stat.value > z;
        outcome.subtests.push(SubtestResult {
            label,
            statistic: stat.value,
            p_value: stat.p_value(),
            rejected,
            degenerate: stat.degenerate,
        });
        rejected
    };
    let mut terminated = None;

    match kind {
        TestKind::JointIndependence => {
            record("joint".to_string(), teststats::xdhsic(kernels)?);
        }
        TestKind::Pairwise => {
            record("{1}|{2}".to_string(), teststats::xli_subtest(kernels, 1)?);
        }
        TestKind::LancasterFactorisation | TestKind::CompleteFactorisation => {
            let mut parts: Vec<Bipartition> = singleton_bipartitions(d)?;
            if kind == TestKind::CompleteFactorisation {
                parts.extend(nonsingleton_bipartitions(d));
            }
            let total = parts.len();
            for (i, pi) in parts.iter().enumerate() {
                let stat = teststats::subtest(kernels, pi)?;
                let rejected = record(pi.to_string(), stat);
                if !rejected && opts.early_stop {
                    if i + 1 < total {
                        terminated = Some(pi.to_string());
                    }
                    break;
                }
            }
        }
    }

    outcome.terminated_early_at = terminated;
    outcome.overall_rejected =
        outcome.subtests.len() == planned && outcome.subtests.iter().all(|s| s.rejected);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn normals(d: usize, n: usize, seed: u64) -> Dataset {
        let mut r = StreamRng::from_seed(seed);
        let cols: Vec<Vec<f64>> = (0..d).map(|_| (0..n).map(|_| r.normal()).collect()).collect();
        Dataset::from_columns(&cols).unwrap()
    }

    /// Four variables, all driven by a shared latent: every bipartition is
    /// strongly dependent.
    fn entangled(n: usize, seed: u64) -> Dataset {
        let mut r = StreamRng::from_seed(seed);
        let z: Vec<f64> = (0..n).map(|_| r.normal()).collect();
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| z.iter().map(|v| v + 0.3 * r.normal()).collect())
            .collect();
        Dataset::from_columns(&cols).unwrap()
    }

    #[test]
    fn subtest_counts_and_order() {
        let data = entangled(200, 1);
        let spec = KernelSpec::default();
        let out = test_complete_factorisation(&data, &spec, 0.05, false).unwrap();
        let labels: Vec<&str> = out.subtests.iter().map(|s| s.label.as_str()).collect();
        assert_eq!(
            labels,
            ["{1}|{2,3,4}", "{2}|{1,3,4}", "{3}|{1,2,4}", "{4}|{1,2,3}", "{1,2}|{3,4}", "{1,3}|{2,4}", "{1,4}|{2,3}"]
        );
        assert!(out.overall_rejected);
        assert_eq!(out.n_used, 100);
        assert_eq!(test_lancaster(&data, &spec, 0.05, false).unwrap().subtests.len(), 4);
        assert_eq!(test_joint_independence(&data, &spec, 0.05).unwrap().subtests.len(), 1);
    }

    #[test]
    fn early_stop_preserves_decision() {
        let spec = KernelSpec::default();
        for seed in 0..6 {
            let data = if seed % 2 == 0 { normals(4, 120, seed) } else { entangled(120, seed) };
            let full = test_complete_factorisation(&data, &spec, 0.05, false).unwrap();
            let short = test_complete_factorisation(&data, &spec, 0.05, true).unwrap();
            assert_eq!(full.overall_rejected, short.overall_rejected);
            assert!(short.subtests.len() <= full.subtests.len());
            assert_eq!(full.subtests[..short.subtests.len()], short.subtests[..]);
            if let Some(label) = &short.terminated_early_at {
                assert_eq!(&short.subtests.last().unwrap().label, label);
                assert!(!short.subtests.last().unwrap().rejected);
            }
        }
    }

    #[test]
    fn intersection_rule() {
        let spec = KernelSpec::default();
        for seed in 10..14 {
            let out = test_lancaster(&normals(3, 100, seed), &spec, 0.05, false).unwrap();
            let all = out.subtests.iter().all(|s| s.rejected);
            assert_eq!(out.overall_rejected, all);
            for s in &out.subtests {
                assert!((0.0..=1.0).contains(&s.p_value));
                assert_eq!(s.rejected, s.p_value < 0.05);
            }
        }
    }

    #[test]
    fn bonferroni_is_stricter() {
        let data = entangled(60, 3);
        let spec = KernelSpec::default();
        let k = SplitKernels::from_dataset(&data, &spec).unwrap();
        let plain = TestOptions::with_alpha(0.05);
        let strict = TestOptions {
            bonferroni: true,
            ..plain
        };
        let a = run_on_kernels(TestKind::CompleteFactorisation, &k, &plain).unwrap();
        let b = run_on_kernels(TestKind::CompleteFactorisation, &k, &strict).unwrap();
        for (x, y) in a.subtests.iter().zip(&b.subtests) {
            assert!(x.rejected || !y.rejected);
        }
    }

    #[test]
    fn dimension_and_alpha_checks() {
        let spec = KernelSpec::default();
        assert!(test_lancaster(&normals(2, 20, 1), &spec, 0.05, false).is_err());
        assert!(test_pairwise(&normals(3, 20, 1), &spec, 0.05).is_err());
        assert!(test_joint_independence(&normals(1, 20, 1), &spec, 0.05).is_err());
        assert!(test_joint_independence(&normals(2, 20, 1), &spec, 0.0).is_err());
        assert!(test_joint_independence(&normals(2, 3, 1), &spec, 0.05).is_err());
        let p = test_pairwise(&normals(2, 40, 1), &spec, 0.05).unwrap();
        assert_eq!(p.subtests.len(), 1);
    }

    #[test]
    fn shuffle_is_seeded() {
        let data = entangled(80, 9);
        let spec = KernelSpec::default();
        let opts = TestOptions {
            shuffle_seed: Some(4),
            ..TestOptions::default()
        };
        let a = run_test(TestKind::LancasterFactorisation, &data, &spec, &opts).unwrap();
        let b = run_test(TestKind::LancasterFactorisation, &data, &spec, &opts).unwrap();
        assert_eq!(a, b);
    }
}
