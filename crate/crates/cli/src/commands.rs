//! Subcommand implementations.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use xhoi::apps::{
    dag_search_with, fully_connected_dags, profile_interactions, shd, Dag, DagSearchConfig, ParentKernel,
    ProfileRow,
};
use xhoi::baseline::{perm_dhsic, perm_factorisation_subtest, PermutationConfig};
use xhoi::composite::{run_test, SubtestResult, TestKind, TestOptions};
use xhoi::kernels::{Bandwidth, KernelFamily, KernelSpec};
use xhoi::partitions::{nonsingleton_bipartitions, singleton_bipartitions, Bipartition};
use xhoi::synth::{dag1, gen_anm_dag, gen_mvg, gen_vstructure_a, gen_vstructure_b, gen_xor, BlockCovariance};
use xhoi::Dataset;

use crate::io::{self, VariableManifest};
use crate::{
    BenchArgs, CliError, DagArgs, GenerateArgs, Generator, KernelArgs, KernelName, ParentKernelName, ProfileArgs,
    Scenario, TestArgs, TestName,
};

/// Smallest total sample count accepted by the data-consuming commands.
pub const MIN_SAMPLES: usize = 8;

fn kernel_spec(args: &KernelArgs) -> Result<KernelSpec, CliError> {
    let family = match args.kernel {
        KernelName::Gaussian => KernelFamily::Gaussian,
        KernelName::Laplace => KernelFamily::Laplace,
        KernelName::Rq => KernelFamily::RationalQuadratic,
    };
    let bandwidth = if args.bandwidth == "median" {
        Bandwidth::MedianHeuristic
    } else {
        let s: f64 = args.bandwidth.parse().map_err(|_| {
            CliError::Input(format!("--bandwidth must be 'median' or a number, got '{}'", args.bandwidth))
        })?;
        Bandwidth::Fixed(s)
    };
    let spec = KernelSpec::new(family, bandwidth).with_rq_alpha(args.rq_alpha);
    spec.validate()?;
    Ok(spec)
}

fn check_samples(data: &Dataset) -> Result<(), CliError> {
    if data.n_total() < MIN_SAMPLES {
        return Err(CliError::Input(format!(
            "need at least {MIN_SAMPLES} samples, got {}",
            data.n_total()
        )));
    }
    Ok(())
}

fn parse_index_list(text: &str, what: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Input(format!("{what}: '{s}' is not a variable number")))
        })
        .collect()
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot serialise report: {e}")))?;
    match out {
        Some(p) => fs::write(p, text + "\n").map_err(|e| CliError::Input(format!("cannot write {}: {e}", p.display()))),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            // A closed reader (e.g. `| head`) is not an error of ours.
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(CliError::Input(format!("cannot write to stdout: {e}")))
            }
            _ => Ok(()),
        },
    }
}

fn elapsed_ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

// ---- generate ----

pub fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let (data, names) = match args.kind {
        Generator::Mvg => {
            let mut blocks = args
                .blocks
                .iter()
                .map(|b| parse_index_list(b, "--blocks"))
                .collect::<Result<Vec<_>, _>>()?;
            // Variables left out of every block are independent singletons.
            let listed: Vec<usize> = blocks.iter().flatten().copied().collect();
            blocks.extend((1..=args.d).filter(|v| !listed.contains(v)).map(|v| vec![v]));
            let cov = BlockCovariance::new(args.d, blocks, args.beta)?;
            (gen_mvg(args.n, &cov, args.seed)?, numbered(args.d))
        }
        Generator::Xor => (gen_xor(args.n, args.d, args.proportion, args.seed)?, numbered(args.d)),
        Generator::VstructureA => (gen_vstructure_a(args.n, args.p, args.seed)?, xyz()),
        Generator::VstructureB => (gen_vstructure_b(args.n, args.p, args.seed)?, xyz()),
        Generator::AnmDag => {
            let dag = match &args.dag {
                Some(text) => io::parse_dag(args.d, text)?,
                None => dag1(),
            };
            let (data, dag) = gen_anm_dag(args.n, &dag, args.seed)?;
            let dag_path = args.out.with_extension("dag");
            fs::write(&dag_path, io::dag_to_text(&dag) + "\n")
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", dag_path.display())))?;
            let d = data.d();
            (data, numbered(d))
        }
    };
    let mut headers = Vec::new();
    let mut columns = Vec::new();
    for (name, var) in names.iter().zip(data.variables()) {
        for k in 0..var.cols() {
            headers.push(format!("{name}.{k}"));
            columns.push(var.col_vec(k));
        }
    }
    io::write_table(&args.out, &headers, &columns)?;
    let manifest = VariableManifest::from_dotted_headers(&headers);
    let path = io::sidecar_manifest(&args.out);
    fs::write(&path, manifest.to_text())
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
    log::info!("wrote {} samples of {} variables to {}", data.n_total(), data.d(), args.out.display());
    Ok(())
}

fn numbered(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

fn xyz() -> Vec<String> {
    ["x", "y", "z"].iter().map(|s| s.to_string()).collect()
}

// ---- test ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: String,
    pub variables: Vec<String>,
    pub n_total: usize,
    /// Half-sample size used by the split statistics (or `n` of the first `2n`
    /// samples for permutation baselines).
    pub n_used: usize,
    pub alpha: f64,
    pub kernel: KernelSpec,
    pub subtests: Vec<SubtestResult>,
    pub overall_rejected: bool,
    pub terminated_early_at: Option<String>,
    pub wall_time_ms: f64,
}

pub fn test(args: &TestArgs) -> Result<(), CliError> {
    let (data, manifest) = io::load_dataset(&args.input.data, args.input.manifest.as_deref())?;
    check_samples(&data)?;
    let spec = kernel_spec(&args.kernel)?;
    let start = Instant::now();
    let outcome = match args.test {
        TestName::PermDhsic | TestName::PermSubtest => {
            let data = match args.shuffle {
                Some(s) => data.shuffled(s),
                None => data.clone(),
            };
            let cfg = PermutationConfig::new(args.perms, args.seed)?;
            if args.test == TestName::PermDhsic {
                perm_dhsic(&data, &spec, args.alpha, &cfg)?
            } else {
                let block = args
                    .partition
                    .as_deref()
                    .ok_or_else(|| CliError::Input("perm-subtest needs --partition, e.g. 1,2".into()))?;
                let pi = Bipartition::from_block(data.d(), &parse_index_list(block, "--partition")?)?;
                perm_factorisation_subtest(&data, &pi, &spec, args.alpha, &cfg)?
            }
        }
        name => {
            let kind = match name {
                TestName::Dhsic => TestKind::JointIndependence,
                TestName::Lancaster => TestKind::LancasterFactorisation,
                TestName::Streitberg => TestKind::CompleteFactorisation,
                _ => TestKind::Pairwise,
            };
            let opts = TestOptions {
                alpha: args.alpha,
                early_stop: args.early_stop,
                bonferroni: args.bonferroni,
                shuffle_seed: args.shuffle,
            };
            run_test(kind, &data, &spec, &opts)?
        }
    };
    let report = TestReport {
        test: value_name(args.test),
        variables: manifest.names(),
        n_total: data.n_total(),
        n_used: outcome.n_used,
        alpha: args.alpha,
        kernel: spec,
        subtests: outcome.subtests,
        overall_rejected: outcome.overall_rejected,
        terminated_early_at: outcome.terminated_early_at,
        wall_time_ms: elapsed_ms(start),
    };
    write_json(&report, args.out.as_deref())
}

// ---- bench ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub n: usize,
    pub d: usize,
    pub method: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Share of repetitions that rejected.
    pub power: f64,
}

type Method = Box<dyn Fn(&Dataset) -> Result<bool, CliError>>;

pub fn bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.reps == 0 {
        return Err(CliError::Input("--reps must be positive".into()));
    }
    let spec = KernelSpec::gaussian_median();
    let alpha = args.alpha;
    let cfg = PermutationConfig::new(args.perms, args.seed)?;
    let opts = TestOptions::with_alpha(alpha);
    let free_complete: Method = Box::new(move |d: &Dataset| {
        Ok(run_test(TestKind::CompleteFactorisation, d, &spec, &opts)?.overall_rejected)
    });
    // Permutation counterpart of the complete test: every bipartition tested
    // by permutation, rejecting only if all of them reject.
    let perm_complete: Method = Box::new(move |d: &Dataset| {
        let mut all = singleton_bipartitions(d.d())?;
        all.extend(nonsingleton_bipartitions(d.d()));
        for pi in &all {
            if !perm_factorisation_subtest(d, pi, &spec, alpha, &cfg)?.overall_rejected {
                return Ok(false);
            }
        }
        Ok(true)
    });

    let name = value_name(args.scenario);
    let (configs, gen, methods): (Vec<(usize, usize)>, Box<dyn Fn(usize, usize, u64) -> Result<Dataset, CliError>>, Vec<(&str, Method)>) =
        match args.scenario {
            Scenario::DhsicVsPerm => (
                args.sizes.clone().unwrap_or_else(|| vec![128, 256, 512]).into_iter().map(|n| (n, 4)).collect(),
                Box::new(|n, d, seed| {
                    let cov = BlockCovariance::new(d, vec![(1..=d).collect()], 0.5)?;
                    Ok(gen_mvg(n, &cov, seed)?)
                }),
                vec![
                    (
                        "permutation-free",
                        Box::new(move |d: &Dataset| {
                            Ok(run_test(TestKind::JointIndependence, d, &spec, &opts)?.overall_rejected)
                        }) as Method,
                    ),
                    (
                        "permutation",
                        Box::new(move |d: &Dataset| Ok(perm_dhsic(d, &spec, alpha, &cfg)?.overall_rejected)),
                    ),
                ],
            ),
            Scenario::StreitbergN => (
                args.sizes.clone().unwrap_or_else(|| vec![128, 256, 512, 1024]).into_iter().map(|n| (n, 5)).collect(),
                Box::new(|n, d, seed| Ok(gen_xor(n, d, 1.0, seed)?)),
                vec![("permutation-free", free_complete), ("permutation", perm_complete)],
            ),
            Scenario::StreitbergD => {
                let n = args.sizes.as_ref().and_then(|s| s.first().copied()).unwrap_or(100);
                (
                    args.dims.clone().unwrap_or_else(|| (4..=10).collect()).into_iter().map(|d| (n, d)).collect(),
                    Box::new(|n, d, seed| Ok(gen_xor(n, d, 1.0, seed)?)),
                    vec![("permutation-free", free_complete), ("permutation", perm_complete)],
                )
            }
        };

    let mut rows = Vec::new();
    for (n, d) in configs {
        for (method, run) in &methods {
            let mut times = Vec::with_capacity(args.reps);
            let mut rejections = 0;
            for rep in 0..args.reps {
                let data = gen(n, d, args.seed.wrapping_add(rep as u64))?;
                let t = Instant::now();
                rejections += run(&data)? as usize;
                times.push(elapsed_ms(t));
            }
            let mean = times.iter().sum::<f64>() / times.len() as f64;
            let std = if times.len() > 1 {
                (times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (times.len() - 1) as f64).sqrt()
            } else {
                0.0
            };
            log::info!("{name} n={n} d={d} {method}: {mean:.2} ms");
            rows.push(BenchRow {
                scenario: name.clone(),
                n,
                d,
                method: method.to_string(),
                mean_ms: mean,
                std_ms: std,
                power: rejections as f64 / args.reps as f64,
            });
        }
    }
    let mut w = csv::Writer::from_path(&args.out)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))?;
    for r in &rows {
        w.serialize(r)
            .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", args.out.display())))
}

/// The command-line spelling of an enum value.
fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value().map_or_else(String::new, |p| p.get_name().to_string())
}

// ---- dag ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub rank: usize,
    pub index: usize,
    pub edges: String,
    pub p_value: f64,
    pub statistic: f64,
    pub shd: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagReport {
    pub variables: Vec<String>,
    pub truth: Option<String>,
    /// 1-based rank of the true DAG among the candidates, if it is one.
    pub truth_rank: Option<usize>,
    pub ranked: Vec<RankedEntry>,
    pub wall_time_ms: f64,
}

pub fn dag(args: &DagArgs) -> Result<(), CliError> {
    let (data, manifest) = io::load_dataset(&args.input.data, args.input.manifest.as_deref())?;
    check_samples(&data)?;
    let spec = kernel_spec(&args.kernel)?;
    let d = data.d();
    let candidates = if args.candidates == "fully-connected" {
        fully_connected_dags(d)?
    } else {
        let path = Path::new(&args.candidates);
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        io::parse_candidates(d, &text)?
    };
    let truth: Option<Dag> = match &args.truth {
        None => None,
        Some(t) => {
            // Accept a file holding the edge list as well as the list itself.
            let text = match fs::read_to_string(t) {
                Ok(s) => s,
                Err(_) => t.clone(),
            };
            Some(io::parse_dag(d, &text)?)
        }
    };
    let cfg = DagSearchConfig {
        lambda: args.lambda,
        parent_kernel: match args.parent_kernel {
            ParentKernelName::Additive => ParentKernel::Additive,
            ParentKernelName::Joint => ParentKernel::Joint,
        },
    };
    let start = Instant::now();
    let ranked = dag_search_with(&data, &candidates, &spec, &cfg)?;
    let wall_time_ms = elapsed_ms(start);
    let mut entries = Vec::with_capacity(ranked.len());
    for (r, item) in ranked.iter().enumerate() {
        entries.push(RankedEntry {
            rank: r + 1,
            index: item.index,
            edges: io::dag_to_text(&item.dag),
            p_value: item.p_value,
            statistic: item.statistic,
            shd: truth.as_ref().map(|t| shd(&item.dag, t)).transpose()?,
        });
    }
    let report = DagReport {
        variables: manifest.names(),
        truth: truth.as_ref().map(io::dag_to_text),
        truth_rank: truth
            .as_ref()
            .and_then(|t| ranked.iter().position(|item| item.dag == *t).map(|p| p + 1)),
        ranked: entries,
        wall_time_ms,
    };
    write_json(&report, args.out.as_deref())
}

// ---- profile ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileOutput {
    pub variables: Vec<String>,
    pub groups: Vec<(String, Vec<String>)>,
    pub alpha: f64,
    pub seed: u64,
    pub n_sets: usize,
    pub rows: Vec<ProfileRow>,
}

pub fn profile(args: &ProfileArgs) -> Result<(), CliError> {
    let (data, manifest) = io::load_dataset(&args.input.data, args.input.manifest.as_deref())?;
    check_samples(&data)?;
    let spec = kernel_spec(&args.kernel)?;
    let groups = io::load_groups(&args.groups, &manifest)?;
    let report = profile_interactions(&data, &groups, &args.orders, args.n_sets, &spec, args.alpha, args.seed)?;
    let names = manifest.names();
    let csv_path = args.out.with_extension("csv");
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", csv_path.display())))?;
    let csv_err = |e: csv::Error| CliError::Input(format!("cannot write {}: {e}", csv_path.display()));
    w.write_record(["group", "order", "n_sets", "rejections", "percentage", "warning"])
        .map_err(csv_err)?;
    for r in &report.rows {
        w.write_record([
            r.group.clone(),
            r.order.to_string(),
            r.n_sets.to_string(),
            r.rejections.to_string(),
            r.percentage.to_string(),
            r.warning.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", csv_path.display())))?;
    let output = ProfileOutput {
        groups: groups
            .iter()
            .map(|g| (g.label.clone(), g.members.iter().map(|&i| names[i].clone()).collect()))
            .collect(),
        variables: names,
        alpha: report.alpha,
        seed: report.seed,
        n_sets: report.n_sets,
        rows: report.rows,
    };
    write_json(&output, Some(&args.out.with_extension("json")))
}
