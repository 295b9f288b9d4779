//! Argument definitions and implementations of the `generate`, `cluster` and
//! `benchmark` subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use assc_core::aols::SolverConfig;
use assc_core::dataset::{self, generate, SubspaceSpec};
use assc_core::evaluation::{MetricsReport, RuntimeBreakdown};
use assc_core::omp::OmpConfig;
use assc_core::representation::{build_representation, build_similarity, SolverKind};
use assc_core::spectral::{cluster_with, SpectralConfig};

use crate::benchmark::{self, parse_list, BenchmarkPlan, Method, Scenario};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "assc",
    version,
    about = "Sparse subspace clustering with accelerated OLS"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a union-of-subspaces dataset.
    Generate(GenerateArgs),
    /// Cluster a stored dataset.
    Cluster(ClusterArgs),
    /// Run a seeded sweep over sizes, trials and methods and write a CSV.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Aols,
    Omp,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Number of subspaces.
    #[arg(long = "n", default_value_t = 5)]
    pub n: usize,
    /// Subspace dimension.
    #[arg(long = "d", default_value_t = 6)]
    pub d: usize,
    /// Ambient dimension.
    #[arg(long = "D", default_value_t = 9)]
    pub big_d: usize,
    /// Points per subspace.
    #[arg(long = "per", default_value_t = 50)]
    pub per: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add `Q·1` with `Q ~ U(0, q)` to every point.
    #[arg(long, value_name = "q")]
    pub perturb: Option<f64>,
    /// Keep perturbed columns at their shifted norm.
    #[arg(long)]
    pub no_renormalize: bool,
    /// Output directory, or a `.csv` file path.
    #[arg(short, long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Stopping threshold on the squared residual norm.
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    /// AOLS iteration budget `T`.
    #[arg(long = "max-iter", default_value_t = 10)]
    pub max_iter: usize,
    /// OMP support size (defaults to the subspace dimension when known).
    #[arg(long = "max-sparsity")]
    pub max_sparsity: Option<usize>,
    /// k-means restarts.
    #[arg(long, default_value_t = 20)]
    pub restarts: usize,
    /// Leave timing fields at zero so that outputs are byte-reproducible.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Dataset file written by `generate`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Aols)]
    pub method: MethodArg,
    /// AOLS block size.
    #[arg(long = "L", default_value_t = 1)]
    pub block_size: usize,
    /// Number of clusters (defaults to `n` from the file header).
    #[arg(long)]
    pub clusters: Option<usize>,
    /// k-means seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Also write `C.txt` and `W.txt` as 1-based triplets.
    #[arg(long)]
    pub dump_matrices: bool,
    /// Output directory; labels go to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long = "n", default_value_t = 5)]
    pub n: usize,
    #[arg(long = "d", default_value_t = 6)]
    pub d: usize,
    #[arg(long = "D", default_value_t = 9)]
    pub big_d: usize,
    /// Total point counts, comma separated.
    #[arg(long, default_value = "250,500,1000,2000,5000")]
    pub sizes: String,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Methods, comma separated.
    #[arg(long, default_value = "aols,omp")]
    pub method: String,
    /// AOLS block sizes, comma separated; one AOLS run per value.
    #[arg(long = "L", default_value = "1,2")]
    pub block_sizes: String,
    /// Base seed; trial `t` uses `seed + t`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run the perturbed scenario with `Q ~ U(0, q)`.
    #[arg(long, value_name = "q")]
    pub perturb: Option<f64>,
    /// Keep perturbed columns at their shifted norm.
    #[arg(long)]
    pub no_renormalize: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// CSV path; the table goes to stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
    }
}

fn dataset_path(output: &Path) -> PathBuf {
    if output.extension().is_some_and(|e| e == "csv") {
        output.to_path_buf()
    } else {
        output.join("dataset.csv")
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut spec = SubspaceSpec::new(args.n, args.d, args.big_d, args.per, args.seed);
    spec.renormalize = !args.no_renormalize;
    if let Some(q) = args.perturb {
        spec = spec.with_perturbation(q);
    }
    spec.validate()?;
    let (data, model) = generate(&spec)?;
    let path = dataset_path(&args.output);
    ensure_parent(&path)?;
    dataset::save(&data, &model, &path)?;
    println!(
        "wrote {} ({}x{}, {} subspaces of dimension {}{})",
        path.display(),
        data.ambient_dim(),
        data.num_points(),
        args.n,
        args.d,
        match args.perturb {
            Some(q) => format!(", perturbation bound {q}"),
            None => String::new(),
        }
    );
    Ok(())
}

fn solver_config(solver: &SolverArgs, block_size: usize) -> SolverConfig {
    SolverConfig {
        block_size,
        epsilon: solver.epsilon,
        max_iterations: solver.max_iter,
        ..SolverConfig::default()
    }
}

pub fn cmd_cluster(args: &ClusterArgs) -> Result<(), CliError> {
    let (data, model) = dataset::load(&args.input)?;
    let clusters = args.clusters.unwrap_or(model.n_subspaces);
    let cfg = solver_config(&args.solver, args.block_size);
    let kind = match args.method {
        MethodArg::Aols => {
            cfg.validate()?;
            SolverKind::Aols(cfg)
        }
        MethodArg::Omp => {
            let dims = model.subspace_dims();
            let default = dims
                .iter()
                .copied()
                .max()
                .unwrap_or(cfg.max_iterations * cfg.block_size);
            SolverKind::Omp(OmpConfig {
                max_sparsity: args.solver.max_sparsity.unwrap_or(default),
                epsilon: args.solver.epsilon,
            })
        }
    };
    let spectral = SpectralConfig {
        clusters,
        seed: args.seed,
        restarts: args.solver.restarts,
    };

    let t0 = Instant::now();
    let c = build_representation(&data, &kind)?;
    let t_repr = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let w = build_similarity(&c);
    let labels = cluster_with(&w, &spectral)?;
    let t_spec = t1.elapsed().as_secs_f64();
    let runtime = if args.solver.no_timing {
        RuntimeBreakdown::default()
    } else {
        RuntimeBreakdown {
            representation: t_repr,
            spectral: t_spec,
            total: t_repr + t_spec,
        }
    };

    let warnings = c.warnings();
    if !warnings.is_empty() {
        eprintln!(
            "warning: {} column(s) ended with an empty support",
            warnings.len()
        );
    }

    let Some(dir) = &args.output else {
        println!("{}", labels.to_json());
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    fs::write(dir.join("labels.json"), labels.to_json() + "\n")?;
    fs::write(dir.join("labels.csv"), labels.to_csv())?;
    let mut report = MetricsReport::evaluate(&c, &labels, &model.labels, runtime)?;
    report.scenario = "file".into();
    report.method = kind.name().into();
    report.seed = args.seed;
    fs::write(dir.join("metrics.json"), report.to_json() + "\n")?;
    if args.dump_matrices {
        c.write_triplets(fs::File::create(dir.join("C.txt"))?)?;
        w.write_triplets(fs::File::create(dir.join("W.txt"))?)?;
    }
    println!(
        "clustered {} points into {} groups with {}: accuracy {:.4}, rate {:.4}",
        data.num_points(),
        clusters,
        kind.name(),
        report.clustering_accuracy,
        report.subspace_preserving_rate
    );
    Ok(())
}

/// Translates benchmark flags into a plan. AOLS appears once per block size,
/// in the order given, and OMP once.
pub fn benchmark_plan(args: &BenchmarkArgs) -> Result<BenchmarkPlan, CliError> {
    let methods_raw: Vec<String> = parse_list(&args.method, "method")?;
    let block_sizes: Vec<usize> = parse_list(&args.block_sizes, "L")?;
    let mut methods = Vec::new();
    for m in methods_raw {
        match m.as_str() {
            "aols" => methods.extend(block_sizes.iter().map(|&b| Method::Aols { block_size: b })),
            "omp" => methods.push(Method::Omp),
            other => {
                return Err(CliError::Usage(format!(
                    "unknown method `{other}`, expected aols or omp"
                )))
            }
        }
    }
    let scenario = match args.perturb {
        Some(q) => Scenario::Perturbed(q),
        None => Scenario::Random,
    };
    let plan = BenchmarkPlan {
        renormalize: !args.no_renormalize,
        n_subspaces: args.n,
        subspace_dim: args.d,
        ambient_dim: args.big_d,
        sizes: parse_list(&args.sizes, "sizes")?,
        trials: args.trials,
        methods,
        solver: solver_config(&args.solver, 1),
        max_sparsity: args.solver.max_sparsity,
        restarts: args.solver.restarts,
        seed_base: args.seed,
        record_timing: !args.solver.no_timing,
        ..BenchmarkPlan::paper_defaults(scenario)
    };
    plan.validate()?;
    Ok(plan)
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let plan = benchmark_plan(args)?;
    let total = plan.sizes.len() * plan.trials * plan.methods.len();
    let mut done = 0;
    let results = benchmark::run_with_progress(&plan, |row| {
        done += 1;
        let status = match &row.outcome {
            Ok(m) => format!("accuracy {:.4}", m.clustering_accuracy),
            Err(e) => format!("error: {e}"),
        };
        eprintln!(
            "[{done}/{total}] N={} trial={} {}: {status}",
            row.size,
            row.trial,
            row.method.label()
        );
    })?;
    let csv = results.to_csv();
    match &args.output {
        Some(path) => {
            ensure_parent(path)?;
            fs::write(path, csv)?;
        }
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}
