//! Seeded benchmark sweeps over dataset sizes, trials and methods.
//!
//! CSV schema (one header line, then data rows, then summary rows):
//!
//! ```text
//! scenario,q,method,L,N,trial,rate,error,accuracy,time_repr,time_spectral,status
//! ```
//!
//! * `q` is the perturbation bound (`0` for the random scenario),
//! * `L` is empty for OMP,
//! * data rows come in `(N, trial, method)` order with a numeric `trial`
//!   and status `ok` or `error: <msg>`,
//! * after the data rows of each `N`, every method gets a `mean` and a `std`
//!   row over its successful trials; their `status` is `summary:<count>`,
//! * time columns are seconds, or empty when timing is disabled.

use std::fmt::Write as _;
use std::time::Instant;

use assc_core::aols::SolverConfig;
use assc_core::dataset::{generate, SubspaceSpec};
use assc_core::evaluation::{mean_std, MetricsReport, RuntimeBreakdown};
use assc_core::omp::OmpConfig;
use assc_core::representation::{build_representation, build_similarity, SolverKind};
use assc_core::spectral::{cluster_with, SpectralConfig};
use assc_core::{Error, Result};

pub const CSV_HEADER: &str =
    "scenario,q,method,L,N,trial,rate,error,accuracy,time_repr,time_spectral,status";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Random,
    /// `Q·𝟙` shift with `Q ~ U(0, q)`.
    Perturbed(f64),
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Random => "random",
            Scenario::Perturbed(_) => "perturbed",
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            Scenario::Random => 0.0,
            Scenario::Perturbed(q) => *q,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Aols { block_size: usize },
    Omp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Aols { .. } => "aols",
            Method::Omp => "omp",
        }
    }

    /// Display form such as `aols(L=2)`.
    pub fn label(&self) -> String {
        match self {
            Method::Aols { block_size } => format!("aols(L={block_size})"),
            Method::Omp => "omp".into(),
        }
    }

    fn block_column(&self) -> String {
        match self {
            Method::Aols { block_size } => block_size.to_string(),
            Method::Omp => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub scenario: Scenario,
    pub renormalize: bool,
    pub n_subspaces: usize,
    pub subspace_dim: usize,
    pub ambient_dim: usize,
    /// Total point counts; each must be a multiple of `n_subspaces`.
    pub sizes: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub solver: SolverConfig,
    /// OMP support cap; defaults to the subspace dimension.
    pub max_sparsity: Option<usize>,
    pub restarts: usize,
    pub seed_base: u64,
    pub record_timing: bool,
}

impl BenchmarkPlan {
    /// Five 6-dimensional subspaces in 9 dimensions, 20 trials, AOLS with
    /// `L ∈ {1, 2}` and OMP.
    pub fn paper_defaults(scenario: Scenario) -> Self {
        Self {
            scenario,
            renormalize: true,
            n_subspaces: 5,
            subspace_dim: 6,
            ambient_dim: 9,
            sizes: vec![250, 500, 1000, 2000, 5000],
            trials: 20,
            methods: vec![
                Method::Aols { block_size: 1 },
                Method::Aols { block_size: 2 },
                Method::Omp,
            ],
            solver: SolverConfig::default(),
            max_sparsity: None,
            restarts: 20,
            seed_base: 0,
            record_timing: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.methods.is_empty() || self.trials == 0 {
            return Err(Error::Validation(
                "benchmark needs at least one size, method and trial".into(),
            ));
        }
        if self.n_subspaces == 0 {
            return Err(Error::Validation("need at least one subspace".into()));
        }
        for &n in &self.sizes {
            if n == 0 || n % self.n_subspaces != 0 {
                return Err(Error::Validation(format!(
                    "size {n} is not a positive multiple of {} subspaces",
                    self.n_subspaces
                )));
            }
        }
        self.spec(self.sizes[0], 0).validate()?;
        self.solver.validate()?;
        for m in &self.methods {
            self.solver_kind(*m).map(|_| ())?;
        }
        Ok(())
    }

    pub fn spec(&self, size: usize, trial: usize) -> SubspaceSpec {
        SubspaceSpec {
            n_subspaces: self.n_subspaces,
            subspace_dim: self.subspace_dim,
            ambient_dim: self.ambient_dim,
            points_per_subspace: size / self.n_subspaces,
            perturbation: match self.scenario {
                Scenario::Random => None,
                Scenario::Perturbed(q) => Some(q),
            },
            renormalize: self.renormalize,
            seed: self.seed_base.wrapping_add(trial as u64),
        }
    }

    pub fn solver_kind(&self, method: Method) -> Result<SolverKind> {
        Ok(match method {
            Method::Aols { block_size } => {
                let cfg = self.solver.with_block_size(block_size);
                cfg.validate()?;
                SolverKind::Aols(cfg)
            }
            Method::Omp => SolverKind::Omp(OmpConfig {
                max_sparsity: self.max_sparsity.unwrap_or(self.subspace_dim),
                epsilon: self.solver.epsilon,
            }),
        })
    }
}

/// One `(size, trial, method)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub size: usize,
    pub trial: usize,
    pub method: Method,
    pub outcome: std::result::Result<MetricsReport, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResults {
    pub scenario: Scenario,
    pub rows: Vec<TrialRow>,
    pub record_timing: bool,
}

/// Runs the full pipeline for one method on already generated data.
pub fn run_pipeline(
    data: &assc_core::DataMatrix,
    truth: &[usize],
    kind: &SolverKind,
    spectral: &SpectralConfig,
) -> Result<MetricsReport> {
    let t0 = Instant::now();
    let c = build_representation(data, kind)?;
    let t_repr = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let w = build_similarity(&c);
    let labels = cluster_with(&w, spectral)?;
    let t_spec = t1.elapsed().as_secs_f64();
    MetricsReport::evaluate(
        &c,
        &labels,
        truth,
        RuntimeBreakdown {
            representation: t_repr,
            spectral: t_spec,
            total: t_repr + t_spec,
        },
    )
}

/// Runs every `(size, trial, method)` combination in that order. Trials use
/// seed `seed_base + trial` for both data generation and k-means, so any
/// single trial can be rerun in isolation. A failing cell is recorded and
/// the sweep continues.
pub fn run(plan: &BenchmarkPlan) -> Result<BenchmarkResults> {
    run_with_progress(plan, |_| {})
}

pub fn run_with_progress(
    plan: &BenchmarkPlan,
    mut progress: impl FnMut(&TrialRow),
) -> Result<BenchmarkResults> {
    plan.validate()?;
    let mut rows = Vec::new();
    for &size in &plan.sizes {
        for trial in 0..plan.trials {
            let spec = plan.spec(size, trial);
            let generated = generate(&spec);
            for &method in &plan.methods {
                let outcome = match &generated {
                    Ok((data, model)) => plan
                        .solver_kind(method)
                        .and_then(|kind| {
                            let spectral = SpectralConfig {
                                clusters: plan.n_subspaces,
                                seed: spec.seed,
                                restarts: plan.restarts,
                            };
                            run_pipeline(data, &model.labels, &kind, &spectral)
                        })
                        .map(|mut report| {
                            report.scenario = plan.scenario.name().to_string();
                            report.method = method.name().to_string();
                            report.seed = spec.seed;
                            report
                        })
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                };
                let row = TrialRow {
                    size,
                    trial,
                    method,
                    outcome,
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(BenchmarkResults {
        scenario: plan.scenario,
        rows,
        record_timing: plan.record_timing,
    })
}

/// Aggregate over the successful trials of one `(size, method)` group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub size: usize,
    pub method: Method,
    pub count: usize,
    pub mean: [f64; 5],
    pub std: [f64; 5],
}

impl BenchmarkResults {
    pub fn summaries(&self) -> Vec<Summary> {
        let mut out: Vec<Summary> = Vec::new();
        let mut keys: Vec<(usize, Method)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.size, r.method)) {
                keys.push((r.size, r.method));
            }
        }
        for (size, method) in keys {
            let reports: Vec<&MetricsReport> = self
                .rows
                .iter()
                .filter(|r| r.size == size && r.method == method)
                .filter_map(|r| r.outcome.as_ref().ok())
                .collect();
            let cols: [Vec<f64>; 5] = [
                reports.iter().map(|m| m.subspace_preserving_rate).collect(),
                reports
                    .iter()
                    .map(|m| m.subspace_preserving_error)
                    .collect(),
                reports.iter().map(|m| m.clustering_accuracy).collect(),
                reports
                    .iter()
                    .map(|m| m.runtime_seconds.representation)
                    .collect(),
                reports.iter().map(|m| m.runtime_seconds.spectral).collect(),
            ];
            let mut mean = [f64::NAN; 5];
            let mut std = [f64::NAN; 5];
            for k in 0..5 {
                (mean[k], std[k]) = mean_std(&cols[k]);
            }
            out.push(Summary {
                size,
                method,
                count: reports.len(),
                mean,
                std,
            });
        }
        out
    }

    /// Mean of `(rate, error, accuracy)` for one group.
    pub fn mean_for(&self, size: usize, method: Method) -> Option<(f64, f64, f64)> {
        self.summaries()
            .into_iter()
            .find(|s| s.size == size && s.method == method)
            .map(|s| (s.mean[0], s.mean[1], s.mean[2]))
    }

    pub fn to_csv(&self) -> String {
        let scenario = self.scenario.name();
        let q = self.scenario.bound();
        let time = |v: f64| {
            if self.record_timing {
                format!("{v:.6}")
            } else {
                String::new()
            }
        };
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        let summaries = self.summaries();
        let mut sizes: Vec<usize> = self.rows.iter().map(|r| r.size).collect();
        sizes.dedup();
        for size in sizes {
            for r in self.rows.iter().filter(|r| r.size == size) {
                let prefix = format!(
                    "{scenario},{q},{},{},{},{}",
                    r.method.name(),
                    r.method.block_column(),
                    r.size,
                    r.trial
                );
                match &r.outcome {
                    Ok(m) => {
                        let _ = writeln!(
                            out,
                            "{prefix},{},{},{},{},{},ok",
                            m.subspace_preserving_rate,
                            m.subspace_preserving_error,
                            m.clustering_accuracy,
                            time(m.runtime_seconds.representation),
                            time(m.runtime_seconds.spectral)
                        );
                    }
                    Err(e) => {
                        let msg = e.replace([',', '\n'], ";");
                        let _ = writeln!(out, "{prefix},,,,,,error: {msg}");
                    }
                }
            }
            for s in summaries.iter().filter(|s| s.size == size) {
                for (label, vals) in [("mean", s.mean), ("std", s.std)] {
                    let _ = writeln!(
                        out,
                        "{scenario},{q},{},{},{},{label},{},{},{},{},{},summary:{}",
                        s.method.name(),
                        s.method.block_column(),
                        s.size,
                        vals[0],
                        vals[1],
                        vals[2],
                        time(vals[3]),
                        time(vals[4]),
                        s.count
                    );
                }
            }
        }
        out
    }
}

/// Parses `"250,500"` style lists.
pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Validation(format!("bad {what} `{s}`")))
        })
        .collect()
}
