//! Command-line front end. `run_cli` returns the process exit code: 0 on
//! success, 2 on invalid input or a failed check, 1 on a runtime error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use super::acceptance::{evaluate_all, format_line, AcceptanceOptions};
use super::config::RunConfig;
use super::io::{FieldSidecar, OutputDir, RunManifest, Table};
use super::studies::{
    self, cauchy_table, contraction_study, doubling_table, increment_table, mass_row,
    moment_table, run_ladder, ExperimentPlan, LadderRun,
};
use super::HarnessError;
use crate::grid::{lp_norm_pow, Field};
use crate::model::{validate_hypotheses, ValidationTolerances};
use crate::model::BUILTIN_NAMES;
use crate::numerics::{pairwise_sum, MeanEstimate};
use crate::splitting::{run_splitting, SplitRun};

#[derive(Debug, Parser)]
#[command(name = "kinsplit", version, about = "Operator-splitting experiments for stochastic degenerate conservation laws")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rerun the invocation and resolved configuration stored in a manifest.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Invocation>,
}

#[derive(Debug, Clone, PartialEq, Default, Args, Serialize, Deserialize)]
pub struct ProblemArgs {
    /// Builtin problem name.
    #[arg(long)]
    pub problem: Option<String>,
    /// TOML run configuration; takes precedence over --problem.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cells per axis.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Ensemble size.
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct LadderArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Decreasing splitting parameters.
    #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05, 0.025])]
    pub ladder: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Invocation {
    /// Check the structural hypotheses of a problem.
    Validate {
        #[command(flatten)]
        problem: ProblemArgs,
    },
    /// One splitting run at a single epsilon.
    Run {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Cauchy distances, increments, moments and masses along a ladder.
    Cauchy {
        #[command(flatten)]
        ladder: LadderArgs,
    },
    /// L1 distance between runs from two nearby initial data.
    Contraction {
        #[command(flatten)]
        ladder: LadderArgs,
        /// Amplitude of the cos(4 pi x) perturbation.
        #[arg(long, default_value_t = 0.1)]
        perturbation: f64,
    },
    /// Doubling functional between the two finest rungs.
    Doubling {
        #[command(flatten)]
        ladder: LadderArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05])]
        eta: Vec<f64>,
        /// delta = eta^theta.
        #[arg(long, default_value_t = 1.5)]
        theta: f64,
        /// Evaluation time (defaults to the horizon).
        #[arg(long)]
        time: Option<f64>,
    },
    /// Evaluate every acceptance criterion.
    Report,
}

impl Invocation {
    fn name(&self) -> &'static str {
        match self {
            Invocation::Validate { .. } => "validate",
            Invocation::Run { .. } => "run",
            Invocation::Cauchy { .. } => "cauchy",
            Invocation::Contraction { .. } => "contraction",
            Invocation::Doubling { .. } => "doubling",
            Invocation::Report => "report",
        }
    }

    fn problem_args(&self) -> Option<&ProblemArgs> {
        match self {
            Invocation::Validate { problem } | Invocation::Run { problem, .. } => Some(problem),
            Invocation::Cauchy { ladder }
            | Invocation::Contraction { ladder, .. }
            | Invocation::Doubling { ladder, .. } => Some(&ladder.problem),
            Invocation::Report => None,
        }
    }
}

/// Failure categories mapped onto exit codes.
enum Failure {
    Invalid(String),
    Runtime(anyhow::Error),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Plan(_) | HarnessError::Model(_) => {
                Failure::Invalid(e.to_string())
            }
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

/// Parses `argv` (program name first) and executes; returns the exit code.
pub fn run_cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32, Failure> {
    let (invocation, stored_config) = match (&cli.manifest, cli.command) {
        (Some(path), _) => {
            let m = RunManifest::load(path)?;
            (m.invocation, m.plan.map(|p| p.config))
        }
        (None, Some(inv)) => (inv, None),
        (None, None) => return Err(Failure::Invalid("a subcommand or --manifest is required".into())),
    };
    let threads = cli.threads.unwrap_or_else(rayon::current_num_threads);
    if threads == 0 {
        return Err(Failure::Invalid("--threads must be positive".into()));
    }
    let out = cli
        .out
        .unwrap_or_else(|| PathBuf::from("kinsplit-out").join(invocation.name()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    pool.install(|| execute(&invocation, stored_config, &out, threads))
}

fn resolve(args: &ProblemArgs, stored: Option<RunConfig>) -> Result<RunConfig, HarnessError> {
    if let Some(c) = stored {
        return Ok(c);
    }
    let mut config = match (&args.config, &args.problem) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io {
                path: path.clone(),
                source,
            })?;
            RunConfig::from_toml(&text).map_err(|e| match e {
                HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?
        }
        (None, Some(name)) => RunConfig::for_builtin(name)?,
        (None, None) => {
            return Err(HarnessError::Config(format!(
                "--problem or --config is required; builtins: {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    };
    if let Some(n) = args.grid {
        config.grid.n = n;
    }
    if let Some(m) = args.samples {
        config.split.samples = m;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    Ok(config)
}

fn execute(
    invocation: &Invocation,
    stored: Option<RunConfig>,
    out: &Path,
    threads: usize,
) -> Result<i32, Failure> {
    let start = Instant::now();
    let mut manifest = RunManifest::new(invocation.clone(), threads);
    let config = match invocation.problem_args() {
        Some(args) => Some(resolve(args, stored)?),
        None => None,
    };
    let dir = OutputDir::create(out)?;
    let mut code = 0;
    match (invocation, config) {
        (Invocation::Validate { problem }, Some(config)) => {
            let spec = config.problem_spec()?;
            let samples = problem.samples.unwrap_or(256);
            let report = validate_hypotheses(&spec, samples, ValidationTolerances::default())
                .map_err(HarnessError::from)?;
            for c in &report.checks {
                println!(
                    "{} {}/{}: worst slack {:.3e}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.hypothesis,
                    c.name,
                    c.worst_slack
                );
            }
            dir.write_json("validation.json", &report)?;
            manifest.plan = Some(ExperimentPlan::from_config(config, vec![spec.horizon], &["validate"])?);
            if !report.passed() {
                code = 2;
            }
        }
        (Invocation::Run { epsilon, .. }, Some(mut config)) => {
            if let Some(e) = epsilon {
                config.split.epsilon = *e;
            }
            let eps = config.split.epsilon;
            let plan = ExperimentPlan::from_config(config, vec![eps], &["run"])?;
            let spec = &plan.problem;
            let grid = plan.config.torus(spec)?;
            let split = plan.config.split_plan(spec, eps)?;
            let run = run_splitting(spec, grid, plan.samples, &split).map_err(HarnessError::from)?;
            write_run(&dir, spec.name.as_str(), eps, &run)?;
            println!(
                "{}: eps = {eps}, {} cells, {} samples -> {}",
                spec.name,
                run.partition.cells(),
                plan.samples,
                out.display()
            );
            manifest.partitions.push(run.partition.clone());
            manifest.seeds.push(plan.seed);
            manifest.plan = Some(plan);
        }
        (Invocation::Cauchy { ladder }, Some(config)) => {
            let plan = ExperimentPlan::from_config(config, ladder.ladder.clone(), &["cauchy"])?;
            let runs = run_ladder(&plan, plan.grids[0])?;
            write_ladder(&dir, &plan, &runs)?;
            let table = cauchy_table(&runs)?;
            for r in &table.rows {
                println!(
                    "eps {:<8} vs {:<8} E sup L1 = {:.6} +- {:.6}",
                    r.epsilon, r.epsilon_next, r.sup.mean, r.sup.std_error
                );
            }
            record_ladder(&mut manifest, plan, &runs);
        }
        (Invocation::Contraction { ladder, perturbation }, Some(config)) => {
            let plan = ExperimentPlan::from_config(config, ladder.ladder.clone(), &["contraction"])?;
            let table = contraction_study(&plan, *perturbation)?;
            dir.write_table(&table.to_table())?;
            for r in &table.rows {
                println!(
                    "eps {:<8} initial L1 {:.6}, max relative growth {:.3e}, within 3 se: {}",
                    r.epsilon, r.initial.mean, r.slack, r.within_3se
                );
            }
            manifest.seeds.push(plan.seed);
            manifest.plan = Some(plan);
        }
        (Invocation::Doubling { ladder, eta, theta, time }, Some(config)) => {
            if ladder.ladder.len() < 2 {
                return Err(Failure::Invalid("doubling needs at least two ladder rungs".into()));
            }
            let mut config = config;
            let spec = config.problem_spec()?;
            let t = time.unwrap_or(spec.horizon);
            config.split.output_times = Some(vec![t]);
            let plan = ExperimentPlan::from_config(config, ladder.ladder.clone(), &["doubling"])?;
            let runs = run_ladder(&plan, plan.grids[0])?;
            let n = runs.len();
            let snaps = &runs[0].run.trajectories[0].snapshots;
            let k = snaps
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1.time - t).abs().total_cmp(&(b.1.time - t).abs()))
                .map(|(k, _)| k)
                .ok_or_else(|| Failure::Invalid("no snapshot times".into()))?;
            let (reports, table) = doubling_table(&runs[n - 2], &runs[n - 1], k, eta, *theta, &plan.problem)?;
            dir.write_table(&studies::doubling_rows_table(snaps[k].time, &reports, &table))?;
            for r in &table.rows {
                println!(
                    "eta {:<6} delta {:.4e}: value {:.6} +- {:.6}, product {:.6}, envelope {:.4}",
                    r.eta, r.delta, r.value, r.std_error, r.product_value, r.envelope
                );
            }
            println!(
                "fitted slope {:?}, envelope exponent {:.3}, nonincreasing: {}",
                table.fitted_slope, table.envelope_exponent, table.nonincreasing
            );
            dir.write_json("rate_table.json", &table)?;
            record_ladder(&mut manifest, plan, &runs);
        }
        (Invocation::Report, _) => {
            let opts = AcceptanceOptions { out: Some(out.to_path_buf()) };
            let results = evaluate_all(&opts, |r| println!("{}", format_line(r)))?;
            let passed = results.iter().filter(|r| r.passed).count();
            println!("{passed}/{} criteria passed", results.len());
            if passed != results.len() {
                code = 2;
            }
            manifest.criteria = results;
        }
        _ => unreachable!("problem arguments resolved for every study"),
    }
    manifest.wall_clock_seconds = start.elapsed().as_secs_f64();
    dir.write_manifest(&manifest)?;
    Ok(code)
}

fn record_ladder(manifest: &mut RunManifest, plan: ExperimentPlan, runs: &[LadderRun]) {
    manifest.partitions = runs.iter().map(|r| r.run.partition.clone()).collect();
    manifest.seeds.push(plan.seed);
    manifest.plan = Some(plan);
}

fn mean_field(fields: &[&Field]) -> Result<Field, HarnessError> {
    let grid = *fields[0].grid();
    let vals = (0..grid.cell_count())
        .map(|c| pairwise_sum(&fields.iter().map(|f| f.values()[c]).collect::<Vec<_>>()) / fields.len() as f64)
        .collect();
    Ok(Field::new(grid, vals)?)
}

fn snapshot_moments(eps: f64, run: &SplitRun) -> Table {
    let mut t = Table::new(
        "moments",
        &["epsilon", "time", "v_l2sq", "v_l2sq_se", "v_l4", "v_l4_se", "vtilde_l2sq", "vtilde_l2sq_se"],
    );
    for (k, snap) in run.trajectories[0].snapshots.iter().enumerate() {
        let stat = |f: &dyn Fn(&crate::kinetic::KineticTriple) -> f64| {
            MeanEstimate::from_samples(
                &run.trajectories.iter().map(|tr| f(&tr.snapshots[k].triple)).collect::<Vec<_>>(),
            )
        };
        let v2 = stat(&|tr| lp_norm_pow(&tr.v, 2.0));
        let v4 = stat(&|tr| lp_norm_pow(&tr.v, 4.0));
        let w2 = stat(&|tr| lp_norm_pow(&tr.vtilde, 2.0));
        t.push(vec![
            eps.into(),
            snap.time.into(),
            v2.mean.into(),
            v2.std_error.into(),
            v4.mean.into(),
            v4.std_error.into(),
            w2.mean.into(),
            w2.std_error.into(),
        ]);
    }
    t
}

fn write_run(dir: &OutputDir, problem: &str, eps: f64, run: &SplitRun) -> Result<(), HarnessError> {
    let runs = [(eps, run)];
    dir.write_table(&studies::partition_table("partition", &runs))?;
    dir.write_table(&studies::cell_table("cells", &runs))?;
    dir.write_table(&studies::trace_table("d_trace", &runs))?;
    dir.write_table(&studies::ledger_table("ledger", eps, run)?)?;
    dir.write_table(&snapshot_moments(eps, run))?;
    dir.write_table(&studies::mass_rows_table(&[mass_row(eps, run)?]))?;
    let first = &run.trajectories[0];
    for (k, snap) in first.snapshots.iter().enumerate() {
        let side = |quantity: &str, sample| FieldSidecar {
            problem: problem.into(),
            quantity: quantity.into(),
            epsilon: eps,
            time: snap.time,
            sample,
        };
        dir.write_field(&format!("v_s0_t{k:03}"), &snap.triple.v, &side("v", Some(first.stream)))?;
        dir.write_field(
            &format!("vtilde_s0_t{k:03}"),
            &snap.triple.vtilde,
            &side("vtilde", Some(first.stream)),
        )?;
        let all: Vec<&Field> = run.trajectories.iter().map(|t| &t.snapshots[k].triple.v).collect();
        dir.write_field(&format!("v_mean_t{k:03}"), &mean_field(&all)?, &side("v_mean", None))?;
    }
    Ok(())
}

fn write_ladder(dir: &OutputDir, plan: &ExperimentPlan, runs: &[LadderRun]) -> Result<(), HarnessError> {
    let spec = &plan.problem;
    let u0 = spec.initial_field(plan.config.torus(spec)?)?;
    let (sup, per) = cauchy_table(runs)?.to_tables();
    dir.write_table(&sup)?;
    dir.write_table(&per)?;
    dir.write_table(&studies::vtilde_coupling_check(runs)?.to_table())?;
    dir.write_table(&increment_table(runs).to_table())?;
    dir.write_table(&studies::moment_rows_table(&moment_table(runs, spec, &u0)))?;
    let masses = runs
        .iter()
        .map(|r| mass_row(r.epsilon, &r.run))
        .collect::<Result<Vec<_>, _>>()?;
    dir.write_table(&studies::mass_rows_table(&masses))?;
    let pairs: Vec<(f64, &SplitRun)> = runs.iter().map(|r| (r.epsilon, &r.run)).collect();
    dir.write_table(&studies::partition_table("partitions", &pairs))?;
    dir.write_table(&studies::cell_table("cells", &pairs))?;
    Ok(())
}
