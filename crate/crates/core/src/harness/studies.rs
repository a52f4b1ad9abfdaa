//! Convergence studies over an `ε` ladder.
//!
//! Ladder runs share one tick clock (sixteen ticks per smallest `ε`), one
//! SDE substep and one seed, so sample `s` sees the same Brownian path at
//! every `ε`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::io::Table;
use super::HarnessError;
use crate::det_solver::{max_stable_dt, DetScheme, SubstepPolicy};
use crate::grid::{l1_distance, Field, TorusGrid};
use crate::kinetic::{
    doubling_functional, doubling_rate_table, kinetic_measure_mass, DoublingReport, KineticTriple,
    RateTable, XiGrid,
};
use crate::model::ProblemSpec;
use crate::numerics::{loglog_fit, MeanEstimate};
use crate::sde_solver::moment_bound;
use crate::splitting::{run_ensemble, MemberInit, SplitPlan, SplitRun, TickClock};

/// What a study runs; echoed into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problem: ProblemSpec,
    pub config: RunConfig,
    pub ladder: Vec<f64>,
    pub grids: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
    pub output_times: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl ExperimentPlan {
    pub fn from_config(
        config: RunConfig,
        ladder: Vec<f64>,
        diagnostics: &[&str],
    ) -> Result<Self, HarnessError> {
        let problem = config.problem_spec()?;
        let plan = Self {
            output_times: config.output_times(&problem),
            grids: vec![config.grid.n],
            samples: config.split.samples,
            seed: config.seed,
            problem,
            config,
            ladder,
            diagnostics: diagnostics.iter().map(|s| s.to_string()).collect(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.ladder.is_empty() || self.grids.is_empty() {
            return Err(HarnessError::Plan("ladders must be nonempty".into()));
        }
        if self.ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(HarnessError::Plan(format!("nonpositive epsilon in {:?}", self.ladder)));
        }
        if self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(HarnessError::Plan(format!(
                "epsilon ladder {:?} must be strictly decreasing",
                self.ladder
            )));
        }
        if self.samples == 0 {
            return Err(HarnessError::Plan("samples must be positive".into()));
        }
        Ok(())
    }

    pub fn smallest_epsilon(&self) -> f64 {
        *self.ladder.last().expect("validated")
    }
}

/// One rung of a ladder.
#[derive(Debug, Clone)]
pub struct LadderRun {
    pub epsilon: f64,
    pub run: SplitRun,
}

/// Plan for one rung on the shared clock. The substep defaults to the
/// smallest `ε / 8` so that only the splitting differs between rungs.
pub fn ladder_plan(plan: &ExperimentPlan, epsilon: f64) -> Result<SplitPlan, HarnessError> {
    let spec = &plan.problem;
    let eps_min = plan.smallest_epsilon();
    let clock = TickClock::for_epsilon(spec.horizon, eps_min)?;
    let mut split = SplitPlan::on_clock(spec, epsilon, plan.seed, &plan.output_times, clock)?;
    split.set_substep(eps_min / 8.0);
    plan.config.apply(spec, &mut split)?;
    Ok(split)
}

fn members(spec: &ProblemSpec, grid: TorusGrid, samples: usize) -> Result<Vec<MemberInit>, HarnessError> {
    Ok(crate::splitting::default_members(spec, grid, samples)?)
}

pub fn run_ladder(plan: &ExperimentPlan, n: usize) -> Result<Vec<LadderRun>, HarnessError> {
    plan.validate()?;
    let grid = TorusGrid::new(plan.problem.dim, n)?;
    plan.ladder
        .iter()
        .map(|&epsilon| {
            let split = ladder_plan(plan, epsilon)?;
            let run = run_ensemble(&plan.problem, &split, members(&plan.problem, grid, plan.samples)?)?;
            Ok(LadderRun { epsilon, run })
        })
        .collect()
}

fn snapshot_times(run: &SplitRun) -> Vec<f64> {
    run.trajectories[0].snapshots.iter().map(|s| s.time).collect()
}

/// `E sup_t ‖v^ε − v^{ε'}‖₁` for consecutive rungs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyRow {
    pub epsilon: f64,
    pub epsilon_next: f64,
    pub per_time: Vec<MeanEstimate>,
    pub sup: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CauchyTable {
    pub times: Vec<f64>,
    pub rows: Vec<CauchyRow>,
    /// Slope of `log E sup` against `log ε`.
    pub fitted_order: Option<f64>,
}

pub fn cauchy_table(runs: &[LadderRun]) -> Result<CauchyTable, HarnessError> {
    let times = runs.first().map(|r| snapshot_times(&r.run)).unwrap_or_default();
    let mut rows = Vec::new();
    for w in runs.windows(2) {
        let (a, b) = (&w[0].run, &w[1].run);
        let per_sample: Vec<Vec<f64>> = a
            .trajectories
            .par_iter()
            .zip(&b.trajectories)
            .map(|(x, y)| {
                x.snapshots
                    .iter()
                    .zip(&y.snapshots)
                    .map(|(s, t)| l1_distance(&s.triple.v, &t.triple.v))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let per_time = (0..times.len())
            .map(|k| MeanEstimate::from_samples(&per_sample.iter().map(|d| d[k]).collect::<Vec<_>>()))
            .collect();
        let sups: Vec<f64> = per_sample.iter().map(|d| d.iter().fold(0.0_f64, |m, v| m.max(*v))).collect();
        rows.push(CauchyRow {
            epsilon: w[0].epsilon,
            epsilon_next: w[1].epsilon,
            per_time,
            sup: MeanEstimate::from_samples(&sups),
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.sup.mean).collect();
    Ok(CauchyTable {
        times,
        fitted_order: loglog_fit(&xs, &ys).map(|f| f.0),
        rows,
    })
}

impl CauchyTable {
    pub fn to_tables(&self) -> (Table, Table) {
        let mut sup = Table::new("cauchy", &["epsilon", "epsilon_next", "sup_distance", "std_error"]);
        let mut per = Table::new(
            "cauchy_per_time",
            &["epsilon", "epsilon_next", "time", "distance", "std_error"],
        );
        for r in &self.rows {
            sup.push(vec![r.epsilon.into(), r.epsilon_next.into(), r.sup.mean.into(), r.sup.std_error.into()]);
            for (t, m) in self.times.iter().zip(&r.per_time) {
                per.push(vec![
                    r.epsilon.into(),
                    r.epsilon_next.into(),
                    (*t).into(),
                    m.mean.into(),
                    m.std_error.into(),
                ]);
            }
        }
        (sup, per)
    }
}

/// `E‖v^ε(t) − ṽ^ε(t)‖₁` per output time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRow {
    pub epsilon: f64,
    pub per_time: Vec<MeanEstimate>,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingTable {
    pub times: Vec<f64>,
    pub rows: Vec<CouplingRow>,
    pub fitted_exponent: Option<f64>,
    /// Smallest `C` with `max_t E‖v − ṽ‖₁ ≤ C √ε + ε` on every rung.
    pub constant: f64,
}

pub fn vtilde_coupling_check(runs: &[LadderRun]) -> Result<CouplingTable, HarnessError> {
    let times = runs.first().map(|r| snapshot_times(&r.run)).unwrap_or_default();
    let mut rows = Vec::new();
    for r in runs {
        let per_sample: Vec<Vec<f64>> = r
            .run
            .trajectories
            .iter()
            .map(|t| {
                t.snapshots
                    .iter()
                    .map(|s| l1_distance(&s.triple.v, &s.triple.vtilde))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        let per_time: Vec<MeanEstimate> = (0..times.len())
            .map(|k| MeanEstimate::from_samples(&per_sample.iter().map(|d| d[k]).collect::<Vec<_>>()))
            .collect();
        let max = per_time.iter().fold(0.0_f64, |m, e| m.max(e.mean));
        rows.push(CouplingRow {
            epsilon: r.epsilon,
            per_time,
            max,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.max).collect();
    let constant = rows
        .iter()
        .map(|r| ((r.max - r.epsilon) / r.epsilon.sqrt()).max(0.0))
        .fold(0.0, f64::max);
    Ok(CouplingTable {
        times,
        fitted_exponent: loglog_fit(&xs, &ys).map(|f| f.0),
        constant,
        rows,
    })
}

impl CouplingTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new("vtilde_coupling", &["epsilon", "time", "distance", "std_error", "bound"]);
        for r in &self.rows {
            let bound = self.constant * r.epsilon.sqrt() + r.epsilon;
            for (time, m) in self.times.iter().zip(&r.per_time) {
                t.push(vec![r.epsilon.into(), (*time).into(), m.mean.into(), m.std_error.into(), bound.into()]);
            }
        }
        t
    }
}

/// Largest within-cell increments of each rung.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementRow {
    pub epsilon: f64,
    pub vtilde_max: f64,
    pub v_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementTable {
    pub rows: Vec<IncrementRow>,
    /// Slope of `log max E‖v(t) − v(s)‖₁` against `log ε`.
    pub v_exponent: Option<f64>,
    /// Smallest `C` with `max E‖v(t) − v(s)‖₁ ≤ C T √ε` on every rung.
    pub v_constant: f64,
}

pub fn increment_table(runs: &[LadderRun]) -> IncrementTable {
    let rows: Vec<IncrementRow> = runs
        .iter()
        .map(|r| IncrementRow {
            epsilon: r.epsilon,
            vtilde_max: r.run.cells.iter().map(|c| c.vtilde_increment).fold(0.0, f64::max),
            v_max: r.run.cells.iter().map(|c| c.v_increment).fold(0.0, f64::max),
        })
        .collect();
    let xs: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.v_max).collect();
    let horizon = runs.first().map_or(1.0, |r| r.run.partition.horizon);
    IncrementTable {
        v_exponent: loglog_fit(&xs, &ys).map(|f| f.0),
        v_constant: rows
            .iter()
            .map(|r| r.v_max / (horizon * r.epsilon.sqrt()))
            .fold(0.0, f64::max),
        rows,
    }
}

impl IncrementTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(
            "increments",
            &["epsilon", "vtilde_max", "vtilde_bound", "v_max", "v_bound"],
        );
        for r in &self.rows {
            t.push(vec![
                r.epsilon.into(),
                r.vtilde_max.into(),
                (2.0 * r.epsilon).into(),
                r.v_max.into(),
                (self.v_constant * r.epsilon.sqrt()).into(),
            ]);
        }
        t
    }
}

/// `E sup_t ‖v‖_p^p` and `E sup_t ‖ṽ‖_p^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub epsilon: f64,
    pub p: u32,
    pub sup_v: MeanEstimate,
    pub sup_vtilde: MeanEstimate,
    /// Single-time a-priori bound `e^{KT}(E‖u₀‖_p^p + K_T T)`.
    pub pointwise_bound: f64,
}

pub fn moment_table(runs: &[LadderRun], spec: &ProblemSpec, u0: &Field) -> Vec<MomentRow> {
    let c_g = spec.noise.linear_growth_const();
    let mut rows = Vec::new();
    for r in runs {
        for (idx, p) in [(0usize, 2u32), (1, 4)] {
            let v: Vec<f64> = r.run.trajectories.iter().map(|t| t.sup_v[idx]).collect();
            let vt: Vec<f64> = r.run.trajectories.iter().map(|t| t.sup_vtilde[idx]).collect();
            let init = crate::grid::lp_norm_pow(u0, p as f64);
            rows.push(MomentRow {
                epsilon: r.epsilon,
                p,
                sup_v: MeanEstimate::from_samples(&v),
                sup_vtilde: MeanEstimate::from_samples(&vt),
                pointwise_bound: moment_bound(p as f64, c_g, init, spec.horizon),
            });
        }
    }
    rows
}

pub fn moment_rows_table(rows: &[MomentRow]) -> Table {
    let mut t = Table::new(
        "moments",
        &["epsilon", "p", "sup_v", "sup_v_se", "sup_vtilde", "sup_vtilde_se", "pointwise_bound"],
    );
    for r in rows {
        t.push(vec![
            r.epsilon.into(),
            (r.p as usize).into(),
            r.sup_v.mean.into(),
            r.sup_v.std_error.into(),
            r.sup_vtilde.mean.into(),
            r.sup_vtilde.std_error.into(),
            r.pointwise_bound.into(),
        ]);
    }
    t
}

/// Kinetic-measure masses of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassRow {
    pub epsilon: f64,
    pub m0: MeanEstimate,
    pub m2: MeanEstimate,
    pub m0_squared: MeanEstimate,
    pub nominal_m0: MeanEstimate,
    pub n1: MeanEstimate,
    /// `min_samples (m − n₁)`.
    pub min_gap: f64,
    pub clamp_count: usize,
}

pub fn mass_row(epsilon: f64, run: &SplitRun) -> Result<MassRow, HarnessError> {
    let (_, s0) = kinetic_measure_mass(&run.ledgers, 0)?;
    let (_, s2) = kinetic_measure_mass(&run.ledgers, 2)?;
    let nominal: Vec<f64> = run
        .ledgers
        .iter()
        .map(|l| l.nominal_weighted_mass(0))
        .collect::<Result<_, _>>()?;
    let n1: Vec<f64> = run.ledgers.iter().map(|l| l.n1_mass).collect();
    let min_gap = run
        .ledgers
        .iter()
        .map(|l| l.m_mass().map(|m| m - l.n1_mass))
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(MassRow {
        epsilon,
        m0: s0.mass,
        m2: s2.mass,
        m0_squared: s0.mass_squared,
        nominal_m0: MeanEstimate::from_samples(&nominal),
        n1: MeanEstimate::from_samples(&n1),
        min_gap,
        clamp_count: run.ledgers.iter().map(|l| l.clamp_count).sum(),
    })
}

pub fn mass_rows_table(rows: &[MassRow]) -> Table {
    let mut t = Table::new(
        "kinetic_mass",
        &[
            "epsilon", "m0", "m0_se", "m2", "m2_se", "m0_squared", "m0_squared_se", "nominal_m0",
            "n1", "min_m_minus_n1", "clamp_count",
        ],
    );
    for r in rows {
        t.push(vec![
            r.epsilon.into(),
            r.m0.mean.into(),
            r.m0.std_error.into(),
            r.m2.mean.into(),
            r.m2.std_error.into(),
            r.m0_squared.mean.into(),
            r.m0_squared.std_error.into(),
            r.nominal_m0.mean.into(),
            r.n1.mean.into(),
            r.min_gap.into(),
            r.clamp_count.into(),
        ]);
    }
    t
}

/// ξ grid fine enough for `δ ≥ 2Δξ` on the problem range.
pub fn doubling_xi_grid(spec: &ProblemSpec, delta_min: f64) -> Result<XiGrid, HarnessError> {
    let (lo, hi) = spec.eval_range;
    let n = ((2.0 * (hi - lo) / delta_min).ceil() as usize).max(128);
    Ok(XiGrid::new(lo, hi, n)?)
}

/// Triples of every sample at snapshot index `k`.
pub fn triples_at(run: &SplitRun, k: usize) -> Vec<KineticTriple> {
    run.trajectories.iter().map(|t| t.snapshots[k].triple.clone()).collect()
}

/// Doubling functional between two rungs at snapshot `k` along an `η`
/// ladder with `δ = η^θ`.
pub fn doubling_table(
    first: &LadderRun,
    second: &LadderRun,
    k: usize,
    etas: &[f64],
    theta: f64,
    spec: &ProblemSpec,
) -> Result<(Vec<DoublingReport>, RateTable), HarnessError> {
    let delta_min = etas.iter().map(|e| e.powf(theta)).fold(f64::INFINITY, f64::min);
    let xi = doubling_xi_grid(spec, delta_min)?;
    let (a, b) = (triples_at(&first.run, k), triples_at(&second.run, k));
    let reports = etas
        .iter()
        .map(|&eta| {
            doubling_functional(&a, &b, eta, eta.powf(theta), &xi, first.epsilon, second.epsilon, spec)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = doubling_rate_table(&reports, theta, spec)?;
    Ok((reports, table))
}

pub fn doubling_rows_table(time: f64, reports: &[DoublingReport], table: &RateTable) -> Table {
    let mut t = Table::new(
        "doubling",
        &[
            "time", "eta", "delta", "epsilon", "epsilon_prime", "value", "std_error", "product_value",
            "f1", "f2", "f3", "envelope",
        ],
    );
    for (r, row) in reports.iter().zip(&table.rows) {
        t.push(vec![
            time.into(),
            r.eta.into(),
            r.delta.into(),
            r.epsilon.into(),
            r.epsilon_prime.into(),
            r.value.mean.into(),
            r.value.std_error.into(),
            r.product_value.mean.into(),
            r.f1.into(),
            r.f2.into(),
            r.f3.into(),
            row.envelope.into(),
        ]);
    }
    t
}

/// Stable step for any state inside the problem's evaluation range.
pub fn range_stable_dt(scheme: &DetScheme, spec: &ProblemSpec, grid: TorusGrid) -> Result<f64, HarnessError> {
    let (lo, hi) = spec.eval_range;
    let vals = (0..grid.cell_count()).map(|i| if i % 2 == 0 { lo } else { hi }).collect();
    Ok(max_stable_dt(scheme, &Field::new(grid, vals)?, spec))
}

/// Second initial datum of a contraction pair: `u₀ + a cos(4πx)`.
pub fn perturbed(u0: &Field, amplitude: f64) -> Result<Field, HarnessError> {
    let grid = *u0.grid();
    let vals = u0
        .values()
        .iter()
        .enumerate()
        .map(|(c, v)| v + amplitude * (4.0 * std::f64::consts::PI * grid.center(c)[0]).cos())
        .collect();
    Ok(Field::new(grid, vals)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionRow {
    pub epsilon: f64,
    pub initial: MeanEstimate,
    pub per_time: Vec<MeanEstimate>,
    /// `max_t E‖v₁ − v₂‖₁ / E‖u₁₀ − u₂₀‖₁ − 1`.
    pub slack: f64,
    /// Per time, `E‖v₁ − v₂‖₁ − E‖u₁₀ − u₂₀‖₁` within three standard errors.
    pub within_3se: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTable {
    pub times: Vec<f64>,
    pub rows: Vec<ContractionRow>,
}

/// Pairs `(u₀, u₀ + a cos 4πx)` on a common Brownian path and a common
/// partition; both members take the same deterministic steps (capped at the
/// range-stable step).
pub fn contraction_study(plan: &ExperimentPlan, amplitude: f64) -> Result<ContractionTable, HarnessError> {
    plan.validate()?;
    let spec = &plan.problem;
    let grid = TorusGrid::new(spec.dim, plan.grids[0])?;
    let u1 = spec.initial_field(grid)?;
    let u2 = perturbed(&u1, amplitude)?;
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for &epsilon in &plan.ladder {
        let mut split = ladder_plan(plan, epsilon)?;
        let cap = range_stable_dt(&split.det, spec, grid)?;
        split.det = split.det.clone().with_substeps(SubstepPolicy::Capped { dt_max: cap });
        let members: Vec<MemberInit> = (0..plan.samples as u64)
            .flat_map(|s| {
                [
                    MemberInit { initial: u1.clone(), stream: s },
                    MemberInit { initial: u2.clone(), stream: s },
                ]
            })
            .collect();
        let run = run_ensemble(spec, &split, members)?;
        times = snapshot_times(&run);
        let pairs: Vec<(&_, &_)> = run
            .trajectories
            .chunks(2)
            .map(|c| (&c[0], &c[1]))
            .collect();
        let d0 = l1_distance(&u1, &u2)?;
        let initial = MeanEstimate::from_samples(&vec![d0; pairs.len()]);
        let per_time: Vec<MeanEstimate> = (0..times.len())
            .map(|k| {
                let d = pairs
                    .iter()
                    .map(|(a, b)| l1_distance(&a.snapshots[k].triple.v, &b.snapshots[k].triple.v))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(MeanEstimate::from_samples(&d))
            })
            .collect::<Result<_, HarnessError>>()?;
        let slack = per_time.iter().map(|m| m.mean / d0 - 1.0).fold(f64::NEG_INFINITY, f64::max);
        let within_3se = per_time
            .iter()
            .all(|m| m.mean <= d0 * (1.0 + 1e-12) + 3.0 * m.std_error);
        rows.push(ContractionRow {
            epsilon,
            initial,
            per_time,
            slack,
            within_3se,
        });
    }
    Ok(ContractionTable { times, rows })
}

impl ContractionTable {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(
            "contraction",
            &["epsilon", "time", "distance", "std_error", "initial_distance"],
        );
        for r in &self.rows {
            for (time, m) in self.times.iter().zip(&r.per_time) {
                t.push(vec![
                    r.epsilon.into(),
                    (*time).into(),
                    m.mean.into(),
                    m.std_error.into(),
                    r.initial.mean.into(),
                ]);
            }
        }
        t
    }
}

/// Partition times of a run, one row per node.
pub fn partition_table(name: &str, runs: &[(f64, &SplitRun)]) -> Table {
    let mut t = Table::new(name, &["epsilon", "index", "tick", "time"]);
    for (eps, run) in runs {
        for (i, (k, time)) in run.partition.ticks.iter().zip(&run.partition.times).enumerate() {
            t.push(vec![(*eps).into(), i.into(), (*k).into(), (*time).into()]);
        }
    }
    t
}

/// Per-cell diagnostics of a run.
pub fn cell_table(name: &str, runs: &[(f64, &SplitRun)]) -> Table {
    let mut t = Table::new(
        name,
        &["epsilon", "cell", "t0", "t1", "crossed", "d_final", "vtilde_increment", "v_increment"],
    );
    for (eps, run) in runs {
        for (i, c) in run.cells.iter().enumerate() {
            let d_final = c.d_trace.last().map_or(0.0, |d| d.1);
            t.push(vec![
                (*eps).into(),
                i.into(),
                c.t0.into(),
                c.t1.into(),
                c.crossed.into(),
                d_final.into(),
                c.vtilde_increment.into(),
                c.v_increment.into(),
            ]);
        }
    }
    t
}

/// Search traces `D(τ)` of a run.
pub fn trace_table(name: &str, runs: &[(f64, &SplitRun)]) -> Table {
    let mut t = Table::new(name, &["epsilon", "cell", "tau", "d"]);
    for (eps, run) in runs {
        for (i, c) in run.cells.iter().enumerate() {
            for (tau, d) in &c.d_trace {
                t.push(vec![(*eps).into(), i.into(), (*tau).into(), (*d).into()]);
            }
        }
    }
    t
}

/// Per-sample ledger values.
pub fn ledger_table(name: &str, eps: f64, run: &SplitRun) -> Result<Table, HarnessError> {
    let mut t = Table::new(
        name,
        &["epsilon", "stream", "m0", "m2", "nominal_m0", "n1", "scheme_dissipation", "clamp_count"],
    );
    for (traj, l) in run.trajectories.iter().zip(&run.ledgers) {
        t.push(vec![
            eps.into(),
            traj.stream.into(),
            l.weighted_mass(0)?.into(),
            l.weighted_mass(2)?.into(),
            l.nominal_weighted_mass(0)?.into(),
            l.n1_mass.into(),
            l.scheme_dissipation[0].into(),
            l.clamp_count.into(),
        ]);
    }
    Ok(t)
}
