//! Lie–Trotter composition over an adaptive partition.
//!
//! With `ũ₀ = u₀`, each cell `[t_n, t_{n+1})` applies
//!
//! ```text
//! t_{n+1} = first search point τ with  mean_samples ‖S(τ − t_n) ũ_n − ũ_n‖₁ > ε,
//!           capped at t_n + ε and T
//! u_n     = S(t_{n+1} − t_n) ũ_n
//! ũ_{n+1} = R(t_{n+1}, t_n) u_n
//! ```
//!
//! and the interpolants `v(t) = R(t, t_n) u_n`, `ṽ(t) = S(t − t_n) ũ_n`.
//!
//! All times live on an integer tick clock. Every sample owns a Brownian path
//! stored as prefix sums on that clock, so runs at different `ε` sharing a
//! clock and a seed see the same noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::det_solver::{det_solve, DetError, DetScheme, DetSolveReport};
use crate::grid::{l1_distance_slices, lp_norm_pow, Field, GridError, TorusGrid};
use crate::kinetic::{
    DissipationLedger, IntervalDissipation, KineticTriple, StochasticAccumulators, XiGrid,
};
use crate::model::{ModelError, ProblemSpec};
use crate::numerics::pairwise_sum;
use crate::rng::RngStream;
use crate::sde_solver::{sde_step, SdeError, SdeStepPlan};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Sde(#[from] SdeError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid splitting plan: {0}")]
    InvalidPlan(String),
    #[error("partition stopped at t = {reached} before the horizon {horizon}")]
    HorizonNotReached { reached: f64, horizon: f64 },
}

/// Uniform clock `t_k = k T / n` on `[0, T]` with `t_n = T` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickClock {
    pub horizon: f64,
    pub ticks: u64,
}

impl TickClock {
    pub fn new(horizon: f64, ticks: u64) -> Result<Self, SplitError> {
        if !(horizon > 0.0 && horizon.is_finite()) || ticks == 0 {
            return Err(SplitError::InvalidPlan(format!(
                "clock needs T > 0 and ticks > 0, got T = {horizon}, ticks = {ticks}"
            )));
        }
        Ok(Self { horizon, ticks })
    }

    /// At least sixteen ticks per `eps_min`, chosen so that `eps_min` is a
    /// whole number of ticks whenever `T / eps_min = p / q` with `q ≤ 64`.
    pub fn for_epsilon(horizon: f64, eps_min: f64) -> Result<Self, SplitError> {
        if !(eps_min > 0.0 && eps_min.is_finite()) {
            return Err(SplitError::InvalidPlan(format!("epsilon {eps_min} must be positive")));
        }
        let ratio = horizon / eps_min;
        let ticks = (1..=64u32)
            .map(|q| ratio * q as f64)
            .find(|r| (r - r.round()).abs() <= 1e-9 * r.max(1.0) && r.round() >= 1.0)
            .map(|r| 16.0 * r.round())
            .unwrap_or_else(|| (16.0 * ratio).ceil());
        Self::new(horizon, (ticks as u64).max(1))
    }

    pub fn tick(&self) -> f64 {
        self.horizon / self.ticks as f64
    }

    pub fn time(&self, k: u64) -> f64 {
        if k >= self.ticks {
            self.horizon
        } else {
            k as f64 * self.horizon / self.ticks as f64
        }
    }

    /// Whole ticks in `duration`, forgiving rounding just below an integer.
    pub fn ticks_in(&self, duration: f64) -> u64 {
        (duration / self.tick() + 1e-9).floor().max(0.0) as u64
    }

    pub fn nearest(&self, t: f64) -> u64 {
        ((t / self.tick()).round().max(0.0) as u64).min(self.ticks)
    }
}

/// Brownian motion of every mode sampled on the tick clock.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    /// `prefix[mode][k] = W_mode(t_k)`.
    prefix: Vec<Vec<f64>>,
}

impl BrownianPath {
    /// Tick `k` of mode `m` uses variate `k` of `RngStream(seed, stream, m)`.
    pub fn generate(seed: u64, stream: u64, modes: usize, clock: &TickClock) -> Self {
        let n = clock.ticks as usize;
        let scale = clock.tick().sqrt();
        let prefix = (0..modes)
            .map(|m| {
                let mut z = vec![0.0; n];
                RngStream::new(seed, stream, m as u64).fill_normals(0, &mut z);
                let mut w = Vec::with_capacity(n + 1);
                w.push(0.0);
                let mut acc = 0.0;
                for v in z {
                    acc += scale * v;
                    w.push(acc);
                }
                w
            })
            .collect();
        Self { prefix }
    }

    pub fn modes(&self) -> usize {
        self.prefix.len()
    }

    /// `W(t_q) − W(t_p)` for every mode.
    pub fn increments(&self, p: u64, q: u64, out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.prefix) {
            *o = w[q as usize] - w[p as usize];
        }
    }
}

/// Time grid of one splitting run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub epsilon: f64,
    pub horizon: f64,
    pub search_resolution: f64,
    pub ticks: Vec<u64>,
    pub times: Vec<f64>,
}

impl Partition {
    pub fn cells(&self) -> usize {
        self.times.len().saturating_sub(1)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Knobs of one run; every duration is a whole number of clock ticks.
#[derive(Debug, Clone)]
pub struct SplitPlan {
    pub epsilon: f64,
    pub seed: u64,
    pub clock: TickClock,
    pub cap_ticks: u64,
    pub search_ticks: u64,
    pub substep_ticks: u64,
    pub output_ticks: Vec<u64>,
    pub det: DetScheme,
    /// Keep `u_n` and `ũ_{n+1}` of every cell in the trajectories.
    pub keep_cell_states: bool,
}

impl SplitPlan {
    /// Defaults: clock from `ε`, search step `ε/16`, SDE substep `ε/8`, the
    /// standard scheme with parabolic accounting when `A ≠ 0`.
    pub fn new(
        spec: &ProblemSpec,
        epsilon: f64,
        seed: u64,
        output_times: &[f64],
    ) -> Result<Self, SplitError> {
        let clock = TickClock::for_epsilon(spec.horizon, epsilon)?;
        Self::on_clock(spec, epsilon, seed, output_times, clock)
    }

    pub fn on_clock(
        spec: &ProblemSpec,
        epsilon: f64,
        seed: u64,
        output_times: &[f64],
        clock: TickClock,
    ) -> Result<Self, SplitError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(SplitError::InvalidPlan(format!("epsilon {epsilon} must be positive")));
        }
        if (clock.horizon - spec.horizon).abs() > 0.0 {
            return Err(SplitError::InvalidPlan(format!(
                "clock horizon {} differs from problem horizon {}",
                clock.horizon, spec.horizon
            )));
        }
        let cap_ticks = clock.ticks_in(epsilon);
        if cap_ticks == 0 {
            return Err(SplitError::InvalidPlan(format!(
                "epsilon {epsilon} shorter than one tick {}",
                clock.tick()
            )));
        }
        let mut det = DetScheme::standard();
        if !spec.diffusion.is_zero() {
            det = det
                .with_default_accounting(spec)?
                .with_xi_bins(XiGrid::for_problem(spec));
        }
        let mut plan = Self {
            epsilon,
            seed,
            clock,
            cap_ticks,
            search_ticks: 1,
            substep_ticks: 1,
            output_ticks: Vec::new(),
            det,
            keep_cell_states: false,
        };
        plan.set_search_resolution(epsilon / 16.0);
        plan.set_substep(epsilon / 8.0);
        plan.set_output_times(output_times)?;
        Ok(plan)
    }

    pub fn set_search_resolution(&mut self, dt: f64) {
        self.search_ticks = ((dt / self.clock.tick()).round() as u64).max(1);
    }

    pub fn set_substep(&mut self, dt: f64) {
        self.substep_ticks = self.clock.ticks_in(dt).max(1);
    }

    /// Snaps each time to the nearest tick; duplicates collapse.
    pub fn set_output_times(&mut self, times: &[f64]) -> Result<(), SplitError> {
        let mut ticks = Vec::with_capacity(times.len());
        for &t in times {
            if !(t >= 0.0 && t <= self.clock.horizon * (1.0 + 1e-12)) {
                return Err(SplitError::InvalidPlan(format!(
                    "output time {t} outside [0, {}]",
                    self.clock.horizon
                )));
            }
            ticks.push(self.clock.nearest(t));
        }
        ticks.sort_unstable();
        ticks.dedup();
        self.output_ticks = ticks;
        Ok(())
    }

    pub fn output_times(&self) -> Vec<f64> {
        self.output_ticks.iter().map(|&k| self.clock.time(k)).collect()
    }

    fn validate(&self) -> Result<(), SplitError> {
        if let Some(&k) = self.output_ticks.last() {
            if k > self.clock.ticks {
                return Err(SplitError::InvalidPlan(format!("output tick {k} past the horizon")));
            }
        }
        if self.search_ticks == 0 || self.substep_ticks == 0 || self.cap_ticks == 0 {
            return Err(SplitError::InvalidPlan("tick counts must be positive".into()));
        }
        Ok(())
    }
}

/// Starting data of one ensemble member. Members with equal `stream` share
/// their Brownian path.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberInit {
    pub initial: Field,
    pub stream: u64,
}

/// `M` copies of the problem's initial field on streams `0..M`.
pub fn default_members(
    spec: &ProblemSpec,
    grid: TorusGrid,
    samples: usize,
) -> Result<Vec<MemberInit>, SplitError> {
    if samples == 0 {
        return Err(SplitError::InvalidPlan("need at least one sample".into()));
    }
    let u0 = spec.initial_field(grid)?;
    Ok((0..samples as u64)
        .map(|s| MemberInit {
            initial: u0.clone(),
            stream: s,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub time: f64,
    pub triple: KineticTriple,
}

/// `u_n` and `ũ_{n+1}` of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStates {
    pub start_tick: u64,
    pub end_tick: u64,
    pub tilde_start: Field,
    pub u: Field,
    pub tilde_end: Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTrajectory {
    pub stream: u64,
    pub snapshots: Vec<Snapshot>,
    /// `sup_t ‖v(t)‖_p^p` and `sup_t ‖ṽ(t)‖_p^p` for `p = 2, 4`, over
    /// every substep and search state.
    pub sup_v: [f64; 2],
    pub sup_vtilde: [f64; 2],
    pub final_state: Field,
    pub cells: Vec<CellStates>,
}

/// Ensemble-level record of one partition cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub start_tick: u64,
    pub end_tick: u64,
    pub t0: f64,
    pub t1: f64,
    /// `true` if `D` exceeded `ε` (the cell ended at a crossing, not a cap).
    pub crossed: bool,
    /// `(τ, D(τ))` at every search point.
    pub d_trace: Vec<(f64, f64)>,
    /// `max_{s,t} E‖ṽ(t) − ṽ(s)‖₁` over search points in the cell, excluding
    /// a crossing endpoint.
    pub vtilde_increment: f64,
    /// `max_{s,t} E‖v(t) − v(s)‖₁` over substep states including
    /// `v(t_{n+1} − 0)`.
    pub v_increment: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SplitRun {
    pub partition: Partition,
    pub cells: Vec<CellDiagnostics>,
    pub trajectories: Vec<SplitTrajectory>,
    pub ledgers: Vec<DissipationLedger>,
}

struct Member {
    stream: u64,
    path: BrownianPath,
    tilde: Field,
    ledger: DissipationLedger,
    acc: StochasticAccumulators,
    sup_v: [f64; 2],
    sup_vtilde: [f64; 2],
    snapshots: Vec<Snapshot>,
    cells: Vec<CellStates>,
}

/// Result of the partition search from `t_n`; consumed by
/// [`Ensemble::advance_cell`].
pub struct CellSearch {
    pub start_tick: u64,
    pub end_tick: u64,
    pub crossed: bool,
    pub trace: Vec<(u64, f64)>,
    /// Search points `t_n = k_0 < k_1 < … < k_J = t_{n+1}`.
    chunk_ticks: Vec<u64>,
    /// `states[m][j] = S(t_{k_j} − t_n) ũ_n` for member `m`.
    states: Vec<Vec<Field>>,
    reports: Vec<DetSolveReport>,
}

/// Ensemble state between cells.
pub struct Ensemble<'a> {
    spec: &'a ProblemSpec,
    plan: &'a SplitPlan,
    members: Vec<Member>,
    ticks: Vec<u64>,
    cells: Vec<CellDiagnostics>,
}

fn energies(f: &Field) -> [f64; 2] {
    [lp_norm_pow(f, 2.0), lp_norm_pow(f, 4.0)]
}

fn raise(sup: &mut [f64; 2], f: &Field) {
    let e = energies(f);
    sup[0] = sup[0].max(e[0]);
    sup[1] = sup[1].max(e[1]);
}

fn mean_of(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

/// Entry-wise ensemble mean of per-member pairwise L¹ distance matrices
/// (upper triangles, row-major), maximized over pairs.
fn max_mean_pairwise(per_member: &[Vec<f64>]) -> f64 {
    let entries = per_member.first().map_or(0, Vec::len);
    let mut column = vec![0.0; per_member.len()];
    let mut best: f64 = 0.0;
    for e in 0..entries {
        for (c, m) in column.iter_mut().zip(per_member) {
            *c = m[e];
        }
        best = best.max(mean_of(&column));
    }
    best
}

fn pairwise_distances(states: &[&Field]) -> Vec<f64> {
    let measure = states.first().map_or(0.0, |s| s.grid().cell_measure());
    let mut out = Vec::with_capacity(states.len() * states.len().saturating_sub(1) / 2);
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            out.push(l1_distance_slices(states[i].values(), states[j].values()) * measure);
        }
    }
    out
}

impl<'a> Ensemble<'a> {
    pub fn new(
        spec: &'a ProblemSpec,
        plan: &'a SplitPlan,
        members: Vec<MemberInit>,
    ) -> Result<Self, SplitError> {
        plan.validate()?;
        if members.is_empty() {
            return Err(SplitError::InvalidPlan("empty ensemble".into()));
        }
        let grid = *members[0].initial.grid();
        if members.iter().any(|m| *m.initial.grid() != grid) {
            return Err(SplitError::InvalidPlan("members on different grids".into()));
        }
        let modes = spec.noise.modes.len();
        let members = members
            .into_par_iter()
            .map(|m| {
                let path = if spec.noise.is_zero() {
                    BrownianPath { prefix: Vec::new() }
                } else {
                    BrownianPath::generate(plan.seed, m.stream, modes, &plan.clock)
                };
                let e = energies(&m.initial);
                Member {
                    stream: m.stream,
                    path,
                    ledger: DissipationLedger {
                        initial_energy: e,
                        ..Default::default()
                    },
                    acc: StochasticAccumulators::default(),
                    sup_v: e,
                    sup_vtilde: e,
                    tilde: m.initial,
                    snapshots: Vec::new(),
                    cells: Vec::new(),
                }
            })
            .collect();
        Ok(Self {
            spec,
            plan,
            members,
            ticks: vec![0],
            cells: Vec::new(),
        })
    }

    pub fn current_tick(&self) -> u64 {
        *self.ticks.last().expect("partition starts at 0")
    }

    pub fn is_finished(&self) -> bool {
        self.current_tick() >= self.plan.clock.ticks
    }

    /// Lockstep search for `t_{n+1}` from the current `t_n`.
    pub fn next_partition_time(&self) -> Result<CellSearch, SplitError> {
        let plan = self.plan;
        let clock = &plan.clock;
        let start = self.current_tick();
        if start >= clock.ticks {
            return Err(SplitError::InvalidPlan("partition already reached T".into()));
        }
        let cap = (start + plan.cap_ticks).min(clock.ticks);
        let mut chunk_ticks = vec![start];
        let mut states: Vec<Vec<Field>> =
            self.members.iter().map(|m| vec![m.tilde.clone()]).collect();
        let mut reports = vec![DetSolveReport::default(); self.members.len()];
        let mut trace = Vec::new();
        let mut prev = start;
        let crossed = loop {
            let next = (prev + plan.search_ticks).min(cap);
            let tau = clock.time(next) - clock.time(prev);
            let stepped = states
                .par_iter()
                .zip(&self.members)
                .map(|(s, m)| {
                    let (f, r) = det_solve(&plan.det, s.last().expect("seeded"), tau, self.spec)?;
                    let d = l1_distance_slices(f.values(), m.tilde.values())
                        * f.grid().cell_measure();
                    Ok((f, r, d))
                })
                .collect::<Result<Vec<_>, DetError>>()?;
            let mut dists = Vec::with_capacity(stepped.len());
            for ((f, r, d), (s, acc)) in stepped.into_iter().zip(states.iter_mut().zip(&mut reports)) {
                s.push(f);
                acc.merge(&r);
                dists.push(d);
            }
            let d = mean_of(&dists);
            trace.push((next, d));
            chunk_ticks.push(next);
            prev = next;
            if d > plan.epsilon {
                break true;
            }
            if next == cap {
                break false;
            }
        };
        Ok(CellSearch {
            start_tick: start,
            end_tick: prev,
            crossed,
            trace,
            chunk_ticks,
            states,
            reports,
        })
    }

    /// Applies `S` then `R` over the searched cell and records snapshots,
    /// ledgers and increment statistics.
    pub fn advance_cell(&mut self, search: CellSearch) -> Result<(), SplitError> {
        let plan = self.plan;
        let spec = self.spec;
        let clock = &plan.clock;
        let (a, b) = (search.start_tick, search.end_tick);
        if a != self.current_tick() || b <= a {
            return Err(SplitError::InvalidPlan(format!(
                "cell [{a}, {b}] does not continue the partition at {}",
                self.current_tick()
            )));
        }
        let chunk_ticks = &search.chunk_ticks;
        // Search points whose ṽ enter the within-cell increment check.
        let vtilde_points = if search.crossed {
            chunk_ticks.len() - 1
        } else {
            chunk_ticks.len()
        };
        let outputs: Vec<u64> = plan
            .output_ticks
            .iter()
            .copied()
            .filter(|&o| o >= a && o < b)
            .collect();
        let final_cell = b == clock.ticks && plan.output_ticks.last() == Some(&clock.ticks);

        let results = self
            .members
            .par_iter_mut()
            .zip(search.states.into_par_iter().zip(search.reports.into_par_iter()))
            .map(|(member, (states, report))| {
                advance_member(
                    spec,
                    plan,
                    member,
                    (a, b),
                    chunk_ticks,
                    states,
                    &report,
                    &outputs,
                    vtilde_points,
                    final_cell,
                )
            })
            .collect::<Result<Vec<_>, SplitError>>()?;
        let (vt, v): (Vec<Vec<f64>>, Vec<Vec<f64>>) = results.into_iter().unzip();
        self.cells.push(CellDiagnostics {
            start_tick: a,
            end_tick: b,
            t0: clock.time(a),
            t1: clock.time(b),
            crossed: search.crossed,
            d_trace: search.trace.iter().map(|&(k, d)| (clock.time(k), d)).collect(),
            vtilde_increment: max_mean_pairwise(&vt),
            v_increment: max_mean_pairwise(&v),
        });
        self.ticks.push(b);
        Ok(())
    }

    pub fn finish(self) -> Result<SplitRun, SplitError> {
        let clock = self.plan.clock;
        if !self.is_finished() {
            return Err(SplitError::HorizonNotReached {
                reached: clock.time(self.current_tick()),
                horizon: clock.horizon,
            });
        }
        let partition = Partition {
            epsilon: self.plan.epsilon,
            horizon: clock.horizon,
            search_resolution: self.plan.search_ticks as f64 * clock.tick(),
            times: self.ticks.iter().map(|&k| clock.time(k)).collect(),
            ticks: self.ticks,
        };
        let mut trajectories = Vec::with_capacity(self.members.len());
        let mut ledgers = Vec::with_capacity(self.members.len());
        for m in self.members {
            let mut ledger = m.ledger;
            ledger.final_energy = [lp_norm_pow(&m.tilde, 2.0), lp_norm_pow(&m.tilde, 4.0)];
            ledger.accumulators = Some(m.acc);
            ledgers.push(ledger);
            trajectories.push(SplitTrajectory {
                stream: m.stream,
                snapshots: m.snapshots,
                sup_v: m.sup_v,
                sup_vtilde: m.sup_vtilde,
                final_state: m.tilde,
                cells: m.cells,
            });
        }
        Ok(SplitRun {
            partition,
            cells: self.cells,
            trajectories,
            ledgers,
        })
    }
}

/// One member's share of a cell. Returns the pairwise ṽ and v distance
/// triangles used for the increment statistics.
#[allow(clippy::too_many_arguments)]
fn advance_member(
    spec: &ProblemSpec,
    plan: &SplitPlan,
    member: &mut Member,
    (a, b): (u64, u64),
    chunk_ticks: &[u64],
    states: Vec<Field>,
    report: &DetSolveReport,
    outputs: &[u64],
    vtilde_points: usize,
    final_cell: bool,
) -> Result<(Vec<f64>, Vec<f64>), SplitError> {
    let clock = &plan.clock;
    let u_n = states.last().expect("search produced a state").clone();

    // Ledger for the deterministic half.
    let ledger = &mut member.ledger;
    ledger.n1_mass += report.n1_total;
    ledger.scheme_dissipation[0] += report.dissipation_total;
    ledger.scheme_dissipation[1] += report.weighted_dissipation_p2;
    if !report.n1_bins.is_empty() {
        if ledger.n1_bins.is_empty() {
            ledger.n1_bins = vec![0.0; report.n1_bins.len()];
        }
        for (acc, m) in ledger.n1_bins.iter_mut().zip(&report.n1_bins) {
            *acc += m;
        }
    }
    ledger.clamp_count += report.clamp_count;
    ledger.intervals.push(IntervalDissipation {
        t0: clock.time(a),
        t1: clock.time(b),
        m: report.dissipation_total,
        n1: report.n1_total,
    });
    for s in &states {
        raise(&mut member.sup_vtilde, s);
    }

    // Stochastic half on substeps anchored at t_n.
    let modes = member.path.modes();
    let sde_plan = SdeStepPlan::euler(spec, plan.substep_ticks as f64 * clock.tick())?;
    let mut dw = vec![0.0; modes];
    let mut v_ticks = vec![a];
    let mut v_states = vec![u_n.clone()];
    if modes > 0 {
        let mut k = a;
        while k < b {
            let q = (k + plan.substep_ticks).min(b);
            member.path.increments(k, q, &mut dw);
            let old = v_states.last().expect("seeded");
            let new = sde_step(old, &sde_plan, spec, &dw)?;
            member.acc.record_step(spec, old, &new, clock.time(q) - clock.time(k));
            raise(&mut member.sup_v, &new);
            v_ticks.push(q);
            v_states.push(new);
            k = q;
        }
    }
    raise(&mut member.sup_v, &u_n);
    let tilde_next = v_states.last().expect("seeded").clone();

    for &o in outputs {
        // v(o) = R(o, t_n) u_n, replayed from the last substep at or before o.
        let idx = v_ticks.partition_point(|&k| k <= o) - 1;
        let v = if v_ticks[idx] == o {
            v_states[idx].clone()
        } else {
            member.path.increments(v_ticks[idx], o, &mut dw);
            sde_step(&v_states[idx], &sde_plan, spec, &dw)?
        };
        // ṽ(o) = S(o − t_n) ũ_n, branched from the last search point.
        let j = chunk_ticks.partition_point(|&k| k <= o) - 1;
        let vtilde = if chunk_ticks[j] == o {
            states[j].clone()
        } else {
            let tau = clock.time(o) - clock.time(chunk_ticks[j]);
            det_solve(&plan.det, &states[j], tau, spec)?.0
        };
        member.snapshots.push(Snapshot {
            tick: o,
            time: clock.time(o),
            triple: KineticTriple {
                v,
                vtilde,
                v_left: u_n.clone(),
            },
        });
    }
    if final_cell {
        // Left limits at T.
        member.snapshots.push(Snapshot {
            tick: b,
            time: clock.time(b),
            triple: KineticTriple {
                v: tilde_next.clone(),
                vtilde: u_n.clone(),
                v_left: u_n.clone(),
            },
        });
    }

    let vt_refs: Vec<&Field> = states[..vtilde_points].iter().collect();
    let v_refs: Vec<&Field> = v_states.iter().collect();
    let increments = (pairwise_distances(&vt_refs), pairwise_distances(&v_refs));

    if plan.keep_cell_states {
        member.cells.push(CellStates {
            start_tick: a,
            end_tick: b,
            tilde_start: states[0].clone(),
            u: u_n,
            tilde_end: tilde_next.clone(),
        });
    }
    member.tilde = tilde_next;
    Ok(increments)
}

/// Runs the ensemble from `members` to the horizon.
pub fn run_ensemble(
    spec: &ProblemSpec,
    plan: &SplitPlan,
    members: Vec<MemberInit>,
) -> Result<SplitRun, SplitError> {
    let mut ens = Ensemble::new(spec, plan, members)?;
    // Each cell advances at least one tick, so this bounds the loop.
    for _ in 0..plan.clock.ticks {
        if ens.is_finished() {
            break;
        }
        let search = ens.next_partition_time()?;
        ens.advance_cell(search)?;
    }
    ens.finish()
}

/// `M` samples of the problem's own initial data.
pub fn run_splitting(
    spec: &ProblemSpec,
    grid: TorusGrid,
    samples: usize,
    plan: &SplitPlan,
) -> Result<SplitRun, SplitError> {
    run_ensemble(spec, plan, default_members(spec, grid, samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::l1_distance;
    use crate::model::builtin_problem;

    fn grid() -> TorusGrid {
        TorusGrid::one_d(32).unwrap()
    }

    #[test]
    fn clock_hits_horizon_and_multiples() {
        let c = TickClock::for_epsilon(0.5, 0.025).unwrap();
        assert_eq!(c.ticks, 320);
        assert_eq!(c.time(c.ticks), 0.5);
        assert_eq!(c.ticks_in(0.2), 128);
        let odd = TickClock::for_epsilon(1.0, 0.3).unwrap();
        assert_eq!(odd.ticks, 160);
        assert_eq!(odd.ticks_in(0.3), 48);
        let irrational = TickClock::for_epsilon(1.0, 1.0 / std::f64::consts::PI).unwrap();
        assert_eq!(irrational.ticks, 51);
    }

    #[test]
    fn path_increments_add_up() {
        let c = TickClock::new(1.0, 64).unwrap();
        let p = BrownianPath::generate(3, 1, 2, &c);
        let (mut x, mut y, mut z) = ([0.0; 2], [0.0; 2], [0.0; 2]);
        p.increments(0, 10, &mut x);
        p.increments(10, 40, &mut y);
        p.increments(0, 40, &mut z);
        for m in 0..2 {
            assert!((x[m] + y[m] - z[m]).abs() < 1e-14);
        }
        let first = RngStream::new(3, 1, 1).normal_at(0) * c.tick().sqrt();
        p.increments(0, 1, &mut x);
        assert_eq!(x[1], first);
    }

    #[test]
    fn identity_semigroup_gives_uniform_mesh() {
        let spec = builtin_problem("pure-sde").unwrap();
        for eps in [0.1, 0.25, 0.3] {
            let plan = SplitPlan::new(&spec, eps, 1, &[]).unwrap();
            let run = run_splitting(&spec, grid(), 4, &plan).unwrap();
            let p = &run.partition;
            assert_eq!(p.cells(), (spec.horizon / eps).ceil() as usize, "eps {eps}");
            assert_eq!(*p.times.last().unwrap(), spec.horizon);
            assert!(p.widths().iter().all(|w| *w <= eps + 1e-14));
            for (k, t) in p.times.iter().enumerate() {
                assert!((t - (k as f64 * eps).min(spec.horizon)).abs() <= 1e-14, "{t}");
            }
            assert!(run.cells.iter().all(|c| c.d_trace.iter().all(|d| d.1 == 0.0)));
        }
    }

    #[test]
    fn huge_epsilon_is_one_cell() {
        let spec = builtin_problem("burgers").unwrap();
        let plan = SplitPlan::new(&spec, 1e6, 1, &[]).unwrap();
        let run = run_splitting(&spec, grid(), 2, &plan).unwrap();
        assert_eq!(run.partition.times, vec![0.0, spec.horizon]);
    }

    #[test]
    fn burgers_crossing_is_first_grid_crossing() {
        let spec = builtin_problem("burgers").unwrap();
        let plan = SplitPlan::new(&spec, 0.05, 1, &[]).unwrap();
        let run = run_splitting(&spec, grid(), 1, &plan).unwrap();
        let u0 = spec.initial_field(grid()).unwrap();
        let c = &run.cells[0];
        // Recompute D by a single det_solve from ũ₀.
        let d_at = |t: f64| {
            let s = det_solve(&plan.det, &u0, t, &spec).unwrap().0;
            l1_distance(&s, &u0).unwrap()
        };
        let search = plan.search_ticks as f64 * plan.clock.tick();
        if c.crossed {
            assert!(d_at(c.t1) > plan.epsilon * (1.0 - 1e-6));
            assert!(d_at(c.t1 - search) <= plan.epsilon * (1.0 + 1e-6));
        } else {
            assert!((c.t1 - plan.epsilon).abs() < 1e-14);
        }
        assert!(run.cells.iter().any(|c| c.crossed));
    }

    #[test]
    fn cells_respect_cap_and_end_at_horizon() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        for eps in [0.2, 0.07] {
            let plan = SplitPlan::new(&spec, eps, 5, &[]).unwrap();
            let run = run_splitting(&spec, grid(), 8, &plan).unwrap();
            assert_eq!(*run.partition.times.last().unwrap(), spec.horizon);
            assert!(run.partition.widths().iter().all(|w| *w <= eps + 1e-14));
            for c in &run.cells {
                assert!(c.vtilde_increment <= 2.0 * eps);
            }
        }
    }

    #[test]
    fn zero_noise_matches_sequential_det_solve() {
        let spec = builtin_problem("burgers").unwrap();
        let plan = SplitPlan::new(&spec, 0.05, 1, &[0.5]).unwrap();
        let run = run_splitting(&spec, grid(), 1, &plan).unwrap();
        // Direct composition over the same search points.
        let mut u = spec.initial_field(grid()).unwrap();
        for c in &run.cells {
            let mut prev = c.t0;
            for &(t, _) in &c.d_trace {
                u = det_solve(&plan.det, &u, t - prev, &spec).unwrap().0;
                prev = t;
            }
        }
        let v = &run.trajectories[0].snapshots.last().unwrap().triple.v;
        assert!(l1_distance(v, &u).unwrap() <= 1e-12);
        assert_eq!(run.trajectories[0].final_state, u);
    }

    #[test]
    fn snapshots_match_cell_boundaries() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        let mut plan = SplitPlan::new(&spec, 0.1, 9, &[]).unwrap();
        plan.keep_cell_states = true;
        let first = run_splitting(&spec, grid(), 3, &plan).unwrap();
        let boundary: Vec<f64> = first.partition.times.clone();
        plan.set_output_times(&boundary).unwrap();
        let run = run_splitting(&spec, grid(), 3, &plan).unwrap();
        assert_eq!(run.partition, first.partition);
        for traj in &run.trajectories {
            for (cell, snap) in traj.cells.iter().zip(&traj.snapshots) {
                assert_eq!(snap.tick, cell.start_tick);
                assert_eq!(snap.triple.v, cell.u);
                assert_eq!(snap.triple.vtilde, cell.tilde_start);
            }
            let last = traj.snapshots.last().unwrap();
            let cell = traj.cells.last().unwrap();
            assert_eq!(last.triple.v, cell.tilde_end);
            assert_eq!(last.triple.vtilde, cell.u);
        }
    }

    #[test]
    fn zero_noise_r_is_identity_and_zero_flux_s_is_identity() {
        let spec = builtin_problem("heat").unwrap();
        let mut plan = SplitPlan::new(&spec, 0.05, 1, &[]).unwrap();
        plan.keep_cell_states = true;
        let run = run_splitting(&spec, grid(), 1, &plan).unwrap();
        for c in &run.trajectories[0].cells {
            assert_eq!(c.u, c.tilde_end);
        }
        let spec = builtin_problem("pure-sde").unwrap();
        let mut plan = SplitPlan::new(&spec, 0.25, 1, &[]).unwrap();
        plan.keep_cell_states = true;
        let run = run_splitting(&spec, grid(), 1, &plan).unwrap();
        for c in &run.trajectories[0].cells {
            assert_eq!(c.u, c.tilde_start);
        }
    }

    #[test]
    fn reproducible_across_thread_counts() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        let plan = SplitPlan::new(&spec, 0.1, 42, &[0.1, 0.25, 0.5]).unwrap();
        let run_with = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_splitting(&spec, grid(), 6, &plan).unwrap())
        };
        let (a, b) = (run_with(1), run_with(3));
        assert_eq!(a.partition, b.partition);
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.ledgers, b.ledgers);
    }

    #[test]
    fn ledger_dominates_parabolic_dissipation() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        let plan = SplitPlan::new(&spec, 0.1, 2, &[]).unwrap();
        let run = run_splitting(&spec, grid(), 4, &plan).unwrap();
        for l in &run.ledgers {
            let m = l.m_mass().unwrap();
            assert!(l.n1_mass > 0.0);
            assert!(m >= l.n1_mass - 1e-10, "m {m} n1 {}", l.n1_mass);
            assert!((m - l.scheme_dissipation[0]).abs() < 1e-9 * (1.0 + m), "{m} {:?}", l.scheme_dissipation);
        }
    }
}
