//! Monotone explicit finite-volume scheme for `∂_t u + div B(u) = div(A(u)∇u)`.
//!
//! The update is
//!
//! ```text
//! u_i' = u_i − λ Σ_axes (F(u_i, u_{i+1}) − F(u_{i−1}, u_i))
//!            + μ Σ_axes (β(u_{i+1}) − 2β(u_i) + β(u_{i−1})),   λ = dt/dx, μ = dt/dx²
//! ```
//!
//! Alongside each step the scheme reports the per-cell quadratic-entropy
//! dissipation and the discrete parabolic dissipation `|D_x Q(u)|²` with
//! `Q(u) = ∫₀ᵘ σ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, TorusGrid};
use crate::kinetic::XiGrid;
use crate::model::{DiffusionKind, FluxKind, ProblemSpec};
use crate::numerics::pairwise_sum;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetError {
    #[error("time step {dt} exceeds the stable bound {stable}")]
    CflViolation { dt: f64, stable: f64 },
    #[error("value {value} outside the xi-quadrature range [{lo}, {hi}]")]
    QuadratureRangeExceeded { value: f64, lo: f64, hi: f64 },
    #[error("Lax-Friedrichs viscosity {alpha} below the wave speed {speed}")]
    ViscosityTooSmall { alpha: f64, speed: f64 },
    #[error("explicit substeps sum to {sum}, requested {tau}")]
    SubstepMismatch { sum: f64, tau: f64 },
    #[error("invalid scheme parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NumericalFlux {
    EngquistOsher,
    LaxFriedrichs { alpha: f64 },
}

impl NumericalFlux {
    pub fn eval(&self, flux: &FluxKind, a: f64, b: f64) -> f64 {
        match *self {
            NumericalFlux::EngquistOsher => flux.eo_parts(a).0 + flux.eo_parts(b).1,
            NumericalFlux::LaxFriedrichs { alpha } => {
                0.5 * (flux.flux(a) + flux.flux(b)) - 0.5 * alpha * (b - a)
            }
        }
    }

    /// Numerical quadratic-entropy flux paired with [`NumericalFlux::eval`].
    fn entropy_flux(&self, flux: &FluxKind, a: f64, b: f64) -> f64 {
        match *self {
            NumericalFlux::EngquistOsher => {
                flux.entropy_flux_parts(a).0 + flux.entropy_flux_parts(b).1
            }
            NumericalFlux::LaxFriedrichs { alpha } => {
                0.5 * (flux.entropy_flux(a) + flux.entropy_flux(b))
                    - 0.25 * alpha * (b * b - a * a)
            }
        }
    }
}

/// How `det_solve` splits an interval into explicit steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubstepPolicy {
    /// Largest stable step, last step shortened to land on `τ`.
    Adaptive,
    /// As `Adaptive` but never longer than `dt_max`.
    Capped { dt_max: f64 },
    /// Exactly these steps; their sum must equal `τ`.
    Explicit { steps: Vec<f64> },
}

/// `Q(u) = ∫₀ᵘ σ` tabulated by cumulative Simpson on a uniform ξ grid and
/// evaluated by cubic Hermite interpolation with `Q′ = σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPrimitive {
    lo: f64,
    hi: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    offset: f64,
}

impl SigmaPrimitive {
    pub fn new(diffusion: &DiffusionKind, lo: f64, hi: f64, step: f64) -> Result<Self, DetError> {
        if !(lo < hi) || !(step > 0.0) {
            return Err(DetError::InvalidParameter(format!(
                "xi quadrature needs lo < hi and step > 0, got [{lo}, {hi}] step {step}"
            )));
        }
        let n = ((hi - lo) / step).ceil().max(1.0) as usize;
        let step = (hi - lo) / n as f64;
        let xs: Vec<f64> = (0..=n).map(|j| lo + j as f64 * step).collect();
        let slopes: Vec<f64> = xs.iter().map(|&x| diffusion.sigma(x)).collect();
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        for j in 0..n {
            let mid = diffusion.sigma(xs[j] + 0.5 * step);
            let inc = step / 6.0 * (slopes[j] + 4.0 * mid + slopes[j + 1]);
            values.push(values[j] + inc);
        }
        let mut table = Self {
            lo,
            hi,
            step,
            values,
            slopes,
            offset: 0.0,
        };
        table.offset = if lo <= 0.0 && 0.0 <= hi {
            table.raw(0.0)
        } else {
            // Range excludes zero: integrate σ from 0 to lo directly.
            -crate::numerics::integrate(lo, 0.0, 16, |s| diffusion.sigma(s))
        };
        Ok(table)
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn raw(&self, u: f64) -> f64 {
        let n = self.values.len() - 1;
        let s = ((u - self.lo) / self.step).clamp(0.0, n as f64);
        let j = (s.floor() as usize).min(n - 1);
        let t = s - j as f64;
        let (y0, y1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * self.step, self.slopes[j + 1] * self.step);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1
    }

    pub fn eval(&self, u: f64) -> Result<f64, DetError> {
        if !(u >= self.lo && u <= self.hi) {
            return Err(DetError::QuadratureRangeExceeded {
                value: u,
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(self.raw(u) - self.offset)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetScheme {
    pub flux: NumericalFlux,
    pub cfl_adv: f64,
    pub cfl_diff: f64,
    pub substeps: SubstepPolicy,
    sigma_primitive: Option<SigmaPrimitive>,
    xi_bins: Option<XiGrid>,
}

impl DetScheme {
    pub fn new(flux: NumericalFlux, cfl_adv: f64, cfl_diff: f64) -> Result<Self, DetError> {
        if !(cfl_adv > 0.0 && cfl_adv <= 1.0) {
            return Err(DetError::InvalidParameter(format!("cfl_adv {cfl_adv} not in (0, 1]")));
        }
        if !(cfl_diff > 0.0 && cfl_diff <= 0.5) {
            return Err(DetError::InvalidParameter(format!("cfl_diff {cfl_diff} not in (0, 0.5]")));
        }
        if let NumericalFlux::LaxFriedrichs { alpha } = flux {
            if !(alpha >= 0.0) {
                return Err(DetError::InvalidParameter(format!("alpha {alpha} negative")));
            }
        }
        Ok(Self {
            flux,
            cfl_adv,
            cfl_diff,
            substeps: SubstepPolicy::Adaptive,
            sigma_primitive: None,
            xi_bins: None,
        })
    }

    /// Engquist–Osher, `cfl_adv = 0.9`, `cfl_diff = 0.45`.
    pub fn standard() -> Self {
        Self::new(NumericalFlux::EngquistOsher, 0.9, 0.45).expect("valid defaults")
    }

    pub fn with_substeps(mut self, policy: SubstepPolicy) -> Self {
        self.substeps = policy;
        self
    }

    /// Enables parabolic-dissipation accounting with `Q` tabulated on
    /// `[lo, hi]` at step `xi_step`.
    pub fn with_parabolic_accounting(
        mut self,
        diffusion: &DiffusionKind,
        lo: f64,
        hi: f64,
        xi_step: f64,
    ) -> Result<Self, DetError> {
        self.sigma_primitive = Some(SigmaPrimitive::new(diffusion, lo, hi, xi_step)?);
        Ok(self)
    }

    /// Default accounting on the problem range with `Δξ = range / 128`.
    pub fn with_default_accounting(self, spec: &ProblemSpec) -> Result<Self, DetError> {
        let (lo, hi) = spec.eval_range;
        self.with_parabolic_accounting(&spec.diffusion, lo, hi, (hi - lo) / 128.0)
    }

    /// Also bins parabolic dissipation by the cell value at the step start.
    pub fn with_xi_bins(mut self, xi: XiGrid) -> Self {
        self.xi_bins = Some(xi);
        self
    }

    pub fn sigma_primitive(&self) -> Option<&SigmaPrimitive> {
        self.sigma_primitive.as_ref()
    }

    pub fn xi_bins(&self) -> Option<&XiGrid> {
        self.xi_bins.as_ref()
    }
}

/// Per-step accounting. Cell entries are masses (already multiplied by the
/// cell measure).
#[derive(Debug, Clone, PartialEq)]
pub struct DetStepReport {
    pub dt_taken: f64,
    /// `λ · max|b|` (or `λ α` for Lax–Friedrichs).
    pub advective_cfl_used: f64,
    /// Quadratic-entropy dissipation per cell.
    pub dissipation_cells: Vec<f64>,
    /// Discrete `|D_x Q(u)|² dt` per cell; empty without parabolic accounting.
    pub parabolic_cells: Vec<f64>,
    /// Dissipation of `η₂(u) = |u|⁴/12` summed over cells.
    pub weighted_dissipation_p2: f64,
    /// Cell entries below `−1e-12` that were clamped to zero.
    pub clamp_count: usize,
}

/// Accumulated accounting over a `det_solve` call.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DetSolveReport {
    pub steps: usize,
    pub time: f64,
    pub max_advective_cfl: f64,
    pub dissipation_cells: Vec<f64>,
    pub dissipation_total: f64,
    pub weighted_dissipation_p2: f64,
    pub n1_cells: Vec<f64>,
    pub n1_total: f64,
    pub n1_bins: Vec<f64>,
    pub clamp_count: usize,
}

impl DetSolveReport {
    fn absorb(&mut self, r: &DetStepReport, bins: Option<(&XiGrid, &[f64])>) {
        self.steps += 1;
        self.time += r.dt_taken;
        self.max_advective_cfl = self.max_advective_cfl.max(r.advective_cfl_used);
        add_into(&mut self.dissipation_cells, &r.dissipation_cells);
        self.dissipation_total += pairwise_sum(&r.dissipation_cells);
        self.weighted_dissipation_p2 += r.weighted_dissipation_p2;
        if !r.parabolic_cells.is_empty() {
            add_into(&mut self.n1_cells, &r.parabolic_cells);
            self.n1_total += pairwise_sum(&r.parabolic_cells);
            if let Some((xi, u)) = bins {
                if self.n1_bins.is_empty() {
                    self.n1_bins = vec![0.0; xi.n()];
                }
                for (v, m) in u.iter().zip(&r.parabolic_cells) {
                    self.n1_bins[xi.bin(*v)] += m;
                }
            }
        }
        self.clamp_count += r.clamp_count;
    }

    /// Adds another report covering a later interval.
    pub fn merge(&mut self, other: &DetSolveReport) {
        self.steps += other.steps;
        self.time += other.time;
        self.max_advective_cfl = self.max_advective_cfl.max(other.max_advective_cfl);
        add_into(&mut self.dissipation_cells, &other.dissipation_cells);
        self.dissipation_total += other.dissipation_total;
        self.weighted_dissipation_p2 += other.weighted_dissipation_p2;
        add_into(&mut self.n1_cells, &other.n1_cells);
        self.n1_total += other.n1_total;
        add_into(&mut self.n1_bins, &other.n1_bins);
        self.clamp_count += other.clamp_count;
    }
}

fn add_into(acc: &mut Vec<f64>, add: &[f64]) {
    if add.is_empty() {
        return;
    }
    if acc.is_empty() {
        acc.extend_from_slice(add);
    } else {
        for (a, b) in acc.iter_mut().zip(add) {
            *a += b;
        }
    }
}

fn wave_speed(scheme: &DetScheme, spec: &ProblemSpec, lo: f64, hi: f64) -> f64 {
    match scheme.flux {
        NumericalFlux::EngquistOsher => spec.flux.max_speed(lo, hi),
        NumericalFlux::LaxFriedrichs { alpha } => alpha,
    }
}

/// Largest step keeping the scheme monotone:
/// `dt = 1 / (d · (max|b| / (c_adv dx) + max a / (c_diff dx²)))`, or the
/// horizon when both rates vanish.
pub fn max_stable_dt(scheme: &DetScheme, u: &Field, spec: &ProblemSpec) -> f64 {
    let (lo, hi) = (u.min(), u.max());
    let dx = u.grid().dx();
    let speed = wave_speed(scheme, spec, lo, hi);
    let amax = spec.diffusion.max_a(lo, hi);
    let rate = u.grid().dim() as f64
        * (speed / (scheme.cfl_adv * dx) + amax / (scheme.cfl_diff * dx * dx));
    if rate > 0.0 {
        (1.0 / rate).min(spec.horizon)
    } else {
        spec.horizon
    }
}

/// Quadratic entropy `η₂(u) = |u|⁴ / 12` for the weighted `p = 2` balance.
fn eta_p2(u: f64) -> f64 {
    let u2 = u * u;
    u2 * u2 / 12.0
}

/// One explicit step of length `dt`.
pub fn det_step(
    scheme: &DetScheme,
    u: &Field,
    dt: f64,
    spec: &ProblemSpec,
) -> Result<(Field, DetStepReport), DetError> {
    let stable = max_stable_dt(scheme, u, spec);
    if dt > stable * (1.0 + 1e-12) {
        return Err(DetError::CflViolation { dt, stable });
    }
    if let NumericalFlux::LaxFriedrichs { alpha } = scheme.flux {
        let speed = spec.flux.max_speed(u.min(), u.max());
        if alpha < speed {
            return Err(DetError::ViscosityTooSmall { alpha, speed });
        }
    }
    let grid = *u.grid();
    let dx = grid.dx();
    let lambda = dt / dx;
    let cells = grid.cell_count();
    let vals = u.values();
    let flux = &spec.flux;
    let diff = &spec.diffusion;
    let has_diffusion = !diff.is_zero();

    let beta: Vec<f64> = if has_diffusion {
        vals.iter().map(|&v| diff.beta(v)).collect()
    } else {
        Vec::new()
    };
    let r: Vec<f64> = if has_diffusion {
        vals.iter().map(|&v| diff.entropy_primitive(v)).collect()
    } else {
        Vec::new()
    };

    let mut next = vals.to_vec();
    // Numerical entropy flux divergence per cell, accumulated over axes.
    let mut entropy_div = vec![0.0; cells];
    for axis in 0..grid.dim() {
        // Interface i+1/2 along `axis` sits between cell i and its + neighbor.
        let mut f_iface = vec![0.0; cells];
        let mut q_iface = vec![0.0; cells];
        for i in 0..cells {
            let j = grid.neighbor(i, axis, 1);
            let (a, b) = (vals[i], vals[j]);
            let mut f = scheme.flux.eval(flux, a, b);
            let mut q = scheme.flux.entropy_flux(flux, a, b);
            if has_diffusion {
                f -= (beta[j] - beta[i]) / dx;
                q -= (r[j] - r[i]) / dx;
            }
            f_iface[i] = f;
            q_iface[i] = q;
        }
        for i in 0..cells {
            let m = grid.neighbor(i, axis, -1);
            next[i] -= lambda * (f_iface[i] - f_iface[m]);
            entropy_div[i] += lambda * (q_iface[i] - q_iface[m]);
        }
    }

    let measure = grid.cell_measure();
    let mut clamp_count = 0;
    let dissipation_cells: Vec<f64> = (0..cells)
        .map(|i| {
            let d = 0.5 * (vals[i] * vals[i] - next[i] * next[i]) - entropy_div[i];
            if d < -1e-12 {
                clamp_count += 1;
            }
            d.max(0.0) * measure
        })
        .collect();
    let weighted: Vec<f64> = vals
        .iter()
        .zip(&next)
        .map(|(a, b)| eta_p2(*a) - eta_p2(*b))
        .collect();
    let weighted_dissipation_p2 = pairwise_sum(&weighted) * measure;

    let parabolic_cells = match &scheme.sigma_primitive {
        Some(table) => {
            let q_old = vals.iter().map(|&v| table.eval(v)).collect::<Result<Vec<_>, _>>()?;
            let q_new = next.iter().map(|&v| table.eval(v)).collect::<Result<Vec<_>, _>>()?;
            let mut cells_n1 = vec![0.0; cells];
            // Interface gradient at the midpoint in time, half to each side.
            let scale = dt / (dx * dx) * measure;
            for axis in 0..grid.dim() {
                for i in 0..cells {
                    let j = grid.neighbor(i, axis, 1);
                    let g = 0.5 * ((q_old[j] - q_old[i]) + (q_new[j] - q_new[i]));
                    let m = 0.5 * scale * g * g;
                    cells_n1[i] += m;
                    cells_n1[j] += m;
                }
            }
            cells_n1
        }
        None => Vec::new(),
    };

    let report = DetStepReport {
        dt_taken: dt,
        advective_cfl_used: lambda * wave_speed(scheme, spec, u.min(), u.max()),
        dissipation_cells,
        parabolic_cells,
        weighted_dissipation_p2,
        clamp_count,
    };
    Ok((Field::from_raw(grid, next), report))
}

/// `S(τ) u`: explicit steps reaching `τ` exactly, with aggregated accounting.
pub fn det_solve(
    scheme: &DetScheme,
    u: &Field,
    tau: f64,
    spec: &ProblemSpec,
) -> Result<(Field, DetSolveReport), DetError> {
    let mut report = DetSolveReport::default();
    let mut cur = u.clone();
    if let SubstepPolicy::Explicit { steps } = &scheme.substeps {
        let sum: f64 = steps.iter().sum();
        if (sum - tau).abs() > 1e-12 * tau.max(1.0) {
            return Err(DetError::SubstepMismatch { sum, tau });
        }
        for &dt in steps {
            cur = step_into(scheme, &cur, dt, spec, &mut report)?;
        }
        return Ok((cur, report));
    }
    if tau <= 0.0 {
        return Ok((cur, report));
    }
    if spec.is_deterministically_trivial() {
        // S is the identity; record the elapsed time only.
        report.time = tau;
        return Ok((cur, report));
    }
    let cap = match scheme.substeps {
        SubstepPolicy::Capped { dt_max } => dt_max,
        _ => f64::INFINITY,
    };
    let mut elapsed = 0.0;
    loop {
        let stable = max_stable_dt(scheme, &cur, spec).min(cap);
        let remaining = tau - elapsed;
        let last = stable >= remaining;
        let dt = if last { remaining } else { stable };
        cur = step_into(scheme, &cur, dt, spec, &mut report)?;
        if last {
            break;
        }
        elapsed += dt;
    }
    report.time = tau;
    Ok((cur, report))
}

fn step_into(
    scheme: &DetScheme,
    u: &Field,
    dt: f64,
    spec: &ProblemSpec,
    report: &mut DetSolveReport,
) -> Result<Field, DetError> {
    let (next, step) = det_step(scheme, u, dt, spec)?;
    let bins = scheme.xi_bins.as_ref().map(|xi| (xi, u.values()));
    report.absorb(&step, bins);
    Ok(next)
}

/// Frozen-state parabolic dissipation `Σ |D_x Q(u)|² dx^d` of a single field
/// (per unit time), split per cell.
pub fn parabolic_dissipation(
    table: &SigmaPrimitive,
    u: &Field,
) -> Result<(f64, Vec<f64>), DetError> {
    let grid: TorusGrid = *u.grid();
    let dx = grid.dx();
    let q = u.values().iter().map(|&v| table.eval(v)).collect::<Result<Vec<_>, _>>()?;
    let mut cells = vec![0.0; grid.cell_count()];
    let scale = grid.cell_measure() / (dx * dx);
    for axis in 0..grid.dim() {
        for i in 0..cells.len() {
            let j = grid.neighbor(i, axis, 1);
            let g = q[j] - q[i];
            let m = 0.5 * scale * g * g;
            cells[i] += m;
            cells[j] += m;
        }
    }
    Ok((pairwise_sum(&cells), cells))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin_problem;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::one_d(n).unwrap()
    }

    #[test]
    fn stable_dt_formula_instances() {
        let scheme = DetScheme::standard();
        let trivial = builtin_problem("pure-sde").unwrap();
        let u = Field::constant(grid(64), 3.0);
        assert_eq!(max_stable_dt(&scheme, &u, &trivial), trivial.horizon);

        let burgers = builtin_problem("burgers").unwrap();
        let vals = (0..64).map(|i| if i < 32 { 1.0 } else { -0.5 }).collect();
        let u = Field::new(grid(64), vals).unwrap();
        assert!((max_stable_dt(&scheme, &u, &burgers) - 0.9 / 64.0).abs() < 1e-15);

        let heat = builtin_problem("heat").unwrap();
        let u = Field::constant(grid(64), 0.3);
        let expected = 0.45 / (64.0 * 64.0) / 0.1;
        assert!((max_stable_dt(&scheme, &u, &heat) - expected).abs() < 1e-15);
        assert!((expected - 1.0986e-3).abs() < 1e-7);
    }

    #[test]
    fn constant_state_is_fixed() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        let scheme = DetScheme::standard().with_default_accounting(&spec).unwrap();
        let u = Field::constant(grid(32), 0.7);
        let dt = max_stable_dt(&scheme, &u, &spec);
        let (v, rep) = det_step(&scheme, &u, dt, &spec).unwrap();
        assert_eq!(v, u);
        assert_eq!(rep.clamp_count, 0);
        assert!(rep.dissipation_cells.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let spec = builtin_problem("burgers").unwrap();
        let u = Field::constant(grid(16), 1.0);
        let scheme = DetScheme::standard();
        let dt = max_stable_dt(&scheme, &u, &spec);
        assert!(matches!(
            det_step(&scheme, &u, dt * 1.01, &spec),
            Err(DetError::CflViolation { .. })
        ));
    }

    #[test]
    fn numerical_flux_is_consistent_and_monotone() {
        let fluxes = [FluxKind::Burgers, FluxKind::Cubic, FluxKind::Linear { speed: -0.4 }];
        for flux in fluxes {
            for nf in [NumericalFlux::EngquistOsher, NumericalFlux::LaxFriedrichs { alpha: 9.0 }] {
                let pts: Vec<f64> = (0..41).map(|i| -3.0 + 0.15 * i as f64).collect();
                for &a in &pts {
                    assert!((nf.eval(&flux, a, a) - flux.flux(a)).abs() <= 1e-12);
                    for w in pts.windows(2) {
                        assert!(nf.eval(&flux, w[0], a) <= nf.eval(&flux, w[1], a) + 1e-12);
                        assert!(nf.eval(&flux, a, w[0]) >= nf.eval(&flux, a, w[1]) - 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_tau_is_identity() {
        let spec = builtin_problem("burgers").unwrap();
        let u = spec.initial_field(grid(32)).unwrap();
        let (v, rep) = det_solve(&DetScheme::standard(), &u, 0.0, &spec).unwrap();
        assert_eq!(v, u);
        assert_eq!(rep.steps, 0);
    }

    #[test]
    fn pinned_ladder_gives_bitwise_semigroup() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        let u = spec.initial_field(grid(64)).unwrap();
        // 1e-4 is well inside the stable bound for this data.
        let pinned = |k: usize| {
            DetScheme::standard().with_substeps(SubstepPolicy::Explicit {
                steps: vec![1e-4; k],
            })
        };
        let (a, _) = det_solve(&pinned(3), &u, 3e-4, &spec).unwrap();
        let (a, _) = det_solve(&pinned(7), &a, 7e-4, &spec).unwrap();
        let (b, _) = det_solve(&pinned(10), &u, 1e-3, &spec).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            det_solve(&pinned(2), &u, 3e-4, &spec),
            Err(DetError::SubstepMismatch { .. })
        ));
    }

    #[test]
    fn sigma_primitive_matches_closed_forms() {
        let nu = 0.1;
        let t = SigmaPrimitive::new(&DiffusionKind::Constant { nu }, -2.0, 2.0, 4.0 / 128.0).unwrap();
        for &u in &[-2.0, -0.77, 0.0, 0.31, 2.0] {
            assert!((t.eval(u).unwrap() - nu.sqrt() * u).abs() < 1e-14);
        }
        assert!(matches!(t.eval(2.5), Err(DetError::QuadratureRangeExceeded { .. })));

        // a(u) = u² on u ≥ 0: Q(u) = u²/2.
        let d = DiffusionKind::PowerClipped {
            kappa: 1.0,
            gamma: 1.0,
            u_max: 10.0,
        };
        let t = SigmaPrimitive::new(&d, -1.0, 3.0, 4.0 / 128.0).unwrap();
        for &u in &[0.0, 0.4, 1.3, 2.9] {
            assert!((t.eval(u).unwrap() - 0.5 * u * u).abs() < 1e-12);
        }
    }

    #[test]
    fn frozen_heat_dissipation_matches_gradient_energy() {
        let nu: f64 = 0.1;
        let spec = builtin_problem("heat").unwrap();
        let mut prev_err = f64::INFINITY;
        for n in [64, 128, 256] {
            let u = spec.initial_field(grid(n)).unwrap();
            let scheme = DetScheme::standard().with_default_accounting(&spec).unwrap();
            let (n1, _) = parabolic_dissipation(scheme.sigma_primitive().unwrap(), &u).unwrap();
            let exact = nu * 2.0 * std::f64::consts::PI.powi(2);
            let err = (n1 - exact).abs() / exact;
            let dx = 1.0 / n as f64;
            assert!(err <= 10.0 * dx * dx, "n={n} err={err}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn porous_medium_dissipation_matches_fine_quadrature() {
        // a(u) = u² (u ≥ 0), so Q(u) = u²/2 and |∂_x Q|² = u² u_x².
        let d = DiffusionKind::PowerClipped {
            kappa: 1.0,
            gamma: 1.0,
            u_max: 10.0,
        };
        let n = 256;
        let mut spec = builtin_problem("heat").unwrap();
        spec.diffusion = d;
        spec.initial = crate::model::InitialCondition::Sine {
            offset: 1.5,
            amplitude: 1.0,
            wavenumber: 1,
        };
        let u = spec.initial_field(grid(n)).unwrap();
        let table = SigmaPrimitive::new(&d, 0.0, 3.0, 3.0 / 128.0).unwrap();
        let (n1, _) = parabolic_dissipation(&table, &u).unwrap();
        let w = 2.0 * std::f64::consts::PI;
        let oracle = crate::numerics::integrate(0.0, 1.0, 200, |x| {
            let v = 1.5 + (w * x).sin();
            let vx = w * (w * x).cos();
            v * v * vx * vx
        });
        assert!((n1 - oracle).abs() / oracle < 1e-3, "{n1} vs {oracle}");
    }
}
