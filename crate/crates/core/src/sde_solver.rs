//! Pointwise stochastic flow `dv = Σ_k g_k(x, v) dβ_k`.
//!
//! Each cell evolves independently but all cells share the Brownian increment
//! of a mode; spatial correlation comes only from `g_k(x, ·)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Field;
use crate::model::{NoiseShape, ProblemSpec};
use crate::rng::RngStream;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdeError {
    #[error("state became non-finite at cell {cell}")]
    NonFiniteState { cell: usize },
    #[error("exact solution needs all modes linear or all additive")]
    NotExactlySolvable,
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdeScheme {
    EulerMaruyama,
    /// Closed-form solution; only for linear or additive modes.
    ExactLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdeStepPlan {
    pub substep: f64,
    pub modes: usize,
    pub scheme: SdeScheme,
}

impl SdeStepPlan {
    pub fn new(substep: f64, modes: usize, scheme: SdeScheme) -> Result<Self, SdeError> {
        if !(substep > 0.0) || !substep.is_finite() {
            return Err(SdeError::InvalidPlan(format!("substep {substep} must be positive")));
        }
        if modes == 0 {
            return Err(SdeError::InvalidPlan("need at least one mode".into()));
        }
        Ok(Self {
            substep,
            modes,
            scheme,
        })
    }

    /// Euler–Maruyama over every mode of `spec`.
    pub fn euler(spec: &ProblemSpec, substep: f64) -> Result<Self, SdeError> {
        Self::new(substep, spec.noise.modes.len().max(1), SdeScheme::EulerMaruyama)
    }
}

/// Per-sample Brownian source: mode `k` draws from `RngStream(seed, sample, k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleNoise {
    pub seed: u64,
    pub sample: u64,
}

impl SampleNoise {
    pub fn stream(&self, mode: usize) -> RngStream {
        RngStream::new(self.seed, self.sample, mode as u64)
    }
}

/// Brownian increment of `mode` over `dt` for draw `draw_index`.
pub fn sample_increments(noise: &SampleNoise, mode: usize, draw_index: u64, dt: f64) -> f64 {
    noise.stream(mode).sample_increment(draw_index, dt)
}

fn active_modes(plan: &SdeStepPlan, spec: &ProblemSpec) -> usize {
    plan.modes.min(spec.noise.modes.len())
}

/// One Euler–Maruyama step with the given per-mode increments.
pub fn sde_step(
    v: &Field,
    plan: &SdeStepPlan,
    spec: &ProblemSpec,
    dw: &[f64],
) -> Result<Field, SdeError> {
    let k = active_modes(plan, spec);
    let grid = *v.grid();
    let mut out = v.values().to_vec();
    if k == 0 {
        return Ok(Field::from_raw(grid, out));
    }
    let modes = &spec.noise.modes[..k];
    for (cell, val) in out.iter_mut().enumerate() {
        let x = grid.center(cell)[0];
        let xi = *val;
        let mut inc = 0.0;
        for (m, w) in modes.iter().zip(dw) {
            inc += m.eval(x, xi) * w;
        }
        *val = xi + inc;
        if !val.is_finite() {
            return Err(SdeError::NonFiniteState { cell });
        }
    }
    Ok(Field::from_raw(grid, out))
}

/// Exact solution over an interval of length `dt` with total increments `dw`.
pub fn exact_linear(
    v: &Field,
    dt: f64,
    spec: &ProblemSpec,
    dw: &[f64],
) -> Result<Field, SdeError> {
    let modes = &spec.noise.modes;
    let all = |s: NoiseShape| modes.iter().all(|m| m.shape == s);
    let grid = *v.grid();
    let vals = v
        .values()
        .iter()
        .enumerate()
        .map(|(cell, &v0)| {
            let x = grid.center(cell)[0];
            if all(NoiseShape::Linear) {
                let (mut drift, mut mart) = (0.0, 0.0);
                for (m, w) in modes.iter().zip(dw) {
                    let c = m.amplitude * m.profile(x);
                    mart += c * w;
                    drift += 0.5 * c * c * dt;
                }
                Ok(v0 * (mart - drift).exp())
            } else if all(NoiseShape::Additive) {
                let s: f64 = modes
                    .iter()
                    .zip(dw)
                    .map(|(m, w)| m.amplitude * m.profile(x) * w)
                    .sum();
                Ok(v0 + s)
            } else {
                Err(SdeError::NotExactlySolvable)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Field::from_raw(grid, vals))
}

/// `R(t, s) v`: substeps of length at most `plan.substep` covering `[s, t]`,
/// step `j` drawing variate `first_draw + j` of every mode stream. Returns the
/// state and the next unused draw index.
pub fn sde_solve(
    v: &Field,
    s: f64,
    t: f64,
    plan: &SdeStepPlan,
    spec: &ProblemSpec,
    noise: &SampleNoise,
    first_draw: u64,
) -> Result<(Field, u64), SdeError> {
    if t < s {
        return Err(SdeError::InvalidPlan(format!("t = {t} precedes s = {s}")));
    }
    let span = t - s;
    if span == 0.0 || spec.noise.is_zero() {
        return Ok((v.clone(), first_draw));
    }
    let steps = (span / plan.substep * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let k = active_modes(plan, spec);
    let mut cur = v.clone();
    let mut dw = vec![0.0; k];
    for j in 0..steps {
        let dt = if j + 1 == steps {
            span - plan.substep * j as f64
        } else {
            plan.substep
        };
        for (mode, w) in dw.iter_mut().enumerate() {
            *w = sample_increments(noise, mode, first_draw + j, dt);
        }
        cur = match plan.scheme {
            SdeScheme::EulerMaruyama => sde_step(&cur, plan, spec, &dw)?,
            SdeScheme::ExactLinear => exact_linear(&cur, dt, spec, &dw)?,
        };
    }
    Ok((cur, first_draw + steps))
}

/// Constants of the moment bound `E‖v(t)‖_p^p ≤ e^{Kt}(E‖v₀‖_p^p + K_T t)`.
///
/// Itô gives `d/dt E‖v‖_p^p = p(p−1)/2 E∫|v|^{p−2} G² ≤ p(p−1)/2 C_g E∫(|v|^{p−2} + |v|^p)`.
/// Young's inequality `|v|^{p−2} ≤ ((p−2)/p)|v|^p + 2/p` turns this into
/// `K y + K_T` with `K = p(p−1)/2 · C_g · c_p`, `c_p = 2(p−1)/p`, i.e.
/// `K = (p−1)² C_g`, and `K_T = (p−1) C_g`; Gronwall finishes.
pub fn moment_constants(p: f64, c_g: f64) -> (f64, f64) {
    let c_p = 2.0 * (p - 1.0) / p;
    (0.5 * p * (p - 1.0) * c_g * c_p, (p - 1.0) * c_g)
}

pub fn moment_bound(p: f64, c_g: f64, initial: f64, t: f64) -> f64 {
    let (k, kt) = moment_constants(p, c_g);
    (k * t).exp() * (initial + kt * t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{lp_norm_pow, TorusGrid};
    use crate::model::{builtin_problem, Modulus, NoiseMode, NoiseSpec};
    use crate::numerics::MeanEstimate;

    fn grid(n: usize) -> TorusGrid {
        TorusGrid::one_d(n).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        let spec = builtin_problem("burgers").unwrap();
        let v = spec.initial_field(grid(16)).unwrap();
        let plan = SdeStepPlan::new(0.01, 1, SdeScheme::EulerMaruyama).unwrap();
        let noise = SampleNoise { seed: 1, sample: 0 };
        let (out, _) = sde_solve(&v, 0.0, 0.5, &plan, &spec, &noise, 0).unwrap();
        assert_eq!(out, v);
        let (same, next) = sde_solve(&v, 0.3, 0.3, &plan, &spec, &noise, 5).unwrap();
        assert_eq!((same, next), (v, 5));
    }

    #[test]
    fn additive_noise_is_exact_per_sample() {
        let mut spec = builtin_problem("pure-sde").unwrap();
        spec.noise = NoiseSpec {
            modes: vec![NoiseMode {
                shape: NoiseShape::Additive,
                amplitude: 1.0,
                wavenumber: 1,
            }],
            modulus: Modulus::Linear,
        };
        let v0 = spec.initial_field(grid(32)).unwrap();
        let plan = SdeStepPlan::new(0.01, 1, SdeScheme::EulerMaruyama).unwrap();
        let noise = SampleNoise { seed: 3, sample: 8 };
        let (v, n) = sde_solve(&v0, 0.0, 0.37, &plan, &spec, &noise, 0).unwrap();
        let beta: f64 = (0..n)
            .map(|j| {
                let dt = if j + 1 == n { 0.37 - 0.01 * j as f64 } else { 0.01 };
                sample_increments(&noise, 0, j, dt)
            })
            .sum();
        for c in 0..32 {
            let x = grid(32).center(c)[0];
            let expected = v0.values()[c] + (2.0 * std::f64::consts::PI * x).sin() * beta;
            assert!((v.values()[c] - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_noise_second_moment_matches_gbm() {
        let spec = builtin_problem("pure-sde").unwrap();
        let lambda: f64 = 0.5;
        let v0 = spec.initial_field(grid(8)).unwrap();
        let plan = SdeStepPlan::euler(&spec, 0.01).unwrap();
        let t = 1.0;
        let m = 10_000;
        let samples: Vec<f64> = (0..m)
            .map(|i| {
                let noise = SampleNoise { seed: 77, sample: i };
                let (v, _) = sde_solve(&v0, 0.0, t, &plan, &spec, &noise, 0).unwrap();
                lp_norm_pow(&v, 2.0)
            })
            .collect();
        let est = MeanEstimate::from_samples(&samples);
        let exact = lp_norm_pow(&v0, 2.0) * (lambda * lambda * t).exp();
        assert!((est.mean - exact).abs() <= 3.0 * est.std_error, "{est:?} vs {exact}");
        let bound = moment_bound(2.0, spec.noise.linear_growth_const(), lp_norm_pow(&v0, 2.0), t);
        assert!(est.mean <= bound + 3.0 * est.std_error);
    }

    #[test]
    fn moment_constants_match_closed_form() {
        for p in [2.0, 3.0, 4.0] {
            let (k, kt) = moment_constants(p, 0.3);
            assert!((k - (p - 1.0) * (p - 1.0) * 0.3).abs() < 1e-15);
            assert!((kt - (p - 1.0) * 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn euler_strong_order_against_exact_gbm() {
        let spec = builtin_problem("pure-sde").unwrap();
        let v0 = Field::constant(grid(2), 1.0);
        let fine = 512u64;
        let t = 1.0;
        let samples = 20_000;
        let levels = [4u64, 8, 16, 32, 64, 128];
        let mut errs = vec![Vec::new(); levels.len()];
        for s in 0..samples {
            let noise = SampleNoise { seed: 5, sample: s };
            let dt_f = t / fine as f64;
            let incs: Vec<f64> = (0..fine).map(|j| sample_increments(&noise, 0, j, dt_f)).collect();
            let total: f64 = incs.iter().sum();
            let exact = exact_linear(&v0, t, &spec, &[total]).unwrap().values()[0];
            for (li, &steps) in levels.iter().enumerate() {
                let agg = (fine / steps) as usize;
                let plan = SdeStepPlan::euler(&spec, t / steps as f64).unwrap();
                let mut v = v0.clone();
                for chunk in incs.chunks(agg) {
                    let w: f64 = chunk.iter().sum();
                    v = sde_step(&v, &plan, &spec, &[w]).unwrap();
                }
                errs[li].push((v.values()[0] - exact).abs());
            }
        }
        let xs: Vec<f64> = levels.iter().map(|&n| t / n as f64).collect();
        let ys: Vec<f64> = errs.iter().map(|e| MeanEstimate::from_samples(e).mean).collect();
        let (slope, _) = crate::numerics::loglog_fit(&xs, &ys).unwrap();
        // The asymptotic order is exactly 1/2, so the estimate scatters around it.
        assert!((0.45..=0.65).contains(&slope), "observed order {slope}");
    }

    #[test]
    fn exact_linear_rejects_mixed_shapes() {
        let spec = builtin_problem("degenerate-transport").unwrap();
        let v = Field::constant(grid(4), 1.0);
        assert_eq!(
            exact_linear(&v, 0.1, &spec, &[0.1, 0.2]),
            Err(SdeError::NotExactlySolvable)
        );
    }

    #[test]
    fn blow_up_is_reported() {
        let mut spec = builtin_problem("pure-sde").unwrap();
        spec.noise.modes[0].amplitude = 1e300;
        let v = Field::constant(grid(4), 1e10);
        let plan = SdeStepPlan::euler(&spec, 0.1).unwrap();
        assert!(matches!(
            sde_step(&v, &plan, &spec, &[1e10]),
            Err(SdeError::NonFiniteState { .. })
        ));
    }
}
