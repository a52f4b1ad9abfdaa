use serde::{Deserialize, Serialize};

use super::{ModelError, ProblemSpec};
use crate::grid::{torus_distance, TorusGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationTolerances {
    /// Relative finite-difference tolerance for `b = B′`.
    pub fd: f64,
    pub psd: f64,
    pub sqrt: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            fd: 1e-6,
            psd: 1e-12,
            sqrt: 1e-10,
        }
    }
}

/// One sampled inequality. `worst_slack` is `rhs − lhs` minimized over the
/// samples, so a check passes when it is nonnegative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub hypothesis: String,
    pub name: String,
    pub worst_slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub problem: String,
    pub samples: usize,
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, hypothesis: &str, name: &str, worst_slack: f64) {
        self.checks.push(HypothesisCheck {
            hypothesis: hypothesis.into(),
            name: name.into(),
            worst_slack,
            passed: worst_slack >= 0.0,
        });
    }
}

fn finite(map: &'static str, xi: f64, v: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFiniteEvaluation { map, xi })
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Checks the flux, diffusion and noise hypotheses by dense sampling of the
/// declared evaluation range.
pub fn validate_hypotheses(
    spec: &ProblemSpec,
    samples: usize,
    tol: ValidationTolerances,
) -> Result<ValidationReport, ModelError> {
    let (lo, hi) = spec.eval_range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(ModelError::RangeEmpty { lo, hi });
    }
    if samples < 2 {
        return Err(ModelError::InvalidSampleCount(samples));
    }
    let xs = linspace(lo, hi, samples);
    let mut report = ValidationReport {
        problem: spec.name.clone(),
        samples,
        checks: Vec::new(),
    };

    // H1: b = B′ and polynomial growth.
    let flux = &spec.flux;
    let pb = flux.growth_exponent();
    let cb = flux.growth_const();
    let mut fd_slack = f64::INFINITY;
    let mut growth_slack = f64::INFINITY;
    for &xi in &xs {
        let h = 1e-4 * xi.abs().max(1.0);
        let bp = finite("B", xi, flux.flux(xi + h))?;
        let bm = finite("B", xi, flux.flux(xi - h))?;
        let b = finite("b", xi, flux.derivative(xi))?;
        let weight = 1.0 + xi.abs().powf(pb);
        fd_slack = fd_slack.min(tol.fd * weight - ((bp - bm) / (2.0 * h) - b).abs());
        growth_slack = growth_slack.min(cb * weight - b.abs());
    }
    report.push("H1", "finite-difference derivative", fd_slack);
    report.push("H1", "polynomial growth of b", growth_slack);

    // H2: A = σσ ⪰ 0, σ bounded and γ-Hölder, β(0) = 0 and β nondecreasing.
    let d = &spec.diffusion;
    let gamma = d.gamma();
    let sigmas: Vec<f64> = xs
        .iter()
        .map(|&xi| finite("sigma", xi, d.sigma(xi)))
        .collect::<Result<_, _>>()?;
    let mut psd_slack = f64::INFINITY;
    let mut sqrt_slack = f64::INFINITY;
    let mut bound_slack = f64::INFINITY;
    for (&xi, &s) in xs.iter().zip(&sigmas) {
        let a = finite("A", xi, d.a(xi))?;
        psd_slack = psd_slack.min(a + tol.psd);
        sqrt_slack = sqrt_slack.min(tol.sqrt - (s * s - a).abs());
        bound_slack = bound_slack.min(d.sigma_bound() - s.abs());
    }
    report.push("H2", "A positive semidefinite", psd_slack);
    report.push("H2", "sigma squared equals A", sqrt_slack);
    report.push("H2", "sigma bounded", bound_slack);

    let hc = d.holder_const();
    let mut holder_slack = f64::INFINITY;
    for i in 0..samples {
        for j in (i + 1)..samples {
            let dxi = xs[j] - xs[i];
            let lhs = (sigmas[j] - sigmas[i]).abs();
            // Relative slack keeps the tiny-|ξ−ζ| pairs from drowning in rounding.
            let rhs = hc * dxi.powf(gamma);
            holder_slack = holder_slack.min(rhs * (1.0 + 1e-12) + 1e-15 - lhs);
        }
    }
    report.push("H2", "sigma gamma-Hoelder", holder_slack);
    report.push(
        "H2",
        "gamma in (1/2, 1]",
        if gamma > 0.5 && gamma <= 1.0 { 0.0 } else { -1.0 },
    );
    let beta0 = finite("beta", 0.0, d.beta(0.0))?;
    report.push("H2", "beta(0) = 0", -beta0.abs());
    let mut mono_slack = f64::INFINITY;
    let mut prev = finite("beta", xs[0], d.beta(xs[0]))?;
    for &xi in &xs[1..] {
        let cur = finite("beta", xi, d.beta(xi))?;
        mono_slack = mono_slack.min(cur - prev);
        prev = cur;
    }
    report.push("H2", "beta nondecreasing", mono_slack);

    // H3: linear growth of G² and the continuity modulus.
    let noise = &spec.noise;
    let cg = noise.linear_growth_const();
    let nx = samples.min(64);
    let grid_x: Vec<f64> = (0..nx).map(|j| j as f64 / nx as f64).collect();
    let mut g2_slack = f64::INFINITY;
    for &x in &grid_x {
        for &xi in &xs {
            let g2 = finite("G^2", xi, noise.g_squared(x, xi))?;
            g2_slack = g2_slack.min(cg * (1.0 + xi * xi) * (1.0 + 1e-14) - g2);
        }
    }
    report.push("H3", "G^2 linear growth", g2_slack);

    let nq = samples.min(24);
    let qx: Vec<f64> = (0..nq).map(|j| j as f64 / nq as f64).collect();
    let qxi = linspace(lo, hi, nq);
    let mc = noise.modulus_const(lo, hi);
    let mut mod_slack = f64::INFINITY;
    for &x in &qx {
        for &y in &qx {
            let dx = torus_distance(x, y);
            for &xi in &qxi {
                for &zeta in &qxi {
                    let dxi = (xi - zeta).abs();
                    let lhs: f64 = noise
                        .modes
                        .iter()
                        .map(|m| {
                            let diff = m.eval(x, xi) - m.eval(y, zeta);
                            diff * diff
                        })
                        .sum();
                    let rhs = mc * (dx * dx + dxi * noise.modulus.eval(dxi));
                    mod_slack = mod_slack.min(rhs * (1.0 + 1e-12) + 1e-14 - lhs);
                }
            }
        }
    }
    report.push("H3", "noise continuity modulus", mod_slack);

    // Initial data finite.
    let grid = TorusGrid::new(spec.dim, 64)?;
    let init_slack = match spec.initial_field(grid) {
        Ok(_) => 0.0,
        Err(_) => -1.0,
    };
    report.push("data", "initial data finite", init_slack);

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        builtin_problem, builtin_problems, DiffusionKind, FluxKind, Modulus, NoiseMode,
        NoiseShape, NoiseSpec,
    };

    #[test]
    fn all_builtins_pass_at_default_tolerances() {
        for spec in builtin_problems() {
            let report = validate_hypotheses(&spec, 200, ValidationTolerances::default()).unwrap();
            let failures: Vec<_> = report.failures().collect();
            assert!(failures.is_empty(), "{}: {failures:?}", spec.name);
        }
    }

    #[test]
    fn burgers_growth_passes_with_unit_constant() {
        let spec = builtin_problem("burgers").unwrap();
        assert_eq!(spec.flux.growth_const(), 1.0);
        let r = validate_hypotheses(&spec, 50, ValidationTolerances::default()).unwrap();
        assert!(r.passed());
    }

    /// Brute-force Hölder ratio over a 200×200 sample grid.
    fn brute_force_holder(d: &DiffusionKind, lo: f64, hi: f64, gamma: f64) -> f64 {
        let xs = linspace(lo, hi, 200);
        let mut worst: f64 = 0.0;
        for &a in &xs {
            for &b in &xs {
                if a != b {
                    worst = worst.max((d.sigma(a) - d.sigma(b)).abs() / (a - b).abs().powf(gamma));
                }
            }
        }
        worst
    }

    #[test]
    fn clipped_power_sigma_is_holder_with_unit_constant() {
        let d = DiffusionKind::PowerClipped {
            kappa: 1.0,
            gamma: 0.75,
            u_max: 1.0,
        };
        assert_eq!(d.holder_const(), 1.0);
        assert!(brute_force_holder(&d, -3.0, 3.0, 0.75) <= 1.0 + 1e-12);
        let spec = builtin_problem("degenerate-transport").unwrap();
        let (lo, hi) = spec.eval_range;
        let worst = brute_force_holder(&spec.diffusion, lo, hi, spec.diffusion.gamma());
        assert!(worst <= spec.diffusion.holder_const() + 1e-12);
        let r = validate_hypotheses(&spec, 200, ValidationTolerances::default()).unwrap();
        assert!(r.checks.iter().any(|c| c.name == "sigma gamma-Hoelder" && c.passed));
    }

    #[test]
    fn linear_noise_growth_passes() {
        let mut spec = builtin_problem("pure-sde").unwrap();
        spec.noise = NoiseSpec {
            modes: vec![NoiseMode {
                shape: NoiseShape::Linear,
                amplitude: 0.7,
                wavenumber: 0,
            }],
            modulus: Modulus::Linear,
        };
        let r = validate_hypotheses(&spec, 100, ValidationTolerances::default()).unwrap();
        assert!(r.passed());
    }

    #[test]
    fn violations_are_reported() {
        let mut spec = builtin_problem("degenerate-transport").unwrap();
        spec.diffusion = DiffusionKind::PowerClipped {
            kappa: 1.0,
            gamma: 0.4,
            u_max: 2.0,
        };
        let r = validate_hypotheses(&spec, 50, ValidationTolerances::default()).unwrap();
        assert!(!r.passed());
        assert!(r.failures().any(|c| c.name == "gamma in (1/2, 1]"));

        let mut spec = builtin_problem("burgers").unwrap();
        spec.flux = FluxKind::Linear { speed: f64::NAN };
        assert!(matches!(
            validate_hypotheses(&spec, 10, ValidationTolerances::default()),
            Err(ModelError::NonFiniteEvaluation { .. })
        ));
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let mut spec = builtin_problem("burgers").unwrap();
        spec.eval_range = (1.0, 1.0);
        assert!(matches!(
            validate_hypotheses(&spec, 10, ValidationTolerances::default()),
            Err(ModelError::RangeEmpty { .. })
        ));
        let spec = builtin_problem("burgers").unwrap();
        assert_eq!(
            validate_hypotheses(&spec, 1, ValidationTolerances::default()),
            Err(ModelError::InvalidSampleCount(1))
        );
    }
}
