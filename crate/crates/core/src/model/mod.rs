//! Problem data: flux, degenerate diffusion, noise modes and initial data.
//!
//! Every map is a closed-form enum variant so a [`ProblemSpec`] is plain data,
//! cheap to clone, serializable into run manifests and safe to share across
//! threads.

pub mod config;
mod validate;

use std::f64::consts::PI;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Field, GridError, TorusGrid};

pub use validate::{validate_hypotheses, HypothesisCheck, ValidationReport, ValidationTolerances};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{map} is not finite at xi = {xi}")]
    NonFiniteEvaluation { map: &'static str, xi: f64 },
    #[error("evaluation range [{lo}, {hi}] is empty or not finite")]
    RangeEmpty { lo: f64, hi: f64 },
    #[error("need at least 2 samples, got {0}")]
    InvalidSampleCount(usize),
    #[error("unknown {kind} '{name}'")]
    UnknownName { kind: &'static str, name: String },
    #[error("invalid parameter {name}: {msg}")]
    InvalidParameter { name: &'static str, msg: String },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Scalar flux `B` (applied along every axis in 2D) and its derivative `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum FluxKind {
    Zero,
    Linear { speed: f64 },
    Burgers,
    Cubic,
}

impl FluxKind {
    pub fn flux(&self, u: f64) -> f64 {
        match *self {
            FluxKind::Zero => 0.0,
            FluxKind::Linear { speed } => speed * u,
            FluxKind::Burgers => 0.5 * u * u,
            FluxKind::Cubic => u * u * u / 3.0,
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match *self {
            FluxKind::Zero => 0.0,
            FluxKind::Linear { speed } => speed,
            FluxKind::Burgers => u,
            FluxKind::Cubic => u * u,
        }
    }

    /// Engquist–Osher parts `B⁺(u) = ∫₀ᵘ max(b, 0)` and `B⁻(u) = ∫₀ᵘ min(b, 0)`.
    pub fn eo_parts(&self, u: f64) -> (f64, f64) {
        match *self {
            FluxKind::Zero => (0.0, 0.0),
            FluxKind::Linear { speed } if speed >= 0.0 => (speed * u, 0.0),
            FluxKind::Linear { speed } => (0.0, speed * u),
            FluxKind::Burgers => {
                let p = u.max(0.0);
                let m = u.min(0.0);
                (0.5 * p * p, 0.5 * m * m)
            }
            FluxKind::Cubic => (self.flux(u), 0.0),
        }
    }

    /// Parts of the quadratic-entropy flux, `q^±(u) = ∫₀ᵘ ξ b^±(ξ) dξ`.
    pub fn entropy_flux_parts(&self, u: f64) -> (f64, f64) {
        match *self {
            FluxKind::Zero => (0.0, 0.0),
            FluxKind::Linear { speed } if speed >= 0.0 => (0.5 * speed * u * u, 0.0),
            FluxKind::Linear { speed } => (0.0, 0.5 * speed * u * u),
            FluxKind::Burgers => {
                let p = u.max(0.0);
                let m = u.min(0.0);
                (p * p * p / 3.0, m * m * m / 3.0)
            }
            FluxKind::Cubic => (0.25 * u * u * u * u, 0.0),
        }
    }

    pub fn entropy_flux(&self, u: f64) -> f64 {
        let (p, m) = self.entropy_flux_parts(u);
        p + m
    }

    /// `p_b` in `|b(ξ)| ≤ C_b (1 + |ξ|^{p_b})`.
    pub fn growth_exponent(&self) -> f64 {
        match self {
            FluxKind::Zero | FluxKind::Linear { .. } => 0.0,
            FluxKind::Burgers => 1.0,
            FluxKind::Cubic => 2.0,
        }
    }

    pub fn growth_const(&self) -> f64 {
        match *self {
            FluxKind::Zero => 0.0,
            FluxKind::Linear { speed } => speed.abs(),
            FluxKind::Burgers | FluxKind::Cubic => 1.0,
        }
    }

    /// `max |b|` over `[lo, hi]`.
    pub fn max_speed(&self, lo: f64, hi: f64) -> f64 {
        let m = lo.abs().max(hi.abs());
        match *self {
            FluxKind::Zero => 0.0,
            FluxKind::Linear { speed } => speed.abs(),
            FluxKind::Burgers => m,
            FluxKind::Cubic => m * m,
        }
    }
}

/// Scalar diffusion coefficient `a(u)`; in 2D the matrix is `a(u) I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum DiffusionKind {
    Zero,
    Constant {
        nu: f64,
    },
    /// `a(u) = κ min(|u|, U)^{2γ}`.
    PowerClipped {
        kappa: f64,
        gamma: f64,
        u_max: f64,
    },
}

impl DiffusionKind {
    pub fn a(&self, u: f64) -> f64 {
        match *self {
            DiffusionKind::Zero => 0.0,
            DiffusionKind::Constant { nu } => nu,
            DiffusionKind::PowerClipped { kappa, gamma, u_max } => {
                kappa * u.abs().min(u_max).powf(2.0 * gamma)
            }
        }
    }

    pub fn sigma(&self, u: f64) -> f64 {
        match *self {
            DiffusionKind::Zero => 0.0,
            DiffusionKind::Constant { nu } => nu.sqrt(),
            DiffusionKind::PowerClipped { kappa, gamma, u_max } => {
                kappa.sqrt() * u.abs().min(u_max).powf(gamma)
            }
        }
    }

    /// `β(u) = ∫₀ᵘ a`.
    pub fn beta(&self, u: f64) -> f64 {
        match *self {
            DiffusionKind::Zero => 0.0,
            DiffusionKind::Constant { nu } => nu * u,
            DiffusionKind::PowerClipped { kappa, gamma, u_max } => {
                let au = u.abs();
                let m = au.min(u_max);
                let e = 2.0 * gamma + 1.0;
                let tail = u_max.powf(2.0 * gamma) * (au - u_max).max(0.0);
                u.signum() * kappa * (m.powf(e) / e + tail)
            }
        }
    }

    /// `∫₀ᵘ ξ a(ξ) dξ`, the diffusive part of the quadratic-entropy flux.
    pub fn entropy_primitive(&self, u: f64) -> f64 {
        match *self {
            DiffusionKind::Zero => 0.0,
            DiffusionKind::Constant { nu } => 0.5 * nu * u * u,
            DiffusionKind::PowerClipped { kappa, gamma, u_max } => {
                let au = u.abs();
                let m = au.min(u_max);
                let e = 2.0 * gamma + 2.0;
                let tail = u_max.powf(2.0 * gamma) * 0.5 * (au * au - u_max * u_max).max(0.0);
                kappa * (m.powf(e) / e + tail)
            }
        }
    }

    /// `max a` over `[lo, hi]`; `a` is even and nondecreasing in `|u|`.
    pub fn max_a(&self, lo: f64, hi: f64) -> f64 {
        self.a(lo.abs().max(hi.abs()))
    }

    pub fn sigma_bound(&self) -> f64 {
        match *self {
            DiffusionKind::Zero => 0.0,
            DiffusionKind::Constant { nu } => nu.sqrt(),
            DiffusionKind::PowerClipped { kappa, gamma, u_max } => {
                kappa.sqrt() * u_max.powf(gamma)
            }
        }
    }

    /// Hölder exponent of `σ`.
    pub fn gamma(&self) -> f64 {
        match *self {
            DiffusionKind::PowerClipped { gamma, .. } => gamma,
            _ => 1.0,
        }
    }

    pub fn holder_const(&self) -> f64 {
        match *self {
            DiffusionKind::PowerClipped { kappa, .. } => kappa.sqrt(),
            _ => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            DiffusionKind::Zero => true,
            DiffusionKind::Constant { nu } => nu == 0.0,
            DiffusionKind::PowerClipped { kappa, .. } => kappa == 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseShape {
    /// `h(ξ) = ξ`.
    Linear,
    /// `h(ξ) = 1`.
    Additive,
    /// `h(ξ) = ξ / √(1 + ξ²)`.
    Saturating,
}

impl NoiseShape {
    pub fn from_name(name: &str) -> Result<Self, ModelError> {
        match name {
            "linear" => Ok(Self::Linear),
            "additive" => Ok(Self::Additive),
            "saturating" => Ok(Self::Saturating),
            _ => Err(ModelError::UnknownName {
                kind: "noise shape",
                name: name.to_string(),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Additive => "additive",
            Self::Saturating => "saturating",
        }
    }

    pub fn h(&self, xi: f64) -> f64 {
        match self {
            Self::Linear => xi,
            Self::Additive => 1.0,
            Self::Saturating => xi / (1.0 + xi * xi).sqrt(),
        }
    }

    /// `sup |h|` over `[lo, hi]`.
    fn sup(&self, lo: f64, hi: f64) -> f64 {
        let m = lo.abs().max(hi.abs());
        self.h(m).abs()
    }

    /// Lipschitz constant of `h`.
    fn lipschitz(&self) -> f64 {
        match self {
            Self::Additive => 0.0,
            Self::Linear | Self::Saturating => 1.0,
        }
    }
}

/// One noise mode `g_k(x, ξ) = λ p_k(x) h(ξ)`, with `p_k(x) = sin(2πkx)` for
/// `k ≥ 1` and `p_0 ≡ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMode {
    pub shape: NoiseShape,
    pub amplitude: f64,
    pub wavenumber: u32,
}

impl NoiseMode {
    pub fn profile(&self, x: f64) -> f64 {
        if self.wavenumber == 0 {
            1.0
        } else {
            (2.0 * PI * self.wavenumber as f64 * x).sin()
        }
    }

    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        self.amplitude * self.profile(x) * self.shape.h(xi)
    }
}

/// Modulus `r` in the noise continuity bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Modulus {
    /// `r(δ) = δ`.
    Linear,
    /// `r(δ) = δ^exponent` with `exponent ∈ (0, 1]`.
    Power { exponent: f64 },
}

impl Modulus {
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            Modulus::Linear => delta,
            Modulus::Power { exponent } => delta.powf(exponent),
        }
    }

    fn exponent(&self) -> f64 {
        match *self {
            Modulus::Linear => 1.0,
            Modulus::Power { exponent } => exponent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub modes: Vec<NoiseMode>,
    pub modulus: Modulus,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            modes: Vec::new(),
            modulus: Modulus::Linear,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|m| m.amplitude == 0.0)
    }

    pub fn g(&self, k: usize, x: f64, xi: f64) -> f64 {
        self.modes[k].eval(x, xi)
    }

    /// `G²(x, ξ) = Σ_k g_k(x, ξ)²`.
    pub fn g_squared(&self, x: f64, xi: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let g = m.eval(x, xi);
                g * g
            })
            .sum()
    }

    /// `C_g` in `G² ≤ C_g (1 + ξ²)`; every shape has `|h(ξ)|² ≤ 1 + ξ²`.
    pub fn linear_growth_const(&self) -> f64 {
        self.modes.iter().map(|m| m.amplitude * m.amplitude).sum()
    }

    /// Constant in `Σ_k |g_k(x,ξ) − g_k(y,ζ)|² ≤ C (|x−y|² + |ξ−ζ| r(|ξ−ζ|))`
    /// on `[lo, hi]`.
    ///
    /// From `|Δg_k| ≤ λ_k (2πk H |x−y| + L_h |ξ−ζ|)` and
    /// `|ξ−ζ|² ≤ W^{1−e} |ξ−ζ|^{1+e}` for `r(δ) = δ^e` on a range of width `W`.
    pub fn modulus_const(&self, lo: f64, hi: f64) -> f64 {
        let width = (hi - lo).abs();
        let e = self.modulus.exponent();
        let range_factor = if e < 1.0 { width.powf(1.0 - e).max(1.0) } else { 1.0 };
        self.modes
            .iter()
            .map(|m| {
                let kk = 2.0 * PI * m.wavenumber as f64;
                let sup = m.shape.sup(lo, hi);
                let lip = m.shape.lipschitz();
                2.0 * m.amplitude * m.amplitude
                    * (kk * kk * sup * sup).max(lip * lip * range_factor)
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    Constant { value: f64 },
    /// Exact cell averages of `offset + amplitude sin(2πkx)`.
    Sine { offset: f64, amplitude: f64, wavenumber: u32 },
    /// `left` on `x < 1/2`, `right` on `x ≥ 1/2`, as exact cell averages.
    Step { left: f64, right: f64 },
    /// Independent uniform values in `[−amplitude, amplitude]`.
    Random { seed: u64, amplitude: f64 },
    Explicit { values: Vec<f64> },
}

impl InitialCondition {
    pub fn build(&self, grid: TorusGrid) -> Result<Field, ModelError> {
        let n = grid.n();
        let dx = grid.dx();
        let line: Vec<f64> = match self {
            InitialCondition::Constant { value } => vec![*value; n],
            InitialCondition::Sine {
                offset,
                amplitude,
                wavenumber,
            } => {
                if *wavenumber == 0 {
                    vec![*offset; n]
                } else {
                    let w = 2.0 * PI * *wavenumber as f64;
                    (0..n)
                        .map(|i| {
                            let (a, b) = (i as f64 * dx, (i + 1) as f64 * dx);
                            offset + amplitude * ((w * a).cos() - (w * b).cos()) / (w * dx)
                        })
                        .collect()
                }
            }
            InitialCondition::Step { left, right } => (0..n)
                .map(|i| {
                    let (a, b) = (i as f64 * dx, (i + 1) as f64 * dx);
                    let lfrac = ((0.5f64.min(b) - a) / dx).clamp(0.0, 1.0);
                    left * lfrac + right * (1.0 - lfrac)
                })
                .collect(),
            InitialCondition::Random { seed, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let vals = (0..grid.cell_count())
                    .map(|_| {
                        let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                        amplitude * (2.0 * unit - 1.0)
                    })
                    .collect();
                return Ok(Field::new(grid, vals)?);
            }
            InitialCondition::Explicit { values } => {
                return Ok(Field::new(grid, values.clone())?);
            }
        };
        let vals = (0..grid.cell_count()).map(|c| line[c % n]).collect();
        Ok(Field::new(grid, vals)?)
    }
}

/// Complete data of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub dim: usize,
    pub flux: FluxKind,
    pub diffusion: DiffusionKind,
    pub noise: NoiseSpec,
    pub initial: InitialCondition,
    pub horizon: f64,
    /// Bounded range on which the hypotheses are checked.
    pub eval_range: (f64, f64),
}

impl ProblemSpec {
    /// `S` is the identity: no flux and no diffusion.
    pub fn is_deterministically_trivial(&self) -> bool {
        self.flux == FluxKind::Zero && self.diffusion.is_zero()
    }

    pub fn initial_field(&self, grid: TorusGrid) -> Result<Field, ModelError> {
        if grid.dim() != self.dim {
            return Err(ModelError::InvalidParameter {
                name: "dim",
                msg: format!("grid has dimension {}, problem has {}", grid.dim(), self.dim),
            });
        }
        self.initial.build(grid)
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "pure-sde",
    "burgers",
    "degenerate-transport",
    "heat",
    "burgers-noise",
];

/// The builtin problem set.
pub fn builtin_problems() -> Vec<ProblemSpec> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin_problem(n).expect("builtin name"))
        .collect()
}

pub fn builtin_problem(name: &str) -> Option<ProblemSpec> {
    let sine = |offset, amplitude| InitialCondition::Sine {
        offset,
        amplitude,
        wavenumber: 1,
    };
    let spec = match name {
        "pure-sde" => ProblemSpec {
            name: name.into(),
            dim: 1,
            flux: FluxKind::Zero,
            diffusion: DiffusionKind::Zero,
            noise: NoiseSpec {
                modes: vec![NoiseMode {
                    shape: NoiseShape::Linear,
                    amplitude: 0.5,
                    wavenumber: 0,
                }],
                modulus: Modulus::Linear,
            },
            initial: sine(1.0, 0.5),
            horizon: 1.0,
            eval_range: (-8.0, 8.0),
        },
        "burgers" => ProblemSpec {
            name: name.into(),
            dim: 1,
            flux: FluxKind::Burgers,
            diffusion: DiffusionKind::Zero,
            noise: NoiseSpec::none(),
            initial: sine(0.0, 1.0),
            horizon: 0.5,
            eval_range: (-2.0, 2.0),
        },
        "degenerate-transport" => {
            let gamma = 0.75;
            ProblemSpec {
                name: name.into(),
                dim: 1,
                flux: FluxKind::Burgers,
                diffusion: DiffusionKind::PowerClipped {
                    kappa: 0.05,
                    gamma,
                    u_max: 2.0,
                },
                noise: NoiseSpec {
                    modes: vec![
                        NoiseMode {
                            shape: NoiseShape::Saturating,
                            amplitude: 0.4,
                            wavenumber: 1,
                        },
                        NoiseMode {
                            shape: NoiseShape::Saturating,
                            amplitude: 0.3,
                            wavenumber: 2,
                        },
                    ],
                    modulus: Modulus::Power {
                        exponent: 2.0 * gamma - 1.0,
                    },
                },
                initial: sine(0.5, 1.0),
                horizon: 0.5,
                eval_range: (-4.0, 4.0),
            }
        }
        "heat" => ProblemSpec {
            name: name.into(),
            dim: 1,
            flux: FluxKind::Zero,
            diffusion: DiffusionKind::Constant { nu: 0.1 },
            noise: NoiseSpec::none(),
            initial: sine(0.0, 1.0),
            horizon: 0.1,
            eval_range: (-2.0, 2.0),
        },
        "burgers-noise" => ProblemSpec {
            name: name.into(),
            dim: 1,
            flux: FluxKind::Burgers,
            diffusion: DiffusionKind::Zero,
            noise: NoiseSpec {
                modes: vec![NoiseMode {
                    shape: NoiseShape::Linear,
                    amplitude: 0.3,
                    wavenumber: 1,
                }],
                modulus: Modulus::Linear,
            },
            initial: sine(0.0, 1.0),
            horizon: 0.5,
            eval_range: (-4.0, 4.0),
        },
        _ => return None,
    };
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FLUXES: [FluxKind; 5] = [
        FluxKind::Zero,
        FluxKind::Linear { speed: 0.7 },
        FluxKind::Linear { speed: -1.3 },
        FluxKind::Burgers,
        FluxKind::Cubic,
    ];

    #[test]
    fn builtin_list_is_complete() {
        let all = builtin_problems();
        assert!(all.len() >= 4);
        let a = &all[0];
        assert!(a.is_deterministically_trivial());
        assert_eq!(a.diffusion.sigma_bound(), 0.0);
        assert_eq!(a.noise.modes.len(), 1);
        assert!(builtin_problem("nope").is_none());
    }

    #[test]
    fn g_squared_matches_closed_form_for_single_mode() {
        let spec = builtin_problem("burgers-noise").unwrap();
        for &x in &[0.1, 0.37, 0.8] {
            for &xi in &[-3.0, -0.2, 0.0, 1.5, 3.9] {
                let closed = (0.3 * (2.0 * PI * x).sin() * xi).powi(2);
                let got = spec.noise.g_squared(x, xi);
                assert!((got - closed).abs() <= 1e-14 * closed.max(1e-300));
            }
        }
    }

    #[test]
    fn sine_cell_averages_integrate_exactly() {
        let g = TorusGrid::one_d(16).unwrap();
        let f = InitialCondition::Sine {
            offset: 0.5,
            amplitude: 1.0,
            wavenumber: 2,
        }
        .build(g)
        .unwrap();
        assert!((f.integral() - 0.5).abs() < 1e-15);
        // Cell [0, 1/16] of sin(4πx): (1 − cos(π/4)) / (4π/16).
        let c0 = 0.5 + (1.0 - (PI / 4.0).cos()) / (4.0 * PI / 16.0);
        assert!((f.values()[0] - c0).abs() < 1e-14);
    }

    #[test]
    fn step_averages_split_the_middle_cell() {
        let g = TorusGrid::one_d(5).unwrap();
        let f = InitialCondition::Step { left: 1.0, right: 0.0 }.build(g).unwrap();
        let expected = [1.0, 1.0, 0.5, 0.0, 0.0];
        for (a, b) in f.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn random_initial_is_seeded() {
        let g = TorusGrid::one_d(32).unwrap();
        let ic = InitialCondition::Random { seed: 9, amplitude: 2.0 };
        let a = ic.build(g).unwrap();
        assert_eq!(a, ic.build(g).unwrap());
        assert!(a.values().iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn power_clipped_beta_matches_quadrature() {
        let d = DiffusionKind::PowerClipped {
            kappa: 0.3,
            gamma: 0.75,
            u_max: 1.5,
        };
        for &u in &[-2.7f64, -1.5, -0.3, 0.0, 0.9, 1.5, 3.1] {
            // Split the oracle quadrature at the clipping kink.
            let kink = u.signum() * 1.5;
            let split = |f: &dyn Fn(f64) -> f64| {
                if u.abs() <= 1.5 {
                    crate::numerics::integrate(0.0, u, 64, f)
                } else {
                    crate::numerics::integrate(0.0, kink, 64, f)
                        + crate::numerics::integrate(kink, u, 64, f)
                }
            };
            let beta = split(&|s| d.a(s));
            let r = split(&|s| s * d.a(s));
            assert!((d.beta(u) - beta).abs() < 1e-10, "beta({u})");
            assert!((d.entropy_primitive(u) - r).abs() < 1e-10, "r({u})");
        }
    }

    proptest! {
        #[test]
        fn eo_parts_sum_to_flux(u in -5.0f64..5.0, k in 0usize..5) {
            let f = FLUXES[k];
            let (p, m) = f.eo_parts(u);
            prop_assert!((p + m - f.flux(u)).abs() <= 1e-12 * (1.0 + f.flux(u).abs()));
            let (qp, qm) = f.entropy_flux_parts(u);
            let q = crate::numerics::integrate(0.0, u, 8, |s| s * f.derivative(s));
            prop_assert!((qp + qm - q).abs() <= 1e-10 * (1.0 + q.abs()));
        }

        #[test]
        fn eo_parts_are_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0, k in 0usize..5) {
            let f = FLUXES[k];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(f.eo_parts(lo).0 <= f.eo_parts(hi).0 + 1e-15);
            prop_assert!(f.eo_parts(lo).1 >= f.eo_parts(hi).1 - 1e-15);
        }
    }
}
