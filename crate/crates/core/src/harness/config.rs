//! TOML run configuration. Problem sections follow [`crate::model::config`];
//! the remaining sections set the discretization:
//!
//! ```toml
//! seed = 7
//! [problem]
//! base = "degenerate-transport"
//! [grid]
//! n = 64
//! [det]
//! flux = "engquist-osher"     # or "lax-friedrichs" with alpha
//! cfl_adv = 0.9
//! cfl_diff = 0.45
//! xi_quadrature = 128
//! [sde]
//! substep = 0.0125            # default epsilon / 8
//! modes = 2                   # truncate the mode list
//! [split]
//! epsilon = 0.1
//! samples = 64
//! search_resolution = 0.00625 # default epsilon / 16
//! output_times = [0.25, 0.5]
//! ```

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::det_solver::{DetScheme, NumericalFlux};
use crate::grid::TorusGrid;
use crate::kinetic::XiGrid;
use crate::model::config::{
    DiffusionSection, FluxSection, NoiseSection, ProblemConfig, ProblemSection,
};
use crate::model::{builtin_problem, InitialCondition, ProblemSpec};
use crate::splitting::SplitPlan;

pub const DEFAULT_SEED: u64 = 20240917;

fn default_seed() -> u64 {
    DEFAULT_SEED
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "GridSection::default_n")]
    pub n: usize,
}

impl GridSection {
    fn default_n() -> usize {
        64
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: Self::default_n() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetSection {
    #[serde(default = "DetSection::default_flux")]
    pub flux: String,
    pub alpha: Option<f64>,
    #[serde(default = "DetSection::default_cfl_adv")]
    pub cfl_adv: f64,
    #[serde(default = "DetSection::default_cfl_diff")]
    pub cfl_diff: f64,
    #[serde(default = "DetSection::default_xi")]
    pub xi_quadrature: usize,
}

impl DetSection {
    fn default_flux() -> String {
        "engquist-osher".into()
    }
    fn default_cfl_adv() -> f64 {
        0.9
    }
    fn default_cfl_diff() -> f64 {
        0.45
    }
    fn default_xi() -> usize {
        128
    }

    /// The scheme with parabolic accounting on the problem range.
    pub fn scheme(&self, spec: &ProblemSpec) -> Result<DetScheme, HarnessError> {
        let flux = match self.flux.as_str() {
            "engquist-osher" => NumericalFlux::EngquistOsher,
            "lax-friedrichs" => NumericalFlux::LaxFriedrichs {
                alpha: self.alpha.ok_or_else(|| {
                    HarnessError::Config("det.alpha is required for lax-friedrichs".into())
                })?,
            },
            other => return Err(HarnessError::Config(format!("unknown det.flux '{other}'"))),
        };
        if self.xi_quadrature < 2 {
            return Err(HarnessError::Config("det.xi_quadrature must be at least 2".into()));
        }
        let mut scheme = DetScheme::new(flux, self.cfl_adv, self.cfl_diff)?;
        if !spec.diffusion.is_zero() {
            let (lo, hi) = spec.eval_range;
            let n = self.xi_quadrature;
            scheme = scheme
                .with_parabolic_accounting(&spec.diffusion, lo, hi, (hi - lo) / n as f64)?
                .with_xi_bins(XiGrid::new(lo, hi, n)?);
        }
        Ok(scheme)
    }
}

impl Default for DetSection {
    fn default() -> Self {
        Self {
            flux: Self::default_flux(),
            alpha: None,
            cfl_adv: Self::default_cfl_adv(),
            cfl_diff: Self::default_cfl_diff(),
            xi_quadrature: Self::default_xi(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    pub substep: Option<f64>,
    pub modes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    #[serde(default = "SplitSection::default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "SplitSection::default_samples")]
    pub samples: usize,
    pub search_resolution: Option<f64>,
    pub output_times: Option<Vec<f64>>,
}

impl SplitSection {
    fn default_epsilon() -> f64 {
        0.1
    }
    fn default_samples() -> usize {
        64
    }
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            epsilon: Self::default_epsilon(),
            samples: Self::default_samples(),
            search_resolution: None,
            output_times: None,
        }
    }
}

/// A complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub problem: ProblemSection,
    pub initial: Option<InitialCondition>,
    pub flux: Option<FluxSection>,
    pub diffusion: Option<DiffusionSection>,
    pub noise: Option<NoiseSection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub det: DetSection,
    #[serde(default)]
    pub sde: SdeSection,
    #[serde(default)]
    pub split: SplitSection,
}

impl RunConfig {
    /// Defaults around a builtin problem.
    pub fn for_builtin(name: &str) -> Result<Self, HarnessError> {
        if builtin_problem(name).is_none() {
            return Err(HarnessError::Config(format!("unknown builtin problem '{name}'")));
        }
        Ok(Self {
            seed: DEFAULT_SEED,
            problem: ProblemSection {
                base: Some(name.into()),
                ..Default::default()
            },
            initial: None,
            flux: None,
            diffusion: None,
            noise: None,
            grid: GridSection::default(),
            det: DetSection::default(),
            sde: SdeSection::default(),
            split: SplitSection::default(),
        })
    }

    /// Parses TOML; errors carry the line, column and offending key.
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec, HarnessError> {
        let pc = ProblemConfig {
            problem: self.problem.clone(),
            initial: self.initial.clone(),
            flux: self.flux.clone(),
            diffusion: self.diffusion.clone(),
            noise: self.noise.clone(),
        };
        let mut spec = pc.to_spec()?;
        if let Some(k) = self.sde.modes {
            spec.noise.modes.truncate(k);
        }
        Ok(spec)
    }

    pub fn torus(&self, spec: &ProblemSpec) -> Result<TorusGrid, HarnessError> {
        Ok(TorusGrid::new(spec.dim, self.grid.n)?)
    }

    /// Output times: configured, or `T/10, 2T/10, …, T`.
    pub fn output_times(&self, spec: &ProblemSpec) -> Vec<f64> {
        self.split
            .output_times
            .clone()
            .unwrap_or_else(|| (1..=10).map(|k| spec.horizon * k as f64 / 10.0).collect())
    }

    /// Splitting plan at `epsilon` on the default clock for that `ε`.
    pub fn split_plan(&self, spec: &ProblemSpec, epsilon: f64) -> Result<SplitPlan, HarnessError> {
        let mut plan = SplitPlan::new(spec, epsilon, self.seed, &self.output_times(spec))?;
        self.apply(spec, &mut plan)?;
        Ok(plan)
    }

    /// Overrides the plan's scheme, search and substep from the config.
    pub fn apply(&self, spec: &ProblemSpec, plan: &mut SplitPlan) -> Result<(), HarnessError> {
        plan.det = self.det.scheme(spec)?;
        if let Some(r) = self.split.search_resolution {
            if !(r > 0.0) {
                return Err(HarnessError::Config(format!("split.search_resolution {r} must be positive")));
            }
            plan.set_search_resolution(r);
        }
        if let Some(s) = self.sde.substep {
            if !(s > 0.0) {
                return Err(HarnessError::Config(format!("sde.substep {s} must be positive")));
            }
            plan.set_substep(s);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_config_round_trips() {
        let text = r#"
seed = 3
[problem]
base = "degenerate-transport"
horizon = 0.25
[grid]
n = 32
[det]
cfl_adv = 0.8
[sde]
substep = 0.01
[split]
epsilon = 0.05
samples = 8
output_times = [0.1, 0.25]
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let spec = cfg.problem_spec().unwrap();
        assert_eq!(spec.horizon, 0.25);
        let plan = cfg.split_plan(&spec, cfg.split.epsilon).unwrap();
        assert_eq!(plan.output_times(), vec![0.1, 0.25]);
        assert_eq!(plan.det.cfl_adv, 0.8);
        assert!(plan.det.sigma_primitive().is_some());
        let back = RunConfig::from_toml(&toml::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = RunConfig::from_toml("[split]\nepsilon = 0.1\nepsilom = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("epsilom") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn lax_friedrichs_needs_alpha() {
        let cfg = RunConfig::from_toml("[problem]\nbase = \"burgers\"\n[det]\nflux = \"lax-friedrichs\"\n")
            .unwrap();
        let spec = cfg.problem_spec().unwrap();
        assert!(cfg.det.scheme(&spec).is_err());
    }
}
