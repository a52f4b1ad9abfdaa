//! Config-file sections describing a problem. Flux and diffusion are chosen by
//! registry name; noise modes are `[shape, amplitude, wavenumber]` triples.

use serde::{Deserialize, Serialize};

use super::{
    builtin_problem, DiffusionKind, FluxKind, InitialCondition, ModelError, Modulus, NoiseMode,
    NoiseShape, NoiseSpec, ProblemSpec,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// Builtin problem to start from; other sections override its fields.
    pub base: Option<String>,
    pub name: Option<String>,
    pub dim: Option<usize>,
    pub horizon: Option<f64>,
    pub range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSection {
    pub name: String,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSection {
    pub name: String,
    pub nu: Option<f64>,
    pub kappa: Option<f64>,
    pub gamma: Option<f64>,
    pub u_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub modes: Vec<(String, f64, u32)>,
    /// `"linear"` for `r(δ) = δ`, `"power"` for `r(δ) = δ^modulus_exponent`.
    pub modulus: Option<String>,
    pub modulus_exponent: Option<f64>,
}

/// The problem-defining sections of a config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub problem: ProblemSection,
    pub initial: Option<InitialCondition>,
    pub flux: Option<FluxSection>,
    pub diffusion: Option<DiffusionSection>,
    pub noise: Option<NoiseSection>,
}

fn require(name: &'static str, v: Option<f64>) -> Result<f64, ModelError> {
    v.ok_or(ModelError::InvalidParameter {
        name,
        msg: "missing".into(),
    })
}

fn positive(name: &'static str, v: f64) -> Result<f64, ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::InvalidParameter {
            name,
            msg: format!("must be positive, got {v}"),
        })
    }
}

impl FluxSection {
    pub fn to_kind(&self) -> Result<FluxKind, ModelError> {
        match self.name.as_str() {
            "zero" => Ok(FluxKind::Zero),
            "linear" => Ok(FluxKind::Linear {
                speed: require("flux.speed", self.speed)?,
            }),
            "burgers" => Ok(FluxKind::Burgers),
            "cubic" => Ok(FluxKind::Cubic),
            other => Err(ModelError::UnknownName {
                kind: "flux",
                name: other.into(),
            }),
        }
    }
}

impl DiffusionSection {
    pub fn to_kind(&self) -> Result<DiffusionKind, ModelError> {
        match self.name.as_str() {
            "zero" => Ok(DiffusionKind::Zero),
            "constant" => {
                let nu = require("diffusion.nu", self.nu)?;
                if nu < 0.0 {
                    return Err(ModelError::InvalidParameter {
                        name: "diffusion.nu",
                        msg: format!("must be nonnegative, got {nu}"),
                    });
                }
                Ok(DiffusionKind::Constant { nu })
            }
            "power-clipped" => Ok(DiffusionKind::PowerClipped {
                kappa: positive("diffusion.kappa", self.kappa.unwrap_or(1.0))?,
                gamma: positive("diffusion.gamma", require("diffusion.gamma", self.gamma)?)?,
                u_max: positive("diffusion.u_max", require("diffusion.u_max", self.u_max)?)?,
            }),
            other => Err(ModelError::UnknownName {
                kind: "diffusion",
                name: other.into(),
            }),
        }
    }
}

impl NoiseSection {
    pub fn to_spec(&self) -> Result<NoiseSpec, ModelError> {
        let modes = self
            .modes
            .iter()
            .map(|(shape, amplitude, wavenumber)| {
                Ok(NoiseMode {
                    shape: NoiseShape::from_name(shape)?,
                    amplitude: *amplitude,
                    wavenumber: *wavenumber,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        let modulus = match self.modulus.as_deref().unwrap_or("linear") {
            "linear" => Modulus::Linear,
            "power" => {
                let exponent = require("noise.modulus_exponent", self.modulus_exponent)?;
                if !(exponent > 0.0 && exponent <= 1.0) {
                    return Err(ModelError::InvalidParameter {
                        name: "noise.modulus_exponent",
                        msg: format!("must lie in (0, 1], got {exponent}"),
                    });
                }
                Modulus::Power { exponent }
            }
            other => {
                return Err(ModelError::UnknownName {
                    kind: "modulus",
                    name: other.into(),
                })
            }
        };
        Ok(NoiseSpec { modes, modulus })
    }
}

impl ProblemConfig {
    pub fn to_spec(&self) -> Result<ProblemSpec, ModelError> {
        let p = &self.problem;
        let mut spec = match &p.base {
            Some(base) => builtin_problem(base).ok_or_else(|| ModelError::UnknownName {
                kind: "problem",
                name: base.clone(),
            })?,
            None => ProblemSpec {
                name: "custom".into(),
                dim: 1,
                flux: FluxKind::Zero,
                diffusion: DiffusionKind::Zero,
                noise: NoiseSpec::none(),
                initial: self.initial.clone().ok_or(ModelError::InvalidParameter {
                    name: "initial",
                    msg: "required when problem.base is not set".into(),
                })?,
                horizon: 1.0,
                eval_range: (-2.0, 2.0),
            },
        };
        if let Some(name) = &p.name {
            spec.name = name.clone();
        }
        if let Some(dim) = p.dim {
            if !(dim == 1 || dim == 2) {
                return Err(ModelError::InvalidParameter {
                    name: "problem.dim",
                    msg: format!("must be 1 or 2, got {dim}"),
                });
            }
            spec.dim = dim;
        }
        if let Some(t) = p.horizon {
            spec.horizon = positive("problem.horizon", t)?;
        }
        if let Some([lo, hi]) = p.range {
            spec.eval_range = (lo, hi);
        }
        if let Some(ic) = &self.initial {
            spec.initial = ic.clone();
        }
        if let Some(f) = &self.flux {
            spec.flux = f.to_kind()?;
        }
        if let Some(d) = &self.diffusion {
            spec.diffusion = d.to_kind()?;
        }
        if let Some(n) = &self.noise {
            spec.noise = n.to_spec()?;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_problem_from_toml() {
        let text = r#"
            [problem]
            name = "mine"
            horizon = 0.25
            range = [-3.0, 3.0]

            [initial]
            kind = "sine"
            offset = 0.5
            amplitude = 1.0
            wavenumber = 1

            [flux]
            name = "burgers"

            [diffusion]
            name = "power-clipped"
            kappa = 0.05
            gamma = 0.75
            u_max = 2.0

            [noise]
            modes = [["saturating", 0.4, 1], ["saturating", 0.3, 2]]
            modulus = "power"
            modulus_exponent = 0.5
        "#;
        let cfg: ProblemConfig = toml::from_str(text).unwrap();
        let spec = cfg.to_spec().unwrap();
        let builtin = builtin_problem("degenerate-transport").unwrap();
        assert_eq!(spec.flux, builtin.flux);
        assert_eq!(spec.diffusion, builtin.diffusion);
        assert_eq!(spec.noise, builtin.noise);
        assert_eq!(spec.horizon, 0.25);
        assert_eq!(spec.name, "mine");
    }

    #[test]
    fn base_problem_is_overridden() {
        let text = "[problem]\nbase = \"heat\"\n[diffusion]\nname = \"constant\"\nnu = 0.2\n";
        let cfg: ProblemConfig = toml::from_str(text).unwrap();
        let spec = cfg.to_spec().unwrap();
        assert_eq!(spec.diffusion, DiffusionKind::Constant { nu: 0.2 });
        assert_eq!(spec.name, "heat");
    }

    #[test]
    fn unknown_names_and_keys_are_errors() {
        let cfg: ProblemConfig =
            toml::from_str("[problem]\nbase = \"burgers\"\n[flux]\nname = \"quartic\"\n").unwrap();
        assert!(matches!(cfg.to_spec(), Err(ModelError::UnknownName { .. })));
        let err = toml::from_str::<ProblemConfig>("[flux]\nname = \"zero\"\nspeeed = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("speeed"), "{err}");
        let cfg: ProblemConfig = toml::from_str("[problem]\nname = \"x\"\n").unwrap();
        assert!(cfg.to_spec().is_err());
    }
}
