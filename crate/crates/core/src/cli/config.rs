use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Deserialize;

use crate::surface::{KahlerMetric, ModelSurface, ScalarField, SurfaceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Ivp,
    Divisor,
    Ray,
    Validate,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Ivp => "ivp",
            Problem::Divisor => "divisor",
            Problem::Ray => "ray",
            Problem::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceChoice {
    Torus,
    RadialCp1,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceSpec {
    pub kind: SurfaceChoice,
    pub resolution: usize,
    #[serde(default)]
    pub radial_cutoff: Option<f64>,
}

/// Analytic field presets; torus presets read `(x, y)`, radial ones `s = r²/(1+r²)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `offset + amplitude·cos(2π(kx·x + ky·y))`
    Cosine {
        amplitude: f64,
        #[serde(default = "one")]
        kx: i32,
        #[serde(default)]
        ky: i32,
        #[serde(default)]
        offset: f64,
    },
    /// `offset + amplitude·sin(2π(kx·x + ky·y))`
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        kx: i32,
        #[serde(default)]
        ky: i32,
        #[serde(default)]
        offset: f64,
    },
    /// `amplitude·(r²/(1+r²))^power`
    RadialPower { amplitude: f64, power: i32 },
}

fn one() -> i32 {
    1
}

impl FieldSpec {
    pub fn build(&self, surface: &ModelSurface) -> Result<ScalarField, String> {
        let radial = surface.kind() == SurfaceKind::RadialCP1;
        let field = match *self {
            FieldSpec::Zero => Ok(ScalarField::zeros(surface)),
            FieldSpec::Constant { value } => Ok(ScalarField::constant(surface, value)),
            FieldSpec::Cosine { amplitude, kx, ky, offset } if !radial => {
                ScalarField::from_torus_fn(surface, |x, y| {
                    offset + amplitude * (2.0 * PI * (kx as f64 * x + ky as f64 * y)).cos()
                })
            }
            FieldSpec::Sine { amplitude, kx, ky, offset } if !radial => {
                ScalarField::from_torus_fn(surface, |x, y| {
                    offset + amplitude * (2.0 * PI * (kx as f64 * x + ky as f64 * y)).sin()
                })
            }
            FieldSpec::RadialPower { amplitude, power } if radial => {
                ScalarField::from_radial_s_fn(surface, |s| amplitude * s.powi(power))
            }
            _ => {
                return Err(format!(
                    "field preset {self:?} is not available on the {:?} surface",
                    surface.kind()
                ))
            }
        };
        field.map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricSpec {
    /// Flat on the torus, Fubini–Study on CP¹.
    Standard,
    Flat,
    FubiniStudy,
    /// An explicit positive coefficient `g`.
    Coefficient(FieldSpec),
}

impl MetricSpec {
    pub fn build(&self, surface: &ModelSurface) -> Result<KahlerMetric, String> {
        match self {
            MetricSpec::Standard => Ok(KahlerMetric::standard(surface)),
            MetricSpec::Flat => KahlerMetric::flat(surface).map_err(|_| {
                "the flat preset needs the torus surface".to_string()
            }),
            MetricSpec::FubiniStudy => {
                if surface.kind() != SurfaceKind::RadialCP1 {
                    return Err("the fubini_study preset needs the radial_cp1 surface".into());
                }
                KahlerMetric::fubini_study(surface).map_err(|e| e.to_string())
            }
            MetricSpec::Coefficient(f) => {
                KahlerMetric::from_coefficient(f.build(surface)?).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IvpSpec {
    pub velocity: FieldSpec,
    pub order: usize,
    pub t_min: f64,
    pub t_max: f64,
    pub t_samples: usize,
    pub horizon_t_max: f64,
    pub horizon_steps: usize,
}

impl Default for IvpSpec {
    fn default() -> Self {
        Self {
            velocity: FieldSpec::Cosine {
                amplitude: 0.1,
                kx: 1,
                ky: 0,
                offset: 0.0,
            },
            order: 6,
            t_min: 1e-3,
            t_max: 1e-1,
            t_samples: 9,
            horizon_t_max: 1.0,
            horizon_steps: 101,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwistSpec {
    pub weight: usize,
    pub field: FieldSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DivisorSpec {
    pub h: FieldSpec,
    pub twist: Option<TwistSpec>,
    pub order: usize,
    pub phases: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub samples: usize,
}

impl Default for DivisorSpec {
    fn default() -> Self {
        Self {
            h: FieldSpec::Cosine {
                amplitude: 0.3,
                kx: 1,
                ky: 0,
                offset: 0.0,
            },
            twist: None,
            order: 4,
            phases: 8,
            x_min: 1.0,
            x_max: 6.0,
            samples: 51,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayFamilyChoice {
    Rotation,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RaySpec {
    pub family: RayFamilyChoice,
    pub x_max: f64,
    pub samples: usize,
    pub c0_x0: f64,
    pub c0_x1: f64,
    pub c0_samples: usize,
}

impl Default for RaySpec {
    fn default() -> Self {
        Self {
            family: RayFamilyChoice::Rotation,
            x_max: 3.0,
            samples: 13,
            c0_x0: 0.5,
            c0_x1: 8.0,
            c0_samples: 16,
        }
    }
}

/// Thresholds reported against; all but the slope margin scale with `--tolerance-scale`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub oracle: f64,
    pub residual_slope_margin: f64,
    pub geodesic: f64,
    pub energy_drift: f64,
    pub consistency: f64,
    pub wzw: f64,
    pub divisor_residual: f64,
    pub invariance: f64,
    pub length_linearity: f64,
    pub divergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            oracle: 1e-8,
            residual_slope_margin: 1.2,
            geodesic: 1e-8,
            energy_drift: 1e-6,
            consistency: 1e-10,
            wzw: 1e-8,
            divisor_residual: 1e-10,
            invariance: 1e-10,
            length_linearity: 1e-6,
            divergence: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            oracle: self.oracle * factor,
            residual_slope_margin: self.residual_slope_margin,
            geodesic: self.geodesic * factor,
            energy_drift: self.energy_drift * factor,
            consistency: self.consistency * factor,
            wzw: self.wzw * factor,
            divisor_residual: self.divisor_residual * factor,
            invariance: self.invariance * factor,
            length_linearity: self.length_linearity * factor,
            divergence: self.divergence * factor,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub problem: Option<Problem>,
    #[serde(default)]
    pub surface: Option<SurfaceSpec>,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    #[serde(default)]
    pub ivp: IvpSpec,
    #[serde(default)]
    pub divisor: DivisorSpec,
    #[serde(default)]
    pub ray: RaySpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("invalid configuration: {e}"))
    }

    /// The surface to run on, with per-problem defaults.
    pub fn surface_for(&self, problem: Problem) -> Result<ModelSurface, String> {
        let spec = self.surface.clone().unwrap_or(match problem {
            Problem::Ray => SurfaceSpec {
                kind: SurfaceChoice::RadialCp1,
                resolution: 512,
                radial_cutoff: Some(50.0),
            },
            Problem::Divisor => SurfaceSpec {
                kind: SurfaceChoice::Torus,
                resolution: 32,
                radial_cutoff: None,
            },
            _ => SurfaceSpec {
                kind: SurfaceChoice::Torus,
                resolution: 64,
                radial_cutoff: None,
            },
        });
        let built = match spec.kind {
            SurfaceChoice::Torus => {
                if spec.radial_cutoff.is_some() {
                    return Err("surface.radial_cutoff applies to radial_cp1 only".into());
                }
                ModelSurface::unit_torus(spec.resolution)
            }
            SurfaceChoice::RadialCp1 => {
                ModelSurface::radial_cp1(spec.resolution, spec.radial_cutoff.unwrap_or(50.0))
            }
        };
        built.map_err(|e| format!("surface: {e}"))
    }

    pub fn metric_for(&self, surface: &ModelSurface) -> Result<KahlerMetric, String> {
        self.metric
            .clone()
            .unwrap_or(MetricSpec::Standard)
            .build(surface)
            .map_err(|e| format!("metric: {e}"))
    }

    /// Range checks that the schema cannot express.
    pub fn check(&self, problem: Problem) -> Result<(), String> {
        if let Some(p) = self.problem {
            if p != problem {
                return Err(format!(
                    "configuration is for the `{}` problem but `{}` was requested",
                    p.name(),
                    problem.name()
                ));
            }
        }
        let ivp = &self.ivp;
        if ivp.order < 4 || ivp.order > 10 {
            return Err(format!("ivp.order must lie in 4..=10, got {}", ivp.order));
        }
        if !(ivp.t_min > 0.0 && ivp.t_max > ivp.t_min) || ivp.t_samples < 2 {
            return Err("ivp needs 0 < t_min < t_max and t_samples ≥ 2".into());
        }
        if !(ivp.horizon_t_max > 0.0) || ivp.horizon_steps < 2 {
            return Err("ivp needs horizon_t_max > 0 and horizon_steps ≥ 2".into());
        }
        let d = &self.divisor;
        if d.order == 0 || d.order > 5 {
            return Err(format!("divisor.order must lie in 1..=5, got {}", d.order));
        }
        if d.phases < 4 || d.samples < 2 || !(d.x_max > d.x_min) {
            return Err("divisor needs phases ≥ 4, samples ≥ 2 and x_min < x_max".into());
        }
        if let Some(t) = &d.twist {
            if t.weight == 0 {
                return Err("divisor.twist.weight must be at least 1".into());
            }
        }
        let r = &self.ray;
        if !(r.x_max > 0.0) || r.samples < 3 {
            return Err("ray needs x_max > 0 and samples ≥ 3".into());
        }
        if !(r.c0_x1 > r.c0_x0 && r.c0_x0 >= 0.0) || r.c0_samples < 2 {
            return Err("ray needs 0 ≤ c0_x0 < c0_x1 and c0_samples ≥ 2".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_takes_defaults() {
        let c = ScenarioConfig::parse("{}").unwrap();
        assert_eq!(c.ivp.order, 6);
        assert!(c.check(Problem::Ivp).is_ok());
        let m = c.surface_for(Problem::Ray).unwrap();
        assert_eq!(m.kind(), SurfaceKind::RadialCP1);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ScenarioConfig::parse(r#"{"ivp": {"ordr": 4}}"#).unwrap_err();
        assert!(e.contains("ordr"), "{e}");
        let e = ScenarioConfig::parse(r#"{"colour": 1}"#).unwrap_err();
        assert!(e.contains("colour"), "{e}");
        let e = ScenarioConfig::parse(r#"{"ivp": {"velocity": {"kind": "constant", "value": 1, "x": 2}}}"#)
            .unwrap_err();
        assert!(e.contains('x'), "{e}");
    }

    #[test]
    fn presets_respect_surface() {
        let torus = ModelSurface::unit_torus(8).unwrap();
        assert!(FieldSpec::RadialPower { amplitude: 1.0, power: 1 }.build(&torus).is_err());
        assert!(MetricSpec::FubiniStudy.build(&torus).is_err());
        let c = ScenarioConfig::parse(r#"{"metric": {"coefficient": {"kind": "constant", "value": 2.0}}}"#)
            .unwrap();
        let g = c.metric_for(&torus).unwrap();
        assert_eq!(g.coefficient().values()[0], 2.0);
    }

    #[test]
    fn mismatched_problem_is_rejected() {
        let c = ScenarioConfig::parse(r#"{"problem": "ray"}"#).unwrap();
        assert!(c.check(Problem::Ivp).is_err());
        assert!(c.check(Problem::Ray).is_ok());
    }
}
