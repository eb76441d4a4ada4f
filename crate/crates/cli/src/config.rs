use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use torsion_harmonic::field::initial::{constant_map, equator_wrap, perturbed};
use torsion_harmonic::field::{
    FixedPointConfig, GridDomain, KernelPolicy, MapState, NewtonConfig, SolverMethod,
};
use torsion_harmonic::geodesic::Method;
use torsion_harmonic::geometry::{Chart, TorsionField};
use torsion_harmonic::jacobi::JacobiForm;
use torsion_harmonic::tensor::Tensor3;

/// A configuration problem, reported with the offending key path.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(path: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config key `{}`: {}", self.path, self.message)
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub seed: u64,
    pub chart: Option<ChartConfig>,
    #[serde(default)]
    pub torsion: TorsionConfig,
    pub domain: Option<DomainConfig>,
    pub initial_map: Option<InitialMap>,
    #[serde(default)]
    pub solver: SolverConfig,
    pub geodesic: Option<GeodesicConfig>,
    pub decompose: Option<DecomposeConfig>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub energy: EnergyConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub name: String,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TorsionConfig {
    #[default]
    Zero,
    /// Constant contravariant vector `V`.
    Vectorial { vector: Vec<f64> },
    /// Constant tensor, totally antisymmetrized; `n³` entries indexed `(x, y, z)`.
    Antisymmetric { coefficients: Vec<f64> },
    /// Constant tensor, skew-symmetrized in its last two slots.
    General { coefficients: Vec<f64> },
}

fn two_pi() -> f64 {
    TAU
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub nx: usize,
    pub ny: usize,
    #[serde(default = "two_pi")]
    pub lx: f64,
    #[serde(default = "two_pi")]
    pub ly: f64,
    #[serde(default = "unit")]
    pub metric_scale: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialMap {
    Constant {
        point: Vec<f64>,
    },
    EquatorWrap {
        winding: i64,
    },
    /// Base map plus a smooth random field drawn from the global seed.
    Perturbed {
        base: Box<InitialMap>,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    FixedPoint,
    Newton,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    #[default]
    MinimumNorm,
    Reject,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: MethodName,
    pub damping: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub kernel: KernelName,
    pub rcond: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    #[default]
    Rk4,
    Euler,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicConfig {
    pub point: Vec<f64>,
    pub velocity: Vec<f64>,
    pub step: f64,
    pub steps: usize,
    #[serde(default)]
    pub method: IntegratorName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecomposeConfig {
    pub dim: usize,
    /// Row-major `n × n` metric; identity when absent.
    pub metric: Option<Vec<f64>>,
    /// `n³` lowered coefficients; drawn from the seed when absent.
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormName {
    #[default]
    LeviCivita,
    TorsionConnection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default)]
    pub form: FormName,
    /// Run the configured solver first and take the spectrum at its output.
    #[serde(default)]
    pub solve_first: bool,
}

fn default_count() -> usize {
    8
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            count: default_count(),
            form: FormName::default(),
            solve_first: false,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    #[serde(default)]
    pub radii: Vec<f64>,
}

pub fn parse(text: &str) -> Result<ProblemConfig, ConfigError> {
    let de = toml::Deserializer::parse(text)
        .map_err(|e| ConfigError::at("", e.to_string().trim_end()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(&path, e.into_inner().to_string().trim_end())
    })
}

pub fn load(path: &Path) -> Result<ProblemConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::at("", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn require<'a, T>(value: &'a Option<T>, key: &str) -> Result<&'a T, ConfigError> {
    value
        .as_ref()
        .ok_or_else(|| ConfigError::at(key, "missing section"))
}

fn check_len(key: &str, v: &[f64], n: usize) -> Result<(), ConfigError> {
    if v.len() != n {
        return Err(ConfigError::at(
            key,
            format!("expected {n} values, found {}", v.len()),
        ));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(ConfigError::at(key, "values must be finite"));
    }
    Ok(())
}

impl ProblemConfig {
    pub fn chart(&self) -> Result<Chart, ConfigError> {
        let c = require(&self.chart, "chart")?;
        let dim = c.dim.unwrap_or(2);
        if dim == 0 {
            return Err(ConfigError::at("chart.dim", "dimension must be positive"));
        }
        let chart = Chart::by_name(&c.name, dim)
            .ok_or_else(|| ConfigError::at("chart.name", format!("unknown chart `{}`", c.name)))?;
        if c.dim.is_some_and(|d| d != chart.dim()) {
            return Err(ConfigError::at(
                "chart.dim",
                format!("chart `{}` has dimension {}", c.name, chart.dim()),
            ));
        }
        Ok(chart)
    }

    pub fn torsion(&self, dim: usize) -> Result<TorsionField, ConfigError> {
        Ok(match &self.torsion {
            TorsionConfig::Zero => TorsionField::Zero,
            TorsionConfig::Vectorial { vector } => {
                check_len("torsion.vector", vector, dim)?;
                TorsionField::vectorial_const(vector.clone())
            }
            TorsionConfig::Antisymmetric { coefficients } => {
                check_len("torsion.coefficients", coefficients, dim.pow(3))?;
                let t = Tensor3::from_vec(dim, coefficients.clone());
                TorsionField::antisymmetric(move |_| t.clone())
            }
            TorsionConfig::General { coefficients } => {
                check_len("torsion.coefficients", coefficients, dim.pow(3))?;
                let t = Tensor3::from_vec(dim, coefficients.clone());
                TorsionField::general(move |_| t.clone())
            }
        })
    }

    pub fn domain(&self) -> Result<GridDomain, ConfigError> {
        let d = require(&self.domain, "domain")?;
        let mut domain = GridDomain::new(d.nx, d.ny, d.lx, d.ly)
            .map_err(|e| ConfigError::at("domain", e.to_string()))?;
        domain.metric_scale = d.metric_scale;
        domain
            .validate()
            .map_err(|e| ConfigError::at("domain.metric_scale", e.to_string()))?;
        Ok(domain)
    }

    /// The configured initial map. Errors that come from the map itself, for
    /// example a point outside the chart, are reported against `initial_map`.
    pub fn initial_map(&self) -> Result<MapState, ConfigError> {
        let chart = self.chart()?;
        let domain = self.domain()?;
        build_map(
            require(&self.initial_map, "initial_map")?,
            "initial_map",
            domain,
            &chart,
            self.seed,
        )
    }

    pub fn fixed_point(&self) -> Result<FixedPointConfig, ConfigError> {
        let d = FixedPointConfig::default();
        let s = &self.solver;
        let cfg = FixedPointConfig {
            damping: s.damping.unwrap_or(d.damping),
            tol: s.tol.unwrap_or(d.tol),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
        };
        if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
            return Err(ConfigError::at("solver.damping", "must lie in (0, 1]"));
        }
        positive("solver.tol", cfg.tol)?;
        Ok(cfg)
    }

    pub fn newton(&self) -> Result<NewtonConfig, ConfigError> {
        let d = NewtonConfig::default();
        let s = &self.solver;
        if s.damping.is_some() {
            return Err(ConfigError::at(
                "solver.damping",
                "only used by the fixed-point method",
            ));
        }
        let cfg = NewtonConfig {
            tol: s.tol.unwrap_or(d.tol),
            max_iters: s.max_iters.unwrap_or(d.max_iters),
            rcond: s.rcond.unwrap_or(d.rcond),
            kernel: match s.kernel {
                KernelName::MinimumNorm => KernelPolicy::MinimumNorm,
                KernelName::Reject => KernelPolicy::Reject,
            },
            ..d
        };
        positive("solver.tol", cfg.tol)?;
        positive("solver.rcond", cfg.rcond)?;
        Ok(cfg)
    }

    pub fn method(&self) -> SolverMethod {
        match self.solver.method {
            MethodName::FixedPoint => SolverMethod::FixedPoint,
            MethodName::Newton => SolverMethod::Newton,
        }
    }

    pub fn geodesic(&self, dim: usize) -> Result<(&GeodesicConfig, Method), ConfigError> {
        let g = require(&self.geodesic, "geodesic")?;
        check_len("geodesic.point", &g.point, dim)?;
        check_len("geodesic.velocity", &g.velocity, dim)?;
        positive("geodesic.step", g.step)?;
        let method = match g.method {
            IntegratorName::Rk4 => Method::Rk4,
            IntegratorName::Euler => Method::Euler,
        };
        Ok((g, method))
    }

    pub fn decompose(&self) -> Result<&DecomposeConfig, ConfigError> {
        let d = require(&self.decompose, "decompose")?;
        if d.dim < 2 {
            return Err(ConfigError::at(
                "decompose.dim",
                "dimension must be at least 2",
            ));
        }
        if let Some(m) = &d.metric {
            check_len("decompose.metric", m, d.dim * d.dim)?;
        }
        if let Some(c) = &d.coefficients {
            check_len("decompose.coefficients", c, d.dim.pow(3))?;
        }
        Ok(d)
    }

    pub fn jacobi_form(&self) -> JacobiForm {
        match self.spectrum.form {
            FormName::LeviCivita => JacobiForm::LeviCivita,
            FormName::TorsionConnection => JacobiForm::TorsionConnection,
        }
    }

    pub fn radii(&self) -> Result<&[f64], ConfigError> {
        for r in &self.energy.radii {
            positive("energy.radii", *r)?;
        }
        Ok(&self.energy.radii)
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::at(
            key,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn build_map(
    init: &InitialMap,
    key: &str,
    domain: GridDomain,
    chart: &Chart,
    seed: u64,
) -> Result<MapState, ConfigError> {
    match init {
        InitialMap::Constant { point } => {
            check_len(&format!("{key}.point"), point, chart.dim())?;
            constant_map(domain, chart.clone(), point)
                .map_err(|e| ConfigError::at(&format!("{key}.point"), e.to_string()))
        }
        InitialMap::EquatorWrap { winding } => {
            if chart.name() != "sphere2" {
                return Err(ConfigError::at(
                    key,
                    "equator_wrap requires the sphere2 chart",
                ));
            }
            equator_wrap(domain, *winding).map_err(|e| ConfigError::at(key, e.to_string()))
        }
        InitialMap::Perturbed { base, amplitude } => {
            let base = build_map(base, &format!("{key}.base"), domain, chart, seed)?;
            if !(amplitude.is_finite() && *amplitude >= 0.0) {
                return Err(ConfigError::at(
                    &format!("{key}.amplitude"),
                    "must be finite and non-negative",
                ));
            }
            perturbed(&base, *amplitude, seed).map_err(|e| ConfigError::at(key, e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse("[domain]\nnx = 4\nny = 4\nlz = 1.0\n").unwrap_err();
        assert_eq!(err.path, "domain.lz");
        assert!(err.message.contains("lz"), "{}", err.message);
        let err = parse("[solver]\nmax_iter = 3\n").unwrap_err();
        assert!(err.message.contains("max_iter"));
    }

    #[test]
    fn wrong_types_name_their_path() {
        let err = parse("[domain]\nnx = \"many\"\nny = 4\n").unwrap_err();
        assert_eq!(err.path, "domain.nx");
    }

    #[test]
    fn torsion_kinds_resolve() {
        let cfg = parse("[torsion]\nkind = \"vectorial\"\nvector = [1.0, 0.0]\n").unwrap();
        assert!(matches!(
            cfg.torsion(2).unwrap(),
            TorsionField::Vectorial(_)
        ));
        let err = cfg.torsion(3).unwrap_err();
        assert_eq!(err.path, "torsion.vector");
        assert!(parse("[torsion]\nkind = \"vectorial\"\nvectr = [1.0, 0.0]\n").is_err());
    }

    #[test]
    fn nested_perturbed_map_uses_the_seed() {
        let text = "seed = 9\n[chart]\nname = \"sphere2\"\n[domain]\nnx = 8\nny = 8\n\
                    [initial_map]\nkind = \"perturbed\"\namplitude = 0.05\n\
                    [initial_map.base]\nkind = \"equator_wrap\"\nwinding = 1\n";
        let a = parse(text).unwrap().initial_map().unwrap();
        let b = parse(text).unwrap().initial_map().unwrap();
        assert_eq!(a.values, b.values);
        let c = parse(&text.replace("seed = 9", "seed = 10"))
            .unwrap()
            .initial_map()
            .unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn unknown_chart_is_a_config_error() {
        let cfg = parse("[chart]\nname = \"torus3\"\n").unwrap();
        assert_eq!(cfg.chart().unwrap_err().path, "chart.name");
    }
}
