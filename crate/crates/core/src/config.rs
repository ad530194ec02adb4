//! Experiment configuration: strict TOML, canonical hashing, parameter paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::entropy::{CoveringOptions, LyapunovOptions};
use crate::error::{Error, Result};
use crate::fourier::FourierSeries;
use crate::lagrangian::{Family, MetricSeries, TonelliLagrangian, ValidationGrid, DEFAULT_MAX_HARMONIC};
use crate::mather::{AlphaOptions, CriticalOptions, OmegaOptions};
use crate::orbits::GraphOptions;
use crate::variational::PotentialOptions;

/// Family tag plus Fourier tables for the metric, potential and magnetic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSpec {
    pub family: Family,
    #[serde(default = "default_max_harmonic")]
    pub max_harmonic: u32,
    #[serde(default)]
    pub metric: Option<MetricSeries>,
    #[serde(default)]
    pub potential: FourierSeries,
    #[serde(default)]
    pub magnetic: Option<[FourierSeries; 2]>,
}

fn default_max_harmonic() -> u32 {
    DEFAULT_MAX_HARMONIC
}

impl LagrangianSpec {
    pub fn build(&self) -> Result<TonelliLagrangian> {
        TonelliLagrangian::new(
            self.family,
            self.metric.clone().unwrap_or_else(MetricSeries::euclidean),
            self.potential.clone(),
            self.magnetic.clone().unwrap_or_default(),
            self.max_harmonic,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaGridConfig {
    pub max_num: i64,
    pub max_den: i64,
    pub max_norm: f64,
}

impl Default for BetaGridConfig {
    fn default() -> Self {
        Self {
            max_num: 2,
            max_den: 2,
            max_norm: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlphaGridConfig {
    /// cohomology classes sampled for `alpha.csv`
    pub omega_grid: Vec<[f64; 2]>,
    pub options: AlphaOptions,
}

impl Default for AlphaGridConfig {
    fn default() -> Self {
        let mut omega_grid = Vec::new();
        for i in -1..=1 {
            for j in -1..=1 {
                omega_grid.push([0.5 * i as f64, 0.5 * j as f64]);
            }
        }
        Self {
            omega_grid,
            options: AlphaOptions {
                refine: false,
                ..AlphaOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    /// base points sampled along each proxy orbit
    pub points_per_orbit: usize,
    pub potential: PotentialOptions,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        Self {
            t_min: 5.0,
            t_max: 20.0,
            t_points: 8,
            points_per_orbit: 2,
            potential: PotentialOptions {
                nodes_per_time: 32.0,
                ..PotentialOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphConfig {
    pub options: GraphOptions,
    /// run the double-cover pass when a single node has no self-loop
    pub double_cover: bool,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            options: GraphOptions::default(),
            double_cover: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub covering: CoveringOptions,
    pub lyapunov: LyapunovOptions,
    /// periods used for the exponent along each proxy orbit
    pub orbit_periods: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            covering: CoveringOptions::default(),
            lyapunov: LyapunovOptions::default(),
            orbit_periods: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// keep every n-th integration step in trajectory CSVs
    pub trajectory_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            trajectory_stride: 10,
        }
    }
}

/// Parameter sweep: every path is set to each value in turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameters: Vec<String>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lagrangian: LagrangianSpec,
    pub energy: f64,
    #[serde(default = "default_h0")]
    pub h0: [i64; 2],
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub validation: ValidationGrid,
    #[serde(default)]
    pub critical: CriticalOptions,
    #[serde(default)]
    pub omega: OmegaOptions,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub barrier: BarrierConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub beta: BetaGridConfig,
    #[serde(default)]
    pub alpha: AlphaGridConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

fn default_h0() -> [i64; 2] {
    [0, 1]
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be positive and finite, got {v}")))
    }
}

fn nonzero(name: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}` must be at least 1")))
    }
}

/// Rejects non-finite numbers anywhere in the document.
fn check_finite(v: &toml::Value, path: &str) -> Result<()> {
    match v {
        toml::Value::Float(f) if !f.is_finite() => Err(Error::Config(format!("`{path}` is not a finite decimal number"))),
        toml::Value::Array(a) => a
            .iter()
            .enumerate()
            .try_for_each(|(i, x)| check_finite(x, &format!("{path}.{i}"))),
        toml::Value::Table(t) => t.iter().try_for_each(|(k, x)| {
            let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            check_finite(x, &p)
        }),
        _ => Ok(()),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let value: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        check_finite(&toml::Value::Table(value), "")?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn from_value(value: toml::Value) -> Result<Self> {
        let text = toml::to_string(&value).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: Self = toml::from_str(&text).map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn check(&self) -> Result<()> {
        if !self.energy.is_finite() {
            return Err(Error::Config("`energy` must be finite".into()));
        }
        if self.h0 == [0, 0] {
            return Err(Error::Config("`h0` must be a non-zero class".into()));
        }
        let r = &self.omega.refine;
        positive("omega.refine.dt", r.dt)?;
        positive("omega.refine.tol", r.tol)?;
        positive("omega.refine.stability_tol", r.stability_tol)?;
        positive("omega.margin", self.omega.margin)?;
        positive("omega.validation_tol", self.omega.validation_tol)?;
        positive("omega.proxy.cluster_tol", self.omega.proxy.cluster_tol)?;
        positive("omega.proxy.action_tol", self.omega.proxy.action_tol)?;
        nonzero("omega.proxy.starts", self.omega.proxy.starts)?;
        nonzero("omega.beta.starts", self.omega.beta.starts)?;
        nonzero("critical.beta.starts", self.critical.beta.starts)?;
        positive("omega.beta.loop_options.grad_tol", self.omega.beta.loop_options.grad_tol)?;
        let g = &self.graph.options;
        positive("graph.options.manifold.dt", g.manifold.dt)?;
        positive("graph.options.manifold.eps0", g.manifold.eps0)?;
        positive("graph.options.manifold.gap", g.manifold.gap)?;
        positive("graph.options.transverse_angle", g.transverse_angle)?;
        positive("graph.options.persistence_tol", g.persistence_tol)?;
        let b = &self.barrier;
        positive("barrier.t_min", b.t_min)?;
        positive("barrier.t_max", b.t_max)?;
        nonzero("barrier.t_points", b.t_points)?;
        positive("barrier.potential.grad_tol", b.potential.grad_tol)?;
        positive("barrier.potential.nodes_per_time", b.potential.nodes_per_time)?;
        let e = &self.entropy;
        positive("entropy.covering.dt", e.covering.dt)?;
        positive("entropy.covering.level_tol", e.covering.level_tol)?;
        nonzero("entropy.covering.samples", e.covering.samples)?;
        if e.covering.t_grid.len() < 2 || e.covering.delta_grid.is_empty() {
            return Err(Error::Config(
                "`entropy.covering` needs at least two times and one delta".into(),
            ));
        }
        for &d in &e.covering.delta_grid {
            positive("entropy.covering.delta_grid", d)?;
        }
        for &t in &e.covering.t_grid {
            positive("entropy.covering.t_grid", t)?;
        }
        positive("entropy.lyapunov.dt", e.lyapunov.dt)?;
        positive("entropy.lyapunov.t_total", e.lyapunov.t_total)?;
        positive("entropy.lyapunov.renorm_dt", e.lyapunov.renorm_dt)?;
        nonzero("entropy.lyapunov.orbits", e.lyapunov.orbits)?;
        nonzero("output.trajectory_stride", self.output.trajectory_stride)?;
        if let Some(s) = &self.sweep {
            if s.parameters.is_empty() {
                return Err(Error::Config("`sweep.parameters` is empty".into()));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding output and sweep blocks.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(m) = &mut v {
            m.remove("output");
            m.remove("sweep");
        }
        let text = serde_json::to_string(&v).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// Copy with every numeric value at `path` (dot-separated keys and array
    /// indices) replaced by `value`.
    pub fn with_parameter(&self, path: &str, value: f64) -> Result<Self> {
        let mut doc = toml::Value::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        let mut cur = &mut doc;
        for key in path.split('.') {
            cur = match cur {
                toml::Value::Table(t) => t
                    .get_mut(key)
                    .ok_or_else(|| Error::Config(format!("parameter path `{path}`: no key `{key}`")))?,
                toml::Value::Array(a) => {
                    let i: usize = key
                        .parse()
                        .map_err(|_| Error::Config(format!("parameter path `{path}`: `{key}` is not an index")))?;
                    a.get_mut(i)
                        .ok_or_else(|| Error::Config(format!("parameter path `{path}`: index {i} out of range")))?
                }
                _ => return Err(Error::Config(format!("parameter path `{path}`: `{key}` is below a scalar"))),
            };
        }
        *cur = match cur {
            toml::Value::Float(_) => toml::Value::Float(value),
            toml::Value::Integer(_) if value.fract() == 0.0 => toml::Value::Integer(value as i64),
            _ => return Err(Error::Config(format!("parameter path `{path}` does not name a number"))),
        };
        Self::from_value(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MECHANICAL: &str = r#"
energy = 0.5
h0 = [0, 1]
seed = 3

[lagrangian]
family = "mechanical"
potential = { terms = [{ m = 1, n = 0, cos = 0.05 }, { m = 0, n = 1, cos = 0.05 }] }
"#;

    #[test]
    fn parses_with_defaults() {
        let c = ExperimentConfig::from_toml_str(MECHANICAL).unwrap();
        assert_eq!(c.h0, [0, 1]);
        assert_eq!(c.seed, 3);
        let l = c.lagrangian.build().unwrap();
        assert!((l.potential_value([0.0, 0.0]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn missing_energy_is_named() {
        let text = MECHANICAL.replace("energy = 0.5", "");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err().to_string();
        assert!(err.contains("energy"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_numbers_are_rejected() {
        let text = format!("{MECHANICAL}\n[barrier]\nt_mx = 3.0\n");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = MECHANICAL.replace("energy = 0.5", "energy = nan");
        assert!(ExperimentConfig::from_toml_str(&text).is_err());
        let text = format!("{MECHANICAL}\n[omega.refine]\ntol = -1.0\n");
        assert!(ExperimentConfig::from_toml_str(&text)
            .unwrap_err()
            .to_string()
            .contains("omega.refine.tol"));
    }

    #[test]
    fn hash_ignores_output_and_tracks_content() {
        let a = ExperimentConfig::from_toml_str(MECHANICAL).unwrap();
        let mut b = a.clone();
        b.output.dir = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed = 4;
        assert_ne!(a.hash(), b.hash());
        let again = ExperimentConfig::from_toml_str(&a.to_toml_string().unwrap()).unwrap();
        assert_eq!(a.hash(), again.hash());
    }

    #[test]
    fn parameter_paths() {
        let a = ExperimentConfig::from_toml_str(MECHANICAL).unwrap();
        let b = a.with_parameter("lagrangian.potential.terms.1.cos", 0.02).unwrap();
        assert_eq!(b.lagrangian.potential.terms[1].cos, 0.02);
        assert_eq!(a.with_parameter("energy", 0.75).unwrap().energy, 0.75);
        assert!(a.with_parameter("lagrangian.nothing", 1.0).is_err());
        assert!(a.with_parameter("lagrangian.potential.terms.7.cos", 1.0).is_err());
    }
}
