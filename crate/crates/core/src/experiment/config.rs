use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::WaitingTime;
use crate::drift::QdConfig;
use crate::error::{Error, Result};
use crate::lattice::{ModelKind, ModelSpec, GOLDEN_Q};
use crate::lindblad::{LindbladOptions, DEFAULT_MAX_SITES};
use crate::observables::{DEFAULT_BOUNDARY_GUARD, DEFAULT_GUARD_THRESHOLD};
use crate::units::Units;

/// A scalar or a list of scalars in the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub kind: ModelKind,
    pub n: usize,
    #[serde(default = "one")]
    pub hopping: f64,
    /// `W`; a list sweeps it (HHAA, Fibonacci).
    #[serde(default = "zero_param")]
    pub potential: OneOrMany,
    #[serde(default = "golden")]
    pub wavenumber: f64,
    /// `μ`; a list sweeps it (PBRM).
    #[serde(default = "one_param")]
    pub exponent: OneOrMany,
    #[serde(default = "one")]
    pub bandwidth: f64,
    /// Phase (HHAA) or disorder (PBRM) realizations averaged per point.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn one() -> f64 {
    1.0
}
fn golden() -> f64 {
    GOLDEN_Q
}
fn zero_param() -> OneOrMany {
    OneOrMany::One(0.0)
}
fn one_param() -> OneOrMany {
    OneOrMany::One(1.0)
}
fn default_realizations() -> usize {
    32
}

impl ModelBlock {
    /// The swept parameter: `μ` for PBRM, `W` otherwise.
    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::Pbrm => self.exponent.values(),
            _ => self.potential.values(),
        }
    }

    /// Spec at one value of the swept parameter, before realization draws.
    pub fn spec(&self, param: f64, n: usize, units: Units) -> ModelSpec {
        let base = match self.kind {
            ModelKind::Hhaa => ModelSpec::hhaa(n, param).with_wavenumber(self.wavenumber),
            ModelKind::Fibonacci => ModelSpec::fibonacci(n, param),
            ModelKind::Pbrm => ModelSpec::pbrm(n, param, self.bandwidth, 0),
        };
        base.with_hopping(self.hopping).with_units(units)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsMethod {
    Qd,
    Lindblad,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamicsBlock {
    pub method: DynamicsMethod,
    /// Largest Trotter step (ħ/J); reduced as needed to meet the accuracy
    /// bound and to divide `record_interval`.
    pub dt: f64,
    /// Trajectories per realization.
    pub n_traj: usize,
    pub t_max: f64,
    pub record_interval: f64,
    /// Initial site (0-based); defaults to the middle of the chain.
    pub origin: Option<usize>,
    pub boundary_guard: f64,
    pub guard_threshold: f64,
    pub max_sites: usize,
    pub rtol: f64,
}

impl Default for DynamicsBlock {
    fn default() -> Self {
        DynamicsBlock {
            method: DynamicsMethod::Qd,
            dt: 0.01,
            n_traj: 100,
            t_max: 50.0,
            record_interval: 0.1,
            origin: None,
            boundary_guard: DEFAULT_BOUNDARY_GUARD,
            guard_threshold: DEFAULT_GUARD_THRESHOLD,
            max_sites: DEFAULT_MAX_SITES,
            rtol: 1e-8,
        }
    }
}

impl DynamicsBlock {
    pub fn qd_config(&self, master_seed: u64) -> QdConfig {
        let stride = (self.record_interval / self.dt).ceil().max(1.0) as usize;
        QdConfig {
            dt: self.record_interval / stride as f64,
            n_traj: self.n_traj,
            t_max: self.t_max,
            record_stride: stride,
            master_seed,
            boundary_guard: self.boundary_guard,
            guard_threshold: self.guard_threshold,
            record_populations: false,
        }
    }

    pub fn lindblad_options(&self) -> LindbladOptions {
        LindbladOptions {
            rtol: self.rtol,
            max_sites: self.max_sites,
            boundary_guard: self.boundary_guard,
            guard_threshold: self.guard_threshold,
            ..Default::default()
        }
    }

    pub fn record_times(&self) -> Vec<f64> {
        let count = (self.t_max / self.record_interval + 1e-9).floor() as usize + 1;
        (0..count).map(|k| k as f64 * self.record_interval).collect()
    }
}

/// Dephasing strengths: an explicit list, or `count` log-spaced values on
/// `[min, max]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DephasingBlock {
    pub values: Vec<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub count: Option<usize>,
}

impl DephasingBlock {
    pub fn resolve(&self) -> Result<Vec<f64>> {
        let config = |path: &str, reason: String| Error::Config {
            path: path.into(),
            reason,
        };
        let mut out = self.values.clone();
        match (self.min, self.max, self.count) {
            (None, None, None) => {}
            (Some(lo), Some(hi), Some(k)) => {
                if !(lo > 0.0 && hi >= lo && k >= 1) {
                    return Err(config("dephasing", "log range needs 0 < min <= max and count >= 1".into()));
                }
                if k == 1 {
                    out.push(lo);
                } else {
                    let step = (hi / lo).ln() / (k - 1) as f64;
                    out.extend((0..k).map(|i| lo * (step * i as f64).exp()));
                }
            }
            _ => return Err(config("dephasing", "min, max and count must be given together".into())),
        }
        if out.is_empty() {
            return Err(config("dephasing.values", "empty sweep".into()));
        }
        if let Some(bad) = out.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(config("dephasing.values", format!("{bad} is not a finite non-negative rate")));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisMethod {
    Fit,
    GreenKubo,
    CollapseIntegral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisBlock {
    pub methods: Vec<AnalysisMethod>,
    /// Fit window override `[start, end]`.
    pub window: Option<[f64; 2]>,
    /// Dephased fits start no earlier than this many decoherence times.
    pub settle_decoherence_times: f64,
    pub waiting_time: WaitingTime,
    /// Horizon of the coherent series fed to the collapse integral.
    pub coherent_t_max: f64,
}

impl Default for AnalysisBlock {
    fn default() -> Self {
        AnalysisBlock {
            methods: vec![AnalysisMethod::Fit],
            window: None,
            settle_decoherence_times: 5.0,
            waiting_time: WaitingTime::Poisson,
            coherent_t_max: 200.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: PathBuf,
    pub gnuplot: bool,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            dir: PathBuf::from("qdiff-out"),
            gnuplot: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurrentBlock {
    pub gamma_p: f64,
    /// Defaults to `gamma_p`.
    pub gamma_d: Option<f64>,
    /// Chain lengths; defaults to `model.n`.
    pub sizes: Vec<usize>,
    /// Chain length used for the Green-Kubo D in the heuristic transfer time.
    pub diffusion_sites: usize,
    /// Hamiltonian realizations averaged per point.
    pub realizations: usize,
}

impl Default for CurrentBlock {
    fn default() -> Self {
        CurrentBlock {
            gamma_p: 1.0,
            gamma_d: None,
            sizes: vec![],
            diffusion_sites: 1000,
            realizations: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PurityBlock {
    pub reversal_times: Vec<f64>,
    pub site: Option<usize>,
}

impl Default for PurityBlock {
    fn default() -> Self {
        PurityBlock {
            reversal_times: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
            site: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub model: ModelBlock,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub dynamics: DynamicsBlock,
    #[serde(default)]
    pub dephasing: DephasingBlock,
    #[serde(default)]
    pub analysis: AnalysisBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub current: CurrentBlock,
    #[serde(default)]
    pub purity: PurityBlock,
}

fn parse_override_value(raw: &str) -> toml::Value {
    // `x = <raw>` parses numbers, booleans, arrays and quoted strings;
    // anything else is taken as a bare string
    match format!("x = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("x").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Sets `a.b.c = value` in a TOML table, creating intermediate tables.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| Error::Config {
        path: assignment.into(),
        reason: "override must look like key.path=value".into(),
    })?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config {
            path: key.into(),
            reason: "empty key segment".into(),
        });
    }
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry.as_table_mut().ok_or_else(|| Error::Config {
            path: key.into(),
            reason: format!("`{part}` is not a table"),
        })?;
    }
    node.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
            path: "<config>".into(),
            reason: e.to_string(),
        })?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config {
            path: "<config>".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, e: Error| Error::Config {
            path: path.into(),
            reason: e.to_string(),
        };
        if self.model.params().is_empty() {
            return Err(Error::Config {
                path: "model".into(),
                reason: "empty parameter sweep".into(),
            });
        }
        if self.model.realizations == 0 {
            return Err(Error::Config {
                path: "model.realizations".into(),
                reason: "need at least one realization".into(),
            });
        }
        for p in self.model.params() {
            self.model
                .spec(p, self.model.n, self.units)
                .validate()
                .map_err(|e| bad("model", e))?;
        }
        self.dephasing.resolve()?;
        self.dynamics
            .qd_config(self.master_seed)
            .validate()
            .map_err(|e| bad("dynamics", e))?;
        if !(self.dynamics.record_interval > 0.0) {
            return Err(Error::Config {
                path: "dynamics.record_interval".into(),
                reason: "must be > 0".into(),
            });
        }
        if self.dynamics.method != DynamicsMethod::Qd && self.model.n > self.dynamics.max_sites {
            return Err(Error::Config {
                path: "dynamics.method".into(),
                reason: format!(
                    "the master equation is limited to {} sites; model.n = {}",
                    self.dynamics.max_sites, self.model.n
                ),
            });
        }
        if let Some(o) = self.dynamics.origin {
            if o >= self.model.n {
                return Err(Error::Config {
                    path: "dynamics.origin".into(),
                    reason: "outside the chain".into(),
                });
            }
        }
        if let Some([a, b]) = self.analysis.window {
            if !(a < b) {
                return Err(Error::Config {
                    path: "analysis.window".into(),
                    reason: "start must precede end".into(),
                });
            }
        }
        if !(self.current.gamma_p > 0.0) || self.current.gamma_d.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::Config {
                path: "current".into(),
                reason: "pump and drain rates must be > 0".into(),
            });
        }
        if self.current.realizations == 0 || self.current.diffusion_sites < 2 {
            return Err(Error::Config {
                path: "current".into(),
                reason: "need at least one realization and two sites".into(),
            });
        }
        if self.purity.reversal_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Config {
                path: "purity.reversal_times".into(),
                reason: "must be finite and >= 0".into(),
            });
        }
        Ok(())
    }

    /// Positive-rate sweep, for methods singular at γ_φ = 0.
    pub fn positive_rates(&self) -> Result<Vec<f64>> {
        let rates = self.dephasing.resolve()?;
        if rates.contains(&0.0) {
            return Err(Error::Config {
                path: "dephasing.values".into(),
                reason: "this command needs strictly positive rates".into(),
            });
        }
        Ok(rates)
    }

    pub fn origin(&self, n: usize) -> usize {
        self.dynamics.origin.unwrap_or(n / 2)
    }
}
