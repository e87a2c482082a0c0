//! Run configuration: one JSON document, optionally patched with dotted-path
//! overrides such as `filter.particles=60`.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use proxwarm_core::filter::DEFAULT_NU;
use proxwarm_core::problem::DEFAULT_MERIT_ALPHA;
use proxwarm_core::{preset_scenario, FilterConfig, ProxLinearSettings, Scenario};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Where the scenario comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSource {
    Preset(String),
    File(PathBuf),
}

/// Initial particle covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialCov {
    /// The string `"identity"`.
    Named(String),
    /// Diagonal entries, one per stacked state/input component.
    Diagonal(Vec<f64>),
}

impl InitialCov {
    pub fn identity() -> Self {
        Self::Named("identity".into())
    }

    pub fn matrix(&self, dim: usize) -> CliResult<DMatrix<f64>> {
        match self {
            Self::Named(s) if s == "identity" => Ok(DMatrix::identity(dim, dim)),
            Self::Named(s) => Err(CliError::Config(format!(
                "filter.initial_cov: expected \"identity\" or a diagonal vector, found \"{s}\""
            ))),
            Self::Diagonal(d) if d.len() == dim => Ok(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            Self::Diagonal(d) => Err(CliError::Config(format!(
                "filter.initial_cov: diagonal has {} entries, the stacked state has {dim}",
                d.len()
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub particles: usize,
    pub kappa: f64,
    pub alpha_sampling: f64,
    pub initial_cov: InitialCov,
    /// Target level for the softplus constraint outputs.
    pub nu: f64,
    pub theta: f64,
    pub seed: u64,
    pub paper_init: bool,
}

impl Default for FilterSection {
    fn default() -> Self {
        let base = FilterConfig::new(1, 1);
        Self {
            particles: base.particles,
            kappa: base.kappa,
            alpha_sampling: base.alpha_sampling,
            initial_cov: InitialCov::identity(),
            nu: DEFAULT_NU,
            theta: base.theta,
            seed: base.seed,
            paper_init: base.paper_init,
        }
    }
}

impl FilterSection {
    pub fn to_filter_config(&self, dim: usize) -> CliResult<FilterConfig> {
        let mut cfg = FilterConfig::new(dim, self.seed);
        cfg.particles = self.particles;
        cfg.kappa = self.kappa;
        cfg.alpha_sampling = self.alpha_sampling;
        cfg.initial_cov = self.initial_cov.matrix(dim)?;
        cfg.theta = self.theta;
        cfg.paper_init = self.paper_init;
        cfg.validate(dim).map_err(|e| CliError::Config(format!("filter: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringSection {
    pub cut_fraction: f64,
    pub alpha_merit: f64,
}

impl Default for ClusteringSection {
    fn default() -> Self {
        Self {
            cut_fraction: 0.5,
            alpha_merit: DEFAULT_MERIT_ALPHA,
        }
    }
}

/// How the prox-linear method is initialized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WarmStartSource {
    /// Filter, cluster and select (the full pipeline).
    Filter,
    /// Uniform random inputs within the acceleration bounds, rolled out from
    /// the initial state.
    Random,
    /// A trajectory JSON file.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub scenario: ScenarioSource,
    pub filter: FilterSection,
    pub clustering: ClusteringSection,
    pub solver: ProxLinearSettings,
    pub warm_start: WarmStartSource,
    pub output_dir: PathBuf,
    /// Worker threads; `None` keeps the rayon default (logical cores, or
    /// `RAYON_NUM_THREADS`).
    pub threads: Option<usize>,
    /// Write the first prox-linear subproblem as coordinate triplets.
    pub dump_qp: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSource::Preset("two-agent".into()),
            filter: FilterSection::default(),
            clustering: ClusteringSection::default(),
            solver: ProxLinearSettings::default(),
            warm_start: WarmStartSource::Filter,
            output_dir: PathBuf::from("out"),
            threads: None,
            dump_qp: false,
        }
    }
}

impl PipelineConfig {
    /// Benchmark settings for a named preset: `two-agent` uses 30 particles,
    /// `kappa = 12` and an identity initial covariance; `six-agent` uses 60
    /// particles, `kappa = 24` and `diag(0.1 on states, 1 on inputs)`.
    pub fn preset(name: &str) -> CliResult<Self> {
        let scenario = preset_scenario(name).map_err(|e| CliError::Config(e.to_string()))?;
        let mut cfg = Self {
            scenario: ScenarioSource::Preset(name.into()),
            ..Self::default()
        };
        if name == "six-agent" {
            let (nx, nu) = (4 * scenario.agents, 2 * scenario.agents);
            cfg.filter.particles = 60;
            cfg.filter.kappa = 24.0;
            let mut diag = vec![0.1; nx];
            diag.extend(std::iter::repeat_n(1.0, nu));
            cfg.filter.initial_cov = InitialCov::Diagonal(diag);
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `path=value` overrides in order. The value is parsed as JSON
    /// when possible and taken as a string otherwise.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> CliResult<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = serde_json::to_value(self).expect("config serializes");
        for o in overrides {
            apply_override(&mut doc, o.as_ref())?;
        }
        serde_json::from_value(doc).map_err(|e| CliError::Config(format!("config after overrides: {e}")))
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex_digest(canonical.as_bytes())
    }

    pub fn load_scenario(&self) -> CliResult<Scenario> {
        match &self.scenario {
            ScenarioSource::Preset(name) => preset_scenario(name).map_err(|e| CliError::Config(e.to_string())),
            ScenarioSource::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
                Scenario::from_json(&text).map_err(|e| CliError::Config(format!("scenario {}: {e}", path.display())))
            }
        }
    }

    /// Checks every numeric field against the operation it feeds.
    pub fn validate(&self, dim: usize) -> CliResult<()> {
        self.filter.to_filter_config(dim)?;
        if !(self.filter.nu > 0.0) {
            return Err(CliError::Config("filter.nu: must be positive".into()));
        }
        let f = self.clustering.cut_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(CliError::Config("clustering.cut_fraction: must lie in (0, 1]".into()));
        }
        if !(self.clustering.alpha_merit > 0.0) {
            return Err(CliError::Config("clustering.alpha_merit: must be positive".into()));
        }
        self.solver.validate().map_err(|e| CliError::Config(format!("solver: {e}")))?;
        if self.threads == Some(0) {
            return Err(CliError::Config("threads: must be at least 1".into()));
        }
        Ok(())
    }
}

/// Sets `doc[path] = value` where `assignment` is `a.b.c=value`. Every
/// intermediate key must already be an object.
pub fn apply_override(doc: &mut Value, assignment: &str) -> CliResult<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not of the form path=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("override path `{path}` has an empty segment")));
    }
    let mut node = doc;
    for key in &keys[..keys.len() - 1] {
        node = match node {
            Value::Object(map) => map
                .get_mut(*key)
                .ok_or_else(|| CliError::Config(format!("override path `{path}`: no field `{key}`")))?,
            _ => return Err(CliError::Config(format!("override path `{path}`: `{key}` is not an object"))),
        };
    }
    match node {
        Value::Object(map) => {
            // Externally tagged enums are replaced whole, not merged.
            map.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("override path `{path}`: parent is not an object"))),
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
