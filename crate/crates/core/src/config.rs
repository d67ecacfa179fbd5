//! Declarative run configuration, read from a TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conformal::ConformalConfig;
use crate::diagnostics::DiagnosticsConfig;
use crate::error::Error;
use crate::indices::{Direction, IndicatorSpec};
use crate::sampler::{AnnealingSchedule, ChainSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Unit table: id column first, then indicators, attributes and class.
    pub units: PathBuf,
    #[serde(default)]
    pub geometry: Option<PathBuf>,
    #[serde(default = "default_class_column")]
    pub class_column: String,
    /// Feature property carrying the unit id in the geometry file.
    #[serde(default = "default_id_property")]
    pub geometry_id_property: String,
}

fn default_class_column() -> String {
    "CLASS".into()
}

fn default_id_property() -> String {
    "unit_id".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub name: String,
    #[serde(default)]
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Keep only the leading components in the field; all when absent.
    pub components: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    /// Attributes (out of five) two units must share to be connected.
    pub min_match: usize,
    /// Largest graph for which the dense spectrum is computed.
    pub spectrum_cap: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self { min_match: 5, spectrum_cap: crate::network::DEFAULT_SPECTRUM_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub n_iter: u64,
    pub burn_in_fraction: f64,
    pub workers: usize,
    pub trace_stride: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { n_iter: 600_000, burn_in_fraction: 0.10, workers: 6, trace_stride: 600 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplicateMode {
    /// Pool a few full chains, then draw `k` replicates of `configurations`
    /// Bernoulli configurations each from the pooled marginals.
    #[default]
    Resample,
    /// Run `k` independent full chains.
    Chains,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReplicateConfig {
    pub mode: ReplicateMode,
    pub k: usize,
    pub configurations: u64,
    pub pilot_chains: usize,
    /// Also write the full `k x n` replicate matrix.
    pub write_matrix: bool,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        Self { mode: ReplicateMode::Resample, k: 20_000, configurations: 300, pilot_chains: 6, write_matrix: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConformalSection {
    pub alpha: f64,
    pub calibration_fraction: f64,
}

impl Default for ConformalSection {
    fn default() -> Self {
        let c = ConformalConfig::default();
        Self { alpha: c.alpha, calibration_fraction: c.calibration_fraction }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub input: InputConfig,
    pub indicators: Vec<IndicatorSpec>,
    #[serde(default)]
    pub groups: Vec<GroupConfig>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub graph: GraphConfig,
    #[serde(default)]
    pub schedule: AnnealingSchedule,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default)]
    pub replicates: ReplicateConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub conformal: ConformalSection,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, Error> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() { p.to_path_buf() } else { self.base_dir.join(p) }
    }

    pub fn units_path(&self) -> PathBuf {
        self.resolve(&self.input.units)
    }

    pub fn geometry_path(&self) -> Option<PathBuf> {
        self.input.geometry.as_deref().map(|p| self.resolve(p))
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.output.dir)
    }

    pub fn chain_spec(&self) -> ChainSpec {
        ChainSpec {
            n_iter: self.chain.n_iter,
            burn_in_fraction: self.chain.burn_in_fraction,
            seed: self.seed,
            workers: self.chain.workers,
            trace_stride: self.chain.trace_stride,
            shared_seed: false,
        }
    }

    pub fn conformal_config(&self) -> ConformalConfig {
        ConformalConfig {
            alpha: self.conformal.alpha,
            calibration_fraction: self.conformal.calibration_fraction,
            seed: self.seed,
        }
    }

    pub fn direction_of(&self, group: &str) -> Direction {
        self.groups.iter().find(|g| g.name == group).map(|g| g.direction).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.indicators.is_empty() {
            return bad("at least one indicator is required".into());
        }
        for (a, s) in self.indicators.iter().enumerate() {
            if self.indicators[..a].iter().any(|o| o.name == s.name) {
                return bad(format!("indicator `{}` listed twice", s.name));
            }
        }
        for g in &self.groups {
            if !self.indicators.iter().any(|s| s.group == g.name) {
                return bad(format!("group `{}` has no indicators", g.name));
            }
        }
        if !(1..=5).contains(&self.graph.min_match) {
            return bad(format!("graph.min_match {} not in 1..=5", self.graph.min_match));
        }
        if !(self.schedule.t0 > 0.0 && self.schedule.t0.is_finite()) {
            return bad(format!("schedule.t0 {} must be positive", self.schedule.t0));
        }
        self.chain_spec().validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.replicates.k == 0 || self.replicates.configurations == 0 || self.replicates.pilot_chains == 0 {
            return bad("replicates.k, configurations and pilot_chains must be positive".into());
        }
        let d = &self.diagnostics;
        if !(d.temperature > 0.0) || d.bootstrap_replications == 0 || d.bootstrap_size == 0 {
            return bad("diagnostics temperature and bootstrap sizes must be positive".into());
        }
        if !(d.bootstrap_alpha > 0.0 && d.bootstrap_alpha < 1.0) {
            return bad(format!("diagnostics.bootstrap_alpha {} not in (0, 1)", d.bootstrap_alpha));
        }
        if self.field.components == Some(0) {
            return bad("field.components must be positive when set".into());
        }
        self.conformal_config().validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// SHA-256 over every field that can change results. The output
    /// directory and worker count are excluded: outputs do not depend on them.
    pub fn config_hash(&self) -> String {
        let mut view = self.clone();
        view.output.dir = PathBuf::new();
        view.chain.workers = 0;
        let canonical = serde_json::to_string(&view).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
