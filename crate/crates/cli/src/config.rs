//! Experiment configuration file.
//!
//! A single TOML document. Relative paths resolve against the directory of
//! the config file, and unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use oscdamp::control::{PssParams, ScsConfig};
use oscdamp::env::EnvConfig;
use oscdamp::grid::data::ModelFile;
use oscdamp::training::TrainConfig;
use oscdamp::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model file, relative to the config file.
    pub model: PathBuf,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub env: EnvConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub scs: ScsSection,
    /// One entry for every controlled generator, or a single entry shared by all.
    #[serde(default = "default_pss")]
    pub pss: Vec<PssParams<f64>>,
    #[serde(default)]
    pub calibration: CalibrationSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    /// Directory the relative paths above are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_pss() -> Vec<PssParams<f64>> {
    vec![PssParams::default()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScsSection {
    pub threshold: f64,
    pub kappa: [f64; 3],
}

impl Default for ScsSection {
    fn default() -> Self {
        ScsSection {
            threshold: 0.06,
            kappa: [1.0, 1.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSection {
    pub thresholds: Vec<f64>,
    pub trials: usize,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        CalibrationSection {
            thresholds: vec![0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.2, 0.3, 0.5],
            trials: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub delays: Vec<f64>,
    /// Adds the nonlinear swing model with the model file's fault sequence.
    pub nonlinear: bool,
    pub episodes: usize,
    /// Agent steps per evaluation episode.
    pub episode_length: usize,
    /// Process noise during evaluation and calibration (linear plant only).
    pub noise_std: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            delays: vec![0.0, 0.35, 0.8],
            nonlinear: true,
            episodes: 20,
            episode_length: 500,
            noise_std: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    /// Normalized gain, row-major `p × m`; all zeros when empty.
    pub action: Vec<f64>,
    /// Agent steps (windows of `action_repeat` simulation steps).
    pub steps: usize,
    pub nonlinear: bool,
    pub delay: f64,
    pub noise_std: f64,
    /// Disables the wide-area path, leaving the stabilizers alone.
    pub pss_only: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            action: Vec::new(),
            steps: 25,
            nonlinear: false,
            delay: 0.0,
            noise_std: 0.0,
            pss_only: false,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::from_toml(text, &e))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
        Self::parse(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.train.validate()?;
        for p in &self.pss {
            p.validate()?;
        }
        if self.pss.is_empty() {
            return Err(Error::InvalidParameter("at least one [[pss]] entry required".into()));
        }
        let c = &self.calibration;
        if c.thresholds.is_empty() || c.thresholds.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidParameter("calibration thresholds must be a non-empty list of values > 0".into()));
        }
        if c.trials == 0 {
            return Err(Error::InvalidParameter("calibration trials must be > 0".into()));
        }
        let e = &self.evaluation;
        if e.delays.iter().any(|d| !(*d >= 0.0)) {
            return Err(Error::InvalidParameter("evaluation delays must be >= 0".into()));
        }
        if !(e.noise_std >= 0.0) || !(self.simulate.noise_std >= 0.0) {
            return Err(Error::InvalidParameter("noise_std must be >= 0".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Loads the model file; a missing file is a configuration error.
    pub fn model_file(&self) -> Result<ModelFile> {
        let path = self.resolve(&self.model);
        if !path.is_file() {
            return Err(Error::InvalidParameter(format!("model file {} not found", path.display())));
        }
        ModelFile::load(&path)
    }

    pub fn scs_config(&self, reference: usize) -> Result<ScsConfig<f64>> {
        ScsConfig::new(self.scs.threshold, self.scs.kappa, reference)
    }

    /// Stabilizer parameters for `p` controlled generators.
    pub fn pss_table(&self, p: usize) -> Result<Vec<PssParams<f64>>> {
        match self.pss.len() {
            1 => Ok(vec![self.pss[0]; p]),
            n if n == p => Ok(self.pss.clone()),
            n => Err(Error::InvalidParameter(format!(
                "{n} [[pss]] entries for {p} controlled generators"
            ))),
        }
    }
}
