//! Recipe names, parameter resolution, and config-file validation.

use anyhow::{bail, Context};
use calibag::sequential::Objective;
use serde::Deserialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// The eight batch experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Recipe {
    RecalibrationCurves,
    UnivariateCalibration,
    CovarianceMetrics,
    JackknifeVsRmse,
    Imbalanced,
    NoiseSweep,
    BagSweep,
    SlStudy,
}

impl Recipe {
    pub const ALL: [Recipe; 8] = [
        Recipe::RecalibrationCurves,
        Recipe::UnivariateCalibration,
        Recipe::CovarianceMetrics,
        Recipe::JackknifeVsRmse,
        Recipe::Imbalanced,
        Recipe::NoiseSweep,
        Recipe::BagSweep,
        Recipe::SlStudy,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Recipe::RecalibrationCurves => "recalibration-curves",
            Recipe::UnivariateCalibration => "univariate-calibration",
            Recipe::CovarianceMetrics => "covariance-metrics",
            Recipe::JackknifeVsRmse => "jackknife-vs-rmse",
            Recipe::Imbalanced => "imbalanced",
            Recipe::NoiseSweep => "noise-sweep",
            Recipe::BagSweep => "bag-sweep",
            Recipe::SlStudy => "sl-study",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Recipe::RecalibrationCurves => {
                "recalibration factor vs confidence level, percentile vs MLE, plus the \
                 out-of-bag standard-residual sample (synthetic benchmark, 128 rows, 64 bags, \
                 100 trials)"
            }
            Recipe::UnivariateCalibration => {
                "standard confidence and standard error of the recalibrated interval across \
                 training-set sizes (synthetic benchmark, noise 2.0, 128 test rows, 64 trials)"
            }
            Recipe::CovarianceMetrics => {
                "median NLPD and standard confidence of all four correlation methods on \
                 three-output synthetic benchmarks (plus fixture datasets when present)"
            }
            Recipe::JackknifeVsRmse => {
                "mean jackknife standard deviation against empirical RMSE on a 100-point grid \
                 for the tophat and cubic targets (64 training rows, 250 trials)"
            }
            Recipe::Imbalanced => {
                "recalibrated bootstrap vs the constant out-of-bag interval when training is \
                 60 tension + 4 compression rows and testing is 32 compression rows (50 trials)"
            }
            Recipe::NoiseSweep => {
                "interval width over noise level and per-method NLPD as output noise grows \
                 (noise grid 0.5..16, 128 rows, 100 trials)"
            }
            Recipe::BagSweep => {
                "per-method NLPD across bag counts 16/32/64/128 (synthetic three-output \
                 benchmark, noise 1.0, 16 trials)"
            }
            Recipe::SlStudy => {
                "sequential-learning rounds-to-success distributions per acquisition method \
                 on the two-objective synthetic pool (64 trials; add --full for the \
                 thermoelectric fixture study)"
            }
        }
    }
}

impl FromStr for Recipe {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Recipe::ALL
            .iter()
            .find(|r| r.name() == s)
            .copied()
            .ok_or_else(|| {
                anyhow::anyhow!(
                    "unknown recipe '{s}'; expected one of: {}",
                    Recipe::ALL.map(|r| r.name()).join(", ")
                )
            })
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional config-file overrides; command-line flags win over these.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub recipe: Option<String>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub bags: Option<usize>,
    pub noise: Option<f64>,
    pub p: Option<f64>,
    pub methods: Option<Vec<String>>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub n_initial: Option<usize>,
    pub n_mc_samples: Option<usize>,
    pub full: Option<bool>,
    pub output_dir: Option<PathBuf>,
    pub fixture_dir: Option<PathBuf>,
    /// Custom threshold objectives for `sl-study` (TOML `[[objective]]`
    /// entries). When present they replace the built-in problems.
    #[serde(rename = "objective")]
    pub objectives: Option<Vec<Objective<f64>>>,
    /// Pool for a custom `sl-study`: "synthetic" or a fixture name.
    pub sl_dataset: Option<String>,
}

impl FileConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg: FileConfig = toml::from_str(&text)
            .with_context(|| format!("config {} does not parse", path.display()))?;
        cfg.check_ranges()?;
        Ok(cfg)
    }

    pub fn check_ranges(&self) -> anyhow::Result<()> {
        if let Some(p) = self.p {
            if !(0.0 < p && p < 1.0) {
                bail!("p = {p} outside (0, 1)");
            }
        }
        if let Some(noise) = self.noise {
            if noise < 0.0 || !noise.is_finite() {
                bail!("noise = {noise} must be >= 0");
            }
        }
        if let Some(b) = self.bags {
            if b < 2 {
                bail!("bags = {b} must be >= 2");
            }
        }
        if let Some(t) = self.trials {
            if t == 0 {
                bail!("trials must be >= 1");
            }
        }
        if let Some(m) = self.n_mc_samples {
            if m == 0 {
                bail!("n_mc_samples must be >= 1");
            }
        }
        if let Some(r) = &self.recipe {
            Recipe::from_str(r)?;
        }
        if let Some(objectives) = &self.objectives {
            if objectives.is_empty() {
                bail!("[[objective]] list is empty");
            }
            for o in objectives {
                if !o.threshold.is_finite() {
                    bail!("objective on '{}' has non-finite threshold", o.output);
                }
            }
        }
        Ok(())
    }
}

/// Fully resolved run parameters. `None` fields fall back to each recipe's
/// own defaults.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub recipe: Recipe,
    pub seed: u64,
    pub trials: Option<usize>,
    pub bags: Option<usize>,
    pub noise: Option<f64>,
    pub p: f64,
    pub methods: Option<Vec<String>>,
    pub n_train: Option<usize>,
    pub n_test: Option<usize>,
    pub n_initial: Option<usize>,
    pub n_mc_samples: Option<usize>,
    pub full: bool,
    pub output_dir: PathBuf,
    pub fixture_dir: PathBuf,
    /// Custom objectives for `sl-study`; empty means the built-in problems.
    pub objectives: Vec<Objective<f64>>,
    /// Pool name for a custom `sl-study`.
    pub sl_dataset: Option<String>,
}

impl RunConfig {
    pub fn new(recipe: Recipe) -> Self {
        Self {
            recipe,
            seed: 0,
            trials: None,
            bags: None,
            noise: None,
            p: 0.683,
            methods: None,
            n_train: None,
            n_test: None,
            n_initial: None,
            n_mc_samples: None,
            full: false,
            output_dir: PathBuf::from("results"),
            fixture_dir: PathBuf::from("fixtures"),
            objectives: Vec::new(),
            sl_dataset: None,
        }
    }

    /// Layer config-file values under whatever is already set.
    pub fn apply_file(&mut self, file: &FileConfig) {
        if let Some(v) = file.seed {
            self.seed = v;
        }
        if let Some(v) = file.trials {
            self.trials = Some(v);
        }
        if let Some(v) = file.bags {
            self.bags = Some(v);
        }
        if let Some(v) = file.noise {
            self.noise = Some(v);
        }
        if let Some(v) = file.p {
            self.p = v;
        }
        if let Some(v) = &file.methods {
            self.methods = Some(v.clone());
        }
        if let Some(v) = file.n_train {
            self.n_train = Some(v);
        }
        if let Some(v) = file.n_test {
            self.n_test = Some(v);
        }
        if let Some(v) = file.n_initial {
            self.n_initial = Some(v);
        }
        if let Some(v) = file.n_mc_samples {
            self.n_mc_samples = Some(v);
        }
        if let Some(v) = file.full {
            self.full = v;
        }
        if let Some(v) = &file.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = &file.fixture_dir {
            self.fixture_dir = v.clone();
        }
        if let Some(v) = &file.objectives {
            self.objectives = v.clone();
        }
        if let Some(v) = &file.sl_dataset {
            self.sl_dataset = Some(v.clone());
        }
    }
}

/// Parse and validate a config file, returning human-readable diagnostics
/// (empty config is valid: defaults are echoed by the caller).
pub fn validate_config(path: &Path) -> anyhow::Result<FileConfig> {
    FileConfig::from_path(path)
}
