use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, NaiveDate, Utc};
use serde::Deserialize;

use crisisloc::eval::DEFAULT_RATIOS;
use crisisloc::model::{LogRegParams, DEFAULT_ALPHA};
use crisisloc::{ClassSet, FeatureClass, GeoPoint, PartitionScheme, Region, TimeWindow};

/// Declarative run configuration, read from a TOML file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Minutes east of UTC used for local hours (e.g. -240 for EDT).
    #[serde(default)]
    pub timezone_offset_minutes: i32,
    #[serde(default = "default_classes")]
    pub classes: Vec<FeatureClass>,
    /// Fill missing ARK layers with the rule-based tagger.
    #[serde(default = "yes")]
    pub fallback_tagging: bool,
    pub corpus: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub region: NamedRegion,
    pub windows: Windows,
    #[serde(default)]
    pub cities: Vec<NamedRegion>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub eval: EvalConfig,
    pub divergence: Option<DivergenceConfig>,
}

fn default_classes() -> Vec<FeatureClass> {
    vec![FeatureClass::Unigram]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedRegion {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub radius_km: f64,
}

impl NamedRegion {
    pub fn region(&self) -> Result<Region> {
        let center =
            GeoPoint::new(self.lat, self.lon).with_context(|| format!("region `{}`", self.name))?;
        Region::new(center, self.radius_km).with_context(|| format!("region `{}`", self.name))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl WindowConfig {
    fn window(&self) -> Result<TimeWindow> {
        Ok(TimeWindow::new(self.start, self.end)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Windows {
    pub crisis: WindowConfig,
    pub pre_crisis: Option<WindowConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Logreg,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "default_kind")]
    pub kind: ModelKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub logreg: LogRegParams,
    /// Balance IR/OR before training.
    #[serde(default = "yes")]
    pub balance: bool,
}

fn default_kind() -> ModelKind {
    ModelKind::Nb
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Nb,
            alpha: DEFAULT_ALPHA,
            logreg: LogRegParams::default(),
            balance: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
}

fn default_repeats() -> usize {
    3
}

fn default_folds() -> usize {
    5
}

fn default_ratios() -> Vec<f64> {
    DEFAULT_RATIOS.to_vec()
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            repeats: default_repeats(),
            folds: default_folds(),
            ratios: default_ratios(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowChoice {
    Crisis,
    PreCrisis,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivergenceConfig {
    /// Local calendar day for the hourly matrix.
    pub day: NaiveDate,
    pub start_hour: u32,
    pub end_hour: u32,
    /// Window whose tweets feed the regional matrix.
    #[serde(default = "default_window_choice")]
    pub regional_window: WindowChoice,
}

fn default_window_choice() -> WindowChoice {
    WindowChoice::Crisis
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme()?;
        for city in &self.cities {
            city.region()?;
        }
        let mut names: Vec<&str> = std::iter::once(self.region.name.as_str())
            .chain(self.cities.iter().map(|c| c.name.as_str()))
            .collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            bail!("region names must be distinct");
        }
        if self.classes.is_empty() {
            bail!("at least one feature class is required");
        }
        if let Some(corpus) = &self.corpus {
            if corpus == &self.output_dir {
                bail!("corpus path and output directory must differ");
            }
        }
        Ok(())
    }

    pub fn class_set(&self) -> ClassSet {
        self.classes.iter().copied().collect()
    }

    pub fn scheme(&self) -> Result<PartitionScheme> {
        Ok(PartitionScheme {
            region: self.region.region()?,
            crisis: self.windows.crisis.window()?,
            pre_crisis: self
                .windows
                .pre_crisis
                .as_ref()
                .map(WindowConfig::window)
                .transpose()?,
        })
    }

    pub fn corpus_path(&self) -> Result<&Path> {
        self.corpus
            .as_deref()
            .context("config has no `corpus` input path")
    }

    pub fn partition_dir(&self) -> PathBuf {
        self.output_dir.join("partition")
    }
}
