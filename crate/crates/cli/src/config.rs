//! Run configuration: a flat TOML document, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use suspense::annotation::JudgmentMapping;
use suspense::{AlphaMode, DistanceMetric, Measure, MetricLevel, TpConfig};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub stories: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub continuations: Option<PathBuf>,
    pub sentiment: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub tp_gold: Option<PathBuf>,
    /// Measure CSV read by `evaluate`, `turning-points` and `plot`.
    pub measures_file: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,

    pub measures: Vec<Measure>,
    pub metric: Option<DistanceMetric>,
    pub rollout: usize,
    /// Draw candidates from the other stories of the corpus when no
    /// continuation file is given.
    pub sample_candidates: bool,
    pub branching: Option<Vec<usize>>,
    pub temperature: f64,
    pub alpha_mode: AlphaMode,
    pub candidate_alpha: f64,
    pub baseline_similarity: bool,

    pub mapping: [f64; 5],
    pub fit_mapping: bool,
    pub folds: usize,
    pub ci_p: f64,

    pub tp_positions: [f64; 5],
    pub tp_half_widths: [f64; 5],

    pub level: MetricLevel,
    pub min_alpha: f64,
    pub min_rt_ms: f64,

    pub dim: usize,
    pub story_id: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let tp = TpConfig::default();
        RunConfig {
            stories: None,
            embeddings: None,
            continuations: None,
            sentiment: None,
            annotations: None,
            tp_gold: None,
            measures_file: None,
            out: PathBuf::from("out"),
            seed: 0,
            measures: vec![Measure::SEly],
            metric: None,
            rollout: 1,
            sample_candidates: false,
            branching: None,
            temperature: 1.0,
            alpha_mode: AlphaMode::Magnitude,
            candidate_alpha: 1.0,
            baseline_similarity: false,
            mapping: JudgmentMapping::default().values(),
            fit_mapping: false,
            folds: 5,
            ci_p: 0.05,
            tp_positions: tp.positions,
            tp_half_widths: tp.half_widths,
            level: MetricLevel::Ordinal,
            min_alpha: 0.35,
            min_rt_ms: 600.0,
            dim: 64,
            story_id: None,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<toml::Table>()
                    .with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for (key, raw) in overrides {
            table.insert(key.clone(), parse_value(raw));
        }
        let cfg: RunConfig = table.try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=suspense::continuation::MAX_DEPTH).contains(&self.rollout) {
            bail!("rollout must be 1, 2 or 3, got {}", self.rollout);
        }
        if let Some(b) = &self.branching {
            if b.len() != self.rollout || b.contains(&0) {
                bail!("branching must list {} positive counts", self.rollout);
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            bail!("temperature must be positive");
        }
        if !(self.ci_p > 0.0 && self.ci_p < 1.0) {
            bail!("ci_p must lie in (0, 1)");
        }
        if self.dim < 2 {
            bail!("dim must be at least 2");
        }
        self.judgment_mapping()?;
        self.tp_config().validate()?;
        Ok(())
    }

    pub fn judgment_mapping(&self) -> Result<JudgmentMapping> {
        Ok(JudgmentMapping::new(self.mapping)?)
    }

    pub fn tp_config(&self) -> TpConfig {
        TpConfig {
            positions: self.tp_positions,
            half_widths: self.tp_half_widths,
        }
    }

    pub fn require<'a>(&self, field: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .with_context(|| format!("missing `{key}` in configuration"))
    }
}

/// Interprets an override as a TOML value, falling back to a plain string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
