//! Run configuration: a single JSON file shared by every stage.

use std::path::{Path, PathBuf};

use diachron_core::seed;
use diachron_core::{ClusterConfig, DiffusionThresholds, Format, PeriodId, PeriodSpec, Weighting};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Top-level key ignored by the loader so configs can carry a note.
pub const COMMENT_KEY: &str = "_comment";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GiniCells {
    /// Classification categories of the records.
    #[default]
    Categories,
    /// Cluster assignments of both periods.
    Clusters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_p1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_p2: Option<usize>,
    pub max_iters: usize,
    pub tol: f64,
    pub restarts: usize,
    pub dense_axis_limit: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let c = ClusterConfig::default();
        ClusterSection {
            k: c.k,
            k_p1: None,
            k_p2: None,
            max_iters: c.max_iters,
            tol: c.tol,
            restarts: c.restarts,
            dense_axis_limit: c.dense_axis_limit,
        }
    }
}

impl ClusterSection {
    pub fn k_for(&self, period: PeriodId) -> usize {
        match period {
            PeriodId::P1 => self.k_p1.unwrap_or(self.k),
            PeriodId::P2 => self.k_p2.unwrap_or(self.k),
        }
    }
}

fn default_min_df() -> u32 {
    2
}

fn default_edge_threshold() -> f64 {
    0.2
}

fn default_link_threshold() -> f64 {
    0.3
}

fn default_top_m() -> usize {
    10
}

fn default_format() -> Format {
    Format::Jsonl
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus file; relative paths resolve against the config file directory.
    pub input: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    pub periods: PeriodSpec,
    #[serde(default = "default_min_df")]
    pub min_df: u32,
    #[serde(default)]
    pub weighting: Weighting,
    #[serde(default)]
    pub thresholds: DiffusionThresholds,
    #[serde(default)]
    pub cluster: ClusterSection,
    #[serde(default)]
    pub seed: u64,
    /// Map edge threshold τ.
    #[serde(default = "default_edge_threshold")]
    pub edge_threshold: f64,
    /// Linkage threshold ρ.
    #[serde(default = "default_link_threshold")]
    pub link_threshold: f64,
    #[serde(default = "default_top_m")]
    pub top_m: usize,
    #[serde(default)]
    pub gini_cells: GiniCells,
    #[serde(default)]
    pub dump_matrix: bool,
    /// Wall-clock stage timings in the manifest; off keeps reruns byte-identical.
    #[serde(default)]
    pub record_timings: bool,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

/// A validated configuration plus the paths it resolves to.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub input_path: PathBuf,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(obj) = value.as_object_mut() {
            obj.remove(COMMENT_KEY);
        }
        serde_json::from_value(value).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn cluster_config(&self, period: PeriodId) -> ClusterConfig {
        ClusterConfig {
            k: self.cluster.k_for(period),
            max_iters: self.cluster.max_iters,
            tol: self.cluster.tol,
            restarts: self.cluster.restarts,
            seed: seed::derive(self.seed, &format!("cluster.{period}")),
            dense_axis_limit: self.cluster.dense_axis_limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.periods
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.thresholds
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.min_df == 0 {
            return bad("min_df must be at least 1".into());
        }
        for period in [PeriodId::P1, PeriodId::P2] {
            let cfg = self.cluster_config(period);
            if cfg.k < 2 {
                return bad(format!("k for {period} must be at least 2"));
            }
            cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        for (name, v) in [
            ("edge_threshold", self.edge_threshold),
            ("link_threshold", self.link_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1]"));
            }
        }
        if self.top_m == 0 {
            return bad("top_m must be at least 1".into());
        }
        Ok(())
    }
}

/// Read, override and validate a config file.
pub fn load(path: &Path, overrides: &Overrides) -> Result<Resolved> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut config = RunConfig::from_json(&text)?;
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(format) = overrides.format {
        config.format = format;
    }
    config.validate()?;
    let base = path.parent().unwrap_or(Path::new("."));
    let input_path = if config.input.is_absolute() {
        config.input.clone()
    } else {
        base.join(&config.input)
    };
    let out_dir = match (&overrides.out, &config.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_absolute() => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => {
            return Err(CliError::Config(
                "no output directory (pass --out or set output_dir)".into(),
            ))
        }
    };
    Ok(Resolved {
        config,
        input_path,
        out_dir,
    })
}
