// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Service settings from `TROPIC_*` environment variables, and per-job
//! configuration overrides.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tropic_core::pipeline::PipelineConfig;
use tropic_core::validation::{TailMode, DEFAULT_MAX_EXACT_USERS};

pub const DEFAULT_MAX_EDGES: usize = 50_000;
pub const DEFAULT_BIND_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SettingsError {
    #[error("{name}={value:?} is not valid: {reason}")]
    BadVariable {
        name: &'static str,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    /// Upload cap in edge-list records; `None` disables it.
    pub max_edges: Option<usize>,
    /// Defaults for every job, before per-job overrides.
    pub pipeline: PipelineConfig,
    pub snapshot_dir: Option<PathBuf>,
    pub bind_addr: String,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            max_edges: Some(DEFAULT_MAX_EDGES),
            pipeline: PipelineConfig::default(),
            snapshot_dir: None,
            bind_addr: DEFAULT_BIND_ADDR.to_string(),
        }
    }
}

fn parse_var<T: std::str::FromStr>(name: &'static str, value: String) -> Result<T, SettingsError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| SettingsError::BadVariable {
        name,
        reason: e.to_string(),
        value,
    })
}

impl Settings {
    pub fn from_env() -> Result<Self, SettingsError> {
        Self::from_lookup(|name| std::env::var(name).ok())
    }

    /// Reads settings through `lookup`, which maps a variable name to its
    /// value.
    pub fn from_lookup(lookup: impl Fn(&str) -> Option<String>) -> Result<Self, SettingsError> {
        let mut settings = Settings::default();
        if let Some(v) = lookup("TROPIC_MAX_EDGES") {
            let n: usize = parse_var("TROPIC_MAX_EDGES", v)?;
            settings.max_edges = (n > 0).then_some(n);
        }
        let mut overrides = ConfigOverrides::default();
        if let Some(v) = lookup("TROPIC_ALPHA") {
            overrides.alpha = Some(parse_var("TROPIC_ALPHA", v)?);
        }
        if let Some(v) = lookup("TROPIC_LABEL_THRESHOLD") {
            overrides.label_threshold = Some(parse_var("TROPIC_LABEL_THRESHOLD", v)?);
        }
        if let Some(v) = lookup("TROPIC_SEED") {
            overrides.seed = Some(parse_var("TROPIC_SEED", v)?);
        }
        settings.pipeline = overrides.apply(settings.pipeline)?;
        if let Some(v) = lookup("TROPIC_SNAPSHOT_DIR").filter(|v| !v.is_empty()) {
            settings.snapshot_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = lookup("TROPIC_BIND_ADDR").filter(|v| !v.is_empty()) {
            settings.bind_addr = v;
        }
        Ok(settings)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModeName {
    Exact,
    Poisson,
    Auto,
}

/// Per-job configuration, as accepted in the `config` upload field and
/// the CLI flags. Absent fields keep their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub resolution: Option<f64>,
    pub min_nec_size: Option<usize>,
    pub label_threshold: Option<f64>,
    pub confidence_halfpoint: Option<u32>,
    pub dispersion_scale: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub tail_mode: Option<TailModeName>,
}

impl ConfigOverrides {
    pub fn apply(&self, base: PipelineConfig) -> Result<PipelineConfig, SettingsError> {
        let mut c = base;
        if let Some(v) = self.alpha {
            c.alpha = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.resolution {
            c.resolution = v;
        }
        if let Some(v) = self.min_nec_size {
            c.min_nec_size = v;
        }
        if let Some(v) = self.label_threshold {
            c.scoring.label_threshold = v;
        }
        if let Some(v) = self.confidence_halfpoint {
            c.scoring.confidence_halfpoint = v;
        }
        if let Some(v) = self.dispersion_scale {
            c.scoring.dispersion_scale = v;
        }
        if let Some(v) = self.tolerance {
            c.solver.tolerance = v;
        }
        if let Some(v) = self.max_iterations {
            c.solver.max_iterations = v;
        }
        if let Some(mode) = self.tail_mode {
            c.tail_mode = match mode {
                TailModeName::Exact => TailMode::Exact,
                TailModeName::Poisson => TailMode::Poisson,
                TailModeName::Auto => TailMode::Auto {
                    max_exact_users: DEFAULT_MAX_EXACT_USERS,
                },
            };
        }
        c.validate()
            .map_err(|e| SettingsError::InvalidConfig(e.to_string()))?;
        Ok(c)
    }
}
