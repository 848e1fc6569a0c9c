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

//! End-to-end analysis: edge list → BiCM → validated projection → NECs →
//! publisher records.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bicm::{fit_bicm, max_relative_residual, BicmModel, SolverConfig};
use crate::community::{detect_communities, extract_necs, NecPartition, RawPartition};
use crate::graph::Discussion;
use crate::guidance::JobState;
use crate::ingestion::{BaseKnowledge, EdgeList};
use crate::scoring::ScoringConfig;
use crate::validation::{validate_projection, TailMode, ValidatedProjection};
use crate::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_MIN_NEC_SIZE: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub solver: SolverConfig,
    /// False discovery rate for the projection.
    pub alpha: f64,
    pub tail_mode: TailMode,
    /// Modularity resolution.
    pub resolution: f64,
    pub seed: u64,
    pub min_nec_size: usize,
    pub scoring: ScoringConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            solver: SolverConfig::default(),
            alpha: DEFAULT_ALPHA,
            tail_mode: TailMode::default(),
            resolution: 1.0,
            seed: 0,
            min_nec_size: DEFAULT_MIN_NEC_SIZE,
            scoring: ScoringConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Checks every parameter without touching any data.
    pub fn validate(&self) -> Result<(), Error> {
        use crate::bicm::BicmError;
        use crate::community::CommunityError;
        use crate::validation::ValidationError;
        if !(self.solver.tolerance > 0.0 && self.solver.tolerance.is_finite()) {
            return Err(BicmError::InvalidConfig("tolerance must be positive").into());
        }
        if self.solver.max_iterations == 0 {
            return Err(BicmError::InvalidConfig("max_iterations must be positive").into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ValidationError::InvalidAlpha(self.alpha).into());
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(CommunityError::InvalidResolution(self.resolution).into());
        }
        if self.min_nec_size < 2 {
            return Err(CommunityError::InvalidMinSize(self.min_nec_size).into());
        }
        self.scoring.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Parsing,
    FittingModel,
    Validating,
    DetectingCommunities,
    Scoring,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_records: usize,
    pub n_users: usize,
    pub n_urls: usize,
    pub n_publishers: usize,
    pub n_edges: usize,
    pub solver_iterations: usize,
    pub solver_residual: f64,
    pub n_tested_pairs: usize,
    pub n_validated_edges: usize,
    pub fdr_threshold: Option<f64>,
    pub n_communities: usize,
    pub n_necs: usize,
    pub n_nec_urls: usize,
    pub modularity: f64,
}

/// Everything that depends only on the edge list and the pipeline
/// configuration. Annotations never invalidate it.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub edge_list: EdgeList,
    pub discussion: Discussion,
    pub model: BicmModel,
    pub projection: ValidatedProjection,
    pub partition: RawPartition,
    pub necs: NecPartition,
    pub diagnostics: Diagnostics,
    pub config: PipelineConfig,
}

/// Runs every stage up to NEC extraction, reporting each phase as it
/// starts.
pub fn analyze(
    edge_list: EdgeList,
    config: &PipelineConfig,
    on_phase: &mut dyn FnMut(Phase),
) -> Result<Analysis, Error> {
    config.validate()?;
    let discussion = Discussion::from_edge_list(&edge_list)?;
    let graph = &discussion.graph;

    on_phase(Phase::FittingModel);
    let model = fit_bicm(graph, &config.solver)?;
    let residual = max_relative_residual(&model, graph);

    on_phase(Phase::Validating);
    let projection = validate_projection(graph, &model, config.alpha, config.tail_mode)?;

    on_phase(Phase::DetectingCommunities);
    let partition = detect_communities(&projection, config.resolution, config.seed)?;
    let necs = extract_necs(&partition, config.min_nec_size)?;

    let diagnostics = Diagnostics {
        n_records: edge_list.len(),
        n_users: graph.n_users(),
        n_urls: graph.n_urls(),
        n_publishers: discussion.publishers().len(),
        n_edges: graph.n_edges(),
        solver_iterations: model.iterations(),
        solver_residual: residual,
        n_tested_pairs: projection.n_tested(),
        n_validated_edges: projection.n_edges(),
        fdr_threshold: projection.threshold(),
        n_communities: partition.n_communities(),
        n_necs: necs.necs.len(),
        n_nec_urls: necs.n_urls(),
        modularity: partition.modularity,
    };
    Ok(Analysis {
        edge_list,
        discussion,
        model,
        projection,
        partition,
        necs,
        diagnostics,
        config: *config,
    })
}

/// Full pass from a parsed edge list and base knowledge to scored
/// publisher records.
pub fn run_pipeline(
    edge_list: EdgeList,
    knowledge: BaseKnowledge,
    config: &PipelineConfig,
    on_phase: &mut dyn FnMut(Phase),
) -> Result<JobState, Error> {
    let analysis = analyze(edge_list, config, on_phase)?;
    on_phase(Phase::Scoring);
    Ok(JobState::new(Arc::new(analysis), knowledge, config.scoring)?)
}
