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

//! In-memory job store with optional snapshot persistence.
//!
//! Each job owns its uploaded inputs and, once the pipeline finishes, an
//! immutable [`JobState`] behind an `Arc`. Readers clone the `Arc`;
//! annotations build a new state under a per-job mutation lock and swap it
//! in. Snapshots hold the inputs plus user annotations, one JSON file per
//! job at `<dir>/<id>.json`, and are replayed on startup.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tropic_core::guidance::{GuidanceError, JobState};
use tropic_core::ingestion::{BaseKnowledge, Edge, EdgeList, PublisherId};
use tropic_core::pipeline::{analyze, Analysis, Diagnostics, Phase, PipelineConfig};

use crate::settings::Settings;

/// How many finished analyses are kept for reuse by identical uploads.
const ANALYSIS_CACHE_SIZE: usize = 4;
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("no job with id {0}")]
    UnknownJob(String),
    #[error("job is not finished (phase {0:?})")]
    NotReady(JobPhase),
    #[error("job failed: {0}")]
    Failed(String),
    #[error(transparent)]
    Guidance(#[from] GuidanceError),
    #[error("snapshot {path}: {reason}")]
    Snapshot { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobPhase {
    Queued,
    Parsing,
    FittingModel,
    Validating,
    DetectingCommunities,
    Scoring,
    Done,
    Failed,
}

impl From<Phase> for JobPhase {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Parsing => JobPhase::Parsing,
            Phase::FittingModel => JobPhase::FittingModel,
            Phase::Validating => JobPhase::Validating,
            Phase::DetectingCommunities => JobPhase::DetectingCommunities,
            Phase::Scoring => JobPhase::Scoring,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub phase: JobPhase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub config: PipelineConfig,
    pub n_records: usize,
    pub diagnostics: Option<Diagnostics>,
}

struct Job {
    status: RwLock<JobStatus>,
    state: RwLock<Option<Arc<JobState>>>,
    /// Held for the whole read-modify-write of an annotation.
    mutation: Mutex<()>,
    edge_list: Arc<EdgeList>,
    baseline: BaseKnowledge,
}

impl Job {
    fn set_phase(&self, phase: JobPhase) {
        let mut status = self.status.write().expect("status lock");
        // Phases only move forward.
        if phase > status.phase {
            status.phase = phase;
        }
    }

    fn current(&self) -> Option<Arc<JobState>> {
        self.state.read().expect("state lock").clone()
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    id: String,
    created_at: u64,
    config: PipelineConfig,
    edges: Vec<Edge>,
    base_knowledge: BTreeMap<PublisherId, u8>,
    user_annotations: BTreeMap<PublisherId, u8>,
}

struct CachedAnalysis {
    edge_list: Arc<EdgeList>,
    config: PipelineConfig,
    analysis: Arc<Analysis>,
}

/// Everything except scoring parameters decides the analysis.
fn same_analysis_config(a: &PipelineConfig, b: &PipelineConfig) -> bool {
    PipelineConfig { scoring: b.scoring, ..*a } == *b
}

pub struct Store {
    settings: Settings,
    jobs: RwLock<HashMap<String, Arc<Job>>>,
    cache: Mutex<Vec<CachedAnalysis>>,
}

/// The outcome of an annotation change.
#[derive(Debug, Clone)]
pub struct Mutation {
    pub before: Arc<JobState>,
    pub after: Arc<JobState>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl Store {
    pub fn new(settings: Settings) -> Arc<Self> {
        Arc::new(Store {
            settings,
            jobs: RwLock::new(HashMap::new()),
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    fn job(&self, id: &str) -> Result<Arc<Job>, StoreError> {
        self.jobs
            .read()
            .expect("jobs lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownJob(id.to_string()))
    }

    /// Registers a job and starts its pipeline on the blocking pool.
    pub fn create_job(
        self: &Arc<Self>,
        edge_list: EdgeList,
        baseline: BaseKnowledge,
        config: PipelineConfig,
    ) -> String {
        let id = uuid::Uuid::new_v4().simple().to_string();
        self.insert_job(id.clone(), now(), edge_list, baseline, config, BTreeMap::new());
        id
    }

    fn insert_job(
        self: &Arc<Self>,
        id: String,
        created_at: u64,
        edge_list: EdgeList,
        baseline: BaseKnowledge,
        config: PipelineConfig,
        user_annotations: BTreeMap<PublisherId, u8>,
    ) {
        let job = Arc::new(Job {
            status: RwLock::new(JobStatus {
                id: id.clone(),
                phase: JobPhase::Queued,
                error: None,
                created_at,
                config,
                n_records: edge_list.len(),
                diagnostics: None,
            }),
            state: RwLock::new(None),
            mutation: Mutex::new(()),
            edge_list: Arc::new(edge_list),
            baseline,
        });
        self.jobs.write().expect("jobs lock").insert(id, job.clone());
        self.write_snapshot(&job, &user_annotations);
        let store = Arc::clone(self);
        tokio::task::spawn_blocking(move || store.execute(&job, &user_annotations));
    }

    fn execute(&self, job: &Job, user_annotations: &BTreeMap<PublisherId, u8>) {
        let config = job.status.read().expect("status lock").config;
        let result = self
            .analysis_for(job, &config)
            .map_err(|e| e.to_string())
            .and_then(|analysis| {
                job.set_phase(JobPhase::Scoring);
                let mut state =
                    JobState::new(analysis, job.baseline.clone(), config.scoring).map_err(|e| e.to_string())?;
                for (publisher, &score) in user_annotations {
                    state = state
                        .apply_annotation(publisher.as_str(), i64::from(score))
                        .map_err(|e| e.to_string())?;
                }
                Ok(state)
            });
        match result {
            Ok(state) => {
                let diagnostics = state.analysis().diagnostics.clone();
                *job.state.write().expect("state lock") = Some(Arc::new(state));
                let mut status = job.status.write().expect("status lock");
                status.diagnostics = Some(diagnostics);
                status.phase = JobPhase::Done;
                tracing::info!(job = %status.id, "pipeline finished");
            }
            Err(message) => {
                let mut status = job.status.write().expect("status lock");
                tracing::warn!(job = %status.id, %message, "pipeline failed");
                status.phase = JobPhase::Failed;
                status.error = Some(message);
            }
        }
    }

    fn analysis_for(&self, job: &Job, config: &PipelineConfig) -> Result<Arc<Analysis>, tropic_core::Error> {
        {
            let cache = self.cache.lock().expect("cache lock");
            if let Some(hit) = cache
                .iter()
                .find(|c| same_analysis_config(&c.config, config) && *c.edge_list == *job.edge_list)
            {
                return Ok(hit.analysis.clone());
            }
        }
        let analysis = Arc::new(analyze((*job.edge_list).clone(), config, &mut |p| job.set_phase(p.into()))?);
        self.cache_analysis(analysis.clone());
        Ok(analysis)
    }

    /// Seeds the analysis cache so that uploading the same edge list with
    /// the same analysis settings skips the pipeline.
    pub fn cache_analysis(&self, analysis: Arc<Analysis>) {
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= ANALYSIS_CACHE_SIZE {
            cache.remove(0);
        }
        cache.push(CachedAnalysis {
            edge_list: Arc::new(analysis.edge_list.clone()),
            config: analysis.config,
            analysis,
        });
    }

    /// Registers a finished job under a fixed id, replacing any job that
    /// had it.
    pub fn insert_finished(&self, id: &str, state: JobState) {
        let analysis = state.analysis().clone();
        let job = Arc::new(Job {
            status: RwLock::new(JobStatus {
                id: id.to_string(),
                phase: JobPhase::Done,
                error: None,
                created_at: now(),
                config: analysis.config,
                n_records: analysis.edge_list.len(),
                diagnostics: Some(analysis.diagnostics.clone()),
            }),
            baseline: state.baseline().clone(),
            state: RwLock::new(Some(Arc::new(state))),
            mutation: Mutex::new(()),
            edge_list: Arc::new(analysis.edge_list.clone()),
        });
        self.jobs.write().expect("jobs lock").insert(id.to_string(), job);
    }

    pub fn status(&self, id: &str) -> Result<JobStatus, StoreError> {
        Ok(self.job(id)?.status.read().expect("status lock").clone())
    }

    /// The current state of a finished job.
    pub fn state(&self, id: &str) -> Result<Arc<JobState>, StoreError> {
        let job = self.job(id)?;
        if let Some(state) = job.current() {
            return Ok(state);
        }
        let status = job.status.read().expect("status lock");
        match status.phase {
            JobPhase::Failed => Err(StoreError::Failed(status.error.clone().unwrap_or_default())),
            phase => Err(StoreError::NotReady(phase)),
        }
    }

    fn mutate(
        &self,
        id: &str,
        f: impl FnOnce(&JobState) -> Result<JobState, GuidanceError>,
    ) -> Result<Mutation, StoreError> {
        let job = self.job(id)?;
        let _guard = job.mutation.lock().expect("mutation lock");
        let before = self.state(id)?;
        let after = Arc::new(f(&before)?);
        *job.state.write().expect("state lock") = Some(after.clone());
        self.write_snapshot(&job, after.user_annotations());
        Ok(Mutation { before, after })
    }

    pub fn annotate(&self, id: &str, publisher: &str, score: i64) -> Result<Mutation, StoreError> {
        self.mutate(id, |s| s.apply_annotation(publisher, score))
    }

    pub fn remove_annotation(&self, id: &str, publisher: &str) -> Result<Mutation, StoreError> {
        self.mutate(id, |s| s.remove_annotation(publisher))
    }

    fn snapshot_path(dir: &Path, id: &str) -> PathBuf {
        dir.join(format!("{id}.json"))
    }

    fn write_snapshot(&self, job: &Job, user_annotations: &BTreeMap<PublisherId, u8>) {
        let Some(dir) = &self.settings.snapshot_dir else {
            return;
        };
        let status = job.status.read().expect("status lock").clone();
        let snapshot = Snapshot {
            version: SNAPSHOT_VERSION,
            id: status.id.clone(),
            created_at: status.created_at,
            config: status.config,
            edges: job.edge_list.edges().to_vec(),
            base_knowledge: job.baseline.iter().map(|(p, s)| (p.clone(), s)).collect(),
            user_annotations: user_annotations.clone(),
        };
        let path = Self::snapshot_path(dir, &status.id);
        let tmp = path.with_extension("json.tmp");
        let result = fs::create_dir_all(dir)
            .and_then(|_| fs::write(&tmp, serde_json::to_vec(&snapshot).expect("snapshot serializes")))
            .and_then(|_| fs::rename(&tmp, &path));
        if let Err(e) = result {
            tracing::error!(path = %path.display(), error = %e, "could not write snapshot");
        }
    }

    /// Reloads every snapshot in the snapshot directory and re-runs its
    /// pipeline. Returns the restored job ids.
    pub fn restore_snapshots(self: &Arc<Self>) -> Result<Vec<String>, StoreError> {
        let Some(dir) = self.settings.snapshot_dir.clone() else {
            return Ok(Vec::new());
        };
        let entries = match fs::read_dir(&dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => {
                return Err(StoreError::Snapshot {
                    path: dir,
                    reason: e.to_string(),
                })
            }
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut restored = Vec::new();
        for path in paths {
            let bad = |reason: String| StoreError::Snapshot {
                path: path.clone(),
                reason,
            };
            let bytes = fs::read(&path).map_err(|e| bad(e.to_string()))?;
            let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
            if snap.version != SNAPSHOT_VERSION {
                return Err(bad(format!("unsupported version {}", snap.version)));
            }
            let edge_list = EdgeList::from_edges(snap.edges).map_err(|e| bad(e.to_string()))?;
            let baseline: BaseKnowledge = snap.base_knowledge.into_iter().collect();
            restored.push(snap.id.clone());
            self.insert_job(
                snap.id,
                snap.created_at,
                edge_list,
                baseline,
                snap.config,
                snap.user_annotations,
            );
        }
        Ok(restored)
    }
}

#[cfg(test)]
impl Store {
    /// Registers a job that stays queued because no pipeline is started.
    pub(crate) fn insert_queued(&self, id: &str) {
        let job = Arc::new(Job {
            status: RwLock::new(JobStatus {
                id: id.to_string(),
                phase: JobPhase::Queued,
                error: None,
                created_at: now(),
                config: PipelineConfig::default(),
                n_records: 0,
                diagnostics: None,
            }),
            state: RwLock::new(None),
            mutation: Mutex::new(()),
            edge_list: Arc::new(EdgeList::default()),
            baseline: BaseKnowledge::new(),
        });
        self.jobs.write().expect("jobs lock").insert(id.to_string(), job);
    }
}
