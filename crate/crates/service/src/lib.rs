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

//! HTTP service and one-shot runner around `tropic-core`.

pub mod api;
pub mod demo;
pub mod settings;
pub mod store;

use std::io::BufRead;

use tropic_core::export::write_csv;
use tropic_core::ingestion::{parse_base_knowledge, parse_edge_list, BaseKnowledge, ParseOptions};
use tropic_core::pipeline::{run_pipeline, PipelineConfig};

pub use api::{router, AppState};
pub use settings::{ConfigOverrides, Settings};
pub use store::Store;

/// Runs the whole pipeline on an edge list and optional base knowledge and
/// renders the CSV the export endpoint would serve for the same inputs.
pub fn run_to_csv<E: BufRead, B: BufRead>(
    edges: E,
    base_knowledge: Option<B>,
    config: &PipelineConfig,
    max_edges: Option<usize>,
) -> Result<String, tropic_core::Error> {
    let options = ParseOptions {
        limit: max_edges,
        ..Default::default()
    };
    let edge_list = parse_edge_list(edges, &options)?;
    let baseline = match base_knowledge {
        Some(reader) => parse_base_knowledge(reader)?,
        None => BaseKnowledge::new(),
    };
    let state = run_pipeline(edge_list, baseline, config, &mut |phase| {
        tracing::info!(?phase, "phase started");
    })?;
    Ok(write_csv(state.records(), false))
}

/// Builds the application state: restores snapshots and, in demo mode,
/// installs the demo job. Must run inside a Tokio runtime.
pub fn build_app(settings: Settings, demo: bool) -> Result<AppState, Box<dyn std::error::Error + Send + Sync>> {
    let store = Store::new(settings);
    let restored = store.restore_snapshots()?;
    if !restored.is_empty() {
        tracing::info!(count = restored.len(), "restoring jobs from snapshots");
    }
    let demo = if demo { Some(demo::install(&store)?) } else { None };
    Ok(AppState { store, demo })
}

/// Serves the API until interrupted.
pub async fn serve(settings: Settings, demo: bool) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let addr = settings.bind_addr.clone();
    let app = tokio::task::spawn_blocking(move || build_app(settings, demo)).await??;
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
