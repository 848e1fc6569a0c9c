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

//! The bundled demo dataset: a seeded synthetic discussion with a random
//! partial base knowledge, regenerated identically on every start.

use std::sync::Arc;

use tropic_core::guidance::JobState;
use tropic_core::ingestion::{BaseKnowledge, EdgeList};
use tropic_core::pipeline::run_pipeline;
use tropic_core::synthetic::{planted_discussion, PlantedConfig};

use crate::store::Store;

pub const DEMO_JOB_ID: &str = "demo";

const DEMO_SEED: u64 = 2024;

pub struct DemoFixtures {
    pub edges_csv: String,
    pub base_knowledge_csv: String,
    pub edge_list: EdgeList,
    pub base_knowledge: BaseKnowledge,
}

pub fn fixtures() -> DemoFixtures {
    let planted = planted_discussion(&PlantedConfig {
        n_users: 1500,
        n_publishers: 90,
        seed: DEMO_SEED,
        ..Default::default()
    });
    let mut edges_csv = b"url,user_id\n".to_vec();
    planted.edge_list.write_to(&mut edges_csv).expect("writing to memory");
    let mut base_knowledge_csv = b"domain,score\n".to_vec();
    planted
        .base_knowledge
        .write_to(&mut base_knowledge_csv)
        .expect("writing to memory");
    DemoFixtures {
        edges_csv: String::from_utf8(edges_csv).expect("generated text is UTF-8"),
        base_knowledge_csv: String::from_utf8(base_knowledge_csv).expect("generated text is UTF-8"),
        edge_list: planted.edge_list,
        base_knowledge: planted.base_knowledge,
    }
}

/// Runs the demo pipeline once, registers the result as job `demo` and
/// caches the analysis so that uploading the demo files is instant.
pub fn install(store: &Arc<Store>) -> Result<Arc<DemoFixtures>, tropic_core::Error> {
    let demo = fixtures();
    let config = store.settings().pipeline;
    let state: JobState = run_pipeline(
        demo.edge_list.clone(),
        demo.base_knowledge.clone(),
        &config,
        &mut |_| {},
    )?;
    store.cache_analysis(state.analysis().clone());
    store.insert_finished(DEMO_JOB_ID, state);
    Ok(Arc::new(demo))
}
