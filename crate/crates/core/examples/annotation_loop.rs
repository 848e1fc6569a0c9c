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

//! Simulates an annotator who always labels the suggested publisher with
//! its true score, starting from a small base knowledge, and reports how
//! coverage and accuracy evolve.
//!
//! ```text
//! cargo run --release -p tropic-core --example annotation_loop -- 15
//! ```

use tropic_core::pipeline::{run_pipeline, PipelineConfig};
use tropic_core::scoring::{Label, RecordState};
use tropic_core::synthetic::{planted_discussion, PlantedConfig};

fn main() -> Result<(), tropic_core::Error> {
    let rounds: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let planted = planted_discussion(&PlantedConfig { annotated_fraction: 0.05, ..Default::default() });
    let mut state = run_pipeline(
        planted.edge_list.clone(),
        planted.base_knowledge.clone(),
        &PipelineConfig::default(),
        &mut |_| {},
    )?;

    for round in 0..=rounds {
        let (mut hit, mut n) = (0, 0);
        for r in state.records().iter().filter(|r| r.state != RecordState::Annotated) {
            n += 1;
            let trusted = planted.truth[&r.publisher] >= 60;
            if r.label == Some(if trusted { Label::T } else { Label::N }) {
                hit += 1;
            }
        }
        let counts = state.summary().counts;
        println!(
            "round {round:>2}: {:>2} annotated, {:>2} predicted, {:>2} unclassified, {:>3} unprofilable voters, accuracy {hit}/{n}",
            counts.annotated,
            counts.predicted,
            counts.unclassified,
            state.unprofilable_voters()
        );
        if round == rounds {
            break;
        }
        let Some(next) = state.rank_candidates().into_iter().next() else {
            println!("no candidates left");
            break;
        };
        let score = planted.truth[&next.publisher];
        println!(
            "  annotating {} = {score} (unlocks {} voters)",
            next.publisher.as_str(),
            next.unlocked_voters
        );
        state = state.apply_annotation(next.publisher.as_str(), score as i64)?;
    }
    Ok(())
}
