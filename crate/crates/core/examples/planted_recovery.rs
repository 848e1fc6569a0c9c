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

//! Runs the full pipeline on planted two-population discussions and
//! reports how many unannotated publishers get the right label.
//!
//! ```text
//! cargo run --release -p tropic-core --example planted_recovery -- 10
//! ```

use std::time::Instant;

use tropic_core::pipeline::{run_pipeline, PipelineConfig};
use tropic_core::scoring::{Label, RecordState};
use tropic_core::synthetic::{planted_discussion, PlantedConfig};

fn main() -> Result<(), tropic_core::Error> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let start = Instant::now();
    let mut total = 0.0;
    for seed in 0..seeds {
        let planted = planted_discussion(&PlantedConfig { seed, ..Default::default() });
        let config = PipelineConfig { seed, ..Default::default() };
        let truth = planted.truth.clone();
        let state = run_pipeline(planted.edge_list, planted.base_knowledge, &config, &mut |_| {})?;
        let (mut hit, mut n) = (0, 0);
        for r in state.records().iter().filter(|r| r.state != RecordState::Annotated) {
            n += 1;
            // Unclassified publishers count as misses.
            let trusted = truth[&r.publisher] >= 60;
            if r.label == Some(if trusted { Label::T } else { Label::N }) {
                hit += 1;
            }
        }
        let accuracy = hit as f64 / n as f64;
        total += accuracy;
        let d = &state.analysis().diagnostics;
        println!(
            "seed {seed}: accuracy {accuracy:.3} ({hit}/{n}), {} NECs over {} URLs, {} validated links, {} unprofilable voters",
            d.n_necs,
            d.n_nec_urls,
            d.n_validated_edges,
            state.unprofilable_voters()
        );
    }
    println!(
        "mean accuracy {:.3} over {seeds} seeds in {:.1?}",
        total / seeds as f64,
        start.elapsed()
    );
    Ok(())
}
