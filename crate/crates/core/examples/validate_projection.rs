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

//! Projects a planted discussion onto its URLs and keeps the co-sharing
//! links that survive the false discovery rate cutoff, once with exact
//! tails and once with the Poisson approximation.
//!
//! ```text
//! cargo run --release -p tropic-core --example validate_projection -- 0.05
//! ```

use std::time::Instant;

use tropic_core::bicm::{fit_bicm, SolverConfig};
use tropic_core::graph::Discussion;
use tropic_core::synthetic::{planted_discussion, PlantedConfig};
use tropic_core::validation::{count_cooccurrences, validate_projection, TailMode};

fn main() -> Result<(), tropic_core::Error> {
    let alpha: f64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0.05);
    let planted = planted_discussion(&PlantedConfig::default());
    let discussion = Discussion::from_edge_list(&planted.edge_list)?;
    let graph = &discussion.graph;
    let model = fit_bicm(graph, &SolverConfig::default())?;
    println!("{} co-shared URL pairs", count_cooccurrences(graph).len());

    for mode in [TailMode::Exact, TailMode::Poisson] {
        let start = Instant::now();
        let projection = validate_projection(graph, &model, alpha, mode)?;
        println!(
            "{mode:?}: {} of {} pairs validated at alpha {alpha}, cutoff {:?}, {:.1?}",
            projection.n_edges(),
            projection.n_tested(),
            projection.threshold(),
            start.elapsed()
        );
    }

    // Validated links should mostly join URLs from publishers on the same
    // side of the planted split.
    let projection = validate_projection(graph, &model, alpha, TailMode::default())?;
    let side = |url: usize| {
        let publisher = &discussion.publishers()[discussion.publisher_of(url)];
        planted.is_trustworthy(publisher)
    };
    let same = projection.edges().filter(|&(a, b)| side(a) == side(b)).count();
    println!("{same} of {} validated links join same-side publishers", projection.n_edges());
    Ok(())
}
