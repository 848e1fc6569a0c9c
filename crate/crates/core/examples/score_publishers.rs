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

//! Scores every publisher in an edge list from a partial base knowledge
//! and prints the records.
//!
//! ```text
//! cargo run --release -p tropic-core --example score_publishers -- edges.csv base_knowledge.csv
//! ```
//!
//! Without arguments a planted discussion is used.

use std::fs::File;
use std::io::BufReader;

use tropic_core::ingestion::{parse_base_knowledge, parse_edge_list, ParseOptions};
use tropic_core::pipeline::{run_pipeline, PipelineConfig};
use tropic_core::synthetic::{planted_discussion, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (edges, knowledge) = match args.as_slice() {
        [] => {
            let planted = planted_discussion(&PlantedConfig::default());
            (planted.edge_list, planted.base_knowledge)
        }
        [edges, knowledge] => (
            parse_edge_list(BufReader::new(File::open(edges)?), &ParseOptions::default())?,
            parse_base_knowledge(BufReader::new(File::open(knowledge)?))?,
        ),
        _ => return Err("usage: score_publishers [EDGES BASE_KNOWLEDGE]".into()),
    };

    let state = run_pipeline(edges, knowledge, &PipelineConfig::default(), &mut |_| {})?;
    println!("{:<24} {:<12} {:>6} {:>10}  label  voters", "publisher", "state", "score", "confidence");
    for r in state.records() {
        let score = r.score.map(|s| format!("{s:.2}")).unwrap_or_default();
        let label = r.label.map(|l| l.letter()).unwrap_or('-');
        println!(
            "{:<24} {:<12} {:>6} {:>10.4}  {label:<5}  {}",
            r.publisher.as_str(),
            format!("{:?}", r.state),
            score,
            r.confidence,
            r.stats.n_voters
        );
    }
    let summary = state.summary();
    println!(
        "\n{} annotated, {} predicted, {} unclassified",
        summary.counts.annotated, summary.counts.predicted, summary.counts.unclassified
    );
    Ok(())
}
