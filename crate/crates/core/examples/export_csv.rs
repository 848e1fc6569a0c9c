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

//! Writes publisher records as CSV and reads them back.
//!
//! ```text
//! cargo run --release -p tropic-core --example export_csv -- out.csv
//! ```
//!
//! Without an argument the CSV goes to stdout.

use tropic_core::export::{read_csv, write_csv};
use tropic_core::pipeline::{run_pipeline, PipelineConfig};
use tropic_core::synthetic::{planted_discussion, PlantedConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let planted = planted_discussion(&PlantedConfig::default());
    let state = run_pipeline(planted.edge_list, planted.base_knowledge, &PipelineConfig::default(), &mut |_| {})?;

    let csv = write_csv(state.records(), false);
    match std::env::args().nth(1) {
        Some(path) => {
            std::fs::write(&path, &csv)?;
            eprintln!("wrote {} records to {path}", state.records().len());
        }
        None => print!("{csv}"),
    }

    let rows = read_csv(&csv)?;
    assert_eq!(rows.len(), state.records().len());
    let annotated_only = write_csv(state.records(), true);
    eprintln!(
        "{} rows parsed back, {} of them annotated",
        rows.len(),
        annotated_only.lines().count() - 1
    );
    Ok(())
}
