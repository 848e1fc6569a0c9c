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

//! Finds News Engagement Communities in a planted discussion and lists the
//! publishers behind each one.
//!
//! ```text
//! cargo run --release -p tropic-core --example detect_necs -- 3
//! ```

use std::collections::BTreeMap;

use tropic_core::pipeline::{analyze, PipelineConfig};
use tropic_core::synthetic::{planted_discussion, PlantedConfig};

fn main() -> Result<(), tropic_core::Error> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let planted = planted_discussion(&PlantedConfig { seed, ..Default::default() });
    let config = PipelineConfig { seed, ..Default::default() };
    let analysis = analyze(planted.edge_list.clone(), &config, &mut |phase| eprintln!("{phase:?}"))?;
    let d = &analysis.diagnostics;
    println!(
        "{} communities, {} NECs covering {} of {} URLs, modularity {:.3}",
        d.n_communities, d.n_necs, d.n_nec_urls, d.n_urls, d.modularity
    );

    let discussion = &analysis.discussion;
    for nec in &analysis.necs.necs {
        let mut by_publisher: BTreeMap<&str, usize> = BTreeMap::new();
        for &url in &nec.urls {
            let publisher = &discussion.publishers()[discussion.publisher_of(url)];
            *by_publisher.entry(publisher.as_str()).or_default() += 1;
        }
        let trusted = by_publisher
            .keys()
            .filter(|p| planted.truth.iter().any(|(id, s)| id.as_str() == **p && *s >= 60))
            .count();
        println!(
            "NEC {:>3}: {:>4} URLs from {:>2} publishers ({} trustworthy)",
            nec.id,
            nec.size(),
            by_publisher.len(),
            trusted
        );
    }
    Ok(())
}
