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

//! Fits the bipartite configuration model to a heavy-tailed random graph
//! and compares observed and expected degrees.
//!
//! ```text
//! cargo run --release -p tropic-core --example fit_bicm -- 2000 5000
//! ```

use std::time::Instant;

use tropic_core::bicm::{fit_bicm, max_relative_residual, SolverConfig, SolverMethod};
use tropic_core::graph::Layer;
use tropic_core::synthetic::heavy_tailed_bipartite;

fn main() -> Result<(), tropic_core::Error> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().ok());
    let n_users = args.next().flatten().unwrap_or(200);
    let n_urls = args.next().flatten().unwrap_or(500);
    let graph = heavy_tailed_bipartite(n_users, n_urls, 12.0, 1);
    println!(
        "{} users x {} URLs, {} edges, max user degree {}",
        graph.n_users(),
        graph.n_urls(),
        graph.n_edges(),
        graph.user_degrees().iter().max().unwrap_or(&0)
    );

    for method in [SolverMethod::FixedPoint, SolverMethod::Newton] {
        let config = SolverConfig { method, ..Default::default() };
        let start = Instant::now();
        let model = fit_bicm(&graph, &config)?;
        println!(
            "{method:?}: {} iterations, max relative residual {:.2e}, {:.1?}",
            model.iterations(),
            max_relative_residual(&model, &graph),
            start.elapsed()
        );
    }

    let model = fit_bicm(&graph, &SolverConfig::default())?;
    let mut users: Vec<usize> = (0..graph.n_users()).collect();
    users.sort_by_key(|&u| std::cmp::Reverse(graph.user_degrees()[u]));
    println!("\nuser  observed  expected");
    for &u in users.iter().take(5) {
        let expected = model.expected_degree(Layer::User, u)?;
        println!("{u:>4}  {:>8}  {expected:>8.3}", graph.user_degrees()[u]);
    }
    Ok(())
}
