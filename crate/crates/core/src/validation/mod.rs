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

//! Statistically validated projection of the graph onto the URL layer.
//!
//! Under the null model the number of users sharing both URLs `a` and `b`
//! is a sum of independent Bernoulli variables with success probabilities
//! `p_ia * p_ib`. Each co-shared pair is tested against the upper tail of
//! that distribution and the resulting p-values go through
//! Benjamini–Hochberg at level `alpha`.

mod fdr;
mod tail;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bicm::{pair_probability, BicmModel, Fitness};
use crate::graph::BipartiteGraph;

pub use fdr::bh_threshold;
pub use tail::{poisson_binomial_sf, poisson_binomial_sf_grouped, poisson_sf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ValidationError {
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("p-value {0} outside [0, 1]")]
    InvalidPValue(f64),
    #[error("index {index} out of range for {len} URLs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("model has {model} users/URLs but graph has {graph}")]
    DimensionMismatch { model: usize, graph: usize },
}

/// Above this many uncertain users the Poisson approximation replaces the
/// exact tail in [`TailMode::Auto`].
pub const DEFAULT_MAX_EXACT_USERS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailMode {
    Exact,
    Poisson,
    /// Exact when at most this many users have `0 < q < 1`.
    Auto { max_exact_users: usize },
}

impl Default for TailMode {
    fn default() -> Self {
        TailMode::Auto {
            max_exact_users: DEFAULT_MAX_EXACT_USERS,
        }
    }
}

/// Co-share counts `V_ab` for URL pairs with `a < b` and `V_ab >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CooccurrenceTable {
    /// Sorted by `(a, b)`.
    pairs: Vec<(u32, u32, u32)>,
}

impl CooccurrenceTable {
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.pairs
            .iter()
            .map(|&(a, b, v)| ((a as usize, b as usize), v))
    }

    pub fn get(&self, a: usize, b: usize) -> Option<u32> {
        let key = (a.min(b) as u32, a.max(b) as u32);
        self.pairs
            .binary_search_by(|&(x, y, _)| (x, y).cmp(&key))
            .ok()
            .map(|i| self.pairs[i].2)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

pub fn count_cooccurrences(graph: &BipartiteGraph) -> CooccurrenceTable {
    let mut counts: HashMap<(u32, u32), u32> = HashMap::new();
    for user in 0..graph.n_users() {
        let row = graph.neighbors(user).expect("user in range");
        for (i, &a) in row.iter().enumerate() {
            for &b in &row[i + 1..] {
                *counts.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    let mut pairs: Vec<(u32, u32, u32)> = counts.into_iter().map(|((a, b), v)| (a, b, v)).collect();
    pairs.sort_unstable();
    CooccurrenceTable { pairs }
}

/// URL-URL graph of pairs surviving validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidatedProjection {
    n_nodes: usize,
    /// Sorted `(a, b)` pairs with `a < b`.
    edges: Vec<(u32, u32)>,
    /// P-value of every tested pair, sorted by pair.
    pvalues: Vec<((u32, u32), f64)>,
    threshold: Option<f64>,
}

impl ValidatedProjection {
    /// Projection with the given edges and no p-value record.
    pub fn from_edges(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut edges: Vec<(u32, u32)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.min(b) as u32, a.max(b) as u32))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        ValidatedProjection {
            n_nodes,
            edges,
            pvalues: Vec::new(),
            threshold: None,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(a, b)| (a as usize, b as usize))
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        let key = (a.min(b) as u32, a.max(b) as u32);
        self.edges.binary_search(&key).is_ok()
    }

    pub fn pvalues(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.pvalues
            .iter()
            .map(|&((a, b), p)| ((a as usize, b as usize), p))
    }

    pub fn n_tested(&self) -> usize {
        self.pvalues.len()
    }

    /// The FDR cutoff that was applied, if any pair was significant.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for (a, b) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj.iter_mut().for_each(|row| row.sort_unstable());
        adj
    }
}

fn pvalue_for_groups(
    groups: &[(Fitness, usize)],
    a: Fitness,
    b: Fitness,
    observed: u32,
    mode: TailMode,
) -> f64 {
    let mut certain = 0usize;
    let mut uncertain: Vec<(f64, usize)> = Vec::with_capacity(groups.len());
    for &(user, count) in groups {
        let q = pair_probability(user, a) * pair_probability(user, b);
        if q >= 1.0 {
            certain += count;
        } else if q > 0.0 {
            uncertain.push((q, count));
        }
    }
    let Some(needed) = (observed as usize).checked_sub(certain) else {
        return 1.0;
    };
    let n: usize = uncertain.iter().map(|(_, c)| c).sum();
    let exact = match mode {
        TailMode::Exact => true,
        TailMode::Poisson => false,
        TailMode::Auto { max_exact_users } => n <= max_exact_users,
    };
    if exact {
        poisson_binomial_sf_grouped(uncertain, needed)
    } else {
        let lambda: f64 = uncertain.iter().map(|(q, c)| q * *c as f64).sum();
        poisson_sf(lambda, needed)
    }
}

/// `P(V_ab >= observed)` under the null model.
pub fn pair_pvalue(
    model: &BicmModel,
    a: usize,
    b: usize,
    observed: u32,
    mode: TailMode,
) -> Result<f64, ValidationError> {
    let fit = model.url_fitness();
    for index in [a, b] {
        if index >= fit.len() {
            return Err(ValidationError::IndexOutOfRange { index, len: fit.len() });
        }
    }
    Ok(pvalue_for_groups(&model.user_groups(), fit[a], fit[b], observed, mode))
}

/// Tests every co-shared URL pair and keeps those at or below the
/// Benjamini–Hochberg cutoff. Pairs never co-shared are not hypotheses.
pub fn validate_projection(
    graph: &BipartiteGraph,
    model: &BicmModel,
    alpha: f64,
    mode: TailMode,
) -> Result<ValidatedProjection, ValidationError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(ValidationError::InvalidAlpha(alpha));
    }
    if model.n_users() != graph.n_users() {
        return Err(ValidationError::DimensionMismatch {
            model: model.n_users(),
            graph: graph.n_users(),
        });
    }
    if model.n_urls() != graph.n_urls() {
        return Err(ValidationError::DimensionMismatch {
            model: model.n_urls(),
            graph: graph.n_urls(),
        });
    }
    let table = count_cooccurrences(graph);
    let groups = model.user_groups();
    let fit = model.url_fitness();
    let pvalues: Vec<((u32, u32), f64)> = table
        .pairs
        .par_iter()
        .map(|&(a, b, v)| {
            let p = pvalue_for_groups(&groups, fit[a as usize], fit[b as usize], v, mode);
            ((a, b), p)
        })
        .collect();
    let raw: Vec<f64> = pvalues.iter().map(|(_, p)| *p).collect();
    let threshold = bh_threshold(&raw, alpha)?;
    let edges = match threshold {
        Some(cut) => pvalues
            .iter()
            .filter(|(_, p)| *p <= cut)
            .map(|(pair, _)| *pair)
            .collect(),
        None => Vec::new(),
    };
    Ok(ValidatedProjection {
        n_nodes: graph.n_urls(),
        edges,
        pvalues,
        threshold,
    })
}
