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

//! Community detection on the validated projection and NEC extraction.
//!
//! Communities come from Louvain modularity optimization. Node visiting
//! order is a seeded shuffle and candidate communities are scanned in
//! ascending id, so a given `(projection, resolution, seed)` always yields
//! the same partition.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::validation::ValidatedProjection;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CommunityError {
    #[error("resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("minimum NEC size must be at least 2, got {0}")]
    InvalidMinSize(usize),
}

/// Gains below this are treated as ties and do not move a node.
const MIN_GAIN: f64 = 1e-12;

/// Community label per projection node, labels numbered by smallest member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPartition {
    pub assignment: Vec<usize>,
    pub modularity: f64,
    pub resolution: f64,
    pub seed: u64,
}

impl RawPartition {
    pub fn n_communities(&self) -> usize {
        self.assignment.iter().max().map_or(0, |m| m + 1)
    }

    /// Members of each community, sorted.
    pub fn communities(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_communities()];
        for (node, &c) in self.assignment.iter().enumerate() {
            out[c].push(node);
        }
        out
    }
}

/// Weighted undirected graph for one Louvain level. `loops[i]` holds the
/// weight counted twice for the internal edges merged into node `i`.
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
}

impl Level {
    fn strength(&self, node: usize) -> f64 {
        self.loops[node] + self.adj[node].iter().map(|(_, w)| w).sum::<f64>()
    }

    fn n(&self) -> usize {
        self.adj.len()
    }

    /// Local moving phase. Returns the community of each node and whether
    /// any node moved.
    fn local_moves(&self, resolution: f64, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
        let n = self.n();
        let strength: Vec<f64> = (0..n).map(|i| self.strength(i)).collect();
        let total: f64 = strength.iter().sum();
        let mut community: Vec<usize> = (0..n).collect();
        let mut tot = strength.clone();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);

        let mut weight_to = vec![0.0f64; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &node in &order {
                let current = community[node];
                for &(nb, w) in &self.adj[node] {
                    let c = community[nb];
                    if weight_to[c] == 0.0 {
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                let k = strength[node];
                tot[current] -= k;
                let gain = |c: usize, w: f64| w - resolution * tot[c] * k / total;
                let mut best = current;
                let mut best_gain = gain(current, weight_to[current]);
                touched.sort_unstable();
                for &c in &touched {
                    let g = gain(c, weight_to[c]);
                    if g > best_gain + MIN_GAIN {
                        best = c;
                        best_gain = g;
                    }
                }
                tot[best] += k;
                if best != current {
                    community[node] = best;
                    moved = true;
                    moved_any = true;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                }
                touched.clear();
            }
            if !moved {
                break;
            }
        }
        (relabel(&community), moved_any)
    }

    fn aggregate(&self, community: &[usize]) -> Level {
        let m = community.iter().max().map_or(0, |c| c + 1);
        let mut loops = vec![0.0; m];
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
        for node in 0..self.n() {
            let c = community[node];
            loops[c] += self.loops[node];
            for &(nb, w) in &self.adj[node] {
                let d = community[nb];
                if c == d {
                    loops[c] += w;
                } else {
                    *rows[c].entry(d).or_insert(0.0) += w;
                }
            }
        }
        Level {
            adj: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
            loops,
        }
    }
}

/// Renumbers labels in order of first appearance.
fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map: BTreeMap<usize, usize> = BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Newman modularity of `assignment` on the unweighted projection, with
/// the resolution scaling the null term. Zero for an edgeless graph.
pub fn modularity(projection: &ValidatedProjection, assignment: &[usize], resolution: f64) -> f64 {
    let m = projection.n_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let n_comm = assignment.iter().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0; n_comm];
    let mut degree_sum = vec![0.0; n_comm];
    for (a, b) in projection.edges() {
        if assignment[a] == assignment[b] {
            internal[assignment[a]] += 1.0;
        }
        degree_sum[assignment[a]] += 1.0;
        degree_sum[assignment[b]] += 1.0;
    }
    internal
        .iter()
        .zip(&degree_sum)
        .map(|(l, d)| l / m - resolution * (d / (2.0 * m)).powi(2))
        .sum()
}

pub fn detect_communities(
    projection: &ValidatedProjection,
    resolution: f64,
    seed: u64,
) -> Result<RawPartition, CommunityError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(CommunityError::InvalidResolution(resolution));
    }
    let n = projection.n_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut level = Level {
        adj: projection
            .adjacency()
            .into_iter()
            .map(|row| row.into_iter().map(|b| (b, 1.0)).collect())
            .collect(),
        loops: vec![0.0; n],
    };
    let mut assignment: Vec<usize> = (0..n).collect();
    if projection.n_edges() > 0 {
        loop {
            let (community, moved) = level.local_moves(resolution, &mut rng);
            if !moved {
                break;
            }
            for c in assignment.iter_mut() {
                *c = community[*c];
            }
            level = level.aggregate(&community);
        }
    }
    let assignment = relabel(&assignment);
    Ok(RawPartition {
        modularity: modularity(projection, &assignment, resolution),
        assignment,
        resolution,
        seed,
    })
}

/// A News Engagement Community: a set of URL indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nec {
    pub id: usize,
    /// Sorted URL indices.
    pub urls: Vec<usize>,
}

impl Nec {
    pub fn size(&self) -> usize {
        self.urls.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecPartition {
    pub necs: Vec<Nec>,
    /// URL index → NEC id, for URLs inside some NEC.
    pub membership: BTreeMap<usize, usize>,
    pub modularity: f64,
    pub seed: u64,
}

impl NecPartition {
    pub fn nec_of(&self, url: usize) -> Option<usize> {
        self.membership.get(&url).copied()
    }

    pub fn contains(&self, url: usize) -> bool {
        self.membership.contains_key(&url)
    }

    pub fn n_urls(&self) -> usize {
        self.membership.len()
    }

    /// Canonical JSON encoding.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("partition serializes")
    }
}

/// Keeps communities with at least `min_size` URLs, largest first, ties
/// broken by smallest URL index.
pub fn extract_necs(raw: &RawPartition, min_size: usize) -> Result<NecPartition, CommunityError> {
    if min_size < 2 {
        return Err(CommunityError::InvalidMinSize(min_size));
    }
    let mut kept: Vec<Vec<usize>> = raw
        .communities()
        .into_iter()
        .filter(|c| c.len() >= min_size)
        .collect();
    kept.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let necs: Vec<Nec> = kept
        .into_iter()
        .enumerate()
        .map(|(id, urls)| Nec { id, urls })
        .collect();
    let membership = necs
        .iter()
        .flat_map(|n| n.urls.iter().map(move |&u| (u, n.id)))
        .collect();
    Ok(NecPartition {
        necs,
        membership,
        modularity: raw.modularity,
        seed: raw.seed,
    })
}
