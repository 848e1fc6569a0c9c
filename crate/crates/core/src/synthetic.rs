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

//! Seeded generators for test fixtures, examples and the demo dataset.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::BipartiteGraph;
use crate::ingestion::{BaseKnowledge, Edge, EdgeList, PublisherId};

/// Parameters of a discussion with two user populations: one sharing
/// mostly trustworthy outlets and one sharing mostly untrustworthy ones.
/// Within each side, URLs are grouped into topics and every user follows a
/// few of them, which is what produces co-sharing above the null model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub n_users: usize,
    /// Half trustworthy, half not (the odd one out is untrustworthy).
    pub n_publishers: usize,
    pub urls_per_publisher: usize,
    /// Fraction of each class placed in the base knowledge.
    pub annotated_fraction: f64,
    /// Each side's URLs are split into this many topics.
    pub topics_per_side: usize,
    /// Own-side topics each user follows.
    pub topics_per_user: usize,
    /// Probability that a share goes to a followed topic rather than a
    /// random topic on the other side.
    pub loyalty: f64,
    /// Minimum shares per user; the tail is Pareto.
    pub min_shares: usize,
    pub max_shares: usize,
    /// Probability that a share is immediately repeated.
    pub repeat_probability: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            n_users: 500,
            n_publishers: 60,
            urls_per_publisher: 8,
            annotated_fraction: 0.3,
            topics_per_side: 6,
            topics_per_user: 2,
            loyalty: 0.9,
            min_shares: 4,
            max_shares: 60,
            repeat_probability: 0.15,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedDiscussion {
    pub edge_list: EdgeList,
    /// Planted scores of the annotated subset.
    pub base_knowledge: BaseKnowledge,
    /// Planted score of every publisher.
    pub truth: BTreeMap<PublisherId, u8>,
}

impl PlantedDiscussion {
    pub fn is_trustworthy(&self, publisher: &PublisherId) -> Option<bool> {
        self.truth.get(publisher).map(|&s| s >= 60)
    }
}

const TRUSTWORTHY_CENTER: i32 = 90;
const UNTRUSTWORTHY_CENTER: i32 = 20;
const SCORE_SPREAD: i32 = 5;
const SHARE_TAIL_EXPONENT: f64 = 1.8;
const POPULARITY_EXPONENT: f64 = 0.8;

/// Draws a discussion whose sharing structure separates the two
/// populations. Publishers are named `outletNN.com` with the class
/// assignment shuffled, so names carry no signal.
pub fn planted_discussion(config: &PlantedConfig) -> PlantedDiscussion {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_trusted = config.n_publishers / 2;
    let mut classes: Vec<bool> = (0..config.n_publishers).map(|i| i < n_trusted).collect();
    classes.shuffle(&mut rng);

    let width = config.n_publishers.saturating_sub(1).to_string().len().max(2);
    let mut truth = BTreeMap::new();
    let mut pools: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    let mut by_class: [Vec<PublisherId>; 2] = [Vec::new(), Vec::new()];
    for (i, &trusted) in classes.iter().enumerate() {
        let domain = format!("outlet{i:0width$}.com");
        let center = if trusted { TRUSTWORTHY_CENTER } else { UNTRUSTWORTHY_CENTER };
        let score = center + rng.random_range(-SCORE_SPREAD..=SCORE_SPREAD);
        let id = PublisherId::from_domain(&domain).expect("generated domain is valid");
        truth.insert(id.clone(), score as u8);
        let side = usize::from(!trusted);
        by_class[side].push(id);
        for j in 0..config.urls_per_publisher {
            pools[side].push(format!("https://{domain}/story/{j}"));
        }
    }

    let mut base_knowledge = BaseKnowledge::new();
    for publishers in &mut by_class {
        publishers.shuffle(&mut rng);
        let k = (publishers.len() as f64 * config.annotated_fraction).round() as usize;
        for p in publishers.iter().take(k) {
            base_knowledge.insert(p.clone(), truth[p]).expect("planted score in range");
        }
    }

    // topics[side][t] lists URL indices into pools[side].
    let n_topics = config.topics_per_side.max(1);
    let mut topics: [Vec<Vec<usize>>; 2] = [vec![Vec::new(); n_topics], vec![Vec::new(); n_topics]];
    for side in 0..2 {
        let mut order: Vec<usize> = (0..pools[side].len()).collect();
        order.shuffle(&mut rng);
        for (k, url) in order.into_iter().enumerate() {
            topics[side][k % n_topics].push(url);
        }
    }
    let samplers: [Vec<Option<WeightedIndex<f64>>>; 2] = topics.clone().map(|side| {
        side.iter()
            .map(|urls| {
                let weights = (0..urls.len()).map(|r| 1.0 / ((r + 1) as f64).powf(POPULARITY_EXPONENT));
                WeightedIndex::new(weights).ok()
            })
            .collect()
    });

    let mut edges = Vec::new();
    let mut topic_ids: Vec<usize> = (0..n_topics).collect();
    for user in 0..config.n_users {
        let side = user % 2;
        topic_ids.shuffle(&mut rng);
        let followed = topic_ids[..config.topics_per_user.clamp(1, n_topics)].to_vec();
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let n_shares = ((config.min_shares as f64) * u.powf(-1.0 / SHARE_TAIL_EXPONENT)).floor() as usize;
        let n_shares = n_shares.clamp(config.min_shares.max(1), config.max_shares.max(1));
        let user_id = format!("user{user:04}");
        for _ in 0..n_shares {
            let (pool, topic) = if rng.random_bool(config.loyalty.clamp(0.0, 1.0)) {
                (side, followed[rng.random_range(0..followed.len())])
            } else {
                (1 - side, rng.random_range(0..n_topics))
            };
            let Some(sampler) = samplers[pool][topic].as_ref() else {
                continue;
            };
            let url = pools[pool][topics[pool][topic][sampler.sample(&mut rng)]].clone();
            let repeat = rng.random_bool(config.repeat_probability.clamp(0.0, 1.0));
            edges.push(Edge { url: url.clone(), user_id: user_id.clone() });
            if repeat {
                edges.push(Edge { url, user_id: user_id.clone() });
            }
        }
    }
    let edge_list = EdgeList::from_edges(edges).expect("generated edges are valid");
    PlantedDiscussion {
        edge_list,
        base_knowledge,
        truth,
    }
}

/// Draws a bipartite graph with Pareto-distributed expected degrees on both
/// layers (Chung–Lu style). Isolated nodes are kept.
pub fn heavy_tailed_bipartite(n_users: usize, n_urls: usize, mean_degree: f64, seed: u64) -> BipartiteGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pareto = |n: usize| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>().max(1e-12);
                u.powf(-1.0 / 2.2)
            })
            .collect()
    };
    let wu = pareto(n_users);
    let wa = pareto(n_urls);
    let su: f64 = wu.iter().sum();
    let sa: f64 = wa.iter().sum();
    // Scale so the expected user degree is `mean_degree`.
    let total = mean_degree * n_users as f64;
    let mut pairs = BTreeSet::new();
    for (i, &a) in wu.iter().enumerate() {
        for (j, &b) in wa.iter().enumerate() {
            let p = (total * (a / su) * (b / sa)).min(1.0);
            if rng.random_bool(p) {
                pairs.insert((i, j));
            }
        }
    }
    if pairs.is_empty() {
        pairs.insert((0, 0));
    }
    BipartiteGraph::from_edges(n_users, n_urls, pairs).expect("indices in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_shape() {
        let d = planted_discussion(&PlantedConfig::default());
        assert_eq!(d.truth.len(), 60);
        assert_eq!(d.base_knowledge.len(), 18);
        let trusted = d.truth.values().filter(|&&s| s >= 60).count();
        assert_eq!(trusted, 30);
        assert!(d.truth.values().all(|&s| (15..=25).contains(&s) || (85..=95).contains(&s)));
        let annotated_trusted = d.base_knowledge.iter().filter(|(_, s)| *s >= 60).count();
        assert_eq!(annotated_trusted, 9);
        let users: BTreeSet<&str> = d.edge_list.edges().iter().map(|e| e.user_id.as_str()).collect();
        assert_eq!(users.len(), 500);
    }

    #[test]
    fn generators_are_seeded() {
        let a = planted_discussion(&PlantedConfig { seed: 4, ..Default::default() });
        let b = planted_discussion(&PlantedConfig { seed: 4, ..Default::default() });
        let c = planted_discussion(&PlantedConfig { seed: 5, ..Default::default() });
        assert_eq!(a.edge_list, b.edge_list);
        assert_ne!(a.edge_list, c.edge_list);
        assert_eq!(heavy_tailed_bipartite(50, 80, 6.0, 1), heavy_tailed_bipartite(50, 80, 6.0, 1));
    }

    #[test]
    fn heavy_tail_is_heavy() {
        let g = heavy_tailed_bipartite(200, 500, 10.0, 9);
        let degrees = g.url_degrees();
        let max = *degrees.iter().max().unwrap() as f64;
        let mean = degrees.iter().sum::<u32>() as f64 / degrees.len() as f64;
        assert!(max > 5.0 * mean, "max {max} mean {mean}");
    }
}
