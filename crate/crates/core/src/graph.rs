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

//! User–URL bipartite graph with degree bookkeeping.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingestion::{extract_publisher, EdgeList, PublisherId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("edge list is empty")]
    Empty,
}

/// Which side of the bipartite graph a node lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Layer {
    User,
    Url,
}

/// Binary biadjacency between users and URLs.
///
/// Adjacency is stored user-side only; `share_counts` runs parallel to it
/// and holds how many times the user posted each URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteGraph {
    user_labels: Vec<String>,
    url_labels: Vec<String>,
    adjacency: Vec<Vec<u32>>,
    share_counts: Vec<Vec<u32>>,
    user_degrees: Vec<u32>,
    url_degrees: Vec<u32>,
}

impl BipartiteGraph {
    /// Builds a graph from `(user, url, multiplicity)` triples. Duplicate
    /// pairs are merged by summing multiplicities.
    pub fn from_weighted_edges(
        user_labels: Vec<String>,
        url_labels: Vec<String>,
        edges: impl IntoIterator<Item = (usize, usize, u32)>,
    ) -> Result<Self, GraphError> {
        let n_users = user_labels.len();
        let n_urls = url_labels.len();
        let mut rows: Vec<BTreeMap<u32, u32>> = vec![BTreeMap::new(); n_users];
        for (user, url, count) in edges {
            if user >= n_users {
                return Err(GraphError::IndexOutOfRange { index: user, len: n_users });
            }
            if url >= n_urls {
                return Err(GraphError::IndexOutOfRange { index: url, len: n_urls });
            }
            *rows[user].entry(url as u32).or_insert(0) += count.max(1);
        }
        let mut url_degrees = vec![0u32; n_urls];
        let mut adjacency = Vec::with_capacity(n_users);
        let mut share_counts = Vec::with_capacity(n_users);
        for row in rows {
            for &url in row.keys() {
                url_degrees[url as usize] += 1;
            }
            adjacency.push(row.keys().copied().collect::<Vec<_>>());
            share_counts.push(row.values().copied().collect::<Vec<_>>());
        }
        let user_degrees = adjacency.iter().map(|a| a.len() as u32).collect();
        Ok(BipartiteGraph {
            user_labels,
            url_labels,
            adjacency,
            share_counts,
            user_degrees,
            url_degrees,
        })
    }

    /// Unlabeled graph with multiplicity one per pair; labels are `u{i}` and
    /// `url{a}`.
    pub fn from_edges(
        n_users: usize,
        n_urls: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        Self::from_weighted_edges(
            (0..n_users).map(|i| format!("u{i}")).collect(),
            (0..n_urls).map(|a| format!("url{a}")).collect(),
            edges.into_iter().map(|(i, a)| (i, a, 1)),
        )
    }

    pub fn n_users(&self) -> usize {
        self.user_labels.len()
    }

    pub fn n_urls(&self) -> usize {
        self.url_labels.len()
    }

    /// Number of distinct `(user, url)` pairs.
    pub fn n_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn user_degrees(&self) -> &[u32] {
        &self.user_degrees
    }

    pub fn url_degrees(&self) -> &[u32] {
        &self.url_degrees
    }

    pub fn degrees(&self, layer: Layer) -> &[u32] {
        match layer {
            Layer::User => &self.user_degrees,
            Layer::Url => &self.url_degrees,
        }
    }

    pub fn user_label(&self, user: usize) -> &str {
        &self.user_labels[user]
    }

    pub fn url_label(&self, url: usize) -> &str {
        &self.url_labels[url]
    }

    pub fn user_labels(&self) -> &[String] {
        &self.user_labels
    }

    pub fn url_labels(&self) -> &[String] {
        &self.url_labels
    }

    /// Sorted URL indices shared by `user`.
    pub fn neighbors(&self, user: usize) -> Result<&[u32], GraphError> {
        self.adjacency
            .get(user)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange {
                index: user,
                len: self.n_users(),
            })
    }

    /// Share multiplicities aligned with [`neighbors`](Self::neighbors).
    pub fn share_counts(&self, user: usize) -> Result<&[u32], GraphError> {
        self.share_counts
            .get(user)
            .map(Vec::as_slice)
            .ok_or(GraphError::IndexOutOfRange {
                index: user,
                len: self.n_users(),
            })
    }

    /// Sorted user indices per URL.
    pub fn url_adjacency(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = self
            .url_degrees
            .iter()
            .map(|&d| Vec::with_capacity(d as usize))
            .collect();
        for (user, row) in self.adjacency.iter().enumerate() {
            for &url in row {
                out[url as usize].push(user as u32);
            }
        }
        out
    }

    pub fn degree_classes(&self) -> DegreeClasses {
        DegreeClasses {
            user_classes: group_by_degree(&self.user_degrees),
            url_classes: group_by_degree(&self.url_degrees),
        }
    }
}

/// Nodes of one layer sharing a degree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeClass {
    pub degree: u32,
    pub members: Vec<usize>,
}

/// Equal-degree partition of both layers, classes sorted by degree.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegreeClasses {
    pub user_classes: Vec<DegreeClass>,
    pub url_classes: Vec<DegreeClass>,
}

impl DegreeClasses {
    pub fn classes(&self, layer: Layer) -> &[DegreeClass] {
        match layer {
            Layer::User => &self.user_classes,
            Layer::Url => &self.url_classes,
        }
    }
}

fn group_by_degree(degrees: &[u32]) -> Vec<DegreeClass> {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (node, &d) in degrees.iter().enumerate() {
        groups.entry(d).or_default().push(node);
    }
    groups
        .into_iter()
        .map(|(degree, members)| DegreeClass { degree, members })
        .collect()
}

/// Builds the graph from an edge list. Users and URLs are indexed in
/// lexicographic order of their identifiers.
pub fn build_bipartite(edge_list: &EdgeList) -> Result<BipartiteGraph, GraphError> {
    if edge_list.is_empty() {
        return Err(GraphError::Empty);
    }
    let counts = edge_list.counts();
    let mut users: Vec<&str> = counts.keys().map(|(u, _)| u.as_str()).collect();
    users.dedup();
    let mut urls: Vec<&str> = counts.keys().map(|(_, url)| url.as_str()).collect();
    urls.sort_unstable();
    urls.dedup();
    let url_index: HashMap<&str, usize> = urls.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let user_index: HashMap<&str, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let triples: Vec<(usize, usize, u32)> = counts
        .iter()
        .map(|((user, url), &c)| (user_index[user.as_str()], url_index[url.as_str()], c))
        .collect();
    BipartiteGraph::from_weighted_edges(
        users.into_iter().map(str::to_string).collect(),
        urls.into_iter().map(str::to_string).collect(),
        triples,
    )
}

/// A bipartite graph together with the publisher of every URL.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discussion {
    pub graph: BipartiteGraph,
    publishers: Vec<PublisherId>,
    url_publisher: Vec<u32>,
}

impl Discussion {
    pub fn new(graph: BipartiteGraph) -> Result<Self, crate::ingestion::IngestError> {
        let hosts = graph
            .url_labels()
            .iter()
            .map(|url| extract_publisher(url))
            .collect::<Result<Vec<_>, _>>()?;
        let mut publishers = hosts.clone();
        publishers.sort();
        publishers.dedup();
        let url_publisher = hosts
            .iter()
            .map(|h| publishers.binary_search(h).expect("publisher present") as u32)
            .collect();
        Ok(Discussion {
            graph,
            publishers,
            url_publisher,
        })
    }

    pub fn from_edge_list(edge_list: &EdgeList) -> Result<Self, crate::Error> {
        Ok(Self::new(build_bipartite(edge_list)?)?)
    }

    /// Publishers sorted by id.
    pub fn publishers(&self) -> &[PublisherId] {
        &self.publishers
    }

    pub fn publisher_index(&self, publisher: &PublisherId) -> Option<usize> {
        self.publishers.binary_search(publisher).ok()
    }

    pub fn publisher_of(&self, url: usize) -> usize {
        self.url_publisher[url] as usize
    }

    /// URL indices per publisher, each list sorted.
    pub fn publisher_urls(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.publishers.len()];
        for (url, &p) in self.url_publisher.iter().enumerate() {
            out[p as usize].push(url);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::Edge;
    use proptest::prelude::*;

    pub(crate) fn fixture() -> BipartiteGraph {
        BipartiteGraph::from_edges(3, 3, [(0, 0), (0, 1), (1, 0), (1, 2), (2, 1)]).unwrap()
    }

    #[test]
    fn binarizes_multiplicities() {
        let edges = vec![
            Edge { url: "https://a.com/alpha".into(), user_id: "u1".into() },
            Edge { url: "https://a.com/alpha".into(), user_id: "u1".into() },
            Edge { url: "https://a.com/beta".into(), user_id: "u1".into() },
            Edge { url: "https://a.com/alpha".into(), user_id: "u2".into() },
        ];
        let g = build_bipartite(&EdgeList::from_edges(edges).unwrap()).unwrap();
        assert_eq!(g.user_degrees(), &[2, 1]);
        assert_eq!(g.url_degrees(), &[2, 1]);
        assert_eq!(g.share_counts(0).unwrap(), &[2, 1]);
        assert_eq!(g.n_edges(), 3);
    }

    #[test]
    fn single_pair() {
        let list = EdgeList::from_edges(vec![Edge {
            url: "https://a.com/x".into(),
            user_id: "u".into(),
        }])
        .unwrap();
        let g = build_bipartite(&list).unwrap();
        assert_eq!((g.n_users(), g.n_urls()), (1, 1));
        assert_eq!(g.user_degrees(), &[1]);
        assert_eq!(g.url_degrees(), &[1]);
    }

    #[test]
    fn fixture_degrees_and_neighbors() {
        let g = fixture();
        assert_eq!(g.user_degrees(), &[2, 2, 1]);
        assert_eq!(g.url_degrees(), &[2, 2, 1]);
        assert_eq!(g.neighbors(0).unwrap(), &[0, 1]);
        assert_eq!(
            g.neighbors(3),
            Err(GraphError::IndexOutOfRange { index: 3, len: 3 })
        );
        let isolated = BipartiteGraph::from_edges(2, 1, [(0, 0)]).unwrap();
        assert!(isolated.neighbors(1).unwrap().is_empty());
    }

    #[test]
    fn degree_class_examples() {
        let classes = fixture().degree_classes();
        assert_eq!(
            classes.user_classes,
            vec![
                DegreeClass { degree: 1, members: vec![2] },
                DegreeClass { degree: 2, members: vec![0, 1] },
            ]
        );
        let distinct = BipartiteGraph::from_edges(3, 3, [(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (2, 2)]).unwrap();
        assert!(distinct.degree_classes().user_classes.iter().all(|c| c.members.len() == 1));
        let empty = BipartiteGraph::from_edges(0, 0, []).unwrap();
        assert_eq!(empty.degree_classes(), DegreeClasses::default());
    }

    #[test]
    fn discussion_groups_urls_by_publisher() {
        let edges = vec![
            Edge { url: "https://www.b.com/1".into(), user_id: "u1".into() },
            Edge { url: "https://a.com/1".into(), user_id: "u1".into() },
            Edge { url: "https://b.com/2".into(), user_id: "u2".into() },
        ];
        let d = Discussion::from_edge_list(&EdgeList::from_edges(edges).unwrap()).unwrap();
        let names: Vec<&str> = d.publishers().iter().map(PublisherId::as_str).collect();
        assert_eq!(names, vec!["a.com", "b.com"]);
        assert_eq!(d.publisher_urls(), vec![vec![0], vec![1, 2]]);
    }

    proptest! {
        #[test]
        fn handshake_and_class_reconstruction(
            edges in prop::collection::vec((0usize..15, 0usize..20), 0..120)
        ) {
            let g = BipartiteGraph::from_edges(15, 20, edges.clone()).unwrap();
            let su: u64 = g.user_degrees().iter().map(|&d| d as u64).sum();
            let sa: u64 = g.url_degrees().iter().map(|&d| d as u64).sum();
            prop_assert_eq!(su, sa);
            prop_assert_eq!(su as usize, g.n_edges());
            let mut distinct = edges.clone();
            distinct.sort();
            distinct.dedup();
            prop_assert_eq!(distinct.len(), g.n_edges());

            let classes = g.degree_classes();
            for layer in [Layer::User, Layer::Url] {
                let degrees = g.degrees(layer);
                let mut rebuilt = vec![u32::MAX; degrees.len()];
                for class in classes.classes(layer) {
                    for &m in &class.members {
                        prop_assert_eq!(rebuilt[m], u32::MAX);
                        rebuilt[m] = class.degree;
                    }
                }
                prop_assert_eq!(rebuilt.as_slice(), degrees);
            }
            for u in 0..15 {
                let row = g.neighbors(u).unwrap();
                prop_assert!(row.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
