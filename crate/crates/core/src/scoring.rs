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

//! Voter selection, voter profiling and publisher prediction.
//!
//! A voter is a user who shared at least one URL inside a NEC. Their
//! profile is the share-weighted mean score of the annotated publishers
//! behind their NEC shares. An unannotated publisher gets the mean profile
//! of every profiled voter who shared any of its URLs, with a confidence
//! that grows with the number of voters and shrinks with their spread:
//!
//! ```text
//! confidence = n / (n + n0) * max(0, 1 - sd / dispersion_scale)
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::NecPartition;
use crate::graph::Discussion;
use crate::guidance::PublisherStats;
use crate::ingestion::{BaseKnowledge, PublisherId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("user {0} shared no NEC URL")]
    NotAVoter(usize),
    #[error("{0} is already annotated")]
    AlreadyAnnotated(PublisherId),
    #[error("{0} does not appear in the discussion")]
    UnknownPublisher(PublisherId),
    #[error("score {0} outside [0, 100]")]
    ScoreOutOfRange(f64),
    #[error("invalid scoring configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoringConfig {
    /// Scores at or above this are labelled trustworthy.
    pub label_threshold: f64,
    /// Voter count at which the evidence factor reaches one half.
    pub confidence_halfpoint: u32,
    /// Profile standard deviation at which confidence drops to zero.
    pub dispersion_scale: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            label_threshold: 60.0,
            confidence_halfpoint: 5,
            dispersion_scale: 50.0,
        }
    }
}

impl ScoringConfig {
    pub fn validate(&self) -> Result<(), ScoringError> {
        if !(self.label_threshold > 0.0 && self.label_threshold < 100.0) {
            return Err(ScoringError::InvalidConfig("label threshold must lie in (0, 100)"));
        }
        if self.confidence_halfpoint < 1 {
            return Err(ScoringError::InvalidConfig("confidence halfpoint must be at least 1"));
        }
        if !(self.dispersion_scale > 0.0 && self.dispersion_scale.is_finite()) {
            return Err(ScoringError::InvalidConfig("dispersion scale must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordState {
    Annotated,
    Predicted,
    Unclassified,
}

impl RecordState {
    pub fn letter(self) -> char {
        match self {
            RecordState::Annotated => 'A',
            RecordState::Predicted => 'P',
            RecordState::Unclassified => 'U',
        }
    }

    pub fn from_letter(c: &str) -> Option<Self> {
        match c {
            "A" => Some(RecordState::Annotated),
            "P" => Some(RecordState::Predicted),
            "U" => Some(RecordState::Unclassified),
            _ => None,
        }
    }
}

/// Trustworthy (`T`) or untrustworthy (`N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    T,
    N,
}

impl Label {
    pub fn letter(self) -> char {
        match self {
            Label::T => 'T',
            Label::N => 'N',
        }
    }
}

pub fn assign_label(score: f64, config: &ScoringConfig) -> Result<Label, ScoringError> {
    if !(0.0..=100.0).contains(&score) {
        return Err(ScoringError::ScoreOutOfRange(score));
    }
    Ok(if score >= config.label_threshold {
        Label::T
    } else {
        Label::N
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoterProfile {
    pub user: usize,
    pub score: f64,
    /// Total share count behind the profile.
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublisherRecord {
    pub publisher: PublisherId,
    pub state: RecordState,
    pub score: Option<f64>,
    pub confidence: f64,
    pub label: Option<Label>,
    pub stats: PublisherStats,
}

/// Users with at least one edge to a NEC URL, ascending.
pub fn select_voters(discussion: &Discussion, necs: &NecPartition) -> Vec<usize> {
    let graph = &discussion.graph;
    (0..graph.n_users())
        .filter(|&u| {
            graph
                .neighbors(u)
                .expect("user in range")
                .iter()
                .any(|&url| necs.contains(url as usize))
        })
        .collect()
}

fn profile_unchecked(
    discussion: &Discussion,
    necs: &NecPartition,
    knowledge: &BaseKnowledge,
    user: usize,
) -> Option<VoterProfile> {
    let graph = &discussion.graph;
    let urls = graph.neighbors(user).ok()?;
    let counts = graph.share_counts(user).ok()?;
    let (mut weighted, mut support) = (0.0, 0.0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (&url, &count) in urls.iter().zip(counts) {
        let url = url as usize;
        if !necs.contains(url) {
            continue;
        }
        let publisher = &discussion.publishers()[discussion.publisher_of(url)];
        if let Some(score) = knowledge.get(publisher) {
            let score = f64::from(score);
            weighted += f64::from(count) * score;
            support += f64::from(count);
            lo = lo.min(score);
            hi = hi.max(score);
        }
    }
    (support > 0.0).then(|| VoterProfile {
        user,
        score: (weighted / support).clamp(lo, hi),
        support,
    })
}

/// Share-weighted mean annotated score over the voter's NEC shares, or
/// `None` when none of those shares belong to an annotated publisher.
pub fn profile_voter(
    discussion: &Discussion,
    necs: &NecPartition,
    knowledge: &BaseKnowledge,
    user: usize,
) -> Result<Option<VoterProfile>, ScoringError> {
    let is_voter = discussion
        .graph
        .neighbors(user)
        .map(|urls| urls.iter().any(|&u| necs.contains(u as usize)))
        .unwrap_or(false);
    if !is_voter {
        return Err(ScoringError::NotAVoter(user));
    }
    Ok(profile_unchecked(discussion, necs, knowledge, user))
}

/// Profiles of every profilable voter, keyed by user index.
pub fn profile_voters(
    discussion: &Discussion,
    necs: &NecPartition,
    knowledge: &BaseKnowledge,
) -> BTreeMap<usize, VoterProfile> {
    select_voters(discussion, necs)
        .into_iter()
        .filter_map(|u| profile_unchecked(discussion, necs, knowledge, u).map(|p| (u, p)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Prediction {
    Predicted {
        score: f64,
        confidence: f64,
        n_voters: usize,
    },
    Unclassified,
}

/// Aggregates contributing profile scores into `(score, confidence)`.
pub fn aggregate_profiles(scores: &[f64], config: &ScoringConfig) -> Option<(f64, f64)> {
    if scores.is_empty() {
        return None;
    }
    let n = scores.len() as f64;
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (scores.iter().sum::<f64>() / n).clamp(lo, hi);
    let sd = (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
    let evidence = n / (n + f64::from(config.confidence_halfpoint));
    let agreement = (1.0 - sd / config.dispersion_scale).max(0.0);
    Some((mean, evidence * agreement))
}

fn contributing_scores(
    urls: &[usize],
    profiles: &BTreeMap<usize, VoterProfile>,
    sharers: &[Vec<u32>],
) -> Vec<f64> {
    let mut users: Vec<u32> = urls.iter().flat_map(|&u| sharers[u].iter().copied()).collect();
    users.sort_unstable();
    users.dedup();
    users
        .into_iter()
        .filter_map(|u| profiles.get(&(u as usize)).map(|p| p.score))
        .collect()
}

/// Predicts the score of an unannotated publisher from the profiles of
/// the voters who shared any of its URLs.
pub fn predict_publisher(
    discussion: &Discussion,
    publisher: &PublisherId,
    profiles: &BTreeMap<usize, VoterProfile>,
    knowledge: &BaseKnowledge,
    config: &ScoringConfig,
) -> Result<Prediction, ScoringError> {
    if knowledge.contains(publisher) {
        return Err(ScoringError::AlreadyAnnotated(publisher.clone()));
    }
    let index = discussion
        .publisher_index(publisher)
        .ok_or_else(|| ScoringError::UnknownPublisher(publisher.clone()))?;
    let urls = &discussion.publisher_urls()[index];
    let sharers = discussion.graph.url_adjacency();
    let scores = contributing_scores(urls, profiles, &sharers);
    Ok(prediction_from(&scores, config))
}

fn prediction_from(scores: &[f64], config: &ScoringConfig) -> Prediction {
    match aggregate_profiles(scores, config) {
        Some((score, confidence)) => Prediction::Predicted {
            score,
            confidence,
            n_voters: scores.len(),
        },
        None => Prediction::Unclassified,
    }
}

/// One record per publisher in the discussion, sorted by publisher id.
pub fn score_all(
    discussion: &Discussion,
    necs: &NecPartition,
    knowledge: &BaseKnowledge,
    stats: &[PublisherStats],
    config: &ScoringConfig,
) -> Result<Vec<PublisherRecord>, ScoringError> {
    let profiles = profile_voters(discussion, necs, knowledge);
    score_with_profiles(discussion, &profiles, knowledge, stats, config)
}

pub(crate) fn score_with_profiles(
    discussion: &Discussion,
    profiles: &BTreeMap<usize, VoterProfile>,
    knowledge: &BaseKnowledge,
    stats: &[PublisherStats],
    config: &ScoringConfig,
) -> Result<Vec<PublisherRecord>, ScoringError> {
    config.validate()?;
    let sharers = discussion.graph.url_adjacency();
    let publisher_urls = discussion.publisher_urls();
    discussion
        .publishers()
        .iter()
        .enumerate()
        .map(|(index, publisher)| {
            let stats = stats[index];
            if let Some(score) = knowledge.get(publisher) {
                let score = f64::from(score);
                return Ok(PublisherRecord {
                    publisher: publisher.clone(),
                    state: RecordState::Annotated,
                    score: Some(score),
                    confidence: 1.0,
                    label: Some(assign_label(score, config)?),
                    stats,
                });
            }
            let scores = contributing_scores(&publisher_urls[index], profiles, &sharers);
            Ok(match prediction_from(&scores, config) {
                Prediction::Predicted { score, confidence, .. } => PublisherRecord {
                    publisher: publisher.clone(),
                    state: RecordState::Predicted,
                    score: Some(score),
                    confidence,
                    label: Some(assign_label(score, config)?),
                    stats,
                },
                Prediction::Unclassified => PublisherRecord {
                    publisher: publisher.clone(),
                    state: RecordState::Unclassified,
                    score: None,
                    confidence: 0.0,
                    label: None,
                    stats,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::community::{extract_necs, RawPartition};
    use crate::graph::{build_bipartite, Discussion};
    use crate::guidance::compute_stats;
    use crate::ingestion::{Edge, EdgeList};
    use proptest::prelude::*;

    fn pid(s: &str) -> PublisherId {
        PublisherId::from_domain(s).unwrap()
    }

    /// Builds a discussion and marks the listed URLs as one NEC.
    fn setup(rows: &[(&str, &str)], nec_urls: &[&str]) -> (Discussion, NecPartition) {
        let edges = rows
            .iter()
            .map(|(url, user)| Edge { url: url.to_string(), user_id: user.to_string() })
            .collect();
        let list = EdgeList::from_edges(edges).unwrap();
        let discussion = Discussion::new(build_bipartite(&list).unwrap()).unwrap();
        let labels = discussion.graph.url_labels();
        let mut next = 1;
        let assignment = labels
            .iter()
            .map(|l| {
                if nec_urls.contains(&l.as_str()) {
                    0
                } else {
                    next += 1;
                    next
                }
            })
            .collect();
        let raw = RawPartition { assignment, modularity: 0.0, resolution: 1.0, seed: 0 };
        let necs = extract_necs(&raw, 2).unwrap();
        (discussion, necs)
    }

    fn user(d: &Discussion, id: &str) -> usize {
        d.graph.user_labels().iter().position(|u| u == id).unwrap()
    }

    #[test]
    fn voters_are_nec_sharers() {
        let (d, necs) = setup(
            &[
                ("https://a.com/1", "u1"),
                ("https://a.com/1", "u2"),
                ("https://a.com/2", "u1"),
                ("https://b.com/1", "u3"),
            ],
            &["https://a.com/1", "https://a.com/2"],
        );
        let voters: Vec<&str> = select_voters(&d, &necs).iter().map(|&u| d.graph.user_label(u)).collect();
        assert_eq!(voters, vec!["u1", "u2"]);

        let (d, none) = setup(&[("https://a.com/1", "u1")], &[]);
        assert!(select_voters(&d, &none).is_empty());

        let (d, all) = setup(
            &[("https://a.com/1", "u1"), ("https://b.com/1", "u2")],
            &["https://a.com/1", "https://b.com/1"],
        );
        assert_eq!(select_voters(&d, &all), vec![0, 1]);
    }

    #[test]
    fn equal_weight_profile() {
        let (d, necs) = setup(
            &[
                ("https://a.com/1", "v"),
                ("https://b.com/1", "v"),
                ("https://c.com/1", "v"),
            ],
            &["https://a.com/1", "https://b.com/1", "https://c.com/1"],
        );
        let kb: BaseKnowledge = [(pid("a.com"), 95), (pid("b.com"), 90), (pid("c.com"), 85)].into_iter().collect();
        let p = profile_voter(&d, &necs, &kb, user(&d, "v")).unwrap().unwrap();
        assert_eq!(p.score, 90.0);
        assert_eq!(p.support, 3.0);
    }

    #[test]
    fn multiplicity_weighted_profile() {
        let (d, necs) = setup(
            &[
                ("https://a.com/1", "v"),
                ("https://a.com/1", "v"),
                ("https://b.com/1", "v"),
            ],
            &["https://a.com/1", "https://b.com/1"],
        );
        let kb: BaseKnowledge = [(pid("a.com"), 100), (pid("b.com"), 40)].into_iter().collect();
        let p = profile_voter(&d, &necs, &kb, 0).unwrap().unwrap();
        assert_eq!(p.score, 80.0);
    }

    #[test]
    fn unannotated_and_non_voters() {
        let (d, necs) = setup(
            &[("https://a.com/1", "v"), ("https://a.com/2", "v"), ("https://z.com/1", "w")],
            &["https://a.com/1", "https://a.com/2"],
        );
        let kb: BaseKnowledge = [(pid("z.com"), 10)].into_iter().collect();
        assert_eq!(profile_voter(&d, &necs, &kb, user(&d, "v")).unwrap(), None);
        assert_eq!(
            profile_voter(&d, &necs, &kb, user(&d, "w")),
            Err(ScoringError::NotAVoter(user(&d, "w")))
        );
    }

    #[test]
    fn aggregation_examples() {
        let config = ScoringConfig::default();
        assert_eq!(aggregate_profiles(&[80.0, 60.0], &config).unwrap().0, 70.0);
        let (score, confidence) = aggregate_profiles(&[90.0], &config).unwrap();
        assert_eq!(score, 90.0);
        assert!((confidence - 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(aggregate_profiles(&[], &config), None);
    }

    #[test]
    fn label_boundaries() {
        let c = ScoringConfig::default();
        assert_eq!(assign_label(60.0, &c), Ok(Label::T));
        assert_eq!(assign_label(59.9, &c), Ok(Label::N));
        assert_eq!(assign_label(100.0, &c), Ok(Label::T));
        assert_eq!(assign_label(0.0, &c), Ok(Label::N));
        assert_eq!(assign_label(100.5, &c), Err(ScoringError::ScoreOutOfRange(100.5)));
    }

    fn two_publisher_fixture() -> (Discussion, NecPartition) {
        setup(
            &[
                ("https://a.com/1", "v1"),
                ("https://a.com/2", "v2"),
                ("https://b.com/1", "v1"),
                ("https://b.com/1", "v2"),
                ("https://c.com/1", "x"),
            ],
            &["https://a.com/1", "https://a.com/2"],
        )
    }

    #[test]
    fn prediction_and_records() {
        let (d, necs) = two_publisher_fixture();
        let kb: BaseKnowledge = [(pid("a.com"), 75)].into_iter().collect();
        let config = ScoringConfig::default();
        let profiles = profile_voters(&d, &necs, &kb);
        assert_eq!(
            predict_publisher(&d, &pid("b.com"), &profiles, &kb, &config).unwrap(),
            Prediction::Predicted { score: 75.0, confidence: 2.0 / 7.0, n_voters: 2 }
        );
        assert_eq!(predict_publisher(&d, &pid("c.com"), &profiles, &kb, &config).unwrap(), Prediction::Unclassified);
        assert_eq!(
            predict_publisher(&d, &pid("a.com"), &profiles, &kb, &config),
            Err(ScoringError::AlreadyAnnotated(pid("a.com")))
        );
        assert_eq!(
            predict_publisher(&d, &pid("nope.com"), &profiles, &kb, &config),
            Err(ScoringError::UnknownPublisher(pid("nope.com")))
        );

        let stats = compute_stats(&d, &necs);
        let records = score_all(&d, &necs, &kb, &stats, &config).unwrap();
        let names: Vec<&str> = records.iter().map(|r| r.publisher.as_str()).collect();
        assert_eq!(names, vec!["a.com", "b.com", "c.com"]);
        assert_eq!(records[0].state, RecordState::Annotated);
        assert_eq!(records[0].score, Some(75.0));
        assert_eq!(records[0].confidence, 1.0);
        assert_eq!(records[0].label, Some(Label::T));
        assert_eq!(records[1].state, RecordState::Predicted);
        assert_eq!(records[2].state, RecordState::Unclassified);
        assert_eq!(records[2].score, None);
        assert_eq!(records[2].label, None);

        let empty = score_all(&d, &necs, &BaseKnowledge::new(), &stats, &config).unwrap();
        assert!(empty.iter().all(|r| r.state == RecordState::Unclassified && r.confidence == 0.0));
    }

    #[test]
    fn renaming_publishers_changes_nothing() {
        let (d, necs) = two_publisher_fixture();
        let (d2, necs2) = setup(
            &[
                ("https://q.com/1", "v1"),
                ("https://q.com/2", "v2"),
                ("https://r.com/1", "v1"),
                ("https://r.com/1", "v2"),
                ("https://s.com/1", "x"),
            ],
            &["https://q.com/1", "https://q.com/2"],
        );
        let config = ScoringConfig::default();
        let r1 = score_all(&d, &necs, &[(pid("a.com"), 75)].into_iter().collect(), &compute_stats(&d, &necs), &config).unwrap();
        let r2 = score_all(&d2, &necs2, &[(pid("q.com"), 75)].into_iter().collect(), &compute_stats(&d2, &necs2), &config).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!((a.state, a.score, a.confidence, a.label), (b.state, b.score, b.confidence, b.label));
        }
    }

    proptest! {
        #[test]
        fn aggregation_bounds_and_monotonicity(
            scores in prop::collection::vec(0.0f64..=100.0, 1..30),
            consensus in 0.0f64..=100.0,
            n in 1usize..40,
        ) {
            let config = ScoringConfig::default();
            let (mean, conf) = aggregate_profiles(&scores, &config).unwrap();
            let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= mean && mean <= hi);
            prop_assert!((0.0..=1.0).contains(&conf));

            let same = vec![consensus; n];
            let (m1, c1) = aggregate_profiles(&same, &config).unwrap();
            prop_assert_eq!(m1, consensus);
            prop_assert_eq!(c1, n as f64 / (n as f64 + 5.0));
            let (_, c2) = aggregate_profiles(&vec![consensus; n + 1], &config).unwrap();
            prop_assert!(c2 > c1);

            // Widening the spread at fixed count never raises confidence.
            let spread = |d: f64| -> Vec<f64> { (0..n).map(|i| if i % 2 == 0 { 50.0 - d } else { 50.0 + d }).collect() };
            let (_, narrow) = aggregate_profiles(&spread(5.0), &config).unwrap();
            let (_, wide) = aggregate_profiles(&spread(20.0), &config).unwrap();
            prop_assert!(wide <= narrow);
        }
    }
}
