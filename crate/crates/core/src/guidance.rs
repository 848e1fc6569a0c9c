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

//! Per-publisher statistics, annotation suggestions and the mutable job
//! state that annotations act on.
//!
//! Annotations only ever touch scoring. The graph, the BiCM fit, the
//! projection and the NEC partition live in a shared [`Analysis`] that is
//! never rebuilt after the pipeline finishes.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::community::NecPartition;
use crate::graph::Discussion;
use crate::ingestion::{BaseKnowledge, PublisherId, MAX_SCORE};
use crate::pipeline::Analysis;
use crate::scoring::{
    profile_voters, score_with_profiles, select_voters, PublisherRecord, RecordState, ScoringConfig,
    ScoringError, VoterProfile,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GuidanceError {
    #[error("{0} does not appear in the discussion")]
    UnknownPublisher(String),
    #[error("score {0} outside [0, 100]")]
    ScoreOutOfRange(i64),
    #[error("{0} has no user annotation to remove")]
    NotUserAnnotated(PublisherId),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublisherStats {
    /// Voters who shared any of this publisher's URLs.
    pub n_voters: usize,
    pub n_nec_urls: usize,
    pub n_urls: usize,
    pub n_shares: u64,
}

/// Statistics for every publisher, indexed like `discussion.publishers()`.
pub fn compute_stats(discussion: &Discussion, necs: &NecPartition) -> Vec<PublisherStats> {
    let graph = &discussion.graph;
    let mut stats = vec![PublisherStats::default(); discussion.publishers().len()];
    for url in 0..graph.n_urls() {
        let s = &mut stats[discussion.publisher_of(url)];
        s.n_urls += 1;
        s.n_nec_urls += usize::from(necs.contains(url));
    }
    let mut seen = Vec::new();
    for user in select_voters(discussion, necs) {
        seen.clear();
        seen.extend(
            graph
                .neighbors(user)
                .expect("user in range")
                .iter()
                .map(|&u| discussion.publisher_of(u as usize)),
        );
        seen.sort_unstable();
        seen.dedup();
        for &p in &seen {
            stats[p].n_voters += 1;
        }
    }
    for user in 0..graph.n_users() {
        let urls = graph.neighbors(user).expect("user in range");
        let counts = graph.share_counts(user).expect("user in range");
        for (&url, &c) in urls.iter().zip(counts) {
            stats[discussion.publisher_of(url as usize)].n_shares += u64::from(c);
        }
    }
    stats
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactRank {
    pub publisher: PublisherId,
    /// Currently unprofilable voters with a NEC share of this publisher.
    pub unlocked_voters: usize,
    pub n_nec_urls: usize,
    pub n_voters: usize,
}

/// Histogram and count aggregates for the dashboard plots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    /// Annotated scores in buckets `[0,10), [10,20), ..., [90,100]`.
    pub score_histogram: [usize; 10],
    pub counts: StateCounts,
    /// Prediction confidences in buckets `[0,0.1), ..., [0.9,1.0]`.
    pub confidence_histogram: [usize; 10],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateCounts {
    pub annotated: usize,
    pub predicted: usize,
    pub unclassified: usize,
}

fn bucket(value: f64, width: f64) -> usize {
    ((value / width).floor().max(0.0) as usize).min(9)
}

pub fn summarize(records: &[PublisherRecord]) -> Summary {
    let mut summary = Summary {
        score_histogram: [0; 10],
        counts: StateCounts::default(),
        confidence_histogram: [0; 10],
    };
    for r in records {
        match r.state {
            RecordState::Annotated => {
                summary.counts.annotated += 1;
                summary.score_histogram[bucket(r.score.unwrap_or(0.0), 10.0)] += 1;
            }
            RecordState::Predicted => {
                summary.counts.predicted += 1;
                summary.confidence_histogram[bucket(r.confidence, 0.1)] += 1;
            }
            RecordState::Unclassified => summary.counts.unclassified += 1,
        }
    }
    summary
}

/// A finished job: the fixed analysis plus the current annotations and the
/// records they imply. Mutations return a new state.
#[derive(Debug, Clone)]
pub struct JobState {
    analysis: Arc<Analysis>,
    baseline: BaseKnowledge,
    user_annotations: BTreeMap<PublisherId, u8>,
    knowledge: BaseKnowledge,
    config: ScoringConfig,
    voters: Arc<Vec<usize>>,
    stats: Arc<Vec<PublisherStats>>,
    profiles: BTreeMap<usize, VoterProfile>,
    records: Vec<PublisherRecord>,
}

impl JobState {
    pub fn new(
        analysis: Arc<Analysis>,
        baseline: BaseKnowledge,
        config: ScoringConfig,
    ) -> Result<Self, GuidanceError> {
        let voters = Arc::new(select_voters(&analysis.discussion, &analysis.necs));
        let stats = Arc::new(compute_stats(&analysis.discussion, &analysis.necs));
        let mut state = JobState {
            analysis,
            knowledge: baseline.clone(),
            baseline,
            user_annotations: BTreeMap::new(),
            config,
            voters,
            stats,
            profiles: BTreeMap::new(),
            records: Vec::new(),
        };
        state.rescore()?;
        Ok(state)
    }

    fn rescore(&mut self) -> Result<(), GuidanceError> {
        let a = &self.analysis;
        self.profiles = profile_voters(&a.discussion, &a.necs, &self.knowledge);
        self.records = score_with_profiles(&a.discussion, &self.profiles, &self.knowledge, &self.stats, &self.config)?;
        Ok(())
    }

    pub fn analysis(&self) -> &Arc<Analysis> {
        &self.analysis
    }

    pub fn config(&self) -> &ScoringConfig {
        &self.config
    }

    /// The uploaded base knowledge, without user annotations.
    pub fn baseline(&self) -> &BaseKnowledge {
        &self.baseline
    }

    pub fn user_annotations(&self) -> &BTreeMap<PublisherId, u8> {
        &self.user_annotations
    }

    /// Baseline overlaid with user annotations.
    pub fn knowledge(&self) -> &BaseKnowledge {
        &self.knowledge
    }

    /// One record per publisher, sorted by publisher id.
    pub fn records(&self) -> &[PublisherRecord] {
        &self.records
    }

    pub fn record(&self, publisher: &PublisherId) -> Option<&PublisherRecord> {
        let i = self.analysis.discussion.publisher_index(publisher)?;
        self.records.get(i)
    }

    pub fn voters(&self) -> &[usize] {
        &self.voters
    }

    pub fn profiles(&self) -> &BTreeMap<usize, VoterProfile> {
        &self.profiles
    }

    /// Voters without a profile under the current annotations.
    pub fn unprofilable_voters(&self) -> usize {
        self.voters.len() - self.profiles.len()
    }

    pub fn compute_stats(&self) -> BTreeMap<PublisherId, PublisherStats> {
        self.analysis
            .discussion
            .publishers()
            .iter()
            .cloned()
            .zip(self.stats.iter().copied())
            .collect()
    }

    /// Unannotated publishers ordered by how many voters annotating them
    /// would profile, then by NEC URL count, then by id.
    pub fn rank_candidates(&self) -> Vec<ImpactRank> {
        let discussion = &self.analysis.discussion;
        let graph = &discussion.graph;
        let necs = &self.analysis.necs;
        let mut unlocked = vec![0usize; discussion.publishers().len()];
        let mut touched = BTreeSet::new();
        for &v in self.voters.iter() {
            if self.profiles.contains_key(&v) {
                continue;
            }
            touched.clear();
            for &url in graph.neighbors(v).expect("voter in range") {
                if necs.contains(url as usize) {
                    touched.insert(discussion.publisher_of(url as usize));
                }
            }
            for &p in &touched {
                unlocked[p] += 1;
            }
        }
        let mut ranks: Vec<ImpactRank> = discussion
            .publishers()
            .iter()
            .enumerate()
            .filter(|(_, p)| !self.knowledge.contains(p))
            .map(|(i, p)| ImpactRank {
                publisher: p.clone(),
                unlocked_voters: unlocked[i],
                n_nec_urls: self.stats[i].n_nec_urls,
                n_voters: self.stats[i].n_voters,
            })
            .collect();
        ranks.sort_by(|a, b| {
            b.unlocked_voters
                .cmp(&a.unlocked_voters)
                .then(b.n_nec_urls.cmp(&a.n_nec_urls))
                .then_with(|| a.publisher.cmp(&b.publisher))
        });
        ranks
    }

    fn resolve(&self, publisher: &str) -> Result<PublisherId, GuidanceError> {
        let unknown = || GuidanceError::UnknownPublisher(publisher.to_string());
        let id = PublisherId::from_domain(publisher).map_err(|_| unknown())?;
        self.analysis.discussion.publisher_index(&id).ok_or_else(unknown)?;
        Ok(id)
    }

    /// Records a user annotation and rescores. Overrides any baseline score
    /// for the same publisher.
    pub fn apply_annotation(&self, publisher: &str, score: i64) -> Result<JobState, GuidanceError> {
        let id = self.resolve(publisher)?;
        if !(0..=i64::from(MAX_SCORE)).contains(&score) {
            return Err(GuidanceError::ScoreOutOfRange(score));
        }
        let score = score as u8;
        let mut next = self.clone();
        next.user_annotations.insert(id.clone(), score);
        next.knowledge
            .insert(id, score)
            .expect("score already range checked");
        next.rescore()?;
        Ok(next)
    }

    /// Drops a user annotation, falling back to the baseline score if the
    /// publisher had one.
    pub fn remove_annotation(&self, publisher: &str) -> Result<JobState, GuidanceError> {
        let id = self.resolve(publisher)?;
        let mut next = self.clone();
        if next.user_annotations.remove(&id).is_none() {
            return Err(GuidanceError::NotUserAnnotated(id));
        }
        match self.baseline.get(&id) {
            Some(score) => {
                next.knowledge.insert(id, score).expect("baseline score valid");
            }
            None => {
                next.knowledge.remove(&id);
            }
        }
        next.rescore()?;
        Ok(next)
    }

    pub fn summary(&self) -> Summary {
        summarize(&self.records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{parse_edge_list, ParseOptions};
    use crate::pipeline::{run_pipeline, PipelineConfig};
    use crate::synthetic::{planted_discussion, PlantedConfig};
    use proptest::prelude::*;

    fn pid(s: &str) -> PublisherId {
        PublisherId::from_domain(s).unwrap()
    }

    fn record(publisher: &str, state: RecordState, score: Option<f64>, confidence: f64) -> PublisherRecord {
        PublisherRecord {
            publisher: pid(publisher),
            state,
            score,
            confidence,
            label: None,
            stats: PublisherStats::default(),
        }
    }

    /// A job built from the planted generator, small enough for unit tests.
    fn planted_state(seed: u64) -> JobState {
        let planted = planted_discussion(&PlantedConfig { n_users: 200, n_publishers: 20, seed, ..Default::default() });
        run_pipeline(planted.edge_list, planted.base_knowledge, &PipelineConfig::default(), &mut |_| {}).unwrap()
    }

    #[test]
    fn stats_count_urls_voters_and_shares() {
        // b.com: 3 URLs (one in the NEC), 4 voters, 7 shares.
        let rows = "url,user_id\n\
            https://a.com/1,v1\nhttps://a.com/2,v1\nhttps://a.com/1,v2\nhttps://a.com/2,v2\n\
            https://a.com/1,v3\nhttps://a.com/2,v3\nhttps://a.com/1,v4\nhttps://a.com/2,v4\n\
            https://b.com/1,v1\nhttps://b.com/1,v1\nhttps://b.com/2,v2\nhttps://b.com/3,v3\n\
            https://b.com/3,v3\nhttps://b.com/3,v4\nhttps://b.com/1,v4\n\
            https://c.com/1,x\n";
        let list = parse_edge_list(rows.as_bytes(), &ParseOptions::default()).unwrap();
        let discussion = Discussion::from_edge_list(&list).unwrap();
        let urls = discussion.graph.url_labels();
        let in_nec = ["https://a.com/1", "https://a.com/2", "https://b.com/1"];
        let mut next = 1;
        let assignment = urls
            .iter()
            .map(|u| {
                if in_nec.contains(&u.as_str()) {
                    0
                } else {
                    next += 1;
                    next
                }
            })
            .collect();
        let raw = crate::community::RawPartition { assignment, modularity: 0.0, resolution: 1.0, seed: 0 };
        let necs = crate::community::extract_necs(&raw, 2).unwrap();
        let stats = compute_stats(&discussion, &necs);
        let b = discussion.publisher_index(&pid("b.com")).unwrap();
        let c = discussion.publisher_index(&pid("c.com")).unwrap();
        assert_eq!(stats[b], PublisherStats { n_voters: 4, n_nec_urls: 1, n_urls: 3, n_shares: 7 });
        assert_eq!(stats[c].n_nec_urls, 0);
        assert_eq!(stats[c].n_voters, 0);
    }

    #[test]
    fn summary_buckets() {
        let s = summarize(&[
            record("a.com", RecordState::Annotated, Some(95.0), 1.0),
            record("b.com", RecordState::Annotated, Some(90.0), 1.0),
            record("c.com", RecordState::Annotated, Some(85.0), 1.0),
        ]);
        assert_eq!(s.score_histogram[9], 2);
        assert_eq!(s.score_histogram[8], 1);
        let top = summarize(&[record("a.com", RecordState::Annotated, Some(100.0), 1.0)]);
        assert_eq!(top.score_histogram[9], 1);

        let empty = summarize(&[]);
        assert_eq!(empty.score_histogram, [0; 10]);
        assert_eq!(empty.confidence_histogram, [0; 10]);
        assert_eq!(empty.counts, StateCounts::default());

        let mixed = summarize(&[
            record("a.com", RecordState::Annotated, Some(10.0), 1.0),
            record("b.com", RecordState::Annotated, Some(20.0), 1.0),
            record("c.com", RecordState::Predicted, Some(30.0), 0.0),
            record("d.com", RecordState::Predicted, Some(30.0), 0.45),
            record("e.com", RecordState::Predicted, Some(30.0), 1.0),
            record("f.com", RecordState::Unclassified, None, 0.0),
        ]);
        assert_eq!(mixed.counts, StateCounts { annotated: 2, predicted: 3, unclassified: 1 });
        assert_eq!(mixed.confidence_histogram[0], 1);
        assert_eq!(mixed.confidence_histogram[4], 1);
        assert_eq!(mixed.confidence_histogram[9], 1);
    }

    #[test]
    fn annotation_round_trip_and_errors() {
        let state = planted_state(3);
        let target = state
            .records()
            .iter()
            .find(|r| r.state != RecordState::Annotated)
            .unwrap()
            .publisher
            .clone();
        let necs_before = state.analysis().necs.to_json();
        let next = state.apply_annotation(target.as_str(), 75).unwrap();
        let r = next.record(&target).unwrap();
        assert_eq!((r.state, r.score, r.confidence), (RecordState::Annotated, Some(75.0), 1.0));
        assert_eq!(next.analysis().necs.to_json(), necs_before);
        assert_eq!(next.compute_stats(), state.compute_stats());

        let undone = next.remove_annotation(target.as_str()).unwrap();
        assert_eq!(undone.records(), state.records());

        let baseline = state.baseline().iter().next().unwrap().0.clone();
        assert_eq!(
            state.remove_annotation(baseline.as_str()).unwrap_err(),
            GuidanceError::NotUserAnnotated(baseline.clone())
        );
        assert!(matches!(
            state.remove_annotation("not-in-discussion.org"),
            Err(GuidanceError::UnknownPublisher(_))
        ));
        assert!(matches!(state.apply_annotation("nowhere.org", 50), Err(GuidanceError::UnknownPublisher(_))));
        assert_eq!(state.apply_annotation(target.as_str(), 101).unwrap_err(), GuidanceError::ScoreOutOfRange(101));
        assert_eq!(state.apply_annotation(target.as_str(), -1).unwrap_err(), GuidanceError::ScoreOutOfRange(-1));

        // Overriding a baseline score and then removing it restores the baseline.
        let overridden = state.apply_annotation(baseline.as_str(), 0).unwrap();
        assert_eq!(overridden.record(&baseline).unwrap().score, Some(0.0));
        let restored = overridden.remove_annotation(baseline.as_str()).unwrap();
        assert_eq!(restored.records(), state.records());
    }

    /// Counts voters with no annotated NEC share by walking the raw edge
    /// list, independently of the profile machinery.
    fn recount_unprofilable(state: &JobState) -> usize {
        let a = state.analysis();
        let nec_urls: BTreeSet<&str> = a
            .necs
            .membership
            .keys()
            .map(|&u| a.discussion.graph.url_label(u))
            .collect();
        let mut voter_has_profile: BTreeMap<&str, bool> = BTreeMap::new();
        for edge in a.edge_list.edges() {
            if !nec_urls.contains(edge.url.as_str()) {
                continue;
            }
            let annotated = crate::ingestion::extract_publisher(&edge.url)
                .map(|p| state.knowledge().contains(&p))
                .unwrap();
            *voter_has_profile.entry(edge.user_id.as_str()).or_insert(false) |= annotated;
        }
        voter_has_profile.values().filter(|&&p| !p).count()
    }

    #[test]
    fn top_candidate_unlocks_exactly_its_count() {
        for seed in 0..4 {
            let state = planted_state(seed);
            let before = recount_unprofilable(&state);
            assert_eq!(before, state.unprofilable_voters());
            let ranks = state.rank_candidates();
            let top = &ranks[0];
            let next = state.apply_annotation(top.publisher.as_str(), 50).unwrap();
            let after = recount_unprofilable(&next);
            assert_eq!(before - after, top.unlocked_voters, "seed {seed}");
            if top.unlocked_voters > 0 {
                assert!(after < before);
            }
        }
    }

    #[test]
    fn ranking_order_and_exhaustion() {
        let state = planted_state(7);
        let ranks = state.rank_candidates();
        for w in ranks.windows(2) {
            let key = |r: &ImpactRank| (std::cmp::Reverse(r.unlocked_voters), std::cmp::Reverse(r.n_nec_urls), r.publisher.clone());
            assert!(key(&w[0]) < key(&w[1]));
        }
        let unannotated: BTreeSet<_> = state
            .records()
            .iter()
            .filter(|r| r.state != RecordState::Annotated)
            .map(|r| r.publisher.clone())
            .collect();
        let ranked: BTreeSet<_> = ranks.iter().map(|r| r.publisher.clone()).collect();
        assert_eq!(ranked.len(), ranks.len());
        assert_eq!(ranked, unannotated);

        let mut all = state.clone();
        for r in &ranks {
            all = all.apply_annotation(r.publisher.as_str(), 40).unwrap();
        }
        assert!(all.rank_candidates().is_empty());
        assert_eq!(all.summary().counts.annotated, all.records().len());
    }

    #[test]
    fn stats_ignore_annotations() {
        let state = planted_state(11);
        let empty = JobState::new(state.analysis().clone(), BaseKnowledge::new(), *state.config()).unwrap();
        assert_eq!(empty.compute_stats(), state.compute_stats());
        assert!(empty.records().iter().all(|r| r.state == RecordState::Unclassified));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn annotating_never_adds_unclassified(seed in 0u64..1000, pick in 0usize..1000, score in 0i64..=100) {
            let state = planted_state(seed % 5);
            let publishers = state.analysis().discussion.publishers();
            let target = publishers[pick % publishers.len()].clone();
            let count = |s: &JobState| s.summary().counts.unclassified;
            let next = state.apply_annotation(target.as_str(), score).unwrap();
            prop_assert!(count(&next) <= count(&state));
            let c = next.summary().counts;
            prop_assert_eq!(c.annotated + c.predicted + c.unclassified, publishers.len());
            if state.user_annotations().is_empty() && !state.baseline().contains(&target) {
                let undone = next.remove_annotation(target.as_str()).unwrap();
                prop_assert_eq!(undone.records(), state.records());
            }
        }
    }
}
