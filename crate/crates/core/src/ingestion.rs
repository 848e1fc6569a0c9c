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

//! Parsing of discussion edge lists and base-knowledge files.
//!
//! Edge lists are UTF-8 text with one `url,user_id` record per line (a tab
//! may replace the comma). A header line is skipped when the first field of
//! the first record does not parse as an absolute URL. Quoting and escaping
//! are not supported: a record must contain exactly one separator.
//!
//! Base-knowledge files hold `domain,score` records with integer scores in
//! `0..=100`.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default number of row errors collected before parsing is aborted.
pub const DEFAULT_MAX_ROW_ERRORS: usize = 100;

/// Highest score accepted in a base-knowledge file.
pub const MAX_SCORE: u8 = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: usize,
    pub reason: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("input contains no records")]
    EmptyInput,
    #[error("{count} records exceed the limit of {limit}")]
    LimitExceeded { count: usize, limit: usize },
    #[error("{} malformed row(s), first at {}", .0.len(), .0[0])]
    MalformedRows(Vec<RowError>),
    #[error("parsing aborted after {} malformed rows", .0.len())]
    ParseAborted(Vec<RowError>),
    #[error("no host in {0:?}")]
    NoHost(String),
    #[error("line {line}: score {score} outside 0..=100")]
    ScoreOutOfRange { line: usize, score: i64 },
    #[error("duplicate domain {0}")]
    DuplicateDomain(PublisherId),
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl IngestError {
    /// Row-level diagnostics carried by the error, if any.
    pub fn row_errors(&self) -> Vec<RowError> {
        match self {
            IngestError::MalformedRows(rows) | IngestError::ParseAborted(rows) => rows.clone(),
            IngestError::ScoreOutOfRange { line, score } => vec![RowError {
                line: *line,
                reason: format!("score {score} outside 0..=100"),
            }],
            IngestError::MalformedRow { line, reason } => vec![RowError {
                line: *line,
                reason: reason.clone(),
            }],
            _ => Vec::new(),
        }
    }
}

/// A news publisher, identified by the lowercase host of its URLs with any
/// leading `www.` labels removed, as long as a dotted name remains.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PublisherId(String);

impl PublisherId {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Normalizes a bare host (`www.Example.com`) or a full URL.
    pub fn from_domain(domain: &str) -> Result<Self, IngestError> {
        let domain = domain.trim();
        if domain.contains("://") {
            extract_publisher(domain)
        } else {
            extract_publisher(&format!("https://{domain}"))
                .map_err(|_| IngestError::NoHost(domain.to_string()))
        }
    }
}

impl fmt::Display for PublisherId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Maps an absolute URL to the publisher that serves it.
pub fn extract_publisher(url: &str) -> Result<PublisherId, IngestError> {
    let no_host = || IngestError::NoHost(url.to_string());
    let parsed = url::Url::parse(url.trim()).map_err(|_| no_host())?;
    let host = parsed.host_str().ok_or_else(no_host)?.to_ascii_lowercase();
    let mut domain = host.as_str();
    // `www.com` is itself a domain, so never strip down to a bare label.
    while let Some(rest) = domain.strip_prefix("www.") {
        if !rest.is_empty() && !rest.contains('.') {
            break;
        }
        domain = rest;
    }
    if domain.is_empty()
        || domain
            .chars()
            .any(|c| c == '/' || c == '?' || c == '#' || c.is_whitespace())
    {
        return Err(no_host());
    }
    Ok(PublisherId(domain.to_string()))
}

/// One sharing event: `user_id` posted `url`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub url: String,
    pub user_id: String,
}

/// The discussion as an ordered multiset of sharing events.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EdgeList {
    edges: Vec<Edge>,
    /// `(user_id, url)` → number of occurrences.
    counts: BTreeMap<(String, String), u32>,
}

impl EdgeList {
    pub fn from_edges(edges: Vec<Edge>) -> Result<Self, IngestError> {
        let mut list = EdgeList::default();
        let mut errors = Vec::new();
        for (i, edge) in edges.into_iter().enumerate() {
            match validate_edge(&edge.url, &edge.user_id) {
                Ok(()) => list.push(edge),
                Err(reason) => errors.push(RowError { line: i + 1, reason }),
            }
        }
        if !errors.is_empty() {
            return Err(IngestError::MalformedRows(errors));
        }
        if list.edges.is_empty() {
            return Err(IngestError::EmptyInput);
        }
        Ok(list)
    }

    fn push(&mut self, edge: Edge) {
        *self
            .counts
            .entry((edge.user_id.clone(), edge.url.clone()))
            .or_insert(0) += 1;
        self.edges.push(edge);
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn counts(&self) -> &BTreeMap<(String, String), u32> {
        &self.counts
    }

    pub fn multiplicity(&self, user_id: &str, url: &str) -> u32 {
        self.counts
            .get(&(user_id.to_string(), url.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Number of records, counting repeats.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Writes the records back in the comma-separated input format.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for edge in &self.edges {
            writeln!(out, "{},{}", edge.url, edge.user_id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Reject inputs with more records than this.
    pub limit: Option<usize>,
    pub max_row_errors: usize,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            limit: None,
            max_row_errors: DEFAULT_MAX_ROW_ERRORS,
        }
    }
}

impl ParseOptions {
    pub fn with_limit(limit: usize) -> Self {
        ParseOptions {
            limit: Some(limit),
            ..Default::default()
        }
    }
}

fn validate_edge(url: &str, user_id: &str) -> Result<(), String> {
    if user_id.trim().is_empty() {
        return Err("empty user id".to_string());
    }
    extract_publisher(url)
        .map(|_| ())
        .map_err(|_| format!("{url:?} is not an absolute URL with a host"))
}

fn split_record(line: &str) -> Option<(&str, &str)> {
    let sep = if line.contains('\t') { '\t' } else { ',' };
    let mut fields = line.split(sep);
    let first = fields.next()?;
    let second = fields.next()?;
    if fields.next().is_some() {
        return None;
    }
    Some((first.trim(), second.trim()))
}

/// Iterates `(line_no, line)` over non-blank lines, stripping CR.
fn lines<R: BufRead>(
    mut reader: R,
) -> impl Iterator<Item = Result<(usize, Result<String, ()>), IngestError>> {
    let mut line_no = 0;
    let mut buf = Vec::new();
    std::iter::from_fn(move || loop {
        buf.clear();
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => return None,
            Ok(_) => {
                line_no += 1;
                while matches!(buf.last(), Some(b'\n' | b'\r')) {
                    buf.pop();
                }
                match std::str::from_utf8(&buf) {
                    Ok(s) if s.trim().is_empty() => continue,
                    Ok(s) => return Some(Ok((line_no, Ok(s.to_string())))),
                    Err(_) => return Some(Ok((line_no, Err(())))),
                }
            }
            Err(e) => return Some(Err(IngestError::Io(e.to_string()))),
        }
    })
}

/// Parses an edge list. The whole input is rejected when any row is
/// malformed or when the record count exceeds `options.limit`.
pub fn parse_edge_list<R: BufRead>(
    reader: R,
    options: &ParseOptions,
) -> Result<EdgeList, IngestError> {
    let mut list = EdgeList::default();
    let mut errors: Vec<RowError> = Vec::new();
    let mut records = 0usize;
    let mut first = true;

    for item in lines(reader) {
        let (line_no, text) = item?;
        let is_first = std::mem::replace(&mut first, false);
        let Ok(text) = text else {
            errors.push(RowError {
                line: line_no,
                reason: "invalid UTF-8".to_string(),
            });
            if errors.len() >= options.max_row_errors {
                return Err(IngestError::ParseAborted(errors));
            }
            continue;
        };
        let parsed = split_record(&text);
        if is_first {
            let header = match parsed {
                Some((url, _)) => extract_publisher(url).is_err(),
                None => extract_publisher(text.trim()).is_err(),
            };
            if header {
                continue;
            }
        }
        records += 1;
        let result = match parsed {
            None => Err("expected exactly two fields".to_string()),
            Some((url, user)) => validate_edge(url, user).map(|_| (url, user)),
        };
        match result {
            Ok((url, user)) => {
                if options.limit.is_none_or(|limit| records <= limit) {
                    list.push(Edge {
                        url: url.to_string(),
                        user_id: user.to_string(),
                    });
                }
            }
            Err(reason) => {
                errors.push(RowError {
                    line: line_no,
                    reason,
                });
                if errors.len() >= options.max_row_errors {
                    return Err(IngestError::ParseAborted(errors));
                }
            }
        }
    }

    if let Some(limit) = options.limit {
        if records > limit {
            return Err(IngestError::LimitExceeded {
                count: records,
                limit,
            });
        }
    }
    if !errors.is_empty() {
        return Err(IngestError::MalformedRows(errors));
    }
    if list.is_empty() {
        return Err(IngestError::EmptyInput);
    }
    Ok(list)
}

/// Publisher trustworthiness scores assigned by human annotators.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BaseKnowledge {
    entries: BTreeMap<PublisherId, u8>,
}

impl BaseKnowledge {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces a score, returning the previous one.
    pub fn insert(&mut self, publisher: PublisherId, score: u8) -> Result<Option<u8>, IngestError> {
        if score > MAX_SCORE {
            return Err(IngestError::ScoreOutOfRange {
                line: 0,
                score: score.into(),
            });
        }
        Ok(self.entries.insert(publisher, score))
    }

    pub fn remove(&mut self, publisher: &PublisherId) -> Option<u8> {
        self.entries.remove(publisher)
    }

    pub fn get(&self, publisher: &PublisherId) -> Option<u8> {
        self.entries.get(publisher).copied()
    }

    pub fn contains(&self, publisher: &PublisherId) -> bool {
        self.entries.contains_key(publisher)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PublisherId, u8)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (publisher, score) in self.iter() {
            writeln!(out, "{publisher},{score}")?;
        }
        Ok(())
    }
}

impl FromIterator<(PublisherId, u8)> for BaseKnowledge {
    fn from_iter<T: IntoIterator<Item = (PublisherId, u8)>>(iter: T) -> Self {
        BaseKnowledge {
            entries: iter
                .into_iter()
                .map(|(p, s)| (p, s.min(MAX_SCORE)))
                .collect(),
        }
    }
}

fn looks_numeric(field: &str) -> bool {
    let digits = field.strip_prefix(['-', '+']).unwrap_or(field);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// Parses `domain,score` records. An empty input yields an empty base.
pub fn parse_base_knowledge<R: BufRead>(reader: R) -> Result<BaseKnowledge, IngestError> {
    let mut base = BaseKnowledge::new();
    let mut first = true;
    for item in lines(reader) {
        let (line, text) = item?;
        let is_first = std::mem::replace(&mut first, false);
        let malformed = |reason: &str| IngestError::MalformedRow {
            line,
            reason: reason.to_string(),
        };
        let text = text.map_err(|_| malformed("invalid UTF-8"))?;
        let (domain, score) = split_record(&text).ok_or_else(|| malformed("expected domain,score"))?;
        if is_first && !looks_numeric(score) {
            continue;
        }
        if !looks_numeric(score) {
            return Err(malformed("score is not an integer"));
        }
        let score: i64 = score
            .parse()
            .map_err(|_| IngestError::ScoreOutOfRange { line, score: i64::MAX })?;
        if !(0..=i64::from(MAX_SCORE)).contains(&score) {
            return Err(IngestError::ScoreOutOfRange { line, score });
        }
        let publisher =
            PublisherId::from_domain(domain).map_err(|_| malformed("invalid domain"))?;
        if base.contains(&publisher) {
            return Err(IngestError::DuplicateDomain(publisher));
        }
        base.entries.insert(publisher, score as u8);
    }
    Ok(base)
}
