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

//! CSV export of publisher records.
//!
//! ```text
//! publisher,state,score,confidence,label,n_voters,n_nec_urls,n_urls,n_shares
//! a.com,A,75.00,1.0000,T,4,1,3,7
//! b.com,U,,0.0000,,0,0,1,1
//! ```
//!
//! Rows are sorted by publisher id, scores carry two decimals, confidences
//! four, and lines end in `\n`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guidance::PublisherStats;
use crate::ingestion::PublisherId;
use crate::scoring::{Label, PublisherRecord, RecordState};

pub const HEADER: &str = "publisher,state,score,confidence,label,n_voters,n_nec_urls,n_urls,n_shares";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error("missing or wrong header")]
    BadHeader,
    #[error("line {line}: {reason}")]
    BadRow { line: usize, reason: String },
}

/// One CSV row, with score and confidence already rounded to the printed
/// precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub publisher: PublisherId,
    pub state: RecordState,
    pub score: Option<f64>,
    pub confidence: f64,
    pub label: Option<Label>,
    pub stats: PublisherStats,
}

fn round_to(value: f64, decimals: usize) -> f64 {
    format!("{value:.decimals$}").parse().expect("formatted float parses")
}

impl ExportRow {
    pub fn from_record(record: &PublisherRecord) -> Self {
        ExportRow {
            publisher: record.publisher.clone(),
            state: record.state,
            score: record.score.map(|s| round_to(s, 2)),
            confidence: round_to(record.confidence, 4),
            label: record.label,
            stats: record.stats,
        }
    }

    fn write_line(&self, out: &mut String) {
        let score = self.score.map(|s| format!("{s:.2}")).unwrap_or_default();
        let label = self.label.map(|l| l.letter().to_string()).unwrap_or_default();
        let s = &self.stats;
        writeln!(
            out,
            "{},{},{},{:.4},{},{},{},{},{}",
            self.publisher,
            self.state.letter(),
            score,
            self.confidence,
            label,
            s.n_voters,
            s.n_nec_urls,
            s.n_urls,
            s.n_shares
        )
        .expect("writing to a String cannot fail");
    }
}

/// Renders records as CSV. With `only_annotated`, keeps state `A` rows.
pub fn write_csv(records: &[PublisherRecord], only_annotated: bool) -> String {
    let mut rows: Vec<ExportRow> = records
        .iter()
        .filter(|r| !only_annotated || r.state == RecordState::Annotated)
        .map(ExportRow::from_record)
        .collect();
    rows.sort_by(|a, b| a.publisher.cmp(&b.publisher));
    write_rows(&rows)
}

pub fn write_rows(rows: &[ExportRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for row in rows {
        row.write_line(&mut out);
    }
    out
}

/// Parses a CSV produced by [`write_csv`].
pub fn read_csv(text: &str) -> Result<Vec<ExportRow>, ExportError> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(ExportError::BadHeader);
    }
    lines
        .enumerate()
        .map(|(i, line)| parse_row(line).map_err(|reason| ExportError::BadRow { line: i + 2, reason }))
        .collect()
}

fn parse_row(line: &str) -> Result<ExportRow, String> {
    let f: Vec<&str> = line.split(',').collect();
    if f.len() != 9 {
        return Err(format!("expected 9 fields, found {}", f.len()));
    }
    let publisher = PublisherId::from_domain(f[0]).map_err(|e| e.to_string())?;
    let state = RecordState::from_letter(f[1]).ok_or_else(|| format!("bad state {:?}", f[1]))?;
    let score = match f[2] {
        "" => None,
        s => Some(s.parse::<f64>().map_err(|_| format!("bad score {s:?}"))?),
    };
    let confidence = f[3].parse::<f64>().map_err(|_| format!("bad confidence {:?}", f[3]))?;
    let label = match f[4] {
        "" => None,
        "T" => Some(Label::T),
        "N" => Some(Label::N),
        l => return Err(format!("bad label {l:?}")),
    };
    let count = |s: &str| s.parse::<u64>().map_err(|_| format!("bad count {s:?}"));
    Ok(ExportRow {
        publisher,
        state,
        score,
        confidence,
        label,
        stats: PublisherStats {
            n_voters: count(f[5])? as usize,
            n_nec_urls: count(f[6])? as usize,
            n_urls: count(f[7])? as usize,
            n_shares: count(f[8])?,
        },
    })
}
