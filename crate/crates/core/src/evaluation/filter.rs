use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{create_writer, csv_error, finish_writer, io_err};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    Synthesis,
    Emphasis,
    TopicShift,
}

impl FromStr for FilterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthesis" => Ok(FilterMode::Synthesis),
            "emphasis" => Ok(FilterMode::Emphasis),
            "topic_shift" => Ok(FilterMode::TopicShift),
            other => Err(Error::invalid(format!(
                "unknown filter mode {other:?} (expected synthesis, emphasis or topic_shift)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "increase" => Ok(Direction::Increase),
            "decrease" => Ok(Direction::Decrease),
            other => Err(Error::invalid(format!(
                "unknown direction {other:?} (expected increase or decrease)"
            ))),
        }
    }
}

/// Acceptance rule for generated candidates. Topic indices are 0-based
/// columns of the loadings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCriteria {
    pub mode: FilterMode,
    pub target_topics: Vec<usize>,
    pub direction: Option<Direction>,
    pub threshold: Option<f64>,
}

impl FilterCriteria {
    pub fn synthesis(a: usize, b: usize) -> Self {
        FilterCriteria {
            mode: FilterMode::Synthesis,
            target_topics: vec![a, b],
            direction: None,
            threshold: None,
        }
    }

    pub fn emphasis(topic: usize) -> Self {
        FilterCriteria {
            mode: FilterMode::Emphasis,
            target_topics: vec![topic],
            direction: None,
            threshold: None,
        }
    }

    pub fn topic_shift(topic: usize, direction: Direction, threshold: f64) -> Self {
        FilterCriteria {
            mode: FilterMode::TopicShift,
            target_topics: vec![topic],
            direction: Some(direction),
            threshold: Some(threshold),
        }
    }

    pub fn validate(&self, topics: usize) -> Result<()> {
        let want = match self.mode {
            FilterMode::Synthesis => 2,
            FilterMode::Emphasis | FilterMode::TopicShift => 1,
        };
        if self.target_topics.len() != want {
            return Err(Error::invalid(format!(
                "{:?} filtering needs exactly {want} target topic(s), got {}",
                self.mode,
                self.target_topics.len()
            )));
        }
        if want == 2 && self.target_topics[0] == self.target_topics[1] {
            return Err(Error::invalid("synthesis targets must be distinct topics"));
        }
        if let Some(&k) = self.target_topics.iter().find(|&&k| k >= topics) {
            return Err(Error::invalid(format!("target topic {k} out of range for {topics} topics")));
        }
        if self.mode == FilterMode::TopicShift {
            if self.direction.is_none() {
                return Err(Error::invalid("topic_shift filtering needs a direction"));
            }
            if !self.threshold.is_some_and(f64::is_finite) {
                return Err(Error::invalid("topic_shift filtering needs a finite threshold"));
            }
        }
        Ok(())
    }
}

/// A document with its inferred loadings and predicted score.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub id: String,
    pub loadings: Vec<f64>,
    pub score: f64,
}

impl Scored {
    /// True when every topic in `targets` outranks every other topic.
    fn targets_lead(&self, targets: &[usize]) -> bool {
        let lowest_target = targets.iter().map(|&k| self.loadings[k]).fold(f64::INFINITY, f64::min);
        self.loadings
            .iter()
            .enumerate()
            .filter(|(k, _)| !targets.contains(k))
            .all(|(_, &v)| lowest_target > v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterDecision {
    pub candidate_id: String,
    pub accepted: bool,
    /// `ok` when accepted, otherwise the failed rules joined by `;`.
    pub reason: String,
}

/// Apply `criteria` to each candidate against its proto-arguments.
pub fn filter_candidates(
    candidates: &[Scored],
    protos: &BTreeMap<String, Vec<Scored>>,
    criteria: &FilterCriteria,
) -> Result<Vec<FilterDecision>> {
    let topics = candidates.first().map(|c| c.loadings.len()).unwrap_or(0);
    if !candidates.is_empty() {
        criteria.validate(topics)?;
    }
    candidates
        .iter()
        .map(|cand| {
            let ps = protos
                .get(&cand.id)
                .filter(|p| !p.is_empty())
                .ok_or_else(|| Error::invalid(format!("no proto-arguments for candidate {:?}", cand.id)))?;
            if cand.loadings.len() != topics || ps.iter().any(|p| p.loadings.len() != topics) {
                return Err(Error::dimension(format!("loadings of {:?} disagree in length", cand.id)));
            }
            let mut failed = Vec::new();
            match criteria.mode {
                FilterMode::Synthesis | FilterMode::Emphasis => {
                    if !ps.iter().all(|p| cand.score > p.score) {
                        failed.push("score");
                    }
                    if !cand.targets_lead(&criteria.target_topics) {
                        failed.push("topic-rank");
                    }
                }
                FilterMode::TopicShift => {
                    let k = criteria.target_topics[0];
                    let th = criteria.threshold.expect("validated");
                    let moved = ps.iter().all(|p| match criteria.direction.expect("validated") {
                        Direction::Decrease => p.loadings[k] >= th && cand.loadings[k] < th,
                        Direction::Increase => p.loadings[k] <= th && cand.loadings[k] > th,
                    });
                    if !moved {
                        failed.push("topic-shift");
                    }
                }
            }
            Ok(FilterDecision {
                candidate_id: cand.id.clone(),
                accepted: failed.is_empty(),
                reason: if failed.is_empty() { "ok".into() } else { failed.join(";") },
            })
        })
        .collect()
}

/// CSV `candidate_id,proto_id`, one row per pair.
pub fn load_proto_map(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().collect::<Vec<_>>() != ["candidate_id", "proto_id"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header candidate_id,proto_id".into(),
        });
    }
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        out.entry(rec[0].to_string()).or_default().push(rec[1].to_string());
    }
    Ok(out)
}

impl fmt::Display for FilterDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.candidate_id, self.accepted, self.reason)
    }
}

/// CSV `candidate_id,accepted,reason`.
pub fn write_decisions(path: &Path, decisions: &[FilterDecision]) -> Result<()> {
    use std::io::Write;
    let mut w = create_writer(path)?;
    let mut text = String::from("candidate_id,accepted,reason\n");
    for d in decisions {
        text.push_str(&format!("{d}\n"));
    }
    w.write_all(text.as_bytes()).map_err(io_err(path))?;
    finish_writer(path, w)
}
