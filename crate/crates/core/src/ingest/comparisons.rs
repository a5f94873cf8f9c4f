use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create_writer, csv_error, finish_writer, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Left,
    Right,
}

/// One forced-choice judgement between two documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub session_id: String,
    pub left_id: String,
    pub right_id: String,
    pub winner: Winner,
}

impl Comparison {
    pub fn new(
        session_id: impl Into<String>,
        left_id: impl Into<String>,
        right_id: impl Into<String>,
        winner: Winner,
    ) -> Result<Self> {
        let c = Comparison {
            session_id: session_id.into(),
            left_id: left_id.into(),
            right_id: right_id.into(),
            winner,
        };
        if c.left_id == c.right_id {
            return Err(Error::invalid(format!("document {:?} compared with itself", c.left_id)));
        }
        Ok(c)
    }

    pub fn winner_id(&self) -> &str {
        match self.winner {
            Winner::Left => &self.left_id,
            Winner::Right => &self.right_id,
        }
    }

    pub fn loser_id(&self) -> &str {
        match self.winner {
            Winner::Left => &self.right_id,
            Winner::Right => &self.left_id,
        }
    }

    /// Same judgement with sides swapped.
    pub fn mirrored(&self) -> Self {
        Comparison {
            session_id: self.session_id.clone(),
            left_id: self.right_id.clone(),
            right_id: self.left_id.clone(),
            winner: match self.winner {
                Winner::Left => Winner::Right,
                Winner::Right => Winner::Left,
            },
        }
    }

    pub fn involves(&self, id: &str) -> bool {
        self.left_id == id || self.right_id == id
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComparisonSet {
    pub records: Vec<Comparison>,
}

impl ComparisonSet {
    pub fn new(records: Vec<Comparison>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|c| c.left_id == c.right_id) {
            return Err(Error::invalid(format!("document {:?} compared with itself", bad.left_id)));
        }
        Ok(ComparisonSet { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records whose two documents both satisfy `keep`.
    pub fn filter_by(&self, mut keep: impl FnMut(&str) -> bool) -> ComparisonSet {
        ComparisonSet {
            records: self
                .records
                .iter()
                .filter(|c| keep(&c.left_id) && keep(&c.right_id))
                .cloned()
                .collect(),
        }
    }

    /// Every id must resolve against `corpus`.
    pub fn validate_against(&self, corpus: &Corpus) -> Result<()> {
        for c in &self.records {
            for id in [&c.left_id, &c.right_id] {
                if !corpus.contains(id) {
                    return Err(Error::invalid(format!(
                        "comparison in session {:?} names unknown document {id:?}",
                        c.session_id
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Read a CSV with header `session_id,left_id,right_id,winner`.
pub fn load_comparisons(path: &Path) -> Result<ComparisonSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let expected = ["session_id", "left_id", "right_id", "winner"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let winner = match &rec[3] {
            "left" => Winner::Left,
            "right" => Winner::Right,
            other => return Err(perr(format!("winner must be left or right, got {other:?}"))),
        };
        let c = Comparison::new(&rec[0], &rec[1], &rec[2], winner).map_err(|e| perr(e.to_string()))?;
        records.push(c);
    }
    Ok(ComparisonSet { records })
}

pub fn write_comparisons(path: &Path, set: &ComparisonSet) -> Result<()> {
    let w = create_writer(path)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["session_id", "left_id", "right_id", "winner"])
        .map_err(|e| csv_error(path, e))?;
    for c in &set.records {
        let winner = match c.winner {
            Winner::Left => "left",
            Winner::Right => "right",
        };
        wtr.write_record([c.session_id.as_str(), &c.left_id, &c.right_id, winner])
            .map_err(|e| csv_error(path, e))?;
    }
    let w = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    finish_writer(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_five_rows_in_order() {
        let f = write_tmp(
            "session_id,left_id,right_id,winner\ns1,a,b,left\ns1,b,c,right\ns2,a,c,left\ns2,c,b,left\ns3,b,a,right\n",
        );
        let set = load_comparisons(f.path()).unwrap();
        assert_eq!(set.len(), 5);
        assert_eq!(set.records[1].winner_id(), "c");
        assert_eq!(set.records[4].loser_id(), "b");
    }

    #[test]
    fn rejects_tie() {
        let f = write_tmp("session_id,left_id,right_id,winner\ns1,a,b,tie\n");
        let err = load_comparisons(f.path()).unwrap_err().to_string();
        assert!(err.contains("tie"), "{err}");
    }

    #[test]
    fn rejects_self_comparison() {
        let f = write_tmp("session_id,left_id,right_id,winner\ns1,a,a,left\n");
        assert!(load_comparisons(f.path()).is_err());
    }

    #[test]
    fn mirrored_keeps_winner() {
        let c = Comparison::new("s", "a", "b", Winner::Left).unwrap();
        let m = c.mirrored();
        assert_eq!(m.winner_id(), "a");
        assert_eq!(m.left_id, "b");
    }
}
