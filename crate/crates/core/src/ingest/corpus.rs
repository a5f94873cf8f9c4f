use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{create_writer, finish_writer, io_err};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub text: String,
    /// Root argument this document was derived from; used to stratify splits.
    pub root_id: Option<String>,
    /// Number of Unicode scalar values in `text`.
    pub length_chars: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>, root_id: Option<String>) -> Self {
        let text = text.into();
        let length_chars = text.chars().count();
        Document {
            id: id.into(),
            text,
            root_id,
            length_chars,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Estimation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Estimation => "estimation",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "estimation" => Ok(Split::Estimation),
            other => Err(Error::invalid(format!("unknown split label {other:?}"))),
        }
    }
}

/// Ordered document collection with unique ids and an optional train /
/// estimation partition.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    index: HashMap<String, usize>,
    split: Option<BTreeMap<String, Split>>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut index = HashMap::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            if doc.length_chars != doc.text.chars().count() {
                return Err(Error::invalid(format!(
                    "document {:?}: length_chars does not match its text",
                    doc.id
                )));
            }
            if index.insert(doc.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate document id {:?}", doc.id)));
            }
        }
        Ok(Corpus {
            documents,
            index,
            split: None,
        })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.index.get(id).map(|&i| &self.documents[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.documents.iter().map(|d| d.id.as_str())
    }

    pub fn split(&self) -> Option<&BTreeMap<String, Split>> {
        self.split.as_ref()
    }

    /// Attach a split; it must assign every document exactly once.
    pub fn with_split(mut self, split: BTreeMap<String, Split>) -> Result<Self> {
        if split.len() != self.documents.len() {
            return Err(Error::invalid(format!(
                "split assigns {} ids but the corpus has {} documents",
                split.len(),
                self.documents.len()
            )));
        }
        if let Some(unknown) = split.keys().find(|id| !self.contains(id)) {
            return Err(Error::invalid(format!("split names unknown document {unknown:?}")));
        }
        self.split = Some(split);
        Ok(self)
    }

    /// Ids assigned to `part`, in corpus order. Errors when no split is attached.
    pub fn ids_in(&self, part: Split) -> Result<Vec<String>> {
        let split = self
            .split
            .as_ref()
            .ok_or_else(|| Error::invalid("corpus has no train/estimation split"))?;
        Ok(self
            .documents
            .iter()
            .filter(|d| split.get(&d.id) == Some(&part))
            .map(|d| d.id.clone())
            .collect())
    }

    /// Sub-corpus restricted to `ids`, in the given order.
    pub fn subset(&self, ids: &[String]) -> Result<Corpus> {
        let docs = ids
            .iter()
            .map(|id| {
                self.get(id)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("unknown document id {id:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(docs)
    }
}

#[derive(Deserialize, Serialize)]
struct CorpusRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    root_id: Option<String>,
}

/// Read a JSON-Lines corpus: one `{"id", "text", "root_id"?}` object per line.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let content = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut documents = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        if let Some(first) = seen.insert(rec.id.clone(), lineno) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("duplicate document id {:?} (first seen on line {first})", rec.id),
            });
        }
        documents.push(Document::new(rec.id, rec.text, rec.root_id));
    }
    if documents.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "corpus file contains no documents".into(),
        });
    }
    Corpus::new(documents)
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut w = create_writer(path)?;
    for doc in corpus.documents() {
        let rec = CorpusRecord {
            id: doc.id.clone(),
            text: doc.text.clone(),
            root_id: doc.root_id.clone(),
        };
        let line = serde_json::to_string(&rec).expect("corpus record serializes");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    finish_writer(path, w)
}

#[cfg(test)]
mod tests {
    use super::*;


    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_documents() {
        let f = write_tmp("{\"id\":\"a\",\"text\":\"abcd\"}\n{\"id\":\"b\",\"text\":\"x\",\"root_id\":\"r1\"}\n");
        let c = load_corpus(f.path()).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("a").unwrap().length_chars, 4);
        assert_eq!(c.get("b").unwrap().root_id.as_deref(), Some("r1"));
    }

    #[test]
    fn counts_unicode_scalars() {
        let d = Document::new("x", "héllo🐄", None);
        assert_eq!(d.length_chars, 6);
    }

    #[test]
    fn rejects_duplicate_id() {
        let f = write_tmp("{\"id\":\"a7\",\"text\":\"one\"}\n{\"id\":\"a7\",\"text\":\"two\"}\n");
        let err = load_corpus(f.path()).unwrap_err().to_string();
        assert!(err.contains("a7"), "{err}");
        assert!(err.contains(":2:"), "{err}");
    }

    #[test]
    fn reports_malformed_line_number() {
        let f = write_tmp("{\"id\":\"a\",\"text\":\"ok\"}\n{not json}\n");
        match load_corpus(f.path()).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn rejects_empty_file() {
        let f = write_tmp("");
        assert!(matches!(load_corpus(f.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn split_must_cover_corpus() {
        let c = Corpus::new(vec![Document::new("a", "t", None), Document::new("b", "t", None)]).unwrap();
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), Split::Train);
        assert!(c.clone().with_split(m.clone()).is_err());
        m.insert("b".to_string(), Split::Estimation);
        let c = c.with_split(m).unwrap();
        assert_eq!(c.ids_in(Split::Estimation).unwrap(), vec!["b".to_string()]);
    }
}
