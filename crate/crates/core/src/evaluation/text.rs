use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::TopicLoadings;
use crate::ingest::{create_writer, finish_writer, io_err, Corpus};
use crate::scalar::Scalar;

/// Documents per topic whose text feeds the top-word extraction.
pub const TOP_DOCS: usize = 25;
pub const TOP_WORDS: usize = 5;
const MIN_TOKEN_LEN: usize = 3;

/// English stopwords removed before counting (version 1 of the list).
pub const STOPWORDS: &[&str] = &[
    "about", "above", "after", "again", "against", "all", "also", "and", "any", "are", "aren", "because", "been",
    "before", "being", "below", "between", "both", "but", "can", "cannot", "could", "couldn", "did", "didn", "does",
    "doesn", "doing", "don", "down", "during", "each", "even", "ever", "every", "few", "for", "from", "further",
    "had", "hadn", "has", "hasn", "have", "haven", "having", "her", "here", "hers", "herself", "him", "himself",
    "his", "how", "however", "into", "isn", "its", "itself", "just", "let", "many", "may", "might", "more", "most",
    "much", "must", "mustn", "myself", "need", "nor", "not", "now", "off", "once", "one", "only", "other", "ought",
    "our", "ours", "ourselves", "out", "over", "own", "same", "shall", "shan", "she", "should", "shouldn", "since",
    "some", "still", "such", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there",
    "these", "they", "this", "those", "through", "thus", "too", "under", "until", "upon", "very", "was", "wasn",
    "way", "well", "were", "weren", "what", "when", "where", "whether", "which", "while", "who", "whom", "whose",
    "why", "will", "with", "within", "without", "won", "would", "wouldn", "yet", "you", "your", "yours",
    "yourself", "yourselves",
];

/// Lowercase, split on non-alphanumeric characters, drop short tokens and
/// stopwords.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= MIN_TOKEN_LEN && !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

/// Token counts and document frequencies over a reference corpus.
#[derive(Debug, Clone)]
pub struct TermIndex {
    n_docs: usize,
    doc_tokens: HashMap<String, Vec<String>>,
    doc_sets: Vec<BTreeSet<String>>,
    df: HashMap<String, usize>,
}

impl TermIndex {
    pub fn new(corpus: &Corpus) -> Self {
        let mut doc_tokens = HashMap::new();
        let mut doc_sets = Vec::with_capacity(corpus.len());
        let mut df: HashMap<String, usize> = HashMap::new();
        for d in corpus.documents() {
            let toks = tokenize(&d.text);
            let set: BTreeSet<String> = toks.iter().cloned().collect();
            for w in &set {
                *df.entry(w.clone()).or_default() += 1;
            }
            doc_sets.push(set);
            doc_tokens.insert(d.id.clone(), toks);
        }
        TermIndex {
            n_docs: corpus.len(),
            doc_tokens,
            doc_sets,
            df,
        }
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    /// Number of documents containing `word`.
    pub fn df(&self, word: &str) -> usize {
        self.df.get(word).copied().unwrap_or(0)
    }

    /// Number of documents containing both words.
    pub fn co_df(&self, a: &str, b: &str) -> usize {
        self.doc_sets.iter().filter(|s| s.contains(a) && s.contains(b)).count()
    }

    /// `top_n` words of the concatenated documents by `tf·ln(N/df)`, ties
    /// broken alphabetically.
    pub fn top_words(&self, doc_ids: &[String], top_n: usize) -> Result<Vec<String>> {
        if top_n == 0 {
            return Err(Error::invalid("top_n must be at least 1"));
        }
        let mut tf: BTreeMap<&str, usize> = BTreeMap::new();
        for id in doc_ids {
            let toks = self
                .doc_tokens
                .get(id)
                .ok_or_else(|| Error::invalid(format!("document {id:?} is not in the corpus")))?;
            for t in toks {
                *tf.entry(t.as_str()).or_default() += 1;
            }
        }
        if tf.is_empty() {
            return Err(Error::invalid("empty vocabulary after tokenization"));
        }
        let n = self.n_docs as f64;
        let mut scored: Vec<(&str, f64)> = tf
            .into_iter()
            .map(|(w, c)| (w, c as f64 * (n / self.df(w) as f64).ln()))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(scored.into_iter().take(top_n).map(|(w, _)| w.to_string()).collect())
    }

    /// `Σ_{m≥2} Σ_{l<m} ln((D(v_m, v_l) + 1) / D(v_l))`.
    pub fn coherence(&self, words: &[String]) -> Result<f64> {
        if words.is_empty() {
            return Err(Error::invalid("coherence of an empty word list"));
        }
        let mut total = 0.0;
        for m in 1..words.len() {
            for l in 0..m {
                let dl = self.df(&words[l]);
                if dl == 0 {
                    return Err(Error::invalid(format!("word {:?} occurs in no document", words[l])));
                }
                total += ((self.co_df(&words[m], &words[l]) + 1) as f64 / dl as f64).ln();
            }
        }
        Ok(total)
    }
}

/// Top words of `doc_ids` against document frequencies of `corpus`.
pub fn tfidf_top_words(corpus: &Corpus, doc_ids: &[String], top_n: usize) -> Result<Vec<String>> {
    TermIndex::new(corpus).top_words(doc_ids, top_n)
}

/// Mimno coherence of `top_words` (in rank order) over `corpus`.
pub fn topic_coherence(top_words: &[String], corpus: &Corpus) -> Result<f64> {
    TermIndex::new(corpus).coherence(top_words)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicCoherence {
    pub topic: usize,
    pub top_docs: Vec<String>,
    pub top_words: Vec<String>,
    pub coherence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub topics: Vec<TopicCoherence>,
    pub average_coherence: f64,
}

impl CoherenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        use std::io::Write;
        let mut w = create_writer(path)?;
        w.write_all(self.to_json().as_bytes()).map_err(io_err(path))?;
        finish_writer(path, w)
    }
}

/// Per topic, the highest-loading training documents (ties by id), their
/// top TF-IDF words, and the coherence of those words.
pub fn coherence_report<T: Scalar>(loadings: &TopicLoadings<T>, corpus: &Corpus) -> Result<CoherenceReport> {
    let index = TermIndex::new(corpus);
    let mut topics = Vec::with_capacity(loadings.topics());
    for k in 0..loadings.topics() {
        let mut order: Vec<usize> = (0..loadings.len()).collect();
        order.sort_by(|&a, &b| {
            loadings.w[[b, k]]
                .partial_cmp(&loadings.w[[a, k]])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| loadings.ids[a].cmp(&loadings.ids[b]))
        });
        let top_docs: Vec<String> = order.iter().take(TOP_DOCS).map(|&i| loadings.ids[i].clone()).collect();
        let top_words = index.top_words(&top_docs, TOP_WORDS)?;
        let coherence = index.coherence(&top_words)?;
        topics.push(TopicCoherence {
            topic: k,
            top_docs,
            top_words,
            coherence,
        });
    }
    let average_coherence = topics.iter().map(|t| t.coherence).sum::<f64>() / topics.len().max(1) as f64;
    Ok(CoherenceReport {
        topics,
        average_coherence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Document;
    use approx::assert_abs_diff_eq;

    fn corpus(texts: &[&str]) -> Corpus {
        Corpus::new(
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| Document::new(format!("d{i}"), *t, None))
                .collect(),
        )
        .unwrap()
    }

    fn words(w: &[&str]) -> Vec<String> {
        w.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("The COW, the cow-shed and 42 pigs!"), words(&["cow", "cow", "shed", "pigs"]));
        assert_eq!(tokenize("is it ok"), Vec::<String>::new());
    }

    #[test]
    fn rarer_word_outranks_common_word() {
        // N = 4, df(cow) = 1, df(chicken) = 2: 2·ln 4 > 1·ln 2
        let c = corpus(&["cow cow chicken", "chicken goat", "goat", "sheep"]);
        let top = tfidf_top_words(&c, &words(&["d0"]), 2).unwrap();
        assert_eq!(top, words(&["cow", "chicken"]));
    }

    #[test]
    fn ubiquitous_word_never_selected() {
        let c = corpus(&["apple pear", "apple fig", "apple"]);
        let top = tfidf_top_words(&c, &words(&["d0", "d1", "d2"]), 2).unwrap();
        assert_eq!(top, words(&["fig", "pear"]));
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let c = corpus(&["the and", "cow"]);
        assert!(tfidf_top_words(&c, &words(&["d0"]), 3).is_err());
    }

    #[test]
    fn coherence_formula() {
        // D(aaa) = 5, D(aaa, bbb) = 3
        let c = corpus(&["aaa bbb", "aaa bbb", "aaa bbb", "aaa", "aaa", "ccc"]);
        let v = topic_coherence(&words(&["bbb", "aaa"]), &c).unwrap();
        // ordered as (v1, v2) = (aaa, bbb): pair term uses D(v1)
        let w = topic_coherence(&words(&["aaa", "bbb"]), &c).unwrap();
        assert_abs_diff_eq!(w, (4.0f64 / 5.0).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(v, (4.0f64 / 3.0).ln(), epsilon = 1e-12);
        assert_eq!(topic_coherence(&words(&["aaa"]), &c).unwrap(), 0.0);
        assert!(topic_coherence(&words(&["zzz", "aaa"]), &c).is_err());
    }

    #[test]
    fn always_cooccurring_words_may_be_positive() {
        let c = corpus(&["xxx yyy"; 5]);
        let v = topic_coherence(&words(&["xxx", "yyy"]), &c).unwrap();
        assert_abs_diff_eq!(v, (6.0f64 / 5.0).ln(), epsilon = 1e-12);
    }
}
