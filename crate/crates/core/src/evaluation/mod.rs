//! Model selection and diagnostics: cross-validated prediction error,
//! TF-IDF top words and topic coherence, filtering of generated candidate
//! arguments, and a planted-data generator.

mod cv;
mod filter;
mod synthetic;
mod text;

pub use cv::{cross_validate, fold_assignment, mse, BaselineEntry, CvEntry, CvOptions, CvReport, CvSummary};
pub use filter::{
    filter_candidates, load_proto_map, write_decisions, Direction, FilterCriteria, FilterDecision, FilterMode, Scored,
};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
pub use text::{
    coherence_report, tfidf_top_words, tokenize, topic_coherence, CoherenceReport, TermIndex, TopicCoherence,
    STOPWORDS, TOP_DOCS, TOP_WORDS,
};
