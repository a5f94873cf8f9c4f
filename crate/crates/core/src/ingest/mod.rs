//! Loading and validating corpus, embedding and comparison files, plus the
//! standardization applied to embeddings and responses.

mod comparisons;
mod corpus;
mod embeddings;
mod scaling;
mod split;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use comparisons::{load_comparisons, write_comparisons, Comparison, ComparisonSet, Winner};
pub use corpus::{load_corpus, write_corpus, Corpus, Document, Split};
pub use embeddings::{load_embeddings, write_embeddings, EmbeddingMatrix};
pub use scaling::{fit_scaling, ScalingParams, DEFAULT_EMBEDDING_DIVISOR, DEGENERATE_STD};
pub use split::{load_split, stratified_split, write_split, DEFAULT_TRAIN_FRACTION};

use crate::error::{Error, Result};

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub(crate) fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

pub(crate) fn finish_writer(path: &Path, mut w: BufWriter<File>) -> Result<()> {
    w.flush().map_err(io_err(path))
}

pub(crate) fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line() as usize).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}
