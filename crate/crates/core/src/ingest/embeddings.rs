use std::collections::HashMap;
use std::path::Path;

use ndarray::Array2;

use super::{create_writer, csv_error, finish_writer};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n × s` document embeddings with row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    ids: Vec<String>,
    values: Array2<T>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    pub fn new(ids: Vec<String>, values: Array2<T>) -> Result<Self> {
        if ids.len() != values.nrows() {
            return Err(Error::dimension(format!(
                "{} ids for {} embedding rows",
                ids.len(),
                values.nrows()
            )));
        }
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite embedding value for id {:?}, column e{c}",
                ids[r]
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate embedding id {id:?}")));
            }
        }
        Ok(EmbeddingMatrix { ids, values, index })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Rows for `ids`, in that order.
    pub fn select(&self, ids: &[String]) -> Result<Array2<T>> {
        let mut out = Array2::<T>::zeros((ids.len(), self.dim()));
        for (r, id) in ids.iter().enumerate() {
            let src = self
                .row_of(id)
                .ok_or_else(|| Error::invalid(format!("no embedding for document {id:?}")))?;
            out.row_mut(r).assign(&self.values.row(src));
        }
        Ok(out)
    }
}

/// Read a CSV with header `id,e0,...,e{s-1}`.
pub fn load_embeddings<T: Scalar>(path: &Path) -> Result<EmbeddingMatrix<T>> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.is_empty() || &header[0] != "id" || header.len() < 2 {
        return Err(parse_err(1, "missing header `id,e0,...`".into()));
    }
    for (k, name) in header.iter().skip(1).enumerate() {
        if name != format!("e{k}") {
            return Err(parse_err(1, format!("header column {} is {name:?}, expected \"e{k}\"", k + 1)));
        }
    }
    let s = header.len() - 1;
    let mut ids = Vec::new();
    let mut flat: Vec<T> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != s + 1 {
            return Err(parse_err(line, format!("ragged row: {} fields, expected {}", rec.len(), s + 1)));
        }
        let id = rec[0].to_string();
        for c in 0..s {
            let field = rec[c + 1].trim();
            if field.is_empty() {
                return Err(parse_err(line, format!("row {id:?}: empty value in column e{c}")));
            }
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(line, format!("row {id:?}: cannot parse {field:?} in column e{c}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("row {id:?}: non-finite value in column e{c}")));
            }
            flat.push(T::lit(v));
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(parse_err(1, "embedding file has no rows".into()));
    }
    let values = Array2::from_shape_vec((ids.len(), s), flat).expect("row-major shape");
    EmbeddingMatrix::new(ids, values)
}

pub fn write_embeddings<T: Scalar>(path: &Path, m: &EmbeddingMatrix<T>) -> Result<()> {
    let w = create_writer(path)?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string()];
    header.extend((0..m.dim()).map(|k| format!("e{k}")));
    wtr.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (id, row) in m.ids().iter().zip(m.values().rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| format!("{:?}", v.as_f64())));
        wtr.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    let w = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    finish_writer(path, w)
}
