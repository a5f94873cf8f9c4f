use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;

use super::{create_writer, csv_error, finish_writer, Corpus, Split};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Share of documents assigned to training.
pub const DEFAULT_TRAIN_FRACTION: f64 = 2.0 / 3.0;

/// Partition `corpus` into train and estimation sets, stratified by
/// `root_id`. Documents without a root are pooled into one stratum.
///
/// Each stratum of size `g` receives `floor(g·f)` or `ceil(g·f)` training
/// documents; the strata rounded up are those with the largest fractional
/// parts (ties in seeded random order), so the overall training size is
/// `round(N·f)`.
pub fn stratified_split(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<Corpus> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    if corpus.len() < 2 {
        return Err(Error::invalid("cannot split a corpus with fewer than 2 documents"));
    }
    let mut rng = seeded(seed);

    let mut strata: BTreeMap<Option<&str>, Vec<&str>> = BTreeMap::new();
    for doc in corpus.documents() {
        strata.entry(doc.root_id.as_deref()).or_default().push(doc.id.as_str());
    }
    let mut strata: Vec<Vec<&str>> = strata.into_values().collect();

    let total = corpus.len();
    let target = (total as f64 * train_fraction).round() as usize;
    let mut quotas: Vec<usize> = strata
        .iter()
        .map(|g| (g.len() as f64 * train_fraction).floor() as usize)
        .collect();
    let assigned: usize = quotas.iter().sum();

    let mut order: Vec<usize> = (0..strata.len()).collect();
    order.shuffle(&mut rng);
    let frac = |i: usize| {
        let exact = strata[i].len() as f64 * train_fraction;
        exact - exact.floor()
    };
    // stable sort keeps the shuffled order among equal remainders
    order.sort_by(|&a, &b| frac(b).partial_cmp(&frac(a)).unwrap());
    for &i in order.iter().take(target.saturating_sub(assigned)) {
        if quotas[i] < strata[i].len() {
            quotas[i] += 1;
        }
    }

    let mut split = BTreeMap::new();
    for (group, quota) in strata.iter_mut().zip(quotas) {
        group.shuffle(&mut rng);
        for (k, id) in group.iter().enumerate() {
            let part = if k < quota { Split::Train } else { Split::Estimation };
            split.insert(id.to_string(), part);
        }
    }
    corpus.clone().with_split(split)
}

/// Write `id,split` in corpus order.
pub fn write_split(path: &Path, corpus: &Corpus) -> Result<()> {
    let split = corpus
        .split()
        .ok_or_else(|| Error::invalid("corpus has no split to write"))?;
    let w = create_writer(path)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "split"]).map_err(|e| csv_error(path, e))?;
    for id in corpus.ids() {
        wtr.write_record([id, split[id].as_str()]).map_err(|e| csv_error(path, e))?;
    }
    let w = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    finish_writer(path, w)
}

/// Read an `id,split` file and attach it to `corpus`.
pub fn load_split(path: &Path, corpus: &Corpus) -> Result<Corpus> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut split = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let part: Split = rec[1].parse().map_err(|e: Error| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        if split.insert(rec[0].to_string(), part).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("id {:?} assigned twice", &rec[0]),
            });
        }
    }
    corpus.clone().with_split(split)
}
