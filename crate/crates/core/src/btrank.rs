//! Bradley-Terry strength scores from forced-choice pairwise judgements,
//! anchored scoring of new documents against fixed opponents, and
//! bootstrap win-rate summaries.
//!
//! Under the model, document `i` beats `j` with probability
//! `π_i / (π_i + π_j)`. Scores are fitted by the minorization-maximization
//! iteration
//!
//! ```text
//! π_i ← Σ_j w_ij·π_j/(π_i+π_j)  /  Σ_j w_ji/(π_i+π_j)
//! ```
//!
//! where `w_ij` counts wins of `i` over `j`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{create_writer, csv_error, finish_writer, ComparisonSet};
use crate::rng::{derive_seed, seeded};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITERS: usize = 10_000;
pub const DEFAULT_TOL: f64 = 1e-8;
/// Weight of the virtual win and virtual loss given to undefeated or winless
/// documents.
pub const VIRTUAL_GAME_WEIGHT: f64 = 0.5;
pub const DEFAULT_BOOTSTRAPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Arithmetic mean of the freely fitted scores equals one.
    MeanOne,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BtScores<T> {
    pub scores: BTreeMap<String, T>,
    pub normalization: Normalization,
    /// True when the scores were fitted against fixed opponents.
    pub anchored: bool,
}

impl<T: Scalar> BtScores<T> {
    pub fn get(&self, id: &str) -> Option<T> {
        self.scores.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn mean(&self) -> T {
        self.scores.values().copied().sum::<T>() / T::from_usize_lossy(self.scores.len())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BtOptions {
    pub max_iters: usize,
    /// Stop once the largest relative score change falls below this.
    pub tol: f64,
}

impl Default for BtOptions {
    fn default() -> Self {
        BtOptions {
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
        }
    }
}

/// Outcome of an MM run, with the objective after every iteration.
#[derive(Debug, Clone)]
pub struct BtFit<T> {
    pub scores: BtScores<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective (log-likelihood plus any virtual games) after each iteration;
    /// entry 0 is the starting point.
    pub trace: Vec<T>,
}

/// Aggregated win counts between free parameters and their opponents.
struct Problem<T> {
    /// For each free item: (opponent, wins over opponent, losses to opponent).
    edges: Vec<Vec<(Opponent, T, T)>>,
    /// Virtual opponent strength and the virtual game weight, per item.
    virtual_games: Vec<Option<(T, T)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Opponent {
    Free(usize),
    Fixed(usize),
}

impl<T: Scalar> Problem<T> {
    fn strength(pi: &[T], fixed: &[T], o: Opponent) -> T {
        match o {
            Opponent::Free(j) => pi[j],
            Opponent::Fixed(j) => fixed[j],
        }
    }

    fn objective(&self, pi: &[T], fixed: &[T]) -> T {
        let mut ll = T::zero();
        for (i, edges) in self.edges.iter().enumerate() {
            for &(o, wins, losses) in edges {
                let pj = Self::strength(pi, fixed, o);
                let denom = (pi[i] + pj).ln();
                // free-free pairs appear twice; count wins from each side once
                ll += wins * (pi[i].ln() - denom);
                if let Opponent::Fixed(_) = o {
                    ll += losses * (pj.ln() - denom);
                }
            }
            if let Some((pv, w)) = self.virtual_games[i] {
                let denom = (pi[i] + pv).ln();
                ll += w * (pi[i].ln() - denom) + w * (pv.ln() - denom);
            }
        }
        ll
    }

    /// One Gauss-Seidel sweep: items are updated in order, each using the
    /// latest values of the others.
    fn mm_sweep(&self, pi: &mut [T], fixed: &[T]) {
        for (i, edges) in self.edges.iter().enumerate() {
            let mut num = T::zero();
            let mut den = T::zero();
            for &(o, wins, losses) in edges {
                let pj = Self::strength(pi, fixed, o);
                let s = pi[i] + pj;
                num += wins * pj / s;
                den += losses / s;
            }
            if let Some((pv, w)) = self.virtual_games[i] {
                let s = pi[i] + pv;
                num += w * pv / s;
                den += w / s;
            }
            pi[i] = num / den;
        }
    }
}

fn max_relative_change<T: Scalar>(old: &[T], new: &[T]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(&a, &b)| ((b - a) / a).abs().as_f64())
        .fold(0.0, f64::max)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != r {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Fit unanchored scores for every document appearing in `comparisons`,
/// normalized to arithmetic mean one.
pub fn fit_bt<T: Scalar>(comparisons: &ComparisonSet, opts: BtOptions) -> Result<BtScores<T>> {
    fit_bt_traced(comparisons, opts).map(|f| f.scores)
}

/// Like [`fit_bt`], but every id in `ids` must take part in at least one
/// comparison and no comparison may name an id outside `ids`.
pub fn fit_bt_over<T: Scalar>(ids: &[String], comparisons: &ComparisonSet, opts: BtOptions) -> Result<BtScores<T>> {
    let wanted: BTreeSet<&str> = ids.iter().map(String::as_str).collect();
    let mut seen = BTreeSet::new();
    for c in &comparisons.records {
        for id in [c.left_id.as_str(), c.right_id.as_str()] {
            if !wanted.contains(id) {
                return Err(Error::invalid(format!("comparison names unscored document {id:?}")));
            }
            seen.insert(id);
        }
    }
    if let Some(missing) = wanted.iter().find(|id| !seen.contains(*id)) {
        return Err(Error::invalid(format!("document {missing:?} has zero comparisons")));
    }
    fit_bt(comparisons, opts)
}

pub fn fit_bt_traced<T: Scalar>(comparisons: &ComparisonSet, opts: BtOptions) -> Result<BtFit<T>> {
    if comparisons.is_empty() {
        return Err(Error::invalid("no comparisons to fit"));
    }
    let ids: Vec<String> = comparisons
        .records
        .iter()
        .flat_map(|c| [c.left_id.clone(), c.right_id.clone()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let n = ids.len();

    let mut uf = UnionFind::new(n);
    let mut pair_wins: BTreeMap<(usize, usize), T> = BTreeMap::new();
    for c in &comparisons.records {
        let (w, l) = (index[c.winner_id()], index[c.loser_id()]);
        uf.union(w, l);
        *pair_wins.entry((w, l)).or_insert(T::zero()) += T::one();
    }
    let mut components: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        components.entry(uf.find(i)).or_default().push(id.clone());
    }
    if components.len() > 1 {
        return Err(Error::Disconnected {
            components: components.into_values().collect(),
        });
    }

    let mut edges: Vec<BTreeMap<usize, (T, T)>> = vec![BTreeMap::new(); n];
    for (&(w, l), &count) in &pair_wins {
        edges[w].entry(l).or_insert((T::zero(), T::zero())).0 += count;
        edges[l].entry(w).or_insert((T::zero(), T::zero())).1 += count;
    }
    let mut virtual_games = vec![None; n];
    let mut regularized = false;
    for (i, e) in edges.iter().enumerate() {
        let wins: T = e.values().map(|x| x.0).sum();
        let losses: T = e.values().map(|x| x.1).sum();
        if wins == T::zero() || losses == T::zero() {
            log::warn!(
                "document {:?} has {} comparisons; adding a virtual half win and half loss",
                ids[i],
                if wins == T::zero() { "no winning" } else { "no losing" }
            );
            virtual_games[i] = Some((T::one(), T::lit(VIRTUAL_GAME_WEIGHT)));
            regularized = true;
        }
    }
    let problem = Problem {
        edges: edges
            .into_iter()
            .map(|e| e.into_iter().map(|(j, (w, l))| (Opponent::Free(j), w, l)).collect())
            .collect(),
        virtual_games,
    };

    let mut pi = vec![T::one(); n];
    let fixed: Vec<T> = Vec::new();
    let mut trace = vec![problem.objective(&pi, &fixed)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut next = pi.clone();
        problem.mm_sweep(&mut next, &fixed);
        if !regularized {
            // the likelihood is scale-free, so renormalizing keeps iterates bounded
            rescale_mean_one(&mut next);
        }
        if let Some(bad) = next.iter().position(|x| !(x.is_finite() && *x > T::zero())) {
            return Err(Error::numerical(format!("score for {:?} left (0, ∞)", ids[bad])));
        }
        let change = max_relative_change(&pi, &next);
        pi = next;
        trace.push(problem.objective(&pi, &fixed));
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("Bradley-Terry fit stopped after {iterations} iterations without converging");
    }
    rescale_mean_one(&mut pi);
    Ok(BtFit {
        scores: BtScores {
            scores: ids.into_iter().zip(pi).collect(),
            normalization: Normalization::MeanOne,
            anchored: false,
        },
        iterations,
        converged,
        trace,
    })
}

fn rescale_mean_one<T: Scalar>(pi: &mut [T]) {
    let mean = pi.iter().copied().sum::<T>() / T::from_usize_lossy(pi.len());
    for x in pi.iter_mut() {
        *x /= mean;
    }
}

/// Score `new_ids` while holding the scores in `fixed` constant.
///
/// Comparisons between two fixed documents are ignored. The returned set
/// holds the fixed scores, copied unchanged, and the new ones; no
/// renormalization is applied.
pub fn fit_bt_fixed<T: Scalar>(
    comparisons: &ComparisonSet,
    fixed: &BtScores<T>,
    new_ids: &[String],
    opts: BtOptions,
) -> Result<BtScores<T>> {
    fit_bt_fixed_traced(comparisons, fixed, new_ids, opts).map(|f| f.scores)
}

pub fn fit_bt_fixed_traced<T: Scalar>(
    comparisons: &ComparisonSet,
    fixed: &BtScores<T>,
    new_ids: &[String],
    opts: BtOptions,
) -> Result<BtFit<T>> {
    let new_index: HashMap<&str, usize> = new_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if new_index.len() != new_ids.len() {
        return Err(Error::invalid("duplicate id among documents to score"));
    }
    if let Some(clash) = new_ids.iter().find(|id| fixed.scores.contains_key(*id)) {
        return Err(Error::invalid(format!("document {clash:?} is both fixed and free")));
    }
    let fixed_ids: Vec<&String> = fixed.scores.keys().collect();
    let fixed_index: HashMap<&str, usize> = fixed_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let fixed_values: Vec<T> = fixed.scores.values().copied().collect();
    let n = new_ids.len();

    let resolve = |id: &str| -> Result<Opponent> {
        if let Some(&i) = new_index.get(id) {
            Ok(Opponent::Free(i))
        } else if let Some(&j) = fixed_index.get(id) {
            Ok(Opponent::Fixed(j))
        } else {
            Err(Error::invalid(format!("comparison names document {id:?} that is neither fixed nor being scored")))
        }
    };

    // node n stands for "all anchors"
    let mut uf = UnionFind::new(n + 1);
    let mut edges: Vec<BTreeMap<Opponent, (T, T)>> = vec![BTreeMap::new(); n];
    for c in &comparisons.records {
        let w = resolve(c.winner_id())?;
        let l = resolve(c.loser_id())?;
        let node = |o: Opponent| match o {
            Opponent::Free(i) => i,
            Opponent::Fixed(_) => n,
        };
        if let (Opponent::Fixed(_), Opponent::Fixed(_)) = (w, l) {
            continue;
        }
        uf.union(node(w), node(l));
        if let Opponent::Free(i) = w {
            edges[i].entry(l).or_insert((T::zero(), T::zero())).0 += T::one();
        }
        if let Opponent::Free(i) = l {
            edges[i].entry(w).or_insert((T::zero(), T::zero())).1 += T::one();
        }
    }
    if let Some(i) = edges.iter().position(|e| e.is_empty()) {
        return Err(Error::invalid(format!("document {:?} has zero comparisons", new_ids[i])));
    }
    let anchor_root = uf.find(n);
    let mut floating: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, id) in new_ids.iter().enumerate() {
        let r = uf.find(i);
        if r != anchor_root {
            floating.entry(r).or_default().push(id.clone());
        }
    }
    if !floating.is_empty() {
        let mut components: Vec<Vec<String>> = vec![fixed_ids.iter().map(|s| s.to_string()).collect()];
        components.extend(floating.into_values());
        return Err(Error::Disconnected { components });
    }

    let anchor_mean = if fixed_values.is_empty() {
        T::one()
    } else {
        fixed_values.iter().copied().sum::<T>() / T::from_usize_lossy(fixed_values.len())
    };
    let mut virtual_games = vec![None; n];
    for (i, e) in edges.iter().enumerate() {
        let wins: T = e.values().map(|x| x.0).sum();
        let losses: T = e.values().map(|x| x.1).sum();
        if wins == T::zero() || losses == T::zero() {
            log::warn!(
                "document {:?} has {} comparisons; adding a virtual half win and half loss",
                new_ids[i],
                if wins == T::zero() { "no winning" } else { "no losing" }
            );
            virtual_games[i] = Some((anchor_mean, T::lit(VIRTUAL_GAME_WEIGHT)));
        }
    }
    let problem = Problem {
        edges: edges
            .into_iter()
            .map(|e| e.into_iter().map(|(o, (w, l))| (o, w, l)).collect())
            .collect(),
        virtual_games,
    };

    let mut pi = vec![anchor_mean; n];
    let mut trace = vec![problem.objective(&pi, &fixed_values)];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let mut next = pi.clone();
        problem.mm_sweep(&mut next, &fixed_values);
        if let Some(bad) = next.iter().position(|x| !(x.is_finite() && *x > T::zero())) {
            return Err(Error::numerical(format!("score for {:?} left (0, ∞)", new_ids[bad])));
        }
        let change = max_relative_change(&pi, &next);
        pi = next;
        trace.push(problem.objective(&pi, &fixed_values));
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("anchored Bradley-Terry fit stopped after {iterations} iterations without converging");
    }
    let mut scores = fixed.scores.clone();
    scores.extend(new_ids.iter().cloned().zip(pi));
    Ok(BtFit {
        scores: BtScores {
            scores,
            normalization: Normalization::MeanOne,
            anchored: true,
        },
        iterations,
        converged,
        trace,
    })
}

/// `Σ log(π_winner / (π_winner + π_loser))` over all records.
pub fn log_likelihood<T: Scalar>(scores: &BtScores<T>, comparisons: &ComparisonSet) -> Result<T> {
    let lookup = |id: &str| {
        scores
            .get(id)
            .ok_or_else(|| Error::invalid(format!("no score for document {id:?}")))
    };
    let mut ll = T::zero();
    for c in &comparisons.records {
        let w = lookup(c.winner_id())?;
        let l = lookup(c.loser_id())?;
        ll += (w / (w + l)).ln();
    }
    Ok(ll)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    /// Percent of cross-group comparisons won.
    pub win_rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_comparisons: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WinRateSummary {
    pub groups: BTreeMap<String, WinRate>,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Per-group share of comparisons won against documents of other groups,
/// with a 95% percentile bootstrap interval from `n_boot` resamples of that
/// group's comparison outcomes.
pub fn win_rate_summary(
    comparisons: &ComparisonSet,
    group_of: &HashMap<String, String>,
    n_boot: usize,
    seed: u64,
) -> Result<WinRateSummary> {
    if n_boot == 0 {
        return Err(Error::invalid("n_boot must be at least 1"));
    }
    let mut outcomes: BTreeMap<&str, Vec<bool>> = group_of.values().map(|g| (g.as_str(), Vec::new())).collect();
    for c in &comparisons.records {
        let group = |id: &str| {
            group_of
                .get(id)
                .map(String::as_str)
                .ok_or_else(|| Error::invalid(format!("document {id:?} has no group")))
        };
        let gw = group(c.winner_id())?;
        let gl = group(c.loser_id())?;
        if gw == gl {
            continue;
        }
        outcomes.get_mut(gw).expect("group registered").push(true);
        outcomes.get_mut(gl).expect("group registered").push(false);
    }

    let mut summary = WinRateSummary::default();
    for (group, results) in outcomes {
        if results.is_empty() {
            return Err(Error::invalid(format!("group {group:?} has no cross-group comparisons")));
        }
        let n = results.len();
        let wins = results.iter().filter(|&&w| w).count();
        let rate = 100.0 * wins as f64 / n as f64;
        let mut rng = seeded(derive_seed(seed, group));
        let mut boots: Vec<f64> = (0..n_boot)
            .map(|_| {
                let won = (0..n).filter(|_| results[rng.random_range(0..n)]).count();
                100.0 * won as f64 / n as f64
            })
            .collect();
        boots.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // percentile intervals need not cover the point estimate; clamp so they do
        let ci_low = percentile(&boots, 0.025).min(rate);
        let ci_high = percentile(&boots, 0.975).max(rate);
        summary.groups.insert(
            group.to_string(),
            WinRate {
                win_rate: rate,
                ci_low,
                ci_high,
                n_comparisons: n,
            },
        );
    }
    Ok(summary)
}

/// CSV `id,score`.
pub fn write_scores<T: Scalar>(path: &Path, scores: &BtScores<T>) -> Result<()> {
    let w = create_writer(path)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "score"]).map_err(|e| csv_error(path, e))?;
    for (id, s) in &scores.scores {
        wtr.write_record([id.clone(), format!("{:?}", s.as_f64())])
            .map_err(|e| csv_error(path, e))?;
    }
    let w = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    finish_writer(path, w)
}

/// CSV `group,win_rate,ci_low,ci_high,n`.
pub fn write_win_rates(path: &Path, summary: &WinRateSummary) -> Result<()> {
    let w = create_writer(path)?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["group", "win_rate", "ci_low", "ci_high", "n"])
        .map_err(|e| csv_error(path, e))?;
    for (g, r) in &summary.groups {
        wtr.write_record([
            g.clone(),
            format!("{:?}", r.win_rate),
            format!("{:?}", r.ci_low),
            format!("{:?}", r.ci_high),
            r.n_comparisons.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    let w = wtr.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    finish_writer(path, w)
}
