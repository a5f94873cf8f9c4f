use std::collections::{BTreeMap, BTreeSet};

use autopersuade::evaluation::{
    cross_validate, filter_candidates, fold_assignment, generate_synthetic, topic_coherence, CvOptions, Direction,
    FilterCriteria, Scored, SyntheticSpec,
};
use autopersuade::ingest::{stratified_split, Corpus, Document, Split};
use autopersuade::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

fn umass(words: &[String], corpus: &Corpus) -> f64 {
    let has = |d: &Document, w: &str| d.text.split(' ').any(|t| t == w);
    let mut total = 0.0;
    for m in 1..words.len() {
        for l in 0..m {
            let dl = corpus.documents().iter().filter(|d| has(d, &words[l])).count() as f64;
            let dml = corpus.documents().iter().filter(|d| has(d, &words[l]) && has(d, &words[m])).count() as f64;
            total += ((dml + 1.0) / dl).ln();
        }
    }
    total
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_and_repeat(n in 10usize..200, folds in 2usize..10, seed in any::<u64>()) {
        prop_assume!(folds <= n);
        let a = fold_assignment(n, folds, seed);
        prop_assert_eq!(&a, &fold_assignment(n, folds, seed));
        prop_assert_eq!(a.len(), n);
        let mut sizes = vec![0usize; folds];
        for &f in &a {
            sizes[f] += 1;
        }
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn split_is_a_partition(n in 3usize..80, roots in 1usize..6, frac in 0.2f64..0.8, seed in any::<u64>()) {
        let docs: Vec<Document> = (0..n)
            .map(|i| Document::new(format!("d{i}"), "some text", Some(format!("r{}", i % roots))))
            .collect();
        let split = stratified_split(&Corpus::new(docs).unwrap(), frac, seed).unwrap();
        let train: BTreeSet<String> = split.ids_in(Split::Train).unwrap().into_iter().collect();
        let est: BTreeSet<String> = split.ids_in(Split::Estimation).unwrap().into_iter().collect();
        prop_assert_eq!(train.len() + est.len(), n);
        prop_assert!(train.is_disjoint(&est));
        prop_assert_eq!(train.len(), (n as f64 * frac).round() as usize);
    }

    #[test]
    fn coherence_follows_word_order(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let vocab = ["apple", "banana", "cherry", "durian"];
        let docs: Vec<Document> = (0..12)
            .map(|i| {
                let words: Vec<&str> = vocab.iter().copied().filter(|_| i == 0 || rng.random_bool(0.5)).collect();
                Document::new(format!("d{i}"), words.join(" "), None)
            })
            .collect();
        let corpus = Corpus::new(docs).unwrap();
        let fwd: Vec<String> = vocab.iter().map(|w| w.to_string()).collect();
        let rev: Vec<String> = fwd.iter().rev().cloned().collect();
        let a = topic_coherence(&fwd, &corpus).unwrap();
        let b = topic_coherence(&rev, &corpus).unwrap();
        prop_assert_eq!(a.to_bits(), topic_coherence(&fwd, &corpus).unwrap().to_bits());
        prop_assert!((a - umass(&fwd, &corpus)).abs() < 1e-12);
        prop_assert!((b - umass(&rev, &corpus)).abs() < 1e-12);
    }

    #[test]
    fn filter_is_pure(seed in any::<u64>(), threshold in -1.0f64..1.0) {
        let mut rng = seeded(seed);
        let scored = |id: String, rng: &mut autopersuade::rng::Rng| Scored {
            id,
            loadings: (0..3).map(|_| rng.random_range(0.0..3.0)).collect(),
            score: rng.random_range(0.0..2.0),
        };
        let candidates: Vec<Scored> = (0..20).map(|i| scored(format!("c{i}"), &mut rng)).collect();
        let protos: BTreeMap<String, Vec<Scored>> = candidates
            .iter()
            .map(|c| (c.id.clone(), vec![scored(format!("p-{}", c.id), &mut rng)]))
            .collect();
        for criteria in [
            FilterCriteria::synthesis(0, 1),
            FilterCriteria::emphasis(2),
            FilterCriteria::topic_shift(1, Direction::Decrease, threshold),
        ] {
            let a = filter_candidates(&candidates, &protos, &criteria).unwrap();
            let b = filter_candidates(&candidates, &protos, &criteria).unwrap();
            prop_assert_eq!(&a, &b);
            for d in &a {
                prop_assert!(!d.reason.is_empty());
                prop_assert_eq!(d.accepted, d.reason == "ok");
            }
        }
    }
}

#[test]
fn cv_means_ignore_grid_order() {
    let spec = SyntheticSpec::new(80, 8, 2, 0.1, 3);
    let data = generate_synthetic(&spec).unwrap();
    let m = data.embeddings.values().view();
    let grid = vec![(1, 0.3), (2, 0.5), (3, 0.7)];
    let mut reversed = grid.clone();
    reversed.reverse();
    let mut a = CvOptions::new(grid.clone(), 4, 5);
    let mut b = CvOptions::new(reversed, 4, 5);
    a.n_iters = 20;
    b.n_iters = 20;
    let ra = cross_validate(m, data.y.view(), &a).unwrap();
    let rb = cross_validate(m, data.y.view(), &b).unwrap();
    for (j, alpha) in grid {
        assert_eq!(ra.mean_test_mse(j, alpha).unwrap(), rb.mean_test_mse(j, alpha).unwrap());
    }
    assert_eq!(ra.baseline, rb.baseline);
    assert_eq!(ra.to_csv().lines().next().unwrap(), "J,alpha,fold,train_mse,test_mse");
    assert_eq!(ra.to_csv().lines().count(), 1 + 3 * 4);
}

#[test]
fn synthetic_data_is_seed_deterministic() {
    let spec = SyntheticSpec::new(40, 6, 3, 0.05, 12);
    let a = generate_synthetic(&spec).unwrap();
    let b = generate_synthetic(&spec).unwrap();
    assert_eq!(a.embeddings.values(), b.embeddings.values());
    assert_eq!(a.y, b.y);
    assert_eq!(a.comparisons, b.comparisons);
    assert_eq!(a.corpus.documents(), b.corpus.documents());
    let other = generate_synthetic(&SyntheticSpec::new(40, 6, 3, 0.05, 13)).unwrap();
    assert_ne!(a.y, other.y);
}
