use std::collections::HashMap;

use autopersuade::btrank::{fit_bt, fit_bt_fixed, fit_bt_traced, win_rate_summary, BtOptions};
use autopersuade::ingest::{Comparison, ComparisonSet, Winner};
use autopersuade::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

fn random_set(seed: u64, items: usize, extra: usize) -> ComparisonSet {
    let mut rng = seeded(seed);
    let strength: Vec<f64> = (0..items).map(|_| rng.random_range(-1.5f64..1.5).exp()).collect();
    let mut records = Vec::new();
    let game = |idx: usize, a: usize, b: usize, rng: &mut autopersuade::rng::Rng| {
        let p = strength[a] / (strength[a] + strength[b]);
        let winner = if rng.random_bool(p) { Winner::Left } else { Winner::Right };
        Comparison::new(format!("s{idx}"), format!("d{a}"), format!("d{b}"), winner).unwrap()
    };
    // Two laps of a ring guarantee connectivity and a win and a loss for most items.
    for lap in 0..2 {
        for a in 0..items {
            let b = (a + 1) % items;
            let r = if lap == 0 { game(records.len(), a, b, &mut rng) } else { game(records.len(), b, a, &mut rng) };
            records.push(r);
        }
    }
    for _ in 0..extra {
        let a = rng.random_range(0..items);
        let b = (a + rng.random_range(1..items)) % items;
        let r = game(records.len(), a, b, &mut rng);
        records.push(r);
    }
    ComparisonSet::new(records).unwrap()
}

/// True when every item has at least one win and one loss, so no virtual games enter the fit.
fn interior(set: &ComparisonSet) -> bool {
    let mut record: HashMap<&str, (usize, usize)> = HashMap::new();
    for c in &set.records {
        record.entry(c.winner_id()).or_default().0 += 1;
        record.entry(c.loser_id()).or_default().1 += 1;
    }
    record.values().all(|&(w, l)| w > 0 && l > 0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mm_objective_never_decreases(seed in any::<u64>(), items in 3usize..15, extra in 0usize..60) {
        let set = random_set(seed, items, extra);
        let fit = fit_bt_traced::<f64>(&set, BtOptions::default()).unwrap();
        for pair in fit.trace.windows(2) {
            prop_assert!(pair[1] >= pair[0] - 1e-12, "{} -> {}", pair[0], pair[1]);
        }
        prop_assert!((fit.scores.mean() - 1.0).abs() < 1e-10);
        prop_assert!(fit.scores.scores.values().all(|&v| v > 0.0));
    }

    #[test]
    fn mirroring_records_changes_nothing(seed in any::<u64>(), items in 3usize..12, extra in 0usize..40) {
        let set = random_set(seed, items, extra);
        prop_assume!(interior(&set));
        let mirrored = ComparisonSet::new(set.records.iter().map(Comparison::mirrored).collect()).unwrap();
        let doubled = ComparisonSet::new(set.records.iter().cloned().chain(mirrored.records.iter().cloned()).collect()).unwrap();
        let a = fit_bt::<f64>(&set, BtOptions::default()).unwrap();
        let b = fit_bt::<f64>(&mirrored, BtOptions::default()).unwrap();
        let c = fit_bt::<f64>(&doubled, BtOptions::default()).unwrap();
        for (id, &v) in &a.scores {
            prop_assert!((v - b.scores[id]).abs() < 1e-6 * v);
            prop_assert!((v - c.scores[id]).abs() < 1e-6 * v);
        }
    }

    #[test]
    fn two_item_ratio_matches_record(wins in 1usize..20, losses in 1usize..20) {
        let mut records = Vec::new();
        for i in 0..wins + losses {
            let w = if i < wins { Winner::Left } else { Winner::Right };
            records.push(Comparison::new(format!("s{i}"), "a", "b", w).unwrap());
        }
        let s = fit_bt::<f64>(&ComparisonSet::new(records).unwrap(), BtOptions::default()).unwrap();
        let ratio = s.scores["a"] / s.scores["b"];
        prop_assert!((ratio - wins as f64 / losses as f64).abs() < 1e-6 * ratio);
    }

    #[test]
    fn anchors_come_back_unchanged(seed in any::<u64>(), items in 4usize..12) {
        let set = random_set(seed, items, 30);
        let fixed_ids: Vec<String> = (0..items / 2).map(|i| format!("d{i}")).collect();
        let new_ids: Vec<String> = (items / 2..items).map(|i| format!("d{i}")).collect();
        let base = fit_bt::<f64>(&set, BtOptions::default()).unwrap();
        let mut fixed = base.clone();
        fixed.scores.retain(|k, _| fixed_ids.contains(k));
        let anchored = fit_bt_fixed(&set, &fixed, &new_ids, BtOptions::default()).unwrap();
        prop_assert!(anchored.anchored);
        for id in &fixed_ids {
            prop_assert_eq!(anchored.scores[id].to_bits(), fixed.scores[id].to_bits());
        }
    }
}

#[test]
fn win_rates_are_seed_deterministic() {
    let set = random_set(4, 20, 200);
    let groups: HashMap<String, String> =
        (0..20).map(|i| (format!("d{i}"), if i % 2 == 0 { "even" } else { "odd" }.to_string())).collect();
    let a = win_rate_summary(&set, &groups, 200, 9).unwrap();
    let b = win_rate_summary(&set, &groups, 200, 9).unwrap();
    assert_eq!(a, b);
    for r in a.groups.values() {
        assert!(r.ci_low <= r.win_rate && r.win_rate <= r.ci_high);
        assert!((0.0..=100.0).contains(&r.ci_low) && r.ci_high <= 100.0);
    }
    let even = a.groups["even"].win_rate;
    let odd = a.groups["odd"].win_rate;
    assert!((even + odd - 100.0).abs() < 1e-9);
}
