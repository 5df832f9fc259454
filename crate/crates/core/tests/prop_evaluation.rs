#![allow(clippy::needless_range_loop)]

use colanet::evaluation::{classify_window, evaluate, f_score, Prediction};
use proptest::prelude::*;

fn predictions() -> impl Strategy<Value = Vec<Prediction>> {
    proptest::collection::vec((proptest::option::weighted(0.9, 0u8..10), 0u8..10), 1..1_000).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(image_index, (predicted, actual))| Prediction { image_index, predicted, actual })
            .collect()
    })
}

proptest! {
    #[test]
    fn accuracy_identity(preds in predictions()) {
        let m = evaluate(&preds).unwrap();
        let errors = preds.iter().filter(|p| p.predicted != Some(p.actual)).count();
        prop_assert_eq!(m.errors, errors);
        prop_assert!((m.accuracy - (1.0 - errors as f64 / preds.len() as f64)).abs() < 1e-12);
    }

    #[test]
    fn per_class_matches_confusion_matrix(preds in predictions()) {
        // rows: actual, columns: predicted, column 10 holds silent windows
        let mut confusion = [[0usize; 11]; 10];
        for p in &preds {
            confusion[p.actual as usize][p.predicted.map_or(10, usize::from)] += 1;
        }
        let m = evaluate(&preds).unwrap();
        for c in 0..10 {
            let tp = confusion[c][c] as f64;
            let col: usize = (0..10).map(|a| confusion[a][c]).sum();
            let row: usize = confusion[c].iter().sum();
            let p = if col == 0 { 0.0 } else { tp / col as f64 };
            let r = if row == 0 { 0.0 } else { tp / row as f64 };
            let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            prop_assert!((m.per_class[c].precision - p).abs() < 1e-12);
            prop_assert!((m.per_class[c].recall - r).abs() < 1e-12);
            prop_assert!((m.per_class[c].f_score - f).abs() < 1e-12);
            prop_assert!((f_score(p, r) - f).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_window_is_permutation_covariant(
        counts in proptest::collection::vec(0u32..50, 10),
        perm in Just((0..10usize).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let max = *counts.iter().max().unwrap();
        prop_assume!(counts.iter().filter(|&&c| c == max).count() == 1);
        // permuted[perm[i]] = counts[i]
        let mut permuted = vec![0; 10];
        for (i, &c) in counts.iter().enumerate() {
            permuted[perm[i]] = c;
        }
        let before = classify_window(&counts);
        let after = classify_window(&permuted);
        prop_assert_eq!(after, before.map(|b| perm[b as usize] as u8));
    }

    #[test]
    fn ties_go_to_the_lowest_class(counts in proptest::collection::vec(0u32..4, 10)) {
        let max = *counts.iter().max().unwrap();
        let want = (max > 0).then(|| counts.iter().position(|&c| c == max).unwrap() as u8);
        prop_assert_eq!(classify_window(&counts), want);
    }
}
