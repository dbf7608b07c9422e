use proptest::prelude::*;

use forge_core::eval::{recall_at_k, Direction, RetrievalItem, Stratum, RECALL_KS};
use forge_core::ScoreTable;

fn table_items(sets: &[Vec<i8>]) -> (Vec<RetrievalItem>, ScoreTable) {
    let mut table = ScoreTable::new("prop");
    let items = sets
        .iter()
        .enumerate()
        .map(|(i, scores)| {
            let q = format!("q{i}");
            let ids: Vec<String> = (0..scores.len()).map(|k| format!("{q}/{k}")).collect();
            for (id, &s) in ids.iter().zip(scores) {
                table.insert(&q, id, f64::from(s));
            }
            RetrievalItem::new(
                &q,
                ids[0].clone(),
                ids,
                Stratum::default(),
                Direction::ImageToText,
            )
            .unwrap()
        })
        .collect();
    (items, table)
}

proptest! {
    #[test]
    fn recall_monotone_in_k(sets in proptest::collection::vec(proptest::collection::vec(-3i8..3, 1..8), 1..30)) {
        let (items, table) = table_items(&sets);
        let r: Vec<f64> = RECALL_KS.iter().map(|&k| recall_at_k(&items, &table, k).unwrap()).collect();
        prop_assert!(r.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(r.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let max = sets.iter().map(Vec::len).max().unwrap();
        prop_assert_eq!(recall_at_k(&items, &table, max).unwrap(), 1.0);
    }

    #[test]
    fn pessimistic_rank_counts_ties(scores in proptest::collection::vec(-2i8..2, 1..10)) {
        let (items, table) = table_items(std::slice::from_ref(&scores));
        let rank = items[0].gt_rank(&table).unwrap();
        let expected = 1 + scores[1..].iter().filter(|&&s| s >= scores[0]).count();
        prop_assert_eq!(rank, expected);
    }
}
