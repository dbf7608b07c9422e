use std::collections::HashMap;
use std::hash::Hash;

use serde::Serialize;

use super::ParseError;
use crate::model::SceneGraph;

/// Counts and derived scores for one category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryScore {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl CategoryScore {
    /// `None` when nothing was predicted.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when the gold side is empty.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    fn add<T: Eq + Hash>(&mut self, predicted: Vec<T>, gold: Vec<T>) {
        let mut remaining: HashMap<T, u64> = HashMap::new();
        for g in gold {
            *remaining.entry(g).or_default() += 1;
        }
        let gold_total: u64 = remaining.values().sum();
        let mut tp = 0;
        for p in predicted {
            match remaining.get_mut(&p) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    tp += 1;
                }
                _ => self.fp += 1,
            }
        }
        self.tp += tp;
        self.fn_ += gold_total - tp;
    }
}

/// Parser quality against gold graphs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ParserReport {
    pub object: CategoryScore,
    pub attribute: CategoryScore,
    pub relationship: CategoryScore,
    pub triplet: CategoryScore,
    pub captions: usize,
}

impl ParserReport {
    pub fn categories(&self) -> [(&'static str, &CategoryScore); 4] {
        [
            ("object", &self.object),
            ("attribute", &self.attribute),
            ("relationship", &self.relationship),
            ("triplet", &self.triplet),
        ]
    }
}

fn object_lemmas(g: &SceneGraph) -> Vec<String> {
    g.objects().iter().map(|o| o.lemma().to_string()).collect()
}

fn attribute_lemmas(g: &SceneGraph) -> Vec<String> {
    g.objects()
        .iter()
        .flat_map(|o| o.attributes.iter().map(|a| a.lemma().to_string()))
        .collect()
}

fn relationship_lemmas(g: &SceneGraph) -> Vec<String> {
    g.relationships()
        .iter()
        .map(|e| e.relationship.lemma().to_string())
        .collect()
}

fn triplets(g: &SceneGraph) -> Vec<(String, String, String)> {
    g.relationships()
        .iter()
        .map(|e| {
            let name = |id| {
                g.object(id)
                    .map(|o| o.lemma().to_string())
                    .unwrap_or_default()
            };
            (
                name(e.subject_id),
                e.relationship.lemma().to_string(),
                name(e.object_id),
            )
        })
        .collect()
}

/// Multiset matching per caption, summed over the corpus.
pub fn evaluate_parser(
    predictions: &[SceneGraph],
    gold: &[SceneGraph],
) -> Result<ParserReport, ParseError> {
    if predictions.len() != gold.len() {
        return Err(ParseError::AlignmentError {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    let mut report = ParserReport {
        captions: gold.len(),
        ..Default::default()
    };
    for (p, g) in predictions.iter().zip(gold) {
        report.object.add(object_lemmas(p), object_lemmas(g));
        report
            .attribute
            .add(attribute_lemmas(p), attribute_lemmas(g));
        report
            .relationship
            .add(relationship_lemmas(p), relationship_lemmas(g));
        report.triplet.add(triplets(p), triplets(g));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(objects: &[&str]) -> SceneGraph {
        let mut b = SceneGraph::builder("g");
        for (i, o) in objects.iter().enumerate() {
            b = b.object(i as u64, o, &[]);
        }
        b.build().unwrap()
    }

    #[test]
    fn exact_match_is_perfect() {
        let gold = vec![SceneGraph::builder("g")
            .object(0, "boy", &["tall"])
            .object(1, "grass", &[])
            .relation(0, "on", 1)
            .build()
            .unwrap()];
        let r = evaluate_parser(&gold, &gold).unwrap();
        for (_, c) in r.categories() {
            assert_eq!(c.precision(), Some(1.0));
            assert_eq!(c.recall(), Some(1.0));
        }
    }

    #[test]
    fn empty_prediction() {
        let r = evaluate_parser(&[SceneGraph::empty("p")], &[g(&["dog"])]).unwrap();
        assert_eq!(r.object.recall(), Some(0.0));
        assert_eq!(r.object.precision(), None);
    }

    #[test]
    fn partial_match() {
        let r = evaluate_parser(&[g(&["dog", "car"])], &[g(&["dog", "bed"])]).unwrap();
        assert_eq!((r.object.tp, r.object.fp, r.object.fn_), (1, 1, 1));
        assert_eq!(r.object.precision(), Some(0.5));
        assert_eq!(r.object.recall(), Some(0.5));
    }

    #[test]
    fn multiset_counts_duplicates() {
        let r = evaluate_parser(&[g(&["window", "window"])], &[g(&["window"])]).unwrap();
        assert_eq!((r.object.tp, r.object.fp, r.object.fn_), (1, 1, 0));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            evaluate_parser(&[], &[g(&["dog"])]),
            Err(ParseError::AlignmentError {
                predictions: 0,
                gold: 1
            })
        ));
    }
}
