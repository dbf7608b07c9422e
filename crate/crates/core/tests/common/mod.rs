#![allow(dead_code)]

use proptest::prelude::*;

use forge_core::SceneGraph;

pub const NOUNS: &[&str] = &[
    "dog", "cat", "bed", "table", "car", "tree", "man", "woman", "horse", "field",
];
pub const ADJECTIVES: &[&str] = &[
    "black", "white", "red", "tall", "small", "wooden", "old", "striped",
];
pub const RELATIONS: &[&str] = &[
    "on",
    "near",
    "under",
    "behind",
    "next to",
    "holding",
    "in front of",
];

/// Raw material for one graph: object (noun, attributes) and edges.
#[derive(Debug, Clone)]
pub struct GraphSpec {
    pub objects: Vec<(usize, Vec<usize>)>,
    pub edges: Vec<(usize, usize, usize)>,
}

impl GraphSpec {
    pub fn build(&self, id: &str) -> SceneGraph {
        let mut b = SceneGraph::builder(id);
        for (i, (noun, attrs)) in self.objects.iter().enumerate() {
            let attrs: Vec<&str> = attrs.iter().map(|&a| ADJECTIVES[a]).collect();
            b = b.object(i as u64, NOUNS[*noun], &attrs);
        }
        for &(s, r, o) in &self.edges {
            b = b.relation(s as u64, RELATIONS[r], o as u64);
        }
        b.build().expect("spec builds a valid graph")
    }
}

/// Graphs with distinct object nouns, up to `max_objects` objects, and at
/// most one edge per ordered pair.
pub fn graph_spec(max_objects: usize) -> impl Strategy<Value = GraphSpec> {
    (1..=max_objects)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::sample::subsequence((0..NOUNS.len()).collect::<Vec<_>>(), n)
                    .prop_shuffle(),
                proptest::collection::vec(
                    proptest::sample::subsequence((0..ADJECTIVES.len()).collect::<Vec<_>>(), 0..=2),
                    n,
                ),
                proptest::collection::vec((0..n, 0..n, 0..RELATIONS.len()), 0..=n + 1),
            )
        })
        .prop_map(|(_, nouns, attrs, raw_edges)| {
            let objects = nouns.into_iter().zip(attrs).collect();
            let mut edges: Vec<(usize, usize, usize)> = Vec::new();
            for (s, o, r) in raw_edges {
                if s != o
                    && !edges
                        .iter()
                        .any(|e| (e.0 == s && e.2 == o) || (e.0 == o && e.2 == s))
                {
                    edges.push((s, r, o));
                }
            }
            GraphSpec { objects, edges }
        })
}
