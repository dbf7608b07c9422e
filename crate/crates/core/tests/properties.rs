mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::{graph_spec, GraphSpec};
use forge_core::caption::template_caption;
use forge_core::index::{classify_split, SeenIndex, SplitLabel};
use forge_core::parser::{parse_caption, Lexicon};
use forge_core::sampler::{random_walk, SampleError};
use forge_core::{SceneGraph, WalkConfig};

fn oracle_split(test: &SceneGraph, train: &[SceneGraph]) -> SplitLabel {
    let atoms: BTreeSet<_> = train.iter().flat_map(|g| g.atoms()).collect();
    let compounds: BTreeSet<_> = train.iter().flat_map(|g| g.compounds()).collect();
    if !test.atoms().is_subset(&atoms) {
        SplitLabel::UA
    } else if !test.compounds().is_subset(&compounds) {
        SplitLabel::UC
    } else {
        SplitLabel::SC
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn split_matches_set_definition(
        train in proptest::collection::vec(graph_spec(3), 0..6),
        test in proptest::collection::vec(graph_spec(3), 1..6),
    ) {
        let train: Vec<SceneGraph> = train.iter().enumerate().map(|(i, s)| s.build(&format!("t{i}"))).collect();
        let mut index = SeenIndex::new("train");
        for g in &train {
            index.add(g);
        }
        for (i, s) in test.iter().enumerate() {
            let g = s.build(&format!("x{i}"));
            prop_assert_eq!(classify_split(&g, &index), oracle_split(&g, &train));
        }
    }

    #[test]
    fn template_round_trips(spec in graph_spec(5)) {
        let g = spec.build("g");
        let text = template_caption(&g).unwrap();
        let parsed = parse_caption(&text, &Lexicon::bundled()).unwrap();
        prop_assert_eq!(parsed.canonical(), g.canonical(), "{}", text);
    }

    #[test]
    fn walk_yields_exact_substructure(spec in graph_spec(5), seed in 0u64..1000, n in 2usize..7) {
        let g = spec.build("g");
        let config = WalkConfig { n, seed, ..WalkConfig::default() };
        match random_walk(&g, &config, 0) {
            Ok(sampled) => {
                let sub = &sampled.subgraph;
                prop_assert_eq!(sub.atom_count(), n);
                for o in sub.objects() {
                    let parent = g.object(o.id).unwrap();
                    prop_assert_eq!(parent.lemma(), o.lemma());
                    for a in &o.attributes {
                        prop_assert!(parent.attributes.contains(a));
                    }
                }
                for e in sub.relationships() {
                    prop_assert!(g.relationships().contains(e));
                }
                let again = random_walk(&g, &config, 0).unwrap();
                prop_assert_eq!(&again.subgraph, sub);
            }
            Err(SampleError::GraphTooSmall { atoms, .. }) => prop_assert!(atoms < n),
            Err(e) => prop_assert!(matches!(e, SampleError::WalkFailed { .. }), "{e}"),
        }
    }
}

#[test]
fn spec_builder_is_deterministic() {
    let spec = GraphSpec {
        objects: vec![(0, vec![0]), (2, vec![])],
        edges: vec![(0, 0, 1)],
    };
    let text = template_caption(&spec.build("g")).unwrap();
    assert_eq!(text, "black dog on bed");
}
