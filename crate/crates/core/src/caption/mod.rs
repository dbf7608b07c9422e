//! Ground-truth captions for sampled subgraphs: a deterministic template,
//! few-shot prompts for an external text generator, and a filter that
//! rejects generated captions dropping objects.

mod client;
mod prompt;
mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{GenClient, HttpClient, MockClient, API_KEY_VAR, ENDPOINT_VAR, TIMEOUT_VAR};
pub use prompt::{
    build_prompt, object_names, objects_line, relations_line, FewShotBank, FewShotExample,
    PromptSpec, FEW_SHOT_PER_N,
};
pub use template::{article, object_phrase, sentence_case, template_caption};

use crate::model::{singularize, SceneGraph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CaptionError {
    #[error("cannot caption an empty graph")]
    EmptyGraph,
    #[error("caption configuration: {0}")]
    Config(String),
    #[error("generation client: {0}")]
    Client(String),
}

/// Lowercase word tokens.
fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'' && c != '-')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

fn singular_words(words: &[String]) -> Vec<String> {
    words.iter().map(|w| singularize(w)).collect()
}

/// Accepts when every object of `graph` is mentioned in `caption`, by lemma
/// or by surface form, after lowercasing and singularizing. With `strict`,
/// attributes and relationships must appear too. Synonyms do not count.
pub fn filter_generated(caption: &str, graph: &SceneGraph, strict: bool) -> bool {
    let raw = words(caption);
    let singular = singular_words(&raw);
    let mentioned = |lemma: &str, surface: &str| {
        let lemma_words = words(lemma);
        contains_phrase(&raw, &lemma_words)
            || contains_phrase(&singular, &singular_words(&lemma_words))
            || contains_phrase(&raw, &words(surface))
    };
    let objects_ok = graph
        .objects()
        .iter()
        .all(|o| mentioned(o.lemma(), o.atom.surface()));
    if !objects_ok || !strict {
        return objects_ok;
    }
    graph
        .objects()
        .iter()
        .flat_map(|o| &o.attributes)
        .chain(graph.relationships().iter().map(|e| &e.relationship))
        .all(|a| mentioned(a.lemma(), a.surface()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Template,
    Client,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionConfig {
    /// Complexities at or above this use the client when one is configured.
    pub cutover: usize,
    pub max_tokens: usize,
    /// Client requests in flight at once.
    pub max_in_flight: usize,
    /// Also require attributes and relationships in generated captions.
    pub strict_filter: bool,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        CaptionConfig {
            cutover: 5,
            max_tokens: 64,
            max_in_flight: 4,
            strict_filter: false,
        }
    }
}

/// Result of captioning one subgraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CaptionOutcome {
    Accepted {
        text: String,
        engine: Engine,
    },
    /// A generated caption that failed the object filter.
    Rejected {
        text: String,
    },
    Failed {
        error: String,
    },
}

fn caption_one(
    graph: &SceneGraph,
    config: &CaptionConfig,
    client: Option<(&dyn GenClient, &FewShotBank)>,
) -> CaptionOutcome {
    let use_client = graph.atom_count() >= config.cutover;
    match client {
        Some((client, bank)) if use_client => {
            let generated = build_prompt(graph, bank)
                .and_then(|p| client.generate(&p.render(), config.max_tokens));
            match generated {
                Ok(text) if filter_generated(&text, graph, config.strict_filter) => {
                    CaptionOutcome::Accepted {
                        text,
                        engine: Engine::Client,
                    }
                }
                Ok(text) => CaptionOutcome::Rejected { text },
                Err(e) => CaptionOutcome::Failed {
                    error: e.to_string(),
                },
            }
        }
        _ => match template_caption(graph) {
            Ok(text) => CaptionOutcome::Accepted {
                text,
                engine: Engine::Template,
            },
            Err(e) => CaptionOutcome::Failed {
                error: e.to_string(),
            },
        },
    }
}

/// Captions every graph. Client calls run on at most `max_in_flight`
/// threads; outcomes are returned in input order.
pub fn generate_captions(
    graphs: &[SceneGraph],
    config: &CaptionConfig,
    client: Option<(&dyn GenClient, &FewShotBank)>,
) -> Result<Vec<CaptionOutcome>, CaptionError> {
    use rayon::prelude::*;
    if config.cutover < 2 {
        return Err(CaptionError::Config("cutover must be at least 2".into()));
    }
    if client.is_none() {
        return Ok(graphs
            .iter()
            .map(|g| caption_one(g, config, None))
            .collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.max_in_flight.max(1))
        .build()
        .map_err(|e| CaptionError::Config(e.to_string()))?;
    Ok(pool.install(|| {
        graphs
            .par_iter()
            .map(|g| caption_one(g, config, client))
            .collect()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::Lexicon;
    use std::sync::Arc;

    fn bench_graph() -> SceneGraph {
        SceneGraph::builder("g")
            .object(0, "woman", &["old"])
            .object(1, "bench", &["wooden"])
            .relation(0, "sitting on", 1)
            .build()
            .unwrap()
    }

    #[test]
    fn filter_examples() {
        let g = bench_graph();
        assert!(filter_generated(&template_caption(&g).unwrap(), &g, true));
        assert!(!filter_generated(
            "An old woman sitting on the grass",
            &g,
            false
        ));
        assert!(filter_generated("Two women sitting on a bench", &g, false));
        assert!(!filter_generated("Two women sitting on a bench", &g, true));
        let couch = SceneGraph::builder("g")
            .object(0, "couch", &[])
            .build()
            .unwrap();
        assert!(!filter_generated("a cat on a sofa", &couch, false));
    }

    #[test]
    fn engine_cutover() {
        let small = SceneGraph::builder("s")
            .object(0, "dog", &["black"])
            .build()
            .unwrap();
        let big = bench_graph();
        let bank = FewShotBank::new(
            (0..5)
                .map(|_| FewShotExample {
                    n: big.atom_count(),
                    graph: big.clone(),
                    caption: "an old woman sitting on a wooden bench".into(),
                })
                .collect(),
        );
        let mock = MockClient::new(Arc::new(Lexicon::bundled()));
        let config = CaptionConfig::default();
        let out = generate_captions(&[small.clone(), big.clone()], &config, Some((&mock, &bank)))
            .unwrap();
        assert_eq!(
            out[0],
            CaptionOutcome::Accepted {
                text: "black dog".into(),
                engine: Engine::Template
            }
        );
        assert_eq!(
            out[1],
            CaptionOutcome::Accepted {
                text: "Old woman sitting on wooden bench".into(),
                engine: Engine::Client
            }
        );
        let out = generate_captions(&[big], &config, None).unwrap();
        assert!(matches!(
            &out[0],
            CaptionOutcome::Accepted {
                engine: Engine::Template,
                ..
            }
        ));
    }

    struct Forgetful;

    impl GenClient for Forgetful {
        fn name(&self) -> &str {
            "forgetful"
        }

        fn generate(&self, _: &str, _: usize) -> Result<String, CaptionError> {
            Ok("an old woman".into())
        }
    }

    #[test]
    fn rejected_and_failed() {
        let g = bench_graph();
        let config = CaptionConfig {
            cutover: 2,
            ..Default::default()
        };
        let out = generate_captions(
            std::slice::from_ref(&g),
            &config,
            Some((&Forgetful, &FewShotBank::default())),
        )
        .unwrap();
        assert!(matches!(&out[0], CaptionOutcome::Failed { .. }));
        let bank = FewShotBank::new(
            (0..5)
                .map(|_| FewShotExample {
                    n: g.atom_count(),
                    graph: g.clone(),
                    caption: "x".into(),
                })
                .collect(),
        );
        let out = generate_captions(&[g], &config, Some((&Forgetful, &bank))).unwrap();
        assert_eq!(
            out[0],
            CaptionOutcome::Rejected {
                text: "an old woman".into()
            }
        );
    }
}
