//! Fixed-complexity subgraph sampling by seeded random walk.
//!
//! A walk starts at a uniformly chosen object and repeatedly adds a compound
//! with at least one atom not yet added: attribute-object compounds keep the
//! walk on the same object, relationship edges move it to the newly reached
//! endpoint. When the current object has nothing left to add, the walk moves
//! to another added object of the same component that does; when the whole
//! component is exhausted it jumps to an object of an unvisited component.
//! The walk stops at exactly `n` atoms; a step that would overshoot discards
//! the walk and a new one is drawn.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::index::FilterPolicy;
use crate::model::{ObjectId, ObjectNode, Region, RelEdge, SceneGraph};
use crate::scalar::{from_count, Ratio};
use crate::seed::{derive_seed, rng, Rng};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("graph {image_id} has {atoms} atoms, fewer than n = {n}")]
    GraphTooSmall {
        image_id: String,
        atoms: usize,
        n: usize,
    },
    #[error("graph {image_id}: no walk reached n = {n} in {attempts} attempts")]
    WalkFailed {
        image_id: String,
        n: usize,
        attempts: usize,
    },
    #[error("invalid walk configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct WalkConfig<T> {
    /// Target atom count.
    pub n: usize,
    /// Walks drawn before giving up.
    pub max_retries: usize,
    pub seed: u64,
    pub samples_per_image_per_n: usize,
    /// Largest crop IoU allowed between kept samples of one image and `n`.
    pub max_overlap: T,
}

impl<T: Ratio> Default for WalkConfig<T> {
    fn default() -> Self {
        WalkConfig {
            n: 4,
            max_retries: 100,
            seed: 0,
            samples_per_image_per_n: 4,
            max_overlap: from_count::<T>(3) / from_count(4),
        }
    }
}

impl<T: Ratio> WalkConfig<T> {
    pub fn validate(&self) -> Result<(), SampleError> {
        if self.n < 2 {
            return Err(SampleError::InvalidConfig(format!(
                "n = {} is below 2",
                self.n
            )));
        }
        if self.max_retries == 0 {
            return Err(SampleError::InvalidConfig(
                "max_retries must be positive".into(),
            ));
        }
        if self.max_overlap <= T::zero() || self.max_overlap > T::one() {
            return Err(SampleError::InvalidConfig(
                "max_overlap must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        WalkConfig { n, ..self.clone() }
    }
}

/// A sampled subgraph and the crop covering its objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSubgraph {
    pub subgraph: SceneGraph,
    pub parent_image_id: String,
    /// Union of member boxes; `None` when a member has no box.
    pub crop: Option<Region>,
    pub complexity: usize,
    pub sample_index: usize,
}

impl SampledSubgraph {
    /// Stable identifier `image/n/index`.
    pub fn id(&self) -> String {
        format!(
            "{}/{}/{}",
            self.parent_image_id, self.complexity, self.sample_index
        )
    }
}

/// Compound instance of the parent graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Step {
    /// Object id and attribute index.
    Attr(ObjectId, usize),
    /// Edge index.
    Edge(usize),
}

/// One event of a walk, for inspection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkEvent {
    Start(ObjectId),
    Add(Step),
    /// Moved to another added object of the same component.
    Move(ObjectId),
    /// Jumped to an object of an unvisited component.
    Jump(ObjectId),
}

#[derive(Debug, Default, Clone)]
struct Selection {
    objects: BTreeSet<ObjectId>,
    steps: BTreeSet<Step>,
}

impl Selection {
    fn atoms(&self) -> usize {
        self.objects.len() + self.steps.len()
    }
}

struct WalkGraph<'a> {
    graph: &'a SceneGraph,
    component: BTreeMap<ObjectId, usize>,
    components: Vec<Vec<ObjectId>>,
}

impl<'a> WalkGraph<'a> {
    fn new(graph: &'a SceneGraph) -> Self {
        let components = graph.components();
        let mut component = BTreeMap::new();
        for (i, c) in components.iter().enumerate() {
            for &id in c {
                component.insert(id, i);
            }
        }
        WalkGraph {
            graph,
            component,
            components,
        }
    }

    fn eligible(&self, sel: &Selection, at: ObjectId) -> Vec<Step> {
        let mut out = Vec::new();
        if let Some(node) = self.graph.object(at) {
            for i in 0..node.attributes.len() {
                let s = Step::Attr(at, i);
                if !sel.steps.contains(&s) {
                    out.push(s);
                }
            }
        }
        for (i, e) in self.graph.relationships().iter().enumerate() {
            let s = Step::Edge(i);
            if (e.subject_id == at || e.object_id == at) && !sel.steps.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    fn added_atoms(&self, sel: &Selection, step: Step) -> usize {
        match step {
            Step::Attr(o, _) => 1 + usize::from(!sel.objects.contains(&o)),
            Step::Edge(i) => {
                let e = &self.graph.relationships()[i];
                let mut ends = BTreeSet::from([e.subject_id, e.object_id]);
                ends.retain(|id| !sel.objects.contains(id));
                1 + ends.len()
            }
        }
    }

    /// One walk attempt; `None` if it overshoots or runs out of atoms.
    fn walk(&self, n: usize, rng: &mut Rng, trace: &mut Vec<WalkEvent>) -> Option<Selection> {
        let objects: Vec<ObjectId> = self.graph.objects().iter().map(|o| o.id).collect();
        let mut sel = Selection::default();
        let mut current = *objects.choose(rng)?;
        sel.objects.insert(current);
        trace.push(WalkEvent::Start(current));
        while sel.atoms() < n {
            let mut options = self.eligible(&sel, current);
            if options.is_empty() {
                let comp = self.component[&current];
                let movable: Vec<ObjectId> = self.components[comp]
                    .iter()
                    .copied()
                    .filter(|id| sel.objects.contains(id) && !self.eligible(&sel, *id).is_empty())
                    .collect();
                if let Some(&next) = movable.choose(rng) {
                    current = next;
                    trace.push(WalkEvent::Move(current));
                } else {
                    let fresh: Vec<ObjectId> = objects
                        .iter()
                        .copied()
                        .filter(|id| {
                            self.components[self.component[id]]
                                .iter()
                                .all(|m| !sel.objects.contains(m))
                        })
                        .collect();
                    current = *fresh.choose(rng)?;
                    sel.objects.insert(current);
                    trace.push(WalkEvent::Jump(current));
                }
                continue;
            }
            options.sort();
            let step = *options.choose(rng).expect("non-empty");
            if sel.atoms() + self.added_atoms(&sel, step) > n {
                return None;
            }
            trace.push(WalkEvent::Add(step));
            sel.steps.insert(step);
            match step {
                Step::Attr(o, _) => {
                    sel.objects.insert(o);
                }
                Step::Edge(i) => {
                    let e = &self.graph.relationships()[i];
                    let other = if e.subject_id == current {
                        e.object_id
                    } else {
                        e.subject_id
                    };
                    let new_end = [e.object_id, e.subject_id]
                        .into_iter()
                        .find(|id| !sel.objects.contains(id));
                    sel.objects.insert(e.subject_id);
                    sel.objects.insert(e.object_id);
                    current = new_end.unwrap_or(other);
                }
            }
        }
        Some(sel)
    }

    fn subgraph(&self, sel: &Selection) -> SceneGraph {
        let objects: Vec<ObjectNode> = self
            .graph
            .objects()
            .iter()
            .filter(|o| sel.objects.contains(&o.id))
            .map(|o| ObjectNode {
                id: o.id,
                atom: o.atom.clone(),
                attributes: o
                    .attributes
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| sel.steps.contains(&Step::Attr(o.id, *i)))
                    .map(|(_, a)| a.clone())
                    .collect(),
                bbox: o.bbox,
            })
            .collect();
        let edges: Vec<RelEdge> = self
            .graph
            .relationships()
            .iter()
            .enumerate()
            .filter(|(i, _)| sel.steps.contains(&Step::Edge(*i)))
            .map(|(_, e)| e.clone())
            .collect();
        SceneGraph::new(
            self.graph.image_id(),
            self.graph.image_size(),
            objects,
            edges,
        )
        .expect("a selection of a valid graph is valid")
    }
}

fn check_size(graph: &SceneGraph, n: usize) -> Result<(), SampleError> {
    let atoms = graph.atom_count();
    if atoms < n {
        return Err(SampleError::GraphTooSmall {
            image_id: graph.image_id().to_string(),
            atoms,
            n,
        });
    }
    Ok(())
}

/// Draws walks from `rng` until one reaches exactly `n` atoms. Also returns
/// the events of the successful walk.
pub fn random_walk_traced(
    graph: &SceneGraph,
    n: usize,
    max_retries: usize,
    rng: &mut Rng,
) -> Result<(SceneGraph, Vec<WalkEvent>), SampleError> {
    check_size(graph, n)?;
    let wg = WalkGraph::new(graph);
    for _ in 0..max_retries {
        let mut trace = Vec::new();
        if let Some(sel) = wg.walk(n, rng, &mut trace) {
            return Ok((wg.subgraph(&sel), trace));
        }
    }
    Err(SampleError::WalkFailed {
        image_id: graph.image_id().to_string(),
        n,
        attempts: max_retries,
    })
}

/// Seed for sample `index` of complexity `n` from `image_id`.
pub fn sample_seed(global: u64, image_id: &str, n: usize, index: usize) -> u64 {
    derive_seed(global, &format!("sample/{image_id}/{n}/{index}"))
}

/// One walk with the seed derived for `sample_index`.
pub fn random_walk<T: Ratio>(
    graph: &SceneGraph,
    config: &WalkConfig<T>,
    sample_index: usize,
) -> Result<SampledSubgraph, SampleError> {
    config.validate()?;
    let mut r = rng(sample_seed(
        config.seed,
        graph.image_id(),
        config.n,
        sample_index,
    ));
    let (subgraph, _) = random_walk_traced(graph, config.n, config.max_retries, &mut r)?;
    Ok(SampledSubgraph {
        crop: subgraph.bbox_union(),
        parent_image_id: graph.image_id().to_string(),
        complexity: subgraph.atom_count(),
        sample_index,
        subgraph,
    })
}

/// `samples_per_image_per_n` walks for one graph and complexity.
pub fn sample_image<T: Ratio>(
    graph: &SceneGraph,
    config: &WalkConfig<T>,
) -> Vec<Result<SampledSubgraph, SampleError>> {
    (0..config.samples_per_image_per_n)
        .map(|i| random_walk(graph, config, i))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    pub sampled: usize,
    pub too_small: usize,
    pub walk_failed: usize,
}

/// Samples every graph at every complexity in `ns`, in parallel. Output
/// order is graph order, then `n`, then sample index.
pub fn sample_all<T: Ratio>(
    graphs: &[SceneGraph],
    ns: &[usize],
    config: &WalkConfig<T>,
) -> Result<(Vec<SampledSubgraph>, SampleReport), SampleError> {
    for &n in ns {
        config.with_n(n).validate()?;
    }
    let per_graph: Vec<Vec<Result<SampledSubgraph, SampleError>>> = graphs
        .par_iter()
        .map(|g| {
            ns.iter()
                .flat_map(|&n| sample_image(g, &config.with_n(n)))
                .collect()
        })
        .collect();
    let mut report = SampleReport::default();
    let mut out = Vec::new();
    for r in per_graph.into_iter().flatten() {
        match r {
            Ok(s) => {
                report.sampled += 1;
                out.push(s);
            }
            Err(SampleError::GraphTooSmall { .. }) => report.too_small += 1,
            Err(e) => {
                log::debug!("{e}");
                report.walk_failed += 1;
            }
        }
    }
    Ok((out, report))
}

/// Applies the region checks to each crop, then within each (image, n)
/// group keeps samples in order whose crop IoU with every kept one is at
/// most `max_overlap`.
pub fn crop_and_filter<T: Ratio>(
    samples: Vec<SampledSubgraph>,
    policy: &FilterPolicy<T>,
    config: &WalkConfig<T>,
) -> Vec<SampledSubgraph> {
    let mut kept_crops: BTreeMap<(String, usize), Vec<Region>> = BTreeMap::new();
    let mut out = Vec::new();
    for s in samples {
        let (Some(crop), Some(size)) = (s.crop, s.subgraph.image_size()) else {
            continue;
        };
        if !policy.region_ok(&crop, size) {
            continue;
        }
        let group = kept_crops
            .entry((s.parent_image_id.clone(), s.complexity))
            .or_default();
        if group
            .iter()
            .all(|k| k.iou::<T>(&crop) <= config.max_overlap)
        {
            group.push(crop);
            out.push(s);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_atoms() -> SceneGraph {
        SceneGraph::builder("img")
            .size(1000, 1000)
            .object_at(1, "dog", &["black"], (0, 0, 300, 300))
            .object_at(2, "bed", &[], (100, 100, 300, 300))
            .relation(1, "on", 2)
            .build()
            .unwrap()
    }

    #[test]
    fn exact_fit_returns_whole_graph() {
        let g = four_atoms();
        let cfg = WalkConfig::<f64> {
            n: 4,
            ..Default::default()
        };
        for i in 0..10 {
            let s = random_walk(&g, &cfg, i).unwrap();
            assert_eq!(s.subgraph.canonical(), g.canonical());
            assert_eq!(s.complexity, 4);
            assert_eq!(s.crop, Some(Region::new(0, 0, 400, 400).unwrap()));
        }
    }

    #[test]
    fn too_small() {
        let cfg = WalkConfig::<f64> {
            n: 5,
            ..Default::default()
        };
        assert!(matches!(
            random_walk(&four_atoms(), &cfg, 0),
            Err(SampleError::GraphTooSmall { atoms: 4, n: 5, .. })
        ));
    }

    #[test]
    fn unreachable_count_fails() {
        // every walk adds an edge with both endpoints (3 atoms), so 2 is unreachable
        let g = SceneGraph::builder("g")
            .object(1, "dog", &[])
            .object(2, "bed", &[])
            .relation(1, "on", 2)
            .build()
            .unwrap();
        let cfg = WalkConfig::<f64> {
            n: 2,
            max_retries: 5,
            ..Default::default()
        };
        assert!(matches!(
            random_walk(&g, &cfg, 0),
            Err(SampleError::WalkFailed { attempts: 5, .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(WalkConfig::<f64> {
            n: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(WalkConfig::<f64> {
            max_overlap: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(WalkConfig::<f64>::default().validate().is_ok());
    }

    #[test]
    fn jump_to_other_component() {
        let g = SceneGraph::builder("g")
            .object(1, "dog", &["black"])
            .object(2, "cat", &["white"])
            .build()
            .unwrap();
        let mut r = rng(3);
        let (sub, trace) = random_walk_traced(&g, 4, 10, &mut r).unwrap();
        assert_eq!(sub.atom_count(), 4);
        assert!(trace.iter().any(|e| matches!(e, WalkEvent::Jump(_))));
    }

    fn sample(crop: (u32, u32, u32, u32), index: usize) -> SampledSubgraph {
        let (x, y, w, h) = crop;
        let g = SceneGraph::builder("img")
            .size(800, 800)
            .object_at(1, "dog", &["black"], (x, y, w, h))
            .build()
            .unwrap();
        SampledSubgraph {
            crop: g.bbox_union(),
            subgraph: g,
            parent_image_id: "img".into(),
            complexity: 2,
            sample_index: index,
        }
    }

    #[test]
    fn overlap_filter() {
        let policy = FilterPolicy::<f64>::default();
        let cfg = WalkConfig::<f64>::default();
        let kept = crop_and_filter(vec![sample((0, 0, 300, 300), 0)], &policy, &cfg);
        assert_eq!(kept.len(), 1);
        let kept = crop_and_filter(
            vec![sample((0, 0, 300, 300), 0), sample((0, 0, 300, 300), 1)],
            &policy,
            &cfg,
        );
        assert_eq!(kept.len(), 1);
        let kept = crop_and_filter(
            vec![sample((0, 0, 300, 300), 0), sample((100, 0, 300, 300), 1)],
            &policy,
            &cfg,
        );
        assert_eq!(kept.len(), 2);
        // below the area threshold
        let kept = crop_and_filter(vec![sample((0, 0, 100, 100), 0)], &policy, &cfg);
        assert!(kept.is_empty());
    }
}
