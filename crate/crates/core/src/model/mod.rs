//! The compositional language: atoms, compounds, scene graphs and regions.

mod atom;
mod graph;
mod region;
pub mod vg;

use thiserror::Error;

pub use atom::{canonicalize, singularize, Atom, AtomKind};
pub use graph::{
    CanonicalForm, CaptionRecord, Compound, ObjectId, ObjectNode, RelEdge, SceneGraph,
    SceneGraphBuilder,
};
pub use region::Region;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("invalid atom {0:?}: empty after normalization")]
    InvalidAtom(String),
    #[error("invalid compound: {0}")]
    InvalidCompound(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid scene graph: {0}")]
    InvalidGraph(String),
    #[error("caption {0} has empty text")]
    EmptyCaption(String),
}

/// Number of atom instances in the graph.
pub fn atom_count(graph: &SceneGraph) -> usize {
    graph.atom_count()
}

/// Canonical compounds of the graph, duplicates collapsed.
pub fn compounds_of(graph: &SceneGraph) -> std::collections::BTreeSet<Compound> {
    graph.compounds()
}
