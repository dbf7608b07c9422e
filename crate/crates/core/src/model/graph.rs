use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Atom, AtomKind, ModelError, Region};

pub type ObjectId = u64;

/// An object node with its attached attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectNode {
    pub id: ObjectId,
    pub atom: Atom,
    pub attributes: Vec<Atom>,
    pub bbox: Option<Region>,
}

impl ObjectNode {
    pub fn lemma(&self) -> &str {
        self.atom.lemma()
    }

    pub fn has_attribute(&self, lemma: &str) -> bool {
        self.attributes.iter().any(|a| a.lemma() == lemma)
    }
}

/// Directed relationship edge `subject --relationship--> object`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelEdge {
    pub subject_id: ObjectId,
    pub relationship: Atom,
    pub object_id: ObjectId,
}

/// Primitive composition of atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Compound {
    AttrObj {
        attribute: Atom,
        object: Atom,
    },
    ObjRelObj {
        subject: Atom,
        relationship: Atom,
        object: Atom,
    },
}

impl Compound {
    pub fn attr_obj(attribute: Atom, object: Atom) -> Result<Self, ModelError> {
        if attribute.kind() != AtomKind::Attribute || object.kind() != AtomKind::Object {
            return Err(ModelError::InvalidCompound(format!(
                "({attribute},{object}) needs attribute and object atoms"
            )));
        }
        Ok(Compound::AttrObj { attribute, object })
    }

    pub fn obj_rel_obj(
        subject: Atom,
        relationship: Atom,
        object: Atom,
    ) -> Result<Self, ModelError> {
        if subject.kind() != AtomKind::Object
            || relationship.kind() != AtomKind::Relationship
            || object.kind() != AtomKind::Object
        {
            return Err(ModelError::InvalidCompound(format!(
                "({subject},{relationship},{object}) needs object, relationship, object atoms"
            )));
        }
        Ok(Compound::ObjRelObj {
            subject,
            relationship,
            object,
        })
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Compound::AttrObj { attribute, object } => vec![attribute, object],
            Compound::ObjRelObj {
                subject,
                relationship,
                object,
            } => vec![subject, relationship, object],
        }
    }

    /// Tab-separated persistent form, e.g. `attr_obj\tblack\tdog`.
    pub fn to_line(&self) -> String {
        match self {
            Compound::AttrObj { attribute, object } => {
                format!("attr_obj\t{}\t{}", attribute.lemma(), object.lemma())
            }
            Compound::ObjRelObj {
                subject,
                relationship,
                object,
            } => format!(
                "obj_rel_obj\t{}\t{}\t{}",
                subject.lemma(),
                relationship.lemma(),
                object.lemma()
            ),
        }
    }

    pub fn from_line(line: &str) -> Result<Self, ModelError> {
        let fields: Vec<&str> = line.split('\t').collect();
        match fields.as_slice() {
            ["attr_obj", a, o] => Compound::attr_obj(Atom::attribute(a)?, Atom::object(o)?),
            ["obj_rel_obj", s, r, o] => {
                Compound::obj_rel_obj(Atom::object(s)?, Atom::relationship(r)?, Atom::object(o)?)
            }
            _ => Err(ModelError::InvalidCompound(format!(
                "malformed line {line:?}"
            ))),
        }
    }
}

impl fmt::Display for Compound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Compound::AttrObj { attribute, object } => write!(f, "({attribute},{object})"),
            Compound::ObjRelObj {
                subject,
                relationship,
                object,
            } => write!(f, "({subject},{relationship},{object})"),
        }
    }
}

/// Set-level view of a graph used for equality up to ids and instance counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm {
    pub atoms: BTreeSet<Atom>,
    pub compounds: BTreeSet<Compound>,
}

impl CanonicalForm {
    /// Sorted textual serialization; equal forms give equal signatures.
    pub fn signature(&self) -> String {
        let mut out = String::new();
        for atom in &self.atoms {
            out.push_str(atom.kind().as_str());
            out.push('\t');
            out.push_str(atom.lemma());
            out.push('\n');
        }
        out.push_str("--\n");
        for c in &self.compounds {
            out.push_str(&c.to_line());
            out.push('\n');
        }
        out
    }
}

/// Objects, their attributes and relationship edges for one image (or a
/// part of one).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneGraph {
    image_id: String,
    image_size: Option<(u32, u32)>,
    objects: Vec<ObjectNode>,
    relationships: Vec<RelEdge>,
    positions: BTreeMap<ObjectId, usize>,
}

impl SceneGraph {
    pub fn new(
        image_id: impl Into<String>,
        image_size: Option<(u32, u32)>,
        mut objects: Vec<ObjectNode>,
        relationships: Vec<RelEdge>,
    ) -> Result<Self, ModelError> {
        let image_id = image_id.into();
        let mut positions = BTreeMap::new();
        for (i, obj) in objects.iter_mut().enumerate() {
            if positions.insert(obj.id, i).is_some() {
                return Err(ModelError::InvalidGraph(format!(
                    "duplicate object id {} in image {image_id}",
                    obj.id
                )));
            }
            if obj.atom.kind() != AtomKind::Object
                || obj
                    .attributes
                    .iter()
                    .any(|a| a.kind() != AtomKind::Attribute)
            {
                return Err(ModelError::InvalidGraph(format!(
                    "object {} has atoms of the wrong kind",
                    obj.id
                )));
            }
            let mut seen = BTreeSet::new();
            obj.attributes
                .retain(|a| seen.insert(a.lemma().to_string()));
            if let (Some(bbox), Some((w, h))) = (obj.bbox, image_size) {
                if !bbox.fits_within(w, h) {
                    return Err(ModelError::InvalidGraph(format!(
                        "object {} box {bbox:?} exceeds image {w}x{h}",
                        obj.id
                    )));
                }
            }
        }
        for edge in &relationships {
            if edge.relationship.kind() != AtomKind::Relationship {
                return Err(ModelError::InvalidGraph(
                    "edge label is not a relationship".into(),
                ));
            }
            for id in [edge.subject_id, edge.object_id] {
                if !positions.contains_key(&id) {
                    return Err(ModelError::InvalidGraph(format!(
                        "edge references unknown object {id} in image {image_id}"
                    )));
                }
            }
        }
        Ok(SceneGraph {
            image_id,
            image_size,
            objects,
            relationships,
            positions,
        })
    }

    pub fn empty(image_id: impl Into<String>) -> Self {
        SceneGraph::new(image_id, None, Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    pub fn builder(image_id: impl Into<String>) -> SceneGraphBuilder {
        SceneGraphBuilder {
            image_id: image_id.into(),
            image_size: None,
            objects: Vec::new(),
            relationships: Vec::new(),
            error: None,
        }
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn image_size(&self) -> Option<(u32, u32)> {
        self.image_size
    }

    pub fn objects(&self) -> &[ObjectNode] {
        &self.objects
    }

    pub fn relationships(&self) -> &[RelEdge] {
        &self.relationships
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectNode> {
        self.positions.get(&id).map(|&i| &self.objects[i])
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Number of atom instances: objects, attached attributes and edges.
    pub fn atom_count(&self) -> usize {
        self.objects.len()
            + self
                .objects
                .iter()
                .map(|o| o.attributes.len())
                .sum::<usize>()
            + self.relationships.len()
    }

    /// Distinct canonical atoms.
    pub fn atoms(&self) -> BTreeSet<Atom> {
        let mut atoms = BTreeSet::new();
        for obj in &self.objects {
            atoms.insert(obj.atom.clone());
            atoms.extend(obj.attributes.iter().cloned());
        }
        atoms.extend(self.relationships.iter().map(|e| e.relationship.clone()));
        atoms
    }

    /// Every attribute-object attachment and every relationship triple.
    pub fn compounds(&self) -> BTreeSet<Compound> {
        let mut out = BTreeSet::new();
        for obj in &self.objects {
            for attr in &obj.attributes {
                out.insert(Compound::AttrObj {
                    attribute: attr.clone(),
                    object: obj.atom.clone(),
                });
            }
        }
        for edge in &self.relationships {
            out.insert(self.edge_compound(edge));
        }
        out
    }

    pub fn edge_compound(&self, edge: &RelEdge) -> Compound {
        let subject = self
            .object(edge.subject_id)
            .expect("validated edge")
            .atom
            .clone();
        let object = self
            .object(edge.object_id)
            .expect("validated edge")
            .atom
            .clone();
        Compound::ObjRelObj {
            subject,
            relationship: edge.relationship.clone(),
            object,
        }
    }

    pub fn canonical(&self) -> CanonicalForm {
        CanonicalForm {
            atoms: self.atoms(),
            compounds: self.compounds(),
        }
    }

    /// Ids of the objects adjacent to `id` through any edge direction.
    pub fn neighbors(&self, id: ObjectId) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        for e in &self.relationships {
            if e.subject_id == id {
                out.insert(e.object_id);
            }
            if e.object_id == id {
                out.insert(e.subject_id);
            }
        }
        out
    }

    /// Connected components over undirected edges, each sorted by object
    /// order, listed in order of their first object.
    pub fn components(&self) -> Vec<Vec<ObjectId>> {
        let mut parent: Vec<usize> = (0..self.objects.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for e in &self.relationships {
            let a = find(&mut parent, self.positions[&e.subject_id]);
            let b = find(&mut parent, self.positions[&e.object_id]);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<ObjectId>> = BTreeMap::new();
        for i in 0..self.objects.len() {
            let root = find(&mut parent, i);
            groups.entry(root).or_default().push(self.objects[i].id);
        }
        groups.into_values().collect()
    }

    /// Union of the member bounding boxes, if every object has one.
    pub fn bbox_union(&self) -> Option<Region> {
        let mut boxes = self.objects.iter().map(|o| o.bbox);
        let first = boxes.next()??;
        boxes.try_fold(first, |acc, b| Some(acc.union(&b?)))
    }
}

/// Incremental construction with canonicalization of raw strings.
pub struct SceneGraphBuilder {
    image_id: String,
    image_size: Option<(u32, u32)>,
    objects: Vec<ObjectNode>,
    relationships: Vec<RelEdge>,
    error: Option<ModelError>,
}

impl SceneGraphBuilder {
    pub fn size(mut self, width: u32, height: u32) -> Self {
        self.image_size = Some((width, height));
        self
    }

    pub fn object(self, id: ObjectId, name: &str, attributes: &[&str]) -> Self {
        self.push_object(id, name, attributes, None)
    }

    pub fn object_at(
        self,
        id: ObjectId,
        name: &str,
        attributes: &[&str],
        bbox: (u32, u32, u32, u32),
    ) -> Self {
        self.push_object(id, name, attributes, Some(bbox))
    }

    fn push_object(
        mut self,
        id: ObjectId,
        name: &str,
        attributes: &[&str],
        bbox: Option<(u32, u32, u32, u32)>,
    ) -> Self {
        if self.error.is_some() {
            return self;
        }
        let node = (|| {
            Ok::<_, ModelError>(ObjectNode {
                id,
                atom: Atom::object(name)?,
                attributes: attributes
                    .iter()
                    .map(|a| Atom::attribute(a))
                    .collect::<Result<_, _>>()?,
                bbox: bbox
                    .map(|(x, y, w, h)| Region::new(x, y, w, h))
                    .transpose()?,
            })
        })();
        match node {
            Ok(node) => self.objects.push(node),
            Err(e) => self.error = Some(e),
        }
        self
    }

    pub fn relation(mut self, subject_id: ObjectId, predicate: &str, object_id: ObjectId) -> Self {
        if self.error.is_some() {
            return self;
        }
        match Atom::relationship(predicate) {
            Ok(relationship) => self.relationships.push(RelEdge {
                subject_id,
                relationship,
                object_id,
            }),
            Err(e) => self.error = Some(e),
        }
        self
    }

    pub fn build(self) -> Result<SceneGraph, ModelError> {
        if let Some(e) = self.error {
            return Err(e);
        }
        SceneGraph::new(
            self.image_id,
            self.image_size,
            self.objects,
            self.relationships,
        )
    }
}

#[derive(Serialize, Deserialize)]
struct ObjectWire {
    id: ObjectId,
    name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bbox: Option<Region>,
}

#[derive(Serialize, Deserialize)]
struct EdgeWire {
    subject_id: ObjectId,
    predicate: String,
    object_id: ObjectId,
}

#[derive(Serialize, Deserialize)]
struct GraphWire {
    image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_size: Option<(u32, u32)>,
    objects: Vec<ObjectWire>,
    #[serde(default)]
    relationships: Vec<EdgeWire>,
}

impl Serialize for SceneGraph {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        GraphWire {
            image_id: self.image_id.clone(),
            image_size: self.image_size,
            objects: self
                .objects
                .iter()
                .map(|o| ObjectWire {
                    id: o.id,
                    name: o.atom.lemma().to_string(),
                    attributes: o.attributes.iter().map(|a| a.lemma().to_string()).collect(),
                    bbox: o.bbox,
                })
                .collect(),
            relationships: self
                .relationships
                .iter()
                .map(|e| EdgeWire {
                    subject_id: e.subject_id,
                    predicate: e.relationship.lemma().to_string(),
                    object_id: e.object_id,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SceneGraph {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = GraphWire::deserialize(deserializer)?;
        let build = || -> Result<SceneGraph, ModelError> {
            let objects = wire
                .objects
                .iter()
                .map(|o| {
                    Ok(ObjectNode {
                        id: o.id,
                        atom: Atom::object(&o.name)?,
                        attributes: o
                            .attributes
                            .iter()
                            .map(|a| Atom::attribute(a))
                            .collect::<Result<_, ModelError>>()?,
                        bbox: o.bbox,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            let relationships = wire
                .relationships
                .iter()
                .map(|e| {
                    Ok(RelEdge {
                        subject_id: e.subject_id,
                        relationship: Atom::relationship(&e.predicate)?,
                        object_id: e.object_id,
                    })
                })
                .collect::<Result<Vec<_>, ModelError>>()?;
            SceneGraph::new(
                wire.image_id.clone(),
                wire.image_size,
                objects,
                relationships,
            )
        };
        build().map_err(serde::de::Error::custom)
    }
}

/// A caption with optional parsed graph and source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CaptionWire")]
pub struct CaptionRecord {
    pub caption_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<SceneGraph>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_image_id: Option<String>,
}

#[derive(Deserialize)]
struct CaptionWire {
    caption_id: String,
    text: String,
    #[serde(default)]
    graph: Option<SceneGraph>,
    #[serde(default)]
    source_image_id: Option<String>,
}

impl TryFrom<CaptionWire> for CaptionRecord {
    type Error = ModelError;

    fn try_from(w: CaptionWire) -> Result<Self, Self::Error> {
        let mut record = CaptionRecord::new(w.caption_id, w.text)?;
        record.graph = w.graph;
        record.source_image_id = w.source_image_id;
        Ok(record)
    }
}

impl CaptionRecord {
    pub fn new(caption_id: impl Into<String>, text: impl Into<String>) -> Result<Self, ModelError> {
        let text = text.into();
        let caption_id = caption_id.into();
        if text.trim().is_empty() {
            return Err(ModelError::EmptyCaption(caption_id));
        }
        Ok(CaptionRecord {
            caption_id,
            text,
            graph: None,
            source_image_id: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boy_on_grass() -> SceneGraph {
        SceneGraph::builder("img")
            .object(1, "boy", &["tall", "blue"])
            .object(2, "grass", &["green"])
            .relation(1, "on", 2)
            .build()
            .unwrap()
    }

    fn lines(set: &BTreeSet<Compound>) -> Vec<String> {
        set.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn compounds_of_template_graph() {
        let g = boy_on_grass();
        let got = lines(&g.compounds());
        let mut want = vec![
            "(tall,boy)",
            "(blue,boy)",
            "(green,grass)",
            "(boy,on,grass)",
        ];
        want.sort();
        let mut got_sorted = got.clone();
        got_sorted.sort();
        assert_eq!(got_sorted, want);
    }

    #[test]
    fn bare_object_has_no_compounds() {
        let g = SceneGraph::builder("img")
            .object(1, "sunset", &[])
            .build()
            .unwrap();
        assert!(g.compounds().is_empty());
        assert_eq!(g.atom_count(), 1);
    }

    #[test]
    fn duplicate_named_objects_single_edge() {
        let g = SceneGraph::builder("img")
            .object(1, "window", &[])
            .object(2, "window", &[])
            .relation(1, "next to", 2)
            .build()
            .unwrap();
        let compounds = g.compounds();
        assert_eq!(compounds.len(), 1);
        assert!(matches!(
            compounds.iter().next(),
            Some(Compound::ObjRelObj { .. })
        ));
        // instances, not lemmas
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.atoms().len(), 2);
    }

    #[test]
    fn atom_counts() {
        assert_eq!(boy_on_grass().atom_count(), 6);
        assert_eq!(SceneGraph::empty("x").atom_count(), 0);
    }

    #[test]
    fn dangling_edge_rejected() {
        let err = SceneGraph::builder("img")
            .object(1, "dog", &[])
            .relation(1, "on", 9)
            .build();
        assert!(matches!(err, Err(ModelError::InvalidGraph(_))));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = SceneGraph::builder("img")
            .object(1, "dog", &[])
            .object(1, "cat", &[])
            .build();
        assert!(err.is_err());
    }

    #[test]
    fn bbox_must_fit_image() {
        let err = SceneGraph::builder("img")
            .size(100, 100)
            .object_at(1, "dog", &[], (50, 50, 60, 10))
            .build();
        assert!(err.is_err());
    }

    #[test]
    fn components_follow_edges() {
        let g = SceneGraph::builder("img")
            .object(1, "a", &[])
            .object(2, "b", &[])
            .object(3, "c", &[])
            .object(4, "d", &[])
            .relation(3, "near", 1)
            .build()
            .unwrap();
        assert_eq!(g.components(), vec![vec![1, 3], vec![2], vec![4]]);
    }

    #[test]
    fn wire_round_trip() {
        let g = SceneGraph::builder("7")
            .size(640, 480)
            .object_at(1, "boy", &["tall"], (0, 0, 10, 10))
            .object(2, "grass", &[])
            .relation(1, "on", 2)
            .build()
            .unwrap();
        let json = serde_json::to_string(&g).unwrap();
        let back: SceneGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn compound_line_round_trip() {
        for c in boy_on_grass().compounds() {
            assert_eq!(Compound::from_line(&c.to_line()).unwrap(), c);
        }
        assert!(Compound::from_line("attr_obj\tonly").is_err());
    }

    #[test]
    fn compound_kinds_checked() {
        let dog = Atom::object("dog").unwrap();
        assert!(Compound::attr_obj(dog.clone(), dog).is_err());
    }

    #[test]
    fn empty_caption_rejected() {
        assert!(CaptionRecord::new("c1", "   ").is_err());
        let err = serde_json::from_str::<CaptionRecord>(r#"{"caption_id":"c","text":""}"#);
        assert!(err.is_err());
    }
}
