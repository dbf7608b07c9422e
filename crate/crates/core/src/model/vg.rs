//! Visual Genome style JSON input.
//!
//! Scene graphs come as an array of images:
//! `{"image_id", "width", "height", "objects": [...], "relationships": [...]}`.
//! Region descriptions come as `[{"id", "regions": [{"region_id", "image_id",
//! "phrase", "x", "y", "width", "height"}]}]`.

use serde::Deserialize;

use super::{Atom, CaptionRecord, ModelError, ObjectNode, Region, RelEdge, SceneGraph};

/// Image ids appear as numbers in the public dumps and as strings elsewhere.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VgId {
    Num(u64),
    Str(String),
}

impl VgId {
    pub fn as_string(&self) -> String {
        match self {
            VgId::Num(n) => n.to_string(),
            VgId::Str(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct VgObject {
    pub object_id: u64,
    #[serde(default)]
    pub names: Vec<String>,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub x: Option<u32>,
    #[serde(default)]
    pub y: Option<u32>,
    #[serde(default)]
    pub w: Option<u32>,
    #[serde(default)]
    pub h: Option<u32>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct VgRelationship {
    pub subject_id: u64,
    pub predicate: String,
    pub object_id: u64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct VgImage {
    pub image_id: VgId,
    #[serde(default)]
    pub width: Option<u32>,
    #[serde(default)]
    pub height: Option<u32>,
    #[serde(default)]
    pub objects: Vec<VgObject>,
    #[serde(default)]
    pub relationships: Vec<VgRelationship>,
}

impl VgImage {
    /// Converts to a validated scene graph. Boxes are clipped to the image
    /// bounds; zero-area boxes are dropped.
    pub fn to_scene_graph(&self) -> Result<SceneGraph, ModelError> {
        let image_size = match (self.width, self.height) {
            (Some(w), Some(h)) if w > 0 && h > 0 => Some((w, h)),
            _ => None,
        };
        let mut objects = Vec::with_capacity(self.objects.len());
        for obj in &self.objects {
            let name = obj.names.first().or(obj.name.as_ref()).ok_or_else(|| {
                ModelError::InvalidGraph(format!("object {} has no name", obj.object_id))
            })?;
            let attributes = obj
                .attributes
                .iter()
                .filter(|a| !a.trim().is_empty())
                .map(|a| Atom::attribute(a))
                .collect::<Result<Vec<_>, _>>()?;
            objects.push(ObjectNode {
                id: obj.object_id,
                atom: Atom::object(name)?,
                attributes,
                bbox: clip_box(obj, image_size),
            });
        }
        let relationships = self
            .relationships
            .iter()
            .map(|r| {
                Ok(RelEdge {
                    subject_id: r.subject_id,
                    relationship: Atom::relationship(&r.predicate)?,
                    object_id: r.object_id,
                })
            })
            .collect::<Result<Vec<_>, ModelError>>()?;
        SceneGraph::new(
            self.image_id.as_string(),
            image_size,
            objects,
            relationships,
        )
    }
}

fn clip_box(obj: &VgObject, image_size: Option<(u32, u32)>) -> Option<Region> {
    let (x, y, mut w, mut h) = (obj.x?, obj.y?, obj.w?, obj.h?);
    if let Some((iw, ih)) = image_size {
        if x >= iw || y >= ih {
            return None;
        }
        w = w.min(iw - x);
        h = h.min(ih - y);
    }
    Region::new(x, y, w, h).ok()
}

#[derive(Debug, Clone, Deserialize)]
pub struct VgRegion {
    pub region_id: VgId,
    #[serde(default)]
    pub image_id: Option<VgId>,
    pub phrase: String,
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

#[derive(Debug, Clone, Deserialize)]
pub struct VgRegionImage {
    #[serde(alias = "image_id")]
    pub id: VgId,
    pub regions: Vec<VgRegion>,
}

/// A region description: the crop and the caption describing it.
#[derive(Debug, Clone)]
pub struct RegionCaption {
    pub image_id: String,
    pub region: Option<Region>,
    pub caption: CaptionRecord,
}

impl VgRegionImage {
    pub fn region_captions(&self) -> Vec<Result<RegionCaption, ModelError>> {
        let image_id = self.id.as_string();
        self.regions
            .iter()
            .map(|r| {
                let mut caption = CaptionRecord::new(r.region_id.as_string(), r.phrase.clone())?;
                caption.source_image_id = Some(image_id.clone());
                Ok(RegionCaption {
                    image_id: image_id.clone(),
                    region: Region::new(r.x, r.y, r.width, r.height).ok(),
                    caption,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn converts_image() {
        let json = r#"{
            "image_id": 12, "width": 100, "height": 80,
            "objects": [
                {"object_id": 1, "names": ["Dogs", "puppy"], "attributes": ["Black"], "x": 10, "y": 10, "w": 200, "h": 20},
                {"object_id": 2, "names": ["bed"], "x": 0, "y": 0, "w": 0, "h": 5}
            ],
            "relationships": [{"subject_id": 1, "predicate": "ON", "object_id": 2}]
        }"#;
        let img: VgImage = serde_json::from_str(json).unwrap();
        let g = img.to_scene_graph().unwrap();
        assert_eq!(g.image_id(), "12");
        assert_eq!(g.objects()[0].lemma(), "dog");
        assert_eq!(g.objects()[0].attributes[0].lemma(), "black");
        // clipped to the 100px wide image
        assert_eq!(g.objects()[0].bbox.unwrap().width(), 90);
        assert_eq!(g.objects()[1].bbox, None);
        assert_eq!(g.relationships()[0].relationship.lemma(), "on");
    }

    #[test]
    fn unknown_edge_target_fails() {
        let json = r#"{"image_id": "a", "objects": [{"object_id": 1, "names": ["dog"]}],
                       "relationships": [{"subject_id": 1, "predicate": "on", "object_id": 3}]}"#;
        let img: VgImage = serde_json::from_str(json).unwrap();
        assert!(img.to_scene_graph().is_err());
    }

    #[test]
    fn region_captions_carry_image() {
        let json = r#"{"id": 5, "regions": [
            {"region_id": 50, "image_id": 5, "phrase": "black dog", "x": 1, "y": 2, "width": 3, "height": 4}]}"#;
        let img: VgRegionImage = serde_json::from_str(json).unwrap();
        let rc = img.region_captions().remove(0).unwrap();
        assert_eq!(rc.caption.caption_id, "50");
        assert_eq!(rc.caption.source_image_id.as_deref(), Some("5"));
        assert_eq!(rc.region.unwrap().area(), 12);
    }
}
