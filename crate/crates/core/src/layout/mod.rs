//! Hierarchical layout database, DRC and emitters.
//!
//! Coordinates are integer nanometers. A child is placed by first mirroring
//! its contents about its own vertical center line (when `mirror` is set) and
//! then translating by `(dx, dy)`.

mod drc;
mod gds;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;

pub use drc::{drc, drc_shapes, open_nets, DrcReport, Rule, Violation};
pub use gds::{emit_gdsii, LayerMap};

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("malformed layout document at {path}: {message}")]
    Json { path: String, message: String },
    #[error("layer `{0}` has no GDSII mapping")]
    UnmappedLayer(String),
    #[error("layer map line {line}: {message}")]
    LayerMap { line: usize, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A drawn rectangle, optionally owned by a net.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub layer: String,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net: Option<String>,
}

impl Shape {
    pub fn new(layer: impl Into<String>, rect: Rect, net: Option<&str>) -> Shape {
        Shape {
            layer: layer.into(),
            rect,
            net: net.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PinShape {
    pub layer: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Transform {
    pub dx: i64,
    pub dy: i64,
    pub mirror: bool,
}

impl Transform {
    pub fn translate(dx: i64, dy: i64) -> Transform {
        Transform { dx, dy, mirror: false }
    }

    /// Maps a rect from child coordinates (child box `bbox`) to the parent.
    pub fn apply(&self, bbox: &Rect, r: &Rect) -> Rect {
        let r = if self.mirror { r.mirror_x(bbox.x0 + bbox.x1) } else { *r };
        r.translate(self.dx, self.dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Child {
    pub instance: String,
    pub layout: AbstractLayout,
    pub transform: Transform,
}

impl Child {
    /// Child box in parent coordinates.
    pub fn placed_bbox(&self) -> Rect {
        self.transform.apply(&self.layout.bbox, &self.layout.bbox)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AbstractLayout {
    pub name: String,
    pub bbox: Rect,
    #[serde(default)]
    pub shapes: Vec<Shape>,
    #[serde(default)]
    pub pins: BTreeMap<String, Vec<PinShape>>,
    #[serde(default)]
    pub children: Vec<Child>,
    /// Free-form numeric properties (e.g. centroid errors, variant rows).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub props: BTreeMap<String, f64>,
}

impl AbstractLayout {
    pub fn new(name: impl Into<String>, bbox: Rect) -> AbstractLayout {
        AbstractLayout {
            name: name.into(),
            bbox,
            ..Default::default()
        }
    }

    pub fn add(&mut self, layer: &str, rect: Rect, net: Option<&str>) {
        self.shapes.push(Shape::new(layer, rect, net));
    }

    pub fn add_pin(&mut self, net: &str, layer: &str, rect: Rect) {
        self.pins.entry(net.to_string()).or_default().push(PinShape {
            layer: layer.to_string(),
            rect,
        });
    }

    /// Sorts and dedups shapes and pins, recursively, so equal layouts
    /// compare and serialize identically.
    pub fn normalize(&mut self) {
        self.shapes.sort();
        self.shapes.dedup();
        for v in self.pins.values_mut() {
            v.sort();
            v.dedup();
        }
        for c in &mut self.children {
            c.layout.normalize();
        }
        self.children.sort_by(|a, b| a.instance.cmp(&b.instance));
    }

    pub fn area(&self) -> i64 {
        self.bbox.area()
    }

    /// Total shape count including all descendants.
    pub fn shape_count(&self) -> usize {
        self.shapes.len() + self.children.iter().map(|c| c.layout.shape_count()).sum::<usize>()
    }
}

/// Every shape of the hierarchy in top coordinates.
pub fn flatten_layout(layout: &AbstractLayout) -> Vec<Shape> {
    let mut out = Vec::with_capacity(layout.shape_count());
    flatten_into(layout, &[], &mut out);
    out
}

fn flatten_into(layout: &AbstractLayout, stack: &[(Transform, Rect)], out: &mut Vec<Shape>) {
    for s in &layout.shapes {
        let mut r = s.rect;
        for (t, bbox) in stack.iter().rev() {
            r = t.apply(bbox, &r);
        }
        out.push(Shape {
            layer: s.layer.clone(),
            rect: r,
            net: s.net.clone(),
        });
    }
    for c in &layout.children {
        let mut next = stack.to_vec();
        next.push((c.transform, c.layout.bbox));
        flatten_into(&c.layout, &next, out);
    }
}

/// Canonical JSON: sorted keys, sorted shapes, two-space indentation.
pub fn emit_json(layout: &AbstractLayout) -> String {
    let mut l = layout.clone();
    l.normalize();
    let value = serde_json::to_value(&l).expect("layout serializes");
    let mut s = serde_json::to_string_pretty(&value).expect("value serializes");
    s.push('\n');
    s
}

pub fn load_json(text: &str) -> Result<AbstractLayout, LayoutError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| LayoutError::Json {
        path: format!("$.{}", e.path()),
        message: e.inner().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AbstractLayout {
        let mut leaf = AbstractLayout::new("leaf", Rect::new(0, 0, 100, 50));
        leaf.add("M1", Rect::new(10, 0, 20, 50), Some("a"));
        leaf.add_pin("a", "M1", Rect::new(10, 0, 20, 50));
        let mut top = AbstractLayout::new("top", Rect::new(0, 0, 300, 100));
        top.add("M2", Rect::new(0, 40, 300, 60), None);
        top.children.push(Child {
            instance: "u1".into(),
            layout: leaf.clone(),
            transform: Transform::translate(0, 0),
        });
        top.children.push(Child {
            instance: "u2".into(),
            layout: leaf,
            transform: Transform {
                dx: 200,
                dy: 0,
                mirror: true,
            },
        });
        top
    }

    #[test]
    fn flatten_leaf_is_identity() {
        let mut l = AbstractLayout::new("x", Rect::new(0, 0, 10, 10));
        l.add("M1", Rect::new(1, 1, 2, 2), None);
        assert_eq!(flatten_layout(&l), l.shapes);
    }

    #[test]
    fn mirror_maps_about_child_center() {
        let flat = flatten_layout(&sample());
        assert_eq!(flat.len(), 3);
        assert_eq!(flat[2].rect, Rect::new(280, 0, 290, 50));
    }

    #[test]
    fn double_mirror_is_identity() {
        let t = Transform {
            dx: 0,
            dy: 0,
            mirror: true,
        };
        let b = Rect::new(0, 0, 100, 50);
        let r = Rect::new(10, 5, 30, 7);
        assert_eq!(t.apply(&b, &t.apply(&b, &r)), r);
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let s = emit_json(&sample());
        let back = load_json(&s).unwrap();
        assert_eq!(emit_json(&back), s);
        let mut norm = sample();
        norm.normalize();
        assert_eq!(back, norm);
    }

    #[test]
    fn empty_layout_document() {
        let s = emit_json(&AbstractLayout::default());
        assert_eq!(load_json(&s).unwrap(), AbstractLayout::default());
    }

    #[test]
    fn malformed_document_reports_path() {
        let err = load_json(r#"{"name":"x","bbox":{"x0":0,"y0":0,"x1":1,"y1":"oops"}}"#).unwrap_err();
        match err {
            LayoutError::Json { path, .. } => assert!(path.contains("bbox.y1"), "{path}"),
            e => panic!("{e}"),
        }
    }
}
