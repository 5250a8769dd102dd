//! Gridded design-rule abstraction.
//!
//! A [`Pdk`] is an ordered stack of unidirectional routing layers, each with a
//! major grid (track centerlines, `Offset + i * Pitch`) and a minor grid of
//! stopping points taken from the major grid of the perpendicular neighbor
//! layer. Via rules sit between adjacent layers. All geometry is integer
//! nanometers; only the per-unit parasitics are floating point.
//!
//! Wire rectangles follow one convention everywhere in the crate: the
//! centerline runs between two stop coordinates and the metal extends
//! [`Pdk::line_end_ext`] beyond each stop, which is exactly the via landing
//! enclosure needed at a wire end.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PdkError {
    #[error("cannot read PDK file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("rule {rule} violated on {layer}: {detail}")]
    Invariant {
        rule: &'static str,
        layer: String,
        detail: String,
    },
    #[error("coordinate {coord} is off the {grid} grid of layer {layer}")]
    OffGrid {
        layer: String,
        grid: &'static str,
        coord: i64,
    },
    #[error("unknown layer {0}")]
    UnknownLayer(String),
    #[error("layer {0} has no perpendicular neighbor")]
    NoNeighbor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(alias = "H", alias = "horizontal")]
    Horizontal,
    #[serde(alias = "V", alias = "vertical")]
    Vertical,
}

impl Direction {
    pub fn perpendicular(self) -> Direction {
        match self {
            Direction::Horizontal => Direction::Vertical,
            Direction::Vertical => Direction::Horizontal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRules {
    pub name: String,
    #[serde(rename = "Pitch")]
    pub pitch: i64,
    #[serde(rename = "Width")]
    pub width: i64,
    #[serde(rename = "MinL")]
    pub min_l: i64,
    #[serde(rename = "MaxL")]
    pub max_l: i64,
    #[serde(rename = "Offset")]
    pub offset: i64,
    #[serde(rename = "EndToEnd")]
    pub end_to_end: i64,
    #[serde(rename = "Direction")]
    pub direction: Direction,
    #[serde(rename = "Color", default)]
    pub color: Vec<String>,
    /// Ohms per nm of centerline.
    pub unit_r: f64,
    /// Attofarads per nm of centerline.
    pub unit_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViaRules {
    pub name: String,
    pub from: String,
    pub to: String,
    #[serde(rename = "SpaceX")]
    pub space_x: i64,
    #[serde(rename = "SpaceY")]
    pub space_y: i64,
    #[serde(rename = "WidthX")]
    pub width_x: i64,
    #[serde(rename = "WidthY")]
    pub width_y: i64,
    #[serde(rename = "VencA_L")]
    pub venc_a_l: i64,
    #[serde(rename = "VencA_H")]
    pub venc_a_h: i64,
    #[serde(rename = "VencP_L")]
    pub venc_p_l: i64,
    #[serde(rename = "VencP_H")]
    pub venc_p_h: i64,
    /// Ohms per cut.
    pub r_via: f64,
}

/// Front-end unit-cell dimensions used by the primitive generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeolRules {
    pub poly_pitch: i64,
    pub fin_pitch: i64,
    pub row_height: i64,
    pub poly_width: i64,
    /// Manufacturing quantum for FEOL rect edges.
    pub grid: i64,
    /// Farads per capacitor unit cell.
    pub unit_cap: f64,
    /// Ohms per resistor unit cell.
    pub unit_res: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdk {
    pub name: String,
    pub layers: Vec<LayerRules>,
    pub vias: Vec<ViaRules>,
    pub feol: FeolRules,
    /// Pairs of via names that may not share a crossing column or row.
    #[serde(default)]
    pub forbidden_adjacency: Vec<(String, String)>,
    #[serde(skip)]
    derived: Derived,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Derived {
    ext: Vec<i64>,
    keepout: Vec<i64>,
}

/// FEOL layers drawn by the primitive generator.
pub const FEOL_LAYERS: [&str; 5] = ["active", "poly", "contact", "cap", "res"];

impl Pdk {
    pub fn load(path: impl AsRef<Path>) -> Result<Pdk, PdkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| PdkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Pdk::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Pdk, PdkError> {
        let root: Value = serde_json::from_str(text).map_err(|e| PdkError::Schema {
            path: "$".into(),
            message: e.to_string(),
        })?;
        let obj = root.as_object().ok_or_else(|| PdkError::Schema {
            path: "$".into(),
            message: "expected an object".into(),
        })?;
        let name = field::<String>(obj, "name", "$")?;
        let layers_v = obj
            .get("layers")
            .and_then(Value::as_array)
            .ok_or_else(|| schema("$.layers", "expected an array"))?;
        let mut layers = Vec::new();
        for (i, v) in layers_v.iter().enumerate() {
            layers.push(decode::<LayerRules>(v, &format!("$.layers[{i}]"))?);
        }
        let vias_v = obj
            .get("vias")
            .and_then(Value::as_array)
            .ok_or_else(|| schema("$.vias", "expected an array"))?;
        let mut vias = Vec::new();
        for (i, v) in vias_v.iter().enumerate() {
            vias.push(decode::<ViaRules>(v, &format!("$.vias[{i}]"))?);
        }
        let feol = decode::<FeolRules>(
            obj.get("feol").ok_or_else(|| schema("$.feol", "missing field"))?,
            "$.feol",
        )?;
        let forbidden_adjacency = match obj.get("forbidden_adjacency") {
            Some(v) => decode(v, "$.forbidden_adjacency")?,
            None => Vec::new(),
        };
        let mut pdk = Pdk {
            name,
            layers,
            vias,
            feol,
            forbidden_adjacency,
            derived: Derived::default(),
        };
        pdk.validate()?;
        pdk.derive();
        Ok(pdk)
    }

    fn validate(&self) -> Result<(), PdkError> {
        let inv = |rule, layer: &str, detail: String| PdkError::Invariant {
            rule,
            layer: layer.to_string(),
            detail,
        };
        if self.layers.is_empty() {
            return Err(inv("layer_stack", "-", "no routing layers".into()));
        }
        for l in &self.layers {
            if !(l.pitch > l.width && l.width > 0) {
                return Err(inv(
                    "pitch_gt_width",
                    &l.name,
                    format!("Pitch {} must exceed Width {} > 0", l.pitch, l.width),
                ));
            }
            if !(0 < l.min_l && l.min_l <= l.max_l) {
                return Err(inv(
                    "min_max_length",
                    &l.name,
                    format!("need 0 < MinL {} <= MaxL {}", l.min_l, l.max_l),
                ));
            }
            if l.end_to_end <= 0 {
                return Err(inv("end_to_end", &l.name, "EndToEnd must be positive".into()));
            }
            if !(0 <= l.offset && l.offset < l.pitch) {
                return Err(inv(
                    "offset",
                    &l.name,
                    format!("Offset {} must lie in [0, Pitch)", l.offset),
                ));
            }
            if l.width % 2 != 0 {
                return Err(inv("even_width", &l.name, "Width must be even".into()));
            }
            if !(l.unit_r.is_finite() && l.unit_r >= 0.0 && l.unit_c.is_finite() && l.unit_c >= 0.0) {
                return Err(inv("parasitics", &l.name, "unit parasitics must be finite and >= 0".into()));
            }
        }
        for w in self.layers.windows(2) {
            if w[0].direction == w[1].direction {
                return Err(inv(
                    "direction_alternation",
                    &w[1].name,
                    format!("same direction as {}", w[0].name),
                ));
            }
        }
        for v in &self.vias {
            let lo = self
                .layer_index(&v.from)
                .ok_or_else(|| inv("via_layers", &v.name, format!("unknown layer {}", v.from)))?;
            let hi = self
                .layer_index(&v.to)
                .ok_or_else(|| inv("via_layers", &v.name, format!("unknown layer {}", v.to)))?;
            if hi != lo + 1 {
                return Err(inv("via_layers", &v.name, "layers are not adjacent".into()));
            }
            let dims = [
                v.space_x, v.space_y, v.width_x, v.width_y, v.venc_a_l, v.venc_a_h, v.venc_p_l, v.venc_p_h,
            ];
            if dims.iter().any(|&d| d <= 0) {
                return Err(inv("via_dimensions", &v.name, "all via dimensions must be positive".into()));
            }
            if v.width_x % 2 != 0 || v.width_y % 2 != 0 {
                return Err(inv("via_dimensions", &v.name, "cut widths must be even".into()));
            }
            if !(v.r_via.is_finite() && v.r_via >= 0.0) {
                return Err(inv("parasitics", &v.name, "r_via must be finite and >= 0".into()));
            }
            for (layer, venc_p) in [(lo, v.venc_p_l), (hi, v.venc_p_h)] {
                let l = &self.layers[layer];
                let cut_perp = match l.direction {
                    Direction::Vertical => v.width_x,
                    Direction::Horizontal => v.width_y,
                };
                if l.width < cut_perp + 2 * venc_p {
                    return Err(inv(
                        "via_enclosure",
                        &l.name,
                        format!("Width {} cannot enclose {} cut {} with VencP {}", l.width, v.name, cut_perp, venc_p),
                    ));
                }
            }
        }
        for i in 0..self.layers.len().saturating_sub(1) {
            if self.via_between(i).is_none() {
                return Err(inv(
                    "via_coverage",
                    &self.layers[i].name,
                    format!("no via rules to {}", self.layers[i + 1].name),
                ));
            }
        }
        let f = &self.feol;
        if [f.poly_pitch, f.fin_pitch, f.row_height, f.poly_width, f.grid].iter().any(|&d| d <= 0) {
            return Err(inv("feol_dimensions", "feol", "FEOL dimensions must be positive".into()));
        }
        if !(f.unit_cap > 0.0 && f.unit_res > 0.0) {
            return Err(inv("feol_dimensions", "feol", "unit_cap and unit_res must be positive".into()));
        }
        Ok(())
    }

    fn derive(&mut self) {
        let n = self.layers.len();
        let mut ext = vec![0; n];
        for i in 0..n {
            let dir = self.layers[i].direction;
            let along = |v: &ViaRules| match dir {
                Direction::Vertical => v.width_y / 2,
                Direction::Horizontal => v.width_x / 2,
            };
            if i > 0 {
                if let Some(v) = self.via_between(i - 1) {
                    ext[i] = ext[i].max(along(v) + v.venc_a_h);
                }
            }
            if let Some(v) = self.via_between(i) {
                ext[i] = ext[i].max(along(v) + v.venc_a_l);
            }
        }
        let mut keepout = vec![1; n];
        for i in 0..n {
            if let Some(step) = self.stop_pitch(i) {
                let need = self.layers[i].end_to_end + 2 * ext[i];
                keepout[i] = ((need + step - 1) / step).max(1);
            }
        }
        self.derived = Derived { ext, keepout };
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    pub fn layer(&self, idx: usize) -> &LayerRules {
        &self.layers[idx]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn is_routing_layer(&self, name: &str) -> bool {
        self.layer_index(name).is_some()
    }

    pub fn via_between(&self, lower: usize) -> Option<&ViaRules> {
        let lo = self.layers.get(lower)?;
        let hi = self.layers.get(lower + 1)?;
        self.vias.iter().find(|v| v.from == lo.name && v.to == hi.name)
    }

    pub fn via_by_name(&self, name: &str) -> Option<&ViaRules> {
        self.vias.iter().find(|v| v.name == name)
    }

    /// Index of the lower layer a via connects.
    pub fn via_lower(&self, name: &str) -> Option<usize> {
        self.via_by_name(name).and_then(|v| self.layer_index(&v.from))
    }

    /// Neighbor layer whose tracks define the stopping points of `idx`.
    /// The lower neighbor wins when both exist.
    pub fn stop_layer(&self, idx: usize) -> Option<usize> {
        let dir = self.layers.get(idx)?.direction;
        if idx > 0 && self.layers[idx - 1].direction != dir {
            return Some(idx - 1);
        }
        if idx + 1 < self.layers.len() && self.layers[idx + 1].direction != dir {
            return Some(idx + 1);
        }
        None
    }

    pub fn stop_pitch(&self, idx: usize) -> Option<i64> {
        self.stop_layer(idx).map(|s| self.layers[s].pitch)
    }

    pub fn track_coord(&self, layer: usize, index: i64) -> i64 {
        let l = &self.layers[layer];
        l.offset + index * l.pitch
    }

    pub fn track_index(&self, layer: usize, coord: i64) -> Result<i64, PdkError> {
        let l = &self.layers[layer];
        let rel = coord - l.offset;
        if rel.rem_euclid(l.pitch) != 0 {
            return Err(PdkError::OffGrid {
                layer: l.name.clone(),
                grid: "major",
                coord,
            });
        }
        Ok(rel.div_euclid(l.pitch))
    }

    pub fn stop_coord(&self, layer: usize, index: i64) -> Result<i64, PdkError> {
        let s = self
            .stop_layer(layer)
            .ok_or_else(|| PdkError::NoNeighbor(self.layers[layer].name.clone()))?;
        Ok(self.track_coord(s, index))
    }

    pub fn stop_index(&self, layer: usize, coord: i64) -> Result<i64, PdkError> {
        let s = self
            .stop_layer(layer)
            .ok_or_else(|| PdkError::NoNeighbor(self.layers[layer].name.clone()))?;
        self.track_index(s, coord).map_err(|_| PdkError::OffGrid {
            layer: self.layers[layer].name.clone(),
            grid: "minor",
            coord,
        })
    }

    /// Metal extension past the end stops of every wire on `layer`.
    pub fn line_end_ext(&self, layer: usize) -> i64 {
        self.derived.ext[layer]
    }

    /// Minimum stop distance between metal of different pieces on one track
    /// that keeps the EndToEnd rule satisfied.
    pub fn keepout_stops(&self, layer: usize) -> i64 {
        self.derived.keepout[layer]
    }

    /// Grid cells every block keeps empty along its boundary.
    pub fn block_margin(&self) -> i64 {
        self.derived.keepout.iter().copied().max().unwrap_or(1) - 1
    }

    /// Resistance (ohms) and capacitance (aF) of a centerline of `length` nm.
    pub fn wire_parasitics(&self, layer: usize, length: i64) -> (f64, f64) {
        let l = &self.layers[layer];
        (self.wire_resistance_uohm(layer, length) as f64 / UOHM, l.unit_c * length as f64)
    }

    /// Wire resistance in micro-ohms; exactly additive over splits.
    pub fn wire_resistance_uohm(&self, layer: usize, length: i64) -> i64 {
        to_uohm(self.layers[layer].unit_r) * length
    }

    pub fn via_resistance_uohm(&self, via: &ViaRules) -> i64 {
        to_uohm(via.r_via)
    }

    pub fn via_parasitics(&self, via: &ViaRules) -> f64 {
        self.via_resistance_uohm(via) as f64 / UOHM
    }

    /// Lowest per-nm resistance in the stack, used for length budgets.
    pub fn min_unit_r(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.unit_r)
            .fold(f64::INFINITY, f64::min)
    }

    /// Pitch shared by all layers of `dir`, if the stack is uniform.
    pub fn uniform_pitch(&self, dir: Direction) -> Option<(i64, i64)> {
        let mut it = self.layers.iter().filter(|l| l.direction == dir);
        let first = it.next()?;
        let key = (first.pitch, first.offset);
        it.all(|l| (l.pitch, l.offset) == key).then_some(key)
    }

    /// Metal rect of a wire on `layer`, centered on `track`, between stops.
    pub fn wire_rect(&self, layer: usize, track: i64, lo: i64, hi: i64) -> Result<crate::geom::Rect, PdkError> {
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let l = &self.layers[layer];
        let c = self.track_coord(layer, track);
        let a = self.stop_coord(layer, lo)? - self.line_end_ext(layer);
        let b = self.stop_coord(layer, hi)? + self.line_end_ext(layer);
        let hw = l.width / 2;
        Ok(match l.direction {
            Direction::Vertical => crate::geom::Rect::new(c - hw, a, c + hw, b),
            Direction::Horizontal => crate::geom::Rect::new(a, c - hw, b, c + hw),
        })
    }

    /// Inverse of [`Pdk::wire_rect`]; `None` when the rect is not a legal wire.
    pub fn rect_to_wire(&self, layer: usize, r: &crate::geom::Rect) -> Option<(i64, i64, i64)> {
        let l = &self.layers[layer];
        let ext = self.line_end_ext(layer);
        let (cross0, cross1, a, b) = match l.direction {
            Direction::Vertical => (r.x0, r.x1, r.y0, r.y1),
            Direction::Horizontal => (r.y0, r.y1, r.x0, r.x1),
        };
        if cross1 - cross0 != l.width {
            return None;
        }
        let track = self.track_index(layer, (cross0 + cross1) / 2).ok()?;
        let lo = self.stop_index(layer, a + ext).ok()?;
        let hi = self.stop_index(layer, b - ext).ok()?;
        (lo <= hi).then_some((track, lo, hi))
    }

    /// Cut rect of the via between `lower` and `lower + 1` at a track crossing.
    pub fn via_rect(&self, lower: usize, x: i64, y: i64) -> Option<crate::geom::Rect> {
        let v = self.via_between(lower)?;
        Some(crate::geom::Rect::new(
            x - v.width_x / 2,
            y - v.width_y / 2,
            x + v.width_x / 2,
            y + v.width_y / 2,
        ))
    }
}

fn schema(path: &str, message: &str) -> PdkError {
    PdkError::Schema {
        path: path.to_string(),
        message: message.to_string(),
    }
}

fn decode<T: serde::de::DeserializeOwned>(v: &Value, path: &str) -> Result<T, PdkError> {
    serde_json::from_value(v.clone()).map_err(|e| PdkError::Schema {
        path: path.to_string(),
        message: e.to_string(),
    })
}

fn field<T: serde::de::DeserializeOwned>(
    obj: &serde_json::Map<String, Value>,
    key: &str,
    parent: &str,
) -> Result<T, PdkError> {
    let path = format!("{parent}.{key}");
    let v = obj.get(key).ok_or_else(|| schema(&path, "missing field"))?;
    decode(v, &path)
}

/// Micro-ohms per ohm.
pub const UOHM: f64 = 1e6;

/// Ohms to integer micro-ohms.
pub fn to_uohm(ohms: f64) -> i64 {
    (ohms * UOHM).round() as i64
}

/// Bundled mock 14nm FinFET rule file.
pub const MOCK14_JSON: &str = include_str!("../data/pdk/mock14.json");
/// Bundled mock 65nm bulk rule file.
pub const MOCK65_JSON: &str = include_str!("../data/pdk/mock65.json");

pub fn mock14() -> Pdk {
    Pdk::from_json_str(MOCK14_JSON).expect("bundled mock14 PDK is valid")
}

pub fn mock65() -> Pdk {
    Pdk::from_json_str(MOCK65_JSON).expect("bundled mock65 PDK is valid")
}
