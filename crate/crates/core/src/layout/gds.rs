//! GDSII stream writer.

use std::collections::BTreeMap;
use std::path::Path;

use super::{emit_json, AbstractLayout, LayoutError};

/// Abstract layer name to `(gds layer, datatype)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LayerMap {
    pub map: BTreeMap<String, (i16, i16)>,
}

impl LayerMap {
    /// Lines of `name layer datatype`; `#` starts a comment.
    pub fn parse(text: &str) -> Result<LayerMap, LayoutError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let t: Vec<&str> = line.split_whitespace().collect();
            let parsed = match t[..] {
                [name, l, d] => l.parse::<i16>().ok().zip(d.parse::<i16>().ok()).map(|p| (name, p)),
                _ => None,
            };
            let (name, pair) = parsed.ok_or_else(|| LayoutError::LayerMap {
                line: i + 1,
                message: format!("expected `name layer datatype`, got `{line}`"),
            })?;
            map.insert(name.to_string(), pair);
        }
        Ok(LayerMap { map })
    }

    pub fn load(path: &Path) -> Result<LayerMap, LayoutError> {
        let text = std::fs::read_to_string(path).map_err(|source| LayoutError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn get(&self, layer: &str) -> Option<(i16, i16)> {
        self.map.get(layer).copied()
    }
}

const HEADER: u16 = 0x0002;
const BGNLIB: u16 = 0x0102;
const LIBNAME: u16 = 0x0206;
const UNITS: u16 = 0x0305;
const ENDLIB: u16 = 0x0400;
const BGNSTR: u16 = 0x0502;
const STRNAME: u16 = 0x0606;
const ENDSTR: u16 = 0x0700;
const BOUNDARY: u16 = 0x0800;
const SREF: u16 = 0x0A00;
const LAYER: u16 = 0x0D02;
const DATATYPE: u16 = 0x0E02;
const XY: u16 = 0x1003;
const ENDEL: u16 = 0x1100;
const SNAME: u16 = 0x1206;
const STRANS: u16 = 0x1A01;
const ANGLE: u16 = 0x1C05;

/// Fixed timestamp keeps the stream byte-deterministic.
const STAMP: [i16; 6] = [2000, 1, 1, 0, 0, 0];

/// Eight-byte excess-64 base-16 real.
pub fn real8(v: f64) -> [u8; 8] {
    if v == 0.0 {
        return [0; 8];
    }
    let sign = if v < 0.0 { 0x80u8 } else { 0 };
    let mut m = v.abs();
    let mut exp: i32 = 64;
    while m >= 1.0 {
        m /= 16.0;
        exp += 1;
    }
    while m < 1.0 / 16.0 {
        m *= 16.0;
        exp -= 1;
    }
    let mant = (m * (1u64 << 56) as f64).round() as u64;
    let mut out = [0u8; 8];
    out[0] = sign | exp as u8;
    out[1..].copy_from_slice(&mant.to_be_bytes()[1..]);
    out
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn record(&mut self, tag: u16, data: &[u8]) {
        let len = (data.len() + 4) as u16;
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(&tag.to_be_bytes());
        self.buf.extend_from_slice(data);
    }

    fn i16s(&mut self, tag: u16, v: &[i16]) {
        let d: Vec<u8> = v.iter().flat_map(|x| x.to_be_bytes()).collect();
        self.record(tag, &d);
    }

    fn i32s(&mut self, tag: u16, v: &[i32]) {
        let d: Vec<u8> = v.iter().flat_map(|x| x.to_be_bytes()).collect();
        self.record(tag, &d);
    }

    fn string(&mut self, tag: u16, s: &str) {
        let mut d = s.as_bytes().to_vec();
        if d.len() % 2 == 1 {
            d.push(0);
        }
        self.record(tag, &d);
    }
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '?' || c == '$' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "TOP".into()
    } else {
        s
    }
}

/// Assigns one structure name per distinct layout, children first.
fn collect<'a>(
    l: &'a AbstractLayout,
    names: &mut BTreeMap<String, String>,
    used: &mut BTreeMap<String, usize>,
    order: &mut Vec<(String, &'a AbstractLayout)>,
) -> String {
    let key = emit_json(l);
    if let Some(n) = names.get(&key) {
        return n.clone();
    }
    for c in &l.children {
        collect(&c.layout, names, used, order);
    }
    let base = sanitize(&l.name);
    let count = used.entry(base.clone()).or_insert(0);
    let name = if *count == 0 { base.clone() } else { format!("{base}_{count}") };
    *count += 1;
    names.insert(key, name.clone());
    order.push((name.clone(), l));
    name
}

fn to_i32(v: i64) -> i32 {
    i32::try_from(v).expect("coordinate fits in 32 bits")
}

/// Serializes the hierarchy with 1 nm database units.
pub fn emit_gdsii(layout: &AbstractLayout, map: &LayerMap) -> Result<Vec<u8>, LayoutError> {
    let mut names = BTreeMap::new();
    let mut used = BTreeMap::new();
    let mut order = Vec::new();
    collect(layout, &mut names, &mut used, &mut order);

    let mut w = Writer { buf: Vec::new() };
    w.i16s(HEADER, &[600]);
    let stamp: Vec<i16> = STAMP.iter().chain(STAMP.iter()).copied().collect();
    w.i16s(BGNLIB, &stamp);
    w.string(LIBNAME, "GRIDLOOM");
    let mut units = real8(1e-3).to_vec();
    units.extend_from_slice(&real8(1e-9));
    w.record(UNITS, &units);
    for (name, l) in &order {
        w.i16s(BGNSTR, &stamp);
        w.string(STRNAME, name);
        let mut shapes = l.shapes.clone();
        shapes.sort();
        shapes.dedup();
        for s in &shapes {
            let (layer, dt) = map.get(&s.layer).ok_or_else(|| LayoutError::UnmappedLayer(s.layer.clone()))?;
            let r = s.rect;
            w.record(BOUNDARY, &[]);
            w.i16s(LAYER, &[layer]);
            w.i16s(DATATYPE, &[dt]);
            let pts = [r.x0, r.y0, r.x1, r.y0, r.x1, r.y1, r.x0, r.y1, r.x0, r.y0];
            let pts: Vec<i32> = pts.iter().map(|&v| to_i32(v)).collect();
            w.i32s(XY, &pts);
            w.record(ENDEL, &[]);
        }
        let mut children: Vec<&super::Child> = l.children.iter().collect();
        children.sort_by(|a, b| a.instance.cmp(&b.instance));
        for c in children {
            let cname = &names[&emit_json(&c.layout)];
            w.record(SREF, &[]);
            w.string(SNAME, cname);
            let t = c.transform;
            let (x, y) = if t.mirror {
                // Reflect about the x axis, then rotate 180 degrees: x -> -x.
                w.record(STRANS, &0x8000u16.to_be_bytes());
                w.record(ANGLE, &real8(180.0));
                (c.layout.bbox.x0 + c.layout.bbox.x1 + t.dx, t.dy)
            } else {
                (t.dx, t.dy)
            };
            w.i32s(XY, &[to_i32(x), to_i32(y)]);
            w.record(ENDEL, &[]);
        }
        w.record(ENDSTR, &[]);
    }
    w.record(ENDLIB, &[]);
    Ok(w.buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Rect;

    #[test]
    fn real8_known_values() {
        assert_eq!(real8(1.0), [0x41, 0x10, 0, 0, 0, 0, 0, 0]);
        assert_eq!(real8(-2.0), [0xC1, 0x20, 0, 0, 0, 0, 0, 0]);
        assert_eq!(real8(0.0), [0; 8]);
    }

    #[test]
    fn single_rect_has_five_points() {
        let mut l = AbstractLayout::new("top", Rect::new(0, 0, 10, 10));
        l.add("M1", Rect::new(0, 0, 10, 10), None);
        let map = LayerMap::parse("M1 15 0\n").unwrap();
        let bytes = emit_gdsii(&l, &map).unwrap();
        let xy = [0x00u8, 44, 0x10, 0x03];
        let pos = bytes.windows(4).position(|w| w == xy).expect("XY record");
        assert_eq!((bytes[pos + 1] as usize - 4) / 8, 5);
    }

    #[test]
    fn unmapped_layer_is_an_error() {
        let mut l = AbstractLayout::new("top", Rect::new(0, 0, 10, 10));
        l.add("M7", Rect::new(0, 0, 10, 10), None);
        assert!(matches!(
            emit_gdsii(&l, &LayerMap::default()),
            Err(LayoutError::UnmappedLayer(n)) if n == "M7"
        ));
    }

    #[test]
    fn layer_map_rejects_garbage() {
        assert!(matches!(
            LayerMap::parse("M1 15\n"),
            Err(LayoutError::LayerMap { line: 1, .. })
        ));
    }
}
