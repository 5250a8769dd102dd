//! Grid design-rule checks on flattened rectangles.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{flatten_layout, AbstractLayout, Shape};
use crate::geom::Rect;
use crate::pdk::{Direction, Pdk, FEOL_LAYERS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    OffGrid,
    MinLength,
    MaxLength,
    EndToEnd,
    ViaEnclosure,
    ViaSpacing,
    OverlapDistinctNets,
    Direction,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("rule serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub layer: String,
    pub rect: Rect,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DrcReport {
    pub violations: Vec<Violation>,
}

impl DrcReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }
}

struct Checker<'a> {
    pdk: &'a Pdk,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn flag(&mut self, rule: Rule, layer: &str, rect: Rect, detail: String) {
        self.out.push(Violation {
            rule,
            layer: layer.to_string(),
            rect,
            detail,
        });
    }

    /// `(cross lo, cross hi, along lo, along hi)`.
    fn along(dir: Direction, r: &Rect) -> (i64, i64, i64, i64) {
        match dir {
            Direction::Vertical => (r.x0, r.x1, r.y0, r.y1),
            Direction::Horizontal => (r.y0, r.y1, r.x0, r.x1),
        }
    }

    fn metal(&mut self, li: usize, shapes: &[&Shape]) {
        let pdk = self.pdk;
        let l = pdk.layer(li);
        let ext = pdk.line_end_ext(li);
        let mut tracks: BTreeMap<i64, Vec<(i64, i64, Rect)>> = BTreeMap::new();
        for s in shapes {
            let (c0, c1, a, b) = Self::along(l.direction, &s.rect);
            if c1 - c0 != l.width {
                if b - a == l.width {
                    self.flag(Rule::Direction, &l.name, s.rect, format!("drawn against {:?}", l.direction));
                } else {
                    self.flag(Rule::OffGrid, &l.name, s.rect, format!("width {} != {}", c1 - c0, l.width));
                }
                continue;
            }
            let center = (c0 + c1) / 2;
            if pdk.track_index(li, center).is_err() {
                self.flag(Rule::OffGrid, &l.name, s.rect, format!("center {center} off track"));
                continue;
            }
            if pdk.stop_index(li, a + ext).is_err() || pdk.stop_index(li, b - ext).is_err() {
                self.flag(Rule::OffGrid, &l.name, s.rect, "line end off stop grid".into());
            }
            let len = b - a;
            if len < l.min_l {
                self.flag(Rule::MinLength, &l.name, s.rect, format!("length {len} < {}", l.min_l));
            }
            if len > l.max_l {
                self.flag(Rule::MaxLength, &l.name, s.rect, format!("length {len} > {}", l.max_l));
            }
            tracks.entry(center).or_default().push((a, b, s.rect));
        }
        for segs in tracks.values_mut() {
            segs.sort();
            let mut reach: Option<i64> = None;
            for &(a, b, r) in segs.iter() {
                if let Some(hi) = reach {
                    let gap = a - hi;
                    if gap > 0 && gap < l.end_to_end {
                        self.flag(Rule::EndToEnd, &l.name, r, format!("end gap {gap} < {}", l.end_to_end));
                    }
                }
                reach = Some(reach.map_or(b, |h| h.max(b)));
            }
        }
    }

    fn via(&mut self, name: &str, shapes: &[&Shape], by_layer: &BTreeMap<&str, Vec<&Shape>>) {
        let pdk = self.pdk;
        let v = pdk.via_by_name(name).expect("via layer");
        let lower = pdk.via_lower(name).expect("via lower layer");
        let upper = lower + 1;
        for s in shapes {
            let r = s.rect;
            let (cx2, cy2) = r.center2();
            let grid_ok = r.width() == v.width_x
                && r.height() == v.width_y
                && cx2 % 2 == 0
                && cy2 % 2 == 0
                && [lower, upper].iter().all(|&li| {
                    let c = match pdk.layer(li).direction {
                        Direction::Vertical => cx2 / 2,
                        Direction::Horizontal => cy2 / 2,
                    };
                    pdk.track_index(li, c).is_ok()
                });
            if !grid_ok {
                self.flag(Rule::OffGrid, name, r, "via off track grid".into());
                continue;
            }
            for (li, ea, ep) in [(lower, v.venc_a_l, v.venc_p_l), (upper, v.venc_a_h, v.venc_p_h)] {
                let l = pdk.layer(li);
                let need = match l.direction {
                    Direction::Vertical => r.expand(ep, ea),
                    Direction::Horizontal => r.expand(ea, ep),
                };
                let covered = by_layer
                    .get(l.name.as_str())
                    .is_some_and(|v| v.iter().any(|m| m.net == s.net && m.rect.contains(&need)));
                if !covered {
                    self.flag(Rule::ViaEnclosure, name, r, format!("{} does not enclose", l.name));
                }
            }
        }
        for (i, a) in shapes.iter().enumerate() {
            for b in &shapes[i + 1..] {
                if a.rect == b.rect {
                    continue;
                }
                let gx = a.rect.x0.max(b.rect.x0) - a.rect.x1.min(b.rect.x1);
                let gy = a.rect.y0.max(b.rect.y0) - a.rect.y1.min(b.rect.y1);
                if gx < v.space_x && gy < v.space_y {
                    self.flag(Rule::ViaSpacing, name, b.rect, format!("spacing ({gx}, {gy})"));
                }
            }
        }
    }

    fn feol(&mut self, layer: &str, shapes: &[&Shape]) {
        let g = self.pdk.feol.grid;
        for s in shapes {
            let r = s.rect;
            if [r.x0, r.y0, r.x1, r.y1].iter().any(|c| c.rem_euclid(g) != 0) {
                self.flag(Rule::OffGrid, layer, r, format!("edge off the {g} nm grid"));
            }
        }
    }

    fn overlaps(&mut self, layer: &str, shapes: &[&Shape]) {
        let mut v: Vec<&Shape> = shapes.iter().copied().filter(|s| s.net.is_some()).collect();
        v.sort_by_key(|s| s.rect.x0);
        for (i, a) in v.iter().enumerate() {
            for b in &v[i + 1..] {
                if b.rect.x0 >= a.rect.x1 {
                    break;
                }
                if a.net != b.net && a.rect.overlaps(&b.rect) {
                    self.flag(
                        Rule::OverlapDistinctNets,
                        layer,
                        b.rect,
                        format!(
                            "{} overlaps {}",
                            a.net.as_deref().unwrap_or(""),
                            b.net.as_deref().unwrap_or("")
                        ),
                    );
                }
            }
        }
    }
}

/// Checks every flattened shape; violations sorted by (layer, x, y, rule).
pub fn drc(layout: &AbstractLayout, pdk: &Pdk) -> DrcReport {
    let mut flat = flatten_layout(layout);
    flat.sort();
    flat.dedup();
    drc_shapes(&flat, pdk)
}

pub fn drc_shapes(flat: &[Shape], pdk: &Pdk) -> DrcReport {
    let mut by_layer: BTreeMap<&str, Vec<&Shape>> = BTreeMap::new();
    for s in flat {
        by_layer.entry(s.layer.as_str()).or_default().push(s);
    }
    let mut c = Checker { pdk, out: Vec::new() };
    for (layer, shapes) in &by_layer {
        if let Some(li) = pdk.layer_index(layer) {
            c.metal(li, shapes);
        } else if pdk.via_by_name(layer).is_some() {
            c.via(layer, shapes, &by_layer);
        } else if FEOL_LAYERS.contains(layer) {
            c.feol(layer, shapes);
        } else {
            for s in shapes {
                c.flag(Rule::OffGrid, layer, s.rect, "unknown layer".into());
            }
            continue;
        }
        c.overlaps(layer, shapes);
    }
    let mut out = c.out;
    out.sort_by(|a, b| (&a.layer, a.rect.x0, a.rect.y0, a.rule).cmp(&(&b.layer, b.rect.x0, b.rect.y0, b.rule)));
    DrcReport { violations: out }
}

fn touches(a: &Rect, b: &Rect) -> bool {
    a.x0 <= b.x1 && b.x0 <= a.x1 && a.y0 <= b.y1 && b.y0 <= a.y1
}

/// Nets whose routing-layer and via shapes split into more than one
/// connected piece, with the piece count.
pub fn open_nets(layout: &AbstractLayout, pdk: &Pdk) -> BTreeMap<String, usize> {
    let mut by_net: BTreeMap<String, Vec<Shape>> = BTreeMap::new();
    for s in flatten_layout(layout) {
        let conducting = pdk.layer_index(&s.layer).is_some() || pdk.via_by_name(&s.layer).is_some();
        if let (true, Some(n)) = (conducting, s.net.clone()) {
            by_net.entry(n).or_default().push(s);
        }
    }
    let mut out = BTreeMap::new();
    for (net, mut shapes) in by_net {
        shapes.sort();
        shapes.dedup();
        let n = shapes.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let layer_of = |s: &Shape| -> Vec<String> {
            match pdk.via_by_name(&s.layer) {
                Some(v) => vec![v.from.clone(), v.to.clone()],
                None => vec![s.layer.clone()],
            }
        };
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&shapes[i], &shapes[j]);
                if !touches(&a.rect, &b.rect) {
                    continue;
                }
                let (la, lb) = (layer_of(a), layer_of(b));
                let a_via = la.len() == 2;
                let b_via = lb.len() == 2;
                let linked = match (a_via, b_via) {
                    (false, false) => a.layer == b.layer,
                    (true, true) => false,
                    _ => la.iter().any(|l| lb.contains(l)),
                };
                if linked {
                    let (ra, rb) = (find(&mut parent, i), find(&mut parent, j));
                    parent[ra] = rb;
                }
            }
        }
        let roots: std::collections::BTreeSet<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        if roots.len() > 1 {
            out.insert(net, roots.len());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdk::mock14;

    fn layout_with(shapes: Vec<Shape>) -> AbstractLayout {
        let mut l = AbstractLayout::new("t", Rect::new(0, 0, 10_000, 10_000));
        l.shapes = shapes;
        l
    }

    #[test]
    fn clean_wire_with_via() {
        let pdk = mock14();
        let m1 = pdk.layer_index("M1").unwrap();
        let m2 = pdk.layer_index("M2").unwrap();
        let a = pdk.wire_rect(m1, 3, 2, 6).unwrap();
        let b = pdk.wire_rect(m2, 4, 1, 5).unwrap();
        let x = pdk.track_coord(m1, 3);
        let y = pdk.track_coord(m2, 4);
        let v = pdk.via_rect(m1, x, y).unwrap();
        let l = layout_with(vec![
            Shape::new("M1", a, Some("n")),
            Shape::new("M2", b, Some("n")),
            Shape::new("V1", v, Some("n")),
        ]);
        assert_eq!(drc(&l, &pdk), DrcReport::default());
    }

    #[test]
    fn end_to_end_one_short() {
        let pdk = mock14();
        let m1 = pdk.layer_index("M1").unwrap();
        let e2e = pdk.layer(m1).end_to_end;
        let a = pdk.wire_rect(m1, 0, 0, 3).unwrap();
        let b = Rect::new(a.x0, a.y1 + e2e - 1, a.x1, a.y1 + e2e - 1 + 200);
        let mut rep = drc_shapes(&[Shape::new("M1", a, None), Shape::new("M1", b, None)], &pdk);
        rep.violations.retain(|v| v.rule != Rule::OffGrid);
        assert_eq!(rep.count(Rule::EndToEnd), 1);
        assert_eq!(rep.violations.len(), 1);
    }

    #[test]
    fn min_length_one_short() {
        let pdk = mock14();
        let m1 = pdk.layer_index("M1").unwrap();
        let w = pdk.wire_rect(m1, 0, 0, 1).unwrap();
        let short = Rect::new(w.x0, w.y0, w.x1, w.y0 + pdk.layer(m1).min_l - 1);
        let rep = drc_shapes(&[Shape::new("M1", short, None)], &pdk);
        assert_eq!(rep.count(Rule::MinLength), 1);
    }

    #[test]
    fn distinct_nets_overlap() {
        let pdk = mock14();
        let m1 = pdk.layer_index("M1").unwrap();
        let w = pdk.wire_rect(m1, 0, 0, 3).unwrap();
        let rep = drc_shapes(&[Shape::new("M1", w, Some("a")), Shape::new("M1", w, Some("b"))], &pdk);
        assert_eq!(rep.count(Rule::OverlapDistinctNets), 1);
    }

    #[test]
    fn wrong_direction_and_unknown_layer() {
        let pdk = mock14();
        let r = Rect::new(0, 16, 400, 48);
        let rep = drc_shapes(&[Shape::new("M1", r, None), Shape::new("M9", r, None)], &pdk);
        assert_eq!(rep.count(Rule::Direction), 1);
        assert_eq!(rep.count(Rule::OffGrid), 1);
    }

    #[test]
    fn missing_enclosure_and_spacing() {
        let pdk = mock14();
        let m1 = pdk.layer_index("M1").unwrap();
        let (x, y) = (pdk.track_coord(m1, 0), pdk.track_coord(m1 + 1, 0));
        let v = pdk.via_rect(m1, x, y).unwrap();
        let rep = drc_shapes(&[Shape::new("V1", v, None)], &pdk);
        assert_eq!(rep.count(Rule::ViaEnclosure), 2);
        let close = v.translate(10, 0);
        let rep = drc_shapes(&[Shape::new("V1", v, None), Shape::new("V1", close, None)], &pdk);
        assert!(rep.count(Rule::ViaSpacing) == 1);
    }
}
