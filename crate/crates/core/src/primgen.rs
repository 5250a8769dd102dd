//! Parameterized primitive layouts on the routing grid.
//!
//! A primitive is a grid of unit cells. Each row of units gets a band of
//! horizontal second-layer tracks, one per net in the row; every unit
//! terminal drops a first-layer stub across the band with a via onto its
//! net's track. Nets present in several rows are tied by first-layer spines
//! at both sides of the block.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{Leaf, PrimitiveType};
use crate::geom::Rect;
use crate::layout::{drc, AbstractLayout};
use crate::netlist::{DeviceKind, FlatNetlist, PinRole};
use crate::pdk::{Direction, Pdk, PdkError};

#[derive(Debug, Error)]
pub enum PrimgenError {
    #[error("invalid primitive spec: {0}")]
    InvalidSpec(String),
    #[error("infeasible unit counts: {0}")]
    Infeasible(String),
    #[error("no arrangement fits aspect hint {0}")]
    InfeasibleAspect(f64),
    #[error("primitive {name} fails DRC with {count} violations (first: {first})")]
    DrcUnclean { name: String, count: usize, first: String },
    #[error(transparent)]
    Pdk(#[from] PdkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    Interdigitated,
    CommonCentroid,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitParams {
    pub nfin: u32,
    pub fingers: u32,
    pub unit_cap: f64,
    pub unit_res: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub name: String,
    pub kind: DeviceKind,
    /// Nets in the kind's pin order.
    pub nets: Vec<String>,
    pub units: u32,
}

impl DeviceSpec {
    fn net(&self, role: PinRole) -> Option<&str> {
        let i = self.kind.pin_roles().iter().position(|r| *r == role)?;
        self.nets.get(i).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub name: String,
    pub ptype: PrimitiveType,
    pub devices: Vec<DeviceSpec>,
    pub unit: UnitParams,
    pub pattern: PatternKind,
    /// Preferred height / width.
    pub aspect: f64,
    /// Parallel tracks per strap.
    pub strap_mult: u32,
    /// Fixed row count, overriding the aspect hint.
    #[serde(default)]
    pub rows: Option<u32>,
}

impl PrimitiveSpec {
    /// Spec for a recognized leaf, sized from device parameters.
    pub fn from_leaf(name: &str, leaf: &Leaf, flat: &FlatNetlist, pdk: &Pdk) -> Result<PrimitiveSpec, PrimgenError> {
        let mut devices = Vec::new();
        let mut unit = UnitParams {
            nfin: 1,
            fingers: 1,
            unit_cap: pdk.feol.unit_cap,
            unit_res: pdk.feol.unit_res,
        };
        for dn in &leaf.devices {
            let d = flat
                .device(dn)
                .ok_or_else(|| PrimgenError::InvalidSpec(format!("unknown device {dn}")))?;
            let units = match d.kind {
                DeviceKind::Nmos | DeviceKind::Pmos => {
                    unit.nfin = d.param("nfin").map(|v| v.round().max(1.0) as u32).unwrap_or(1);
                    let nf = d.param("nf").map(|v| v.round().max(1.0) as u32).unwrap_or(1);
                    d.multiplier() * nf
                }
                DeviceKind::Cap => passive_units(d.param("value"), pdk.feol.unit_cap) * d.multiplier(),
                DeviceKind::Res => passive_units(d.param("value"), pdk.feol.unit_res) * d.multiplier(),
            };
            devices.push(DeviceSpec {
                name: dn.clone(),
                kind: d.kind,
                nets: d.pins.clone(),
                units,
            });
        }
        let pattern = match leaf.ptype {
            PrimitiveType::DiffPair | PrimitiveType::CurrentMirror => PatternKind::Interdigitated,
            PrimitiveType::CapArray if devices.len() > 1 => PatternKind::CommonCentroid,
            _ => PatternKind::Plain,
        };
        Ok(PrimitiveSpec {
            name: name.to_string(),
            ptype: leaf.ptype,
            devices,
            unit,
            pattern,
            aspect: 1.0,
            strap_mult: 1,
            rows: None,
        })
    }

    pub fn validate(&self) -> Result<(), PrimgenError> {
        if self.devices.is_empty() {
            return Err(PrimgenError::InvalidSpec("no devices".into()));
        }
        if let Some(d) = self.devices.iter().find(|d| d.units == 0) {
            return Err(PrimgenError::InvalidSpec(format!("{} has zero units", d.name)));
        }
        if self.strap_mult == 0 {
            return Err(PrimgenError::InvalidSpec("strap multiplier must be at least 1".into()));
        }
        let mos = matches!(
            self.ptype,
            PrimitiveType::SingleMos | PrimitiveType::DiffPair | PrimitiveType::CurrentMirror
        );
        let want = match self.ptype {
            PrimitiveType::SingleMos => Some(1),
            PrimitiveType::DiffPair | PrimitiveType::CurrentMirror => Some(2),
            _ => None,
        };
        if want.is_some_and(|n| n != self.devices.len()) {
            return Err(PrimgenError::InvalidSpec(format!(
                "{:?} takes {} devices",
                self.ptype,
                want.unwrap()
            )));
        }
        if self.devices.iter().any(|d| d.kind.is_mos() != mos) {
            return Err(PrimgenError::InvalidSpec("device kinds do not fit the primitive type".into()));
        }
        if self.devices.iter().any(|d| d.nets.len() != d.kind.pin_count()) {
            return Err(PrimgenError::InvalidSpec("pin count mismatch".into()));
        }
        if !(self.aspect.is_finite() && self.aspect > 0.0) {
            return Err(PrimgenError::InfeasibleAspect(self.aspect));
        }
        if self.pattern == PatternKind::CommonCentroid && self.devices.len() == 2 && mos {
            let (a, b) = (self.devices[0].units, self.devices[1].units);
            if a != b || a % 2 == 1 {
                return Err(PrimgenError::Infeasible(format!(
                    "common centroid needs equal even counts, got {a} and {b}"
                )));
            }
        }
        Ok(())
    }

    fn total_units(&self) -> u32 {
        self.devices.iter().map(|d| d.units).sum()
    }

    fn is_array(&self) -> bool {
        self.ptype.is_array()
    }
}

fn passive_units(value: Option<f64>, unit: f64) -> u32 {
    match value {
        Some(v) if unit > 0.0 => (v / unit).round().max(1.0) as u32,
        _ => 1,
    }
}

/// Even spread of `na` A's among `na + nb` slots, A first.
fn alternate(na: u32, nb: u32) -> String {
    let n = na + nb;
    let mut s = String::with_capacity(n as usize);
    for k in 0..n as u64 {
        let before = (k * na as u64).div_ceil(n as u64);
        let after = ((k + 1) * na as u64).div_ceil(n as u64);
        s.push(if after > before { 'A' } else { 'B' });
    }
    s
}

/// Unit order for a two-device primitive: one row when interdigitated, two
/// rows when common-centroid.
pub fn gen_pattern(na: u32, nb: u32, pattern: PatternKind) -> Result<Vec<String>, PrimgenError> {
    match pattern {
        PatternKind::Interdigitated => {
            let rev = |s: &str| s.chars().rev().collect::<String>();
            let row = match (na % 2, nb % 2) {
                (0, 0) => {
                    let half = alternate(na / 2, nb / 2);
                    format!("{half}{}", rev(&half))
                }
                (1, 0) => {
                    let half = alternate(na / 2, nb / 2);
                    format!("{half}A{}", rev(&half))
                }
                (0, 1) => {
                    let half = alternate(na / 2, nb / 2);
                    format!("{half}B{}", rev(&half))
                }
                _ => alternate(na, nb),
            };
            Ok(vec![row])
        }
        PatternKind::CommonCentroid => {
            if na != nb || na % 2 == 1 || na == 0 {
                return Err(PrimgenError::Infeasible(format!(
                    "common centroid needs equal even counts, got {na} and {nb}"
                )));
            }
            let row1 = alternate(na / 2, nb / 2);
            let row2: String = row1.chars().rev().collect();
            Ok(vec![row1, row2])
        }
        PatternKind::Plain => Ok(vec![format!("{}{}", "A".repeat(na as usize), "B".repeat(nb as usize))]),
    }
}

/// Cell assignment on an `rows x cols` grid with the max centroid offset.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidGrid {
    pub cells: Vec<Vec<Option<usize>>>,
    /// Max over devices of the Euclidean centroid offset, in cell units.
    pub error: f64,
}

/// Max centroid error of an assignment, in cell units.
pub fn centroid_error(cells: &[Vec<Option<usize>>], devices: usize) -> f64 {
    let rows = cells.len() as i64;
    let cols = cells.first().map_or(0, |r| r.len()) as i64;
    let mut sum = vec![(0i64, 0i64, 0i64); devices];
    for (i, row) in cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if let Some(d) = c {
                let s = &mut sum[*d];
                s.0 += 2 * i as i64 - (rows - 1);
                s.1 += 2 * j as i64 - (cols - 1);
                s.2 += 1;
            }
        }
    }
    sum.iter()
        .filter(|s| s.2 > 0)
        .map(|&(y, x, n)| {
            if x == 0 && y == 0 {
                0.0
            } else {
                let (fx, fy) = (x as f64 / (2 * n) as f64, y as f64 / (2 * n) as f64);
                (fx * fx + fy * fy).sqrt()
            }
        })
        .fold(0.0, f64::max)
}

/// Common-centroid assignment of `counts` units on a fixed grid: the center
/// cell and center-symmetric triples absorb odd counts, everything else is
/// placed as point-reflected pairs nearest the center first.
pub fn centroid_grid(counts: &[u32], rows: usize, cols: usize) -> Option<CentroidGrid> {
    let total: u32 = counts.iter().sum();
    if rows == 0 || cols == 0 || total as usize > rows * cols {
        return None;
    }
    let mut cells = vec![vec![None; cols]; rows];
    let mut left: Vec<u32> = counts.to_vec();
    let (r, c) = (rows as i64, cols as i64);
    let center = (r % 2 == 1 && c % 2 == 1).then_some((r / 2, c / 2));
    let take = |cells: &mut Vec<Vec<Option<usize>>>, (i, j): (i64, i64), d: usize| {
        cells[i as usize][j as usize] = Some(d);
    };

    let mut odd: Vec<usize> = (0..counts.len()).filter(|&d| counts[d] % 2 == 1).collect();
    odd.sort_by_key(|&d| (counts[d], d));
    let mut odd = odd.into_iter().peekable();
    if let Some((ci, cj)) = center {
        if let Some(d) = odd.next() {
            take(&mut cells, (ci, cj), d);
            left[d] -= 1;
        }
        if r >= 3 && c >= 3 {
            for sign in [1i64, -1] {
                let Some(&d) = odd.peek() else { break };
                if left[d] < 3 {
                    break;
                }
                odd.next();
                for (di, dj) in [(1i64, 0i64), (-1, 1), (0, -1)] {
                    take(&mut cells, (ci + sign * di, cj + sign * dj), d);
                }
                left[d] -= 3;
            }
        }
    }

    // Point-reflected cell pairs, nearest the center first.
    let mut pairs = Vec::new();
    for i in 0..r {
        for j in 0..c {
            let (mi, mj) = (r - 1 - i, c - 1 - j);
            if (i, j) < (mi, mj) {
                let d2 = (2 * i - (r - 1)).pow(2) + (2 * j - (c - 1)).pow(2);
                pairs.push((d2, (i, j), (mi, mj)));
            }
        }
    }
    pairs.sort();
    let mut pairs: Vec<((i64, i64), (i64, i64))> = pairs
        .into_iter()
        .filter(|(_, a, b)| cells[a.0 as usize][a.1 as usize].is_none() && cells[b.0 as usize][b.1 as usize].is_none())
        .map(|(_, a, b)| (a, b))
        .collect();
    pairs.reverse();

    let rest: Vec<usize> = odd.collect();
    for chunk in rest.chunks(2) {
        let (a, b) = pairs.pop()?;
        take(&mut cells, a, chunk[0]);
        left[chunk[0]] -= 1;
        if let Some(&d) = chunk.get(1) {
            take(&mut cells, b, d);
            left[d] -= 1;
        }
    }
    loop {
        let Some(d) = (0..left.len()).filter(|&d| left[d] >= 2).max_by_key(|&d| (left[d], usize::MAX - d)) else {
            break;
        };
        let (a, b) = pairs.pop()?;
        take(&mut cells, a, d);
        take(&mut cells, b, d);
        left[d] -= 2;
    }
    if left.iter().any(|&n| n != 0) {
        return None;
    }
    let error = centroid_error(&cells, counts.len());
    Some(CentroidGrid { cells, error })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Slot {
    dev: Option<usize>,
    mirrored: bool,
}

#[derive(Debug, Clone)]
struct Arrangement {
    rows: Vec<Vec<Slot>>,
    error: f64,
}

fn row_slots(devs: impl IntoIterator<Item = Option<usize>>) -> Vec<Slot> {
    let v: Vec<Option<usize>> = devs.into_iter().collect();
    let n = v.len();
    v.into_iter()
        .enumerate()
        .map(|(k, dev)| Slot {
            dev,
            mirrored: 2 * k >= n,
        })
        .collect()
}

fn divisors(n: u32) -> Vec<u32> {
    (1..=n).filter(|d| n.is_multiple_of(*d)).collect()
}

/// Candidate row counts, ascending.
fn row_candidates(spec: &PrimitiveSpec) -> Vec<u32> {
    let units: Vec<u32> = spec.devices.iter().map(|d| d.units).collect();
    match (spec.ptype, spec.pattern) {
        (_, PatternKind::CommonCentroid) if !spec.is_array() => vec![2],
        (_, PatternKind::CommonCentroid) => (1..=4).collect(),
        (PrimitiveType::SingleMos | PrimitiveType::DiffPair | PrimitiveType::CurrentMirror, _) => {
            let g = units.iter().copied().fold(0, gcd);
            let all = divisors(g);
            // Rows with two odd counts cannot be palindromes.
            let sym: Vec<u32> = all
                .iter()
                .copied()
                .filter(|r| units.len() < 2 || units.iter().any(|u| (u / r) % 2 == 0))
                .collect();
            if sym.is_empty() {
                all
            } else {
                sym
            }
        }
        _ => (1..=spec.total_units().min(6)).collect(),
    }
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn arrange(spec: &PrimitiveSpec, rows: u32) -> Result<Arrangement, PrimgenError> {
    let units: Vec<u32> = spec.devices.iter().map(|d| d.units).collect();
    let r = rows as usize;
    let to_devs = |s: &str| -> Vec<Option<usize>> { s.chars().map(|c| Some(if c == 'A' { 0 } else { 1 })).collect() };
    let mut out: Vec<Vec<Option<usize>>> = match (spec.pattern, spec.is_array()) {
        (PatternKind::CommonCentroid, true) => {
            let total = spec.total_units() as usize;
            let base = total.div_ceil(r);
            let best = (base..base + 3)
                .filter_map(|c| centroid_grid(&units, r, c))
                .min_by(|a, b| a.error.total_cmp(&b.error));
            let g = best.ok_or_else(|| PrimgenError::Infeasible(format!("no {rows}-row centroid grid")))?;
            g.cells
        }
        (PatternKind::CommonCentroid, false) => {
            if rows != 2 {
                return Err(PrimgenError::Infeasible("common centroid uses two rows".into()));
            }
            gen_pattern(units[0], units[1], PatternKind::CommonCentroid)?
                .iter()
                .map(|s| to_devs(s))
                .collect()
        }
        (_, false) => {
            if units.iter().any(|u| u % rows != 0) {
                return Err(PrimgenError::Infeasible(format!("{rows} rows do not divide the unit counts")));
            }
            let row = if units.len() == 1 {
                vec![Some(0); (units[0] / rows) as usize]
            } else {
                to_devs(&gen_pattern(units[0] / rows, units[1] / rows, spec.pattern)?[0])
            };
            vec![row; r]
        }
        (_, true) => {
            let seq: Vec<Option<usize>> = units
                .iter()
                .enumerate()
                .flat_map(|(d, &n)| std::iter::repeat_n(Some(d), n as usize))
                .collect();
            let per = seq.len().div_ceil(r);
            if per * (r - 1) >= seq.len() {
                return Err(PrimgenError::Infeasible(format!("{rows} rows leave an empty row")));
            }
            let mut rows_v: Vec<Vec<Option<usize>>> = seq.chunks(per).map(<[_]>::to_vec).collect();
            for row in &mut rows_v {
                row.resize(per, None);
            }
            rows_v
        }
    };
    let error = if spec.is_array() {
        centroid_error(&out, spec.devices.len())
    } else {
        0.0
    };
    if spec.is_array() {
        for row in &mut out {
            row.insert(0, None);
            row.push(None);
        }
    }
    Ok(Arrangement {
        rows: out.into_iter().map(row_slots).collect(),
        error,
    })
}

/// Unit width in columns and the terminal net of each column.
fn unit_columns(spec: &PrimitiveSpec, slot: Slot) -> Vec<Option<&str>> {
    let mos = !spec.is_array();
    let width = if mos { 4 } else { 2 };
    let Some(d) = slot.dev else {
        return vec![None; width];
    };
    let dev = &spec.devices[d];
    let mut cols: Vec<Option<&str>> = if mos {
        let s = dev.net(PinRole::Source);
        let b = dev.net(PinRole::Bulk).filter(|b| Some(*b) != s);
        vec![s, dev.net(PinRole::Gate), dev.net(PinRole::Drain), b]
    } else {
        vec![dev.net(PinRole::Plus), dev.net(PinRole::Minus)]
    };
    if slot.mirrored {
        cols.reverse();
    }
    cols
}

fn check_grid(pdk: &Pdk) -> Result<(usize, usize), PrimgenError> {
    let (m1, m2) = (0usize, 1usize);
    if pdk.num_layers() < 2
        || pdk.layer(m1).direction != Direction::Vertical
        || pdk.layer(m2).direction != Direction::Horizontal
    {
        return Err(PrimgenError::InvalidSpec(
            "primitives need a vertical first layer and a horizontal second layer".into(),
        ));
    }
    let g = pdk.feol.grid;
    let (pv, ph) = (pdk.layer(m1).pitch, pdk.layer(m2).pitch);
    if pdk.layer(m1).offset * 2 != pv || pdk.layer(m2).offset * 2 != ph {
        return Err(PrimgenError::InvalidSpec("track offsets must be half a pitch".into()));
    }
    if pv % g != 0 || ph % g != 0 || (pv / 2) % g != 0 || (ph / 2) % g != 0 || pdk.feol.poly_width % (2 * g) != 0 {
        return Err(PrimgenError::InvalidSpec("unit cell does not fit the FEOL grid".into()));
    }
    Ok((m1, m2))
}

fn build(spec: &PrimitiveSpec, arr: &Arrangement, pdk: &Pdk) -> Result<AbstractLayout, PrimgenError> {
    let (m1, m2) = check_grid(pdk)?;
    let (pv, ph) = (pdk.layer(m1).pitch, pdk.layer(m2).pitch);
    let a = pdk.block_margin().max(1);
    let m = pdk.keepout_stops(m1).max(1);
    let mult = spec.strap_mult as i64;

    let row_cols: Vec<Vec<Vec<Option<&str>>>> = arr
        .rows
        .iter()
        .map(|row| row.iter().map(|&s| unit_columns(spec, s)).collect())
        .collect();
    let row_nets: Vec<Vec<&str>> = row_cols
        .iter()
        .map(|units| {
            let set: BTreeSet<&str> = units.iter().flatten().flatten().copied().collect();
            set.into_iter().collect()
        })
        .collect();
    let mut rows_of: BTreeMap<&str, usize> = BTreeMap::new();
    for nets in &row_nets {
        for n in nets {
            *rows_of.entry(n).or_default() += 1;
        }
    }
    let spines: Vec<&str> = rows_of.iter().filter(|(_, &c)| c >= 2).map(|(n, _)| *n).collect();
    let ns = spines.len() as i64;
    let unit_w: i64 = row_cols
        .first()
        .map(|u| u.iter().map(|c| c.len() as i64).sum())
        .unwrap_or(0);
    let first_unit_col = a + ns;
    // Unit widths are even, so the column count is too.
    let cols = first_unit_col + unit_w + ns + a;
    let right_spine_col = |k: i64| cols - 1 - a - k;

    // Track bands per row.
    let mut j0 = Vec::new();
    let mut track_of: Vec<BTreeMap<&str, i64>> = Vec::new();
    let mut next = a;
    for nets in &row_nets {
        let tracks = ((nets.len() as i64) * mult).max(2);
        j0.push(next);
        let mut t = BTreeMap::new();
        for (k, n) in nets.iter().enumerate() {
            t.insert(*n, next + k as i64 * mult);
        }
        track_of.push(t);
        next += tracks - 1 + m;
    }
    let band_len: Vec<i64> = row_nets.iter().map(|n| ((n.len() as i64) * mult).max(2)).collect();
    let last_track = j0.last().copied().unwrap_or(a) + band_len.last().copied().unwrap_or(2) - 1;
    let height_cells = last_track + 1 + a;
    let bbox = Rect::new(0, 0, cols * pv, height_cells * ph);
    let mut l = AbstractLayout::new(&spec.name, bbox);

    let via = |l: &mut AbstractLayout, col: i64, track: i64, net: &str| -> Result<(), PrimgenError> {
        let r = pdk
            .via_rect(m1, pdk.track_coord(m1, col), pdk.track_coord(m2, track))
            .ok_or_else(|| PrimgenError::InvalidSpec("missing first via".into()))?;
        let name = pdk.via_between(m1).map(|v| v.name.clone()).unwrap_or_default();
        l.add(&name, r, Some(net));
        Ok(())
    };

    let mut strap_cols: BTreeMap<(usize, &str), (i64, i64)> = BTreeMap::new();
    for (ri, units) in row_cols.iter().enumerate() {
        let (lo, hi) = (j0[ri], j0[ri] + band_len[ri] - 1);
        let mut col = first_unit_col;
        for (ui, unit) in units.iter().enumerate() {
            let slot = arr.rows[ri][ui];
            draw_feol(&mut l, spec, slot, unit, col, lo, hi, pdk);
            for (k, net) in unit.iter().enumerate() {
                let c = col + k as i64;
                if let Some(net) = net {
                    l.add(&pdk.layer(m1).name, pdk.wire_rect(m1, c, lo, hi)?, Some(net));
                    for t in 0..mult {
                        via(&mut l, c, track_of[ri][net] + t, net)?;
                    }
                    let e = strap_cols.entry((ri, net)).or_insert((c, c));
                    e.0 = e.0.min(c);
                    e.1 = e.1.max(c);
                }
            }
            col += unit.len() as i64;
        }
    }

    for (k, net) in spines.iter().enumerate() {
        let tracks: Vec<i64> = track_of.iter().filter_map(|t| t.get(net)).copied().collect();
        let (lo, hi) = (*tracks.iter().min().unwrap(), *tracks.iter().max().unwrap() + mult - 1);
        for c in [a + k as i64, right_spine_col(k as i64)] {
            l.add(&pdk.layer(m1).name, pdk.wire_rect(m1, c, lo, hi)?, Some(net));
            for ri in 0..row_nets.len() {
                if let Some(&t0) = track_of[ri].get(net) {
                    for t in 0..mult {
                        via(&mut l, c, t0 + t, net)?;
                    }
                    let e = strap_cols.get_mut(&(ri, *net)).expect("strap exists");
                    e.0 = e.0.min(c);
                    e.1 = e.1.max(c);
                }
            }
        }
    }

    let (min_col, max_col) = (a, cols - 1 - a);
    for (&(ri, net), &(lo, hi)) in &strap_cols {
        let (mut lo, mut hi) = (lo, hi);
        if lo == hi {
            lo = (lo - 1).max(min_col);
            hi = (hi + 1).min(max_col);
            if hi - lo < 1 {
                return Err(PrimgenError::InvalidSpec("no room for a strap".into()));
            }
        }
        for t in 0..mult {
            let r = pdk.wire_rect(m2, track_of[ri][net] + t, lo, hi)?;
            l.add(&pdk.layer(m2).name, r, Some(net));
            l.add_pin(net, &pdk.layer(m2).name, r);
        }
    }

    l.props.insert("rows".into(), arr.rows.len() as f64);
    if spec.is_array() {
        l.props.insert("centroid_error".into(), arr.error);
    }
    l.normalize();
    Ok(l)
}

#[allow(clippy::too_many_arguments)]
fn draw_feol(
    l: &mut AbstractLayout,
    spec: &PrimitiveSpec,
    slot: Slot,
    unit: &[Option<&str>],
    col: i64,
    lo: i64,
    hi: i64,
    pdk: &Pdk,
) {
    let (pv, ph) = (pdk.layer(0).pitch, pdk.layer(1).pitch);
    let (y0, y1) = (lo * ph, (hi + 1) * ph);
    let x = |c: i64| c * pv;
    if spec.is_array() {
        let layer = if spec.ptype == PrimitiveType::CapArray { "cap" } else { "res" };
        l.add(layer, Rect::new(x(col), y0, x(col + unit.len() as i64), y1), None);
        return;
    }
    // Gate column is 1 or 2 depending on orientation.
    let gate = if slot.mirrored { col + 2 } else { col + 1 };
    let (act0, act1) = if slot.mirrored { (col + 1, col + 4) } else { (col, col + 3) };
    l.add("active", Rect::new(x(act0), y0, x(act1), y1), None);
    let gx = pdk.track_coord(0, gate);
    let hw = pdk.feol.poly_width / 2;
    l.add("poly", Rect::new(gx - hw, y0, gx + hw, y1), None);
    if slot.dev.is_some() {
        let cy = pdk.track_coord(1, lo);
        for c in [gate - 1, gate + 1] {
            let cx = pdk.track_coord(0, c);
            l.add("contact", Rect::new(cx - hw, cy - hw, cx + hw, cy + hw), None);
        }
    }
}

fn checked(spec: &PrimitiveSpec, arr: &Arrangement, pdk: &Pdk) -> Result<AbstractLayout, PrimgenError> {
    let l = build(spec, arr, pdk)?;
    let rep = drc(&l, pdk);
    if let Some(v) = rep.violations.first() {
        return Err(PrimgenError::DrcUnclean {
            name: spec.name.clone(),
            count: rep.violations.len(),
            first: format!("{} on {} at {:?}: {}", v.rule, v.layer, v.rect, v.detail),
        });
    }
    Ok(l)
}

fn aspect_of(l: &AbstractLayout) -> f64 {
    l.bbox.height() as f64 / l.bbox.width().max(1) as f64
}

/// Generates the arrangement whose aspect is nearest the hint (or the fixed
/// row count); array arrangements minimize centroid error first.
pub fn gen_primitive(spec: &PrimitiveSpec, pdk: &Pdk) -> Result<AbstractLayout, PrimgenError> {
    spec.validate()?;
    let rows = match spec.rows {
        Some(r) => vec![r],
        None => row_candidates(spec),
    };
    let mut best: Option<(f64, f64, i64, AbstractLayout)> = None;
    let mut last_err = None;
    for r in rows {
        let arr = match arrange(spec, r) {
            Ok(a) => a,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let l = checked(spec, &arr, pdk)?;
        let dist = (aspect_of(&l).ln() - spec.aspect.ln()).abs();
        let key = (arr.error, dist, l.area());
        if best.as_ref().is_none_or(|b| (key.0, key.1, key.2) < (b.0, b.1, b.2)) {
            best = Some((key.0, key.1, key.2, l));
        }
    }
    match best {
        Some((.., l)) => Ok(l),
        None => Err(last_err.unwrap_or(PrimgenError::InfeasibleAspect(spec.aspect))),
    }
}

/// Up to `k` variants with distinct row counts, sorted by area then aspect.
/// Array variants keep only the minimum centroid error.
pub fn gen_variants(spec: &PrimitiveSpec, pdk: &Pdk, k: usize) -> Result<Vec<AbstractLayout>, PrimgenError> {
    spec.validate()?;
    let mut found: Vec<(f64, AbstractLayout)> = Vec::new();
    for r in row_candidates(spec) {
        if let Ok(arr) = arrange(spec, r) {
            found.push((arr.error, checked(spec, &arr, pdk)?));
        }
    }
    let min_err = found.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
    let mut out: Vec<AbstractLayout> = found
        .into_iter()
        .filter(|f| f.0 <= min_err)
        .map(|f| f.1)
        .take(k.max(1))
        .collect();
    out.sort_by(|a, b| a.area().cmp(&b.area()).then(aspect_of(a).total_cmp(&aspect_of(b))));
    for (i, l) in out.iter_mut().enumerate() {
        l.props.insert("variant".into(), i as f64);
    }
    if out.is_empty() {
        return Err(PrimgenError::Infeasible(format!("no arrangement for {}", spec.name)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::flatten_layout;
    use crate::pdk::{mock14, mock65};

    fn mos(name: &str, nets: [&str; 4], units: u32) -> DeviceSpec {
        DeviceSpec {
            name: name.into(),
            kind: DeviceKind::Nmos,
            nets: nets.iter().map(|s| s.to_string()).collect(),
            units,
        }
    }

    fn spec(ptype: PrimitiveType, devices: Vec<DeviceSpec>, pattern: PatternKind) -> PrimitiveSpec {
        PrimitiveSpec {
            name: "p".into(),
            ptype,
            devices,
            unit: UnitParams {
                nfin: 4,
                fingers: 1,
                unit_cap: 5e-15,
                unit_res: 500.0,
            },
            pattern,
            aspect: 1.0,
            strap_mult: 1,
            rows: None,
        }
    }

    fn diff_pair(units: u32) -> PrimitiveSpec {
        spec(
            PrimitiveType::DiffPair,
            vec![mos("ma", ["da", "ga", "s", "b"], units), mos("mb", ["db", "gb", "s", "b"], units)],
            PatternKind::Interdigitated,
        )
    }

    fn caps(counts: &[u32]) -> PrimitiveSpec {
        let devices = counts
            .iter()
            .enumerate()
            .map(|(i, &n)| DeviceSpec {
                name: format!("c{i}"),
                kind: DeviceKind::Cap,
                nets: vec!["top".into(), format!("b{i}")],
                units: n,
            })
            .collect();
        spec(PrimitiveType::CapArray, devices, PatternKind::CommonCentroid)
    }

    #[test]
    fn pattern_examples() {
        assert_eq!(gen_pattern(2, 2, PatternKind::Interdigitated).unwrap(), vec!["ABBA"]);
        assert_eq!(gen_pattern(2, 2, PatternKind::CommonCentroid).unwrap(), vec!["AB", "BA"]);
        assert_eq!(gen_pattern(3, 2, PatternKind::Interdigitated).unwrap(), vec!["ABABA"]);
        assert!(matches!(
            gen_pattern(2, 3, PatternKind::CommonCentroid),
            Err(PrimgenError::Infeasible(_))
        ));
        for (a, b) in [(1, 1), (2, 4), (4, 4), (3, 5), (6, 2)] {
            let row = &gen_pattern(a, b, PatternKind::Interdigitated).unwrap()[0];
            assert_eq!(row.matches('A').count() as u32, a);
            assert_eq!(row.matches('B').count() as u32, b);
        }
    }

    #[test]
    fn single_mos_one_unit() {
        let s = spec(PrimitiveType::SingleMos, vec![mos("m", ["d", "g", "s", "b"], 1)], PatternKind::Plain);
        for pdk in [mock14(), mock65()] {
            let l = gen_primitive(&s, &pdk).unwrap();
            let pins: Vec<&str> = l.pins.keys().map(String::as_str).collect();
            assert_eq!(pins, vec!["b", "d", "g", "s"]);
            for ps in l.pins.values().flatten() {
                assert!(l.bbox.contains(&ps.rect));
            }
        }
    }

    #[test]
    fn diff_pair_is_mirror_symmetric() {
        let pdk = mock14();
        let l = gen_primitive(&diff_pair(2), &pdk).unwrap();
        let axis2 = l.bbox.x0 + l.bbox.x1;
        let mut a: Vec<(String, Rect)> = flatten_layout(&l).into_iter().map(|s| (s.layer, s.rect)).collect();
        let mut b: Vec<(String, Rect)> = a.iter().map(|(ly, r)| (ly.clone(), r.mirror_x(axis2))).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn variants_by_divisor() {
        let pdk = mock14();
        let s = spec(PrimitiveType::SingleMos, vec![mos("m", ["d", "g", "s", "s"], 8)], PatternKind::Plain);
        let v = gen_variants(&s, &pdk, 3).unwrap();
        let mut rows: Vec<f64> = v.iter().map(|l| l.props["rows"]).collect();
        rows.sort_by(f64::total_cmp);
        assert_eq!(rows, vec![1.0, 2.0, 4.0]);
        for w in v.windows(2) {
            assert!(w[0].area() <= w[1].area());
        }
        let one = spec(PrimitiveType::SingleMos, vec![mos("m", ["d", "g", "s", "s"], 1)], PatternKind::Plain);
        assert_eq!(gen_variants(&one, &pdk, 3).unwrap().len(), 1);
    }

    #[test]
    fn binary_caps_within_half_unit() {
        let g = (1..=4)
            .flat_map(|r| (2..=10).filter_map(move |c| centroid_grid(&[1, 1, 2, 4], r, c)))
            .map(|g| g.error)
            .fold(f64::INFINITY, f64::min);
        assert!(g <= 0.5);
        let l = gen_primitive(&caps(&[1, 1, 2, 4]), &mock14()).unwrap();
        assert!(l.props["centroid_error"] <= 0.5);
    }

    #[test]
    fn equal_caps_are_exact() {
        for n in 2..=8 {
            for devs in 2..=3 {
                let counts = vec![n; devs];
                let l = gen_primitive(&caps(&counts), &mock14()).unwrap();
                assert_eq!(l.props["centroid_error"], 0.0, "n={n} devices={devs}");
            }
        }
    }

    #[test]
    fn common_centroid_mos_needs_even_counts() {
        let mut s = diff_pair(3);
        s.pattern = PatternKind::CommonCentroid;
        assert!(matches!(gen_primitive(&s, &mock14()), Err(PrimgenError::Infeasible(_))));
        s.devices[0].units = 4;
        s.devices[1].units = 4;
        let l = gen_primitive(&s, &mock14()).unwrap();
        assert_eq!(l.props["rows"], 2.0);
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut s = diff_pair(2);
        s.devices[0].units = 0;
        assert!(matches!(gen_primitive(&s, &mock14()), Err(PrimgenError::InvalidSpec(_))));
        let mut s = diff_pair(2);
        s.aspect = 0.0;
        assert!(matches!(gen_primitive(&s, &mock14()), Err(PrimgenError::InfeasibleAspect(_))));
    }

    #[test]
    fn strap_multiplier_is_clean() {
        let mut s = diff_pair(2);
        s.strap_mult = 2;
        s.rows = Some(1);
        let l = gen_primitive(&s, &mock65()).unwrap();
        assert_eq!(l.pins["s"].len(), 2);
    }
}
