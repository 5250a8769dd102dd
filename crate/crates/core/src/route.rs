//! Grid A* detailed router with negotiated congestion.
//!
//! All vertical layers share one pitch and all horizontal layers another, so
//! a cell `(l, i, j)` sits at vertical track `i` and horizontal track `j` on
//! every layer. Moves follow the layer direction; vias connect `l` and
//! `l + 1` at the same `(i, j)`. Two vias are never stacked back to back,
//! which keeps every wire at least one stop long.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;
use crate::layout::Shape;
use crate::pdk::{to_uohm, Direction, Pdk, PdkError, UOHM};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("routing configuration: {0}")]
    Config(String),
    #[error("net {net}: no path ({explored} states explored, frontier near {frontier:?})")]
    Blocked {
        net: String,
        explored: usize,
        frontier: Vec<Cell>,
    },
    #[error("net {net}: still congested after {rounds} rounds")]
    Unroutable { net: String, rounds: usize },
    #[error("net {net}: resistance {achieved:.3} ohm exceeds budget {budget:.3} ohm")]
    Budget { net: String, achieved: f64, budget: f64 },
    #[error("net {net}: {layer} wire of {length} nm exceeds MaxL")]
    MaxLength { net: String, layer: String, length: i64 },
    #[error("net {net}: wire on {layer} cannot reach MinL")]
    MinLength { net: String, layer: String },
    #[error("shield for {net}: {reason}")]
    Shield { net: String, reason: String },
    #[error(transparent)]
    Pdk(#[from] PdkError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub l: usize,
    pub i: i64,
    pub j: i64,
}

impl Cell {
    pub fn new(l: usize, i: i64, j: i64) -> Cell {
        Cell { l, i, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Wire length in nm plus a fixed via penalty.
    #[default]
    Length,
    /// Milliohms.
    Resistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteParams {
    /// Via penalty in length mode; defaults to twice the larger pitch.
    pub via_cost: Option<i64>,
    pub rounds: usize,
    /// Initial cost of sharing a cell with another net, in pitch units.
    pub present: i64,
    /// History increment on congested cells, in pitch units.
    pub history: i64,
    pub mode: CostMode,
}

impl Default for RouteParams {
    fn default() -> Self {
        RouteParams {
            via_cost: None,
            rounds: 10,
            present: 4,
            history: 2,
            mode: CostMode::Length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Segment {
    pub layer: String,
    pub track: i64,
    /// Stop indices, `lo <= hi`.
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViaSite {
    pub via: String,
    pub i: i64,
    pub j: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Route {
    pub net: String,
    pub segments: Vec<Segment>,
    pub vias: Vec<ViaSite>,
    /// Search cost in the mode used to find it.
    pub cost: i64,
}

fn layer_of(pdk: &Pdk, name: &str) -> Result<usize, RouteError> {
    pdk.layer_index(name)
        .ok_or_else(|| RouteError::Config(format!("unknown layer {name}")))
}

/// Track index that mirrors onto itself doubled: `i' = m - i`.
fn mirror_index(pdk: &Pdk, axis: i64) -> Result<i64, RouteError> {
    let (pitch, offset) = pdk
        .uniform_pitch(Direction::Vertical)
        .ok_or_else(|| RouteError::Config("vertical pitches differ".into()))?;
    let num = 2 * axis - 2 * offset;
    if num.rem_euclid(pitch) != 0 {
        return Err(RouteError::Config(format!("axis {axis} is not on a half-pitch")));
    }
    Ok(num / pitch)
}

impl Route {
    pub fn length(&self, pdk: &Pdk) -> Result<i64, RouteError> {
        let mut total = 0;
        for s in &self.segments {
            let l = layer_of(pdk, &s.layer)?;
            let p = pdk.stop_pitch(l).ok_or_else(|| PdkError::NoNeighbor(s.layer.clone()))?;
            total += (s.hi - s.lo) * p;
        }
        Ok(total)
    }

    /// Sum of centerline wire resistance and via resistance, in micro-ohms.
    pub fn resistance_uohm(&self, pdk: &Pdk) -> Result<i64, RouteError> {
        let mut r = 0;
        for s in &self.segments {
            let l = layer_of(pdk, &s.layer)?;
            let p = pdk.stop_pitch(l).ok_or_else(|| PdkError::NoNeighbor(s.layer.clone()))?;
            r += pdk.wire_resistance_uohm(l, (s.hi - s.lo) * p);
        }
        for v in &self.vias {
            let rules = pdk
                .via_by_name(&v.via)
                .ok_or_else(|| RouteError::Config(format!("unknown via {}", v.via)))?;
            r += pdk.via_resistance_uohm(rules);
        }
        Ok(r)
    }

    /// Resistance in ohms.
    pub fn resistance(&self, pdk: &Pdk) -> Result<f64, RouteError> {
        Ok(self.resistance_uohm(pdk)? as f64 / UOHM)
    }

    /// Whether the route meets a resistance budget in ohms.
    pub fn within_budget(&self, pdk: &Pdk, budget: f64) -> Result<bool, RouteError> {
        Ok(self.resistance_uohm(pdk)? <= to_uohm(budget))
    }

    pub fn capacitance(&self, pdk: &Pdk) -> Result<f64, RouteError> {
        let mut c = 0.0;
        for s in &self.segments {
            let l = layer_of(pdk, &s.layer)?;
            let p = pdk.stop_pitch(l).ok_or_else(|| PdkError::NoNeighbor(s.layer.clone()))?;
            c += pdk.wire_parasitics(l, (s.hi - s.lo) * p).1;
        }
        Ok(c)
    }

    pub fn shapes(&self, pdk: &Pdk) -> Result<Vec<Shape>, RouteError> {
        let mut out = Vec::new();
        for s in &self.segments {
            let l = layer_of(pdk, &s.layer)?;
            out.push(Shape::new(&s.layer, pdk.wire_rect(l, s.track, s.lo, s.hi)?, Some(&self.net)));
        }
        for v in &self.vias {
            let lower = pdk
                .via_lower(&v.via)
                .ok_or_else(|| RouteError::Config(format!("unknown via {}", v.via)))?;
            let (x, y) = site_xy(pdk, lower, v.i, v.j);
            let r = pdk
                .via_rect(lower, x, y)
                .ok_or_else(|| RouteError::Config(format!("no via above {}", pdk.layer(lower).name)))?;
            out.push(Shape::new(&v.via, r, Some(&self.net)));
        }
        Ok(out)
    }

    /// Reflection about the vertical line `x = axis`, renamed to `net`.
    pub fn mirrored(&self, pdk: &Pdk, axis: i64, net: &str) -> Result<Route, RouteError> {
        let m = mirror_index(pdk, axis)?;
        let mut segments = Vec::new();
        for s in &self.segments {
            let l = layer_of(pdk, &s.layer)?;
            segments.push(match pdk.layer(l).direction {
                Direction::Vertical => Segment {
                    track: m - s.track,
                    ..s.clone()
                },
                Direction::Horizontal => Segment {
                    lo: m - s.hi,
                    hi: m - s.lo,
                    ..s.clone()
                },
            });
        }
        let vias = self
            .vias
            .iter()
            .map(|v| ViaSite {
                i: m - v.i,
                ..v.clone()
            })
            .collect();
        let mut r = Route {
            net: net.to_string(),
            segments,
            vias,
            cost: self.cost,
        };
        r.segments.sort();
        r.vias.sort();
        Ok(r)
    }
}

fn site_xy(pdk: &Pdk, l: usize, i: i64, j: i64) -> (i64, i64) {
    let (v, h) = match pdk.layer(l).direction {
        Direction::Vertical => (l, pdk.stop_layer(l).unwrap_or(l)),
        Direction::Horizontal => (pdk.stop_layer(l).unwrap_or(l), l),
    };
    (pdk.track_coord(v, i), pdk.track_coord(h, j))
}

/// CSV: `net,resistance_ohm,capacitance_af,length_nm,vias`.
pub fn parasitic_report(routes: &[Route], pdk: &Pdk) -> Result<String, RouteError> {
    let mut out = String::from("net,resistance_ohm,capacitance_af,length_nm,vias\n");
    for r in routes {
        let _ = writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            r.net,
            r.resistance(pdk)?,
            r.capacitance(pdk)?,
            r.length(pdk)?,
            r.vias.len()
        );
    }
    Ok(out)
}

const FREE: i32 = -1;
const BLOCKED: i32 = -2;

/// Per-layer integer search weights.
#[derive(Debug, Clone)]
struct Weights {
    step: Vec<i64>,
    via: Vec<i64>,
    min_i: i64,
    min_j: i64,
    min_via: i64,
    unit: i64,
}

#[derive(Debug, Clone)]
pub struct RoutingGrid {
    pub cols: i64,
    pub rows: i64,
    pub layers: usize,
    /// Cells kept empty along the boundary.
    pub margin: i64,
    dirs: Vec<Direction>,
    keepout: Vec<i64>,
    names: Vec<String>,
    via_names: Vec<String>,
    pitch_v: i64,
    pitch_h: i64,
    unit_r: Vec<f64>,
    via_r: Vec<f64>,
    fixed: Vec<i32>,
    history: Vec<i64>,
    occ: Vec<Vec<u32>>,
    nets: Vec<String>,
    ids: BTreeMap<String, u32>,
}

impl RoutingGrid {
    /// Grid over `cols x rows` tracks using the lowest `layers` metals.
    pub fn new(pdk: &Pdk, cols: i64, rows: i64, layers: usize, margin: i64) -> Result<RoutingGrid, RouteError> {
        let layers = layers.min(pdk.num_layers());
        if layers < 2 {
            return Err(RouteError::Config("need at least two routing layers".into()));
        }
        let (pv, _) = pdk
            .uniform_pitch(Direction::Vertical)
            .ok_or_else(|| RouteError::Config("vertical pitches differ".into()))?;
        let (ph, _) = pdk
            .uniform_pitch(Direction::Horizontal)
            .ok_or_else(|| RouteError::Config("horizontal pitches differ".into()))?;
        let mut via_names = Vec::new();
        let mut via_r = Vec::new();
        for l in 0..layers - 1 {
            let v = pdk
                .via_between(l)
                .ok_or_else(|| RouteError::Config(format!("no via above {}", pdk.layer(l).name)))?;
            if pv - v.width_x < v.space_x || ph - v.width_y < v.space_y {
                return Err(RouteError::Config(format!("{} spacing exceeds the track pitch", v.name)));
            }
            via_names.push(v.name.clone());
            via_r.push(v.r_via);
        }
        if cols <= 2 * margin || rows <= 2 * margin {
            return Err(RouteError::Config(format!("grid {cols}x{rows} has no room inside margin {margin}")));
        }
        let n = layers * (cols * rows) as usize;
        Ok(RoutingGrid {
            cols,
            rows,
            layers,
            margin,
            dirs: (0..layers).map(|l| pdk.layer(l).direction).collect(),
            keepout: (0..layers).map(|l| pdk.keepout_stops(l)).collect(),
            names: (0..layers).map(|l| pdk.layer(l).name.clone()).collect(),
            via_names,
            pitch_v: pv,
            pitch_h: ph,
            unit_r: (0..layers).map(|l| pdk.layer(l).unit_r).collect(),
            via_r,
            fixed: vec![FREE; n],
            history: vec![0; n],
            occ: vec![Vec::new(); n],
            nets: Vec::new(),
            ids: BTreeMap::new(),
        })
    }

    pub fn net_id(&mut self, net: &str) -> u32 {
        if let Some(&id) = self.ids.get(net) {
            return id;
        }
        let id = self.nets.len() as u32;
        self.nets.push(net.to_string());
        self.ids.insert(net.to_string(), id);
        id
    }

    fn contains(&self, c: Cell) -> bool {
        c.l < self.layers && (0..self.cols).contains(&c.i) && (0..self.rows).contains(&c.j)
    }

    fn inside(&self, c: Cell) -> bool {
        c.l < self.layers
            && (self.margin..self.cols - self.margin).contains(&c.i)
            && (self.margin..self.rows - self.margin).contains(&c.j)
    }

    fn idx(&self, c: Cell) -> usize {
        ((c.l as i64 * self.cols + c.i) * self.rows + c.j) as usize
    }

    fn cell(&self, idx: usize) -> Cell {
        let j = idx as i64 % self.rows;
        let rest = idx as i64 / self.rows;
        Cell::new((rest / self.cols) as usize, rest % self.cols, j)
    }

    pub fn block(&mut self, c: Cell) {
        if self.contains(c) {
            let k = self.idx(c);
            if self.fixed[k] == FREE {
                self.fixed[k] = BLOCKED;
            }
        }
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        !self.contains(c) || self.fixed[self.idx(c)] == BLOCKED
    }

    /// Marks `c` as pre-existing metal of `net`.
    pub fn set_fixed(&mut self, c: Cell, net: &str) {
        let id = self.net_id(net) as i32;
        if self.contains(c) {
            let k = self.idx(c);
            self.fixed[k] = id;
        }
    }

    /// Blocks every cell of layer `l` whose crossing lies inside `r`.
    pub fn block_rect(&mut self, l: usize, r: &Rect) {
        for i in 0..self.cols {
            let x = self.pitch_v / 2 + i * self.pitch_v;
            if x < r.x0 || x > r.x1 {
                continue;
            }
            for j in 0..self.rows {
                let y = self.pitch_h / 2 + j * self.pitch_h;
                if y >= r.y0 && y <= r.y1 {
                    self.block(Cell::new(l, i, j));
                }
            }
        }
    }

    /// Cells covered by a legal wire shape; `None` when off grid.
    pub fn wire_cells(pdk: &Pdk, layer: usize, r: &Rect) -> Option<Vec<Cell>> {
        let (track, lo, hi) = pdk.rect_to_wire(layer, r)?;
        Some(
            (lo..=hi)
                .map(|s| match pdk.layer(layer).direction {
                    Direction::Vertical => Cell::new(layer, track, s),
                    Direction::Horizontal => Cell::new(layer, s, track),
                })
                .collect(),
        )
    }

    fn vertical(&self, l: usize) -> bool {
        self.dirs[l] == Direction::Vertical
    }

    /// `(track, stop)` of a cell on its own layer.
    fn track_stop(&self, c: Cell) -> (i64, i64) {
        if self.vertical(c.l) {
            (c.i, c.j)
        } else {
            (c.j, c.i)
        }
    }

    fn along(&self, c: Cell, d: i64) -> Cell {
        if self.vertical(c.l) {
            Cell::new(c.l, c.i, c.j + d)
        } else {
            Cell::new(c.l, c.i + d, c.j)
        }
    }

    fn window(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let m = self.keepout[c.l];
        (-(m - 1)..m).map(move |d| self.along(c, d)).filter(|w| self.contains(*w))
    }

    /// Hard legality of `net` metal on `c`.
    fn legal(&self, net: u32, c: Cell) -> bool {
        if !self.inside(c) {
            return false;
        }
        let f = self.fixed[self.idx(c)];
        if f != FREE && f != net as i32 {
            return false;
        }
        self.window(c).all(|w| {
            let f = self.fixed[self.idx(w)];
            f < 0 || f == net as i32
        })
    }

    fn others_near(&self, net: u32, c: Cell) -> i64 {
        self.window(c)
            .map(|w| self.occ[self.idx(w)].iter().filter(|&&n| n != net).count() as i64)
            .sum()
    }

    fn weights(&self, mode: CostMode, params: &RouteParams) -> Weights {
        let unit = self.pitch_v.max(self.pitch_h);
        let (step, via): (Vec<i64>, Vec<i64>) = match mode {
            CostMode::Length => (
                (0..self.layers)
                    .map(|l| if self.vertical(l) { self.pitch_h } else { self.pitch_v })
                    .collect(),
                vec![params.via_cost.unwrap_or(2 * unit); self.layers - 1],
            ),
            CostMode::Resistance => (
                (0..self.layers)
                    .map(|l| {
                        let p = if self.vertical(l) { self.pitch_h } else { self.pitch_v };
                        ((self.unit_r[l] * p as f64 * 1000.0).round() as i64).max(1)
                    })
                    .collect(),
                self.via_r.iter().map(|r| ((r * 1000.0).round() as i64).max(1)).collect(),
            ),
        };
        let min_of = |vert: bool| {
            (0..self.layers)
                .filter(|&l| self.vertical(l) == vert)
                .map(|l| step[l])
                .min()
                .unwrap_or(i64::MAX / 4)
        };
        let unit = match mode {
            CostMode::Length => unit,
            CostMode::Resistance => step.iter().copied().max().unwrap_or(1),
        };
        Weights {
            min_i: min_of(false),
            min_j: min_of(true),
            min_via: via.iter().copied().min().unwrap_or(0),
            step,
            via,
            unit,
        }
    }

    /// Step cost of moving along layer `l` and of a via above `l`, in the
    /// given mode. Exposed for reference searches.
    pub fn step_cost(&self, l: usize, mode: CostMode, params: &RouteParams) -> (i64, Option<i64>) {
        let w = self.weights(mode, params);
        (w.step[l], w.via.get(l).copied())
    }

    /// Whether `net` may place metal on `c` ignoring other routed nets.
    pub fn passable(&mut self, net: &str, c: Cell) -> bool {
        let id = self.net_id(net);
        self.legal(id, c)
    }

    pub fn layer_direction(&self, l: usize) -> Direction {
        self.dirs[l]
    }
}

/// Search context for one net, optionally dragging a mirrored twin.
struct Search<'a> {
    g: &'a RoutingGrid,
    net: u32,
    w: &'a Weights,
    present: i64,
    strict: bool,
    twin: Option<(u32, i64)>,
}

impl Search<'_> {
    fn mirror(&self, c: Cell, m: i64) -> Cell {
        Cell::new(c.l, m - c.i, c.j)
    }

    fn ok(&self, c: Cell) -> bool {
        if !self.g.legal(self.net, c) {
            return false;
        }
        if self.strict && self.g.others_near(self.net, c) > 0 {
            return false;
        }
        if let Some((n2, m)) = self.twin {
            let mc = self.mirror(c, m);
            let k = *self.g.keepout.iter().max().unwrap_or(&1);
            if (2 * c.i - m).abs() < k || !self.g.legal(n2, mc) {
                return false;
            }
            if self.strict && self.g.others_near(n2, mc) > 0 {
                return false;
            }
        }
        true
    }

    fn penalty(&self, c: Cell) -> i64 {
        let k = self.g.idx(c);
        let mut p = self.g.history[k] + self.present * self.g.others_near(self.net, c);
        if let Some((n2, m)) = self.twin {
            let mc = self.mirror(c, m);
            p += self.g.history[self.g.idx(mc)] + self.present * self.g.others_near(n2, mc);
        }
        p * self.w.unit
    }

    /// Multi-source, multi-target A*. Returns the path source to target.
    fn run(&self, sources: &BTreeSet<Cell>, targets: &[Vec<Cell>]) -> Result<(Vec<Cell>, i64), (usize, Vec<Cell>)> {
        let g = self.g;
        let boxes: Vec<(i64, i64, i64, i64, usize, usize)> = targets
            .iter()
            .filter(|t| !t.is_empty())
            .map(|t| {
                let mut b = (i64::MAX, i64::MAX, i64::MIN, i64::MIN, usize::MAX, 0usize);
                for c in t {
                    b.0 = b.0.min(c.i);
                    b.1 = b.1.min(c.j);
                    b.2 = b.2.max(c.i);
                    b.3 = b.3.max(c.j);
                    b.4 = b.4.min(c.l);
                    b.5 = b.5.max(c.l);
                }
                b
            })
            .collect();
        let is_target: BTreeSet<Cell> = targets.iter().flatten().copied().collect();
        let h = |c: Cell| -> i64 {
            boxes
                .iter()
                .map(|b| {
                    let dx = (b.0 - c.i).max(c.i - b.2).max(0);
                    let dy = (b.1 - c.j).max(c.j - b.3).max(0);
                    let dl = (b.4 as i64 - c.l as i64).max(c.l as i64 - b.5 as i64).max(0);
                    dx * self.w.min_i + dy * self.w.min_j + dl * self.w.min_via
                })
                .min()
                .unwrap_or(0)
        };
        let n = g.fixed.len() * 2;
        let mut dist = vec![i64::MAX; n];
        let mut parent = vec![usize::MAX; n];
        let mut heap = BinaryHeap::new();
        for &s in sources {
            if !g.contains(s) {
                continue;
            }
            let k = g.idx(s) * 2;
            dist[k] = 0;
            heap.push(Reverse((h(s), 0i64, k)));
        }
        let mut explored = 0usize;
        while let Some(Reverse((_, d, k))) = heap.pop() {
            if d > dist[k] {
                continue;
            }
            explored += 1;
            let c = g.cell(k / 2);
            if is_target.contains(&c) && !sources.contains(&c) {
                let mut path = vec![c];
                let mut cur = k;
                while parent[cur] != usize::MAX {
                    cur = parent[cur];
                    path.push(g.cell(cur / 2));
                }
                path.reverse();
                return Ok((path, d));
            }
            let via_arrived = k % 2 == 1;
            let mut relax = |nc: Cell, cost: i64, flag: usize, heap: &mut BinaryHeap<_>| {
                let nk = g.idx(nc) * 2 + flag;
                let nd = d + cost + self.penalty(nc);
                if nd < dist[nk] {
                    dist[nk] = nd;
                    parent[nk] = k;
                    heap.push(Reverse((nd + h(nc), nd, nk)));
                }
            };
            for dlt in [-1, 1] {
                let nc = g.along(c, dlt);
                if g.contains(nc) && self.ok(nc) {
                    relax(nc, self.w.step[c.l], 0, &mut heap);
                }
            }
            if !via_arrived {
                for nl in [c.l.wrapping_sub(1), c.l + 1] {
                    if nl >= g.layers {
                        continue;
                    }
                    let nc = Cell::new(nl, c.i, c.j);
                    if self.ok(nc) {
                        relax(nc, self.w.via[c.l.min(nl)], 1, &mut heap);
                    }
                }
            }
        }
        let mut frontier: Vec<Cell> = sources.iter().copied().take(4).collect();
        frontier.sort();
        Err((explored, frontier))
    }
}

/// Cells and via sites claimed by one net.
#[derive(Debug, Clone, Default)]
struct NetPath {
    cells: BTreeSet<Cell>,
    vias: BTreeSet<Cell>,
    cost: i64,
}

impl NetPath {
    fn add_path(&mut self, path: &[Cell]) {
        for w in path.windows(2) {
            if w[0].l != w[1].l {
                self.vias.insert(Cell::new(w[0].l.min(w[1].l), w[0].i, w[0].j));
            }
        }
        self.cells.extend(path.iter().copied());
    }
}

fn grow_tree(s: &Search<'_>, name: &str, terminals: &[Vec<Cell>]) -> Result<NetPath, RouteError> {
    let mut np = NetPath::default();
    let mut tree: BTreeSet<Cell> = terminals.first().cloned().unwrap_or_default().into_iter().collect();
    let mut rest: Vec<Vec<Cell>> = terminals.iter().skip(1).filter(|t| !t.is_empty()).cloned().collect();
    loop {
        rest.retain(|t| {
            if t.iter().any(|c| tree.contains(c)) {
                tree.extend(t.iter().copied());
                false
            } else {
                true
            }
        });
        if rest.is_empty() {
            break;
        }
        let (path, cost) = s.run(&tree, &rest).map_err(|(explored, frontier)| RouteError::Blocked {
            net: name.to_string(),
            explored,
            frontier,
        })?;
        np.cost += cost;
        np.add_path(&path);
        tree.extend(path);
    }
    np.cells.extend(terminals.iter().flatten().copied());
    Ok(np)
}

impl RoutingGrid {
    fn commit(&mut self, net: u32, np: &NetPath) {
        for &c in &np.cells {
            if self.fixed[self.idx(c)] != net as i32 {
                let k = self.idx(c);
                self.occ[k].push(net);
            }
        }
    }

    fn rip(&mut self, net: u32, np: &NetPath) {
        for &c in &np.cells {
            let k = self.idx(c);
            self.occ[k].retain(|&n| n != net);
        }
    }

    fn conflicts(&self, net: u32, np: &NetPath) -> Vec<Cell> {
        np.cells
            .iter()
            .copied()
            .filter(|&c| self.fixed[self.idx(c)] != net as i32 && self.others_near(net, c) > 0)
            .collect()
    }

    /// Turns claimed cells into merged, MinL-legal segments.
    fn build_route(&self, pdk: &Pdk, net: u32, np: &NetPath) -> Result<Route, RouteError> {
        let name = &self.nets[net as usize];
        let mut tracks: BTreeMap<(usize, i64), BTreeSet<i64>> = BTreeMap::new();
        for &c in &np.cells {
            if self.fixed[self.idx(c)] != net as i32 {
                let (t, s) = self.track_stop(c);
                tracks.entry((c.l, t)).or_default().insert(s);
            }
        }
        let mut segments = Vec::new();
        for (&(l, t), routed) in &tracks {
            let m = self.keepout[l];
            let at = |s: i64| {
                if self.vertical(l) {
                    Cell::new(l, t, s)
                } else {
                    Cell::new(l, s, t)
                }
            };
            let span = if self.vertical(l) { self.rows } else { self.cols };
            let own: BTreeSet<i64> = (0..span)
                .filter(|&s| routed.contains(&s) || self.fixed[self.idx(at(s))] == net as i32)
                .collect();
            let mut runs: Vec<(i64, i64, bool)> = Vec::new();
            for &s in &own {
                let r = routed.contains(&s);
                match runs.last_mut() {
                    Some(last) if s - last.1 < m => {
                        last.1 = s;
                        last.2 |= r;
                    }
                    _ => runs.push((s, s, r)),
                }
            }
            for (lo, hi, has_routed) in runs {
                if !has_routed {
                    continue;
                }
                let (mut lo, mut hi) = (lo, hi);
                if lo == hi {
                    let free = |s: i64| {
                        let c = at(s);
                        self.contains(c) && self.legal(net, c) && self.others_near(net, c) == 0
                    };
                    if free(hi + 1) {
                        hi += 1;
                    } else if free(lo - 1) {
                        lo -= 1;
                    } else {
                        return Err(RouteError::MinLength {
                            net: name.clone(),
                            layer: self.names[l].clone(),
                        });
                    }
                }
                let rect = pdk.wire_rect(l, t, lo, hi)?;
                let len = match self.dirs[l] {
                    Direction::Vertical => rect.height(),
                    Direction::Horizontal => rect.width(),
                };
                if len > pdk.layer(l).max_l {
                    return Err(RouteError::MaxLength {
                        net: name.clone(),
                        layer: self.names[l].clone(),
                        length: len,
                    });
                }
                if len < pdk.layer(l).min_l {
                    return Err(RouteError::MinLength {
                        net: name.clone(),
                        layer: self.names[l].clone(),
                    });
                }
                segments.push(Segment {
                    layer: self.names[l].clone(),
                    track: t,
                    lo,
                    hi,
                });
            }
        }
        let vias = np
            .vias
            .iter()
            .map(|c| ViaSite {
                via: self.via_names[c.l].clone(),
                i: c.i,
                j: c.j,
            })
            .collect();
        let mut r = Route {
            net: name.clone(),
            segments,
            vias,
            cost: np.cost,
        };
        r.segments.sort();
        Ok(r)
    }
}

fn mirror_cells(t: &[Vec<Cell>], m: i64) -> BTreeSet<Cell> {
    t.iter().flatten().map(|c| Cell::new(c.l, m - c.i, c.j)).collect()
}

/// Routes one net on an otherwise empty grid (fixed metal only).
pub fn route_net(
    grid: &mut RoutingGrid,
    pdk: &Pdk,
    net: &str,
    terminals: &[Vec<Cell>],
    params: &RouteParams,
) -> Result<Route, RouteError> {
    if terminals.iter().filter(|t| !t.is_empty()).count() < 2 {
        return Err(RouteError::Config(format!("net {net} needs two pins")));
    }
    let id = grid.net_id(net);
    let w = grid.weights(params.mode, params);
    let s = Search {
        g: grid,
        net: id,
        w: &w,
        present: 0,
        strict: false,
        twin: None,
    };
    let np = grow_tree(&s, net, terminals)?;
    grid.build_route(pdk, id, &np)
}

/// Cost of the tree the search finds for `net`, without building or
/// committing it. Wire length rules are checked only when a route is built.
pub fn route_cost(grid: &mut RoutingGrid, net: &str, terminals: &[Vec<Cell>], params: &RouteParams) -> Result<i64, RouteError> {
    let id = grid.net_id(net);
    let w = grid.weights(params.mode, params);
    let s = Search {
        g: grid,
        net: id,
        w: &w,
        present: 0,
        strict: false,
        twin: None,
    };
    Ok(grow_tree(&s, net, terminals)?.cost)
}

/// Routes `a` and its mirror image `b` about `axis` (nm) together.
pub fn route_symmetric(
    grid: &mut RoutingGrid,
    pdk: &Pdk,
    a: (&str, &[Vec<Cell>]),
    b: (&str, &[Vec<Cell>]),
    axis: i64,
    params: &RouteParams,
) -> Result<(Route, Route), RouteError> {
    let m = mirror_index(pdk, axis)?;
    if mirror_cells(a.1, m) != b.1.iter().flatten().copied().collect() {
        return Err(RouteError::Config(format!("pins of {} and {} are not mirror images", a.0, b.0)));
    }
    let (ia, ib) = (grid.net_id(a.0), grid.net_id(b.0));
    let w = grid.weights(params.mode, params);
    let s = Search {
        g: grid,
        net: ia,
        w: &w,
        present: 0,
        strict: false,
        twin: Some((ib, m)),
    };
    let np = grow_tree(&s, a.0, a.1)?;
    let ra = grid.build_route(pdk, ia, &np)?;
    let rb = ra.mirrored(pdk, axis, b.0)?;
    Ok((ra, rb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRequest {
    pub name: String,
    pub terminals: Vec<Vec<Cell>>,
    pub budget: Option<f64>,
    /// Ground net that shields this one on both adjacent tracks.
    pub shield: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModuleRoutes {
    pub routes: Vec<Route>,
    pub diagnostics: Vec<String>,
}

enum Job {
    Pair(usize, usize),
    Single(usize),
}

/// Routes every request with negotiated congestion, then enforces budgets.
pub fn route_module(
    grid: &mut RoutingGrid,
    pdk: &Pdk,
    nets: &[NetRequest],
    symmetric: &[(String, String)],
    axis: Option<i64>,
    params: &RouteParams,
) -> Result<ModuleRoutes, RouteError> {
    let mut diagnostics = Vec::new();
    let index: BTreeMap<&str, usize> = nets.iter().enumerate().map(|(k, n)| (n.name.as_str(), k)).collect();
    let routable = |k: usize| nets[k].terminals.iter().filter(|t| !t.is_empty()).count() >= 2;
    let shield_grounds: BTreeSet<&str> = nets.iter().filter_map(|n| n.shield.as_deref()).collect();
    for g in &shield_grounds {
        if !index.contains_key(g) {
            return Err(RouteError::Shield {
                net: g.to_string(),
                reason: "ground net has no pin in this module".into(),
            });
        }
    }

    let mut jobs = Vec::new();
    let mut done = vec![false; nets.len()];
    if let Some(axis) = axis {
        let m = mirror_index(pdk, axis)?;
        for (a, b) in symmetric {
            let (Some(&ka), Some(&kb)) = (index.get(a.as_str()), index.get(b.as_str())) else { continue };
            if done[ka] || done[kb] || !routable(ka) {
                continue;
            }
            let mirrored = mirror_cells(&nets[ka].terminals, m) == nets[kb].terminals.iter().flatten().copied().collect();
            if mirrored && nets[ka].shield.is_none() && nets[kb].shield.is_none() {
                jobs.push(Job::Pair(ka, kb));
                done[ka] = true;
                done[kb] = true;
            } else {
                diagnostics.push(format!("nets {a} and {b} routed independently: pins are not mirror images"));
            }
        }
    }
    let mut rest: Vec<usize> = (0..nets.len()).filter(|&k| !done[k] && routable(k)).collect();
    rest.sort_by(|&x, &y| {
        let key = |k: usize| {
            let n = &nets[k];
            (
                shield_grounds.contains(n.name.as_str()),
                n.budget.is_none(),
                n.budget.map(|b| (b * 1e6) as i64).unwrap_or(0),
                Reverse(n.terminals.len()),
                n.name.clone(),
            )
        };
        key(x).cmp(&key(y))
    });
    jobs.extend(rest.into_iter().map(Job::Single));
    for (k, n) in nets.iter().enumerate() {
        if !routable(k) && shield_grounds.contains(n.name.as_str()) {
            jobs.push(Job::Single(k));
        }
    }

    let ids: Vec<u32> = nets.iter().map(|n| grid.net_id(&n.name)).collect();
    let w = grid.weights(params.mode, params);
    let mut paths: Vec<NetPath> = vec![NetPath::default(); nets.len()];
    let mut present = params.present;
    let mut clean = false;
    let mut worst = String::new();
    for _round in 0..params.rounds.max(1) {
        for (k, p) in paths.iter_mut().enumerate() {
            grid.rip(ids[k], p);
            *p = NetPath::default();
        }
        let mut extra: Vec<Vec<Vec<Cell>>> = vec![Vec::new(); nets.len()];
        let mut axis_m = None;
        if let Some(a) = axis {
            axis_m = Some(mirror_index(pdk, a)?);
        }
        for job in &jobs {
            match *job {
                Job::Pair(ka, kb) => {
                    let m = axis_m.expect("pairs need an axis");
                    let s = Search {
                        g: grid,
                        net: ids[ka],
                        w: &w,
                        present,
                        strict: false,
                        twin: Some((ids[kb], m)),
                    };
                    let np = grow_tree(&s, &nets[ka].name, &nets[ka].terminals)?;
                    let mut twin = NetPath {
                        cost: np.cost,
                        ..Default::default()
                    };
                    twin.cells = np.cells.iter().map(|c| Cell::new(c.l, m - c.i, c.j)).collect();
                    twin.vias = np.vias.iter().map(|c| Cell::new(c.l, m - c.i, c.j)).collect();
                    grid.commit(ids[ka], &np);
                    grid.commit(ids[kb], &twin);
                    paths[ka] = np;
                    paths[kb] = twin;
                }
                Job::Single(k) => {
                    let mut terms = nets[k].terminals.clone();
                    terms.append(&mut extra[k]);
                    terms.retain(|t| !t.is_empty());
                    terms.sort_by_key(|t| Reverse(t.len()));
                    let np = if terms.len() >= 2 {
                        let s = Search {
                            g: grid,
                            net: ids[k],
                            w: &w,
                            present,
                            strict: false,
                            twin: None,
                        };
                        grow_tree(&s, &nets[k].name, &terms)?
                    } else {
                        let mut np = NetPath::default();
                        np.cells.extend(terms.iter().flatten().copied());
                        np
                    };
                    grid.commit(ids[k], &np);
                    if let Some(gnd) = &nets[k].shield {
                        let kg = index[gnd.as_str()];
                        let frags = shield_cells(grid, pdk, ids[k], ids[kg], &np)?;
                        let mut sp = NetPath::default();
                        sp.cells.extend(frags.iter().flatten().copied());
                        grid.commit(ids[kg], &sp);
                        paths[kg].cells.extend(sp.cells.iter().copied());
                        extra[kg].extend(frags);
                    }
                    let prev = std::mem::take(&mut paths[k]);
                    paths[k] = np;
                    paths[k].cells.extend(prev.cells);
                }
            }
        }
        let mut congested = Vec::new();
        for (k, p) in paths.iter().enumerate() {
            let c = grid.conflicts(ids[k], p);
            if !c.is_empty() && worst.is_empty() {
                worst = nets[k].name.clone();
            }
            congested.extend(c);
        }
        if congested.is_empty() {
            clean = true;
            break;
        }
        worst.clear();
        for (k, p) in paths.iter().enumerate() {
            if !grid.conflicts(ids[k], p).is_empty() {
                worst = nets[k].name.clone();
                break;
            }
        }
        for c in congested {
            let i = grid.idx(c);
            grid.history[i] += params.history;
        }
        present *= 2;
    }
    if !clean {
        return Err(RouteError::Unroutable {
            net: worst,
            rounds: params.rounds.max(1),
        });
    }

    let mut paired = vec![false; nets.len()];
    for job in &jobs {
        if let Job::Pair(a, b) = *job {
            paired[a] = true;
            paired[b] = true;
        }
    }
    for (k, n) in nets.iter().enumerate() {
        let Some(budget) = n.budget else { continue };
        if paths[k].cells.is_empty() {
            continue;
        }
        if !grid.build_route(pdk, ids[k], &paths[k])?.within_budget(pdk, budget)? {
            reroute_for_budget(grid, pdk, nets, &ids, &mut paths, &paired, k, budget, params)?;
            diagnostics.push(format!("net {} rerouted for its resistance budget", n.name));
        }
    }

    let mut routes: Vec<Route> = Vec::new();
    for (k, n) in nets.iter().enumerate() {
        if paths[k].cells.is_empty() {
            continue;
        }
        let r = grid.build_route(pdk, ids[k], &paths[k])?;
        if let Some(budget) = n.budget {
            if !r.within_budget(pdk, budget)? {
                return Err(RouteError::Unroutable {
                    net: n.name.clone(),
                    rounds: params.rounds.max(1),
                });
            }
        }
        if !r.segments.is_empty() || !r.vias.is_empty() {
            routes.push(r);
        }
    }
    routes.sort_by(|a, b| a.net.cmp(&b.net));
    Ok(ModuleRoutes { routes, diagnostics })
}

/// Reroutes net `k` by resistance. When only other nets stand in the way of a
/// route within budget, it takes that route and moves them aside.
#[allow(clippy::too_many_arguments)]
fn reroute_for_budget(
    grid: &mut RoutingGrid,
    pdk: &Pdk,
    nets: &[NetRequest],
    ids: &[u32],
    paths: &mut [NetPath],
    paired: &[bool],
    k: usize,
    budget: f64,
    params: &RouteParams,
) -> Result<(), RouteError> {
    let n = &nets[k];
    let id = ids[k];
    let w = grid.weights(CostMode::Resistance, params);
    grid.rip(id, &paths[k]);
    let search = |grid: &RoutingGrid, strict: bool| {
        let s = Search {
            g: grid,
            net: id,
            w: &w,
            present: 0,
            strict,
            twin: None,
        };
        grow_tree(&s, &n.name, &n.terminals)
    };
    if let Ok(np) = search(grid, true) {
        if grid.build_route(pdk, id, &np)?.within_budget(pdk, budget)? {
            grid.commit(id, &np);
            paths[k] = np;
            return Ok(());
        }
    }
    let np = search(grid, false)?;
    let r = grid.build_route(pdk, id, &np)?;
    if !r.within_budget(pdk, budget)? {
        grid.commit(id, &paths[k]);
        return Err(RouteError::Budget {
            net: n.name.clone(),
            achieved: r.resistance(pdk)?,
            budget,
        });
    }
    grid.commit(id, &np);
    paths[k] = np;
    let stuck = |j: usize| RouteError::Unroutable {
        net: nets[j].name.clone(),
        rounds: params.rounds.max(1),
    };
    let lw = grid.weights(params.mode, params);
    for j in 0..nets.len() {
        if j == k || grid.conflicts(ids[j], &paths[j]).is_empty() {
            continue;
        }
        if paired[j] || nets[j].shield.is_some() || nets.iter().any(|x| x.shield.as_deref() == Some(nets[j].name.as_str())) {
            return Err(stuck(j));
        }
        grid.rip(ids[j], &paths[j]);
        let wj = if nets[j].budget.is_some() { &w } else { &lw };
        let s = Search {
            g: grid,
            net: ids[j],
            w: wj,
            present: 0,
            strict: true,
            twin: None,
        };
        let nj = grow_tree(&s, &nets[j].name, &nets[j].terminals).map_err(|_| stuck(j))?;
        grid.commit(ids[j], &nj);
        paths[j] = nj;
    }
    if (0..nets.len()).any(|j| !grid.conflicts(ids[j], &paths[j]).is_empty()) {
        return Err(stuck(k));
    }
    Ok(())
}

/// Reserves the tracks on both sides of every run of `net` for `ground`.
fn shield_cells(grid: &RoutingGrid, pdk: &Pdk, net: u32, ground: u32, np: &NetPath) -> Result<Vec<Vec<Cell>>, RouteError> {
    let route = grid.build_route(pdk, net, np)?;
    let mut frags = Vec::new();
    for s in &route.segments {
        let l = grid.names.iter().position(|n| *n == s.layer).expect("grid layer");
        for dt in [-1, 1] {
            let mut cur: Vec<Cell> = Vec::new();
            for st in s.lo..=s.hi {
                let c = if grid.vertical(l) {
                    Cell::new(l, s.track + dt, st)
                } else {
                    Cell::new(l, st, s.track + dt)
                };
                let usable = grid.contains(c)
                    && grid.legal(ground, c)
                    && !np.cells.contains(&c)
                    && grid.others_near(ground, c) == 0;
                if usable {
                    cur.push(c);
                } else if !cur.is_empty() {
                    frags.push(std::mem::take(&mut cur));
                }
            }
            if !cur.is_empty() {
                frags.push(cur);
            }
        }
    }
    frags.retain(|f| f.len() >= 2);
    if frags.is_empty() {
        return Err(RouteError::Shield {
            net: grid.nets[net as usize].clone(),
            reason: "no free adjacent track".into(),
        });
    }
    Ok(frags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{drc_shapes, Shape};
    use crate::pdk::mock14;

    fn grid(cols: i64, rows: i64) -> (Pdk, RoutingGrid) {
        let pdk = mock14();
        let g = RoutingGrid::new(&pdk, cols, rows, 3, 1).unwrap();
        (pdk, g)
    }

    fn shapes_of(routes: &[Route], pdk: &Pdk) -> Vec<Shape> {
        let mut v: Vec<Shape> = routes.iter().flat_map(|r| r.shapes(pdk).unwrap()).collect();
        v.sort();
        v.dedup();
        v
    }

    #[test]
    fn straight_shot() {
        let (pdk, mut g) = grid(12, 12);
        let r = route_net(&mut g, &pdk, "a", &[vec![Cell::new(0, 3, 2)], vec![Cell::new(0, 3, 7)]], &RouteParams::default()).unwrap();
        assert_eq!(r.segments.len(), 1);
        assert!(r.vias.is_empty());
        assert_eq!((r.segments[0].lo, r.segments[0].hi), (2, 7));
        assert_eq!(r.length(&pdk).unwrap(), 5 * 64);
    }

    #[test]
    fn perpendicular_pins_take_one_via() {
        let (pdk, mut g) = grid(12, 12);
        let r = route_net(&mut g, &pdk, "a", &[vec![Cell::new(0, 2, 2)], vec![Cell::new(1, 8, 9)]], &RouteParams::default()).unwrap();
        assert_eq!(r.vias.len(), 1);
        assert_eq!(r.length(&pdk).unwrap(), 7 * 64 + 6 * 80);
        assert!(drc_shapes(&shapes_of(&[r], &pdk), &pdk).is_clean());
    }

    #[test]
    fn blocked_cut_is_reported() {
        let (pdk, mut g) = grid(10, 10);
        for l in 0..3 {
            for j in 0..10 {
                g.block(Cell::new(l, 5, j));
            }
        }
        let err = route_net(&mut g, &pdk, "a", &[vec![Cell::new(0, 2, 2)], vec![Cell::new(0, 8, 2)]], &RouteParams::default());
        assert!(matches!(err, Err(RouteError::Blocked { .. })));
    }

    #[test]
    fn mirror_twice_is_identity() {
        let (pdk, mut g) = grid(16, 12);
        let r = route_net(&mut g, &pdk, "a", &[vec![Cell::new(0, 2, 2)], vec![Cell::new(1, 6, 9)]], &RouteParams::default()).unwrap();
        let axis = 8 * 80;
        let back = r.mirrored(&pdk, axis, "b").unwrap().mirrored(&pdk, axis, "a").unwrap();
        let mut sorted = r.clone();
        sorted.vias.sort();
        assert_eq!(back, sorted);
        assert!(r.mirrored(&pdk, axis + 20, "b").is_err());
    }

    #[test]
    fn symmetric_pair_is_exact() {
        let (pdk, mut g) = grid(20, 12);
        let axis = 10 * 80;
        let m = mirror_index(&pdk, axis).unwrap();
        let ta = vec![vec![Cell::new(0, 2, 2)], vec![Cell::new(1, 7, 8)]];
        let tb: Vec<Vec<Cell>> = ta.iter().map(|t| t.iter().map(|c| Cell::new(c.l, m - c.i, c.j)).collect()).collect();
        let (ra, rb) = route_symmetric(&mut g, &pdk, ("a", &ta), ("b", &tb), axis, &RouteParams::default()).unwrap();
        assert_eq!(ra.length(&pdk).unwrap(), rb.length(&pdk).unwrap());
        let sa = ra.shapes(&pdk).unwrap();
        let sb = rb.shapes(&pdk).unwrap();
        let mut mirrored: Vec<Rect> = sa.iter().map(|s| s.rect.mirror_x(2 * axis)).collect();
        let mut other: Vec<Rect> = sb.iter().map(|s| s.rect).collect();
        mirrored.sort();
        other.sort();
        assert_eq!(mirrored, other);
    }

    #[test]
    fn module_routes_are_clean_and_disjoint() {
        let (pdk, mut g) = grid(16, 16);
        let nets = vec![
            NetRequest {
                name: "a".into(),
                terminals: vec![vec![Cell::new(0, 2, 3)], vec![Cell::new(0, 12, 3)], vec![Cell::new(1, 7, 12)]],
                budget: None,
                shield: None,
            },
            NetRequest {
                name: "b".into(),
                terminals: vec![vec![Cell::new(0, 7, 2)], vec![Cell::new(0, 7, 13)]],
                budget: None,
                shield: None,
            },
        ];
        let out = route_module(&mut g, &pdk, &nets, &[], None, &RouteParams::default()).unwrap();
        assert_eq!(out.routes.len(), 2);
        assert!(drc_shapes(&shapes_of(&out.routes, &pdk), &pdk).is_clean());
    }

    #[test]
    fn impossible_budget_reports_minimum() {
        let (pdk, mut g) = grid(16, 16);
        let nets = vec![NetRequest {
            name: "a".into(),
            terminals: vec![vec![Cell::new(0, 2, 3)], vec![Cell::new(0, 2, 12)]],
            budget: Some(1.0),
            shield: None,
        }];
        match route_module(&mut g, &pdk, &nets, &[], None, &RouteParams::default()) {
            Err(RouteError::Budget { achieved, .. }) => {
                assert!((achieved - 9.0 * 64.0 * 0.025).abs() < 1e-9, "{achieved}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shield_reserves_adjacent_tracks() {
        let (pdk, mut g) = grid(16, 16);
        let nets = vec![
            NetRequest {
                name: "sig".into(),
                terminals: vec![vec![Cell::new(0, 6, 3)], vec![Cell::new(0, 6, 12)]],
                budget: None,
                shield: Some("gnd".into()),
            },
            NetRequest {
                name: "gnd".into(),
                terminals: vec![vec![Cell::new(1, 2, 14), Cell::new(1, 3, 14)]],
                budget: None,
                shield: None,
            },
        ];
        let out = route_module(&mut g, &pdk, &nets, &[], None, &RouteParams::default()).unwrap();
        let gnd = out.routes.iter().find(|r| r.net == "gnd").unwrap();
        for t in [5, 7] {
            assert!(gnd.segments.iter().any(|s| s.layer == "M1" && s.track == t), "{gnd:?}");
        }
        assert!(drc_shapes(&shapes_of(&out.routes, &pdk), &pdk).is_clean());
    }

    #[test]
    fn resistance_is_additive() {
        let pdk = mock14();
        let r = Route {
            net: "n".into(),
            segments: vec![
                Segment {
                    layer: "M2".into(),
                    track: 3,
                    lo: 1,
                    hi: 4,
                },
                Segment {
                    layer: "M2".into(),
                    track: 3,
                    lo: 4,
                    hi: 9,
                },
            ],
            vias: vec![],
            cost: 0,
        };
        let whole = pdk.wire_parasitics(1, 8 * 80).0;
        assert_eq!(r.resistance(&pdk).unwrap(), whole);
        assert!(parasitic_report(&[r], &pdk).unwrap().lines().count() == 2);
    }

    #[test]
    fn budgets_hold_when_nets_compete() {
        let (pdk, mut g) = grid(18, 18);
        let mk = |name: &str, a: (i64, i64), b: (i64, i64), budget: f64| NetRequest {
            name: name.into(),
            terminals: vec![vec![Cell::new(0, a.0, a.1)], vec![Cell::new(0, b.0, b.1)]],
            budget: Some(budget),
            shield: None,
        };
        let nets = vec![mk("n0", (9, 12), (9, 3), 130.0), mk("n1", (9, 6), (6, 9), 72.0), mk("n2", (15, 3), (6, 6), 80.0)];
        for n in &nets {
            for &c in n.terminals.iter().flatten() {
                g.set_fixed(c, &n.name);
            }
        }
        let out = route_module(&mut g, &pdk, &nets, &[], None, &RouteParams::default()).unwrap();
        for (r, n) in out.routes.iter().zip(&nets) {
            assert!(r.within_budget(&pdk, n.budget.unwrap()).unwrap(), "{}", r.net);
        }
    }
}
