//! Reference implementations used to check the library against brute force.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::path::PathBuf;

use gridloom::netlist::FlatNetlist;
use gridloom::pdk::Direction;
use gridloom::route::{Cell, CostMode, RouteParams, RoutingGrid};

/// Fixture file stem and top subcircuit.
pub const FIXTURES: &[(&str, &str)] = &[
    ("ota5t", "ota5t"),
    ("cmota", "cmota"),
    ("scfilter", "scfilter"),
    ("scfilter3", "biquad"),
    ("r2r", "r2r"),
    ("capbank", "capbank"),
];

pub fn fixture(stem: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{stem}.sp"))
}

pub fn pdk_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/pdk").join(format!("{name}.json"))
}

// ---------------------------------------------------------------- placement

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Packs a sequence pair by direct relation checks over all block pairs.
pub fn pack(pos: &[usize], neg: &[usize], sizes: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let n = sizes.len();
    let mut pi = vec![0; n];
    let mut ni = vec![0; n];
    for k in 0..n {
        pi[pos[k]] = k;
        ni[neg[k]] = k;
    }
    let mut xy = vec![(0i64, 0i64); n];
    // Fixed-point relaxation; n is tiny.
    for _ in 0..n {
        for b in 0..n {
            for a in 0..n {
                if a == b {
                    continue;
                }
                if pi[a] < pi[b] && ni[a] < ni[b] {
                    xy[b].0 = xy[b].0.max(xy[a].0 + sizes[a].0);
                }
                if pi[a] > pi[b] && ni[a] < ni[b] {
                    xy[b].1 = xy[b].1.max(xy[a].1 + sizes[a].1);
                }
            }
        }
    }
    xy
}

/// A small placement instance: sizes and per-block doubled pin offsets.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub sizes: Vec<(i64, i64)>,
    pub pins: Vec<BTreeMap<String, (i64, i64)>>,
}

impl SmallInstance {
    /// `area_w * area + wl_w * doubled HPWL` of one packing.
    pub fn cost(&self, xy: &[(i64, i64)], area_w: i128, wl_w: i128) -> i128 {
        let w = (0..xy.len()).map(|i| xy[i].0 + self.sizes[i].0).max().unwrap_or(0);
        let h = (0..xy.len()).map(|i| xy[i].1 + self.sizes[i].1).max().unwrap_or(0);
        let mut nets: BTreeMap<&str, Vec<(i64, i64)>> = BTreeMap::new();
        for (i, pins) in self.pins.iter().enumerate() {
            for (net, &(px, py)) in pins {
                nets.entry(net).or_default().push((2 * xy[i].0 + px, 2 * xy[i].1 + py));
            }
        }
        let hpwl: i64 = nets
            .values()
            .filter(|p| p.len() >= 2)
            .map(|p| {
                let (xs, ys): (Vec<i64>, Vec<i64>) = p.iter().copied().unzip();
                xs.iter().max().unwrap() - xs.iter().min().unwrap() + ys.iter().max().unwrap() - ys.iter().min().unwrap()
            })
            .sum();
        area_w * (w as i128 * h as i128) + wl_w * hpwl as i128
    }

    /// Minimum cost over all `(n!)^2` sequence pairs.
    pub fn exhaustive_min(&self, area_w: i128, wl_w: i128) -> i128 {
        let perms = permutations(self.sizes.len());
        let mut best = i128::MAX;
        for pos in &perms {
            for neg in &perms {
                best = best.min(self.cost(&pack(pos, neg, &self.sizes), area_w, wl_w));
            }
        }
        best
    }
}

// ------------------------------------------------------------------ routing

/// Plain Dijkstra over (cell, arrived-by-via) states with the router's
/// legality and weights, from `src` to `dst`. No consecutive vias.
pub fn dijkstra(grid: &mut RoutingGrid, net: &str, src: Cell, dst: Cell, mode: CostMode, params: &RouteParams) -> Option<i64> {
    let (cols, rows, layers) = (grid.cols, grid.rows, grid.layers);
    let mut ok = BTreeMap::new();
    for l in 0..layers {
        for i in 0..cols {
            for j in 0..rows {
                let c = Cell::new(l, i, j);
                ok.insert(c, grid.passable(net, c));
            }
        }
    }
    let costs: Vec<(i64, Option<i64>)> = (0..layers).map(|l| grid.step_cost(l, mode, params)).collect();
    let dirs: Vec<Direction> = (0..layers).map(|l| grid.layer_direction(l)).collect();
    let mut dist: BTreeMap<(Cell, bool), i64> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert((src, false), 0);
    heap.push(Reverse((0i64, src, false)));
    while let Some(Reverse((d, c, via))) = heap.pop() {
        if dist.get(&(c, via)).is_some_and(|&best| d > best) {
            continue;
        }
        if c == dst {
            return Some(d);
        }
        let mut next = Vec::new();
        for s in [-1i64, 1] {
            let n = match dirs[c.l] {
                Direction::Vertical => Cell::new(c.l, c.i, c.j + s),
                Direction::Horizontal => Cell::new(c.l, c.i + s, c.j),
            };
            next.push((n, costs[c.l].0, false));
        }
        if !via {
            if c.l > 0 {
                next.push((Cell::new(c.l - 1, c.i, c.j), costs[c.l - 1].1.unwrap(), true));
            }
            if c.l + 1 < layers {
                next.push((Cell::new(c.l + 1, c.i, c.j), costs[c.l].1.unwrap(), true));
            }
        }
        for (n, w, v) in next {
            if !ok.get(&n).copied().unwrap_or(false) {
                continue;
            }
            let nd = d + w;
            if dist.get(&(n, v)).is_none_or(|&old| nd < old) {
                dist.insert((n, v), nd);
                heap.push(Reverse((nd, n, v)));
            }
        }
    }
    None
}

// --------------------------------------------------------------- matching

fn pin_net_of(flat: &FlatNetlist, d: usize, k: usize, swapped: bool) -> &str {
    let dev = &flat.devices[d];
    let k = match (dev.kind.is_mos() && swapped, k) {
        (true, 0) => 2,
        (true, 2) => 0,
        (_, k) => k,
    };
    &dev.pins[k]
}

fn degrees(flat: &FlatNetlist) -> BTreeMap<&str, usize> {
    let mut m = BTreeMap::new();
    for d in &flat.devices {
        for p in &d.pins {
            *m.entry(p.as_str()).or_insert(0) += 1;
        }
    }
    m
}

/// Every target device set that hosts `pattern`, by trying all injective
/// device maps and all drain/source orientations.
pub fn brute_matches(target: &FlatNetlist, pattern: &FlatNetlist) -> BTreeSet<Vec<usize>> {
    let np = pattern.devices.len();
    let nt = target.devices.len();
    let tdeg = degrees(target);
    let pdeg = degrees(pattern);
    let ports: BTreeSet<&str> = pattern.ports.iter().map(String::as_str).collect();
    let mut out = BTreeSet::new();
    let mut assign = vec![0usize; np];
    fn rec(
        k: usize,
        assign: &mut Vec<usize>,
        used: &mut Vec<bool>,
        visit: &mut dyn FnMut(&[usize]),
        np: usize,
        nt: usize,
    ) {
        if k == np {
            visit(assign);
            return;
        }
        for t in 0..nt {
            if !used[t] {
                used[t] = true;
                assign[k] = t;
                rec(k + 1, assign, used, visit, np, nt);
                used[t] = false;
            }
        }
    }
    let mut visit = |a: &[usize]| {
        if (0..np).any(|p| pattern.devices[p].kind != target.devices[a[p]].kind) {
            return;
        }
        for mask in 0u32..(1 << np) {
            if (0..np).any(|p| mask >> p & 1 == 1 && !pattern.devices[p].kind.is_mos()) {
                continue;
            }
            let mut map: BTreeMap<&str, &str> = BTreeMap::new();
            let mut ok = true;
            'dev: for p in 0..np {
                for k in 0..pattern.devices[p].pins.len() {
                    let pn = pattern.devices[p].pins[k].as_str();
                    let tn = pin_net_of(target, a[p], k, mask >> p & 1 == 1);
                    match map.get(pn) {
                        Some(&m) if m != tn => {
                            ok = false;
                            break 'dev;
                        }
                        Some(_) => {}
                        None => {
                            map.insert(pn, tn);
                        }
                    }
                }
            }
            if !ok {
                continue;
            }
            let images: BTreeSet<&str> = map.values().copied().collect();
            if images.len() != map.len() {
                continue;
            }
            if map.iter().any(|(pn, tn)| !ports.contains(pn) && pdeg[pn] != tdeg[tn]) {
                continue;
            }
            let mut set = a.to_vec();
            set.sort_unstable();
            out.insert(set);
            return;
        }
    };
    rec(0, &mut assign, &mut vec![false; nt], &mut visit, np, nt);
    out
}

// ---------------------------------------------------------------- centroid

/// Doubled centroid offsets of each device from the grid center.
pub fn centroid_sums(cells: &[Vec<Option<usize>>], devices: usize) -> Vec<(i64, i64, i64)> {
    let rows = cells.len() as i64;
    let cols = cells.first().map_or(0, |r| r.len()) as i64;
    let mut s = vec![(0, 0, 0); devices];
    for (i, row) in cells.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            if let Some(d) = *c {
                s[d].0 += 2 * i as i64 - (rows - 1);
                s[d].1 += 2 * j as i64 - (cols - 1);
                s[d].2 += 1;
            }
        }
    }
    s
}

/// Whether some assignment of `counts` units to a `rows x cols` grid puts
/// every device centroid exactly on the grid center. Depth-first over
/// per-device cell subsets with parity and reachability pruning.
pub fn zero_centroid_exists(counts: &[u32], rows: usize, cols: usize) -> bool {
    let total: u32 = counts.iter().sum();
    if total as usize > rows * cols {
        return false;
    }
    let coords: Vec<(i64, i64)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (2 * i as i64 - (rows as i64 - 1), 2 * j as i64 - (cols as i64 - 1))))
        .collect();
    let max_y = rows as i64 - 1;
    let max_x = cols as i64 - 1;
    for &n in counts {
        // Odd counts of odd coordinates cannot sum to zero.
        if n % 2 == 1 && (rows.is_multiple_of(2) || cols.is_multiple_of(2)) {
            return false;
        }
    }
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by_key(|&d| Reverse(counts[d]));
    let mut used = vec![false; coords.len()];

    #[allow(clippy::too_many_arguments)]
    fn pick(
        coords: &[(i64, i64)],
        used: &mut Vec<bool>,
        start: usize,
        left: u32,
        sum: (i64, i64),
        bound: (i64, i64),
        rest: &mut dyn FnMut(&mut Vec<bool>) -> bool,
    ) -> bool {
        if left == 0 {
            return sum == (0, 0) && rest(used);
        }
        let k = left as i64;
        if sum.0.abs() > k * bound.0 || sum.1.abs() > k * bound.1 {
            return false;
        }
        for c in start..coords.len() {
            if used[c] || coords.len() - c < left as usize {
                continue;
            }
            used[c] = true;
            let s = (sum.0 + coords[c].0, sum.1 + coords[c].1);
            if pick(coords, used, c + 1, left - 1, s, bound, rest) {
                used[c] = false;
                return true;
            }
            used[c] = false;
        }
        false
    }

    fn device(
        k: usize,
        order: &[usize],
        counts: &[u32],
        coords: &[(i64, i64)],
        used: &mut Vec<bool>,
        bound: (i64, i64),
    ) -> bool {
        if k == order.len() {
            return true;
        }
        let mut rest = |u: &mut Vec<bool>| device(k + 1, order, counts, coords, u, bound);
        pick(coords, used, 0, counts[order[k]], (0, 0), bound, &mut rest)
    }

    device(0, &order, counts, &coords, &mut used, (max_y, max_x))
}
