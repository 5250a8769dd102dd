//! Sequence-pair placement with simulated annealing.
//!
//! Symmetric pairs and self-symmetric blocks of a module are fused into one
//! super-block: rows stacked bottom-up, each row either a pair (first member
//! left, second member mirrored and abutting at the axis) or one centered
//! block. Every visited state is therefore symmetry-feasible.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Rect;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlaceError {
    #[error("no blocks to place")]
    Empty,
    #[error("symmetric blocks {a} and {b} differ in size")]
    UnequalPair { a: String, b: String },
    #[error("cannot legalize: {a} still overlaps {b}")]
    Overlap { a: String, b: String },
    #[error("block {0} has no variants")]
    NoVariant(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencePair {
    pub pos: Vec<usize>,
    pub neg: Vec<usize>,
}

impl SequencePair {
    pub fn identity(n: usize) -> SequencePair {
        SequencePair {
            pos: (0..n).collect(),
            neg: (0..n).collect(),
        }
    }

    pub fn is_valid(&self) -> bool {
        let mut a = self.pos.clone();
        let mut b = self.neg.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b && a.iter().enumerate().all(|(i, &v)| i == v)
    }
}

/// Packs blocks by longest paths: `a` before `b` in both sequences puts `a`
/// left of `b`; `a` after `b` in `pos` and before it in `neg` puts `a`
/// below `b`. Returns lower-left corners.
pub fn sp_to_placement(sp: &SequencePair, sizes: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let n = sizes.len();
    let mut pi = vec![0; n];
    let mut ni = vec![0; n];
    for (i, &b) in sp.pos.iter().enumerate() {
        pi[b] = i;
    }
    for (i, &b) in sp.neg.iter().enumerate() {
        ni[b] = i;
    }
    let mut xy = vec![(0i64, 0i64); n];
    for (k, &b) in sp.neg.iter().enumerate() {
        let (mut x, mut y) = (0, 0);
        for &a in &sp.neg[..k] {
            if pi[a] < pi[b] {
                x = x.max(xy[a].0 + sizes[a].0);
            } else {
                y = y.max(xy[a].1 + sizes[a].1);
            }
        }
        debug_assert!(ni[b] == k);
        xy[b] = (x, y);
    }
    xy
}

/// One layout option of a block: size and pin centers (doubled, relative to
/// the block's lower-left corner, unmirrored).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockVariant {
    pub w: i64,
    pub h: i64,
    pub pins: BTreeMap<String, (i64, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub variants: Vec<BlockVariant>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PlaceProblem {
    pub blocks: Vec<Block>,
    /// Symmetric pairs sharing the module's vertical axis.
    pub pairs: Vec<(usize, usize)>,
    pub self_symmetric: Vec<usize>,
    /// Groups whose members should share a bottom edge.
    pub align: Vec<Vec<usize>>,
    /// Net resistance budgets in ohms.
    pub budgets: BTreeMap<String, f64>,
    /// Ohms per nm used to estimate net resistance from HPWL.
    pub unit_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostWeights {
    pub area: i64,
    /// Per doubled nm of HPWL.
    pub wl: i64,
    pub penalty: i64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            area: 1,
            wl: 200,
            penalty: 1_000_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub weights: CostWeights,
    pub cooling: f64,
    pub moves_per_block: usize,
    pub min_accept: f64,
    pub t_min_ratio: f64,
    pub restarts: u32,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            weights: CostWeights::default(),
            cooling: 0.95,
            moves_per_block: 200,
            min_accept: 0.02,
            t_min_ratio: 1e-3,
            restarts: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlace {
    pub name: String,
    pub x: i64,
    pub y: i64,
    pub variant: usize,
    pub mirrored: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Placement {
    pub blocks: Vec<BlockPlace>,
    pub width: i64,
    pub height: i64,
    /// Vertical symmetry axis x coordinate, when the module has symmetry.
    pub axis: Option<i64>,
    pub cost: i128,
}

impl Placement {
    pub fn rect(&self, problem: &PlaceProblem, i: usize) -> Rect {
        let b = &self.blocks[i];
        let v = &problem.blocks[i].variants[b.variant];
        Rect::new(b.x, b.y, b.x + v.w, b.y + v.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Row {
    Pair(usize, usize),
    Single(usize),
}

#[derive(Debug, Clone)]
struct State {
    sp: SequencePair,
    variant: Vec<usize>,
    rows: Vec<Row>,
}

/// SP items: index 0 is the super-block when the problem has symmetry.
struct Items {
    has_group: bool,
    free: Vec<usize>,
}

impl Items {
    fn new(p: &PlaceProblem) -> Items {
        let mut in_group = vec![false; p.blocks.len()];
        for &(a, b) in &p.pairs {
            in_group[a] = true;
            in_group[b] = true;
        }
        for &s in &p.self_symmetric {
            in_group[s] = true;
        }
        Items {
            has_group: in_group.iter().any(|&g| g),
            free: (0..p.blocks.len()).filter(|&i| !in_group[i]).collect(),
        }
    }

    fn len(&self) -> usize {
        self.free.len() + usize::from(self.has_group)
    }
}

fn initial_rows(p: &PlaceProblem) -> Vec<Row> {
    let mut rows: Vec<Row> = p.pairs.iter().map(|&(a, b)| Row::Pair(a, b)).collect();
    rows.extend(p.self_symmetric.iter().map(|&s| Row::Single(s)));
    rows
}

/// Super-block size, axis and member offsets for the current variants.
fn group_layout(p: &PlaceProblem, st: &State) -> (i64, i64, i64, Vec<(usize, i64, i64, bool)>) {
    let size = |i: usize| {
        let v = &p.blocks[i].variants[st.variant[i]];
        (v.w, v.h)
    };
    let half = st
        .rows
        .iter()
        .map(|r| match *r {
            Row::Pair(a, _) => size(a).0,
            Row::Single(s) => size(s).0 / 2,
        })
        .max()
        .unwrap_or(0);
    let axis = half;
    let mut y = 0;
    let mut members = Vec::new();
    for r in &st.rows {
        match *r {
            Row::Pair(a, b) => {
                let (w, h) = size(a);
                members.push((a, axis - w, y, false));
                members.push((b, axis, y, true));
                y += h.max(size(b).1);
            }
            Row::Single(s) => {
                let (w, h) = size(s);
                members.push((s, axis - w / 2, y, false));
                y += h;
            }
        }
    }
    (2 * half, y, axis, members)
}

fn realize(p: &PlaceProblem, items: &Items, st: &State) -> Placement {
    let mut sizes = Vec::with_capacity(items.len());
    let group = items.has_group.then(|| group_layout(p, st));
    if let Some((w, h, ..)) = &group {
        sizes.push((*w, *h));
    }
    for &b in &items.free {
        let v = &p.blocks[b].variants[st.variant[b]];
        sizes.push((v.w, v.h));
    }
    let xy = sp_to_placement(&st.sp, &sizes);
    let mut blocks: Vec<BlockPlace> = p
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| BlockPlace {
            name: b.name.clone(),
            x: 0,
            y: 0,
            variant: st.variant[i],
            mirrored: false,
        })
        .collect();
    let mut axis = None;
    let off = usize::from(items.has_group);
    if let Some((_, _, ax, members)) = group {
        let (gx, gy) = xy[0];
        axis = Some(gx + ax);
        for (b, x, y, m) in members {
            blocks[b].x = gx + x;
            blocks[b].y = gy + y;
            blocks[b].mirrored = m;
        }
    }
    for (k, &b) in items.free.iter().enumerate() {
        blocks[b].x = xy[k + off].0;
        blocks[b].y = xy[k + off].1;
    }
    let width = (0..sizes.len()).map(|i| xy[i].0 + sizes[i].0).max().unwrap_or(0);
    let height = (0..sizes.len()).map(|i| xy[i].1 + sizes[i].1).max().unwrap_or(0);
    Placement {
        blocks,
        width,
        height,
        axis,
        cost: 0,
    }
}

/// Doubled pin position of `net` on placed block `i`.
fn pin_at(p: &PlaceProblem, pl: &Placement, i: usize, net: &str) -> Option<(i64, i64)> {
    let b = &pl.blocks[i];
    let v = &p.blocks[i].variants[b.variant];
    let &(cx2, cy2) = v.pins.get(net)?;
    let cx2 = if b.mirrored { 2 * v.w - cx2 } else { cx2 };
    Some((2 * b.x + cx2, 2 * b.y + cy2))
}

/// Doubled HPWL per net over block pin positions.
pub fn net_hpwl2(p: &PlaceProblem, pl: &Placement) -> BTreeMap<String, i64> {
    let mut boxes: BTreeMap<&str, (i64, i64, i64, i64, usize)> = BTreeMap::new();
    for (i, b) in p.blocks.iter().enumerate() {
        for net in b.variants[pl.blocks[i].variant].pins.keys() {
            let (x, y) = pin_at(p, pl, i, net).expect("pin exists");
            let e = boxes.entry(net.as_str()).or_insert((x, y, x, y, 0));
            e.0 = e.0.min(x);
            e.1 = e.1.min(y);
            e.2 = e.2.max(x);
            e.3 = e.3.max(y);
            e.4 += 1;
        }
    }
    boxes
        .into_iter()
        .filter(|(_, b)| b.4 >= 2)
        .map(|(n, b)| (n.to_string(), (b.2 - b.0) + (b.3 - b.1)))
        .collect()
}

/// Budget-infeasible nets plus violated alignment groups.
pub fn penalty_count(p: &PlaceProblem, pl: &Placement) -> i64 {
    let hp = net_hpwl2(p, pl);
    let mut n = 0;
    for (net, budget) in &p.budgets {
        if let Some(h2) = hp.get(net) {
            if (*h2 as f64 / 2.0) * p.unit_r > *budget {
                n += 1;
            }
        }
    }
    for g in &p.align {
        if g.iter().any(|&b| pl.blocks[b].y != pl.blocks[g[0]].y) {
            n += 1;
        }
    }
    n
}

pub fn cost_of(p: &PlaceProblem, pl: &Placement, w: &CostWeights) -> i128 {
    let area = pl.width as i128 * pl.height as i128;
    let wl: i128 = net_hpwl2(p, pl).values().map(|&v| v as i128).sum();
    w.area as i128 * area + w.wl as i128 * wl + w.penalty as i128 * penalty_count(p, pl) as i128
}

fn validate(p: &PlaceProblem) -> Result<(), PlaceError> {
    if p.blocks.is_empty() {
        return Err(PlaceError::Empty);
    }
    if let Some(b) = p.blocks.iter().find(|b| b.variants.is_empty()) {
        return Err(PlaceError::NoVariant(b.name.clone()));
    }
    for &(a, b) in &p.pairs {
        let (va, vb) = (&p.blocks[a].variants, &p.blocks[b].variants);
        if va.len() != vb.len() || va.iter().zip(vb).any(|(x, y)| (x.w, x.h) != (y.w, y.h)) {
            return Err(PlaceError::UnequalPair {
                a: p.blocks[a].name.clone(),
                b: p.blocks[b].name.clone(),
            });
        }
    }
    Ok(())
}

fn partner_of(p: &PlaceProblem, i: usize) -> Option<usize> {
    p.pairs.iter().find_map(|&(a, b)| match i {
        _ if i == a => Some(b),
        _ if i == b => Some(a),
        _ => None,
    })
}

/// Applies one random move; returns false when the move is a no-op.
fn perturb(p: &PlaceProblem, st: &mut State, rng: &mut ChaCha8Rng) -> bool {
    let n = st.sp.pos.len();
    let multi_variant: Vec<usize> = (0..p.blocks.len()).filter(|&i| p.blocks[i].variants.len() > 1).collect();
    let mut kinds = Vec::new();
    if n >= 2 {
        kinds.extend([0, 1, 2]);
    }
    if !multi_variant.is_empty() {
        kinds.push(3);
    }
    if st.rows.len() >= 2 {
        kinds.push(4);
    }
    let Some(&kind) = kinds.choose(rng) else { return false };
    match kind {
        0..=2 => {
            let i = rng.gen_range(0..n);
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            if kind == 0 || kind == 2 {
                st.sp.pos.swap(i, j);
            }
            if kind == 1 || kind == 2 {
                let (a, b) = (st.sp.pos[i], st.sp.pos[j]);
                let ia = st.sp.neg.iter().position(|&x| x == a).unwrap();
                let ib = st.sp.neg.iter().position(|&x| x == b).unwrap();
                if kind == 2 {
                    st.sp.neg.swap(ia, ib);
                } else {
                    st.sp.neg.swap(i.min(n - 1), j.min(n - 1));
                }
            }
        }
        3 => {
            let b = *multi_variant.choose(rng).unwrap();
            let nv = p.blocks[b].variants.len();
            st.variant[b] = (st.variant[b] + 1) % nv;
            if let Some(q) = partner_of(p, b) {
                st.variant[q] = st.variant[b];
            }
        }
        _ => {
            let i = rng.gen_range(0..st.rows.len());
            let mut j = rng.gen_range(0..st.rows.len() - 1);
            if j >= i {
                j += 1;
            }
            st.rows.swap(i, j);
        }
    }
    true
}

fn run_chain(p: &PlaceProblem, items: &Items, params: &AnnealParams, seed: u64) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = items.len();
    let mut st = State {
        sp: SequencePair::identity(n),
        variant: vec![0; p.blocks.len()],
        rows: initial_rows(p),
    };
    st.sp.pos.shuffle(&mut rng);
    st.sp.neg.shuffle(&mut rng);
    let eval = |st: &State| {
        let mut pl = realize(p, items, st);
        pl.cost = cost_of(p, &pl, &params.weights);
        pl
    };
    let mut cur = eval(&st);
    let mut best = cur.clone();
    let movable = n >= 2 || st.rows.len() >= 2 || p.blocks.iter().any(|b| b.variants.len() > 1);
    if !movable {
        return best;
    }

    // Initial temperature from the mean uphill step of a short random walk.
    let mut probe = st.clone();
    let mut last = cur.cost;
    let (mut up, mut ups) = (0f64, 0u32);
    for _ in 0..(20 * n).max(20) {
        perturb(p, &mut probe, &mut rng);
        let c = eval(&probe).cost;
        if c > last {
            up += (c - last) as f64;
            ups += 1;
        }
        last = c;
    }
    let t0 = if ups > 0 { up / ups as f64 } else { 1.0 };
    let mut t = t0;
    let moves = params.moves_per_block * n.max(1);
    while t >= params.t_min_ratio * t0 {
        let mut accepted = 0usize;
        for _ in 0..moves {
            let mut next = st.clone();
            perturb(p, &mut next, &mut rng);
            let pl = eval(&next);
            let delta = (pl.cost - cur.cost) as f64;
            let u: f64 = rng.gen();
            if delta <= 0.0 || u < (-delta / t).exp() {
                if delta != 0.0 {
                    accepted += 1;
                }
                st = next;
                cur = pl;
                if cur.cost < best.cost {
                    best = cur.clone();
                }
            }
        }
        if (accepted as f64) < params.min_accept * moves as f64 {
            break;
        }
        t *= params.cooling;
    }
    best
}

/// Seeded annealing with `params.restarts` independent chains; the lowest
/// cost wins, ties to the earliest chain.
pub fn anneal(p: &PlaceProblem, params: &AnnealParams, seed: u64) -> Result<Placement, PlaceError> {
    validate(p)?;
    let items = Items::new(p);
    let mut best: Option<Placement> = None;
    for r in 0..params.restarts.max(1) {
        let pl = run_chain(p, &items, params, seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(r as u64));
        if best.as_ref().is_none_or(|b| pl.cost < b.cost) {
            best = Some(pl);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Pairs of overlapping blocks.
pub fn overlaps(p: &PlaceProblem, pl: &Placement) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..pl.blocks.len() {
        for j in i + 1..pl.blocks.len() {
            if pl.rect(p, i).overlaps(&pl.rect(p, j)) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Checks the mirror equations with integer arithmetic.
pub fn symmetry_holds(p: &PlaceProblem, pl: &Placement) -> bool {
    if p.pairs.is_empty() && p.self_symmetric.is_empty() {
        return true;
    }
    let Some(axis) = pl.axis else { return false };
    let cx2 = |i: usize| {
        let r = pl.rect(p, i);
        r.x0 + r.x1
    };
    p.pairs.iter().all(|&(a, b)| {
        cx2(a) + cx2(b) == 4 * axis && pl.blocks[a].y == pl.blocks[b].y && pl.blocks[a].mirrored != pl.blocks[b].mirrored
    }) && p.self_symmetric.iter().all(|&s| cx2(s) == 2 * axis)
}

/// Moves pair partners and self-symmetric blocks onto a common axis, then
/// pushes overlapping blocks right or up. `grid` is the x snap pitch.
pub fn legalize_symmetry(p: &PlaceProblem, pl: &Placement, grid: i64) -> Result<Placement, PlaceError> {
    validate(p)?;
    let mut out = pl.clone();
    if p.pairs.is_empty() && p.self_symmetric.is_empty() {
        return Ok(out);
    }
    let snap = |v: i64| v.div_euclid(grid) * grid;
    let mut sum = 0i64;
    let mut cnt = 0i64;
    for &(a, b) in &p.pairs {
        let (ra, rb) = (pl.rect(p, a), pl.rect(p, b));
        sum += (ra.x0 + ra.x1 + rb.x0 + rb.x1) / 4;
        cnt += 1;
    }
    for &s in &p.self_symmetric {
        let r = pl.rect(p, s);
        sum += (r.x0 + r.x1) / 2;
        cnt += 1;
    }
    let mut axis = snap(sum / cnt);
    let wv: Vec<i64> = (0..p.blocks.len()).map(|i| p.blocks[i].variants[out.blocks[i].variant].w).collect();
    let widths = |i: usize| wv[i];
    let need = p
        .pairs
        .iter()
        .map(|&(a, _)| widths(a))
        .chain(p.self_symmetric.iter().map(|&s| widths(s) / 2))
        .max()
        .unwrap_or(0);
    if axis < need {
        axis = need;
    }
    let mut grouped = vec![false; p.blocks.len()];
    for &(a, b) in &p.pairs {
        let w = widths(a);
        let left = out.blocks[a].x + w / 2 <= out.blocks[b].x + w / 2;
        let (l, r) = if left { (a, b) } else { (b, a) };
        let y = out.blocks[a].y.min(out.blocks[b].y);
        out.blocks[l].x = axis - w;
        out.blocks[r].x = axis;
        out.blocks[l].mirrored = false;
        out.blocks[r].mirrored = true;
        out.blocks[l].y = y;
        out.blocks[r].y = y;
        grouped[a] = true;
        grouped[b] = true;
    }
    for &s in &p.self_symmetric {
        out.blocks[s].x = axis - widths(s) / 2;
        grouped[s] = true;
    }
    let rows: Vec<Vec<usize>> = {
        let mut v: Vec<Vec<usize>> = p.pairs.iter().map(|&(a, b)| vec![a, b]).collect();
        v.extend(p.self_symmetric.iter().map(|&s| vec![s]));
        v
    };
    let row_of = |i: usize| rows.iter().position(|r| r.contains(&i));
    let limit = 4 * p.blocks.len() * p.blocks.len() + 8;
    for _ in 0..limit {
        let ov = overlaps(p, &out);
        let Some(&(i, j)) = ov.first() else {
            out.axis = Some(axis);
            let (w, h) = (0..out.blocks.len()).fold((0, 0), |(w, h), i| {
                let r = out.rect(p, i);
                (w.max(r.x1), h.max(r.y1))
            });
            out.width = w;
            out.height = h;
            return Ok(out);
        };
        let (ri, rj) = (out.rect(p, i), out.rect(p, j));
        // Free blocks move right; symmetric rows move up as a unit.
        let mover = if !grouped[j] { j } else if !grouped[i] { i } else { j.max(i) };
        if !grouped[mover] {
            let other = if mover == i { rj } else { ri };
            out.blocks[mover].x = other.x1;
        } else {
            let other = if mover == i { rj } else { ri };
            let dy = other.y1 - out.blocks[mover].y;
            for &m in &rows[row_of(mover).expect("grouped block has a row")] {
                out.blocks[m].y += dy;
            }
        }
    }
    let (i, j) = overlaps(p, &out)[0];
    Err(PlaceError::Overlap {
        a: p.blocks[i].name.clone(),
        b: p.blocks[j].name.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(name: &str, w: i64, h: i64) -> Block {
        Block {
            name: name.into(),
            variants: vec![BlockVariant {
                w,
                h,
                pins: BTreeMap::new(),
            }],
        }
    }

    #[test]
    fn left_of_semantics() {
        let sp = SequencePair {
            pos: vec![0, 1],
            neg: vec![0, 1],
        };
        assert_eq!(sp_to_placement(&sp, &[(10, 10), (20, 10)]), vec![(0, 0), (10, 0)]);
    }

    #[test]
    fn above_semantics() {
        let sp = SequencePair {
            pos: vec![1, 0],
            neg: vec![0, 1],
        };
        assert_eq!(sp_to_placement(&sp, &[(10, 10), (20, 10)]), vec![(0, 0), (0, 10)]);
    }

    #[test]
    fn single_block_at_origin() {
        let p = PlaceProblem {
            blocks: vec![block("a", 40, 30)],
            ..Default::default()
        };
        let pl = anneal(&p, &AnnealParams::default(), 0).unwrap();
        assert_eq!((pl.blocks[0].x, pl.blocks[0].y), (0, 0));
        assert_eq!(pl.cost, 1200);
    }

    #[test]
    fn two_squares_pack_tightly() {
        let p = PlaceProblem {
            blocks: vec![block("a", 10, 10), block("b", 10, 10)],
            ..Default::default()
        };
        let pl = anneal(&p, &AnnealParams::default(), 7).unwrap();
        assert_eq!(pl.width * pl.height, 200);
    }

    #[test]
    fn fused_symmetry_is_exact() {
        let p = PlaceProblem {
            blocks: vec![block("a", 80, 40), block("b", 80, 40), block("c", 160, 60), block("d", 40, 120)],
            pairs: vec![(0, 1)],
            self_symmetric: vec![2],
            ..Default::default()
        };
        for seed in 0..5 {
            let pl = anneal(&p, &AnnealParams::default(), seed).unwrap();
            assert!(symmetry_holds(&p, &pl));
            assert!(overlaps(&p, &pl).is_empty());
        }
    }

    #[test]
    fn unequal_pair_rejected() {
        let p = PlaceProblem {
            blocks: vec![block("a", 80, 40), block("b", 40, 40)],
            pairs: vec![(0, 1)],
            ..Default::default()
        };
        assert!(matches!(anneal(&p, &AnnealParams::default(), 0), Err(PlaceError::UnequalPair { .. })));
    }

    #[test]
    fn legalize_centers_pair_and_self() {
        let p = PlaceProblem {
            blocks: vec![block("a", 10, 10), block("b", 10, 10), block("s", 20, 10)],
            pairs: vec![(0, 1)],
            self_symmetric: vec![2],
            ..Default::default()
        };
        let pl = Placement {
            blocks: vec![
                BlockPlace {
                    name: "a".into(),
                    x: 0,
                    y: 0,
                    variant: 0,
                    mirrored: false,
                },
                BlockPlace {
                    name: "b".into(),
                    x: 40,
                    y: 0,
                    variant: 0,
                    mirrored: false,
                },
                BlockPlace {
                    name: "s".into(),
                    x: 15,
                    y: 0,
                    variant: 0,
                    mirrored: false,
                },
            ],
            ..Default::default()
        };
        let out = legalize_symmetry(&p, &pl, 5).unwrap();
        assert!(symmetry_holds(&p, &out), "{out:?}");
        assert!(overlaps(&p, &out).is_empty());
        let axis = out.axis.unwrap();
        let r = out.rect(&p, 2);
        assert_eq!(r.x0 + r.x1, 2 * axis);
    }

    #[test]
    fn seeded_runs_repeat() {
        let p = PlaceProblem {
            blocks: (0..5).map(|i| block(&format!("b{i}"), 10 + 10 * i, 50 - 5 * i)).collect(),
            ..Default::default()
        };
        let a = anneal(&p, &AnnealParams::default(), 3).unwrap();
        let b = anneal(&p, &AnnealParams::default(), 3).unwrap();
        assert_eq!(a, b);
    }
}
