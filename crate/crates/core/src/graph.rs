//! Bipartite circuit graph and exact labeled subgraph matching.
//!
//! Device vertices carry their kind; net vertices are unlabeled apart from
//! degree. Matching treats MOS drain and source as an interchangeable role
//! pair; bulk pins are matched like any other pin.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{DeviceKind, FlatNetlist, PinRole};

pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("subgraph search exceeded its budget of {budget} expanded nodes")]
    BudgetExceeded { budget: u64 },
    #[error("pattern graph is empty")]
    EmptyPattern,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceVertex {
    pub name: String,
    pub kind: DeviceKind,
    /// Sorted `(param, value)` list; ignored during matching.
    pub fingerprint: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetVertex {
    pub name: String,
    pub degree: usize,
    pub is_port: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub device: usize,
    pub role: PinRole,
    pub net: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CircuitGraph {
    pub devices: Vec<DeviceVertex>,
    pub nets: Vec<NetVertex>,
    pub edges: Vec<Edge>,
    /// Edge indices per device, in pin order.
    pub device_edges: Vec<Vec<usize>>,
    /// Edge indices per net.
    pub net_edges: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vertex {
    Device(usize),
    Net(usize),
}

impl CircuitGraph {
    pub fn build(flat: &FlatNetlist) -> CircuitGraph {
        let nets: Vec<&String> = flat.nets.iter().collect();
        let index: BTreeMap<&str, usize> = nets.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let ports: BTreeSet<&str> = flat.ports.iter().map(String::as_str).collect();
        let mut g = CircuitGraph {
            nets: nets
                .iter()
                .map(|n| NetVertex {
                    name: n.to_string(),
                    degree: 0,
                    is_port: ports.contains(n.as_str()),
                })
                .collect(),
            net_edges: vec![Vec::new(); nets.len()],
            ..Default::default()
        };
        for (di, d) in flat.devices.iter().enumerate() {
            g.devices.push(DeviceVertex {
                name: d.name.clone(),
                kind: d.kind,
                fingerprint: d.params.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            });
            let mut mine = Vec::new();
            for (role, net) in d.kind.pin_roles().iter().zip(&d.pins) {
                let ni = index[net.as_str()];
                let ei = g.edges.len();
                g.edges.push(Edge {
                    device: di,
                    role: *role,
                    net: ni,
                });
                g.net_edges[ni].push(ei);
                g.nets[ni].degree += 1;
                mine.push(ei);
            }
            g.device_edges.push(mine);
        }
        g
    }

    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.name == name)
    }

    pub fn net_index(&self, name: &str) -> Option<usize> {
        self.nets.iter().position(|n| n.name == name)
    }

    /// Net attached to `device` through `role`.
    pub fn pin_net(&self, device: usize, role: PinRole) -> Option<usize> {
        self.device_edges[device]
            .iter()
            .map(|&e| &self.edges[e])
            .find(|e| e.role == role)
            .map(|e| e.net)
    }

    /// Number of pin connections on a net.
    pub fn net_degree(&self, net: usize) -> usize {
        self.net_edges[net].len()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph circuit {\n");
        for (i, d) in self.devices.iter().enumerate() {
            let _ = writeln!(s, "  d{i} [label=\"{} ({})\", shape=box];", d.name, d.kind);
        }
        for (i, n) in self.nets.iter().enumerate() {
            let shape = if n.is_port { "doublecircle" } else { "ellipse" };
            let _ = writeln!(s, "  n{i} [label=\"{}\", shape={shape}];", n.name);
        }
        for e in &self.edges {
            let _ = writeln!(s, "  d{} -- n{} [label=\"{}\"];", e.device, e.net, e.role);
        }
        s.push_str("}\n");
        s
    }
}

/// A pattern occurrence in a target graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Match {
    /// Target device for each pattern device.
    pub devices: Vec<usize>,
    /// Target net for each pattern net.
    pub nets: Vec<usize>,
}

impl Match {
    pub fn device_set(&self) -> Vec<usize> {
        let mut v = self.devices.clone();
        v.sort_unstable();
        v
    }
}

fn swap_role(role: PinRole, swapped: bool) -> PinRole {
    match (role, swapped) {
        (PinRole::Drain, true) => PinRole::Source,
        (PinRole::Source, true) => PinRole::Drain,
        (r, _) => r,
    }
}

struct Search<'a> {
    target: &'a CircuitGraph,
    pattern: &'a CircuitGraph,
    order: Vec<usize>,
    dev_map: Vec<Option<usize>>,
    net_map: Vec<Option<usize>>,
    net_used: Vec<bool>,
    dev_used: Vec<bool>,
    expanded: u64,
    budget: u64,
    seen: HashSet<Vec<usize>>,
    out: Vec<Match>,
}

impl<'a> Search<'a> {
    fn run(&mut self, depth: usize) -> Result<(), GraphError> {
        if depth == self.order.len() {
            self.record();
            return Ok(());
        }
        let p = self.order[depth];
        let kind = self.pattern.devices[p].kind;
        let candidates = self.candidates(p);
        for t in candidates {
            if self.dev_used[t] || self.target.devices[t].kind != kind {
                continue;
            }
            self.expanded += 1;
            if self.expanded > self.budget {
                return Err(GraphError::BudgetExceeded { budget: self.budget });
            }
            let orientations: &[bool] = if kind.is_mos() { &[false, true] } else { &[false] };
            for &swapped in orientations {
                if let Some(bound) = self.try_bind(p, t, swapped) {
                    self.dev_used[t] = true;
                    self.dev_map[p] = Some(t);
                    self.run(depth + 1)?;
                    self.dev_map[p] = None;
                    self.dev_used[t] = false;
                    for pn in bound {
                        let tn = self.net_map[pn].take().unwrap();
                        self.net_used[tn] = false;
                    }
                }
            }
        }
        Ok(())
    }

    fn candidates(&self, p: usize) -> Vec<usize> {
        for &e in &self.pattern.device_edges[p] {
            let edge = self.pattern.edges[e];
            if let Some(tn) = self.net_map[edge.net] {
                let mut v: Vec<usize> = self.target.net_edges[tn]
                    .iter()
                    .map(|&te| self.target.edges[te].device)
                    .collect();
                v.sort_unstable();
                v.dedup();
                return v;
            }
        }
        (0..self.target.devices.len()).collect()
    }

    /// Bind the pins of pattern device `p` to target `t`; returns the pattern
    /// nets newly mapped, or `None` on conflict (leaving no partial state).
    fn try_bind(&mut self, p: usize, t: usize, swapped: bool) -> Option<Vec<usize>> {
        let mut bound = Vec::new();
        for &e in &self.pattern.device_edges[p] {
            let edge = self.pattern.edges[e];
            let tn = self.target.pin_net(t, swap_role(edge.role, swapped));
            let ok = match (tn, self.net_map[edge.net]) {
                (Some(tn), Some(mapped)) => mapped == tn,
                (Some(tn), None) => {
                    if self.net_used[tn] {
                        false
                    } else {
                        self.net_map[edge.net] = Some(tn);
                        self.net_used[tn] = true;
                        bound.push(edge.net);
                        true
                    }
                }
                (None, _) => false,
            };
            if !ok {
                for pn in bound {
                    let tn = self.net_map[pn].take().unwrap();
                    self.net_used[tn] = false;
                }
                return None;
            }
        }
        Some(bound)
    }

    fn record(&mut self) {
        for (pn, tn) in self.net_map.iter().enumerate() {
            if let Some(tn) = tn {
                if !self.pattern.nets[pn].is_port && self.pattern.net_degree(pn) != self.target.net_degree(*tn) {
                    return;
                }
            }
        }
        let m = Match {
            devices: self.dev_map.iter().map(|d| d.unwrap()).collect(),
            nets: self.net_map.iter().map(|n| n.expect("pattern net without pins")).collect(),
        };
        if self.seen.insert(m.device_set()) {
            self.out.push(m);
        }
    }
}

/// All occurrences of `pattern` in `target`, one per distinct target device
/// set, sorted by that set.
pub fn find_matches(target: &CircuitGraph, pattern: &CircuitGraph) -> Result<Vec<Match>, GraphError> {
    find_matches_with_budget(target, pattern, DEFAULT_SEARCH_BUDGET)
}

pub fn find_matches_with_budget(
    target: &CircuitGraph,
    pattern: &CircuitGraph,
    budget: u64,
) -> Result<Vec<Match>, GraphError> {
    if pattern.devices.is_empty() {
        return Err(GraphError::EmptyPattern);
    }
    // Cheap label pruning before any search.
    let mut need: BTreeMap<DeviceKind, usize> = BTreeMap::new();
    for d in &pattern.devices {
        *need.entry(d.kind).or_default() += 1;
    }
    for (kind, n) in &need {
        if target.devices.iter().filter(|d| d.kind == *kind).count() < *n {
            return Ok(Vec::new());
        }
    }
    let mut search = Search {
        target,
        pattern,
        order: search_order(pattern),
        dev_map: vec![None; pattern.devices.len()],
        net_map: vec![None; pattern.nets.len()],
        net_used: vec![false; target.nets.len()],
        dev_used: vec![false; target.devices.len()],
        expanded: 0,
        budget,
        seen: HashSet::new(),
        out: Vec::new(),
    };
    search.run(0)?;
    let mut out = search.out;
    out.sort_by_key(|m| m.device_set());
    Ok(out)
}

/// Breadth-first over nets so each new device touches a mapped net.
fn search_order(p: &CircuitGraph) -> Vec<usize> {
    let n = p.devices.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    for start in 0..n {
        if placed[start] {
            continue;
        }
        placed[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(d) = queue.pop_front() {
            order.push(d);
            for &e in &p.device_edges[d] {
                let edge = p.edges[e];
                for &e2 in &p.net_edges[edge.net] {
                    let other = p.edges[e2];
                    if !placed[other.device] {
                        placed[other.device] = true;
                        queue.push_back(other.device);
                    }
                }
            }
        }
    }
    order
}

fn role_class(role: PinRole) -> u8 {
    match role {
        PinRole::Drain | PinRole::Source => 0,
        PinRole::Gate => 1,
        PinRole::Bulk => 2,
        PinRole::Plus | PinRole::Minus => 3,
    }
}

fn hash_of<T: Hash>(v: &T) -> u64 {
    let mut h = DefaultHasher::new();
    v.hash(&mut h);
    h.finish()
}

/// Refined labels of every device and net after `radius` rounds.
pub fn signatures(g: &CircuitGraph, radius: usize) -> (Vec<u64>, Vec<u64>) {
    let mut dev: Vec<u64> = g.devices.iter().map(|d| hash_of(&(0u8, d.kind))).collect();
    let mut net: Vec<u64> = vec![hash_of(&(1u8, "net")); g.nets.len()];
    for _ in 0..radius {
        let new_dev: Vec<u64> = (0..g.devices.len())
            .map(|d| {
                let mut nb: Vec<(u8, u64)> = g.device_edges[d]
                    .iter()
                    .map(|&e| (role_class(g.edges[e].role), net[g.edges[e].net]))
                    .collect();
                nb.sort_unstable();
                hash_of(&(dev[d], nb))
            })
            .collect();
        let new_net: Vec<u64> = (0..g.nets.len())
            .map(|n| {
                let mut nb: Vec<(u8, u64)> = g.net_edges[n]
                    .iter()
                    .map(|&e| (role_class(g.edges[e].role), dev[g.edges[e].device]))
                    .collect();
                nb.sort_unstable();
                hash_of(&(net[n], nb))
            })
            .collect();
        dev = new_dev;
        net = new_net;
    }
    (dev, net)
}

/// Label-and-topology hash of the radius-`radius` neighborhood of `v`.
pub fn structural_signature(g: &CircuitGraph, v: Vertex, radius: usize) -> u64 {
    let (dev, net) = signatures(g, radius);
    match v {
        Vertex::Device(i) => dev[i],
        Vertex::Net(i) => net[i],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{flatten, parse_spice};

    fn graph_of(text: &str) -> CircuitGraph {
        let nl = parse_spice(text).unwrap();
        let top = nl.top.clone().unwrap();
        CircuitGraph::build(&flatten(&nl, &top).unwrap())
    }

    #[test]
    fn single_nmos_graph() {
        let g = graph_of("m1 d g s b nmos\n");
        assert_eq!(g.devices.len(), 1);
        assert_eq!(g.nets.len(), 4);
        assert_eq!(g.edges.len(), 4);
        assert!(g.nets.iter().all(|n| n.degree == 1));
    }

    #[test]
    fn empty_graph() {
        let g = CircuitGraph::build(&FlatNetlist::default());
        assert!(g.devices.is_empty() && g.nets.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn single_device_pattern_counts_labels() {
        let t = graph_of("m1 a b c c nmos\nm2 d e f f nmos\nm3 g h i i nmos\nm4 j k l l pmos\n");
        let p = graph_of(".subckt p d g s\nm1 d g s s nmos\n.ends\n");
        assert_eq!(find_matches(&t, &p).unwrap().len(), 3);
        let r = graph_of(".subckt p a b\nr1 a b 1\n.ends\n");
        assert!(find_matches(&t, &r).unwrap().is_empty());
    }

    #[test]
    fn budget_is_reported() {
        let t = graph_of("m1 a b c c nmos\nm2 d e f f nmos\nm3 g h i i nmos\n");
        let p = graph_of(".subckt p d g s\nm1 d g s s nmos\n.ends\n");
        assert_eq!(
            find_matches_with_budget(&t, &p, 2),
            Err(GraphError::BudgetExceeded { budget: 2 })
        );
    }

    #[test]
    fn signatures_separate_polarity() {
        let g = graph_of("m1 a b c c nmos\nm2 a b c c pmos\n");
        for r in 0..3 {
            assert_ne!(
                structural_signature(&g, Vertex::Device(0), r),
                structural_signature(&g, Vertex::Device(1), r)
            );
        }
    }

    #[test]
    fn mirrored_pair_signatures_match() {
        let g = graph_of("m1 x inp t gnd nmos\nm2 y inn t gnd nmos\n");
        assert_eq!(
            structural_signature(&g, Vertex::Device(0), 1),
            structural_signature(&g, Vertex::Device(1), 1)
        );
    }

    #[test]
    fn dot_dump_lists_everything() {
        let g = graph_of("m1 d g s b nmos\n");
        let dot = g.to_dot();
        assert!(dot.starts_with("graph circuit {"));
        assert_eq!(dot.matches(" -- ").count(), 4);
    }
}
