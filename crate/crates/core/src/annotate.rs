//! Hierarchy recognition (primitives, arrays, modules) and constraint
//! generation.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{find_matches, signatures, CircuitGraph, GraphError};
use crate::netlist::{flatten, parse_spice, Device, DeviceKind, FlatNetlist, NetlistError, PinRole};

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("pattern {pattern}: {source}")]
    Pattern {
        pattern: String,
        #[source]
        source: NetlistError,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("pattern manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("constraint spec line {line}: {message}")]
    Spec { line: usize, message: String },
    #[error("constraint names unknown net `{0}`")]
    UnknownNet(String),
    #[error("constraint names unknown block `{0}`")]
    UnknownBlock(String),
}

/// Generator family of a leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveType {
    SingleMos,
    DiffPair,
    CurrentMirror,
    CapArray,
    ResArray,
}

impl PrimitiveType {
    pub fn parse(s: &str) -> Option<PrimitiveType> {
        Some(match s {
            "single_mos" => PrimitiveType::SingleMos,
            "diff_pair" => PrimitiveType::DiffPair,
            "current_mirror" => PrimitiveType::CurrentMirror,
            "res_array" => PrimitiveType::ResArray,
            "cap_array" => PrimitiveType::CapArray,
            _ => return None,
        })
    }

    pub fn single(kind: DeviceKind) -> PrimitiveType {
        match kind {
            DeviceKind::Nmos | DeviceKind::Pmos => PrimitiveType::SingleMos,
            DeviceKind::Res => PrimitiveType::ResArray,
            DeviceKind::Cap => PrimitiveType::CapArray,
        }
    }

    pub fn is_array(self) -> bool {
        matches!(self, PrimitiveType::ResArray | PrimitiveType::CapArray)
    }
}

/// A recognized primitive: devices are listed in pattern order (for arrays,
/// tap order).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub ptype: PrimitiveType,
    pub devices: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Array taps, each a list of device names.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub taps: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Module { path: String },
    Leaf(Leaf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierNode {
    pub name: String,
    pub kind: NodeKind,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HierTree {
    pub nodes: Vec<HierNode>,
    pub root: usize,
}

impl HierTree {
    pub fn find(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    pub fn leaf(&self, idx: usize) -> Option<&Leaf> {
        match &self.nodes[idx].kind {
            NodeKind::Leaf(l) => Some(l),
            NodeKind::Module { .. } => None,
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.leaf(i).is_some()).collect()
    }

    pub fn modules(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.leaf(i).is_none()).collect()
    }

    /// Modules ordered children before parents.
    pub fn modules_postorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.postorder(self.root, &mut out);
        out.retain(|&i| self.leaf(i).is_none());
        out
    }

    fn postorder(&self, idx: usize, out: &mut Vec<usize>) {
        for &c in &self.nodes[idx].children {
            self.postorder(c, out);
        }
        out.push(idx);
    }

    pub fn depth(&self, mut idx: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.nodes[idx].parent {
            idx = p;
            d += 1;
        }
        d
    }

    /// All devices at or below `idx`, sorted.
    pub fn devices_under(&self, idx: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![idx];
        while let Some(i) = stack.pop() {
            match &self.nodes[i].kind {
                NodeKind::Leaf(l) => out.extend(l.devices.iter().cloned()),
                NodeKind::Module { .. } => stack.extend(&self.nodes[i].children),
            }
        }
        out.sort();
        out
    }
}

/// A library pattern and the generator that lays it out.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub name: String,
    pub generator: PrimitiveType,
    pub graph: CircuitGraph,
}

#[derive(Debug, Clone, Default)]
pub struct PatternLibrary {
    pub patterns: Vec<Pattern>,
}

const BUILTIN_MANIFEST: &str = include_str!("../data/patterns/library.txt");
const BUILTIN_FILES: &[(&str, &str)] = &[
    ("cm_n.sp", include_str!("../data/patterns/cm_n.sp")),
    ("cm_p.sp", include_str!("../data/patterns/cm_p.sp")),
    ("dp_n.sp", include_str!("../data/patterns/dp_n.sp")),
    ("dp_p.sp", include_str!("../data/patterns/dp_p.sp")),
    ("dp_n_bs.sp", include_str!("../data/patterns/dp_n_bs.sp")),
    ("dp_p_bs.sp", include_str!("../data/patterns/dp_p_bs.sp")),
];

impl PatternLibrary {
    pub fn builtin() -> PatternLibrary {
        Self::from_manifest(BUILTIN_MANIFEST, |file| {
            BUILTIN_FILES
                .iter()
                .find(|(n, _)| *n == file)
                .map(|(_, t)| t.to_string())
                .ok_or_else(|| AnnotateError::Manifest {
                    line: 0,
                    message: format!("missing builtin {file}"),
                })
        })
        .expect("builtin pattern library is valid")
    }

    /// Loads `library.txt` and the pattern files it lists from `dir`.
    pub fn load_dir(dir: &Path) -> Result<PatternLibrary, AnnotateError> {
        let read = |p: PathBuf| fs::read_to_string(&p).map_err(|source| AnnotateError::Io { path: p, source });
        let manifest = read(dir.join("library.txt"))?;
        Self::from_manifest(&manifest, |file| read(dir.join(file)))
    }

    /// Manifest lines are `<pattern-file> <generator>`; `#` starts a comment.
    pub fn from_manifest(
        manifest: &str,
        mut read: impl FnMut(&str) -> Result<String, AnnotateError>,
    ) -> Result<PatternLibrary, AnnotateError> {
        let mut lib = PatternLibrary::default();
        for (i, raw) in manifest.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let [file, gen] = toks[..] else {
                return Err(AnnotateError::Manifest {
                    line: i + 1,
                    message: "expected `<file> <generator>`".into(),
                });
            };
            let generator = PrimitiveType::parse(gen).ok_or_else(|| AnnotateError::Manifest {
                line: i + 1,
                message: format!("unknown generator `{gen}`"),
            })?;
            let text = read(file)?;
            lib.add(&text, generator)?;
        }
        Ok(lib)
    }

    /// Adds every subcircuit of `text` as a pattern.
    pub fn add(&mut self, text: &str, generator: PrimitiveType) -> Result<(), AnnotateError> {
        let nl = parse_spice(text).map_err(|source| AnnotateError::Pattern {
            pattern: text.lines().next().unwrap_or("").to_string(),
            source,
        })?;
        for sc in &nl.subckts {
            let flat = flatten(&nl, &sc.name).map_err(|source| AnnotateError::Pattern {
                pattern: sc.name.clone(),
                source,
            })?;
            self.patterns.push(Pattern {
                name: sc.name.clone(),
                generator,
                graph: CircuitGraph::build(&flat),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayShape {
    Chain,
    Star,
}

/// A run of structurally identical passive taps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayGroup {
    pub shape: ArrayShape,
    pub kind: DeviceKind,
    pub taps: Vec<Vec<String>>,
    /// Chain nodes in order, or the single shared net of a star.
    pub nets: Vec<String>,
}

impl ArrayGroup {
    pub fn devices(&self) -> Vec<String> {
        self.taps.iter().flatten().cloned().collect()
    }
}

pub const MIN_ARRAY_TAPS: usize = 3;

/// Finds ladder chains and shared-net stars of resistors or capacitors.
/// Each device joins at most one group and groups never cross modules.
pub fn detect_arrays(flat: &FlatNetlist) -> Vec<ArrayGroup> {
    let mut by_module: BTreeMap<(&str, DeviceKind), Vec<&Device>> = BTreeMap::new();
    for d in &flat.devices {
        if matches!(d.kind, DeviceKind::Res | DeviceKind::Cap) && d.pins[0] != d.pins[1] {
            by_module.entry((FlatNetlist::module_of(&d.name), d.kind)).or_default().push(d);
        }
    }
    let mut out = Vec::new();
    for ((_, kind), mut devs) in by_module {
        devs.sort_by(|a, b| a.name.cmp(&b.name));
        let mut claimed: BTreeSet<String> = BTreeSet::new();
        for g in detect_chains(&devs, kind) {
            claimed.extend(g.devices());
            out.push(g);
        }
        let free: Vec<&Device> = devs.iter().copied().filter(|d| !claimed.contains(&d.name)).collect();
        out.extend(detect_stars(&free, kind));
    }
    out
}

fn detect_chains(devs: &[&Device], kind: DeviceKind) -> Vec<ArrayGroup> {
    let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
    for d in devs {
        for p in &d.pins {
            *degree.entry(p.as_str()).or_default() += 1;
        }
    }
    // Shunts hang off a node by a pin no other device of this kind touches.
    let mut shunts_at: BTreeMap<&str, Vec<&Device>> = BTreeMap::new();
    let mut series: Vec<&Device> = Vec::new();
    for d in devs {
        let (a, b) = (d.pins[0].as_str(), d.pins[1].as_str());
        match (degree[a] == 1, degree[b] == 1) {
            (true, true) => {}
            (true, false) => shunts_at.entry(b).or_default().push(d),
            (false, true) => shunts_at.entry(a).or_default().push(d),
            (false, false) => series.push(d),
        }
    }
    let mut adj: BTreeMap<&str, Vec<(&str, &Device)>> = BTreeMap::new();
    for d in &series {
        let (a, b) = (d.pins[0].as_str(), d.pins[1].as_str());
        adj.entry(a).or_default().push((b, d));
        adj.entry(b).or_default().push((a, d));
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::new();
    let nodes: Vec<&str> = adj.keys().copied().collect();
    for start in nodes {
        if seen.contains(start) {
            continue;
        }
        let mut comp = Vec::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(n) = stack.pop() {
            comp.push(n);
            for (m, _) in &adj[n] {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        let edges: usize = comp.iter().map(|n| adj[n].len()).sum::<usize>() / 2;
        let simple_path = edges + 1 == comp.len() && comp.iter().all(|n| adj[n].len() <= 2);
        if !simple_path || edges < 2 {
            continue;
        }
        let mut ends: Vec<&str> = comp.iter().copied().filter(|n| adj[n].len() == 1).collect();
        ends.sort();
        let mut best: Option<ArrayGroup> = None;
        for &from in &ends {
            let g = walk_chain(from, &adj, &shunts_at, kind);
            if best.as_ref().is_none_or(|b| g.taps.len() > b.taps.len()) {
                best = Some(g);
            }
        }
        if let Some(g) = best.filter(|g| g.taps.len() >= MIN_ARRAY_TAPS) {
            out.push(g);
        }
    }
    out
}

fn walk_chain<'a>(
    from: &'a str,
    adj: &BTreeMap<&'a str, Vec<(&'a str, &'a Device)>>,
    shunts_at: &BTreeMap<&str, Vec<&Device>>,
    kind: DeviceKind,
) -> ArrayGroup {
    let mut nets = vec![from.to_string()];
    let mut taps = Vec::new();
    let (mut prev, mut cur) = (None::<&str>, from);
    loop {
        let next = adj[cur].iter().find(|(m, _)| Some(*m) != prev);
        let Some(&(m, dev)) = next else { break };
        let shunts = shunts_at.get(m).map(Vec::as_slice).unwrap_or(&[]);
        if shunts.len() != 1 {
            break;
        }
        taps.push(vec![dev.name.clone(), shunts[0].name.clone()]);
        nets.push(m.to_string());
        prev = Some(cur);
        cur = m;
    }
    ArrayGroup {
        shape: ArrayShape::Chain,
        kind,
        taps,
        nets,
    }
}

fn detect_stars(devs: &[&Device], kind: DeviceKind) -> Vec<ArrayGroup> {
    let mut at: BTreeMap<&str, Vec<&Device>> = BTreeMap::new();
    for d in devs {
        for p in &d.pins {
            at.entry(p.as_str()).or_default().push(d);
        }
    }
    let mut claimed: BTreeSet<&str> = BTreeSet::new();
    let mut out = Vec::new();
    for (net, members) in at {
        let free: Vec<&Device> = members.into_iter().filter(|d| !claimed.contains(d.name.as_str())).collect();
        if free.len() < MIN_ARRAY_TAPS {
            continue;
        }
        claimed.extend(free.iter().map(|d| d.name.as_str()));
        out.push(ArrayGroup {
            shape: ArrayShape::Star,
            kind,
            taps: free.iter().map(|d| vec![d.name.clone()]).collect(),
            nets: vec![net.to_string()],
        });
    }
    out
}

fn leaf_name(module: &str, label: &str) -> String {
    if module.is_empty() {
        label.to_string()
    } else {
        format!("{module}/{label}")
    }
}

fn local(name: &str) -> &str {
    name.rsplit_once('/').map(|(_, l)| l).unwrap_or(name)
}

/// Builds the hierarchy: array groups first, then library patterns (largest
/// first, ties by name, matches in device-set order), then single devices.
pub fn recognize(flat: &FlatNetlist, lib: &PatternLibrary) -> Result<HierTree, AnnotateError> {
    let graph = CircuitGraph::build(flat);
    let mut claimed: BTreeSet<String> = BTreeSet::new();
    let mut leaves: Vec<(String, HierNode)> = Vec::new();
    let mut push_leaf = |module: &str, label: String, leaf: Leaf| {
        leaves.push((
            module.to_string(),
            HierNode {
                name: leaf_name(module, &label),
                kind: NodeKind::Leaf(leaf),
                children: Vec::new(),
                parent: None,
            },
        ));
    };

    for g in detect_arrays(flat) {
        let devices = g.devices();
        let module = FlatNetlist::module_of(&devices[0]).to_string();
        let ptype = if g.kind == DeviceKind::Res {
            PrimitiveType::ResArray
        } else {
            PrimitiveType::CapArray
        };
        claimed.extend(devices.iter().cloned());
        let label = format!("{}_{}", if g.kind == DeviceKind::Res { "rarray" } else { "carray" }, local(&devices[0]));
        push_leaf(
            &module,
            label,
            Leaf {
                ptype,
                devices,
                pattern: None,
                taps: g.taps,
            },
        );
    }

    let mut order: Vec<&Pattern> = lib.patterns.iter().collect();
    order.sort_by(|a, b| b.graph.devices.len().cmp(&a.graph.devices.len()).then(a.name.cmp(&b.name)));
    for pat in order {
        for m in find_matches(&graph, &pat.graph)? {
            let names: Vec<String> = m.devices.iter().map(|&d| graph.devices[d].name.clone()).collect();
            let module = FlatNetlist::module_of(&names[0]);
            if names.iter().any(|n| claimed.contains(n) || FlatNetlist::module_of(n) != module) {
                continue;
            }
            claimed.extend(names.iter().cloned());
            let module = module.to_string();
            push_leaf(
                &module,
                format!("{}_{}", pat.name, local(&names[0])),
                Leaf {
                    ptype: pat.generator,
                    devices: names,
                    pattern: Some(pat.name.clone()),
                    taps: Vec::new(),
                },
            );
        }
    }

    for d in &flat.devices {
        if claimed.contains(&d.name) {
            continue;
        }
        push_leaf(
            FlatNetlist::module_of(&d.name),
            local(&d.name).to_string(),
            Leaf {
                ptype: PrimitiveType::single(d.kind),
                devices: vec![d.name.clone()],
                pattern: None,
                taps: if d.kind.is_mos() { Vec::new() } else { vec![vec![d.name.clone()]] },
            },
        );
    }

    // Module skeleton from instance paths.
    let mut paths: BTreeSet<String> = BTreeSet::from([String::new()]);
    for (m, _) in &leaves {
        let mut p = m.as_str();
        loop {
            paths.insert(p.to_string());
            match p.rsplit_once('/') {
                Some((parent, _)) => p = parent,
                None if !p.is_empty() => p = "",
                None => break,
            }
        }
    }
    let mut tree = HierTree::default();
    let mut module_idx: BTreeMap<String, usize> = BTreeMap::new();
    for p in &paths {
        let idx = tree.nodes.len();
        tree.nodes.push(HierNode {
            name: if p.is_empty() { flat.top.clone() } else { p.clone() },
            kind: NodeKind::Module { path: p.clone() },
            children: Vec::new(),
            parent: None,
        });
        module_idx.insert(p.clone(), idx);
    }
    for p in &paths {
        if p.is_empty() {
            continue;
        }
        let parent = p.rsplit_once('/').map(|(q, _)| q).unwrap_or("");
        let (c, pi) = (module_idx[p], module_idx[parent]);
        tree.nodes[c].parent = Some(pi);
        tree.nodes[pi].children.push(c);
    }
    leaves.sort_by(|a, b| a.1.name.cmp(&b.1.name));
    for (m, mut node) in leaves {
        let pi = module_idx[&m];
        node.parent = Some(pi);
        let idx = tree.nodes.len();
        tree.nodes.push(node);
        tree.nodes[pi].children.push(idx);
    }
    tree.root = module_idx[""];
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymmetricPair {
    pub a: String,
    pub b: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetBudget {
    pub net: String,
    pub max_ohms: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shield {
    pub net: String,
    pub ground: String,
}

/// Geometric and electrical constraints over blocks (tree node names) and
/// nets. Symmetry axes are vertical.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub symmetric_pairs: Vec<SymmetricPair>,
    pub self_symmetric: Vec<String>,
    /// Blocks (or array devices) that must be laid out identically.
    pub matching_groups: Vec<Vec<String>>,
    /// Blocks sharing a bottom edge.
    pub alignment_groups: Vec<Vec<String>>,
    pub symmetric_nets: Vec<(String, String)>,
    pub input_pair: Option<(String, String)>,
    pub net_budgets: Vec<NetBudget>,
    pub shields: Vec<Shield>,
    pub diagnostics: Vec<String>,
}

impl ConstraintSet {
    pub fn partner(&self, block: &str) -> Option<&str> {
        self.symmetric_pairs.iter().find_map(|p| {
            if p.a == block {
                Some(p.b.as_str())
            } else if p.b == block {
                Some(p.a.as_str())
            } else {
                None
            }
        })
    }

    pub fn budget(&self, net: &str) -> Option<f64> {
        self.net_budgets.iter().find(|b| b.net == net).map(|b| b.max_ohms)
    }
}

/// User-supplied constraint file:
///
/// ```text
/// budget <net> <ohms>
/// input_pair <net> <net>
/// symmetry <block> <block>
/// self_symmetric <block>
/// shield <net> <ground-net>
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub budgets: Vec<NetBudget>,
    pub input_pair: Option<(String, String)>,
    pub symmetry: Vec<(String, String)>,
    pub self_symmetric: Vec<String>,
    pub shields: Vec<Shield>,
}

impl ConstraintSpec {
    pub fn parse(text: &str) -> Result<ConstraintSpec, AnnotateError> {
        let mut spec = ConstraintSpec::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| AnnotateError::Spec { line: i + 1, message };
            let t: Vec<&str> = line.split_whitespace().collect();
            match (t[0], t.len()) {
                ("budget", 3) => {
                    let ohms = crate::netlist::parse_value(t[2])
                        .filter(|v| *v > 0.0)
                        .ok_or_else(|| err(format!("bad resistance `{}`", t[2])))?;
                    spec.budgets.push(NetBudget {
                        net: t[1].into(),
                        max_ohms: ohms,
                    });
                }
                ("input_pair", 3) => spec.input_pair = Some((t[1].into(), t[2].into())),
                ("symmetry", 3) => spec.symmetry.push((t[1].into(), t[2].into())),
                ("self_symmetric", 2) => spec.self_symmetric.push(t[1].into()),
                ("shield", 3) => spec.shields.push(Shield {
                    net: t[1].into(),
                    ground: t[2].into(),
                }),
                (kw, n) => return Err(err(format!("cannot parse `{kw}` with {} arguments", n - 1))),
            }
        }
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ConstraintSpec, AnnotateError> {
        let text = fs::read_to_string(path).map_err(|source| AnnotateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Net budgets and shields, checked against the netlist.
pub fn gen_electrical_constraints(
    flat: &FlatNetlist,
    spec: &ConstraintSpec,
) -> Result<(Vec<NetBudget>, Vec<Shield>), AnnotateError> {
    let known = |n: &str| {
        if flat.nets.contains(n) {
            Ok(())
        } else {
            Err(AnnotateError::UnknownNet(n.to_string()))
        }
    };
    for b in &spec.budgets {
        known(&b.net)?;
    }
    for s in &spec.shields {
        known(&s.net)?;
        known(&s.ground)?;
    }
    Ok((spec.budgets.clone(), spec.shields.clone()))
}

/// Hash of the block's own subcircuit, independent of names.
pub fn block_signature(flat: &FlatNetlist, devices: &[String]) -> u64 {
    let set: BTreeSet<&str> = devices.iter().map(String::as_str).collect();
    let sub = FlatNetlist {
        top: String::new(),
        devices: flat.devices.iter().filter(|d| set.contains(d.name.as_str())).cloned().collect(),
        nets: flat
            .devices
            .iter()
            .filter(|d| set.contains(d.name.as_str()))
            .flat_map(|d| d.pins.iter().cloned())
            .collect(),
        ports: Vec::new(),
    };
    let g = CircuitGraph::build(&sub);
    let (mut sig, _) = signatures(&g, 2);
    sig.sort_unstable();
    let mut h = std::collections::hash_map::DefaultHasher::new();
    std::hash::Hash::hash(&sig, &mut h);
    std::hash::Hasher::finish(&h)
}

fn class(role: PinRole) -> u8 {
    match role {
        PinRole::Drain | PinRole::Source => 0,
        PinRole::Gate => 1,
        PinRole::Bulk => 2,
        PinRole::Plus | PinRole::Minus => 3,
    }
}

struct Lockstep<'a> {
    g: &'a CircuitGraph,
    sig1: Vec<u64>,
    sig2: Vec<u64>,
    dev: Vec<Option<usize>>,
    net: Vec<Option<usize>>,
    queue: VecDeque<(usize, usize)>,
    diagnostics: Vec<String>,
}

impl<'a> Lockstep<'a> {
    fn pair_nets(&mut self, a: usize, b: usize) {
        match (self.net[a], self.net[b]) {
            (None, None) => {
                self.net[a] = Some(b);
                self.net[b] = Some(a);
                if a != b {
                    self.queue.push_back((a, b));
                }
            }
            (Some(x), _) if x == b => {}
            _ => {}
        }
    }

    /// Devices on `n` grouped by (role class, kind, radius-1 signature).
    fn groups(&self, n: usize) -> BTreeMap<(u8, DeviceKind, u64), Vec<usize>> {
        let mut out: BTreeMap<(u8, DeviceKind, u64), Vec<usize>> = BTreeMap::new();
        for &e in &self.g.net_edges[n] {
            let edge = self.g.edges[e];
            if edge.role == PinRole::Bulk {
                continue;
            }
            let d = edge.device;
            let v = out
                .entry((class(edge.role), self.g.devices[d].kind, self.sig1[d]))
                .or_default();
            if !v.contains(&d) {
                v.push(d);
            }
        }
        for v in out.values_mut() {
            v.sort_by(|a, b| self.g.devices[*a].name.cmp(&self.g.devices[*b].name));
        }
        out
    }

    fn step(&mut self, n1: usize, n2: usize) {
        let (g1, g2) = (self.groups(n1), self.groups(n2));
        for (key, l1) in g1 {
            let Some(l2) = g2.get(&key) else { continue };
            let mut l1: Vec<usize> = l1.into_iter().filter(|d| self.dev[*d].is_none()).collect();
            let mut l2: Vec<usize> = l2.iter().copied().filter(|d| self.dev[*d].is_none()).collect();
            // A device touching both nets in the same class sits on the axis.
            let both: Vec<usize> = l1.iter().copied().filter(|d| l2.contains(d)).collect();
            for d in both {
                self.dev[d] = Some(d);
                l1.retain(|x| *x != d);
                l2.retain(|x| *x != d);
            }
            if l1.is_empty() || l1.len() != l2.len() {
                continue;
            }
            if l1.len() > 1 {
                self.diagnostics.push(format!(
                    "ambiguous pairing between nets {} and {}",
                    self.g.nets[n1].name, self.g.nets[n2].name
                ));
            }
            let mut pairs = Vec::new();
            let mut rest2 = l2.clone();
            let mut rest1 = Vec::new();
            for d1 in l1 {
                if let Some(pos) = rest2.iter().position(|d2| self.sig2[*d2] == self.sig2[d1]) {
                    pairs.push((d1, rest2.remove(pos)));
                } else {
                    rest1.push(d1);
                }
            }
            pairs.extend(rest1.into_iter().zip(rest2));
            for (d1, d2) in pairs {
                self.dev[d1] = Some(d2);
                self.dev[d2] = Some(d1);
                self.follow(d1, d2, n1, n2, key.0);
            }
        }
    }

    fn follow(&mut self, d1: usize, d2: usize, n1: usize, n2: usize, via: u8) {
        let pins = |d: usize| -> Vec<(PinRole, usize)> {
            self.g.device_edges[d].iter().map(|&e| (self.g.edges[e].role, self.g.edges[e].net)).collect()
        };
        let (p1, p2) = (pins(d1), pins(d2));
        let other = |p: &[(PinRole, usize)], n: usize, cls: u8| -> Option<usize> {
            let on: Vec<&(PinRole, usize)> = p.iter().filter(|(r, _)| class(*r) == cls).collect();
            let at = on.iter().position(|(_, x)| *x == n)?;
            on.iter().enumerate().find(|(i, _)| *i != at).map(|(_, (_, x))| *x)
        };
        let mut pairs = Vec::new();
        for &(r, x1) in &p1 {
            if class(r) == via && via != 1 {
                continue;
            }
            if let Some(&(_, x2)) = p2.iter().find(|(r2, _)| *r2 == r) {
                pairs.push((x1, x2));
            }
        }
        if via != 1 {
            if let (Some(a), Some(b)) = (other(&p1, n1, via), other(&p2, n2, via)) {
                pairs.push((a, b));
            }
        }
        for (a, b) in pairs {
            self.pair_nets(a, b);
        }
    }
}

/// Symmetric blocks, matching and alignment groups, and symmetric nets.
/// Pairing grows outward from the input pair through the circuit graph.
pub fn gen_geometric_constraints(
    tree: &HierTree,
    flat: &FlatNetlist,
    spec: &ConstraintSpec,
) -> Result<ConstraintSet, AnnotateError> {
    let g = CircuitGraph::build(flat);
    let mut cs = ConstraintSet::default();

    let input = match &spec.input_pair {
        Some((a, b)) => {
            for n in [a, b] {
                if !flat.nets.contains(n) {
                    return Err(AnnotateError::UnknownNet(n.clone()));
                }
            }
            Some((a.clone(), b.clone()))
        }
        None => tree
            .leaves()
            .into_iter()
            .filter(|&i| tree.leaf(i).map(|l| l.ptype) == Some(PrimitiveType::DiffPair))
            .min_by_key(|&i| (tree.depth(i), tree.nodes[i].name.clone()))
            .and_then(|i| {
                let l = tree.leaf(i)?;
                let gate = |d: &str| flat.device(d)?.pin(PinRole::Gate).map(str::to_string);
                Some((gate(&l.devices[0])?, gate(&l.devices[1])?))
            }),
    };

    let mut partner: BTreeMap<String, String> = BTreeMap::new();
    if let Some((a, b)) = &input {
        let (ia, ib) = (g.net_index(a).unwrap(), g.net_index(b).unwrap());
        let mut ls = Lockstep {
            g: &g,
            sig1: signatures(&g, 1).0,
            sig2: signatures(&g, 2).0,
            dev: vec![None; g.devices.len()],
            net: vec![None; g.nets.len()],
            queue: VecDeque::new(),
            diagnostics: Vec::new(),
        };
        ls.pair_nets(ia, ib);
        while let Some((n1, n2)) = ls.queue.pop_front() {
            ls.step(n1, n2);
        }
        for (d, p) in ls.dev.iter().enumerate() {
            if let Some(p) = p {
                partner.insert(g.devices[d].name.clone(), g.devices[*p].name.clone());
            }
        }
        for (n, p) in ls.net.iter().enumerate() {
            if let Some(p) = *p {
                if n < p {
                    cs.symmetric_nets.push((g.nets[n].name.clone(), g.nets[p].name.clone()));
                }
            }
        }
        cs.diagnostics.extend(ls.diagnostics);
        cs.symmetric_nets.sort();
    }
    cs.input_pair = input;

    let mut in_pair: BTreeSet<String> = BTreeSet::new();
    for m in tree.modules() {
        let children = &tree.nodes[m].children;
        let sets: Vec<Vec<String>> = children.iter().map(|&c| tree.devices_under(c)).collect();
        for (k, &c) in children.iter().enumerate() {
            let image: Option<Vec<String>> = sets[k].iter().map(|d| partner.get(d).cloned()).collect();
            let Some(mut image) = image else { continue };
            image.sort();
            let Some(j) = sets.iter().position(|s| *s == image) else { continue };
            let other = children[j];
            let (na, nb) = (&tree.nodes[c].name, &tree.nodes[other].name);
            if other == c {
                cs.self_symmetric.push(na.clone());
            } else if na < nb && block_signature(flat, &sets[k]) == block_signature(flat, &sets[j]) {
                cs.symmetric_pairs.push(SymmetricPair {
                    a: na.clone(),
                    b: nb.clone(),
                });
                in_pair.insert(na.clone());
                in_pair.insert(nb.clone());
            }
        }
    }

    let known_block = |b: &str| tree.find(b).ok_or_else(|| AnnotateError::UnknownBlock(b.to_string()));
    for (a, b) in &spec.symmetry {
        let (ia, ib) = (known_block(a)?, known_block(b)?);
        if tree.nodes[ia].parent != tree.nodes[ib].parent {
            cs.diagnostics.push(format!("symmetry {a} {b} ignored: blocks have different parents"));
            continue;
        }
        for x in [a, b] {
            if in_pair.contains(x) {
                cs.diagnostics.push(format!("symmetry {a} {b} replaces an inferred pair of {x}"));
                cs.symmetric_pairs.retain(|p| p.a != *x && p.b != *x);
            }
            cs.self_symmetric.retain(|s| s != x);
        }
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        cs.symmetric_pairs.push(SymmetricPair {
            a: a.clone(),
            b: b.clone(),
        });
        in_pair.insert(a.clone());
        in_pair.insert(b.clone());
    }
    for s in &spec.self_symmetric {
        known_block(s)?;
        if in_pair.contains(s) {
            cs.diagnostics.push(format!("self_symmetric {s} conflicts with a symmetric pair; ignored"));
        } else if !cs.self_symmetric.contains(s) {
            cs.self_symmetric.push(s.clone());
        }
    }

    // Matching: same-type leaves with identical parameters under one module.
    for m in tree.modules() {
        let mut groups: BTreeMap<(PrimitiveType, String, u64), Vec<String>> = BTreeMap::new();
        for &c in &tree.nodes[m].children {
            let Some(leaf) = tree.leaf(c) else { continue };
            if leaf.ptype.is_array() && leaf.taps.len() > 1 {
                let taps: Vec<String> = leaf.taps.iter().map(|t| t[0].clone()).collect();
                cs.matching_groups.push(taps);
                continue;
            }
            let params: Vec<String> = leaf
                .devices
                .iter()
                .filter_map(|d| flat.device(d))
                .map(|d| format!("{:?}", d.params))
                .collect();
            groups
                .entry((leaf.ptype, params.join(";"), block_signature(flat, &leaf.devices)))
                .or_default()
                .push(tree.nodes[c].name.clone());
        }
        for (_, v) in groups {
            if v.len() >= 2 {
                cs.matching_groups.push(v);
            }
        }
    }
    for p in &cs.symmetric_pairs {
        cs.alignment_groups.push(vec![p.a.clone(), p.b.clone()]);
    }

    cs.symmetric_pairs.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    cs.self_symmetric.sort();
    cs.self_symmetric.dedup();
    cs.matching_groups.sort();
    cs.alignment_groups.sort();
    Ok(cs)
}

/// Flat netlist, hierarchy and constraints: the annotated design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub flat: FlatNetlist,
    pub tree: HierTree,
    pub constraints: ConstraintSet,
}

pub fn annotate(flat: &FlatNetlist, lib: &PatternLibrary, spec: &ConstraintSpec) -> Result<Annotation, AnnotateError> {
    let tree = recognize(flat, lib)?;
    let mut constraints = gen_geometric_constraints(&tree, flat, spec)?;
    let (budgets, shields) = gen_electrical_constraints(flat, spec)?;
    constraints.net_budgets = budgets;
    constraints.shields = shields;
    Ok(Annotation {
        flat: flat.clone(),
        tree,
        constraints,
    })
}
