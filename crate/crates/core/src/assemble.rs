//! Bottom-up hierarchical assembly: place each module's children, wrap the
//! result in a box with a routing halo, then route the module's nets.
//!
//! Placement depends only on block sizes and child pins, never on routes, so
//! the floorplan of the whole tree can be computed first and routed later.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{Annotation, NodeKind};
use crate::geom::Rect;
use crate::layout::{flatten_layout, AbstractLayout, Child, Transform};
use crate::pdk::{Direction, Pdk};
use crate::place::{anneal, AnnealParams, Block, BlockVariant, PlaceError, PlaceProblem, Placement};
use crate::primgen::{gen_variants, PrimgenError, PrimitiveSpec};
use crate::route::{route_module, Cell, NetRequest, Route, RouteError, RouteParams, RoutingGrid};

#[derive(Debug, Error)]
pub enum AssembleError {
    #[error("block {block}: {source}")]
    Primgen {
        block: String,
        #[source]
        source: PrimgenError,
    },
    #[error("module {module}: {source}")]
    Place {
        module: String,
        #[source]
        source: PlaceError,
    },
    #[error("module {module}: {source}")]
    Route {
        module: String,
        #[source]
        source: RouteError,
    },
    #[error("floorplan does not match the hierarchy: {0}")]
    Floorplan(String),
    #[error("grid: {0}")]
    Grid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyParams {
    /// Layout variants generated per leaf.
    pub variants: usize,
    pub anneal: AnnealParams,
    pub route: RouteParams,
    pub seed: u64,
    /// Free routing tracks between a module's blocks and its margin.
    pub halo: i64,
}

impl Default for AssemblyParams {
    fn default() -> Self {
        AssemblyParams {
            variants: 3,
            anneal: AnnealParams::default(),
            route: RouteParams::default(),
            seed: 0,
            halo: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulePlan {
    pub name: String,
    /// Child node names in placement block order.
    pub children: Vec<String>,
    /// A single-child module reuses its child's layout as is.
    pub passthrough: bool,
    pub placement: Placement,
    pub cols: i64,
    pub rows: i64,
    /// Lower-left corner of the placement inside the module box, nm.
    pub origin: (i64, i64),
    /// Symmetry axis in module coordinates, nm.
    pub axis: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Floorplan {
    /// Children before parents.
    pub modules: Vec<ModulePlan>,
}

impl Floorplan {
    pub fn module(&self, name: &str) -> Option<&ModulePlan> {
        self.modules.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assembly {
    pub layout: AbstractLayout,
    pub floorplan: Floorplan,
    /// Routes per module.
    pub routes: BTreeMap<String, Vec<Route>>,
    pub diagnostics: Vec<String>,
}

impl Assembly {
    pub fn all_routes(&self) -> Vec<Route> {
        self.routes.values().flatten().cloned().collect()
    }
}

/// Layout variants for every leaf, keyed by node name.
pub fn generate_leaves(ann: &Annotation, pdk: &Pdk, k: usize) -> Result<BTreeMap<String, Vec<AbstractLayout>>, AssembleError> {
    let mut out = BTreeMap::new();
    for idx in ann.tree.leaves() {
        let node = &ann.tree.nodes[idx];
        let leaf = ann.tree.leaf(idx).expect("leaf node");
        let err = |source| AssembleError::Primgen {
            block: node.name.clone(),
            source,
        };
        let spec = PrimitiveSpec::from_leaf(&node.name, leaf, &ann.flat, pdk).map_err(err)?;
        out.insert(node.name.clone(), gen_variants(&spec, pdk, k.max(1)).map_err(err)?);
    }
    Ok(out)
}

fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Doubled pin centers relative to the layout's lower-left corner.
fn pin_centers(l: &AbstractLayout) -> BTreeMap<String, (i64, i64)> {
    l.pins
        .iter()
        .filter_map(|(net, shapes)| {
            let r = shapes.iter().map(|p| p.rect).reduce(|a, b| a.union(&b))?;
            let (cx, cy) = r.center2();
            Some((net.clone(), (cx - 2 * l.bbox.x0, cy - 2 * l.bbox.y0)))
        })
        .collect()
}

struct Ctx<'a> {
    ann: &'a Annotation,
    pdk: &'a Pdk,
    params: &'a AssemblyParams,
    /// Net to the devices using it.
    users: BTreeMap<&'a str, BTreeSet<&'a str>>,
}

impl<'a> Ctx<'a> {
    fn new(ann: &'a Annotation, pdk: &'a Pdk, params: &'a AssemblyParams) -> Ctx<'a> {
        let mut users: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for d in &ann.flat.devices {
            for p in &d.pins {
                users.entry(p.as_str()).or_default().insert(d.name.as_str());
            }
        }
        Ctx { ann, pdk, params, users }
    }

    fn name(&self, idx: usize) -> &str {
        &self.ann.tree.nodes[idx].name
    }

    fn pitches(&self) -> Result<(i64, i64), AssembleError> {
        let v = self.pdk.uniform_pitch(Direction::Vertical);
        let h = self.pdk.uniform_pitch(Direction::Horizontal);
        match (v, h) {
            (Some((pv, ov)), Some((ph, oh))) if 2 * ov == pv && 2 * oh == ph => Ok((pv, ph)),
            _ => Err(AssembleError::Grid("layers need uniform pitches with half-pitch offsets".into())),
        }
    }

    /// Nets of module `idx` that are used outside it.
    fn exported(&self, idx: usize) -> BTreeSet<String> {
        let under: BTreeSet<String> = self.ann.tree.devices_under(idx).into_iter().collect();
        let is_root = idx == self.ann.tree.root;
        let mut out = BTreeSet::new();
        for net in under.iter().filter_map(|d| self.ann.flat.device(d)).flat_map(|d| d.pins.iter()) {
            let outside = self.users.get(net.as_str()).is_some_and(|u| u.iter().any(|d| !under.contains(*d)));
            let port = is_root && self.ann.flat.ports.contains(net);
            if outside || port {
                out.insert(net.clone());
            }
        }
        out
    }

    fn problem(&self, idx: usize, variants: &[Vec<AbstractLayout>]) -> PlaceProblem {
        let tree = &self.ann.tree;
        let cs = &self.ann.constraints;
        let kids: Vec<&str> = tree.nodes[idx].children.iter().map(|&c| self.name(c)).collect();
        let pos = |n: &str| kids.iter().position(|k| *k == n);
        let blocks = kids
            .iter()
            .zip(variants)
            .map(|(name, vs)| Block {
                name: name.to_string(),
                variants: vs
                    .iter()
                    .map(|l| BlockVariant {
                        w: l.bbox.width(),
                        h: l.bbox.height(),
                        pins: pin_centers(l),
                    })
                    .collect(),
            })
            .collect();
        let pairs = cs
            .symmetric_pairs
            .iter()
            .filter_map(|p| Some((pos(&p.a)?, pos(&p.b)?)))
            .collect();
        let self_symmetric = cs.self_symmetric.iter().filter_map(|s| pos(s)).collect();
        let align = cs
            .alignment_groups
            .iter()
            .map(|g| g.iter().filter_map(|b| pos(b)).collect::<Vec<_>>())
            .filter(|g| g.len() >= 2)
            .collect();
        let nets: BTreeSet<&str> = variants.iter().flatten().flat_map(|l| l.pins.keys()).map(String::as_str).collect();
        let budgets = cs
            .net_budgets
            .iter()
            .filter(|b| nets.contains(b.net.as_str()))
            .map(|b| (b.net.clone(), b.max_ohms))
            .collect();
        PlaceProblem {
            blocks,
            pairs,
            self_symmetric,
            align,
            budgets,
            unit_r: self.pdk.min_unit_r(),
        }
    }

    fn plan(&self, idx: usize, variants: &[Vec<AbstractLayout>]) -> Result<ModulePlan, AssembleError> {
        let name = self.name(idx).to_string();
        let children: Vec<String> = self.ann.tree.nodes[idx].children.iter().map(|&c| self.name(c).to_string()).collect();
        if children.len() == 1 {
            let l = &variants[0][0];
            return Ok(ModulePlan {
                name,
                children,
                passthrough: true,
                placement: Placement::default(),
                cols: 0,
                rows: 0,
                origin: (l.bbox.x0, l.bbox.y0),
                axis: None,
            });
        }
        let (pv, ph) = self.pitches()?;
        let problem = self.problem(idx, variants);
        let seed = self.params.seed ^ stable_hash(&name);
        let placement = anneal(&problem, &self.params.anneal, seed).map_err(|source| AssembleError::Place {
            module: name.clone(),
            source,
        })?;
        let ring = self.pdk.block_margin().max(1) + self.params.halo;
        let mut cols = placement.width / pv + 2 * ring;
        if cols % 2 == 1 {
            cols += 1;
        }
        let rows = placement.height / ph + 2 * ring;
        let origin = (ring * pv, ring * ph);
        Ok(ModulePlan {
            name,
            children,
            passthrough: false,
            axis: placement.axis.map(|a| a + origin.0),
            placement,
            cols,
            rows,
            origin,
        })
    }

    /// Module layout with placed children and exported pins, no routes.
    fn shell(&self, idx: usize, plan: &ModulePlan, chosen: Vec<AbstractLayout>) -> Result<AbstractLayout, AssembleError> {
        if plan.passthrough {
            return Ok(chosen.into_iter().next().expect("one child"));
        }
        let (pv, ph) = self.pitches()?;
        let mut l = AbstractLayout::new(&plan.name, Rect::new(0, 0, plan.cols * pv, plan.rows * ph));
        let exported = self.exported(idx);
        for (bp, child) in plan.placement.blocks.iter().zip(chosen) {
            let t = Transform {
                dx: plan.origin.0 + bp.x - child.bbox.x0,
                dy: plan.origin.1 + bp.y - child.bbox.y0,
                mirror: bp.mirrored,
            };
            for (net, pins) in &child.pins {
                if exported.contains(net) {
                    for p in pins {
                        l.add_pin(net, &p.layer, t.apply(&child.bbox, &p.rect));
                    }
                }
            }
            l.children.push(Child {
                instance: bp.name.clone(),
                layout: child,
                transform: t,
            });
        }
        l.props.insert("blocks".into(), plan.placement.blocks.len() as f64);
        l.normalize();
        Ok(l)
    }

    fn route(&self, plan: &ModulePlan, layout: &mut AbstractLayout) -> Result<(Vec<Route>, Vec<String>), AssembleError> {
        let pdk = self.pdk;
        let err = |source| AssembleError::Route {
            module: plan.name.clone(),
            source,
        };
        let margin = pdk.block_margin().max(1);
        let mut grid = RoutingGrid::new(pdk, plan.cols, plan.rows, pdk.num_layers(), margin).map_err(err)?;
        let mut diagnostics = Vec::new();
        let mut terminals: BTreeMap<String, Vec<Vec<Cell>>> = BTreeMap::new();
        for child in &layout.children {
            let placed = child.placed_bbox();
            let t = child.transform;
            for s in flatten_layout(&child.layout) {
                let Some(li) = pdk.layer_index(&s.layer) else { continue };
                let r = t.apply(&child.layout.bbox, &s.rect);
                match (RoutingGrid::wire_cells(pdk, li, &r), s.net.as_deref()) {
                    (Some(cells), Some(net)) => cells.into_iter().for_each(|c| grid.set_fixed(c, net)),
                    _ => grid.block_rect(li, &r.expand(pdk.layer(li).pitch, pdk.layer(li).pitch)),
                }
            }
            for li in 0..2.min(pdk.num_layers()) {
                grid.block_rect(li, &placed);
            }
            for (net, pins) in &child.layout.pins {
                let mut cells = Vec::new();
                for p in pins {
                    let Some(li) = pdk.layer_index(&p.layer) else { continue };
                    match RoutingGrid::wire_cells(pdk, li, &t.apply(&child.layout.bbox, &p.rect)) {
                        Some(c) => cells.extend(c),
                        None => diagnostics.push(format!("{}: pin {net} of {} is off grid", plan.name, child.instance)),
                    }
                }
                if !cells.is_empty() {
                    terminals.entry(net.clone()).or_default().push(cells);
                }
            }
        }
        let cs = &self.ann.constraints;
        let shields: BTreeMap<&str, &str> = cs.shields.iter().map(|s| (s.net.as_str(), s.ground.as_str())).collect();
        let requests: Vec<NetRequest> = terminals
            .into_iter()
            .filter(|(net, t)| t.len() >= 2 || shields.values().any(|g| g == net))
            .map(|(name, terminals)| NetRequest {
                budget: cs.budget(&name),
                shield: shields
                    .get(name.as_str())
                    .filter(|_| terminals.len() >= 2)
                    .map(|g| g.to_string()),
                name,
                terminals,
            })
            .collect();
        let out = route_module(&mut grid, pdk, &requests, &cs.symmetric_nets, plan.axis, &self.params.route).map_err(err)?;
        for r in &out.routes {
            for s in r.shapes(pdk).map_err(err)? {
                layout.shapes.push(s);
            }
        }
        layout.normalize();
        diagnostics.extend(out.diagnostics);
        Ok((out.routes, diagnostics))
    }

    fn child_plans_ok(&self, fp: &Floorplan) -> Result<(), AssembleError> {
        for idx in self.ann.tree.modules_postorder() {
            let plan = fp
                .module(self.name(idx))
                .ok_or_else(|| AssembleError::Floorplan(format!("no plan for module {}", self.name(idx))))?;
            let kids: Vec<&str> = self.ann.tree.nodes[idx].children.iter().map(|&c| self.name(c)).collect();
            if plan.children != kids || (!plan.passthrough && plan.placement.blocks.len() != kids.len()) {
                return Err(AssembleError::Floorplan(format!("children of {} differ", plan.name)));
            }
        }
        Ok(())
    }
}

fn child_variants(
    ctx: &Ctx<'_>,
    idx: usize,
    leaves: &BTreeMap<String, Vec<AbstractLayout>>,
    modules: &BTreeMap<String, AbstractLayout>,
) -> Result<Vec<Vec<AbstractLayout>>, AssembleError> {
    ctx.ann.tree.nodes[idx]
        .children
        .iter()
        .map(|&c| {
            let name = ctx.name(c);
            match &ctx.ann.tree.nodes[c].kind {
                NodeKind::Leaf(_) => leaves.get(name).cloned(),
                NodeKind::Module { .. } => modules.get(name).cloned().map(|l| vec![l]),
            }
            .ok_or_else(|| AssembleError::Floorplan(format!("no layout for block {name}")))
        })
        .collect()
}

fn chosen(plan: &ModulePlan, variants: Vec<Vec<AbstractLayout>>) -> Result<Vec<AbstractLayout>, AssembleError> {
    if plan.passthrough {
        return Ok(variants.into_iter().map(|mut v| v.swap_remove(0)).collect());
    }
    plan.placement
        .blocks
        .iter()
        .zip(variants)
        .map(|(bp, vs)| {
            vs.get(bp.variant)
                .cloned()
                .ok_or_else(|| AssembleError::Floorplan(format!("block {} has no variant {}", bp.name, bp.variant)))
        })
        .collect()
}

/// Places every module bottom-up.
pub fn plan_hierarchy(
    ann: &Annotation,
    leaves: &BTreeMap<String, Vec<AbstractLayout>>,
    pdk: &Pdk,
    params: &AssemblyParams,
) -> Result<Floorplan, AssembleError> {
    let ctx = Ctx::new(ann, pdk, params);
    let mut shells = BTreeMap::new();
    let mut fp = Floorplan::default();
    for idx in ann.tree.modules_postorder() {
        let variants = child_variants(&ctx, idx, leaves, &shells)?;
        let plan = ctx.plan(idx, &variants)?;
        let shell = ctx.shell(idx, &plan, chosen(&plan, variants)?)?;
        shells.insert(plan.name.clone(), shell);
        fp.modules.push(plan);
    }
    Ok(fp)
}

/// Builds and routes every module of a floorplan bottom-up.
pub fn route_hierarchy(
    ann: &Annotation,
    leaves: &BTreeMap<String, Vec<AbstractLayout>>,
    fp: &Floorplan,
    pdk: &Pdk,
    params: &AssemblyParams,
) -> Result<Assembly, AssembleError> {
    let ctx = Ctx::new(ann, pdk, params);
    ctx.child_plans_ok(fp)?;
    let mut built = BTreeMap::new();
    let mut routes = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for idx in ann.tree.modules_postorder() {
        let plan = fp.module(ctx.name(idx)).expect("checked above");
        let variants = child_variants(&ctx, idx, leaves, &built)?;
        let mut layout = ctx.shell(idx, plan, chosen(plan, variants)?)?;
        if !plan.passthrough {
            let (r, d) = ctx.route(plan, &mut layout)?;
            routes.insert(plan.name.clone(), r);
            diagnostics.extend(d);
        }
        built.insert(plan.name.clone(), layout);
    }
    let root = ctx.name(ann.tree.root);
    Ok(Assembly {
        layout: built.remove(root).expect("root module built"),
        floorplan: fp.clone(),
        routes,
        diagnostics,
    })
}

pub fn assemble(
    ann: &Annotation,
    leaves: &BTreeMap<String, Vec<AbstractLayout>>,
    pdk: &Pdk,
    params: &AssemblyParams,
) -> Result<Assembly, AssembleError> {
    let fp = plan_hierarchy(ann, leaves, pdk, params)?;
    route_hierarchy(ann, leaves, &fp, pdk, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{annotate, ConstraintSpec, PatternLibrary};
    use crate::layout::{drc, emit_json};
    use crate::netlist::{flatten, parse_spice};
    use crate::pdk::{mock14, mock65};

    fn annotation(src: &str, top: &str) -> Annotation {
        let nl = parse_spice(src).unwrap();
        let flat = flatten(&nl, top).unwrap();
        annotate(&flat, &PatternLibrary::builtin(), &ConstraintSpec::default()).unwrap()
    }

    fn run(src: &str, top: &str, pdk: &Pdk) -> Assembly {
        let ann = annotation(src, top);
        let params = AssemblyParams::default();
        let leaves = generate_leaves(&ann, pdk, params.variants).unwrap();
        assemble(&ann, &leaves, pdk, &params).unwrap()
    }

    #[test]
    fn single_leaf_passes_through() {
        let src = ".subckt one d g s b\nm1 d g s b nmos nfin=2\n.ends\n";
        let ann = annotation(src, "one");
        let pdk = mock14();
        let leaves = generate_leaves(&ann, &pdk, 1).unwrap();
        let a = assemble(&ann, &leaves, &pdk, &AssemblyParams::default()).unwrap();
        let leaf = &leaves.values().next().unwrap()[0];
        assert_eq!(&a.layout, leaf);
    }

    #[test]
    fn ota_is_clean_on_both_pdks() {
        let src = include_str!("../fixtures/ota5t.sp");
        for pdk in [mock14(), mock65()] {
            let a = run(src, "ota5t", &pdk);
            let report = drc(&a.layout, &pdk);
            assert!(report.is_clean(), "{}: {:?}", pdk.name, &report.violations[..report.violations.len().min(5)]);
        }
    }

    #[test]
    fn assembly_is_deterministic() {
        let src = include_str!("../fixtures/ota5t.sp");
        let pdk = mock14();
        assert_eq!(emit_json(&run(src, "ota5t", &pdk).layout), emit_json(&run(src, "ota5t", &pdk).layout));
    }
}
