//! End-to-end pipeline and its individually runnable stages.
//!
//! Every stage reads and writes plain files so any intermediate can be
//! replaced by hand:
//!
//! | stage    | reads                              | writes            |
//! |----------|------------------------------------|-------------------|
//! | parse    | SPICE netlist                      | `flat.json`       |
//! | annotate | `flat.json`, constraint spec       | `annotation.json` |
//! | place    | `annotation.json`                  | `floorplan.json`  |
//! | route    | `annotation.json`, `floorplan.json`| `layout.json`     |
//! | drc      | `layout.json`                      | `drc.json`        |

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{annotate, AnnotateError, Annotation, ConstraintSpec, PatternLibrary};
use crate::assemble::{generate_leaves, plan_hierarchy, route_hierarchy, AssembleError, Assembly, AssemblyParams, Floorplan};
use crate::graph::CircuitGraph;
use crate::layout::{drc, emit_gdsii, emit_json, load_json, open_nets, AbstractLayout, DrcReport, LayerMap, LayoutError};
use crate::netlist::{flatten, parse_spice, FlatNetlist, NetlistError};
use crate::pdk::{Pdk, PdkError};
use crate::place::AnnealParams;
use crate::route::{parasitic_report, RouteError, RouteParams};

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: NetlistError,
    },
    #[error(transparent)]
    Pdk(#[from] PdkError),
    #[error(transparent)]
    Annotate(#[from] AnnotateError),
    #[error(transparent)]
    Assemble(#[from] AssembleError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("layout has {violations} DRC violations and {open} open nets")]
    Check { violations: usize, open: usize },
}

impl FlowError {
    /// 2 for bad invocations or unreadable inputs, 1 for flow failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            FlowError::Usage(_) | FlowError::Io { .. } | FlowError::Json { .. } | FlowError::Parse { .. } | FlowError::Pdk(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EmitFlags {
    pub gds: bool,
    pub dot: bool,
    pub parasitics: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub netlist: PathBuf,
    pub top: Option<String>,
    pub pdk: PathBuf,
    pub spec: Option<PathBuf>,
    /// Directory with `library.txt`; the bundled library when unset.
    pub patterns: Option<PathBuf>,
    /// GDS layer map; defaults to the PDK path with a `.map` extension.
    pub layer_map: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    pub variants: usize,
    pub anneal: AnnealParams,
    pub route: RouteParams,
    pub emit: EmitFlags,
}

impl RunConfig {
    pub fn new(netlist: impl Into<PathBuf>, pdk: impl Into<PathBuf>, out: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            netlist: netlist.into(),
            top: None,
            pdk: pdk.into(),
            spec: None,
            patterns: None,
            layer_map: None,
            out: out.into(),
            seed: 0,
            variants: 3,
            anneal: AnnealParams::default(),
            route: RouteParams::default(),
            emit: EmitFlags::default(),
        }
    }

    pub fn assembly_params(&self) -> AssemblyParams {
        AssemblyParams {
            variants: self.variants.max(1),
            anneal: self.anneal,
            route: self.route,
            seed: self.seed,
            ..AssemblyParams::default()
        }
    }

    /// Checks that every input path exists.
    pub fn validate(&self) -> Result<(), FlowError> {
        let mut inputs = vec![("netlist", &self.netlist), ("pdk", &self.pdk)];
        inputs.extend(self.spec.iter().map(|p| ("spec", p)));
        inputs.extend(self.patterns.iter().map(|p| ("patterns", p)));
        inputs.extend(self.layer_map.iter().map(|p| ("layer map", p)));
        for (what, p) in inputs {
            if !p.exists() {
                return Err(FlowError::Usage(format!("{what} path {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub ms: f64,
}

/// Machine-readable run record written as `summary.json`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub top: String,
    pub pdk: String,
    pub seed: u64,
    pub devices: usize,
    pub leaves: usize,
    pub modules: usize,
    pub area_nm2: i64,
    pub width_nm: i64,
    pub height_nm: i64,
    pub drc_violations: usize,
    pub open_nets: usize,
    pub routed_nets: usize,
    pub diagnostics: Vec<String>,
    pub timings: Vec<StageTime>,
    pub artifacts: Vec<String>,
}

fn read(path: &Path) -> Result<String, FlowError> {
    fs::read_to_string(path).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, data: impl AsRef<[u8]>) -> Result<(), FlowError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| FlowError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, data).map_err(|source| FlowError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, FlowError> {
    let text = read(path)?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| FlowError::Json {
        path: path.to_path_buf(),
        message: format!("at $.{}: {}", e.path(), e.inner()),
    })
}

pub fn load_pdk(path: &Path) -> Result<Pdk, FlowError> {
    Ok(Pdk::load(path)?)
}

pub fn load_layout(path: &Path) -> Result<AbstractLayout, FlowError> {
    Ok(load_json(&read(path)?)?)
}

/// Parses and flattens a netlist; `top` defaults to the netlist's own top.
pub fn stage_parse(netlist: &Path, top: Option<&str>) -> Result<FlatNetlist, FlowError> {
    let err = |source| FlowError::Parse {
        path: netlist.to_path_buf(),
        source,
    };
    let nl = parse_spice(&read(netlist)?).map_err(err)?;
    for w in &nl.warnings {
        log::warn!("{}: {w}", netlist.display());
    }
    let top = match top.map(str::to_string).or_else(|| nl.top.clone()) {
        Some(t) => t,
        None => {
            let used: BTreeSet<&str> = nl.subckts.iter().flat_map(|s| s.instances.iter().map(|i| i.subckt.as_str())).collect();
            let roots = nl.subckts.iter().filter(|s| !used.contains(s.name.as_str())).map(|s| s.name.clone()).collect();
            return Err(err(NetlistError::AmbiguousTop(roots)));
        }
    };
    flatten(&nl, &top).map_err(err)
}

pub fn stage_annotate(flat: &FlatNetlist, spec: Option<&Path>, patterns: Option<&Path>) -> Result<Annotation, FlowError> {
    let lib = match patterns {
        Some(dir) => PatternLibrary::load_dir(dir)?,
        None => PatternLibrary::builtin(),
    };
    let spec = match spec {
        Some(p) => ConstraintSpec::load(p)?,
        None => ConstraintSpec::default(),
    };
    Ok(annotate(flat, &lib, &spec)?)
}

pub fn stage_place(ann: &Annotation, pdk: &Pdk, params: &AssemblyParams) -> Result<Floorplan, FlowError> {
    let leaves = generate_leaves(ann, pdk, params.variants)?;
    Ok(plan_hierarchy(ann, &leaves, pdk, params)?)
}

pub fn stage_route(ann: &Annotation, fp: &Floorplan, pdk: &Pdk, params: &AssemblyParams) -> Result<Assembly, FlowError> {
    let leaves = generate_leaves(ann, pdk, params.variants)?;
    Ok(route_hierarchy(ann, &leaves, fp, pdk, params)?)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CheckReport {
    pub drc: DrcReport,
    /// Net to number of disconnected pieces.
    pub open_nets: BTreeMap<String, usize>,
}

impl CheckReport {
    pub fn is_clean(&self) -> bool {
        self.drc.is_clean() && self.open_nets.is_empty()
    }
}

pub fn stage_drc(layout: &AbstractLayout, pdk: &Pdk) -> CheckReport {
    CheckReport {
        drc: drc(layout, pdk),
        open_nets: open_nets(layout, pdk),
    }
}

pub fn layer_map_for(cfg_map: Option<&Path>, pdk_path: &Path) -> Result<LayerMap, FlowError> {
    let path = cfg_map.map(Path::to_path_buf).unwrap_or_else(|| pdk_path.with_extension("map"));
    Ok(LayerMap::load(&path)?)
}

/// Writes the route-stage artifacts; returns the file names written.
pub fn write_layout_artifacts(
    out: &Path,
    asm: &Assembly,
    pdk: &Pdk,
    emit: EmitFlags,
    map: Option<&LayerMap>,
) -> Result<Vec<String>, FlowError> {
    let mut names = vec!["layout.json".to_string(), "routes.json".to_string()];
    write(&out.join("layout.json"), emit_json(&asm.layout))?;
    write(&out.join("routes.json"), to_json(&asm.routes))?;
    if emit.parasitics {
        write(&out.join("parasitics.csv"), parasitic_report(&asm.all_routes(), pdk)?)?;
        names.push("parasitics.csv".into());
    }
    if emit.gds {
        let map = map.ok_or_else(|| FlowError::Usage("GDS output needs a layer map".into()))?;
        write(&out.join("layout.gds"), emit_gdsii(&asm.layout, map)?)?;
        names.push("layout.gds".into());
    }
    Ok(names)
}

struct Timer {
    times: Vec<StageTime>,
    start: Instant,
}

impl Timer {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.times.push(StageTime {
            stage: stage.into(),
            ms: (now - self.start).as_secs_f64() * 1000.0,
        });
        log::info!("stage {stage} done in {:.1} ms", (now - self.start).as_secs_f64() * 1000.0);
        self.start = now;
    }
}

/// Full pipeline. On failure the partial artifacts and `summary.json` land
/// in `out/failed/` and the error is returned.
pub fn run(cfg: &RunConfig) -> Result<Summary, FlowError> {
    cfg.validate()?;
    let mut summary = Summary {
        seed: cfg.seed,
        ..Summary::default()
    };
    let mut timer = Timer {
        times: Vec::new(),
        start: Instant::now(),
    };
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let result = run_stages(cfg, &mut summary, &mut timer, &mut files);
    summary.timings = timer.times;
    let dir = match &result {
        Ok(()) => cfg.out.clone(),
        Err((stage, e)) => {
            summary.status = "failed".into();
            summary.failed_stage = Some(stage.to_string());
            summary.error = Some(e.to_string());
            cfg.out.join("failed")
        }
    };
    if result.is_ok() {
        summary.status = "ok".into();
    }
    for (name, data) in &files {
        write(&dir.join(name), data)?;
        summary.artifacts.push(name.clone());
    }
    summary.artifacts.push("summary.json".into());
    write(&dir.join("summary.json"), to_json(&summary))?;
    match result {
        Ok(()) => Ok(summary),
        Err((_, e)) => Err(e),
    }
}

fn run_stages(
    cfg: &RunConfig,
    summary: &mut Summary,
    timer: &mut Timer,
    files: &mut Vec<(String, Vec<u8>)>,
) -> Result<(), (&'static str, FlowError)> {
    let pdk = load_pdk(&cfg.pdk).map_err(|e| ("pdk", e))?;
    summary.pdk = pdk.name.clone();
    let map = if cfg.emit.gds {
        Some(layer_map_for(cfg.layer_map.as_deref(), &cfg.pdk).map_err(|e| ("pdk", e))?)
    } else {
        None
    };

    let flat = stage_parse(&cfg.netlist, cfg.top.as_deref()).map_err(|e| ("parse", e))?;
    summary.top = flat.top.clone();
    summary.devices = flat.devices.len();
    files.push(("flat.json".into(), to_json(&flat).into_bytes()));
    if cfg.emit.dot {
        files.push(("graph.dot".into(), CircuitGraph::build(&flat).to_dot().into_bytes()));
    }
    timer.lap("parse");

    let ann = stage_annotate(&flat, cfg.spec.as_deref(), cfg.patterns.as_deref()).map_err(|e| ("annotate", e))?;
    summary.leaves = ann.tree.leaves().len();
    summary.modules = ann.tree.modules().len();
    summary.diagnostics.extend(ann.constraints.diagnostics.iter().cloned());
    files.push(("annotation.json".into(), to_json(&ann).into_bytes()));
    files.push(("constraints.json".into(), to_json(&ann.constraints).into_bytes()));
    timer.lap("annotate");

    let params = cfg.assembly_params();
    let fp = stage_place(&ann, &pdk, &params).map_err(|e| ("place", e))?;
    files.push(("floorplan.json".into(), to_json(&fp).into_bytes()));
    timer.lap("place");

    let asm = stage_route(&ann, &fp, &pdk, &params).map_err(|e| ("route", e))?;
    summary.diagnostics.extend(asm.diagnostics.iter().cloned());
    summary.routed_nets = asm.routes.values().map(Vec::len).sum();
    summary.width_nm = asm.layout.bbox.width();
    summary.height_nm = asm.layout.bbox.height();
    summary.area_nm2 = asm.layout.area();
    files.push(("layout.json".into(), emit_json(&asm.layout).into_bytes()));
    files.push(("routes.json".into(), to_json(&asm.routes).into_bytes()));
    if cfg.emit.parasitics {
        let csv = parasitic_report(&asm.all_routes(), &pdk).map_err(|e| ("route", e.into()))?;
        files.push(("parasitics.csv".into(), csv.into_bytes()));
    }
    if let Some(map) = &map {
        let gds = emit_gdsii(&asm.layout, map).map_err(|e| ("emit", e.into()))?;
        files.push(("layout.gds".into(), gds));
    }
    timer.lap("route");

    let report = stage_drc(&asm.layout, &pdk);
    summary.drc_violations = report.drc.violations.len();
    summary.open_nets = report.open_nets.len();
    files.push(("drc.json".into(), to_json(&report).into_bytes()));
    timer.lap("drc");
    if !report.is_clean() {
        return Err((
            "drc",
            FlowError::Check {
                violations: report.drc.violations.len(),
                open: report.open_nets.len(),
            },
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(p: &str) -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join(p)
    }

    fn tmp(tag: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("gridloom-flow-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn missing_pdk_is_a_usage_error() {
        let cfg = RunConfig::new(data("fixtures/ota5t.sp"), data("nope.json"), tmp("usage"));
        let e = run(&cfg).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn malformed_netlist_names_the_line() {
        let dir = tmp("parse");
        let bad = dir.join("bad.sp");
        write(&bad, ".subckt t a b\nm1 a b\n.ends\n").unwrap();
        let e = stage_parse(&bad, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn ota_run_writes_artifacts() {
        let out = tmp("ota");
        let mut cfg = RunConfig::new(data("fixtures/ota5t.sp"), data("data/pdk/mock14.json"), &out);
        cfg.emit = EmitFlags {
            gds: true,
            dot: true,
            parasitics: true,
        };
        let s = run(&cfg).unwrap();
        assert_eq!(s.status, "ok");
        assert_eq!(s.drc_violations, 0);
        for f in ["layout.json", "layout.gds", "graph.dot", "parasitics.csv", "summary.json", "constraints.json"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let _ = fs::remove_dir_all(&out);
    }

    #[test]
    fn failures_land_in_failed_dir() {
        let out = tmp("fail");
        let mut cfg = RunConfig::new(data("fixtures/ota5t.sp"), data("data/pdk/mock14.json"), &out);
        cfg.top = Some("nosuch".into());
        assert!(run(&cfg).is_err());
        let s: Summary = read_json(&out.join("failed/summary.json")).unwrap();
        assert_eq!(s.failed_stage.as_deref(), Some("parse"));
        let _ = fs::remove_dir_all(&out);
    }
}
