//! `gridloom`: netlist in, DRC-clean layout out.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridloom::annotate::Annotation;
use gridloom::assemble::{AssemblyParams, Floorplan};
use gridloom::flow::{self, EmitFlags, FlowError, RunConfig};
use gridloom::graph::CircuitGraph;
use gridloom::netlist::FlatNetlist;
use gridloom::place::AnnealParams;
use gridloom::route::RouteParams;

/// Log filter variable, e.g. `GRIDLOOM_LOG=info`.
const LOG_ENV: &str = "GRIDLOOM_LOG";

#[derive(Parser, Debug)]
#[command(name = "gridloom", version, about = "Analog netlist to gridded layout")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and flatten a netlist into flat.json.
    ParseOnly(ParseArgs),
    /// Recognize primitives and derive constraints into annotation.json.
    AnnotateOnly(AnnotateArgs),
    /// Generate leaves and place every module into floorplan.json.
    PlaceOnly(PlaceArgs),
    /// Route a floorplan into layout.json.
    RouteOnly(RouteArgs),
    /// Check a layout.json and write drc.json.
    DrcOnly(DrcArgs),
}

#[derive(Args, Debug, Clone)]
struct Tuning {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Layout variants generated per leaf.
    #[arg(long, default_value_t = 3)]
    variants: usize,
    #[arg(long, default_value_t = 3)]
    restarts: u32,
    #[arg(long, default_value_t = 0.95)]
    cooling: f64,
    #[arg(long, default_value_t = 200)]
    moves_per_block: usize,
    /// Cost per doubled nm of half-perimeter wirelength.
    #[arg(long, default_value_t = 200)]
    wl_weight: i64,
    #[arg(long, default_value_t = 10)]
    route_rounds: usize,
    #[arg(long)]
    via_cost: Option<i64>,
}

impl Tuning {
    fn anneal(&self) -> AnnealParams {
        let mut a = AnnealParams {
            restarts: self.restarts,
            cooling: self.cooling,
            moves_per_block: self.moves_per_block,
            ..AnnealParams::default()
        };
        a.weights.wl = self.wl_weight;
        a
    }

    fn route(&self) -> RouteParams {
        RouteParams {
            rounds: self.route_rounds,
            via_cost: self.via_cost,
            ..RouteParams::default()
        }
    }

    fn assembly(&self) -> AssemblyParams {
        AssemblyParams {
            variants: self.variants.max(1),
            anneal: self.anneal(),
            route: self.route(),
            seed: self.seed,
            ..AssemblyParams::default()
        }
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    netlist: Option<PathBuf>,
    /// Top subcircuit; inferred when the netlist has a unique root.
    #[arg(long)]
    top: Option<String>,
    #[arg(long)]
    pdk: Option<PathBuf>,
    /// Constraint spec (budgets, symmetry overrides, shields).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Pattern library directory with library.txt.
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long)]
    layer_map: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long)]
    emit_gds: bool,
    #[arg(long)]
    emit_dot: bool,
    #[arg(long)]
    report_parasitics: bool,
}

#[derive(Args, Debug)]
struct ParseArgs {
    #[arg(long)]
    netlist: PathBuf,
    #[arg(long)]
    top: Option<String>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AnnotateArgs {
    /// flat.json from parse-only.
    #[arg(long, required_unless_present = "netlist")]
    flat: Option<PathBuf>,
    #[arg(long, conflicts_with = "flat")]
    netlist: Option<PathBuf>,
    #[arg(long)]
    top: Option<String>,
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    patterns: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    emit_dot: bool,
}

#[derive(Args, Debug)]
struct PlaceArgs {
    #[arg(long)]
    annotation: PathBuf,
    #[arg(long)]
    pdk: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args, Debug)]
struct RouteArgs {
    #[arg(long)]
    annotation: PathBuf,
    #[arg(long)]
    floorplan: PathBuf,
    #[arg(long)]
    pdk: PathBuf,
    #[arg(long)]
    layer_map: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    tuning: Tuning,
    #[arg(long)]
    emit_gds: bool,
    #[arg(long)]
    report_parasitics: bool,
}

#[derive(Args, Debug)]
struct DrcArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    pdk: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn exists(what: &str, p: &Path) -> Result<(), FlowError> {
    if p.exists() {
        Ok(())
    } else {
        Err(FlowError::Usage(format!("{what} path {} does not exist", p.display())))
    }
}

fn full_run(a: RunArgs) -> Result<(), FlowError> {
    let (Some(netlist), Some(pdk)) = (a.netlist, a.pdk) else {
        return Err(FlowError::Usage("pass --netlist and --pdk, or a subcommand (see --help)".into()));
    };
    let cfg = RunConfig {
        top: a.top,
        spec: a.spec,
        patterns: a.patterns,
        layer_map: a.layer_map,
        seed: a.tuning.seed,
        variants: a.tuning.variants,
        anneal: a.tuning.anneal(),
        route: a.tuning.route(),
        emit: EmitFlags {
            gds: a.emit_gds,
            dot: a.emit_dot,
            parasitics: a.report_parasitics,
        },
        ..RunConfig::new(netlist, pdk, a.out)
    };
    let s = flow::run(&cfg)?;
    println!(
        "{}: {} devices, {} leaves, {} x {} nm, 0 DRC violations -> {}",
        s.top,
        s.devices,
        s.leaves,
        s.width_nm,
        s.height_nm,
        cfg.out.display()
    );
    Ok(())
}

fn parse_only(a: ParseArgs) -> Result<(), FlowError> {
    exists("netlist", &a.netlist)?;
    let flat = flow::stage_parse(&a.netlist, a.top.as_deref())?;
    flow::write(&a.out.join("flat.json"), flow::to_json(&flat))?;
    println!("{}: {} devices, {} nets", flat.top, flat.devices.len(), flat.nets.len());
    Ok(())
}

fn annotate_only(a: AnnotateArgs) -> Result<(), FlowError> {
    let flat: FlatNetlist = match (&a.flat, &a.netlist) {
        (Some(f), _) => {
            exists("flat", f)?;
            flow::read_json(f)?
        }
        (None, Some(n)) => {
            exists("netlist", n)?;
            flow::stage_parse(n, a.top.as_deref())?
        }
        (None, None) => return Err(FlowError::Usage("need --flat or --netlist".into())),
    };
    let ann = flow::stage_annotate(&flat, a.spec.as_deref(), a.patterns.as_deref())?;
    flow::write(&a.out.join("annotation.json"), flow::to_json(&ann))?;
    flow::write(&a.out.join("constraints.json"), flow::to_json(&ann.constraints))?;
    if a.emit_dot {
        flow::write(&a.out.join("graph.dot"), CircuitGraph::build(&flat).to_dot())?;
    }
    for d in &ann.constraints.diagnostics {
        log::warn!("{d}");
    }
    println!("{}: {} leaves, {} modules", flat.top, ann.tree.leaves().len(), ann.tree.modules().len());
    Ok(())
}

fn place_only(a: PlaceArgs) -> Result<(), FlowError> {
    exists("annotation", &a.annotation)?;
    exists("pdk", &a.pdk)?;
    let ann: Annotation = flow::read_json(&a.annotation)?;
    let pdk = flow::load_pdk(&a.pdk)?;
    let fp = flow::stage_place(&ann, &pdk, &a.tuning.assembly())?;
    flow::write(&a.out.join("floorplan.json"), flow::to_json(&fp))?;
    println!("{} modules placed", fp.modules.len());
    Ok(())
}

fn route_only(a: RouteArgs) -> Result<(), FlowError> {
    exists("annotation", &a.annotation)?;
    exists("floorplan", &a.floorplan)?;
    exists("pdk", &a.pdk)?;
    let ann: Annotation = flow::read_json(&a.annotation)?;
    let fp: Floorplan = flow::read_json(&a.floorplan)?;
    let pdk = flow::load_pdk(&a.pdk)?;
    let asm = flow::stage_route(&ann, &fp, &pdk, &a.tuning.assembly())?;
    let map = if a.emit_gds {
        Some(flow::layer_map_for(a.layer_map.as_deref(), &a.pdk)?)
    } else {
        None
    };
    let emit = EmitFlags {
        gds: a.emit_gds,
        dot: false,
        parasitics: a.report_parasitics,
    };
    let written = flow::write_layout_artifacts(&a.out, &asm, &pdk, emit, map.as_ref())?;
    for d in &asm.diagnostics {
        log::info!("{d}");
    }
    println!("wrote {}", written.join(", "));
    Ok(())
}

fn drc_only(a: DrcArgs) -> Result<(), FlowError> {
    exists("layout", &a.layout)?;
    exists("pdk", &a.pdk)?;
    let layout = flow::load_layout(&a.layout)?;
    let pdk = flow::load_pdk(&a.pdk)?;
    let report = flow::stage_drc(&layout, &pdk);
    flow::write(&a.out.join("drc.json"), flow::to_json(&report))?;
    for v in &report.drc.violations {
        println!("{} {} {:?} {}", v.rule, v.layer, v.rect, v.detail);
    }
    for (net, pieces) in &report.open_nets {
        println!("open {net}: {pieces} pieces");
    }
    if report.is_clean() {
        println!("clean");
        Ok(())
    } else {
        Err(FlowError::Check {
            violations: report.drc.violations.len(),
            open: report.open_nets.len(),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Some(Command::ParseOnly(a)) => parse_only(a),
        Some(Command::AnnotateOnly(a)) => annotate_only(a),
        Some(Command::PlaceOnly(a)) => place_only(a),
        Some(Command::RouteOnly(a)) => route_only(a),
        Some(Command::DrcOnly(a)) => drc_only(a),
        None => full_run(cli.run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
