//! SPICE subset parser and hierarchy flattening.
//!
//! Accepted cards (case-insensitive, normalized to lower case):
//!
//! ```text
//! * full-line comment            $ trailing comment
//! .subckt NAME PORT... [k=v...]  .ends [NAME]
//! .global NET...                 .param ...   (ignored with a warning)
//! .end
//! Mname D G S [B] MODEL [k=v...] bulk defaults to the source net
//! Rname P N [VALUE] [k=v...]
//! Cname P N [VALUE] [k=v...]
//! Xname NET... SUBCKT [k=v...]
//! + continuation of the previous card
//! ```
//!
//! Numbers accept the usual suffixes `f p n u m k meg g t`; trailing unit
//! letters after the suffix (`10pF`, `2kOhm`) are ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Nmos,
    Pmos,
    Res,
    Cap,
}

impl DeviceKind {
    pub fn is_mos(self) -> bool {
        matches!(self, DeviceKind::Nmos | DeviceKind::Pmos)
    }

    pub fn pin_count(self) -> usize {
        if self.is_mos() {
            4
        } else {
            2
        }
    }

    /// Pin role names in card order.
    pub fn pin_roles(self) -> &'static [PinRole] {
        if self.is_mos() {
            &[PinRole::Drain, PinRole::Gate, PinRole::Source, PinRole::Bulk]
        } else {
            &[PinRole::Plus, PinRole::Minus]
        }
    }
}

impl fmt::Display for DeviceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeviceKind::Nmos => "nmos",
            DeviceKind::Pmos => "pmos",
            DeviceKind::Res => "res",
            DeviceKind::Cap => "cap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PinRole {
    Drain,
    Gate,
    Source,
    Bulk,
    Plus,
    Minus,
}

impl fmt::Display for PinRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PinRole::Drain => "drain",
            PinRole::Gate => "gate",
            PinRole::Source => "source",
            PinRole::Bulk => "bulk",
            PinRole::Plus => "plus",
            PinRole::Minus => "minus",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub name: String,
    pub kind: DeviceKind,
    /// Model name for MOS cards; empty for passives.
    #[serde(default)]
    pub model: String,
    pub pins: Vec<String>,
    pub params: BTreeMap<String, f64>,
}

impl Device {
    pub fn pin(&self, role: PinRole) -> Option<&str> {
        self.kind
            .pin_roles()
            .iter()
            .position(|r| *r == role)
            .and_then(|i| self.pins.get(i))
            .map(String::as_str)
    }

    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.get(key).copied()
    }

    /// Multiplier, defaulting to 1.
    pub fn multiplier(&self) -> u32 {
        self.param("m").map(|m| m.round().max(1.0) as u32).unwrap_or(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub name: String,
    pub subckt: String,
    pub ports: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subckt {
    pub name: String,
    pub ports: Vec<String>,
    pub devices: Vec<Device>,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Netlist {
    /// Subcircuits in declaration order.
    pub subckts: Vec<Subckt>,
    /// Designated top cell: the implicit `top` when cards appear outside any
    /// `.subckt`, else the unique subcircuit nobody instantiates.
    pub top: Option<String>,
    pub globals: BTreeSet<String>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl Netlist {
    pub fn subckt(&self, name: &str) -> Option<&Subckt> {
        self.subckts.iter().find(|s| s.name == name)
    }
}

/// Model name overrides: model → device kind.
pub type ModelMap = BTreeMap<String, DeviceKind>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown device prefix '{prefix}'")]
    UnknownPrefix { line: usize, prefix: char },
    #[error("line {line}: {card} expects {expected} nets, found {found}")]
    Arity {
        line: usize,
        card: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: duplicate subckt {name}")]
    DuplicateSubckt { line: usize, name: String },
    #[error("line {line}: instance {instance} references undefined subckt {subckt}")]
    DanglingInstance {
        line: usize,
        instance: String,
        subckt: String,
    },
    #[error("unknown top cell {0}")]
    UnknownTop(String),
    #[error("no unique top cell; candidates: {0:?}")]
    AmbiguousTop(Vec<String>),
    #[error("cyclic instantiation through {0}")]
    Cycle(String),
    #[error("instance {instance} of {subckt} binds {found} nets to {expected} ports")]
    UnboundPort {
        instance: String,
        subckt: String,
        expected: usize,
        found: usize,
    },
}

/// Parse a number with an optional SPICE scale suffix.
pub fn parse_value(tok: &str) -> Option<f64> {
    let t = tok.to_ascii_lowercase();
    let split = t
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || ((c == '+' || c == '-') && (i == 0 || t[..i].ends_with('e')))
                || (c == 'e' && t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    let base: f64 = num.parse().ok()?;
    let scale = if suffix.starts_with("meg") {
        1e6
    } else if suffix.starts_with("mil") {
        25.4e-6
    } else {
        match suffix.chars().next() {
            None => 1.0,
            Some('f') => 1e-15,
            Some('p') => 1e-12,
            Some('n') => 1e-9,
            Some('u') => 1e-6,
            Some('m') => 1e-3,
            Some('k') => 1e3,
            Some('g') => 1e9,
            Some('t') => 1e12,
            Some(c) if c.is_ascii_alphabetic() => 1.0,
            Some(_) => return None,
        }
    };
    let v = base * scale;
    v.is_finite().then_some(v)
}

struct Card {
    line: usize,
    tokens: Vec<String>,
}

fn logical_cards(text: &str) -> Result<Vec<Card>, NetlistError> {
    let mut cards: Vec<Card> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('$').next().unwrap_or("").trim();
        if body.is_empty() || body.starts_with('*') {
            continue;
        }
        let lower = body.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix('+') {
            let card = cards.last_mut().ok_or_else(|| NetlistError::Syntax {
                line,
                message: "continuation line without a preceding card".into(),
            })?;
            card.tokens.extend(tokenize(rest));
        } else {
            cards.push(Card {
                line,
                tokens: tokenize(&lower),
            });
        }
    }
    Ok(cards)
}

/// Split on whitespace, gluing `k = v` into `k=v`.
fn tokenize(s: &str) -> Vec<String> {
    let spaced = s.replace('=', " = ");
    let raw: Vec<&str> = spaced.split_whitespace().collect();
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        if raw[i] == "=" && !out.is_empty() && i + 1 < raw.len() {
            let k = out.pop().unwrap();
            out.push(format!("{k}={}", raw[i + 1]));
            i += 2;
        } else {
            out.push(raw[i].to_string());
            i += 1;
        }
    }
    out
}

fn split_params(tokens: &[String], line: usize) -> Result<(Vec<String>, BTreeMap<String, f64>), NetlistError> {
    let mut positional = Vec::new();
    let mut params = BTreeMap::new();
    for t in tokens {
        if let Some((k, v)) = t.split_once('=') {
            let val = parse_value(v).ok_or_else(|| NetlistError::Syntax {
                line,
                message: format!("bad value '{v}' for parameter {k}"),
            })?;
            params.insert(k.to_string(), val);
        } else if !params.is_empty() {
            return Err(NetlistError::Syntax {
                line,
                message: format!("positional token '{t}' after parameters"),
            });
        } else {
            positional.push(t.clone());
        }
    }
    Ok((positional, params))
}

fn check_params(name: &str, params: &BTreeMap<String, f64>, line: usize) -> Result<(), NetlistError> {
    for (k, v) in params {
        if !(v.is_finite() && *v > 0.0) {
            return Err(NetlistError::Syntax {
                line,
                message: format!("{name}: parameter {k} must be finite and positive"),
            });
        }
    }
    if let Some(m) = params.get("m") {
        if *m < 1.0 {
            return Err(NetlistError::Syntax {
                line,
                message: format!("{name}: multiplier m must be >= 1"),
            });
        }
    }
    Ok(())
}

fn mos_kind(model: &str, map: &ModelMap) -> DeviceKind {
    if let Some(k) = map.get(model) {
        return *k;
    }
    if model.contains('p') {
        DeviceKind::Pmos
    } else {
        DeviceKind::Nmos
    }
}

pub fn parse_spice(text: &str) -> Result<Netlist, NetlistError> {
    parse_spice_with(text, &ModelMap::new())
}

pub fn parse_spice_with(text: &str, models: &ModelMap) -> Result<Netlist, NetlistError> {
    let cards = logical_cards(text)?;
    let mut nl = Netlist::default();
    let mut current: Option<Subckt> = None;
    let mut top = Subckt {
        name: "top".into(),
        ports: Vec::new(),
        devices: Vec::new(),
        instances: Vec::new(),
    };
    let mut inst_lines: Vec<(String, usize)> = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();

    for card in cards {
        let line = card.line;
        let head = card.tokens[0].as_str();
        if let Some(dot) = head.strip_prefix('.') {
            match dot {
                "subckt" => {
                    if current.is_some() {
                        return Err(NetlistError::Syntax {
                            line,
                            message: "nested .subckt".into(),
                        });
                    }
                    let name = card.tokens.get(1).cloned().ok_or_else(|| NetlistError::Syntax {
                        line,
                        message: ".subckt without a name".into(),
                    })?;
                    if seen.contains_key(&name) {
                        return Err(NetlistError::DuplicateSubckt { line, name });
                    }
                    seen.insert(name.clone(), line);
                    let ports = card.tokens[2..]
                        .iter()
                        .take_while(|t| !t.contains('=') && t.as_str() != "params:")
                        .cloned()
                        .collect();
                    current = Some(Subckt {
                        name,
                        ports,
                        devices: Vec::new(),
                        instances: Vec::new(),
                    });
                }
                "ends" => {
                    let sc = current.take().ok_or_else(|| NetlistError::Syntax {
                        line,
                        message: ".ends without .subckt".into(),
                    })?;
                    if let Some(n) = card.tokens.get(1) {
                        if *n != sc.name {
                            return Err(NetlistError::Syntax {
                                line,
                                message: format!(".ends {n} closes .subckt {}", sc.name),
                            });
                        }
                    }
                    nl.subckts.push(sc);
                }
                "global" => nl.globals.extend(card.tokens[1..].iter().cloned()),
                "end" => break,
                other => nl
                    .warnings
                    .push(format!("line {line}: .{other} card ignored")),
            }
            continue;
        }
        let target = current.as_mut().unwrap_or(&mut top);
        let prefix = head.chars().next().unwrap();
        let (pos, params) = split_params(&card.tokens[1..], line)?;
        match prefix {
            'm' => {
                let (pins, model) = match pos.len() {
                    4 => (vec![pos[0].clone(), pos[1].clone(), pos[2].clone(), pos[2].clone()], pos[3].clone()),
                    5 => (pos[..4].to_vec(), pos[4].clone()),
                    n => {
                        return Err(NetlistError::Arity {
                            line,
                            card: head.to_string(),
                            expected: 4,
                            found: n.saturating_sub(1),
                        })
                    }
                };
                check_params(head, &params, line)?;
                target.devices.push(Device {
                    name: head.to_string(),
                    kind: mos_kind(&model, models),
                    model,
                    pins,
                    params,
                });
            }
            'r' | 'c' => {
                let kind = if prefix == 'r' { DeviceKind::Res } else { DeviceKind::Cap };
                let mut params = params;
                let pins = match pos.len() {
                    2 => pos.clone(),
                    3 => {
                        let v = parse_value(&pos[2]).ok_or_else(|| NetlistError::Syntax {
                            line,
                            message: format!("bad value '{}'", pos[2]),
                        })?;
                        params.insert("value".into(), v);
                        pos[..2].to_vec()
                    }
                    n => {
                        return Err(NetlistError::Arity {
                            line,
                            card: head.to_string(),
                            expected: 2,
                            found: n,
                        })
                    }
                };
                check_params(head, &params, line)?;
                target.devices.push(Device {
                    name: head.to_string(),
                    kind,
                    model: String::new(),
                    pins,
                    params,
                });
            }
            'x' => {
                if pos.is_empty() {
                    return Err(NetlistError::Syntax {
                        line,
                        message: format!("{head}: missing subckt name"),
                    });
                }
                let (sub, nets) = pos.split_last().unwrap();
                inst_lines.push((head.to_string(), line));
                target.instances.push(Instance {
                    name: head.to_string(),
                    subckt: sub.clone(),
                    ports: nets.to_vec(),
                });
            }
            other => return Err(NetlistError::UnknownPrefix { line, prefix: other }),
        }
    }
    if let Some(sc) = current {
        return Err(NetlistError::Syntax {
            line: seen.get(&sc.name).copied().unwrap_or(0),
            message: format!(".subckt {} is never closed", sc.name),
        });
    }
    let has_top_cards = !top.devices.is_empty() || !top.instances.is_empty();
    if has_top_cards {
        if seen.contains_key("top") {
            return Err(NetlistError::DuplicateSubckt {
                line: seen["top"],
                name: "top".into(),
            });
        }
        nl.subckts.push(top);
    }

    // Resolve instance references.
    let line_of = |sc: &Subckt, inst: &Instance| {
        inst_lines
            .iter()
            .find(|(n, _)| *n == inst.name)
            .map(|(_, l)| *l)
            .unwrap_or_else(|| seen.get(&sc.name).copied().unwrap_or(0))
    };
    for sc in &nl.subckts {
        for inst in &sc.instances {
            let line = line_of(sc, inst);
            let target = nl.subckt(&inst.subckt).ok_or_else(|| NetlistError::DanglingInstance {
                line,
                instance: inst.name.clone(),
                subckt: inst.subckt.clone(),
            })?;
            if target.ports.len() != inst.ports.len() {
                return Err(NetlistError::Arity {
                    line,
                    card: inst.name.clone(),
                    expected: target.ports.len(),
                    found: inst.ports.len(),
                });
            }
        }
    }
    nl.top = if has_top_cards {
        Some("top".into())
    } else {
        let used: BTreeSet<&str> = nl
            .subckts
            .iter()
            .flat_map(|s| s.instances.iter().map(|i| i.subckt.as_str()))
            .collect();
        let roots: Vec<&Subckt> = nl.subckts.iter().filter(|s| !used.contains(s.name.as_str())).collect();
        (roots.len() == 1).then(|| roots[0].name.clone())
    };
    Ok(nl)
}

fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// Render a netlist back to the accepted SPICE subset.
pub fn unparse(nl: &Netlist) -> String {
    let mut out = String::new();
    if !nl.globals.is_empty() {
        let g: Vec<&str> = nl.globals.iter().map(String::as_str).collect();
        let _ = writeln!(out, ".global {}", g.join(" "));
    }
    for sc in &nl.subckts {
        let implicit = Some(&sc.name) == nl.top.as_ref() && sc.name == "top" && sc.ports.is_empty();
        if !implicit {
            let _ = writeln!(out, ".subckt {} {}", sc.name, sc.ports.join(" "));
        }
        for d in &sc.devices {
            let _ = write!(out, "{} {}", d.name, d.pins.join(" "));
            if d.kind.is_mos() {
                let _ = write!(out, " {}", d.model);
            }
            for (k, v) in &d.params {
                let _ = write!(out, " {k}={}", fmt_num(*v));
            }
            out.push('\n');
        }
        for i in &sc.instances {
            let _ = writeln!(out, "{} {} {}", i.name, i.ports.join(" "), i.subckt);
        }
        if !implicit {
            let _ = writeln!(out, ".ends {}", sc.name);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatNetlist {
    pub top: String,
    /// Devices with `/`-separated instance-path names.
    pub devices: Vec<Device>,
    pub nets: BTreeSet<String>,
    pub ports: Vec<String>,
}

impl FlatNetlist {
    pub fn device(&self, name: &str) -> Option<&Device> {
        self.devices.iter().find(|d| d.name == name)
    }

    /// Instance path of a flat device (`""` for the top cell).
    pub fn module_of(device_name: &str) -> &str {
        device_name.rsplit_once('/').map(|(p, _)| p).unwrap_or("")
    }
}

pub fn flatten(nl: &Netlist, top: &str) -> Result<FlatNetlist, NetlistError> {
    let root = nl.subckt(top).ok_or_else(|| NetlistError::UnknownTop(top.to_string()))?;
    let mut flat = FlatNetlist {
        top: top.to_string(),
        ports: root.ports.clone(),
        ..Default::default()
    };
    let identity: HashMap<String, String> = HashMap::new();
    let mut stack = vec![top.to_string()];
    expand(nl, root, "", &identity, &mut stack, &mut flat)?;
    flat.nets.extend(flat.ports.iter().cloned());
    Ok(flat)
}

fn expand(
    nl: &Netlist,
    sc: &Subckt,
    path: &str,
    binding: &HashMap<String, String>,
    stack: &mut Vec<String>,
    flat: &mut FlatNetlist,
) -> Result<(), NetlistError> {
    let resolve = |net: &str| -> String {
        if let Some(b) = binding.get(net) {
            b.clone()
        } else if path.is_empty() || nl.globals.contains(net) || net == "0" {
            net.to_string()
        } else {
            format!("{path}/{net}")
        }
    };
    let qualify = |name: &str| {
        if path.is_empty() {
            name.to_string()
        } else {
            format!("{path}/{name}")
        }
    };
    for d in &sc.devices {
        let pins: Vec<String> = d.pins.iter().map(|p| resolve(p)).collect();
        flat.nets.extend(pins.iter().cloned());
        flat.devices.push(Device {
            name: qualify(&d.name),
            pins,
            ..d.clone()
        });
    }
    for inst in &sc.instances {
        let child = nl.subckt(&inst.subckt).ok_or_else(|| NetlistError::DanglingInstance {
            line: 0,
            instance: inst.name.clone(),
            subckt: inst.subckt.clone(),
        })?;
        if stack.contains(&child.name) {
            return Err(NetlistError::Cycle(child.name.clone()));
        }
        if child.ports.len() != inst.ports.len() {
            return Err(NetlistError::UnboundPort {
                instance: inst.name.clone(),
                subckt: child.name.clone(),
                expected: child.ports.len(),
                found: inst.ports.len(),
            });
        }
        let map: HashMap<String, String> = child
            .ports
            .iter()
            .zip(&inst.ports)
            .map(|(p, n)| (p.clone(), resolve(n)))
            .collect();
        stack.push(child.name.clone());
        expand(nl, child, &qualify(&inst.name), &map, stack, flat)?;
        stack.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mos_card_maps_directly() {
        let nl = parse_spice(".subckt a d g s b\nM1 d g s b nmos nfin=4\n.ends\n").unwrap();
        let d = &nl.subckts[0].devices[0];
        assert_eq!(d.name, "m1");
        assert_eq!(d.kind, DeviceKind::Nmos);
        assert_eq!(d.pins, vec!["d", "g", "s", "b"]);
        assert_eq!(d.params["nfin"], 4.0);
    }

    #[test]
    fn bulk_defaults_to_source_and_case_folds() {
        let nl = parse_spice("MP1 OUT IN VDD PCH_LVT\n").unwrap();
        let d = &nl.subckts[0].devices[0];
        assert_eq!(d.kind, DeviceKind::Pmos);
        assert_eq!(d.pins, vec!["out", "in", "vdd", "vdd"]);
        assert_eq!(nl.top.as_deref(), Some("top"));
    }

    #[test]
    fn model_map_overrides_heuristic() {
        let mut map = ModelMap::new();
        map.insert("pdevice_n".into(), DeviceKind::Nmos);
        let nl = parse_spice_with("m1 d g s b pdevice_n\n", &map).unwrap();
        assert_eq!(nl.subckts[0].devices[0].kind, DeviceKind::Nmos);
    }

    #[test]
    fn continuation_and_comments() {
        let text = "* header\n.subckt x a b\nr1 a $ trailing\n+ b 1k\nc1 a b\n+ value=10f\n.ends x\n";
        let nl = parse_spice(text).unwrap();
        let sc = &nl.subckts[0];
        assert_eq!(sc.devices[0].pins, vec!["a", "b"]);
        assert_eq!(sc.devices[0].params["value"], 1000.0);
        assert!((sc.devices[1].params["value"] - 10e-15).abs() < 1e-27);
    }

    #[test]
    fn suffixes() {
        assert_eq!(parse_value("4"), Some(4.0));
        assert_eq!(parse_value("2meg"), Some(2e6));
        assert_eq!(parse_value("3m"), Some(3e-3));
        assert_eq!(parse_value("1.5e3"), Some(1500.0));
        assert_eq!(parse_value("10pF"), Some(10e-12));
        assert_eq!(parse_value("abc"), None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            parse_spice("\nq1 a b c\n"),
            Err(NetlistError::UnknownPrefix { line: 2, prefix: 'q' })
        ));
        assert!(matches!(
            parse_spice("m1 a b nmos\n"),
            Err(NetlistError::Arity { line: 1, .. })
        ));
        assert!(matches!(
            parse_spice(".subckt a x\n.ends\n.subckt a x\n.ends\n"),
            Err(NetlistError::DuplicateSubckt { line: 3, .. })
        ));
        assert!(matches!(
            parse_spice(".subckt a x\nx1 x missing\n.ends\n"),
            Err(NetlistError::DanglingInstance { line: 2, .. })
        ));
        assert!(matches!(
            parse_spice(".subckt a x y\n.ends\nx1 n a\n"),
            Err(NetlistError::Arity { line: 3, expected: 2, found: 1, .. })
        ));
        assert!(matches!(parse_spice("+ a b\n"), Err(NetlistError::Syntax { line: 1, .. })));
    }

    #[test]
    fn two_level_structure() {
        let text = ".subckt ota a b o\nm1 o a b b nmos\n.ends\n.subckt top2 i1 i2 o1 o2\nx1 i1 i2 o1 ota\nx2 i2 i1 o2 ota\n.ends\n";
        let nl = parse_spice(text).unwrap();
        assert_eq!(nl.subckts.len(), 2);
        assert_eq!(nl.subckt("top2").unwrap().instances.len(), 2);
        assert_eq!(nl.top.as_deref(), Some("top2"));
    }

    #[test]
    fn flatten_multiplies_and_renames() {
        let text = ".subckt cell a b\nr1 a mid 1k\nr2 mid b 1k\nc1 mid 0 1p\n.ends\nx1 in n1 cell\nx2 n1 out cell\n";
        let nl = parse_spice(text).unwrap();
        let flat = flatten(&nl, "top").unwrap();
        assert_eq!(flat.devices.len(), 6);
        assert!(flat.nets.contains("x1/mid"));
        assert!(flat.nets.contains("0"));
        assert_eq!(flat.device("x2/r1").unwrap().pins, vec!["n1", "x2/mid"]);
    }

    #[test]
    fn flatten_without_instances_is_identity() {
        let nl = parse_spice(".subckt a p q\nr1 p q 1\n.ends\n").unwrap();
        let flat = flatten(&nl, "a").unwrap();
        assert_eq!(flat.devices, nl.subckts[0].devices);
    }

    #[test]
    fn cycles_are_rejected() {
        let text = ".subckt a p\nx1 p b\n.ends\n.subckt b p\nx1 p a\n.ends\n";
        let nl = parse_spice(text).unwrap();
        assert!(matches!(flatten(&nl, "a"), Err(NetlistError::Cycle(_))));
    }
}
