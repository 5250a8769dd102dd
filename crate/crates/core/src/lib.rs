//! Netlist-to-layout synthesis for small analog circuits.
//!
//! The flow runs SPICE parsing and flattening ([`netlist`]), circuit-graph
//! recognition ([`graph`], [`annotate`]), parameterized primitive generation
//! on a gridded rule deck ([`pdk`], [`primgen`]), sequence-pair placement
//! ([`place`]), grid routing ([`route`]) and DRC/emission ([`layout`]).
//! [`flow`] strings the stages together.

pub mod annotate;
pub mod assemble;
pub mod flow;
pub mod geom;
pub mod graph;
pub mod layout;
pub mod netlist;
pub mod pdk;
pub mod place;
pub mod primgen;
pub mod route;

pub use geom::Rect;
pub use netlist::{Device, DeviceKind, FlatNetlist, Netlist, NetlistError, PinRole};
pub use pdk::{Direction, Pdk, PdkError};
