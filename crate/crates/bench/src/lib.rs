//! Input builders shared by the benchmarks.

use std::collections::BTreeMap;

use gridloom::annotate::{annotate, Annotation, ConstraintSpec, PatternLibrary};
use gridloom::netlist::{flatten, parse_spice};
use gridloom::place::{Block, BlockVariant, PlaceProblem, SequencePair};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const OTA5T: &str = include_str!("../../core/fixtures/ota5t.sp");
pub const SCFILTER: &str = include_str!("../../core/fixtures/scfilter.sp");

/// Random sequence pair over `n` blocks with random sizes on a 10 nm grid.
pub fn random_sp(n: usize, seed: u64) -> (SequencePair, Vec<(i64, i64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sp = SequencePair::identity(n);
    sp.pos.shuffle(&mut rng);
    sp.neg.shuffle(&mut rng);
    let sizes = (0..n).map(|_| (rng.gen_range(1..40) * 10, rng.gen_range(1..40) * 10)).collect();
    (sp, sizes)
}

/// `n` blocks with two variants each, chained by two-pin nets.
pub fn chain_problem(n: usize, seed: u64) -> PlaceProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = (0..n)
        .map(|k| {
            let (w, h) = (rng.gen_range(2..12) * 80, rng.gen_range(2..12) * 64);
            let pins = |w: i64, h: i64| {
                let mut m = BTreeMap::new();
                m.insert(format!("n{k}"), (0, h));
                m.insert(format!("n{}", k + 1), (2 * w, h));
                m
            };
            Block {
                name: format!("b{k}"),
                variants: vec![BlockVariant { w, h, pins: pins(w, h) }, BlockVariant { w: h, h: w, pins: pins(h, w) }],
            }
        })
        .collect();
    PlaceProblem {
        blocks,
        ..PlaceProblem::default()
    }
}

pub fn annotation(src: &str, top: &str) -> Annotation {
    let nl = parse_spice(src).expect("fixture parses");
    let flat = flatten(&nl, top).expect("fixture flattens");
    annotate(&flat, &PatternLibrary::builtin(), &ConstraintSpec::default()).expect("fixture annotates")
}
