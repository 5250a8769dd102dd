mod common;

use gridloom::pdk::{mock14, mock65, Pdk};
use gridloom::place::{sp_to_placement, SequencePair};
use gridloom::route::{route_cost, Cell, CostMode, Route, RouteParams, RoutingGrid, Segment, ViaSite};
use proptest::prelude::*;

use common::*;

fn perm(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

fn sp_case() -> impl Strategy<Value = (SequencePair, Vec<(i64, i64)>)> {
    (1usize..9).prop_flat_map(|n| {
        (perm(n), perm(n), prop::collection::vec((1i64..50, 1i64..50), n))
            .prop_map(|(pos, neg, sizes)| (SequencePair { pos, neg }, sizes))
    })
}

fn pdks() -> [Pdk; 2] {
    [mock14(), mock65()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn packing_never_overlaps((sp, sizes) in sp_case()) {
        let xy = sp_to_placement(&sp, &sizes);
        for a in 0..sizes.len() {
            prop_assert!(xy[a].0 >= 0 && xy[a].1 >= 0);
            for b in a + 1..sizes.len() {
                let apart = xy[a].0 + sizes[a].0 <= xy[b].0
                    || xy[b].0 + sizes[b].0 <= xy[a].0
                    || xy[a].1 + sizes[a].1 <= xy[b].1
                    || xy[b].1 + sizes[b].1 <= xy[a].1;
                prop_assert!(apart, "{a} and {b} overlap");
            }
        }
    }

    #[test]
    fn packing_matches_pairwise_relations((sp, sizes) in sp_case()) {
        prop_assert_eq!(sp_to_placement(&sp, &sizes), pack(&sp.pos, &sp.neg, &sizes));
    }

    #[test]
    fn track_and_stop_indices_round_trip(k in -500i64..500) {
        for pdk in pdks() {
            for l in 0..pdk.num_layers() {
                prop_assert_eq!(pdk.track_index(l, pdk.track_coord(l, k)).unwrap(), k);
                if let Ok(x) = pdk.stop_coord(l, k) {
                    prop_assert_eq!(pdk.stop_index(l, x).unwrap(), k);
                }
            }
        }
    }

    #[test]
    fn wire_resistance_is_additive(lo in -50i64..50, len in 1i64..60, cut in 0i64..60, layer in 0usize..3) {
        let pdk = mock14();
        let hi = lo + len;
        let cut = lo + cut % len;
        let name = pdk.layer(layer).name.clone();
        let seg = |lo, hi| Segment { layer: name.clone(), track: 0, lo, hi };
        let whole = Route { net: "w".into(), segments: vec![seg(lo, hi)], ..Route::default() };
        let split = Route { net: "w".into(), segments: vec![seg(lo, cut), seg(cut, hi)], ..Route::default() };
        prop_assert_eq!(whole.resistance_uohm(&pdk).unwrap(), split.resistance_uohm(&pdk).unwrap());
        prop_assert_eq!(whole.length(&pdk).unwrap(), split.length(&pdk).unwrap());
    }

    #[test]
    fn mirroring_twice_is_identity(
        segs in prop::collection::vec((0usize..3, -20i64..20, -20i64..20, 0i64..10), 1..6),
        vias in prop::collection::vec((0usize..2, -20i64..20, -20i64..20), 0..4),
        half in -10i64..10,
    ) {
        let pdk = mock14();
        let axis = 40 + 40 * half;
        let mut r = Route {
            net: "a".into(),
            segments: segs
                .into_iter()
                .map(|(l, track, lo, len)| Segment { layer: pdk.layer(l).name.clone(), track, lo, hi: lo + len })
                .collect(),
            vias: vias
                .into_iter()
                .map(|(l, i, j)| ViaSite { via: pdk.via_between(l).unwrap().name.clone(), i, j })
                .collect(),
            cost: 7,
        };
        r.segments.sort();
        r.vias.sort();
        let back = r.mirrored(&pdk, axis, "b").unwrap().mirrored(&pdk, axis, "a").unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn search_cost_equals_dijkstra(
        seed_cells in prop::collection::vec((0usize..3, 0i64..14, 0i64..14), 0..60),
        s in (0usize..3, 1i64..13, 1i64..13),
        t in (0usize..3, 1i64..13, 1i64..13),
        resistance in any::<bool>(),
    ) {
        let pdk = mock14();
        let mut grid = RoutingGrid::new(&pdk, 14, 14, 3, 1).unwrap();
        for (l, i, j) in seed_cells {
            grid.block(Cell::new(l, i, j));
        }
        let (s, t) = (Cell::new(s.0, s.1, s.2), Cell::new(t.0, t.1, t.2));
        prop_assume!(s != t && grid.passable("n", s) && grid.passable("n", t));
        let mode = if resistance { CostMode::Resistance } else { CostMode::Length };
        let params = RouteParams { mode, ..RouteParams::default() };
        let oracle = dijkstra(&mut grid, "n", s, t, mode, &params);
        let got = route_cost(&mut grid, "n", &[vec![s], vec![t]], &params).ok();
        prop_assert_eq!(got, oracle);
    }
}

#[test]
fn frozen_exhaustive_minimum_area() {
    let inst = SmallInstance {
        sizes: vec![(3, 2), (2, 4), (5, 1), (1, 1)],
        pins: vec![Default::default(); 4],
    };
    assert_eq!(inst.exhaustive_min(1, 0), FROZEN_MIN_AREA);
}

#[test]
fn frozen_dijkstra_cost() {
    let pdk = mock14();
    let mut grid = RoutingGrid::new(&pdk, 12, 12, 3, 1).unwrap();
    for j in 1..10 {
        grid.block(Cell::new(0, 6, j));
        grid.block(Cell::new(1, 6, j));
    }
    let (s, t) = (Cell::new(0, 2, 5), Cell::new(0, 9, 5));
    let params = RouteParams::default();
    let oracle = dijkstra(&mut grid, "n", s, t, CostMode::Length, &params);
    assert_eq!(oracle, Some(FROZEN_DETOUR_COST));
    assert_eq!(route_cost(&mut grid, "n", &[vec![s], vec![t]], &params).unwrap(), FROZEN_DETOUR_COST);
}

const FROZEN_MIN_AREA: i128 = 25;
const FROZEN_DETOUR_COST: i64 = 1520;
