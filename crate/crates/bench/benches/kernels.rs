use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use gridloom::assemble::{assemble, generate_leaves, AssemblyParams};
use gridloom::layout::drc;
use gridloom::pdk::mock14;
use gridloom::place::{anneal, sp_to_placement, AnnealParams};
use gridloom::route::{route_net, Cell, RouteParams, RoutingGrid};
use gridloom_bench::{annotation, chain_problem, random_sp, OTA5T, SCFILTER};

fn packing(c: &mut Criterion) {
    let mut g = c.benchmark_group("sp_to_placement");
    for n in [8, 32, 128] {
        let (sp, sizes) = random_sp(n, 1);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| sp_to_placement(black_box(&sp), &sizes)));
    }
    g.finish();
}

fn annealing(c: &mut Criterion) {
    let mut g = c.benchmark_group("anneal");
    g.sample_size(10);
    let params = AnnealParams {
        restarts: 1,
        ..AnnealParams::default()
    };
    for n in [4, 8] {
        let p = chain_problem(n, 2);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| anneal(&p, &params, 0).unwrap()));
    }
    g.finish();
}

fn routing(c: &mut Criterion) {
    let pdk = mock14();
    let params = RouteParams::default();
    c.bench_function("route_net/40x40", |b| {
        b.iter(|| {
            let mut grid = RoutingGrid::new(&pdk, 40, 40, 3, 1).unwrap();
            for j in 5..35 {
                grid.block(Cell::new(1, 20, j));
            }
            let t = [vec![Cell::new(0, 3, 3)], vec![Cell::new(0, 36, 30)], vec![Cell::new(1, 30, 8)]];
            route_net(&mut grid, &pdk, "a", &t, &params).unwrap()
        })
    });
}

fn checking(c: &mut Criterion) {
    let pdk = mock14();
    let ann = annotation(SCFILTER, "scfilter");
    let params = AssemblyParams::default();
    let leaves = generate_leaves(&ann, &pdk, params.variants).unwrap();
    let layout = assemble(&ann, &leaves, &pdk, &params).unwrap().layout;
    c.bench_function("drc/scfilter", |b| b.iter(|| drc(black_box(&layout), &pdk)));
}

fn assembling(c: &mut Criterion) {
    let pdk = mock14();
    let ann = annotation(OTA5T, "ota5t");
    let params = AssemblyParams::default();
    let mut g = c.benchmark_group("assemble");
    g.sample_size(10);
    g.bench_function("ota5t", |b| {
        b.iter(|| {
            let leaves = generate_leaves(&ann, &pdk, params.variants).unwrap();
            assemble(&ann, &leaves, &pdk, &params).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, packing, annealing, routing, checking, assembling);
criterion_main!(benches);
