use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rangeloc::baseline::baseline_least_squares;
use rangeloc::central::solve_minmax_sdp;
use rangeloc::dist::{run_dis_minmax, solve_local, DisMinMaxConfig, LocalConstraint};
use rangeloc::geom::{grid_chebyshev_center, FeasibleRegion};
use rangeloc::model::{
    apply_errors, build_feasibility_intervals, generate_scenario, Area, ErrorModel, NetworkScenario, Point2,
    ScenarioConfig,
};
use rangeloc::sdp::SolverConfig;

fn scenario(n: usize, range: f64) -> NetworkScenario {
    let exact = generate_scenario(&ScenarioConfig::inner_anchors(n, range), 1).unwrap();
    apply_errors(&exact, &ErrorModel::Gaussian { sigma: 0.02 }, 2).unwrap()
}

fn central(c: &mut Criterion) {
    let s = scenario(10, 0.6);
    let solver = SolverConfig::default();
    c.bench_function("central n=10", |b| b.iter(|| solve_minmax_sdp(black_box(&s), &solver).unwrap()));
}

fn local(c: &mut Criterion) {
    let cons: Vec<LocalConstraint> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.7, 0.8), (0.4, 0.2)]
        .iter()
        .map(|&(x, y)| {
            let d = Point2::new(0.35, 0.4).dist(Point2::new(x, y));
            LocalConstraint { center: Point2::new(x, y), lower: (d - 0.05).max(0.0), upper: d + 0.05 }
        })
        .collect();
    let solver = SolverConfig::default();
    c.bench_function("local sdp, 5 neighbors", |b| b.iter(|| solve_local(black_box(&cons), &solver).unwrap()));
}

fn distributed(c: &mut Criterion) {
    let s = scenario(50, 0.5);
    let config = DisMinMaxConfig::default();
    let mut g = c.benchmark_group("distributed");
    g.sample_size(10);
    g.bench_function("n=50", |b| b.iter(|| run_dis_minmax(black_box(&s), &config).unwrap()));
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let s = scenario(10, 0.6);
    let region = FeasibleRegion::for_sensor(&s, &build_feasibility_intervals(&s), s.sensors[0]).unwrap();
    let mut g = c.benchmark_group("grid oracle");
    g.sample_size(10);
    g.bench_function("chebyshev res=2e-3", |b| {
        b.iter(|| grid_chebyshev_center(black_box(&region), region.bbox(), 2e-3).unwrap())
    });
    g.finish();
}

fn baseline(c: &mut Criterion) {
    let s = scenario(20, 0.5);
    c.bench_function("least squares n=20", |b| {
        b.iter(|| baseline_least_squares(black_box(&s), Area::UNIT_CENTERED, 3).unwrap())
    });
}

criterion_group!(benches, central, local, distributed, oracle, baseline);
criterion_main!(benches);
