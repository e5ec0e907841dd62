use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use fracstrat_core::experiments::half_plane_mask;
use fracstrat_core::extension::default_z_levels;
use fracstrat_core::strat::maximal_net;
use fracstrat_core::{
    beta2, extend, frac_laplacian_apply, make_params, perimeter_2s, DiscreteMeasure, Field, Grid, HalfSpaceSign, Potential,
    SolverConfig, Window,
};

fn layer_config(n: usize, eps: f64, res: f64) -> (SolverConfig, Field) {
    let grid = Grid::with_spacing(n, 1.0, eps / res, Arc::new(HalfSpaceSign { axis: 0 })).unwrap();
    let cfg = SolverConfig::new(make_params(n, 0.3).unwrap(), Potential::prototype(), eps, Arc::new(grid)).unwrap();
    let u = Field::from_fn(cfg.grid.clone(), |x| (x[0] / eps).tanh()).unwrap();
    (cfg, u)
}

/// Deterministic scattered points in [−1, 1]² from the golden-ratio sequence.
fn scattered(count: usize) -> Vec<Vec<f64>> {
    let g = 0.618_033_988_749_895;
    (0..count).map(|i| vec![2.0 * ((i as f64 * g) % 1.0) - 1.0, 2.0 * (i as f64 + 0.5) / count as f64 - 1.0]).collect()
}

fn operator(c: &mut Criterion) {
    let (cfg, u) = layer_config(1, 0.05, 8.0);
    c.bench_function("frac_laplacian_apply/1d_320_nodes", |b| {
        b.iter(|| (0..cfg.grid.len()).map(|i| frac_laplacian_apply(black_box(&u), i, &cfg).unwrap()).sum::<f64>())
    });
    let (cfg2, u2) = layer_config(2, 0.2, 4.0);
    c.bench_function("frac_laplacian_apply/2d_centre_node", |b| {
        let mid = cfg2.grid.len() / 2;
        b.iter(|| frac_laplacian_apply(black_box(&u2), mid, &cfg2).unwrap())
    });
}

fn extension(c: &mut Criterion) {
    let (cfg, u) = layer_config(1, 0.05, 4.0);
    let z = default_z_levels(cfg.grid.h, 1.0);
    c.bench_function("extend/1d_layer", |b| b.iter(|| extend(black_box(&u), &cfg, &z).unwrap()));
}

fn beta(c: &mut Criterion) {
    let pts = scattered(400);
    let mu = DiscreteMeasure::new(pts, vec![1.0; 400], None).unwrap();
    c.bench_function("beta2/400_atoms", |b| b.iter(|| beta2(black_box(&mu), &[0.0, 0.0], 0.8, 1).unwrap()));
}

fn perimeter(c: &mut Criterion) {
    let mask = half_plane_mask(64);
    let w = Window { center: [0.0, 0.0], radius: 1.0 };
    c.bench_function("perimeter_2s/64px", |b| b.iter(|| perimeter_2s(black_box(&mask), &w, 0.25).unwrap()));
}

fn net(c: &mut Criterion) {
    let pts = scattered(2000);
    c.bench_function("maximal_net/2000_points", |b| b.iter(|| maximal_net(black_box(&pts), 0.05)));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = operator, extension, beta, perimeter, net
}
criterion_main!(benches);
