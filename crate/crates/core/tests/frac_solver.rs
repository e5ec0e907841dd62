use std::f64::consts::PI;
use std::sync::Arc;

use fracstrat_core::energy::{EnergyContext, EnergyTables};
use fracstrat_core::extension::{calibrate_ds_with, default_z_levels};
use fracstrat_core::{
    calibrate_ds, extend, frac_laplacian_apply, make_params, make_params_with_ds, solve_allen_cahn, solve_allen_cahn_traced,
    Constant, Error, ExteriorData, Field, FnExterior, Grid, HalfSpaceSign, Potential, SolverConfig,
};
use proptest::prelude::*;

fn config(n: usize, s: f64, eps: f64, grid: Grid) -> SolverConfig {
    SolverConfig::new(make_params(n, s).unwrap(), Potential::prototype(), eps, Arc::new(grid)).unwrap()
}

fn layer(s: f64, eps: f64, res: f64) -> (SolverConfig, Field) {
    let grid = Grid::with_spacing(1, 2.0, eps / res, Arc::new(HalfSpaceSign { axis: 0 })).unwrap();
    let cfg = config(1, s, eps, grid);
    let init = Field::new(cfg.grid.clone(), cfg.grid.default_init()).unwrap();
    let u = solve_allen_cahn(&cfg, &init).unwrap();
    (cfg, u)
}

/// Linear interpolation of a 1D cell-centred field.
fn interp(f: &Field, x: f64) -> f64 {
    let g = &f.grid;
    let t = (x + g.half_width) / g.h - 0.5;
    let i = (t.floor() as isize).clamp(0, g.len() as isize - 2) as usize;
    let w = t - i as f64;
    f.values[i] * (1.0 - w) + f.values[i + 1] * w
}

#[test]
fn constants_are_annihilated() {
    for n in [1, 2] {
        let m = if n == 1 { 64 } else { 24 };
        let grid = Grid::new(n, 1.0, m, Arc::new(Constant(0.7))).unwrap();
        let cfg = config(n, 0.3, 0.25, grid);
        let u = Field::from_fn(cfg.grid.clone(), |_| 0.7).unwrap();
        for i in 0..cfg.grid.len() {
            assert!(frac_laplacian_apply(&u, i, &cfg).unwrap().abs() < 1e-8);
        }
    }
}

#[test]
fn gaussian_matches_fourier_evaluation() {
    let s = 0.3;
    // (−Δ)^s e^{−x²/2} at 0 through its Fourier transform √(2π) e^{−ξ²/2}
    let oracle = 2.0 / (2.0 * PI).sqrt()
        * quadrature::integrate(|xi: f64| xi.powf(2.0 * s) * (-0.5 * xi * xi).exp(), 0.0, 40.0, 1e-13).integral;
    let grid = Grid::new(1, 8.0, 321, Arc::new(Constant(0.0))).unwrap();
    let cfg = config(1, s, 0.5, grid);
    let u = Field::from_fn(cfg.grid.clone(), |x| (-0.5 * x[0] * x[0]).exp()).unwrap();
    let center = cfg.grid.len() / 2;
    assert!(cfg.grid.coord(center)[0].abs() < 1e-12);
    let got = frac_laplacian_apply(&u, center, &cfg).unwrap();
    assert!(((got - oracle) / oracle).abs() < 0.02, "{got} vs {oracle}");
}

#[test]
fn odd_data_vanish_at_the_centre() {
    let grid = Grid::new(1, 1.0, 41, Arc::new(HalfSpaceSign { axis: 0 })).unwrap();
    let cfg = config(1, 0.3, 0.1, grid);
    let u = Field::from_fn(cfg.grid.clone(), |x| (x[0] / 0.1).tanh()).unwrap();
    let v = frac_laplacian_apply(&u, 20, &cfg).unwrap();
    assert!(v.abs() < 1e-9, "{v}");
}

#[test]
fn unresolved_or_foreign_nodes_are_reported() {
    let grid = Grid::new(1, 1.0, 16, Arc::new(Constant(1.0))).unwrap();
    let cfg = config(1, 0.3, 0.25, grid);
    let u = Field::from_fn(cfg.grid.clone(), |_| 1.0).unwrap();
    assert!(matches!(frac_laplacian_apply(&u, 99, &cfg), Err(Error::Domain(_))));
}

#[test]
fn constant_state_is_a_fixed_point() {
    let grid = Grid::new(1, 1.0, 40, Arc::new(Constant(1.0))).unwrap();
    let cfg = config(1, 0.3, 0.1, grid);
    let init = Field::from_fn(cfg.grid.clone(), |_| 1.0).unwrap();
    let tr = solve_allen_cahn_traced(&cfg, &init, 0).unwrap();
    assert_eq!(tr.iterations, 0);
    assert!(tr.field.values.iter().all(|&v| v == 1.0));
    assert!(tr.residual < 1e-8);
}

#[test]
fn layer_is_monotone_and_centred() {
    let (cfg, u) = layer(0.3, 0.05, 4.0);
    assert!(u.values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let mid = cfg.grid.len() / 2;
    for i in [mid - 1, mid] {
        assert!(u.values[i].abs() < 0.2, "u({}) = {}", cfg.grid.coord(i)[0], u.values[i]);
    }
    let lam = cfg.lambda();
    assert!(u.values.iter().all(|v| v.abs() <= lam + 1e-9));
}

#[test]
fn layer_tail_decays_like_distance_to_minus_2s() {
    for s in [0.1, 0.3, 0.4] {
        let mut slopes = Vec::new();
        for res in [4.0, 8.0] {
            let (_, u) = layer(s, 0.05, res);
            let d: Vec<f64> = (0..8).map(|k| 0.1 * 1.3f64.powi(k)).collect();
            let x: Vec<f64> = d.iter().map(|v| v.ln()).collect();
            let y: Vec<f64> = d.iter().map(|&v| (1.0 - interp(&u, v).abs()).ln()).collect();
            let (xm, ym) = (x.iter().sum::<f64>() / 8.0, y.iter().sum::<f64>() / 8.0);
            let b = x.iter().zip(&y).map(|(a, c)| (a - xm) * (c - ym)).sum::<f64>()
                / x.iter().map(|a| (a - xm).powi(2)).sum::<f64>();
            slopes.push(-b);
        }
        for sl in &slopes {
            assert!((sl - 2.0 * s).abs() <= 0.3, "s = {s}: tail exponent {sl}");
        }
        assert!((slopes[0] - slopes[1]).abs() < 0.05);
    }
}

#[test]
fn refinement_error_contracts_linearly() {
    let eps = 0.1;
    let f: Vec<Field> = [2.0, 4.0, 8.0].iter().map(|&r| layer(0.3, eps, r).1).collect();
    let pts: Vec<f64> = (0..200).map(|i| -1.9 + 3.8 * i as f64 / 199.0).collect();
    let d = |a: &Field, b: &Field| pts.iter().map(|&x| (interp(a, x) - interp(b, x)).abs()).fold(0.0, f64::max);
    let ratio = d(&f[1], &f[2]) / d(&f[0], &f[1]);
    assert!((0.3..=0.7).contains(&ratio), "ratio {ratio}");
}

#[test]
fn energy_descends_along_the_flow() {
    let eps = 0.05;
    let grid = Grid::with_spacing(1, 2.0, eps / 4.0, Arc::new(HalfSpaceSign { axis: 0 })).unwrap();
    let cfg = config(1, 0.3, eps, grid);
    let init = Field::new(cfg.grid.clone(), cfg.grid.default_init()).unwrap();
    let z = default_z_levels(cfg.grid.h, 1.0);
    for every in [100, 10] {
        let tr = solve_allen_cahn_traced(&cfg, &init, every).unwrap();
        assert!(tr.snapshots.len() >= 2);
        let e: Vec<f64> = tr
            .snapshots
            .iter()
            .chain(std::iter::once(&tr.field))
            .map(|f| {
                let ext = extend(f, &cfg, &z).unwrap();
                EnergyTables::new(&ext, EnergyContext::from(&cfg)).unwrap().energy_brute(&[0.0], 1.0).unwrap().total
            })
            .collect();
        for w in e.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-3), "energy rose: {e:?}");
        }
    }
}

#[test]
fn init_above_the_bound_is_rejected() {
    let grid = Grid::new(1, 1.0, 40, Arc::new(Constant(1.0))).unwrap();
    let cfg = config(1, 0.3, 0.1, grid);
    let init = Field::from_fn(cfg.grid.clone(), |_| 1.5).unwrap();
    assert!(solve_allen_cahn(&cfg, &init).is_err());
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let grid = Grid::with_spacing(1, 2.0, 0.0125, Arc::new(HalfSpaceSign { axis: 0 })).unwrap();
    let cfg = config(1, 0.3, 0.05, grid).with_max_iter(3);
    let init = Field::new(cfg.grid.clone(), cfg.grid.default_init()).unwrap();
    assert!(matches!(solve_allen_cahn(&cfg, &init), Err(Error::NonConvergence { iterations: 3, .. })));
}

#[test]
fn extension_of_one_is_one() {
    let grid = Grid::new(1, 1.0, 40, Arc::new(Constant(1.0))).unwrap();
    let cfg = config(1, 0.3, 0.1, grid);
    let u = Field::from_fn(cfg.grid.clone(), |_| 1.0).unwrap();
    let ext = extend(&u, &cfg, &default_z_levels(cfg.grid.h, 1.0)).unwrap();
    for lvl in &ext.values {
        assert!(lvl.iter().all(|v| (v - 1.0).abs() < 1e-4));
    }
}

#[test]
fn extension_respects_the_maximum_principle_and_smooths() {
    let (cfg, u) = layer(0.3, 0.05, 4.0);
    let ext = extend(&u, &cfg, &default_z_levels(cfg.grid.h, 4.0)).unwrap();
    assert!(ext.sup_abs() <= 1.0 + 1e-6);
    let near = |z: f64| {
        ext.levels.iter().enumerate().min_by(|a, b| (a.1 - z).abs().total_cmp(&(b.1 - z).abs())).unwrap().0
    };
    assert!(ext.total_variation(near(4.0)) < ext.total_variation(near(1.0)));
}

#[test]
fn calibration_is_width_and_dimension_independent() {
    let levels: Vec<f64> = (0..6).map(|k| 1e-3 * 1.3f64.powi(k)).collect();
    for s in [0.1, 0.3, 0.45] {
        let p1 = make_params_with_ds(1, s, 1.0).unwrap();
        let a = calibrate_ds_with(&p1, 1.0, &levels).unwrap();
        let b = calibrate_ds_with(&p1, 2.0, &levels).unwrap();
        assert!((a / b - 1.0).abs() < 0.01, "s = {s}: {a} vs {b}");
        let c = calibrate_ds(&make_params_with_ds(2, s, 1.0).unwrap()).unwrap();
        assert!((a / c - 1.0).abs() < 0.02, "s = {s}: n=1 {a} vs n=2 {c}");
        // the analytic constant 2^{2s−1}Γ(s)/Γ(1−s)
        let exact = 2f64.powf(2.0 * s - 1.0) * libm::tgamma(s) / libm::tgamma(1.0 - s);
        assert!((a / exact - 1.0).abs() < 0.01, "s = {s}: {a} vs {exact}");
    }
}

#[test]
fn calibration_needs_two_levels() {
    let p = make_params_with_ds(1, 0.3, 1.0).unwrap();
    assert!(matches!(calibrate_ds_with(&p, 1.0, &[1e-3]), Err(Error::Calibration(_))));
}

#[test]
fn field_csv_rows_follow_node_order() {
    let grid = Grid::new(2, 1.0, 4, Arc::new(Constant(1.0))).unwrap();
    let f = Field::from_fn(Arc::new(grid), |x| x[0] + 10.0 * x[1]).unwrap();
    let mut out = Vec::new();
    f.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x1,x2,u");
    assert_eq!(lines.len(), 17);
    let mut again = Vec::new();
    f.write_csv(&mut again).unwrap();
    assert_eq!(text.as_bytes(), &again[..]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn apply_is_linear(alpha in -2.0f64..2.0, beta in -2.0f64..2.0, c in -1.0f64..1.0, k in 1.0f64..4.0) {
        let make = |g: Arc<dyn ExteriorData>, f: &dyn Fn(f64) -> f64| {
            let grid = Grid::new(1, 1.0, 32, g).unwrap();
            let cfg = config(1, 0.3, 0.2, grid);
            let u = Field::from_fn(cfg.grid.clone(), |x| f(x[0])).unwrap();
            (0..32).map(|i| frac_laplacian_apply(&u, i, &cfg).unwrap()).collect::<Vec<f64>>()
        };
        let f1 = move |x: f64| (k * x).sin();
        let f2 = move |x: f64| c * x * x;
        let a = make(Arc::new(Constant(0.5)), &f1);
        let b = make(Arc::new(HalfSpaceSign { axis: 0 }), &f2);
        let g = FnExterior::new(move |x: &[f64]| alpha * 0.5 + beta * x[0].signum(), alpha.abs() * 0.5 + beta.abs());
        let both = make(Arc::new(g), &move |x| alpha * f1(x) + beta * f2(x));
        for i in 0..32 {
            let lin = alpha * a[i] + beta * b[i];
            prop_assert!((both[i] - lin).abs() <= 1e-10 * (1.0 + lin.abs()), "{} vs {}", both[i], lin);
        }
    }
}
