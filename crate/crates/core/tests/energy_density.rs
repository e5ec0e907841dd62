use std::sync::Arc;

use fracstrat_core::energy::{tol_mono, EnergyContext, EnergyTables};
use fracstrat_core::extension::{default_z_levels, Lattice};
use fracstrat_core::{
    extend, make_params, solve_allen_cahn, Error, ExtensionField, Field, Grid, HalfSpaceSign, Potential, SolverConfig,
};

fn lattice_1d(h: f64, half: f64) -> Lattice {
    let m = (2.0 * half / h).round() as usize;
    Lattice { n: 1, h, counts: [m, 1], origin: [-half + 0.5 * h, 0.0] }
}

fn levels(h: f64, top: f64) -> Vec<f64> {
    (1..=(top / h).round() as usize).map(|k| k as f64 * h).collect()
}

fn ctx(n: usize, s: f64, eps: f64, pot: Potential) -> EnergyContext {
    EnergyContext { n, s, d_s: make_params(n, s).unwrap().d_s, epsilon: eps, pot }
}

fn beta_fn(p: f64, q: f64) -> f64 {
    libm::tgamma(p) * libm::tgamma(q) / libm::tgamma(p + q)
}

#[test]
fn pure_phases_carry_no_energy() {
    for phase in [1.0, -1.0] {
        let lat = lattice_1d(0.01, 1.0);
        let u = ExtensionField::from_fn(lat, levels(0.01, 0.6), 0.3, |_, _| phase).unwrap();
        let t = EnergyTables::new(&u, ctx(1, 0.3, 0.1, Potential::prototype())).unwrap();
        let e = t.energy_brute(&[0.005], 0.5).unwrap();
        assert_eq!((e.dirichlet, e.potential, e.total), (0.0, 0.0, 0.0));
        assert_eq!(t.theta(0.5, &[0.005]).unwrap(), 0.0);
    }
}

#[test]
fn linear_profile_matches_the_weighted_half_disc_integral() {
    let s = 0.3;
    let a = 1.0 - 2.0 * s;
    let h = 0.0025;
    let lat = lattice_1d(h, 1.0);
    let u = ExtensionField::from_fn(lat, levels(h, 0.6), s, |x, _| x[0]).unwrap();
    let c = ctx(1, s, 0.1, Potential::zero());
    let d_s = c.d_s;
    let t = EnergyTables::new(&u, c).unwrap();
    for r in [0.2f64, 0.4] {
        // (d_s/2)·∫_0^r z^a·2√(r²−z²) dz
        let exact = 0.5 * d_s * r.powf(a + 2.0) * beta_fn((a + 1.0) / 2.0, 1.5);
        let got = t.energy_brute(&[0.00125], r).unwrap();
        assert!(((got.dirichlet - exact) / exact).abs() < 0.02, "r = {r}: {} vs {exact}", got.dirichlet);
        assert_eq!(got.potential, 0.0);
    }
}

#[test]
fn theta_is_invariant_under_the_blow_up_scaling() {
    let (s, eps, h) = (0.3, 0.1, 0.01);
    let f = move |x: &[f64], z: f64| (x[0] / (eps + z)).tanh();
    let lam = 2.0;
    let u1 = ExtensionField::from_fn(lattice_1d(h, 1.0), levels(h, 0.5), s, f).unwrap();
    let scaled = Lattice { n: 1, h: lam * h, counts: [200, 1], origin: [lam * (-1.0 + 0.5 * h), 0.0] };
    let lv: Vec<f64> = levels(h, 0.5).iter().map(|z| lam * z).collect();
    let u2 = ExtensionField::from_fn(scaled, lv, s, move |x, z| f(&[x[0] / lam], z / lam)).unwrap();
    let t1 = EnergyTables::new(&u1, ctx(1, s, eps, Potential::prototype())).unwrap();
    let t2 = EnergyTables::new(&u2, ctx(1, s, lam * eps, Potential::prototype())).unwrap();
    for r in [0.1, 0.25, 0.4] {
        let a = t1.theta(r, &[0.005]).unwrap();
        let b = t2.theta(lam * r, &[0.01]).unwrap();
        assert!(((a - b) / a).abs() < 1e-10, "r = {r}: {a} vs {b}");
    }
}

#[test]
fn zero_homogeneous_profile_has_constant_density() {
    // the unresolved core near the origin costs O((h/r)^{1−2s})
    let s = 0.1;
    let h = 0.002;
    let u = ExtensionField::from_fn(lattice_1d(h, 1.0), levels(h, 0.5), s, |x, z| x[0] / (x[0] * x[0] + z * z).sqrt())
        .unwrap();
    let t = EnergyTables::new(&u, ctx(1, s, 0.1, Potential::zero())).unwrap();
    let th: Vec<f64> = [0.1, 0.2, 0.4].iter().map(|&r| t.theta(r, &[0.0]).unwrap()).collect();
    for v in &th {
        assert!((v / th[2] - 1.0).abs() < 0.05, "{th:?}");
    }
}

#[test]
fn node_prefix_sums_agree_with_enumeration() {
    let (s, eps, h) = (0.3, 0.1, 0.01);
    let lat = Lattice { n: 2, h, counts: [80, 80], origin: [-0.395, -0.395] };
    let u = ExtensionField::from_fn(lat, levels(h, 0.3), s, move |x, z| ((x[0] + 0.3 * x[1]) / (eps + z)).tanh())
        .unwrap();
    let t = EnergyTables::new(&u, ctx(2, s, eps, Potential::prototype())).unwrap();
    let x0 = [0.005, -0.015];
    let mi = t.node_of(&x0).unwrap();
    for r in [0.05, 0.13, 0.3] {
        let a = t.energy_at_node(mi, r).unwrap();
        let b = t.energy_brute(&x0, r).unwrap();
        assert!((a.total - b.total).abs() <= 1e-10 * b.total, "{} vs {}", a.total, b.total);
    }
}

#[test]
fn unresolved_and_oversized_radii_are_domain_errors() {
    let h = 0.01;
    let u = ExtensionField::from_fn(lattice_1d(h, 1.0), levels(h, 0.5), 0.3, |x, _| x[0].tanh()).unwrap();
    let t = EnergyTables::new(&u, ctx(1, 0.3, 0.1, Potential::prototype())).unwrap();
    assert!(matches!(t.theta(1.5 * h, &[0.005]), Err(Error::Domain(_))));
    assert!(matches!(t.theta(0.8, &[0.005]), Err(Error::Domain(_))));
    assert!(matches!(t.energy_brute(&[0.9], 0.3), Err(Error::Domain(_))));
    assert!(t.monotonicity_residual(&[0.005], 0.3, 0.2).is_err());
}

#[test]
fn solved_layer_density_curve_and_uniform_bound() {
    let eps = 0.05;
    let grid = Grid::with_spacing(1, 2.0, eps / 4.0, Arc::new(HalfSpaceSign { axis: 0 })).unwrap();
    let cfg = SolverConfig::new(make_params(1, 0.3).unwrap(), Potential::prototype(), eps, Arc::new(grid)).unwrap();
    let init = Field::new(cfg.grid.clone(), cfg.grid.default_init()).unwrap();
    let u = solve_allen_cahn(&cfg, &init).unwrap();
    let ext = extend(&u, &cfg, &default_z_levels(cfg.grid.h, 1.0)).unwrap();
    let t = EnergyTables::new(&ext, EnergyContext::from(&cfg)).unwrap();
    let x0 = cfg.grid.coord(cfg.grid.len() / 2);
    let curve = t.density_curve(&x0, &[0.05, 0.1, 0.2, 0.4]).unwrap();
    assert!(curve.worst_dip() <= tol_mono(cfg.grid.h, eps) * curve.theta[3]);
    assert!(curve.theta.iter().all(|v| v.is_finite() && *v > 0.0));
    let centers: Vec<Vec<f64>> = [-0.4, 0.0, 0.4].iter().map(|&c| vec![x0[0] + c]).collect();
    let audit = t.lambda_audit(&centers, &[0.1, 0.2]).unwrap();
    assert!(audit.holds, "{audit:?}");
    let mut csv = Vec::new();
    curve.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 5);
}
