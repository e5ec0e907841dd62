use std::f64::consts::PI;

use approx::assert_relative_eq;
use fracstrat_core::math::{ball_volume, gamma_ns, sphere_area};
use fracstrat_core::{make_params_with_ds, plane_distance, AffinePlane, Potential};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// ∫_{R^n} σ z^{2s}/(|x|²+z²)^{(n+2s)/2} dx, split at ρ = z; the outer
/// part uses ρ = z·u^{−1/(2s)}, which makes the ρ^{−1−2s} tail smooth.
fn kernel_mass(n: usize, s: f64, z: f64) -> f64 {
    let p = make_params_with_ds(n, s, 1.0).unwrap();
    let radial = |rho: f64| sphere_area(n) * rho.powi(n as i32 - 1) * p.poisson(rho * rho, z);
    let inner = quadrature::integrate(radial, 0.0, z, 1e-13).integral;
    let outer = quadrature::integrate(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let rho = z * u.powf(-1.0 / (2.0 * s));
            radial(rho) * z / (2.0 * s) * u.powf(-1.0 / (2.0 * s) - 1.0)
        },
        0.0,
        1.0,
        1e-13,
    )
    .integral;
    inner + outer
}

#[test]
fn gamma_constant_against_independent_gamma() {
    let expected = 2f64.sqrt() / (4.0 * PI.sqrt());
    assert_relative_eq!(gamma_ns(1, 0.25), expected, max_relative = 1e-12);
    assert!((gamma_ns(1, 0.25) - 0.19947).abs() < 1e-5);
    for &(n, s) in &[(1usize, 0.1), (2, 0.3), (2, 0.45)] {
        let nf = n as f64;
        let oracle = s * 2f64.powf(2.0 * s) * PI.powf(-nf / 2.0) * libm::tgamma((nf + 2.0 * s) / 2.0) / libm::tgamma(1.0 - s);
        assert_relative_eq!(gamma_ns(n, s), oracle, max_relative = 1e-10);
    }
}

#[test]
fn sigma_matches_closed_form() {
    for &(n, s) in &[(1usize, 0.1), (2, 0.1), (2, 0.3), (1, 0.45)] {
        let nf = n as f64;
        let closed = libm::tgamma((nf + 2.0 * s) / 2.0) / (PI.powf(nf / 2.0) * libm::tgamma(s));
        assert_relative_eq!(make_params_with_ds(n, s, 1.0).unwrap().sigma_ns, closed, max_relative = 1e-8);
    }
}

#[test]
fn weight_exponent_is_exact() {
    for s in [0.05, 0.1, 0.25, 0.3, 0.49] {
        for n in [1, 2] {
            assert_eq!(make_params_with_ds(n, s, 1.0).unwrap().a, 1.0 - 2.0 * s);
        }
    }
}

#[test]
fn extension_kernel_normalized_n2_s01() {
    let m = kernel_mass(2, 0.1, 1.0);
    assert!((m - 1.0).abs() < 1e-6, "mass {m}");
}

#[test]
fn extension_kernel_normalized_at_random_heights() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let z = 10f64.powf(rng.random_range(-1.0..1.0));
        for &(n, s) in &[(1usize, 0.3), (2, 0.2)] {
            let m = kernel_mass(n, s, z);
            assert!((m - 1.0).abs() <= 1e-4, "n={n} s={s} z={z}: mass {m}");
        }
    }
}

#[test]
fn ball_and_sphere_constants() {
    assert_relative_eq!(ball_volume(2), PI, max_relative = 1e-14);
    assert_relative_eq!(ball_volume(1), 2.0, max_relative = 1e-14);
    assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
}

#[test]
fn prototype_growth_audit_on_log_grid() {
    let p = Potential::prototype();
    let mut t: Vec<f64> = (0..=120).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 120.0)).collect();
    t.extend(t.clone().iter().map(|v| -v));
    t.push(0.0);
    assert!(p.audit_growth(&t));
    assert!(p.eval(0.5).0 >= 0.0 && p.eval(-3.0).0 >= 0.0);
}

#[test]
fn prototype_band_audit() {
    assert!(Potential::prototype().audit_band(1000));
}

#[test]
fn custom_potential_rejects_bad_constants() {
    assert!(Potential::custom("w", |t| t * t, |t| 2.0 * t, |_| 2.0, 0.5, 1.0, 0.1).is_err());
    assert!(Potential::custom("w", |t| t * t, |t| 2.0 * t, |_| 2.0, 2.0, 1.0, 0.6).is_err());
}

#[test]
fn plane_distance_examples() {
    let l = AffinePlane::new(vec![0.0, 0.0], vec![vec![1.0, 0.0]]).unwrap();
    assert_eq!(plane_distance(&l, &[3.0, 4.0]), 4.0);
    let p = AffinePlane::new(vec![0.0, 0.0], vec![]).unwrap();
    assert_eq!(plane_distance(&p, &[3.0, 4.0]), 5.0);
    let l = AffinePlane::new(vec![1.0, 0.0], vec![vec![0.0, 1.0]]).unwrap();
    assert_eq!(plane_distance(&l, &[4.0, 7.0]), 3.0);
}

proptest! {
    #[test]
    fn plane_distance_ignores_the_choice_of_basis(
        base in prop::array::uniform3(-2.0f64..2.0),
        a in prop::array::uniform3(-1.0f64..1.0),
        b in prop::array::uniform3(-1.0f64..1.0),
        y in prop::array::uniform3(-3.0f64..3.0),
        theta in 0.0f64..std::f64::consts::TAU,
    ) {
        let span = [a.to_vec(), b.to_vec()];
        let cross = [a[1]*b[2]-a[2]*b[1], a[2]*b[0]-a[0]*b[2], a[0]*b[1]-a[1]*b[0]];
        prop_assume!(cross.iter().map(|v| v * v).sum::<f64>() > 1e-3);
        let p1 = AffinePlane::from_spanning(base.to_vec(), &span).unwrap();
        let (c, s) = (theta.cos(), theta.sin());
        let d0 = &p1.dirs[0];
        let d1 = &p1.dirs[1];
        let e0: Vec<f64> = (0..3).map(|i| c * d0[i] + s * d1[i]).collect();
        let e1: Vec<f64> = (0..3).map(|i| -s * d0[i] + c * d1[i]).collect();
        let p2 = AffinePlane::new(base.to_vec(), vec![e0, e1]).unwrap();
        prop_assert!((plane_distance(&p1, &y) - plane_distance(&p2, &y)).abs() < 1e-10);
    }

    #[test]
    fn plane_distance_is_nonnegative_and_zero_on_the_plane(
        base in prop::array::uniform2(-2.0f64..2.0),
        phi in 0.0f64..std::f64::consts::PI,
        t in -5.0f64..5.0,
    ) {
        let d = vec![phi.cos(), phi.sin()];
        let l = AffinePlane::new(base.to_vec(), vec![d.clone()]).unwrap();
        let on = [base[0] + t * d[0], base[1] + t * d[1]];
        prop_assert!(plane_distance(&l, &on) < 1e-12);
        prop_assert!(plane_distance(&l, &[base[0] + 1.0, base[1]]) >= 0.0);
    }
}
