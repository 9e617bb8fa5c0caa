use std::f64::consts::PI;

use proptest::prelude::*;
use wapf_core::{
    bodies_to_fields, Body, DomainSpec, GravityConfig, GravitySolver, GreenBoundary, Topology,
};

fn periodic_divergence(g: &[Vec<f64>], d: &DomainSpec) -> Vec<f64> {
    let eps = d.epsilon();
    (0..d.n_cells())
        .map(|i| {
            (0..d.dim())
                .map(|a| {
                    let up = d.neighbor(i, a, 1).unwrap();
                    let dn = d.neighbor(i, a, -1).unwrap();
                    (g[a][up] - g[a][dn]) / (2.0 * eps)
                })
                .sum()
        })
        .collect()
}

fn poisson_error(n: usize, dim: usize) -> f64 {
    let eps = 2.0 * PI / n as f64;
    let d = DomainSpec::new(&vec![n; dim], eps, Topology::Torus).unwrap();
    let rho: Vec<f64> = (0..d.n_cells())
        .map(|i| {
            let c = d.center(i);
            1.0 + 0.5 * c[0].cos() * c[1].cos() + 0.3 * (2.0 * c[0]).sin() + 0.2 * c[2].sin()
        })
        .collect();
    let g = 0.1;
    let solver =
        GravitySolver::new(&d, &GravityConfig::new(g, 0.25, GreenBoundary::TorusMeanSubtracted)).unwrap();
    let field = solver.solve(&rho).unwrap();
    let moll = solver.mollified_density(&rho).unwrap();
    let mean = moll.iter().sum::<f64>() / moll.len() as f64;
    let div = periodic_divergence(&field.grad_phi, &d);
    let (mut num, mut den) = (0.0, 0.0);
    for (dv, m) in div.iter().zip(&moll) {
        let target = 4.0 * PI * g * (m - mean);
        num += (dv - target).powi(2);
        den += target.powi(2);
    }
    (num / den).sqrt()
}

fn assert_first_order(ns: &[usize], dim: usize) {
    let errs: Vec<f64> = ns.iter().map(|&n| poisson_error(n, dim)).collect();
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "errors not decreasing: {errs:?}");
    }
    let last = ns.len() - 1;
    let order = (errs[0] / errs[last]).ln() / (ns[last] as f64 / ns[0] as f64).ln();
    eprintln!("{dim}-D poisson errors {errs:?}, order {order:.3}");
    assert!(order >= 1.0, "order {order} from {errs:?}");
}

#[test]
fn discrete_poisson_consistency_2d() {
    assert_first_order(&[32, 64, 128, 256], 2);
}

#[test]
fn discrete_poisson_consistency_3d() {
    assert_first_order(&[12, 24, 48], 3);
}

fn peak_force_of_point_mass(n: usize, alpha: f64) -> f64 {
    let eps = 4.0 / n as f64;
    let d = DomainSpec::new(&[n, n], eps, Topology::OpenBox).unwrap().centered();
    let body = Body::new(1.0, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
    let state = bodies_to_fields(&[body], &d, 1e-12).unwrap();
    let solver = GravitySolver::new(&d, &GravityConfig::new(1.0, alpha, GreenBoundary::FreeSpace)).unwrap();
    solver.field_for(&state).unwrap().max_magnitude()
}

#[test]
fn force_bound_scales_no_faster_than_two_alpha() {
    for alpha in [0.2, 0.25, 1.0 / 3.0] {
        let ns = [32usize, 64, 128, 256];
        let peaks: Vec<f64> = ns.iter().map(|&n| peak_force_of_point_mass(n, alpha)).collect();
        let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let y: Vec<f64> = peaks.iter().map(|p| p.ln()).collect();
        let mx = x.iter().sum::<f64>() / 4.0;
        let my = y.iter().sum::<f64>() / 4.0;
        let slope = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
            / x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        eprintln!("alpha {alpha}: peaks {peaks:?}, exponent {slope:.3}");
        assert!(slope <= 2.0 * alpha + 0.1, "alpha {alpha}: exponent {slope}");
    }
}

fn positive_field(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 1e-6..1e3f64], len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn free_space_force_is_neutral(
        (nx, ny, rho) in (3usize..14, 3usize..14).prop_flat_map(|(nx, ny)| (Just(nx), Just(ny), positive_field(nx * ny))),
        g in 0.01..10.0f64,
        alpha in 0.1..(1.0 / 3.0),
    ) {
        let d = DomainSpec::new(&[nx, ny], 0.07, Topology::OpenBox).unwrap();
        let solver = GravitySolver::new(&d, &GravityConfig::new(g, alpha, GreenBoundary::FreeSpace)).unwrap();
        let f = solver.solve(&rho).unwrap();
        prop_assert!(f.is_finite());
        for a in 0..2 {
            let net: f64 = rho.iter().zip(&f.grad_phi[a]).map(|(r, g)| r * g).sum();
            let abs: f64 = rho.iter().zip(&f.grad_phi[a]).map(|(r, g)| (r * g).abs()).sum();
            prop_assert!(net.abs() <= 1e-10 * abs.max(f64::MIN_POSITIVE), "axis {}: {} vs {}", a, net, abs);
        }
    }
}

#[test]
fn field_is_identical_across_thread_counts() {
    let d = DomainSpec::new(&[40, 36], 0.05, Topology::OpenBox).unwrap();
    let rho: Vec<f64> = (0..d.n_cells()).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 13.0).collect();
    let solve = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let s = GravitySolver::new(&d, &GravityConfig::new(1.0, 0.25, GreenBoundary::FreeSpace)).unwrap();
            s.solve(&rho).unwrap()
        })
    };
    let one = solve(1);
    for t in [2, 5] {
        assert_eq!(one.grad_phi, solve(t).grad_phi, "threads {t}");
    }
}
