mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use pvcopula::disintegration::simplifiedness_delta;
use pvcopula::families::*;
use pvcopula::metrics::{d_inf, tv, DinfOptions, Exactness};
use pvcopula::pvc::*;
use pvcopula::{convex_combine, empirical_copula, Copula, CopulaError, GridCopula};
use rand::Rng;

fn dinf(a: &dyn Copula, b: &dyn Copula) -> f64 {
    d_inf(a, b, &DinfOptions::default()).unwrap().value
}

/// Random bivariate grid copula at resolution exactly `n`.
fn random_pair<R: Rng>(rng: &mut R, n: usize) -> GridCopula {
    let a = common::permutation_grid(rng, 2, n);
    let b = common::permutation_grid(rng, 2, n);
    let w = rng.gen_range(0.0..1.0);
    convex_combine(&[w, 1.0 - w], &[a, b]).unwrap()
}

/// `sum_k 1/m * B_k (x) 1_{slab k}`: a member of the class with `C_13 = C_23 = Pi`.
fn stack(slabs: &[GridCopula]) -> GridCopula {
    let m = slabs.len();
    let n = slabs[0].axis(0).cells();
    let mut masses = vec![0.0; n * n * m];
    for (k, b) in slabs.iter().enumerate() {
        let dense = b.dense_masses().unwrap();
        for i in 0..n {
            for j in 0..n {
                masses[(i * n + j) * m + k] = dense[i * n + j] / m as f64;
            }
        }
    }
    GridCopula::new_grid(3, &[n, n, m], &masses).unwrap()
}

/// Bivariate copula at resolution `2r` putting half of its mass in each of two
/// opposite quadrants, each filled with a scaled random pattern.
fn quadrant_pair<R: Rng>(rng: &mut R, r: usize, diagonal: bool) -> GridCopula {
    let n = 2 * r;
    let mut m = vec![0.0; n * n];
    for q in 0..2 {
        let p = random_pair(rng, r).dense_masses().unwrap();
        let (oi, oj) = match (diagonal, q) {
            (true, 0) => (0, 0),
            (true, _) => (r, r),
            (false, 0) => (0, r),
            (false, _) => (r, 0),
        };
        for i in 0..r {
            for j in 0..r {
                m[(oi + i) * n + oj + j] = 0.5 * p[i * r + j];
            }
        }
    }
    GridCopula::new_grid(2, &[n, n], &m).unwrap()
}

#[test]
fn cube_examples() {
    let c = cube_copula();
    let r = pvc3(&c).unwrap();
    let pi = independence(3, None).unwrap();
    assert!(dinf(&r.psi, &pi) <= 1e-12);
    let rep = d_inf(&c, &r.psi, &DinfOptions::default()).unwrap();
    assert_eq!(rep.exactness, Exactness::Exact);
    assert_abs_diff_eq!(rep.value, 0.125, epsilon = 1e-12);
    assert_eq!(r.fingerprint, fingerprint(&c));
    assert!(
        tv(r.partial(0, 2).unwrap(), &independence(2, None).unwrap())
            .unwrap()
            .value
            <= 1e-12
    );
}

#[test]
fn empirical_copulas_are_fixed_points() {
    let mut rng = common::rng(3);
    for n in [1, 7, 40] {
        let pts: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let e = empirical_copula(&pts).unwrap();
        let r = pvc3(&e).unwrap();
        assert!(tv(&e, &r.psi).unwrap().value <= 1e-12, "n = {n}");
    }
}

#[test]
fn example54_grid_pipeline() {
    let e = discretize(&example54_copula(), &[64, 64, 4]).unwrap();
    assert_abs_diff_eq!(e.eval(&[0.5, 0.5, 1.0]), 0.375, epsilon = 2e-2);
    let r = pvc3(&e).unwrap();
    assert_abs_diff_eq!(r.psi.eval(&[0.5, 0.5, 1.0]), 3.0 / 16.0, epsilon = 2e-2);
}

#[test]
fn analytic_examples() {
    let c = example54_copula();
    let r = pvc3_analytic(&c).unwrap();
    assert_abs_diff_eq!(r.psi.eval(&[0.5, 0.5, 1.0]), 3.0 / 16.0, epsilon = 1e-9);
    assert_abs_diff_eq!(
        c.eval(&[0.5, 0.5, 1.0]) - r.psi.eval(&[0.5, 0.5, 1.0]),
        3.0 / 16.0,
        epsilon = 1e-9
    );
    // Partial copula = (D^1 + D^2 + D^3 + D^4) / 4.
    let d: Vec<_> = (1..=4)
        .map(|i| shuffle_of_w(ShuffleSpec::builtin(i).unwrap()).unwrap())
        .collect();
    for &(u, v) in &[
        (0.25, 0.5),
        (0.5, 0.25),
        (0.5, 0.75),
        (0.75, 0.5),
        (0.3, 0.9),
    ] {
        let avg: f64 = d.iter().map(|x| x.eval(&[u, v])).sum::<f64>() / 4.0;
        assert_abs_diff_eq!(r.partial.eval(&[u, v]), avg, epsilon = 1e-12);
    }
    let e = pvc3_analytic(&efgm3()).unwrap();
    let mut worst = 0.0f64;
    let g: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    common::for_each_node(&[g.clone(), g.clone(), g], |p| {
        worst = worst.max((e.psi.eval(p) - p[0] * p[1] * p[2]).abs())
    });
    assert!(worst <= 1e-12);
    let plain = pi_analytic(3);
    assert!(matches!(
        pvc3_analytic(&plain),
        Err(CopulaError::ClosedFormUnavailable)
    ));
}

#[test]
fn analytic_members_of_pairwise_independent_class() {
    // EFGM-type copulas have C_13 = C_23 = Pi, so psi(C)(u, v) = C_12(u) v.
    for (m, k) in [(1, 1), (2, 3), (3, 8)] {
        let c = efgm_sequence_member(m, k, 3).unwrap();
        let r = pvc3_analytic(&c).unwrap();
        let g: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        common::for_each_node(&[g.clone(), g.clone(), g], |p| {
            let c12 = c.eval(&[p[0], p[1], 1.0]);
            assert_abs_diff_eq!(r.psi.eval(p), c12 * p[2], epsilon = 1e-12);
        });
    }
}

#[test]
fn distance_reports() {
    let rep = pvc_distance_report(&cube_copula(), false).unwrap();
    assert_abs_diff_eq!(rep.dinf.value, 0.125, epsilon = 1e-12);
    assert_abs_diff_eq!(rep.d1.value, 1.0 / 16.0, epsilon = 1e-9);
    assert_abs_diff_eq!(rep.delta.unwrap().0, 0.125, epsilon = 1e-9);
    assert_eq!(rep.slabs, 2);
    let rep = pvc_distance_report(&independence(3, Some(&[2, 2, 2])).unwrap(), false).unwrap();
    assert!(rep.dinf.value == 0.0 && rep.d1.value <= 1e-15 && rep.delta.unwrap().0 == 0.0);
    let opts = DinfOptions {
        eps: 1e-4,
        ..DinfOptions::default()
    };
    let rep = pvc_distance_report_analytic(&example54_copula(), &opts).unwrap();
    assert!(rep.dinf.value >= 3.0 / 16.0 - 1e-9, "{:?}", rep.dinf);
}

#[test]
fn dvine_examples() {
    for d in [4, 5] {
        let c = cube_copula().product_extend(d).unwrap();
        let r = pvc_dvine(&c).unwrap();
        let pi = independence(d, None).unwrap();
        assert!(dinf(&r.psi, &pi) <= 1e-9);
        let rep = d_inf(&c, &r.psi, &DinfOptions::default()).unwrap();
        assert_abs_diff_eq!(rep.value, 0.125, epsilon = 1e-9);
        let mut at = vec![0.5, 0.5, 0.5];
        at.resize(d, 1.0);
        assert_abs_diff_eq!(c.eval(&at) - r.psi.eval(&at), 0.125, epsilon = 1e-12);
    }
    let p = independence(4, Some(&[2, 3, 2, 2])).unwrap();
    assert!(dinf(&pvc_dvine(&p).unwrap().psi, &p) <= 1e-12);
    let c = cube_copula();
    let a = pvc3(&c).unwrap().psi;
    let b = pvc_dvine_with_order(&c, &[0, 2, 1]).unwrap().psi;
    assert_eq!(a.cells(), b.cells());
    assert!(dinf(&pvc_dvine(&c).unwrap().psi, &a) <= 1e-12);
    assert!(matches!(
        pvc_dvine(&independence(2, None).unwrap()),
        Err(CopulaError::BadDimension(_))
    ));
}

#[test]
fn psi_is_not_injective() {
    let pi = independence(3, None).unwrap();
    assert!(dinf(&pvc3(&cube_copula()).unwrap().psi, &pi) <= 1e-12);
    assert!(dinf(&pvc3(&rcube_copula()).unwrap().psi, &pi) <= 1e-12);
    let e = pvc3_analytic(&efgm3()).unwrap();
    let g: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    common::for_each_node(&[g.clone(), g.clone(), g], |p| {
        assert!((e.psi.eval(p) - p[0] * p[1] * p[2]).abs() <= 1e-12)
    });
    assert!(dinf(&cube_copula(), &rcube_copula()) > 0.1);
    assert!(dinf(&efgm3(), &pi_analytic(3)) > 0.01);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn margins_are_preserved(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::random_grid(&mut rng, 3, 5, false);
        let r = pvc3(&c).unwrap();
        for pair in [[0usize, 2], [1, 2]] {
            let a = c.margin(&pair).unwrap();
            let b = r.psi.margin(&pair).unwrap();
            prop_assert!(tv(&a, &b).unwrap().value <= 1e-12);
        }
    }

    #[test]
    fn dvine_keeps_tree_one_margins(seed in any::<u64>(), d in 3usize..5) {
        let mut rng = common::rng(seed);
        let c = common::random_grid(&mut rng, d, 3, true);
        let r = pvc_dvine(&c).unwrap();
        for i in 0..d - 1 {
            let a = c.margin(&[i, i + 1]).unwrap();
            let b = r.psi.margin(&[i, i + 1]).unwrap();
            prop_assert!(tv(&a, &b).unwrap().value <= 1e-12);
            prop_assert!(tv(r.marginal(i, i + 1).unwrap(), &a).unwrap().value == 0.0);
        }
    }

    #[test]
    fn psi_is_idempotent(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let c = common::random_grid(&mut rng, 3, 4, false);
        let once = pvc3(&c).unwrap().psi;
        let twice = pvc3(&once).unwrap().psi;
        prop_assert!(dinf(&once, &twice) <= 1e-9);
        let (delta, err) = simplifiedness_delta(&once).unwrap();
        prop_assert!(delta <= 1e-9 + err, "psi(C) has delta {}", delta);
    }

    #[test]
    fn simplified_grids_are_fixed_points(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..5);
        let a = random_pair(&mut rng, n);
        let c = a.product_extend(3).unwrap();
        prop_assert!(simplifiedness_delta(&c).unwrap().0 <= 1e-12);
        let r = pvc3(&c).unwrap();
        prop_assert!(tv(&c, &r.psi).unwrap().value <= 1e-12);
        let k = rng.gen_range(2..30);
        let pts: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let e = empirical_copula(&pts).unwrap();
        prop_assert!(tv(&e, &pvc3(&e).unwrap().psi).unwrap().value <= 1e-12);
    }

    #[test]
    fn pairwise_independent_class_maps_to_product(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let n = rng.gen_range(1..5);
        let m = rng.gen_range(1..5);
        let slabs: Vec<GridCopula> = (0..m).map(|_| random_pair(&mut rng, n)).collect();
        let c = stack(&slabs);
        let c12 = c.margin(&[0, 1]).unwrap();
        let psi = pvc3(&c).unwrap().psi;
        let g: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let mut worst = 0.0f64;
        common::for_each_node(&[g.clone(), g.clone(), g], |p| {
            worst = worst.max((psi.eval(p) - c12.eval(&p[..2]) * p[2]).abs())
        });
        prop_assert!(worst <= 1e-12);
        prop_assert!(dinf(&c, &psi) <= 0.125 + 1e-12);
    }

    #[test]
    fn extremal_class_attains_one_eighth(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let r = rng.gen_range(1..3);
        let half = rng.gen_range(1..3);
        let first_diagonal = rng.gen_bool(0.5);
        let slabs: Vec<GridCopula> = (0..2 * half)
            .map(|k| quadrant_pair(&mut rng, r, (k < half) == first_diagonal))
            .collect();
        let c = stack(&slabs);
        let psi = pvc3(&c).unwrap().psi;
        let rep = d_inf(&c, &psi, &DinfOptions::default()).unwrap();
        prop_assert_eq!(rep.exactness, Exactness::Exact);
        prop_assert!((rep.value - 0.125).abs() <= 1e-12, "d_inf {}", rep.value);
        // Leaving the extremal configuration lowers the distance.
        let eps = rng.gen_range(0.05..0.5);
        let pi = independence(3, Some(&[2 * r, 2 * r, 2 * half])).unwrap();
        let p = convex_combine(&[1.0 - eps, eps], &[c, pi]).unwrap();
        let psi = pvc3(&p).unwrap().psi;
        prop_assert!(dinf(&p, &psi) < 0.125 - 1e-6);
    }
}
