mod common;

use approx::assert_abs_diff_eq;
use common::*;
use proptest::prelude::*;
use pvcopula::copula::{box_mass, cdf};
use pvcopula::families::{cube_copula, independence, rcube_copula};
use pvcopula::grid::DEFAULT_CELL_LIMIT;
use pvcopula::{common_refinement, convex_combine, empirical_copula, CopulaError, GridCopula};

#[test]
fn new_grid_accepts_cube_and_rejects_bad_margins() {
    let mut m = vec![0.0; 8];
    for i in [0, 3, 5, 6] {
        m[i] = 0.25;
    }
    let g = GridCopula::new_grid(3, &[2, 2, 2], &m).unwrap();
    assert_eq!(g.cells(), cube_copula().cells());
    assert!(GridCopula::new_grid(2, &[1, 1], &[1.0]).is_ok());
    assert!(matches!(
        GridCopula::new_grid(2, &[2, 2], &[0.6, 0.0, 0.0, 0.4]),
        Err(CopulaError::MarginViolation { .. })
    ));
    assert!(matches!(
        GridCopula::new_grid(2, &[2, 2], &[0.75, -0.25, -0.25, 0.75]),
        Err(CopulaError::NegativeMass { .. })
    ));
    assert!(matches!(
        GridCopula::new_grid(2, &[2, 2], &[0.5, 0.0, 0.0]),
        Err(CopulaError::ShapeMismatch(_))
    ));
}

#[test]
fn cdf_values() {
    let c = cube_copula();
    assert_eq!(cdf(&c, &[0.5, 0.5, 0.5]).unwrap(), 0.25);
    assert_eq!(cdf(&c, &[1.0, 1.0, 1.0]).unwrap(), 1.0);
    let pi = independence(3, Some(&[4, 4, 4])).unwrap();
    assert_abs_diff_eq!(
        cdf(&pi, &[0.25, 0.5, 0.5]).unwrap(),
        1.0 / 16.0,
        epsilon = 1e-15
    );
    assert!(matches!(
        cdf(&c, &[0.5, 0.5]),
        Err(CopulaError::DimensionMismatch { .. })
    ));
}

#[test]
fn box_mass_values() {
    let c = cube_copula();
    assert_eq!(box_mass(&c, &[0.0; 3], &[0.5; 3]).unwrap(), 0.25);
    assert_abs_diff_eq!(
        box_mass(&c, &[0.0; 3], &[1.0; 3]).unwrap(),
        1.0,
        epsilon = 1e-15
    );
    let r = rcube_copula();
    assert_eq!(
        box_mass(&r, &[0.0, 0.0, 0.5], &[0.5, 0.5, 1.0]).unwrap(),
        0.25
    );
    assert!(matches!(
        box_mass(&c, &[0.6, 0.0, 0.0], &[0.5, 1.0, 1.0]),
        Err(CopulaError::InvertedBox(0))
    ));
}

#[test]
fn margins_of_cube() {
    let c = cube_copula();
    let pi2 = independence(2, Some(&[2, 2])).unwrap();
    for j in [[0, 1], [0, 2], [1, 2]] {
        assert_eq!(c.margin(&j).unwrap().cells(), pi2.cells());
    }
    assert_eq!(c.margin(&[0, 1, 2]).unwrap().cells(), c.cells());
    assert!(matches!(
        c.margin(&[1, 0]),
        Err(CopulaError::BadIndexSet(_))
    ));
    assert!(matches!(c.margin(&[0]), Err(CopulaError::BadIndexSet(_))));
}

#[test]
fn convex_combination_values() {
    let pi = independence(3, None).unwrap();
    let half = convex_combine(&[0.5, 0.5], &[pi.clone(), pi.clone()]).unwrap();
    assert_eq!(half.cells(), pi.cells());
    let mix = convex_combine(&[0.5, 0.5], &[pi.clone(), cube_copula()]).unwrap();
    let mut masses: Vec<f64> = mix.cells().iter().map(|c| c.1).collect();
    masses.sort_by(f64::total_cmp);
    assert_eq!(
        masses,
        vec![1.0 / 16.0; 4]
            .into_iter()
            .chain(vec![3.0 / 16.0; 4])
            .collect::<Vec<_>>()
    );
    assert!(matches!(
        convex_combine(&[0.7, 0.4], &[pi.clone(), pi]),
        Err(CopulaError::WeightError(_))
    ));
}

#[test]
fn product_extension() {
    let c4 = cube_copula().product_extend(4).unwrap();
    assert_eq!(c4.eval(&[0.5, 0.5, 0.5, 1.0]), 0.25);
    let pi2 = independence(2, None).unwrap();
    assert_eq!(
        pi2.product_extend(3).unwrap().cells(),
        independence(3, None).unwrap().cells()
    );
    let c5 = cube_copula().product_extend(5).unwrap();
    assert_eq!(
        c5.margin(&[0, 1, 2]).unwrap().cells(),
        cube_copula().cells()
    );
    assert!(matches!(
        cube_copula().product_extend(3),
        Err(CopulaError::BadDimension(_))
    ));
}

#[test]
fn reflection() {
    let c = cube_copula();
    assert_eq!(c.reflect(2).unwrap().cells(), rcube_copula().cells());
    assert_eq!(rcube_copula().reflect(2).unwrap().cells(), c.cells());
    let pi = independence(3, Some(&[2, 3, 4])).unwrap();
    assert_eq!(pi.reflect(1).unwrap().cells(), pi.cells());
    assert!(matches!(c.reflect(3), Err(CopulaError::BadAxis(3))));
}

#[test]
fn refinement_keeps_cdf() {
    let c = cube_copula();
    let pi = independence(3, Some(&[4, 4, 4])).unwrap();
    let (a, b) = common_refinement(&c, &pi, DEFAULT_CELL_LIMIT).unwrap();
    assert_eq!(a.resolutions(), vec![4, 4, 4]);
    assert_eq!(b.resolutions(), vec![4, 4, 4]);
    assert_eq!(a.eval(&[0.5, 0.5, 0.5]), 0.25);
    let (x, _) = common_refinement(&c, &c, DEFAULT_CELL_LIMIT).unwrap();
    assert_eq!(x.cells(), c.cells());
    let p3 = independence(2, Some(&[3, 3])).unwrap();
    let p2 = independence(2, Some(&[2, 2])).unwrap();
    assert_eq!(
        common_refinement(&p3, &p2, DEFAULT_CELL_LIMIT)
            .unwrap()
            .0
            .resolutions(),
        vec![6, 6]
    );
    assert!(matches!(
        common_refinement(&p3, &p2, 10),
        Err(CopulaError::ResolutionOverflow { .. })
    ));
}

#[test]
fn empirical_examples() {
    let e = empirical_copula(&[vec![0.1, 0.2, 0.3], vec![0.9, 0.8, 0.7]]).unwrap();
    assert_eq!(e.resolutions(), vec![2, 2, 2]);
    assert_eq!(e.mass_at(&[0, 0, 0]), 0.5);
    assert_eq!(e.mass_at(&[1, 1, 1]), 0.5);
    let one = empirical_copula(&[vec![0.4, 0.6]]).unwrap();
    assert_eq!(one.cells(), &[(0, 1.0)]);
    assert!(matches!(
        empirical_copula(&[vec![0.1, 0.2], vec![0.1, 0.3]]),
        Err(CopulaError::TiesDetected(0))
    ));
}

#[test]
fn sampling_frequencies() {
    let c = cube_copula();
    let s = c.sample(10_000, &mut rng(7));
    assert!(s.iter().flatten().all(|&x| x > 0.0 && x < 1.0));
    let freq = s.iter().filter(|p| p.iter().all(|&x| x < 0.5)).count() as f64 / 1e4;
    assert!((freq - 0.25).abs() < 0.02, "{freq}");
    let pi = independence(3, None).unwrap();
    let s = pi.sample(10_000, &mut rng(8));
    let freq = s.iter().filter(|p| p.iter().all(|&x| x < 0.5)).count() as f64 / 1e4;
    assert!((freq - 0.125).abs() < 0.02, "{freq}");
    assert_eq!(c.sample(50, &mut rng(3)), c.sample(50, &mut rng(3)));
}

fn slab_sums_ok(g: &GridCopula) -> bool {
    let mut idx = vec![0usize; g.dim()];
    (0..g.dim()).all(|j| {
        let n = g.axis(j).cells();
        let mut sums = vec![0.0; n];
        for &(i, m) in g.cells() {
            g.decode(i, &mut idx);
            sums[idx[j]] += m;
        }
        sums.iter()
            .enumerate()
            .all(|(k, s)| (s - g.axis(j).width(k)).abs() <= 1e-12)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_grids_have_uniform_margins(seed in any::<u64>(), d in 2usize..=4) {
        let g = random_grid(&mut rng(seed), d, 4, seed % 2 == 0);
        prop_assert!(slab_sums_ok(&g));
    }

    #[test]
    fn cdf_matches_direct_sum_and_is_monotone(seed in any::<u64>(), pts in prop::collection::vec(0.0f64..=1.0, 6)) {
        let g = random_grid(&mut rng(seed), 3, 4, false);
        let (a, b) = (&pts[..3], &pts[3..]);
        prop_assert!((g.eval(a) - brute_cdf(&g, a)).abs() <= 1e-14);
        let hi: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
        prop_assert!(g.eval(&hi) >= g.eval(a) - 1e-15);
    }

    #[test]
    fn grid_box_mass_matches_cell_sum(seed in any::<u64>(), lo in prop::collection::vec(0usize..4, 3), len in prop::collection::vec(1usize..4, 3)) {
        let g = random_grid(&mut rng(seed), 3, 4, seed % 3 == 0).refine_to(&[
            pvcopula::Axis::uniform(12), pvcopula::Axis::uniform(12), pvcopula::Axis::uniform(12)
        ]).unwrap();
        let l: Vec<f64> = lo.iter().map(|&i| i as f64 / 4.0).collect();
        let h: Vec<f64> = lo.iter().zip(&len).map(|(&i, &k)| ((i + k).min(4)) as f64 / 4.0).collect();
        let mut idx = vec![0usize; 3];
        let direct: f64 = g.cells().iter().filter(|&&(i, _)| {
            g.decode(i, &mut idx);
            (0..3).all(|j| g.axis(j).lo(idx[j]) >= l[j] - 1e-12 && g.axis(j).hi(idx[j]) <= h[j] + 1e-12)
        }).map(|c| c.1).sum();
        let bm = g.box_mass(&l, &h);
        prop_assert!((bm - direct).abs() <= 1e-12);
        prop_assert!(bm >= -1e-12);
    }

    #[test]
    fn nested_margins_agree(seed in any::<u64>()) {
        let g = random_grid(&mut rng(seed), 4, 3, false);
        let a = g.margin(&[0, 2, 3]).unwrap().margin(&[1, 2]).unwrap();
        let b = g.margin(&[2, 3]).unwrap();
        prop_assert!(a.max_cell_diff(&b).unwrap() <= 1e-12);
    }

    #[test]
    fn reflection_keeps_other_margins(seed in any::<u64>(), axis in 0usize..3) {
        let g = random_grid(&mut rng(seed), 3, 4, false);
        let r = g.reflect(axis).unwrap();
        let others: Vec<usize> = (0..3).filter(|&j| j != axis).collect();
        prop_assert!(g.margin(&others).unwrap().max_cell_diff(&r.margin(&others).unwrap()).unwrap() <= 1e-15);
        let back = r.reflect(axis).unwrap();
        prop_assert_eq!(back.cells(), g.cells());
    }

    #[test]
    fn empirical_copulas_are_valid_and_simplified(seed in any::<u64>(), n in 1usize..40) {
        let mut r = rng(seed);
        let pts = cube_copula().sample(n, &mut r);
        let e = empirical_copula(&pts).unwrap();
        prop_assert!(slab_sums_ok(&e));
        prop_assert_eq!(e.cells().len(), n);
        let (simple, delta) = pvcopula::disintegration::is_simplified(&e, 1e-12).unwrap();
        prop_assert!(simple, "delta {}", delta);
    }

    #[test]
    fn json_round_trip_is_bit_exact(seed in any::<u64>()) {
        let g = random_grid(&mut rng(seed), 3, 4, seed % 2 == 1);
        let back = pvcopula::io::grid_from_json(&pvcopula::io::grid_to_json(&g)).unwrap();
        prop_assert_eq!(back.cells(), g.cells());
        prop_assert_eq!(back.axes(), g.axes());
    }
}
