mod common;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;
use pvcopula::copula::axiom_violation;
use pvcopula::disintegration::{conditional_margin, kernel_cdf};
use pvcopula::families::*;
use pvcopula::{AnalyticCopula, Copula, CopulaError, GridCopula};
use rand::seq::SliceRandom;
use rand::Rng;

/// Independent cdf oracle for a shuffle: midpoint rule over `n` points of the
/// indicator of `{x <= u, h(x) <= v}`, with `h` evaluated segment by segment.
fn shuffle_cdf_oracle(spec: &ShuffleSpec, u: f64, v: f64, n: usize) -> f64 {
    let h = |x: f64| -> f64 {
        for s in &spec.segments {
            if x >= s.source.0 && x < s.source.1 {
                let r = (x - s.source.0) / (s.source.1 - s.source.0);
                let w = s.target.1 - s.target.0;
                return match s.orientation {
                    Orientation::Ascending => s.target.0 + r * w,
                    Orientation::Descending => s.target.1 - r * w,
                };
            }
        }
        x
    };
    let hits = (0..n)
        .map(|i| (i as f64 + 0.5) / n as f64)
        .filter(|&x| x <= u && h(x) <= v)
        .count();
    hits as f64 / n as f64
}

/// Random shuffle with `k` equal pieces permuted and randomly flipped.
fn random_shuffle<R: Rng>(rng: &mut R, k: usize) -> ShuffleSpec {
    let mut perm: Vec<usize> = (0..k).collect();
    perm.shuffle(rng);
    let w = 1.0 / k as f64;
    ShuffleSpec {
        segments: (0..k)
            .map(|i| Segment {
                source: (i as f64 * w, (i + 1) as f64 * w),
                target: (perm[i] as f64 * w, (perm[i] + 1) as f64 * w),
                orientation: if rng.gen_bool(0.5) {
                    Orientation::Ascending
                } else {
                    Orientation::Descending
                },
            })
            .collect(),
    }
}

fn node_agreement(c: &dyn Copula, g: &GridCopula) -> f64 {
    let nodes: Vec<Vec<f64>> = g.axes().iter().map(|a| a.breaks().to_vec()).collect();
    let mut worst = 0.0f64;
    common::for_each_node(&nodes, |p| worst = worst.max((c.eval(p) - g.eval(p)).abs()));
    worst
}

#[test]
fn independence_examples() {
    let p = independence(3, Some(&[2, 2, 2])).unwrap();
    assert!(p.cells().iter().all(|&(_, m)| m == 0.125));
    assert_abs_diff_eq!(p.eval(&[0.5, 0.5, 0.5]), 0.125, epsilon = 1e-15);
    let m = p.margin(&[0, 1]).unwrap();
    assert_abs_diff_eq!(m.eval(&[0.3, 0.7]), 0.21, epsilon = 1e-15);
    assert_eq!(independence(4, None).unwrap().resolutions(), vec![1; 4]);
}

#[test]
fn cube_examples() {
    let c = cube_copula();
    assert_abs_diff_eq!(
        c.box_mass(&[0.5, 0.5, 0.0], &[1.0, 1.0, 0.5]),
        0.25,
        epsilon = 1e-15
    );
    for pair in [[0, 1], [0, 2], [1, 2]] {
        let m = c.margin(&pair).unwrap();
        assert!(m.cells().iter().all(|&(_, x)| (x - 0.25).abs() < 1e-15));
    }
    let back = rcube_copula().reflect(2).unwrap();
    assert_eq!(back.cells(), c.cells());
}

#[test]
fn shuffle_group_sums() {
    let d: Vec<AnalyticCopula> = (1..=4)
        .map(|i| shuffle_of_w(ShuffleSpec::builtin(i).unwrap()).unwrap())
        .collect();
    assert_abs_diff_eq!(d[0].eval(&[0.25, 0.5]), 0.25, epsilon = 1e-15);
    for c in &d[1..] {
        assert_abs_diff_eq!(c.eval(&[0.25, 0.5]), 0.0, epsilon = 1e-15);
    }
    let s: f64 = d.iter().map(|c| c.eval(&[0.5, 0.75])).sum();
    assert_abs_diff_eq!(s, 1.25, epsilon = 1e-15);
    // The remaining two group sums of the partial copula computation.
    let s: f64 = d.iter().map(|c| c.eval(&[0.5, 0.25])).sum();
    assert_abs_diff_eq!(s, 0.25, epsilon = 1e-15);
    let s: f64 = d.iter().map(|c| c.eval(&[0.75, 0.5])).sum();
    assert_abs_diff_eq!(s, 1.25, epsilon = 1e-15);
}

#[test]
fn builtin_shuffles_match_oracle_and_have_uniform_margins() {
    for i in 1..=4 {
        let spec = ShuffleSpec::builtin(i).unwrap();
        let c = shuffle_of_w(spec.clone()).unwrap();
        for k in 0..=100 {
            let x = k as f64 / 100.0;
            assert_abs_diff_eq!(c.eval(&[x, 1.0]), x, epsilon = 1e-12);
            assert_abs_diff_eq!(c.eval(&[1.0, x]), x, epsilon = 1e-12);
        }
        for &(u, v) in &[(0.3, 0.6), (0.55, 0.2), (0.9, 0.9), (0.125, 0.875)] {
            let o = shuffle_cdf_oracle(&spec, u, v, 1 << 16);
            assert_abs_diff_eq!(c.eval(&[u, v]), o, epsilon = 1e-4);
        }
        assert!(axiom_violation(&c, 40) < 1e-12);
    }
}

#[test]
fn shuffle_kernel_is_point_mass() {
    let c = shuffle_of_w(ShuffleSpec::d1()).unwrap();
    // On (1/4, 1/2) the preimage of v lies in (0, 1/4).
    assert_eq!(c.kernel(0.3, &[0.25]), Some(1.0));
    assert_eq!(c.kernel(0.3, &[0.1]), Some(0.0));
}

#[test]
fn invalid_shuffles_are_rejected() {
    let mut s = ShuffleSpec::d1();
    s.segments[0].target = (0.25, 0.6);
    assert!(matches!(
        shuffle_of_w(s),
        Err(CopulaError::InvalidShuffle(_))
    ));
    let mut s = ShuffleSpec::d2();
    s.segments[1].target = (0.8, 1.05);
    assert!(matches!(
        shuffle_of_w(s),
        Err(CopulaError::InvalidShuffle(_))
    ));
    let overlap = ShuffleSpec {
        segments: vec![
            Segment {
                source: (0.0, 0.5),
                target: (0.0, 0.5),
                orientation: Orientation::Ascending,
            },
            Segment {
                source: (0.5, 1.0),
                target: (0.25, 0.75),
                orientation: Orientation::Ascending,
            },
        ],
    };
    assert!(matches!(
        shuffle_of_w(overlap),
        Err(CopulaError::InvalidShuffle(_))
    ));
}

#[test]
fn efgm_examples() {
    let c = efgm3();
    assert_abs_diff_eq!(c.eval(&[0.5, 0.5, 0.5]), 9.0 / 64.0, epsilon = 1e-15);
    let zero = efgm(EfgmSpec {
        dim: 3,
        f: Perturbation::PiecewiseLinear {
            knots: vec![0.0, 1.0],
            values: vec![0.0, 0.0],
        },
    })
    .unwrap();
    assert_abs_diff_eq!(zero.eval(&[0.3, 0.4, 0.5]), 0.06, epsilon = 1e-15);
    // J_{2,3} = (1/2, 3/4].
    let m = efgm_sequence_member(2, 3, 3).unwrap();
    assert_abs_diff_eq!(
        m.kernel(0.6, &[0.5, 0.5]).unwrap(),
        5.0 / 16.0,
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(m.kernel(0.3, &[0.5, 0.5]).unwrap(), 0.25, epsilon = 1e-15);
    assert!(axiom_violation(&m, 16) < 1e-12);
    assert!(axiom_violation(&c, 16) < 1e-12);
}

#[test]
fn efgm_sequence_rejects_bad_indices() {
    assert!(matches!(
        efgm_sequence_member(2, 0, 3),
        Err(CopulaError::BadIndex(_))
    ));
    assert!(matches!(
        efgm_sequence_member(2, 5, 3),
        Err(CopulaError::BadIndex(_))
    ));
    assert!(efgm_sequence_member(2, 4, 3).is_ok());
    let steep = EfgmSpec {
        dim: 3,
        f: Perturbation::PiecewiseLinear {
            knots: vec![0.0, 0.5, 1.0],
            values: vec![0.0, 0.6, 0.0],
        },
    };
    assert!(matches!(
        efgm(steep),
        Err(CopulaError::InvalidPerturbation(_))
    ));
}

#[test]
fn bstar_kernels_and_margins() {
    let b = bstar();
    let bb = bstarstar();
    // Conditioning on t (axis 1); target u on axis 0.
    assert_abs_diff_eq!(
        kernel_cdf(&b, &[0.1], &[0.5], &[1]).unwrap(),
        0.25,
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        kernel_cdf(&b, &[0.9], &[0.5], &[1]).unwrap(),
        0.75,
        epsilon = 1e-15
    );
    assert_abs_diff_eq!(
        kernel_cdf(&bb, &[0.6], &[0.5], &[1]).unwrap(),
        0.75,
        epsilon = 1e-15
    );
    let f = conditional_margin(&b, 0, &[0.1], &[1]).unwrap();
    assert_abs_diff_eq!(f.eval(0.25), 0.125, epsilon = 1e-15);
    assert_abs_diff_eq!(f.eval(0.75), 0.25 + 0.375, epsilon = 1e-15);
    assert_abs_diff_eq!(f.eval(1.0), 1.0, epsilon = 1e-15);
}

#[test]
fn example54_values() {
    let c = example54_copula();
    assert_abs_diff_eq!(c.eval(&[0.5, 0.5, 1.0]), 0.375, epsilon = 1e-15);
    for k in 0..=20 {
        let x = k as f64 / 20.0;
        assert_abs_diff_eq!(c.eval(&[x, 1.0, 1.0]), x, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(&[1.0, x, 1.0]), x, epsilon = 1e-12);
        assert_abs_diff_eq!(c.eval(&[1.0, 1.0, x]), x, epsilon = 1e-12);
    }
    let g = discretize(&c, &[8, 8, 8]).unwrap();
    let b13 = g.margin(&[0, 2]).unwrap();
    let b23 = g.margin(&[1, 2]).unwrap();
    assert!(
        b13.max_cell_diff(&discretize(&bstar(), &[8, 8]).unwrap())
            .unwrap()
            < 1e-12
    );
    assert!(
        b23.max_cell_diff(&discretize(&bstarstar(), &[8, 8]).unwrap())
            .unwrap()
            < 1e-12
    );
    let g4 = discretize(&c, &[4, 4, 4]).unwrap();
    assert_abs_diff_eq!(g4.eval(&[0.5, 0.5, 1.0]), 0.375, epsilon = 1e-15);
    assert!(axiom_violation(&c, 24) < 1e-12);
}

#[test]
fn discretize_examples() {
    let p = discretize(&pi_analytic(3), &[2, 2, 2]).unwrap();
    assert!(p.cells().iter().all(|&(_, m)| (m - 0.125).abs() < 1e-15));
    let d1 = shuffle_of_w(ShuffleSpec::d1()).unwrap();
    let g = discretize(&d1, &[4, 4]).unwrap();
    assert!(node_agreement(&d1, &g) < 1e-15);
    let bad = AnalyticCopula::new("not-a-copula", 2, |u: &[f64]| {
        u[0] * u[1] * (1.0 + 3.0 * (1.0 - u[0]) * (1.0 - u[1]))
    });
    assert!(matches!(
        discretize(&bad, &[4, 4]),
        Err(CopulaError::NonCopulaInput(_))
    ));
}

#[test]
fn bounds_families() {
    let m = comonotone(3);
    assert_abs_diff_eq!(m.eval(&[0.2, 0.7, 0.5]), 0.2, epsilon = 1e-15);
    let w = countermonotone();
    assert_abs_diff_eq!(w.eval(&[0.7, 0.6]), 0.3, epsilon = 1e-15);
    assert!(axiom_violation(&m, 10) < 1e-12);
    assert!(axiom_violation(&w, 10) < 1e-12);
}

#[test]
fn discretization_error_is_lipschitz_bounded() {
    // Between nodes both functions are 1-Lipschitz per coordinate and agree at
    // the cell corners, so the gap is at most d times half a cell width.
    let c = example54_copula();
    let n = 8;
    let g = discretize(&c, &[n, n, n]).unwrap();
    let mut worst = 0.0f64;
    let k = 40;
    let pts: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    common::for_each_node(&[pts.clone(), pts.clone(), pts], |p| {
        worst = worst.max((c.eval(p) - g.eval(p)).abs())
    });
    assert!(worst <= 3.0 / (2.0 * n as f64));
    assert!(node_agreement(&c, &g) < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_shuffles_are_copulas(seed in any::<u64>(), k in 1usize..7) {
        let mut rng = common::rng(seed);
        let spec = random_shuffle(&mut rng, k);
        let c = shuffle_of_w(spec.clone()).unwrap();
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            prop_assert!((c.eval(&[x, 1.0]) - x).abs() < 1e-12);
            prop_assert!((c.eval(&[1.0, x]) - x).abs() < 1e-12);
        }
        let (u, v) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let o = shuffle_cdf_oracle(&spec, u, v, 1 << 14);
        prop_assert!((c.eval(&[u, v]) - o).abs() < 1e-3);
        prop_assert!(axiom_violation(&c, 12) < 1e-12);
    }

    #[test]
    fn efgm_kernel_is_v_derivative(
        m in 0u32..4, kk in 0u64..16, d in 3usize..5,
        u in prop::collection::vec(0.05f64..0.95, 4), v in 0.01f64..0.99,
    ) {
        let k = kk % (1u64 << m) + 1;
        let c = efgm_sequence_member(m, k, d).unwrap();
        let h = 1e-6;
        let lo = (k - 1) as f64 / (1u64 << m) as f64;
        let hi = k as f64 / (1u64 << m) as f64;
        prop_assume!((v - lo).abs() > 2.0 * h && (v - hi).abs() > 2.0 * h);
        let mut a: Vec<f64> = u[..d - 1].to_vec();
        a.push(v + h);
        let mut b: Vec<f64> = u[..d - 1].to_vec();
        b.push(v - h);
        let numeric = (c.eval(&a) - c.eval(&b)) / (2.0 * h);
        let exact = c.kernel(v, &u[..d - 1]).unwrap();
        prop_assert!((numeric - exact).abs() < 1e-6);
    }

    #[test]
    fn efgm_parabola_kernel_is_v_derivative(
        u in prop::collection::vec(0.0f64..1.0, 2), v in 0.01f64..0.99,
    ) {
        let c = efgm3();
        let h = 1e-6;
        let numeric = (c.eval(&[u[0], u[1], v + h]) - c.eval(&[u[0], u[1], v - h])) / (2.0 * h);
        prop_assert!((numeric - c.kernel(v, &u).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn discretize_agrees_at_nodes(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = common::rng(seed);
        let i = rng.gen_range(1..=4);
        let c = shuffle_of_w(ShuffleSpec::builtin(i).unwrap()).unwrap();
        let g = discretize(&c, &[n, n + 1]).unwrap();
        prop_assert!(node_agreement(&c, &g) < 1e-15);
        let e = discretize(&efgm3(), &[n, n, n]).unwrap();
        prop_assert!(node_agreement(&efgm3(), &e) < 1e-15);
    }
}
