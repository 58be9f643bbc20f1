//! Seeded random grids and the fixed family battery used by the invariant checks.

use pvcopula::axis::Axis;
use pvcopula::families::{
    bstar, bstarstar, cube_copula, discretize, efgm3, example54_copula, independence, rcube_copula,
};
use pvcopula::{convex_combine, empirical_copula, GridCopula};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::CliError;

/// Copula of a random permutation pattern: `n` cells of mass `1/n`.
pub fn permutation_grid<R: Rng>(rng: &mut R, d: usize, n: usize) -> GridCopula {
    let perms: Vec<Vec<usize>> = (1..d)
        .map(|_| {
            let mut p: Vec<usize> = (0..n).collect();
            p.shuffle(rng);
            p
        })
        .collect();
    let mut masses = vec![0.0; n.pow(d as u32)];
    for i in 0..n {
        let mut flat = i;
        for p in &perms {
            flat = flat * n + p[i];
        }
        masses[flat] = 1.0 / n as f64;
    }
    GridCopula::new_grid(d, &vec![n; d], &masses).expect("permutation pattern is a copula")
}

/// Mixture of up to three permutation patterns at a random resolution up to
/// `max_res`. With `positive` every cell is charged by mixing in independence.
pub fn random_grid<R: Rng>(rng: &mut R, d: usize, max_res: usize, positive: bool) -> GridCopula {
    let n = rng.gen_range(1..=max_res);
    let k = rng.gen_range(1..=3);
    let parts: Vec<GridCopula> = (0..k).map(|_| permutation_grid(rng, d, n)).collect();
    let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let mut g = convex_combine(&w, &parts).expect("weights sum to one");
    if positive {
        let t = rng.gen_range(0.05..0.5);
        let pi = independence(d, Some(&vec![n; d])).expect("valid resolutions");
        g = convex_combine(&[1.0 - t, t], &[g, pi]).expect("weights sum to one");
    }
    if n % 2 == 0 && rng.gen_bool(0.3) {
        let j = rng.gen_range(0..d);
        let mut axes: Vec<Axis> = g.axes().to_vec();
        axes[j] = Axis::uniform(if rng.gen_bool(0.5) { 2 } else { 1 });
        g = g.coarsen_to(&axes).expect("coarser uniform axis");
    }
    g
}

/// Empirical copula of `n` draws from `c`.
pub fn empirical_of<R: Rng>(c: &GridCopula, n: usize, rng: &mut R) -> Result<GridCopula, CliError> {
    Ok(empirical_copula(&c.sample(n, rng))?)
}

/// Eight points, two in each charged cell of the cube copula, as ranks.
/// Among such patterns this one is closest to the cube copula found by a
/// local search; its distance is exactly 1/8.
pub const CUBE_RANKS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [3, 3, 2],
    [2, 4, 7],
    [1, 5, 5],
    [5, 2, 6],
    [6, 1, 4],
    [4, 6, 3],
    [7, 7, 1],
];

/// Empirical copula of [`CUBE_RANKS`].
pub fn cube_rank_pattern() -> GridCopula {
    let pts: Vec<Vec<f64>> = CUBE_RANKS
        .iter()
        .map(|r| r.iter().map(|&k| (k as f64 + 0.5) / 8.0).collect())
        .collect();
    empirical_copula(&pts).expect("ranks are a permutation on each axis")
}

/// Named trivariate grids covering every construction path of the library.
pub fn trivariate_battery<R: Rng>(rng: &mut R) -> Result<Vec<(String, GridCopula)>, CliError> {
    let mut out = vec![
        ("cube".to_string(), cube_copula()),
        ("rcube".to_string(), rcube_copula()),
        ("pi[3,3,3]".to_string(), independence(3, Some(&[3, 3, 3]))?),
        ("efgm[6,6,6]".to_string(), discretize(&efgm3(), &[6, 6, 6])?),
        (
            "example54[8,8,4]".to_string(),
            discretize(&example54_copula(), &[8, 8, 4])?,
        ),
        ("bstar x pi".to_string(), bstar().product_extend(3)?),
        ("bstarstar x pi".to_string(), bstarstar().product_extend(3)?),
        ("cube rank pattern".to_string(), cube_rank_pattern()),
        (
            "empirical(cube, 200)".to_string(),
            empirical_of(&cube_copula(), 200, rng)?,
        ),
    ];
    let mix = convex_combine(&[0.6, 0.4], &[cube_copula(), rcube_copula()])?;
    out.push(("0.6 cube + 0.4 rcube".to_string(), mix));
    for i in 0..6 {
        let g = random_grid(rng, 3, 5, i % 2 == 0);
        out.push((format!("random #{i}"), g));
    }
    Ok(out)
}
