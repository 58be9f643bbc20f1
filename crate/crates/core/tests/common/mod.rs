#![allow(dead_code)]

use pvcopula::axis::Axis;
use pvcopula::families::independence;
use pvcopula::{convex_combine, GridCopula};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

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
    GridCopula::new_grid(d, &vec![n; d], &masses).unwrap()
}

/// Random grid copula: a mixture of permutation patterns at resolution `n`,
/// optionally mixed with independence so that every cell is charged, and with
/// some axes coarsened to resolution 2 or 1 when `n` is even.
pub fn random_grid<R: Rng>(rng: &mut R, d: usize, max_res: usize, positive: bool) -> GridCopula {
    let n = rng.gen_range(1..=max_res);
    let k = rng.gen_range(1..=3);
    let parts: Vec<GridCopula> = (0..k).map(|_| permutation_grid(rng, d, n)).collect();
    let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let mut g = convex_combine(&w, &parts).unwrap();
    if positive {
        let t = rng.gen_range(0.05..0.5);
        g = convex_combine(
            &[1.0 - t, t],
            &[g, independence(d, Some(&vec![n; d])).unwrap()],
        )
        .unwrap();
    }
    if n % 2 == 0 && rng.gen_bool(0.3) {
        let j = rng.gen_range(0..d);
        let mut axes: Vec<Axis> = g.axes().to_vec();
        axes[j] = Axis::uniform(if rng.gen_bool(0.5) { 2 } else { 1 });
        g = g.coarsen_to(&axes).unwrap();
    }
    g
}

/// Reference cdf: direct sum over cells of mass times overlap fraction.
pub fn brute_cdf(g: &GridCopula, u: &[f64]) -> f64 {
    let d = g.dim();
    let mut idx = vec![0usize; d];
    let mut acc = 0.0;
    for &(i, m) in g.cells() {
        g.decode(i, &mut idx);
        let mut f = m;
        for j in 0..d {
            let a = g.axis(j);
            let (lo, hi) = (a.lo(idx[j]), a.hi(idx[j]));
            f *= ((u[j].min(hi) - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
        acc += f;
    }
    acc
}

/// Merged breaks of two grids, axis by axis.
pub fn union_nodes(a: &GridCopula, b: &GridCopula) -> Vec<Vec<f64>> {
    (0..a.dim())
        .map(|j| pvcopula::axis::merge_breaks(&[a.axis(j).breaks(), b.axis(j).breaks()]))
        .collect()
}

pub fn for_each_node(nodes: &[Vec<f64>], mut f: impl FnMut(&[f64])) {
    let mut buf = vec![0.0; nodes.len()];
    pvcopula::grid::for_each_tuple(nodes, &mut buf, &mut |p| f(p));
}
