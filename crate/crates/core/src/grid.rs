//! Checkerboard copulas on rectilinear grids.
//!
//! A [`GridCopula`] stores the positive cells of a piecewise-constant density
//! in row-major order with the last axis fastest. Axes are usually uniform
//! but may carry arbitrary breaks, which is what the partial vine copula of a
//! checkerboard produces.

use std::sync::{Arc, OnceLock};

use rand::Rng;

use crate::axis::{union_axes, Axis};
use crate::error::{CopulaError, Result};

/// Default cap on the number of cells of a refined grid.
pub const DEFAULT_CELL_LIMIT: u128 = 100_000_000;

/// Tolerance used when validating user-supplied grids.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Largest node tensor kept in memory for fast cdf evaluation.
const CUM_NODE_LIMIT: u128 = 1 << 24;

#[derive(Clone, Debug)]
pub struct GridCopula {
    axes: Vec<Axis>,
    strides: Vec<u64>,
    cells: Vec<(u64, f64)>,
    cum: OnceLock<Option<Arc<Vec<f64>>>>,
}

fn strides_for(axes: &[Axis]) -> Result<Vec<u64>> {
    let d = axes.len();
    let mut strides = vec![1u64; d];
    let mut total: u128 = 1;
    for j in (0..d).rev() {
        strides[j] = total as u64;
        total *= axes[j].cells() as u128;
        if total > u64::MAX as u128 / 2 {
            return Err(CopulaError::ResolutionOverflow {
                cells: total,
                limit: u64::MAX as u128 / 2,
            });
        }
    }
    Ok(strides)
}

impl GridCopula {
    /// Validated construction from a dense mass tensor on uniform axes.
    pub fn new_grid(dim: usize, resolutions: &[usize], masses: &[f64]) -> Result<Self> {
        if dim < 2 {
            return Err(CopulaError::BadDimension(format!("dim {dim} < 2")));
        }
        if resolutions.len() != dim {
            return Err(CopulaError::DimensionMismatch {
                expected: dim,
                got: resolutions.len(),
            });
        }
        if resolutions.contains(&0) {
            return Err(CopulaError::ShapeMismatch("resolution 0".into()));
        }
        let axes: Vec<Axis> = resolutions.iter().map(|&n| Axis::uniform(n)).collect();
        Self::from_dense(axes, masses)
    }

    /// Validated construction from a dense mass tensor on the given axes.
    pub fn from_dense(axes: Vec<Axis>, masses: &[f64]) -> Result<Self> {
        let total: u128 = axes.iter().map(|a| a.cells() as u128).product();
        if total != masses.len() as u128 {
            return Err(CopulaError::ShapeMismatch(format!(
                "expected {total} masses, got {}",
                masses.len()
            )));
        }
        let cells = masses
            .iter()
            .enumerate()
            .map(|(i, &m)| (i as u64, m))
            .collect();
        Self::from_cells(axes, cells, VALIDATION_TOL)
    }

    /// Validated construction from sparse `(flat index, mass)` pairs.
    pub fn from_cells(axes: Vec<Axis>, cells: Vec<(u64, f64)>, tol: f64) -> Result<Self> {
        if axes.len() < 2 {
            return Err(CopulaError::BadDimension(format!("dim {} < 2", axes.len())));
        }
        let strides = strides_for(&axes)?;
        let total_cells: u128 = axes.iter().map(|a| a.cells() as u128).product();
        for &(i, m) in &cells {
            if !m.is_finite() {
                return Err(CopulaError::NonFinite);
            }
            if m < 0.0 {
                return Err(CopulaError::NegativeMass { index: i, mass: m });
            }
            if i as u128 >= total_cells {
                return Err(CopulaError::ShapeMismatch(format!(
                    "cell index {i} out of range"
                )));
            }
        }
        let g = Self::assemble(axes, strides, cells);
        g.validate(tol)?;
        Ok(g)
    }

    /// Sorts, merges duplicate indices and drops zero cells. No validation.
    pub(crate) fn from_cells_unchecked(axes: Vec<Axis>, cells: Vec<(u64, f64)>) -> Self {
        let strides = strides_for(&axes).expect("grid size checked by caller");
        Self::assemble(axes, strides, cells)
    }

    fn assemble(axes: Vec<Axis>, strides: Vec<u64>, mut cells: Vec<(u64, f64)>) -> Self {
        cells.sort_unstable_by_key(|c| c.0);
        let mut merged: Vec<(u64, f64)> = Vec::with_capacity(cells.len());
        for (i, m) in cells {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += m,
                _ => merged.push((i, m)),
            }
        }
        merged.retain(|c| c.1 > 0.0);
        GridCopula {
            axes,
            strides,
            cells: merged,
            cum: OnceLock::new(),
        }
    }

    fn validate(&self, tol: f64) -> Result<()> {
        let total: f64 = self.cells.iter().map(|c| c.1).sum();
        if (total - 1.0).abs() > tol {
            return Err(CopulaError::TotalMassViolation(total));
        }
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut slabs: Vec<Vec<f64>> = self.axes.iter().map(|a| vec![0.0; a.cells()]).collect();
        for &(i, m) in &self.cells {
            self.decode(i, &mut idx);
            for j in 0..d {
                slabs[j][idx[j]] += m;
            }
        }
        for (j, s) in slabs.iter().enumerate() {
            for (k, &m) in s.iter().enumerate() {
                let w = self.axes[j].width(k);
                if (m - w).abs() > tol {
                    return Err(CopulaError::MarginViolation {
                        axis: j,
                        slab: k,
                        mass: m,
                        expected: w,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, j: usize) -> &Axis {
        &self.axes[j]
    }

    /// Cells per axis.
    pub fn resolutions(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.cells()).collect()
    }

    pub fn is_uniform(&self) -> bool {
        self.axes.iter().all(|a| a.uniform_cells().is_some())
    }

    pub fn total_cells(&self) -> u128 {
        self.axes.iter().map(|a| a.cells() as u128).product()
    }

    /// Positive cells as `(flat index, mass)`, sorted by index.
    pub fn cells(&self) -> &[(u64, f64)] {
        &self.cells
    }

    pub fn decode(&self, flat: u64, out: &mut [usize]) {
        let mut r = flat;
        for (j, &s) in self.strides.iter().enumerate() {
            out[j] = (r / s) as usize;
            r %= s;
        }
    }

    pub fn encode(&self, idx: &[usize]) -> u64 {
        idx.iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i as u64 * s)
            .sum()
    }

    /// Mass of the cell with the given multi-index.
    pub fn mass_at(&self, idx: &[usize]) -> f64 {
        let flat = self.encode(idx);
        match self.cells.binary_search_by_key(&flat, |c| c.0) {
            Ok(k) => self.cells[k].1,
            Err(_) => 0.0,
        }
    }

    /// Volume of the cell with the given multi-index.
    pub fn cell_volume(&self, idx: &[usize]) -> f64 {
        idx.iter()
            .enumerate()
            .map(|(j, &i)| self.axes[j].width(i))
            .product()
    }

    /// Dense mass tensor in row-major, last-fastest order.
    pub fn dense_masses(&self) -> Result<Vec<f64>> {
        let total = self.total_cells();
        if total > DEFAULT_CELL_LIMIT {
            return Err(CopulaError::ResolutionOverflow {
                cells: total,
                limit: DEFAULT_CELL_LIMIT,
            });
        }
        let mut out = vec![0.0; total as usize];
        for &(i, m) in &self.cells {
            out[i as usize] = m;
        }
        Ok(out)
    }

    /// Largest cell density.
    pub fn max_density(&self) -> f64 {
        let mut idx = vec![0usize; self.dim()];
        self.cells
            .iter()
            .map(|&(i, m)| {
                self.decode(i, &mut idx);
                m / self.cell_volume(&idx)
            })
            .fold(0.0, f64::max)
    }

    fn node_shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.cells() + 1).collect()
    }

    /// Cumulative mass on all grid nodes, when small enough to hold.
    pub(crate) fn cumulative(&self) -> Option<&Arc<Vec<f64>>> {
        self.cum
            .get_or_init(|| {
                let shape = self.node_shape();
                let nodes: u128 = shape.iter().map(|&n| n as u128).product();
                (nodes <= CUM_NODE_LIMIT).then(|| Arc::new(self.build_cumulative(&shape)))
            })
            .as_ref()
    }

    fn build_cumulative(&self, shape: &[usize]) -> Vec<f64> {
        let d = shape.len();
        let total: usize = shape.iter().product();
        let mut nstride = vec![1usize; d];
        for j in (0..d - 1).rev() {
            nstride[j] = nstride[j + 1] * shape[j + 1];
        }
        let mut t = vec![0.0; total];
        let mut idx = vec![0usize; d];
        for &(i, m) in &self.cells {
            self.decode(i, &mut idx);
            let p: usize = idx.iter().zip(&nstride).map(|(&k, &s)| (k + 1) * s).sum();
            t[p] += m;
        }
        for j in 0..d {
            let s = nstride[j];
            let n = shape[j];
            for base in 0..total {
                if (base / s).is_multiple_of(n) {
                    let mut acc = 0.0;
                    for k in 0..n {
                        acc += t[base + k * s];
                        t[base + k * s] = acc;
                    }
                }
            }
        }
        t
    }

    /// Copula value at `u` (multilinear between grid nodes, exact at nodes).
    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        if let Some(cum) = self.cumulative() {
            let shape = self.node_shape();
            let d = self.dim();
            let mut base = 0usize;
            let mut stride = 1usize;
            let mut loc = vec![(0usize, 0.0f64); d];
            let mut nstride = vec![0usize; d];
            for j in (0..d).rev() {
                nstride[j] = stride;
                stride *= shape[j];
            }
            for j in 0..d {
                loc[j] = self.axes[j].locate(u[j]);
                base += loc[j].0 * nstride[j];
            }
            // Reduce one axis at a time, first axis first, with the same
            // interpolation as `eval_tensor` so both agree bit for bit.
            let mut v: Vec<f64> = (0..1usize << d)
                .map(|c| {
                    let mut p = base;
                    for j in 0..d {
                        if c >> (d - 1 - j) & 1 == 1 {
                            p += nstride[j];
                        }
                    }
                    cum[p]
                })
                .collect();
            for (_, f) in loc.iter().take(d) {
                let half = v.len() / 2;
                for c in 0..half {
                    v[c] = if *f == 0.0 {
                        v[c]
                    } else if *f == 1.0 {
                        v[c + half]
                    } else {
                        (1.0 - f) * v[c] + f * v[c + half]
                    };
                }
                v.truncate(half);
            }
            v[0]
        } else {
            self.eval_by_cells(u)
        }
    }

    /// Copula value computed directly from the cells.
    pub fn eval_by_cells(&self, u: &[f64]) -> f64 {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut acc = 0.0;
        'cells: for &(i, m) in &self.cells {
            self.decode(i, &mut idx);
            let mut f = m;
            for j in 0..d {
                let a = &self.axes[j];
                let (lo, hi) = (a.lo(idx[j]), a.hi(idx[j]));
                if u[j] <= lo {
                    continue 'cells;
                }
                if u[j] < hi {
                    f *= (u[j] - lo) / (hi - lo);
                }
            }
            acc += f;
        }
        acc
    }

    /// Values on the tensor grid `nodes[0] x ... x nodes[d-1]`, row-major.
    pub fn eval_tensor(&self, nodes: &[Vec<f64>]) -> Vec<f64> {
        let d = self.dim();
        if let Some(cum) = self.cumulative() {
            let mut shape = self.node_shape();
            let mut t: Vec<f64> = cum.as_ref().clone();
            for j in 0..d {
                t = interp_axis(&t, &shape, j, &self.axes[j], &nodes[j]);
                shape[j] = nodes[j].len();
            }
            return t;
        }
        // Node sets that are breaks of this grid allow exact aggregation.
        let aligned = (0..d).all(|j| {
            nodes[j]
                .iter()
                .all(|&x| self.axes[j].find_break(x).is_some())
        });
        if aligned {
            let coarse_axes: Vec<Axis> = nodes
                .iter()
                .map(|n| crate::axis::axis_from_points(n))
                .collect();
            let coarse_nodes: u128 = coarse_axes.iter().map(|a| a.cells() as u128 + 1).product();
            if coarse_nodes <= CUM_NODE_LIMIT {
                if let Ok(c) = self.coarsen_to(&coarse_axes) {
                    return c.eval_tensor(nodes);
                }
            }
        }
        let mut out = Vec::new();
        let mut u = vec![0.0; d];
        for_each_tuple(nodes, &mut u, &mut |p| out.push(self.eval_by_cells(p)));
        out
    }

    /// Mass of the box `[lower, upper]` by inclusion-exclusion.
    pub fn box_mass(&self, lower: &[f64], upper: &[f64]) -> f64 {
        box_mass_by(self.dim(), lower, upper, |p| self.eval(p))
    }

    /// Mass of a box by direct summation over overlapping cells.
    pub fn box_mass_by_cells(&self, lower: &[f64], upper: &[f64]) -> f64 {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut acc = 0.0;
        'cells: for &(i, m) in &self.cells {
            self.decode(i, &mut idx);
            let mut f = m;
            for j in 0..d {
                let a = &self.axes[j];
                let (lo, hi) = (a.lo(idx[j]), a.hi(idx[j]));
                let ov = (hi.min(upper[j]) - lo.max(lower[j])).max(0.0);
                if ov == 0.0 {
                    continue 'cells;
                }
                f *= ov / (hi - lo);
            }
            acc += f;
        }
        acc
    }

    /// Push-forward onto the listed axes (any number of axes, in the given order).
    pub fn project(&self, keep: &[usize]) -> GridCopula {
        let axes: Vec<Axis> = keep.iter().map(|&j| self.axes[j].clone()).collect();
        let strides = strides_for(&axes).expect("projection is smaller than the source");
        let mut idx = vec![0usize; self.dim()];
        let cells = self
            .cells
            .iter()
            .map(|&(i, m)| {
                self.decode(i, &mut idx);
                let f: u64 = keep
                    .iter()
                    .zip(&strides)
                    .map(|(&j, &s)| idx[j] as u64 * s)
                    .sum();
                (f, m)
            })
            .collect();
        GridCopula::assemble(axes, strides, cells)
    }

    /// Marginal copula on the sorted index set `j` (0-based, at least two axes).
    pub fn margin(&self, j: &[usize]) -> Result<GridCopula> {
        if j.len() < 2 || j.len() > self.dim() {
            return Err(CopulaError::BadIndexSet(format!("{j:?}")));
        }
        if j.windows(2).any(|w| w[1] <= w[0]) || *j.last().unwrap() >= self.dim() {
            return Err(CopulaError::BadIndexSet(format!("{j:?}")));
        }
        Ok(self.project(j))
    }

    /// Same copula with axes permuted: new axis `k` is old axis `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Result<GridCopula> {
        let mut seen = vec![false; self.dim()];
        if perm.len() != self.dim() {
            return Err(CopulaError::BadIndexSet(format!("{perm:?}")));
        }
        for &p in perm {
            if p >= self.dim() || seen[p] {
                return Err(CopulaError::BadIndexSet(format!("{perm:?}")));
            }
            seen[p] = true;
        }
        Ok(self.project(perm))
    }

    /// Mirror image along `axis` (0-based): `u_axis -> 1 - u_axis`.
    pub fn reflect(&self, axis: usize) -> Result<GridCopula> {
        if axis >= self.dim() {
            return Err(CopulaError::BadAxis(axis));
        }
        let mut axes = self.axes.clone();
        axes[axis] = self.axes[axis].reflected();
        let n = self.axes[axis].cells();
        let mut idx = vec![0usize; self.dim()];
        let cells = self
            .cells
            .iter()
            .map(|&(i, m)| {
                self.decode(i, &mut idx);
                idx[axis] = n - 1 - idx[axis];
                (self.encode(&idx), m)
            })
            .collect();
        Ok(GridCopula::assemble(axes, self.strides.clone(), cells))
    }

    /// Re-express on finer axes; masses split proportionally to volume.
    pub fn refine_to(&self, target: &[Axis]) -> Result<GridCopula> {
        self.refine_to_with_limit(target, DEFAULT_CELL_LIMIT)
    }

    /// As [`refine_to`](Self::refine_to), failing when more than `limit` charged cells would result.
    pub fn refine_to_with_limit(&self, target: &[Axis], limit: u128) -> Result<GridCopula> {
        if target.len() != self.dim() {
            return Err(CopulaError::DimensionMismatch {
                expected: self.dim(),
                got: target.len(),
            });
        }
        if target == self.axes.as_slice() {
            return Ok(self.clone());
        }
        let splits: Vec<Vec<Vec<(usize, f64)>>> = self
            .axes
            .iter()
            .zip(target)
            .map(|(a, t)| a.split_onto(t))
            .collect::<Result<_>>()?;
        let strides = strides_for(target)?;
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut produced: u128 = 0;
        for &(i, _) in &self.cells {
            self.decode(i, &mut idx);
            produced += (0..d)
                .map(|j| splits[j][idx[j]].len() as u128)
                .product::<u128>();
        }
        if produced > limit {
            return Err(CopulaError::ResolutionOverflow {
                cells: produced,
                limit,
            });
        }
        let mut cells = Vec::with_capacity(produced as usize);
        for &(i, m) in &self.cells {
            self.decode(i, &mut idx);
            let parts: Vec<&Vec<(usize, f64)>> = (0..d).map(|j| &splits[j][idx[j]]).collect();
            let mut counter = vec![0usize; d];
            'combos: loop {
                let mut flat = 0u64;
                let mut w = m;
                for j in 0..d {
                    let (k, f) = parts[j][counter[j]];
                    flat += k as u64 * strides[j];
                    w *= f;
                }
                cells.push((flat, w));
                let mut j = d;
                while j > 0 {
                    j -= 1;
                    counter[j] += 1;
                    if counter[j] < parts[j].len() {
                        continue 'combos;
                    }
                    counter[j] = 0;
                }
                break;
            }
        }
        Ok(GridCopula::assemble(target.to_vec(), strides, cells))
    }

    /// Aggregate onto coarser axes whose breaks are breaks of this grid.
    pub fn coarsen_to(&self, target: &[Axis]) -> Result<GridCopula> {
        if target.len() != self.dim() {
            return Err(CopulaError::DimensionMismatch {
                expected: self.dim(),
                got: target.len(),
            });
        }
        for (t, a) in target.iter().zip(&self.axes) {
            if !t.is_refined_by(a) {
                return Err(CopulaError::Format(
                    "coarse axis is not contained in the grid".into(),
                ));
            }
        }
        let maps: Vec<Vec<usize>> = self
            .axes
            .iter()
            .zip(target)
            .map(|(a, t)| {
                (0..a.cells())
                    .map(|i| t.cell_of(0.5 * (a.lo(i) + a.hi(i))))
                    .collect()
            })
            .collect();
        let strides = strides_for(target)?;
        let mut idx = vec![0usize; self.dim()];
        let cells = self
            .cells
            .iter()
            .map(|&(i, m)| {
                self.decode(i, &mut idx);
                let f: u64 = (0..idx.len())
                    .map(|j| maps[j][idx[j]] as u64 * strides[j])
                    .sum();
                (f, m)
            })
            .collect();
        Ok(GridCopula::assemble(target.to_vec(), strides, cells))
    }

    /// Pad with `d - k` independent axes of resolution one.
    pub fn product_extend(&self, d: usize) -> Result<GridCopula> {
        if d <= self.dim() {
            return Err(CopulaError::BadDimension(format!(
                "target dimension {d} must exceed {}",
                self.dim()
            )));
        }
        let mut axes = self.axes.clone();
        axes.extend((self.dim()..d).map(|_| Axis::uniform(1)));
        let strides = strides_for(&axes)?;
        let mut idx = vec![0usize; d];
        let cells = self
            .cells
            .iter()
            .map(|&(i, m)| {
                self.decode(i, &mut idx[..self.dim()]);
                let f: u64 = idx.iter().zip(&strides).map(|(&k, &s)| k as u64 * s).sum();
                (f, m)
            })
            .collect();
        Ok(GridCopula::assemble(axes, strides, cells))
    }

    /// Largest absolute cellwise mass difference on the common refinement.
    pub fn max_cell_diff(&self, other: &GridCopula) -> Result<f64> {
        let (a, b) = common_refinement(self, other, DEFAULT_CELL_LIMIT)?;
        let mut diff = 0.0f64;
        let (mut p, mut q) = (0usize, 0usize);
        while p < a.cells.len() || q < b.cells.len() {
            let ia = a.cells.get(p).map(|c| c.0).unwrap_or(u64::MAX);
            let ib = b.cells.get(q).map(|c| c.0).unwrap_or(u64::MAX);
            if ia == ib {
                diff = diff.max((a.cells[p].1 - b.cells[q].1).abs());
                p += 1;
                q += 1;
            } else if ia < ib {
                diff = diff.max(a.cells[p].1);
                p += 1;
            } else {
                diff = diff.max(b.cells[q].1);
                q += 1;
            }
        }
        Ok(diff)
    }

    /// Draw `n` points: pick a cell by mass, then a uniform point inside it.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let mut cum = Vec::with_capacity(self.cells.len());
        let mut acc = 0.0;
        for c in &self.cells {
            acc += c.1;
            cum.push(acc);
        }
        let d = self.dim();
        let mut idx = vec![0usize; d];
        (0..n)
            .map(|_| {
                let r = rng.gen::<f64>() * acc;
                let k = cum.partition_point(|&c| c <= r).min(self.cells.len() - 1);
                self.decode(self.cells[k].0, &mut idx);
                (0..d)
                    .map(|j| {
                        let a = &self.axes[j];
                        loop {
                            let x = a.lo(idx[j]) + rng.gen::<f64>() * a.width(idx[j]);
                            if x > 0.0 && x < 1.0 {
                                break x;
                            }
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Linear interpolation of a node tensor along axis `j` onto new coordinates.
fn interp_axis(t: &[f64], shape: &[usize], j: usize, axis: &Axis, xs: &[f64]) -> Vec<f64> {
    let outer: usize = shape[..j].iter().product();
    let inner: usize = shape[j + 1..].iter().product();
    let n = shape[j];
    let m = xs.len();
    let locs: Vec<(usize, f64)> = xs.iter().map(|&x| axis.locate(x)).collect();
    let mut out = vec![0.0; outer * m * inner];
    for o in 0..outer {
        for (k, &(i, f)) in locs.iter().enumerate() {
            let src0 = (o * n + i) * inner;
            let dst = (o * m + k) * inner;
            if f == 0.0 {
                out[dst..dst + inner].copy_from_slice(&t[src0..src0 + inner]);
            } else if f == 1.0 {
                out[dst..dst + inner].copy_from_slice(&t[src0 + inner..src0 + 2 * inner]);
            } else {
                for r in 0..inner {
                    out[dst + r] = (1.0 - f) * t[src0 + r] + f * t[src0 + inner + r];
                }
            }
        }
    }
    out
}

/// Call `f` on every point of a tensor grid in row-major order.
pub fn for_each_tuple(nodes: &[Vec<f64>], buf: &mut [f64], f: &mut dyn FnMut(&[f64])) {
    fn rec(nodes: &[Vec<f64>], j: usize, buf: &mut [f64], f: &mut dyn FnMut(&[f64])) {
        if j == nodes.len() {
            f(buf);
            return;
        }
        for &x in &nodes[j] {
            buf[j] = x;
            rec(nodes, j + 1, buf, f);
        }
    }
    rec(nodes, 0, buf, f)
}

/// Inclusion-exclusion over the `2^d` corners of a box.
pub fn box_mass_by(
    d: usize,
    lower: &[f64],
    upper: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let mut p = vec![0.0; d];
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut lows = 0;
        for j in 0..d {
            if corner >> j & 1 == 1 {
                p[j] = upper[j];
            } else {
                p[j] = lower[j];
                lows += 1;
            }
        }
        let v = f(&p);
        if lows % 2 == 0 {
            acc += v;
        } else {
            acc -= v;
        }
    }
    acc
}

/// Both grids re-expressed on the common refinement of their axes.
pub fn common_refinement(
    a: &GridCopula,
    b: &GridCopula,
    limit: u128,
) -> Result<(GridCopula, GridCopula)> {
    if a.dim() != b.dim() {
        return Err(CopulaError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let axes: Vec<Axis> = a
        .axes
        .iter()
        .zip(&b.axes)
        .map(|(x, y)| union_axes(&[x, y]))
        .collect();
    Ok((
        a.refine_to_with_limit(&axes, limit)?,
        b.refine_to_with_limit(&axes, limit)?,
    ))
}

/// Cellwise convex combination on the common refinement.
pub fn convex_combine(weights: &[f64], copulas: &[GridCopula]) -> Result<GridCopula> {
    if weights.len() != copulas.len() || copulas.is_empty() {
        return Err(CopulaError::WeightError(
            "one weight per copula required".into(),
        ));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(CopulaError::WeightError(
            "weights must be nonnegative".into(),
        ));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > VALIDATION_TOL {
        return Err(CopulaError::WeightError(format!("weights sum to {s}")));
    }
    let d = copulas[0].dim();
    if let Some(c) = copulas.iter().find(|c| c.dim() != d) {
        return Err(CopulaError::DimensionMismatch {
            expected: d,
            got: c.dim(),
        });
    }
    let axes: Vec<Axis> = (0..d)
        .map(|j| {
            let list: Vec<&Axis> = copulas.iter().map(|c| &c.axes[j]).collect();
            union_axes(&list)
        })
        .collect();
    let mut cells = Vec::new();
    for (w, c) in weights.iter().zip(copulas) {
        if *w == 0.0 {
            continue;
        }
        let r = c.refine_to(&axes)?;
        cells.extend(r.cells.iter().map(|&(i, m)| (i, w * m)));
    }
    GridCopula::from_cells(axes, cells, 1e-10)
}

/// Empirical copula of a tie-free sample: one cell of mass `1/n` per point, placed by ranks.
pub fn empirical_copula(sample: &[Vec<f64>]) -> Result<GridCopula> {
    let n = sample.len();
    if n == 0 {
        return Err(CopulaError::InvalidSample("empty sample".into()));
    }
    let d = sample[0].len();
    if d < 2 {
        return Err(CopulaError::BadDimension(format!("dim {d} < 2")));
    }
    if let Some(p) = sample.iter().find(|p| p.len() != d) {
        return Err(CopulaError::DimensionMismatch {
            expected: d,
            got: p.len(),
        });
    }
    if sample.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CopulaError::NonFinite);
    }
    let mut ranks = vec![vec![0usize; d]; n];
    for j in 0..d {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| sample[a][j].total_cmp(&sample[b][j]));
        for w in order.windows(2) {
            if sample[w[0]][j] == sample[w[1]][j] {
                return Err(CopulaError::TiesDetected(j));
            }
        }
        for (r, &i) in order.iter().enumerate() {
            ranks[i][j] = r;
        }
    }
    let axes: Vec<Axis> = (0..d).map(|_| Axis::uniform(n)).collect();
    let strides = strides_for(&axes)?;
    let m = 1.0 / n as f64;
    let cells = ranks
        .iter()
        .map(|r| (r.iter().zip(&strides).map(|(&k, &s)| k as u64 * s).sum(), m))
        .collect();
    Ok(GridCopula::assemble(axes, strides, cells))
}
