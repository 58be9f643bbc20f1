//! Markov kernels of checkerboard copulas and everything derived from them:
//! conditional margins, conditional copulas (Sklar inversion onto the image
//! grid of the conditional margins), the partial copula and the
//! simplifiedness diagnostics `Delta` and `J`.

use std::collections::HashMap;
use std::sync::OnceLock;

use crate::axis::{union_axes, Axis};
use crate::error::{CopulaError, Result};
use crate::grid::GridCopula;
use crate::pwl::PiecewiseLinearCdf;
use crate::quadrature::integrate_abs_multilinear;

/// Conditional structure of one conditioning cell.
#[derive(Debug)]
pub struct Slab {
    /// Multi-index of the conditioning cell (over the conditioning axes).
    pub cell: Vec<usize>,
    /// `mu_{C_L}` mass of the conditioning cell.
    pub weight: f64,
    /// Conditional cell masses over the target axes, normalised to one.
    joint: Vec<(u64, f64)>,
    /// Positive conditional cell masses per target axis, sorted by cell.
    axis_masses: Vec<Vec<(usize, f64)>>,
    margins: Vec<PiecewiseLinearCdf>,
    copula: OnceLock<GridCopula>,
}

/// Disintegration of a grid copula with respect to a set of conditioning axes.
#[derive(Debug)]
pub struct ConditionalFamily {
    cond: Vec<usize>,
    targets: Vec<usize>,
    cond_axes: Vec<Axis>,
    target_axes: Vec<Axis>,
    target_strides: Vec<u64>,
    keys: Vec<u64>,
    slabs: Vec<Slab>,
}

fn strides(axes: &[Axis]) -> Vec<u64> {
    let mut s = vec![1u64; axes.len()];
    for j in (0..axes.len().saturating_sub(1)).rev() {
        s[j] = s[j + 1] * axes[j + 1].cells() as u64;
    }
    s
}

impl ConditionalFamily {
    /// Group the cells of `c` by their conditioning cell over the sorted axes `cond`.
    pub fn new(c: &GridCopula, cond: &[usize]) -> Result<Self> {
        let d = c.dim();
        if cond.is_empty() || cond.len() >= d {
            return Err(CopulaError::BadIndexSet(format!("{cond:?}")));
        }
        if cond.windows(2).any(|w| w[1] <= w[0]) || *cond.last().unwrap() >= d {
            return Err(CopulaError::BadIndexSet(format!("{cond:?}")));
        }
        let targets: Vec<usize> = (0..d).filter(|j| !cond.contains(j)).collect();
        let cond_axes: Vec<Axis> = cond.iter().map(|&j| c.axis(j).clone()).collect();
        let target_axes: Vec<Axis> = targets.iter().map(|&j| c.axis(j).clone()).collect();
        let cs = strides(&cond_axes);
        let ts = strides(&target_axes);
        let mut idx = vec![0usize; d];
        let mut rows: Vec<(u64, u64, f64)> = c
            .cells()
            .iter()
            .map(|&(i, m)| {
                c.decode(i, &mut idx);
                let k: u64 = cond.iter().zip(&cs).map(|(&j, &s)| idx[j] as u64 * s).sum();
                let t: u64 = targets
                    .iter()
                    .zip(&ts)
                    .map(|(&j, &s)| idx[j] as u64 * s)
                    .sum();
                (k, t, m)
            })
            .collect();
        rows.sort_unstable_by_key(|r| (r.0, r.1));
        let mut keys = Vec::new();
        let mut slabs = Vec::new();
        let mut start = 0;
        while start < rows.len() {
            let key = rows[start].0;
            let mut end = start;
            while end < rows.len() && rows[end].0 == key {
                end += 1;
            }
            let weight: f64 = rows[start..end].iter().map(|r| r.2).sum();
            let joint: Vec<(u64, f64)> = rows[start..end]
                .iter()
                .map(|r| (r.1, r.2 / weight))
                .collect();
            let mut cell = vec![0usize; cond.len()];
            let mut r = key;
            for (p, &s) in cs.iter().enumerate() {
                cell[p] = (r / s) as usize;
                r %= s;
            }
            let axis_masses: Vec<Vec<(usize, f64)>> = (0..targets.len())
                .map(|p| {
                    let mut m: Vec<(usize, f64)> = joint
                        .iter()
                        .map(|&(t, w)| (((t / ts[p]) % target_axes[p].cells() as u64) as usize, w))
                        .collect();
                    m.sort_unstable_by_key(|x| x.0);
                    m.dedup_by(|b, a| {
                        if a.0 == b.0 {
                            a.1 += b.1;
                            true
                        } else {
                            false
                        }
                    });
                    m
                })
                .collect();
            let margins = axis_masses
                .iter()
                .zip(&target_axes)
                .map(|(m, a)| PiecewiseLinearCdf::from_sparse_masses(a, m))
                .collect();
            keys.push(key);
            slabs.push(Slab {
                cell,
                weight,
                joint,
                axis_masses,
                margins,
                copula: OnceLock::new(),
            });
            start = end;
        }
        Ok(ConditionalFamily {
            cond: cond.to_vec(),
            targets,
            cond_axes,
            target_axes,
            target_strides: ts,
            keys,
            slabs,
        })
    }

    /// Family given the last coordinate.
    pub fn last_axis(c: &GridCopula) -> Result<Self> {
        Self::new(c, &[c.dim() - 1])
    }

    pub fn conditioning_axes(&self) -> &[usize] {
        &self.cond
    }

    pub fn target_axes(&self) -> &[usize] {
        &self.targets
    }

    pub fn cond_axis(&self, p: usize) -> &Axis {
        &self.cond_axes[p]
    }

    /// Slabs with positive weight, ordered by conditioning cell.
    pub fn slabs(&self) -> &[Slab] {
        &self.slabs
    }

    fn cond_key(&self, cell: &[usize]) -> u64 {
        let cs = strides(&self.cond_axes);
        cell.iter().zip(&cs).map(|(&i, &s)| i as u64 * s).sum()
    }

    /// Slab of a conditioning cell, if it has positive mass.
    pub fn slab_by_cell(&self, cell: &[usize]) -> Option<&Slab> {
        let key = self.cond_key(cell);
        self.keys.binary_search(&key).ok().map(|k| &self.slabs[k])
    }

    /// Slab whose conditioning cell contains `t`.
    pub fn slab_at(&self, t: &[f64]) -> Result<&Slab> {
        if t.len() != self.cond.len() {
            return Err(CopulaError::DimensionMismatch {
                expected: self.cond.len(),
                got: t.len(),
            });
        }
        let cell: Vec<usize> = t
            .iter()
            .zip(&self.cond_axes)
            .map(|(&x, a)| a.cell_of(x))
            .collect();
        self.slab_by_cell(&cell).ok_or(CopulaError::ZeroMassSlab)
    }

    /// Position in `slabs()` of the slab containing the single conditioning value `t`.
    pub(crate) fn slab_index_at(&self, t: f64) -> Option<usize> {
        let key = self.cond_axes[0].cell_of(t) as u64;
        self.keys.binary_search(&key).ok()
    }

    /// Conditional joint distribution of a slab as a grid over the target axes.
    pub(crate) fn slab_joint_grid(&self, slab: &Slab) -> GridCopula {
        GridCopula::from_cells_unchecked(self.target_axes.clone(), slab.joint.clone())
    }

    /// `K(t, [0, u])` for a slab, `u` over the target axes.
    pub fn slab_kernel(&self, slab: &Slab, u: &[f64]) -> f64 {
        let k = self.targets.len();
        let locs: Vec<(usize, f64)> = u
            .iter()
            .zip(&self.target_axes)
            .map(|(&x, a)| a.locate(x))
            .collect();
        let mut acc = 0.0;
        'cells: for &(t, m) in &slab.joint {
            let mut f = m;
            for p in 0..k {
                let i =
                    ((t / self.target_strides[p]) % self.target_axes[p].cells() as u64) as usize;
                let (li, fr) = locs[p];
                if i > li {
                    continue 'cells;
                }
                if i == li {
                    f *= fr;
                }
            }
            acc += f;
        }
        acc
    }

    /// Conditional copula of a slab as a checkerboard on the image grid of its margins.
    pub fn slab_copula<'a>(&self, slab: &'a Slab) -> &'a GridCopula {
        slab.copula.get_or_init(|| self.build_copula(slab))
    }

    fn build_copula(&self, slab: &Slab) -> GridCopula {
        let k = self.targets.len();
        let mut axes: Vec<Axis> = Vec::with_capacity(k);
        for m in &slab.axis_masses {
            let mut breaks = Vec::with_capacity(m.len() + 1);
            breaks.push(0.0);
            let mut acc = 0.0;
            for &(_, w) in m {
                acc += w;
                breaks.push(acc);
            }
            *breaks.last_mut().unwrap() = 1.0;
            axes.push(Axis::from_breaks(breaks).expect("cumulative values increase"));
        }
        let ns = strides(&axes);
        let cells: Vec<(u64, f64)> = slab
            .joint
            .iter()
            .map(|&(t, m)| {
                let flat = (0..k)
                    .map(|p| {
                        let i = ((t / self.target_strides[p]) % self.target_axes[p].cells() as u64)
                            as usize;
                        let pos = slab.axis_masses[p]
                            .binary_search_by_key(&i, |x| x.0)
                            .expect("cell has positive margin");
                        pos as u64 * ns[p]
                    })
                    .sum();
                (flat, m)
            })
            .collect();
        GridCopula::from_cells_unchecked(axes, cells)
    }
}

impl Slab {
    /// Conditional margin of the `p`-th target axis.
    pub fn margin(&self, p: usize) -> &PiecewiseLinearCdf {
        &self.margins[p]
    }

    pub fn margins(&self) -> &[PiecewiseLinearCdf] {
        &self.margins
    }
}

/// `K_{C}(t, [0, u])` with conditioning axes `cond`; `u` covers the remaining axes in order.
pub fn kernel_cdf(c: &GridCopula, t: &[f64], u: &[f64], cond: &[usize]) -> Result<f64> {
    let fam = ConditionalFamily::new(c, cond)?;
    if u.len() != fam.targets.len() {
        return Err(CopulaError::DimensionMismatch {
            expected: fam.targets.len(),
            got: u.len(),
        });
    }
    let slab = fam.slab_at(t)?;
    Ok(fam.slab_kernel(slab, u))
}

/// Conditional distribution function of axis `j` given the conditioning axes at `t`.
pub fn conditional_margin(
    c: &GridCopula,
    j: usize,
    t: &[f64],
    cond: &[usize],
) -> Result<PiecewiseLinearCdf> {
    let fam = ConditionalFamily::new(c, cond)?;
    let p = fam
        .targets
        .iter()
        .position(|&x| x == j)
        .ok_or_else(|| CopulaError::BadIndexSet(format!("axis {j} is conditioned on")))?;
    Ok(fam.slab_at(t)?.margin(p).clone())
}

/// Conditional copula of a trivariate grid copula on slab `i` of its last axis.
pub fn conditional_copula(c: &GridCopula, i: usize) -> Result<GridCopula> {
    check_dim3(c)?;
    let fam = ConditionalFamily::last_axis(c)?;
    if i >= c.axis(2).cells() {
        return Err(CopulaError::BadIndex(format!("slab {i}")));
    }
    let slab = fam.slab_by_cell(&[i]).ok_or(CopulaError::ZeroMassSlab)?;
    Ok(fam.slab_copula(slab).clone())
}

fn check_dim3(c: &GridCopula) -> Result<()> {
    if c.dim() != 3 {
        return Err(CopulaError::BadDimension(format!(
            "expected dim 3, got {}",
            c.dim()
        )));
    }
    Ok(())
}

/// Weighted average of the slab copulas of a family, on the union of their grids.
pub fn average_slab_copulas(
    fam: &ConditionalFamily,
    weight: &dyn Fn(&Slab) -> f64,
) -> Result<GridCopula> {
    let k = fam.targets.len();
    let used: Vec<(&Slab, f64)> = fam
        .slabs
        .iter()
        .map(|s| (s, weight(s)))
        .filter(|x| x.1 > 0.0)
        .collect();
    if used.is_empty() {
        return Err(CopulaError::ZeroMassSlab);
    }
    let copulas: Vec<&GridCopula> = used.iter().map(|(s, _)| fam.slab_copula(s)).collect();
    let axes: Vec<Axis> = (0..k)
        .map(|p| {
            let list: Vec<&Axis> = copulas.iter().map(|c| c.axis(p)).collect();
            union_axes(&list)
        })
        .collect();
    let total_w: f64 = used.iter().map(|x| x.1).sum();
    let mut acc: HashMap<u64, f64> = HashMap::new();
    for ((_, w), c) in used.iter().zip(&copulas) {
        let r = c.refine_to(&axes)?;
        for &(i, m) in r.cells() {
            *acc.entry(i).or_insert(0.0) += w / total_w * m;
        }
    }
    Ok(GridCopula::from_cells_unchecked(
        axes,
        acc.into_iter().collect(),
    ))
}

/// Partial copula `C_p = int C^t_{12;3} dt` of a trivariate grid copula.
pub fn partial_copula(c: &GridCopula) -> Result<GridCopula> {
    check_dim3(c)?;
    let fam = ConditionalFamily::last_axis(c)?;
    average_slab_copulas(&fam, &|s| s.weight)
}

/// `int |A - B|` over the unit cube for two grid copulas of equal dimension.
///
/// Returns the value and an error estimate from the adaptive quadrature.
pub fn l1_distance(a: &GridCopula, b: &GridCopula, tol: f64) -> Result<(f64, f64)> {
    if a.dim() != b.dim() {
        return Err(CopulaError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    let k = a.dim();
    let axes: Vec<Axis> = (0..k)
        .map(|j| union_axes(&[a.axis(j), b.axis(j)]))
        .collect();
    let nodes: Vec<Vec<f64>> = axes.iter().map(|x| x.breaks().to_vec()).collect();
    let ga = a.eval_tensor(&nodes);
    let gb = b.eval_tensor(&nodes);
    let g: Vec<f64> = ga.iter().zip(&gb).map(|(x, y)| x - y).collect();
    Ok(integrate_abs_on_nodes(&g, &axes, tol))
}

/// Integral of `|g|` where `g` is multilinear per cell with node values in `g`.
pub(crate) fn integrate_abs_on_nodes(g: &[f64], axes: &[Axis], tol: f64) -> (f64, f64) {
    let k = axes.len();
    let shape: Vec<usize> = axes.iter().map(|a| a.cells() + 1).collect();
    let mut ns = vec![1usize; k];
    for j in (0..k.saturating_sub(1)).rev() {
        ns[j] = ns[j + 1] * shape[j + 1];
    }
    let offsets: Vec<usize> = (0..1usize << k)
        .map(|c| (0..k).map(|j| ((c >> (k - 1 - j)) & 1) * ns[j]).sum())
        .collect();
    let mut idx = vec![0usize; k];
    let mut corners = vec![0.0; 1 << k];
    let (mut total, mut err) = (0.0, 0.0);
    let ncells: usize = axes.iter().map(|a| a.cells()).product();
    for _ in 0..ncells {
        let base: usize = idx.iter().zip(&ns).map(|(&i, &s)| i * s).sum();
        for (c, o) in offsets.iter().enumerate() {
            corners[c] = g[base + o];
        }
        if corners.iter().any(|&x| x != 0.0) {
            let vol: f64 = (0..k).map(|j| axes[j].width(idx[j])).product();
            let (v, e) = integrate_abs_multilinear(&corners, vol, tol);
            total += v;
            err += e;
        }
        for j in (0..k).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].cells() {
                break;
            }
            idx[j] = 0;
        }
    }
    (total, err)
}

/// Largest pairwise `L^1` distance between slab conditional copulas, with error estimate.
pub fn simplifiedness_delta(c: &GridCopula) -> Result<(f64, f64)> {
    check_dim3(c)?;
    let fam = ConditionalFamily::last_axis(c)?;
    let mut unique: Vec<&GridCopula> = Vec::new();
    for s in fam.slabs() {
        let cop = fam.slab_copula(s);
        if !unique
            .iter()
            .any(|u| u.axes() == cop.axes() && u.cells() == cop.cells())
        {
            unique.push(cop);
        }
    }
    let (mut delta, mut err) = (0.0f64, 0.0f64);
    for i in 0..unique.len() {
        for j in i + 1..unique.len() {
            let (v, e) = l1_distance(unique[i], unique[j], 1e-13)?;
            if v > delta {
                delta = v;
                err = e;
            }
        }
    }
    Ok((delta, err))
}

/// `(Delta <= tol, Delta)` for a trivariate grid copula.
pub fn is_simplified(c: &GridCopula, tol: f64) -> Result<(bool, f64)> {
    let (delta, _) = simplifiedness_delta(c)?;
    Ok((delta <= tol, delta))
}

/// `J(C, D) = int |C^t_{12;3}(s) - D^t_{12;3}(s)| ds dt`, with error estimate.
pub fn j_functional(c: &GridCopula, d: &GridCopula) -> Result<(f64, f64)> {
    check_dim3(c)?;
    check_dim3(d)?;
    let fc = ConditionalFamily::last_axis(c)?;
    let fd = ConditionalFamily::last_axis(d)?;
    let t_axis = union_axes(&[c.axis(2), d.axis(2)]);
    let mut cache: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    let (mut total, mut err) = (0.0, 0.0);
    for k in 0..t_axis.cells() {
        let mid = 0.5 * (t_axis.lo(k) + t_axis.hi(k));
        let ic = fc.keys.binary_search(&(c.axis(2).cell_of(mid) as u64));
        let id = fd.keys.binary_search(&(d.axis(2).cell_of(mid) as u64));
        let (ic, id) = match (ic, id) {
            (Ok(a), Ok(b)) => (a, b),
            _ => return Err(CopulaError::ZeroMassSlab),
        };
        let (v, e) = match cache.get(&(ic, id)) {
            Some(x) => *x,
            None => {
                let x = l1_distance(
                    fc.slab_copula(&fc.slabs[ic]),
                    fd.slab_copula(&fd.slabs[id]),
                    1e-13,
                )?;
                cache.insert((ic, id), x);
                x
            }
        };
        let len = t_axis.width(k);
        total += len * v;
        err += len * e;
    }
    Ok((total, err))
}

/// `|int K(v, G_v) dv - mu_C(G)|` for the box `G = [lower, upper]`, exact slab sums.
pub fn disintegration_residual(c: &GridCopula, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let d = c.dim();
    if lower.len() != d || upper.len() != d {
        return Err(CopulaError::DimensionMismatch {
            expected: d,
            got: lower.len().min(upper.len()),
        });
    }
    for j in 0..d {
        if lower[j] > upper[j] {
            return Err(CopulaError::InvertedBox(j));
        }
    }
    let fam = ConditionalFamily::last_axis(c)?;
    let v_axis = c.axis(d - 1);
    let mut integral = 0.0;
    for s in fam.slabs() {
        let k = s.cell[0];
        let len = (v_axis.hi(k).min(upper[d - 1]) - v_axis.lo(k).max(lower[d - 1])).max(0.0);
        if len == 0.0 {
            continue;
        }
        let density = s.weight / v_axis.width(k);
        let kb = crate::grid::box_mass_by(d - 1, &lower[..d - 1], &upper[..d - 1], |p| {
            fam.slab_kernel(s, p)
        });
        integral += len * density * kb;
    }
    Ok((integral - c.box_mass_by_cells(lower, upper)).abs())
}
