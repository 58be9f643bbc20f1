//! Distances between copulas: `d_inf`, the kernel metrics `D_1`, `D_2`,
//! `D_inf`, total variation and Kullback-Leibler divergence, plus the
//! weak-conditional-convergence profile.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::axis::{axis_from_points, union_axes, Axis};
use crate::copula::{Copula, Regularity};
use crate::disintegration::{integrate_abs_on_nodes, ConditionalFamily};
use crate::error::{CopulaError, Result};
use crate::grid::{common_refinement, GridCopula, DEFAULT_CELL_LIMIT};
use crate::quadrature::{gl8_unit, integrate_sq_multilinear, tensor_integrate};

/// How far a reported value can be from the true one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Exactness {
    /// Exact up to floating point rounding.
    Exact,
    /// The true value lies in `[value, value + bound]` (or within `bound` for quadrature).
    Certified { bound: f64 },
    /// Heuristic error estimate.
    Estimated { error: f64 },
}

impl Exactness {
    /// Error budget implied by the flag.
    pub fn budget(&self) -> f64 {
        match *self {
            Exactness::Exact => 0.0,
            Exactness::Certified { bound } => bound,
            Exactness::Estimated { error } => error,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub exactness: Exactness,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub argmax: Option<Vec<f64>>,
    pub evaluations: u64,
    pub elapsed_seconds: f64,
}

impl MetricReport {
    fn new(
        metric: &str,
        value: f64,
        exactness: Exactness,
        evaluations: u64,
        start: Instant,
    ) -> Self {
        MetricReport {
            metric: metric.to_string(),
            value,
            exactness,
            lower: None,
            upper: None,
            argmax: None,
            evaluations,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        }
    }
}

/// Tuning of the sup-norm search.
#[derive(Clone, Debug)]
pub struct DinfOptions {
    /// Target width of the certificate.
    pub eps: f64,
    /// Largest node count evaluated exactly for multilinear pairs.
    pub node_limit: u128,
    /// Largest number of node evaluations in a coarse scan.
    pub scan_nodes: u128,
    /// Budget of point evaluations for branch and bound.
    pub max_evals: u64,
}

impl Default for DinfOptions {
    fn default() -> Self {
        DinfOptions {
            eps: 1e-8,
            node_limit: 20_000_000,
            scan_nodes: 8_000_000,
            max_evals: 2_000_000,
        }
    }
}

fn check_dims(a: &dyn Copula, b: &dyn Copula) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(CopulaError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

fn breaks_of(r: &Regularity, d: usize) -> Vec<Vec<f64>> {
    match r {
        Regularity::Multilinear(b) => b.clone(),
        Regularity::Smooth { breaks, .. } => breaks.clone(),
        Regularity::Lipschitz => vec![vec![0.0, 1.0]; d],
    }
}

fn curvature_of(r: &Regularity, d: usize) -> Option<Vec<f64>> {
    match r {
        Regularity::Multilinear(_) => Some(vec![0.0; d]),
        Regularity::Smooth { curvature, .. } => Some(curvature.clone()),
        Regularity::Lipschitz => None,
    }
}

fn node_count(axes: &[Vec<f64>]) -> u128 {
    axes.iter().map(|a| a.len() as u128).product()
}

fn unflatten(flat: usize, nodes: &[Vec<f64>]) -> Vec<f64> {
    let mut r = flat;
    let mut p = vec![0.0; nodes.len()];
    for j in (0..nodes.len()).rev() {
        let n = nodes[j].len();
        p[j] = nodes[j][r % n];
        r /= n;
    }
    p
}

/// `d_inf(C1, C2) = max |C1(u) - C2(u)|`.
///
/// Multilinear pairs are exact (the maximum of `|C1 - C2|` sits on a node of
/// the common grid). Other pairs use branch and bound on boxes with a
/// monotonicity bracket and, for smooth operands, a curvature bound.
pub fn d_inf(a: &dyn Copula, b: &dyn Copula, opts: &DinfOptions) -> Result<MetricReport> {
    check_dims(a, b)?;
    let start = Instant::now();
    let d = a.dim();
    let (ra, rb) = (a.regularity(), b.regularity());
    let both_multilinear =
        matches!(ra, Regularity::Multilinear(_)) && matches!(rb, Regularity::Multilinear(_));
    let ba = breaks_of(&ra, d);
    let bb = breaks_of(&rb, d);
    let union: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut pts = ba[j].clone();
            pts.extend_from_slice(&bb[j]);
            axis_from_points(&pts).breaks().to_vec()
        })
        .collect();
    if both_multilinear && node_count(&union) <= opts.node_limit {
        let va = a.eval_tensor(&union);
        let vb = b.eval_tensor(&union);
        let (mut best, mut arg) = (0.0f64, 0usize);
        for (k, (x, y)) in va.iter().zip(&vb).enumerate() {
            let g = (x - y).abs();
            if g > best {
                best = g;
                arg = k;
            }
        }
        let mut r = MetricReport::new("dinf", best, Exactness::Exact, 2 * va.len() as u64, start);
        r.argmax = Some(unflatten(arg, &union));
        return Ok(r);
    }
    if both_multilinear {
        return scan_multilinear(a, b, &union, opts, start);
    }
    branch_and_bound(a, b, &union, &ra, &rb, opts, start)
}

/// Thin every axis to at most `m` breaks by taking evenly spaced members.
fn thin(breaks: &[f64], m: usize) -> Vec<f64> {
    let n = breaks.len() - 1;
    if n < m {
        return breaks.to_vec();
    }
    let cells = (m - 1).max(1);
    // Prefer a step that divides the cell count so thinned breaks stay aligned.
    let mut step = n.div_ceil(cells);
    while !n.is_multiple_of(step) && step < n {
        step += 1;
    }
    (0..=n / step).map(|k| breaks[k * step]).collect()
}

fn scan_multilinear(
    a: &dyn Copula,
    b: &dyn Copula,
    union: &[Vec<f64>],
    opts: &DinfOptions,
    start: Instant,
) -> Result<MetricReport> {
    let d = union.len();
    let per_axis = (opts.scan_nodes as f64).powf(1.0 / d as f64).floor() as usize;
    let nodes: Vec<Vec<f64>> = union.iter().map(|u| thin(u, per_axis.max(2))).collect();
    let va = a.eval_tensor(&nodes);
    let vb = b.eval_tensor(&nodes);
    let shape: Vec<usize> = nodes.iter().map(|n| n.len()).collect();
    let (lower, arg, upper) = bracket_scan(&va, &vb, &shape);
    let mut r = MetricReport::new(
        "dinf",
        lower,
        Exactness::Certified {
            bound: upper - lower,
        },
        2 * va.len() as u64,
        start,
    );
    r.lower = Some(lower);
    r.upper = Some(upper);
    r.argmax = Some(unflatten(arg, &nodes));
    Ok(r)
}

/// Node maximum and the monotone-bracket upper bound over all cells of a node tensor.
fn bracket_scan(va: &[f64], vb: &[f64], shape: &[usize]) -> (f64, usize, f64) {
    let d = shape.len();
    let mut ns = vec![1usize; d];
    for j in (0..d - 1).rev() {
        ns[j] = ns[j + 1] * shape[j + 1];
    }
    let (mut lower, mut arg) = (0.0f64, 0usize);
    for (k, (x, y)) in va.iter().zip(vb).enumerate() {
        let g = (x - y).abs();
        if g > lower {
            lower = g;
            arg = k;
        }
    }
    let hi_off: usize = ns.iter().sum();
    let mut upper = lower;
    let mut idx = vec![0usize; d];
    let cells: usize = shape.iter().map(|n| n - 1).product();
    for _ in 0..cells {
        let lo: usize = idx.iter().zip(&ns).map(|(&i, &s)| i * s).sum();
        let hi = lo + hi_off;
        let ub = (va[hi] - vb[lo]).max(vb[hi] - va[lo]);
        if ub > upper {
            upper = ub;
        }
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < shape[j] - 1 {
                break;
            }
            idx[j] = 0;
        }
    }
    (lower, arg, upper)
}

#[derive(Clone)]
struct BoxCell {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

fn branch_and_bound(
    a: &dyn Copula,
    b: &dyn Copula,
    union: &[Vec<f64>],
    ra: &Regularity,
    rb: &Regularity,
    opts: &DinfOptions,
    start: Instant,
) -> Result<MetricReport> {
    let d = union.len();
    let curv: Option<Vec<f64>> = match (curvature_of(ra, d), curvature_of(rb, d)) {
        (Some(x), Some(y)) => Some(x.iter().zip(&y).map(|(p, q)| p + q).collect()),
        _ => None,
    };
    let per_axis = (4096f64).powf(1.0 / d as f64).floor() as usize;
    let init: Vec<Vec<f64>> = if curv.is_some() {
        union.to_vec()
    } else {
        union.iter().map(|u| thin(u, per_axis.max(2))).collect()
    };
    let mut active: Vec<BoxCell> = Vec::new();
    {
        let mut idx = vec![0usize; d];
        let cells: usize = init.iter().map(|n| n.len() - 1).product();
        for _ in 0..cells {
            active.push(BoxCell {
                lo: (0..d).map(|j| init[j][idx[j]]).collect(),
                hi: (0..d).map(|j| init[j][idx[j] + 1]).collect(),
            });
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < init[j].len() - 1 {
                    break;
                }
                idx[j] = 0;
            }
        }
    }
    let corners = 1usize << d;
    let mut evals: u64 = 0;
    let mut lower = 0.0f64;
    let mut argmax = vec![0.0; d];
    let mut pruned_upper = 0.0f64;
    let mut p = vec![0.0; d];
    let upper;
    loop {
        let mut bounds = Vec::with_capacity(active.len());
        for cell in &active {
            let mut max_abs = 0.0f64;
            let (mut a_lo, mut a_hi, mut b_lo, mut b_hi) = (0.0, 0.0, 0.0, 0.0);
            for c in 0..corners {
                for j in 0..d {
                    p[j] = if c >> j & 1 == 1 {
                        cell.hi[j]
                    } else {
                        cell.lo[j]
                    };
                }
                let (x, y) = (a.eval(&p), b.eval(&p));
                evals += 2;
                let g = (x - y).abs();
                if g > max_abs {
                    max_abs = g;
                }
                if g > lower {
                    lower = g;
                    argmax.copy_from_slice(&p);
                }
                if c == 0 {
                    a_lo = x;
                    b_lo = y;
                }
                if c == corners - 1 {
                    a_hi = x;
                    b_hi = y;
                }
            }
            let mut ub = (a_hi - b_lo).max(b_hi - a_lo);
            if let Some(m) = &curv {
                let e: f64 = (0..d)
                    .map(|j| (cell.hi[j] - cell.lo[j]).powi(2) * m[j] / 8.0)
                    .sum();
                ub = ub.min(max_abs + e);
            }
            bounds.push(ub);
        }
        let mut next = Vec::new();
        let mut open_upper = 0.0f64;
        for (cell, &ub) in active.iter().zip(&bounds) {
            if ub <= lower + 0.5 * opts.eps {
                pruned_upper = pruned_upper.max(ub);
            } else {
                open_upper = open_upper.max(ub);
                next.push(cell.clone());
            }
        }
        let current_upper = pruned_upper.max(open_upper).max(lower);
        let projected = evals + (next.len() as u64) * (corners as u64) * (corners as u64) * 2;
        if next.is_empty() || current_upper - lower <= opts.eps || projected > opts.max_evals {
            upper = current_upper;
            break;
        }
        let mut children = Vec::with_capacity(next.len() * corners);
        for cell in &next {
            for c in 0..corners {
                let mut lo = cell.lo.clone();
                let mut hi = cell.hi.clone();
                for j in 0..d {
                    let mid = 0.5 * (cell.lo[j] + cell.hi[j]);
                    if c >> j & 1 == 1 {
                        lo[j] = mid;
                    } else {
                        hi[j] = mid;
                    }
                }
                children.push(BoxCell { lo, hi });
            }
        }
        active = children;
    }
    let mut r = MetricReport::new(
        "dinf",
        lower,
        Exactness::Certified {
            bound: upper - lower,
        },
        evals,
        start,
    );
    r.lower = Some(lower);
    r.upper = Some(upper);
    r.argmax = Some(argmax);
    Ok(r)
}

/// Which kernel metric to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMetric {
    D1,
    D2,
    DInf,
}

impl KernelMetric {
    fn name(self) -> &'static str {
        match self {
            KernelMetric::D1 => "d1",
            KernelMetric::D2 => "d2",
            KernelMetric::DInf => "dinfk",
        }
    }
}

/// `D_1` conditioning on the last coordinate.
pub fn d1(a: &dyn Copula, b: &dyn Copula) -> Result<MetricReport> {
    kernel_metric(a, b, KernelMetric::D1, None)
}

/// `D_2` conditioning on the last coordinate.
pub fn d2(a: &dyn Copula, b: &dyn Copula) -> Result<MetricReport> {
    kernel_metric(a, b, KernelMetric::D2, None)
}

/// `D_inf` conditioning on the last coordinate.
pub fn d_inf_kernel(a: &dyn Copula, b: &dyn Copula) -> Result<MetricReport> {
    kernel_metric(a, b, KernelMetric::DInf, None)
}

/// Kernel metric conditioning on `axis` (default: the last one).
///
/// A non-default axis is only supported for grid operands, by permuting axes.
pub fn kernel_metric(
    a: &dyn Copula,
    b: &dyn Copula,
    which: KernelMetric,
    axis: Option<usize>,
) -> Result<MetricReport> {
    check_dims(a, b)?;
    let d = a.dim();
    let axis = axis.unwrap_or(d - 1);
    if axis >= d {
        return Err(CopulaError::BadAxis(axis));
    }
    if let (Some(ga), Some(gb)) = (a.as_grid(), b.as_grid()) {
        if axis != d - 1 {
            let mut perm: Vec<usize> = (0..d).filter(|&j| j != axis).collect();
            perm.push(axis);
            return grid_kernel_metric(&ga.permute(&perm)?, &gb.permute(&perm)?, which);
        }
        return grid_kernel_metric(ga, gb, which);
    }
    if axis != d - 1 {
        return Err(CopulaError::KernelUnavailable(
            "conditioning on a non-final axis needs grid operands".into(),
        ));
    }
    quadrature_kernel_metric(a, b, which)
}

/// Node values of `K(t, [0, u])` for every slab of a family on a tensor of u-nodes.
fn slab_tensors(fam: &ConditionalFamily, nodes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    fam.slabs()
        .iter()
        .map(|s| fam.slab_joint_grid(s).eval_tensor(nodes))
        .collect()
}

fn grid_kernel_metric(a: &GridCopula, b: &GridCopula, which: KernelMetric) -> Result<MetricReport> {
    let start = Instant::now();
    let d = a.dim();
    let fa = ConditionalFamily::last_axis(a)?;
    let fb = ConditionalFamily::last_axis(b)?;
    let u_axes: Vec<Axis> = (0..d - 1)
        .map(|j| union_axes(&[a.axis(j), b.axis(j)]))
        .collect();
    let nodes: Vec<Vec<f64>> = u_axes.iter().map(|x| x.breaks().to_vec()).collect();
    let count = node_count(&nodes);
    if count > DEFAULT_CELL_LIMIT / 4 {
        return Err(CopulaError::ResolutionOverflow {
            cells: count,
            limit: DEFAULT_CELL_LIMIT / 4,
        });
    }
    let ta = slab_tensors(&fa, &nodes);
    let tb = slab_tensors(&fb, &nodes);
    let v_axis = union_axes(&[a.axis(d - 1), b.axis(d - 1)]);
    let mut total = 0.0;
    let mut err = 0.0;
    let mut sup_acc = vec![0.0; count as usize];
    let ncells: usize = u_axes.iter().map(|x| x.cells()).product();
    for k in 0..v_axis.cells() {
        let mid = 0.5 * (v_axis.lo(k) + v_axis.hi(k));
        let sa = fa.slab_index_at(mid).ok_or(CopulaError::ZeroMassSlab)?;
        let sb = fb.slab_index_at(mid).ok_or(CopulaError::ZeroMassSlab)?;
        let g: Vec<f64> = ta[sa].iter().zip(&tb[sb]).map(|(x, y)| x - y).collect();
        let len = v_axis.width(k);
        match which {
            KernelMetric::D1 => {
                let (v, e) = integrate_abs_on_nodes(&g, &u_axes, 1e-13);
                total += len * v;
                err += len * e;
            }
            KernelMetric::D2 => {
                total += len * integrate_sq_on_nodes(&g, &u_axes, ncells);
            }
            KernelMetric::DInf => {
                for (s, x) in sup_acc.iter_mut().zip(&g) {
                    *s += len * x.abs();
                }
            }
        }
    }
    let (value, exactness) = match which {
        KernelMetric::DInf => (
            sup_acc.iter().copied().fold(0.0, f64::max),
            Exactness::Exact,
        ),
        KernelMetric::D2 => (total, Exactness::Exact),
        KernelMetric::D1 => {
            if err == 0.0 {
                (total, Exactness::Exact)
            } else {
                (total, Exactness::Estimated { error: err })
            }
        }
    };
    Ok(MetricReport::new(
        which.name(),
        value,
        exactness,
        count as u64 * 2,
        start,
    ))
}

fn integrate_sq_on_nodes(g: &[f64], axes: &[Axis], ncells: usize) -> f64 {
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
    let mut total = 0.0;
    for _ in 0..ncells {
        let base: usize = idx.iter().zip(&ns).map(|(&i, &s)| i * s).sum();
        for (c, o) in offsets.iter().enumerate() {
            corners[c] = g[base + o];
        }
        if corners.iter().any(|&x| x != 0.0) {
            let vol: f64 = (0..k).map(|j| axes[j].width(idx[j])).product();
            total += integrate_sq_multilinear(&corners, vol);
        }
        for j in (0..k).rev() {
            idx[j] += 1;
            if idx[j] < axes[j].cells() {
                break;
            }
            idx[j] = 0;
        }
    }
    total
}

fn kernel_breaks(c: &dyn Copula) -> Result<Vec<Vec<f64>>> {
    if c.kernel(0.5, &vec![0.5; c.dim() - 1]).is_none() {
        return Err(CopulaError::KernelUnavailable(c.name()));
    }
    Ok(c.kernel_breaks()
        .unwrap_or_else(|| vec![vec![0.0, 1.0]; c.dim()]))
}

/// Gauss-Legendre quadrature of the kernel metrics for closed-form operands.
fn quadrature_kernel_metric(
    a: &dyn Copula,
    b: &dyn Copula,
    which: KernelMetric,
) -> Result<MetricReport> {
    let start = Instant::now();
    let d = a.dim();
    let ka = kernel_breaks(a)?;
    let kb = kernel_breaks(b)?;
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            let mut pts = ka[j].clone();
            pts.extend_from_slice(&kb[j]);
            axis_from_points(&pts).breaks().to_vec()
        })
        .collect();
    let mut evals = 0u64;
    let mut integrand = |p: &[f64]| -> f64 {
        evals += 2;
        let v = p[d - 1];
        let u = &p[..d - 1];
        let g = a.kernel(v, u).unwrap_or(0.0) - b.kernel(v, u).unwrap_or(0.0);
        match which {
            KernelMetric::D2 => g * g,
            _ => g.abs(),
        }
    };
    let value;
    let error;
    match which {
        KernelMetric::D1 | KernelMetric::D2 => {
            let coarse = integrate_over_cells(&axes, 1, &mut integrand);
            let fine = integrate_over_cells(&axes, 2, &mut integrand);
            value = fine;
            error = (fine - coarse).abs();
        }
        KernelMetric::DInf => {
            // sup over a u-scan of the v-integral.
            let scan: Vec<Vec<f64>> = axes[..d - 1].iter().map(|b| subdivide(b, 16)).collect();
            let v_axis = vec![axes[d - 1].clone()];
            let mut best = 0.0f64;
            let mut best_err = 0.0f64;
            let mut buf = vec![0.0; d - 1];
            let mut points: Vec<Vec<f64>> = Vec::new();
            crate::grid::for_each_tuple(&scan, &mut buf, &mut |u| points.push(u.to_vec()));
            for u in points {
                let mut f = |t: &[f64]| {
                    evals += 2;
                    (a.kernel(t[0], &u).unwrap_or(0.0) - b.kernel(t[0], &u).unwrap_or(0.0)).abs()
                };
                let c = integrate_over_cells(&v_axis, 1, &mut f);
                let fi = integrate_over_cells(&v_axis, 2, &mut f);
                if fi > best {
                    best = fi;
                    best_err = (fi - c).abs();
                }
            }
            value = best;
            error = best_err;
        }
    }
    Ok(MetricReport::new(
        which.name(),
        value,
        Exactness::Estimated { error },
        evals,
        start,
    ))
}

fn subdivide(breaks: &[f64], k: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for w in breaks.windows(2) {
        for i in 0..k {
            out.push(w[0] + (w[1] - w[0]) * i as f64 / k as f64);
        }
    }
    out.push(*breaks.last().unwrap());
    out
}

/// Order-8 tensor quadrature over every cell of the break tensor, each cell split `split` times per axis.
fn integrate_over_cells(axes: &[Vec<f64>], split: usize, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let fine: Vec<Vec<f64>> = axes.iter().map(|b| subdivide(b, split)).collect();
    let d = fine.len();
    let mut idx = vec![0usize; d];
    let cells: usize = fine.iter().map(|b| b.len() - 1).product();
    let mut total = 0.0;
    for _ in 0..cells {
        let lo: Vec<f64> = (0..d).map(|j| fine[j][idx[j]]).collect();
        let hi: Vec<f64> = (0..d).map(|j| fine[j][idx[j] + 1]).collect();
        total += tensor_integrate(&lo, &hi, gl8_unit(), f);
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < fine[j].len() - 1 {
                break;
            }
            idx[j] = 0;
        }
    }
    total
}

/// Merge two sorted sparse cell lists, calling `f(m1, m2)` on every cell with mass in either.
fn merge_cells(a: &[(u64, f64)], b: &[(u64, f64)], mut f: impl FnMut(f64, f64)) {
    let (mut p, mut q) = (0usize, 0usize);
    while p < a.len() || q < b.len() {
        let ia = a.get(p).map(|c| c.0).unwrap_or(u64::MAX);
        let ib = b.get(q).map(|c| c.0).unwrap_or(u64::MAX);
        if ia == ib {
            f(a[p].1, b[q].1);
            p += 1;
            q += 1;
        } else if ia < ib {
            f(a[p].1, 0.0);
            p += 1;
        } else {
            f(0.0, b[q].1);
            q += 1;
        }
    }
}

/// Total variation distance: half the cellwise `L^1` distance on the common refinement.
pub fn tv(a: &GridCopula, b: &GridCopula) -> Result<MetricReport> {
    let start = Instant::now();
    let (ra, rb) = common_refinement(a, b, DEFAULT_CELL_LIMIT)?;
    let mut s = 0.0;
    merge_cells(ra.cells(), rb.cells(), |x, y| s += (x - y).abs());
    Ok(MetricReport::new(
        "tv",
        0.5 * s,
        Exactness::Exact,
        (ra.cells().len() + rb.cells().len()) as u64,
        start,
    ))
}

/// Kullback-Leibler divergence `sum m1 log(m1 / m2)` on the common refinement.
pub fn kl(a: &GridCopula, b: &GridCopula) -> Result<MetricReport> {
    let start = Instant::now();
    let (ra, rb) = common_refinement(a, b, DEFAULT_CELL_LIMIT)?;
    let mut s = 0.0;
    let mut violated = false;
    merge_cells(ra.cells(), rb.cells(), |x, y| {
        if x > 0.0 {
            if y > 0.0 {
                s += x * (x / y).ln();
            } else {
                violated = true;
            }
        }
    });
    if violated {
        return Err(CopulaError::SupportViolation);
    }
    Ok(MetricReport::new(
        "kl",
        s.max(0.0),
        Exactness::Exact,
        (ra.cells().len() + rb.cells().len()) as u64,
        start,
    ))
}

/// One row of the weak-conditional-convergence profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WccRow {
    pub v: f64,
    pub distance: f64,
    pub argmax: Vec<f64>,
}

/// For each `v`, `sup_u |K1(v,[0,u]) - K2(v,[0,u])|` over a u-grid with `k + 1` points per axis.
pub fn wcc_profile(
    a: &dyn Copula,
    b: &dyn Copula,
    v_grid: &[f64],
    k: usize,
) -> Result<Vec<WccRow>> {
    check_dims(a, b)?;
    let d = a.dim();
    let probe = vec![0.5; d - 1];
    if a.kernel(0.5, &probe).is_none() {
        return Err(CopulaError::KernelUnavailable(a.name()));
    }
    if b.kernel(0.5, &probe).is_none() {
        return Err(CopulaError::KernelUnavailable(b.name()));
    }
    let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let nodes = vec![grid; d - 1];
    let mut rows = Vec::with_capacity(v_grid.len());
    let mut buf = vec![0.0; d - 1];
    for &v in v_grid {
        let mut best = 0.0f64;
        let mut arg = vec![0.0; d - 1];
        crate::grid::for_each_tuple(&nodes, &mut buf, &mut |u| {
            let g = (a.kernel(v, u).unwrap_or(0.0) - b.kernel(v, u).unwrap_or(0.0)).abs();
            if g > best {
                best = g;
                arg.copy_from_slice(u);
            }
        });
        rows.push(WccRow {
            v,
            distance: best,
            argmax: arg,
        });
    }
    Ok(rows)
}

/// Values of every metric for a grid pair and the chain checks between them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainReport {
    pub dinf: MetricReport,
    pub d1: MetricReport,
    pub d2: MetricReport,
    pub dinfk: MetricReport,
    pub tv: MetricReport,
    pub budget: f64,
}

/// Check `d_inf <= D_inf`, `D_1 <= D_inf <= 2 TV` and `D_2 <= D_1` within the error budget.
pub fn metric_chain_check(a: &GridCopula, b: &GridCopula) -> Result<ChainReport> {
    let dinf = d_inf(a, b, &DinfOptions::default())?;
    let d1r = d1(a, b)?;
    let d2r = d2(a, b)?;
    let dk = d_inf_kernel(a, b)?;
    let tvr = tv(a, b)?;
    let budget = 1e-12
        + dinf.exactness.budget()
        + d1r.exactness.budget()
        + d2r.exactness.budget()
        + dk.exactness.budget();
    let checks = [
        ("d_inf <= D_inf", dinf.value, dk.value),
        ("D_1 <= D_inf", d1r.value, dk.value),
        ("D_inf <= 2 TV", dk.value, 2.0 * tvr.value),
        ("D_2 <= D_1", d2r.value, d1r.value),
    ];
    for (name, lhs, rhs) in checks {
        if lhs > rhs + budget {
            return Err(CopulaError::ChainViolation(format!(
                "{name}: {lhs} > {rhs}"
            )));
        }
    }
    Ok(ChainReport {
        dinf,
        d1: d1r,
        d2: d2r,
        dinfk: dk,
        tv: tvr,
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::*;

    #[test]
    fn cube_against_independence() {
        let c = cube_copula();
        let pi = independence(3, None).unwrap();
        let r = d_inf(&c, &pi, &DinfOptions::default()).unwrap();
        assert_eq!(r.value, 0.125);
        assert_eq!(tv(&c, &pi).unwrap().value, 0.5);
        assert!((kl(&c, &pi).unwrap().value - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(kl(&pi, &c), Err(CopulaError::SupportViolation)));
        let r1 = d1(&c, &pi).unwrap();
        assert!((r1.value - 1.0 / 16.0).abs() < 1e-12, "{}", r1.value);
        assert_eq!(d_inf_kernel(&c, &pi).unwrap().value, 0.25);
    }

    #[test]
    fn frechet_bounds() {
        let opts = DinfOptions {
            eps: 1e-6,
            ..Default::default()
        };
        let r = d_inf(&comonotone(2), &countermonotone(), &opts).unwrap();
        assert!((r.value - 0.5).abs() < 1e-12);
        assert!(r.upper.unwrap() - 0.5 <= 1e-6);
    }

    #[test]
    fn efgm_against_independence() {
        let opts = DinfOptions {
            eps: 1e-6,
            ..Default::default()
        };
        let r = d_inf(&efgm3(), &pi_analytic(3), &opts).unwrap();
        assert!((r.value - 1.0 / 64.0).abs() < 1e-12);
        assert!(r.upper.unwrap() - r.lower.unwrap() <= 1e-6);
    }
}
