//! Partial vine copulas.
//!
//! For a checkerboard input every step of the construction stays inside the
//! class of checkerboards on (nonuniform) rectilinear grids: conditional
//! margins are piecewise linear and partial copulas are checkerboards, so the
//! composition `C_p(F(u_i | t), G(u_j | t))` is multilinear on the cells cut
//! out by the kinks of `F`, `G` and the preimages of the breaks of `C_p`.
//! The results below are therefore exact grids, not approximations.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::axis::{axis_from_points, union_axes, Axis};
use crate::copula::{AnalyticCopula, ClosedFormConditional, Copula};
use crate::disintegration::{average_slab_copulas, simplifiedness_delta, ConditionalFamily};
use crate::error::{CopulaError, Result};
use crate::grid::GridCopula;
use crate::metrics::{d1, d_inf, DinfOptions, MetricReport};
use crate::pwl::PiecewiseLinearCdf;
use crate::quadrature::gl8_unit;

/// Mass tolerance used to validate assembled grids.
const ASSEMBLY_TOL: f64 = 1e-9;

/// Output of the grid construction.
#[derive(Clone, Debug)]
pub struct PvcResult {
    /// Hash of the input grid.
    pub fingerprint: String,
    /// The partial vine copula as an exact checkerboard.
    pub psi: GridCopula,
    /// Partial copulas `(C_p)_{i,j}` by 0-based pair.
    pub partials: Vec<((usize, usize), GridCopula)>,
    /// Marginal partial vine copulas on contiguous blocks `i..=j`.
    pub marginals: Vec<((usize, usize), GridCopula)>,
}

impl PvcResult {
    /// `psi` re-gridded onto uniform axes with the given resolutions.
    pub fn discretize(&self, resolutions: &[usize]) -> Result<GridCopula> {
        crate::families::discretize(&self.psi, resolutions)
    }

    pub fn partial(&self, i: usize, j: usize) -> Option<&GridCopula> {
        self.partials.iter().find(|x| x.0 == (i, j)).map(|x| &x.1)
    }

    pub fn marginal(&self, i: usize, j: usize) -> Option<&GridCopula> {
        self.marginals.iter().find(|x| x.0 == (i, j)).map(|x| &x.1)
    }
}

/// FNV-1a hash of the axes and cells of a grid, as 16 hex digits.
pub fn fingerprint(c: &GridCopula) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    feed(c.dim() as u64);
    for a in c.axes() {
        feed(a.cells() as u64);
        for b in a.breaks() {
            feed(b.to_bits());
        }
    }
    for &(i, m) in c.cells() {
        feed(i);
        feed(m.to_bits());
    }
    format!("{h:016x}")
}

/// One increasing piece of a conditional margin, mapped onto global break indices.
struct Run {
    /// Global cell index on the output axis.
    cell: usize,
    /// Indices of the images of the cell ends in the image node list.
    lo: usize,
    hi: usize,
}

/// Breaks of `F` together with the preimages of the breaks of the partial copula.
fn local_breaks(f: &PiecewiseLinearCdf, cp_breaks: &[f64], out: &mut Vec<f64>) {
    out.extend_from_slice(f.breakpoints());
    for &b in cp_breaks {
        out.push(f.quasi_inverse(b));
    }
}

/// Cells of `axis` on which `f` increases, with their image nodes.
fn runs(f: &PiecewiseLinearCdf, axis: &Axis) -> (Vec<Run>, Vec<f64>) {
    let bp = f.breakpoints();
    let vals = f.values();
    let breaks = axis.breaks();
    let mut out = Vec::new();
    let mut images: Vec<f64> = Vec::new();
    for k in 0..bp.len() - 1 {
        if vals[k + 1] <= vals[k] {
            continue;
        }
        let start = nearest_break(breaks, bp[k]);
        let end = nearest_break(breaks, bp[k + 1]);
        for cell in start..end {
            let (a, b) = (breaks[cell], breaks[cell + 1]);
            let (fa, fb) = (f.eval(a), f.eval(b));
            if fb <= fa {
                continue;
            }
            if images.last() != Some(&fa) {
                images.push(fa);
            }
            let lo = images.len() - 1;
            images.push(fb);
            out.push(Run {
                cell,
                lo,
                hi: images.len() - 1,
            });
        }
    }
    (out, images)
}

fn nearest_break(breaks: &[f64], x: f64) -> usize {
    let k = breaks.partition_point(|&b| b < x);
    if k == 0 {
        return 0;
    }
    if k == breaks.len() || (x - breaks[k - 1]) < (breaks[k] - x) {
        k - 1
    } else {
        k
    }
}

/// One tree step of the D-vine on a block of `k + 1` consecutive variables.
///
/// `orig` is the margin of the input on the block, `left` and `right` the
/// partial vine copulas of the two sub-blocks of length `k`. Returns the
/// partial vine copula of the block and the partial copula of its end pair.
fn assemble(
    orig: &GridCopula,
    left: &GridCopula,
    right: &GridCopula,
) -> Result<(GridCopula, GridCopula)> {
    let k = orig.dim() - 1;
    let mid_idx: Vec<usize> = (1..k).collect();
    let mid = left.project(&mid_idx);

    // Partial copula: slab copulas of the input averaged over the middle PVC margin.
    let fam = ConditionalFamily::new(orig, &mid_idx)?;
    let weight_of = |cell: &[usize]| {
        let lo: Vec<f64> = cell
            .iter()
            .enumerate()
            .map(|(p, &i)| fam.cond_axis(p).lo(i))
            .collect();
        let hi: Vec<f64> = cell
            .iter()
            .enumerate()
            .map(|(p, &i)| fam.cond_axis(p).hi(i))
            .collect();
        mid.box_mass(&lo, &hi)
    };
    let covered: f64 = fam.slabs().iter().map(|s| weight_of(&s.cell)).sum();
    if (1.0 - covered).abs() > 1e-9 {
        return Err(CopulaError::UndefinedConditional);
    }
    let cp = average_slab_copulas(&fam, &|s| weight_of(&s.cell))?;

    // Conditional margins of the end variables given the middle block.
    let fl = ConditionalFamily::new(left, &mid_idx)?;
    let right_mid: Vec<usize> = (0..k - 1).collect();
    let fr = ConditionalFamily::new(right, &right_mid)?;

    let mut mid_axes: Vec<Axis> = Vec::with_capacity(k - 1);
    for p in 0..k - 1 {
        mid_axes.push(union_axes(&[
            left.axis(p + 1),
            right.axis(p),
            orig.axis(p + 1),
        ]));
    }
    let mid_ref = mid.refine_to(&mid_axes)?;

    let mut idx = vec![0usize; k - 1];
    let mut pieces = Vec::with_capacity(mid_ref.cells().len());
    let (mut pts_a, mut pts_b) = (Vec::new(), Vec::new());
    for &(flat, mass) in mid_ref.cells() {
        mid_ref.decode(flat, &mut idx);
        let t: Vec<f64> = idx
            .iter()
            .zip(&mid_axes)
            .map(|(&i, a)| 0.5 * (a.lo(i) + a.hi(i)))
            .collect();
        let sl = fl
            .slab_at(&t)
            .map_err(|_| CopulaError::UndefinedConditional)?;
        let sr = fr
            .slab_at(&t)
            .map_err(|_| CopulaError::UndefinedConditional)?;
        let (f, g) = (sl.margin(0), sr.margin(0));
        local_breaks(f, cp.axis(0).breaks(), &mut pts_a);
        local_breaks(g, cp.axis(1).breaks(), &mut pts_b);
        pieces.push((flat, mass, f.clone(), g.clone()));
    }
    let axis_a = axis_from_points(&pts_a);
    let axis_b = axis_from_points(&pts_b);

    let mut axes = vec![axis_a.clone()];
    axes.extend(mid_axes.iter().cloned());
    axes.push(axis_b.clone());
    let mut strides = vec![1u64; k + 1];
    for j in (0..k).rev() {
        strides[j] = strides[j + 1] * axes[j + 1].cells() as u64;
    }
    let mut cells: Vec<(u64, f64)> = Vec::new();
    for (flat, mass, f, g) in &pieces {
        mid_ref.decode(*flat, &mut idx);
        let mid_off: u64 = idx
            .iter()
            .enumerate()
            .map(|(p, &i)| i as u64 * strides[p + 1])
            .sum();
        let (ra, xa) = runs(f, &axis_a);
        let (rb, xb) = runs(g, &axis_b);
        let t = cp.eval_tensor(&[xa.clone(), xb.clone()]);
        let nb = xb.len();
        for a in &ra {
            for b in &rb {
                let m = t[a.hi * nb + b.hi] - t[a.lo * nb + b.hi] - t[a.hi * nb + b.lo]
                    + t[a.lo * nb + b.lo];
                if m > 0.0 {
                    let f = a.cell as u64 * strides[0] + mid_off + b.cell as u64;
                    cells.push((f, mass * m));
                }
            }
        }
    }
    let psi = GridCopula::from_cells(axes, cells, ASSEMBLY_TOL)?;
    Ok((psi, cp))
}

/// Partial vine copula of a trivariate grid copula given its last coordinate:
/// `psi(C)(u, v) = int_0^v C_p(F_{1|3}(u_1|t), F_{2|3}(u_2|t)) dt`.
pub fn pvc3(c: &GridCopula) -> Result<PvcResult> {
    if c.dim() != 3 {
        return Err(CopulaError::BadDimension(format!(
            "expected dim 3, got {}",
            c.dim()
        )));
    }
    let mut r = pvc_dvine_with_order(c, &[0, 2, 1])?;
    r.fingerprint = fingerprint(c);
    Ok(r)
}

/// D-vine partial vine copula on the identity variable order.
pub fn pvc_dvine(c: &GridCopula) -> Result<PvcResult> {
    let order: Vec<usize> = (0..c.dim()).collect();
    pvc_dvine_with_order(c, &order)
}

/// D-vine partial vine copula on the path `order` (a permutation of the axes).
///
/// The result is expressed in the original axis order. Pair and block indices
/// in the per-step artifacts refer to positions along the path.
pub fn pvc_dvine_with_order(c: &GridCopula, order: &[usize]) -> Result<PvcResult> {
    let d = c.dim();
    if d < 3 {
        return Err(CopulaError::BadDimension(format!("need d >= 3, got {d}")));
    }
    let cp = c.permute(order)?;
    let mut level: Vec<GridCopula> = (0..d - 1)
        .map(|i| cp.margin(&[i, i + 1]))
        .collect::<Result<_>>()?;
    let mut marginals: Vec<((usize, usize), GridCopula)> = level
        .iter()
        .enumerate()
        .map(|(i, g)| ((i, i + 1), g.clone()))
        .collect();
    let mut partials = Vec::new();
    for k in 2..d {
        let mut next = Vec::with_capacity(d - k);
        for i in 0..d - k {
            let block: Vec<usize> = (i..=i + k).collect();
            let orig = cp.margin(&block)?;
            let (p, part) = assemble(&orig, &level[i], &level[i + 1])?;
            partials.push(((i, i + k), part));
            marginals.push(((i, i + k), p.clone()));
            next.push(p);
        }
        level = next;
    }
    let top = level.pop().expect("one block remains");
    let mut inverse = vec![0usize; d];
    for (pos, &ax) in order.iter().enumerate() {
        inverse[ax] = pos;
    }
    let psi = top.permute(&inverse)?;
    Ok(PvcResult {
        fingerprint: fingerprint(c),
        psi,
        partials,
        marginals,
    })
}

/// Closed-form partial vine copula of a trivariate analytic copula.
#[derive(Clone, Debug)]
pub struct AnalyticPvc {
    pub psi: AnalyticCopula,
    /// The partial copula as a bivariate evaluator.
    pub partial: AnalyticCopula,
}

/// `int_lo^hi f(t) dt`, exact for piecewise constant integrands, else order 8 on 8 pieces.
fn integrate_t(lo: f64, hi: f64, constant: bool, f: &dyn Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if constant {
        return (hi - lo) * f(0.5 * (lo + hi));
    }
    let (x, w) = gl8_unit();
    let n = 8;
    let h = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for p in 0..n {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(w) {
            acc += wi * f(a + xi * h);
        }
    }
    acc * h
}

/// `psi(C)` for copulas that supply their conditional margins and copulas in closed form.
pub fn pvc3_analytic(c: &AnalyticCopula) -> Result<AnalyticPvc> {
    if c.dim() != 3 {
        return Err(CopulaError::BadDimension(format!(
            "expected dim 3, got {}",
            c.dim()
        )));
    }
    let cond = c
        .conditional()
        .ok_or(CopulaError::ClosedFormUnavailable)?
        .clone();
    let breaks = cond.t_breaks();
    let constant = cond.piecewise_constant();

    let partial_fn = {
        let cond = cond.clone();
        let breaks = breaks.clone();
        Arc::new(move |s: [f64; 2]| -> f64 {
            breaks
                .windows(2)
                .map(|w| integrate_t(w[0], w[1], constant, &|t| cond.copula(t, s)))
                .sum()
        })
    };
    let partial = {
        let p = partial_fn.clone();
        AnalyticCopula::new(format!("partial({})", c.name()), 2, move |u: &[f64]| {
            p([u[0].clamp(0.0, 1.0), u[1].clamp(0.0, 1.0)])
        })
    };

    let composed = {
        let cond: Arc<dyn ClosedFormConditional> = cond.clone();
        let p = partial_fn.clone();
        Arc::new(move |t: f64, u1: f64, u2: f64| -> f64 {
            p([cond.margin(0, t, u1), cond.margin(1, t, u2)])
        })
    };
    let cdf = {
        let composed = composed.clone();
        let breaks = breaks.clone();
        move |u: &[f64]| -> f64 {
            let (u1, u2, v) = (
                u[0].clamp(0.0, 1.0),
                u[1].clamp(0.0, 1.0),
                u[2].clamp(0.0, 1.0),
            );
            breaks
                .windows(2)
                .map(|w| integrate_t(w[0], w[1].min(v), constant, &|t| composed(t, u1, u2)))
                .sum()
        }
    };
    let kernel_breaks = c
        .kernel_breaks()
        .unwrap_or_else(|| vec![vec![0.0, 1.0], vec![0.0, 1.0], breaks.clone()]);
    let psi = AnalyticCopula::new(format!("psi({})", c.name()), 3, cdf).with_kernel(
        move |v: f64, u: &[f64]| composed(v, u[0].clamp(0.0, 1.0), u[1].clamp(0.0, 1.0)),
        kernel_breaks,
    );
    Ok(AnalyticPvc { psi, partial })
}

/// Distances between a copula and its partial vine copula.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PvcReport {
    pub fingerprint: String,
    pub dinf: MetricReport,
    pub d1: MetricReport,
    /// `Delta(C)` with its quadrature error, for trivariate inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<(f64, f64)>,
    pub slabs: usize,
}

/// `d_inf(C, psi(C))`, `D_1(C, psi(C))`, `Delta(C)` and the number of positive slabs.
pub fn pvc_distance_report(c: &GridCopula, dvine: bool) -> Result<PvcReport> {
    let r = if dvine || c.dim() > 3 {
        pvc_dvine(c)?
    } else {
        pvc3(c)?
    };
    let dinf = d_inf(c, &r.psi, &DinfOptions::default())?;
    let d1r = d1(c, &r.psi)?;
    let delta = if c.dim() == 3 {
        Some(simplifiedness_delta(c)?)
    } else {
        None
    };
    let slabs = ConditionalFamily::last_axis(c)?.slabs().len();
    Ok(PvcReport {
        fingerprint: r.fingerprint,
        dinf,
        d1: d1r,
        delta,
        slabs,
    })
}

/// Distances between an analytic trivariate copula and its closed-form partial vine copula.
pub fn pvc_distance_report_analytic(c: &AnalyticCopula, opts: &DinfOptions) -> Result<PvcReport> {
    let r = pvc3_analytic(c)?;
    let dinf = d_inf(c, &r.psi, opts)?;
    let d1r = d1(c, &r.psi)?;
    let slabs = c.conditional().map(|x| x.t_breaks().len() - 1).unwrap_or(0);
    Ok(PvcReport {
        fingerprint: c.name(),
        dinf,
        d1: d1r,
        delta: None,
        slabs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::*;

    #[test]
    fn cube_maps_to_independence() {
        let r = pvc3(&cube_copula()).unwrap();
        let pi = independence(3, None).unwrap();
        let dist = d_inf(&r.psi, &pi, &DinfOptions::default()).unwrap();
        assert!(dist.value <= 1e-12);
        let back = d_inf(&cube_copula(), &r.psi, &DinfOptions::default()).unwrap();
        assert!((back.value - 0.125).abs() <= 1e-12);
    }

    #[test]
    fn example54_closed_form() {
        let c = example54_copula();
        let r = pvc3_analytic(&c).unwrap();
        let v = r.psi.eval(&[0.5, 0.5, 1.0]);
        assert!((v - 3.0 / 16.0).abs() < 1e-12, "{v}");
    }

    #[test]
    fn efgm_maps_to_independence() {
        let r = pvc3_analytic(&efgm3()).unwrap();
        for u in [0.1, 0.35, 0.8] {
            let p = [u, 1.0 - u * 0.5, 0.3 + u * 0.2];
            assert!((r.psi.eval(&p) - p[0] * p[1] * p[2]).abs() < 1e-13);
        }
    }

    #[test]
    fn product_extension_in_four_dimensions() {
        let c = cube_copula().product_extend(4).unwrap();
        let r = pvc_dvine(&c).unwrap();
        let pi = independence(4, None).unwrap();
        assert!(d_inf(&r.psi, &pi, &DinfOptions::default()).unwrap().value < 1e-12);
    }
}
