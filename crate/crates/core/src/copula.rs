//! The [`Copula`] trait and closed-form (analytic) copulas.

use std::fmt;
use std::sync::Arc;

use crate::error::{CopulaError, Result};
use crate::grid::{box_mass_by, for_each_tuple, GridCopula};

/// Smoothness information used to certify sup-norm distances.
#[derive(Clone, Debug, PartialEq)]
pub enum Regularity {
    /// Multilinear inside every cell of the given breaks.
    Multilinear(Vec<Vec<f64>>),
    /// Twice differentiable inside every cell of the breaks with `|d^2 C / du_j^2| <= curvature[j]`.
    Smooth {
        breaks: Vec<Vec<f64>>,
        curvature: Vec<f64>,
    },
    /// Only the copula Lipschitz bound is known.
    Lipschitz,
}

/// A d-dimensional copula that can be evaluated pointwise.
pub trait Copula: Send + Sync {
    fn dim(&self) -> usize;

    /// Value `C(u)`; `u` must have `dim()` coordinates in `[0,1]`.
    fn eval(&self, u: &[f64]) -> f64;

    /// Markov kernel `K_C(v, [0,u])` given the last coordinate, `u` of length `dim() - 1`.
    fn kernel(&self, _v: f64, _u: &[f64]) -> Option<f64> {
        None
    }

    /// Per-axis breaks (u axes first, `v` last) outside of which the kernel is smooth.
    fn kernel_breaks(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn regularity(&self) -> Regularity {
        Regularity::Lipschitz
    }

    fn as_grid(&self) -> Option<&GridCopula> {
        None
    }

    fn as_analytic(&self) -> Option<&AnalyticCopula> {
        None
    }

    fn name(&self) -> String;

    /// Values on the tensor grid of `nodes`, row-major with the last axis fastest.
    fn eval_tensor(&self, nodes: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(nodes.iter().map(|n| n.len()).product());
        let mut buf = vec![0.0; self.dim()];
        for_each_tuple(nodes, &mut buf, &mut |p| out.push(self.eval(p)));
        out
    }
}

/// Checked evaluation of `C(u)`.
pub fn cdf(c: &dyn Copula, u: &[f64]) -> Result<f64> {
    if u.len() != c.dim() {
        return Err(CopulaError::DimensionMismatch {
            expected: c.dim(),
            got: u.len(),
        });
    }
    if u.iter().any(|x| !x.is_finite()) {
        return Err(CopulaError::NonFinite);
    }
    let clamped: Vec<f64> = u.iter().map(|x| x.clamp(0.0, 1.0)).collect();
    Ok(c.eval(&clamped))
}

/// Checked mass of the box `[lower, upper]` by inclusion-exclusion.
pub fn box_mass(c: &dyn Copula, lower: &[f64], upper: &[f64]) -> Result<f64> {
    let d = c.dim();
    for len in [lower.len(), upper.len()] {
        if len != d {
            return Err(CopulaError::DimensionMismatch {
                expected: d,
                got: len,
            });
        }
    }
    for j in 0..d {
        if lower[j] > upper[j] {
            return Err(CopulaError::InvertedBox(j));
        }
    }
    Ok(box_mass_by(d, lower, upper, |p| c.eval(p)))
}

impl Copula for GridCopula {
    fn dim(&self) -> usize {
        GridCopula::dim(self)
    }

    fn eval(&self, u: &[f64]) -> f64 {
        GridCopula::eval(self, u)
    }

    fn kernel(&self, v: f64, u: &[f64]) -> Option<f64> {
        let d = GridCopula::dim(self);
        let last = self.axis(d - 1);
        let k = last.cell_of(v);
        let mut idx = vec![0usize; d];
        let mut acc = 0.0;
        let mut slab = 0.0;
        'cells: for &(i, m) in self.cells() {
            self.decode(i, &mut idx);
            if idx[d - 1] != k {
                continue;
            }
            slab += m;
            let mut f = m;
            for j in 0..d - 1 {
                let a = self.axis(j);
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
        (slab > 0.0).then(|| acc / slab)
    }

    fn kernel_breaks(&self) -> Option<Vec<Vec<f64>>> {
        Some(self.axes().iter().map(|a| a.breaks().to_vec()).collect())
    }

    fn regularity(&self) -> Regularity {
        Regularity::Multilinear(self.axes().iter().map(|a| a.breaks().to_vec()).collect())
    }

    fn as_grid(&self) -> Option<&GridCopula> {
        Some(self)
    }

    fn name(&self) -> String {
        format!("grid{:?}", self.resolutions())
    }

    fn eval_tensor(&self, nodes: &[Vec<f64>]) -> Vec<f64> {
        GridCopula::eval_tensor(self, nodes)
    }
}

type CdfFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type KernelFn = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Closed-form conditional structure of a trivariate copula given its last coordinate.
pub trait ClosedFormConditional: Send + Sync {
    /// Breaks of the conditioning axis; margins and copula are smooth in `t` between them.
    fn t_breaks(&self) -> Vec<f64>;

    /// True when margins and conditional copula are constant in `t` between breaks.
    fn piecewise_constant(&self) -> bool {
        false
    }

    /// Conditional margin `F_{j|3}(x | t)` for `j` in `{0, 1}`.
    fn margin(&self, j: usize, t: f64, x: f64) -> f64;

    /// Conditional copula `C^t_{12;3}(s)`.
    fn copula(&self, t: f64, s: [f64; 2]) -> f64;
}

/// A copula given by closed-form evaluators.
#[derive(Clone)]
pub struct AnalyticCopula {
    name: String,
    dim: usize,
    cdf: CdfFn,
    kernel: Option<KernelFn>,
    kernel_breaks: Option<Vec<Vec<f64>>>,
    regularity: Regularity,
    conditional: Option<Arc<dyn ClosedFormConditional>>,
}

impl fmt::Debug for AnalyticCopula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticCopula")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("kernel", &self.kernel.is_some())
            .field("regularity", &self.regularity)
            .finish()
    }
}

impl AnalyticCopula {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        cdf: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        AnalyticCopula {
            name: name.into(),
            dim,
            cdf: Arc::new(cdf),
            kernel: None,
            kernel_breaks: None,
            regularity: Regularity::Lipschitz,
            conditional: None,
        }
    }

    pub fn with_kernel(
        mut self,
        kernel: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
        breaks: Vec<Vec<f64>>,
    ) -> Self {
        self.kernel = Some(Arc::new(kernel));
        self.kernel_breaks = Some(breaks);
        self
    }

    pub fn with_regularity(mut self, r: Regularity) -> Self {
        self.regularity = r;
        self
    }

    pub fn with_conditional(mut self, c: Arc<dyn ClosedFormConditional>) -> Self {
        self.conditional = Some(c);
        self
    }

    pub fn conditional(&self) -> Option<&Arc<dyn ClosedFormConditional>> {
        self.conditional.as_ref()
    }

    pub fn has_kernel(&self) -> bool {
        self.kernel.is_some()
    }
}

impl Copula for AnalyticCopula {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, u: &[f64]) -> f64 {
        (self.cdf)(u)
    }

    fn kernel(&self, v: f64, u: &[f64]) -> Option<f64> {
        self.kernel.as_ref().map(|k| k(v, u))
    }

    fn kernel_breaks(&self) -> Option<Vec<Vec<f64>>> {
        self.kernel_breaks.clone()
    }

    fn regularity(&self) -> Regularity {
        self.regularity.clone()
    }

    fn as_analytic(&self) -> Option<&AnalyticCopula> {
        Some(self)
    }

    fn name(&self) -> String {
        self.name.clone()
    }
}

/// Boundary and Lipschitz checks on a probe grid with `k + 1` points per axis.
///
/// Returns the largest violation found (0 for a copula up to rounding).
pub fn axiom_violation(c: &dyn Copula, k: usize) -> f64 {
    let d = c.dim();
    let pts: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let nodes = vec![pts.clone(); d];
    let vals = c.eval_tensor(&nodes);
    let n = k + 1;
    let mut worst = 0.0f64;
    let mut idx = vec![0usize; d];
    for (flat, &v) in vals.iter().enumerate() {
        let mut r = flat;
        for j in (0..d).rev() {
            idx[j] = r % n;
            r /= n;
        }
        if idx.contains(&0) {
            worst = worst.max(v.abs());
        }
        // Uniform margins: all coordinates but one at 1.
        let ones = idx.iter().filter(|&&i| i == k).count();
        if ones >= d - 1 {
            let free = idx.iter().copied().find(|&i| i != k).unwrap_or(k);
            worst = worst.max((v - pts[free]).abs());
        }
        // Monotone and 1-Lipschitz along each axis.
        let mut stride = 1;
        for j in (0..d).rev() {
            if idx[j] > 0 {
                let step = v - vals[flat - stride];
                worst = worst.max(-step).max(step - 1.0 / k as f64);
            }
            stride *= n;
        }
    }
    worst
}
