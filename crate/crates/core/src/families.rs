//! Named copulas: independence, comonotone and countermonotone copulas, the
//! cube constructions, shuffles of `W`, EFGM-type families, the checkerboards
//! `B*` and `B**`, and the piecewise-constant non-simplified example built
//! from them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::copula::{AnalyticCopula, ClosedFormConditional, Copula, Regularity};
use crate::error::{CopulaError, Result};
use crate::grid::GridCopula;

/// Independence copula as a uniform checkerboard (resolution 1 per axis by default).
pub fn independence(d: usize, resolutions: Option<&[usize]>) -> Result<GridCopula> {
    if d < 2 {
        return Err(CopulaError::BadDimension(format!("dim {d} < 2")));
    }
    let res: Vec<usize> = match resolutions {
        Some(r) => r.to_vec(),
        None => vec![1; d],
    };
    if res.len() != d {
        return Err(CopulaError::DimensionMismatch {
            expected: d,
            got: res.len(),
        });
    }
    if res.contains(&0) {
        return Err(CopulaError::ShapeMismatch("resolution 0".into()));
    }
    let cells: usize = res.iter().product();
    let axes: Vec<Axis> = res.iter().map(|&n| Axis::uniform(n)).collect();
    let m = 1.0 / cells as f64;
    GridCopula::from_cells(axes, (0..cells as u64).map(|i| (i, m)).collect(), 1e-12)
}

/// Independence copula as a closed-form evaluator.
pub fn pi_analytic(d: usize) -> AnalyticCopula {
    AnalyticCopula::new(format!("pi{d}"), d, |u: &[f64]| u.iter().product())
        .with_kernel(|_v, u: &[f64]| u.iter().product(), vec![vec![0.0, 1.0]; d])
        .with_regularity(Regularity::Multilinear(vec![vec![0.0, 1.0]; d]))
}

/// Upper Frechet bound `M(u) = min u_i`.
pub fn comonotone(d: usize) -> AnalyticCopula {
    AnalyticCopula::new(format!("m{d}"), d, |u: &[f64]| {
        u.iter().copied().fold(1.0, f64::min)
    })
}

/// Lower Frechet bound `W(u, v) = max(u + v - 1, 0)`.
pub fn countermonotone() -> AnalyticCopula {
    AnalyticCopula::new("w2", 2, |u: &[f64]| (u[0] + u[1] - 1.0).max(0.0))
}

/// The cube copula: mass 1/4 spread uniformly on four of the eight octants.
pub fn cube_copula() -> GridCopula {
    let mut m = vec![0.0; 8];
    for (a, b, c) in [(0, 0, 0), (1, 1, 0), (0, 1, 1), (1, 0, 1)] {
        m[a * 4 + b * 2 + c] = 0.25;
    }
    GridCopula::new_grid(3, &[2, 2, 2], &m).expect("cube masses are valid")
}

/// The cube copula reflected in its third coordinate.
pub fn rcube_copula() -> GridCopula {
    cube_copula().reflect(2).expect("axis 2 exists")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Ascending,
    Descending,
}

/// One piece of a shuffle: the source interval is mapped linearly onto the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub source: (f64, f64),
    pub target: (f64, f64),
    pub orientation: Orientation,
}

/// A measure-preserving rearrangement of the unit interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuffleSpec {
    pub segments: Vec<Segment>,
}

fn seg(a: f64, b: f64, c: f64, e: f64) -> Segment {
    Segment {
        source: (a, b),
        target: (c, e),
        orientation: Orientation::Descending,
    }
}

impl ShuffleSpec {
    /// First of the four shuffles of `W` used in the piecewise-constant example.
    pub fn d1() -> Self {
        ShuffleSpec {
            segments: vec![
                seg(0.0, 0.25, 0.25, 0.5),
                seg(0.25, 0.75, 0.5, 1.0),
                seg(0.75, 1.0, 0.0, 0.25),
            ],
        }
    }

    pub fn d2() -> Self {
        ShuffleSpec {
            segments: vec![
                seg(0.0, 0.25, 0.75, 1.0),
                seg(0.25, 0.5, 0.0, 0.25),
                seg(0.5, 1.0, 0.25, 0.75),
            ],
        }
    }

    pub fn d3() -> Self {
        ShuffleSpec {
            segments: vec![
                seg(0.0, 0.5, 0.25, 0.75),
                seg(0.5, 0.75, 0.75, 1.0),
                seg(0.75, 1.0, 0.0, 0.25),
            ],
        }
    }

    pub fn d4() -> Self {
        ShuffleSpec {
            segments: vec![
                seg(0.0, 0.25, 0.75, 1.0),
                seg(0.25, 0.75, 0.0, 0.5),
                seg(0.75, 1.0, 0.5, 0.75),
            ],
        }
    }

    /// Shuffle `D^i` for `i` in `1..=4`.
    pub fn builtin(i: usize) -> Option<Self> {
        match i {
            1 => Some(Self::d1()),
            2 => Some(Self::d2()),
            3 => Some(Self::d3()),
            4 => Some(Self::d4()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-12;
        if self.segments.is_empty() {
            return Err(CopulaError::InvalidShuffle("no segments".into()));
        }
        for s in &self.segments {
            let (a, b) = s.source;
            let (c, e) = s.target;
            if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) || b <= a {
                return Err(CopulaError::InvalidShuffle(format!(
                    "bad source {:?}",
                    s.source
                )));
            }
            if !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&e) || e <= c {
                return Err(CopulaError::InvalidShuffle(format!(
                    "bad target {:?}",
                    s.target
                )));
            }
            if ((b - a) - (e - c)).abs() > tol {
                return Err(CopulaError::InvalidShuffle(
                    "source and target lengths differ".into(),
                ));
            }
        }
        for pick in [0usize, 1] {
            let mut iv: Vec<(f64, f64)> = self
                .segments
                .iter()
                .map(|s| if pick == 0 { s.source } else { s.target })
                .collect();
            iv.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut end = 0.0;
            for (a, b) in iv {
                if (a - end).abs() > tol {
                    return Err(CopulaError::InvalidShuffle(
                        "intervals do not partition (0,1)".into(),
                    ));
                }
                end = b;
            }
            if (end - 1.0).abs() > tol {
                return Err(CopulaError::InvalidShuffle(
                    "intervals do not cover (0,1)".into(),
                ));
            }
        }
        Ok(())
    }

    /// `lambda{x <= u : h(x) <= v}`.
    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        self.segments
            .iter()
            .map(|s| {
                let (a, b) = s.source;
                let c = s.target.0;
                let top = b.min(u);
                match s.orientation {
                    Orientation::Ascending => (top.min(a + v - c) - a).max(0.0),
                    Orientation::Descending => (top - a.max(c + b - v)).max(0.0),
                }
            })
            .sum()
    }

    /// The preimage `h^{-1}(v)`.
    pub fn inverse(&self, v: f64) -> f64 {
        for s in &self.segments {
            let (a, b) = s.source;
            let (c, e) = s.target;
            if v >= c && v <= e {
                return match s.orientation {
                    Orientation::Ascending => a + (v - c),
                    Orientation::Descending => b - (v - c),
                };
            }
        }
        v
    }
}

/// Shuffle of `W` (or `M`) as a bivariate analytic copula.
pub fn shuffle_of_w(spec: ShuffleSpec) -> Result<AnalyticCopula> {
    spec.validate()?;
    let s1 = Arc::new(spec);
    let s2 = s1.clone();
    let mut vb: Vec<f64> = s1
        .segments
        .iter()
        .flat_map(|s| [s.target.0, s.target.1])
        .collect();
    vb.sort_by(|a, b| a.total_cmp(b));
    vb.dedup();
    Ok(
        AnalyticCopula::new("shuffle", 2, move |u: &[f64]| s1.cdf(u[0], u[1])).with_kernel(
            move |v, u: &[f64]| if s2.inverse(v) <= u[0] { 1.0 } else { 0.0 },
            vec![vec![0.0, 1.0], vb],
        ),
    )
}

/// Perturbation `f` of an EFGM-type copula `v prod u_i + f(v) prod u_i (1 - u_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Perturbation {
    /// `f(v) = v (1 - v)`.
    Parabola,
    /// Continuous piecewise linear `f` through the given knots.
    PiecewiseLinear { knots: Vec<f64>, values: Vec<f64> },
}

impl Perturbation {
    /// `f(v) = lambda([0, v] intersected with (a, b])`.
    pub fn ramp(a: f64, b: f64) -> Self {
        let mut knots = vec![0.0];
        let mut values = vec![0.0];
        if a > 0.0 {
            knots.push(a);
            values.push(0.0);
        }
        knots.push(b);
        values.push(b - a);
        if b < 1.0 {
            knots.push(1.0);
            values.push(b - a);
        }
        Perturbation::PiecewiseLinear { knots, values }
    }

    pub fn value(&self, v: f64) -> f64 {
        match self {
            Perturbation::Parabola => v * (1.0 - v),
            Perturbation::PiecewiseLinear { knots, values } => {
                let k = knots.partition_point(|&x| x <= v).clamp(1, knots.len() - 1);
                let (x0, x1) = (knots[k - 1], knots[k]);
                values[k - 1] + (values[k] - values[k - 1]) * (v - x0) / (x1 - x0)
            }
        }
    }

    /// Right derivative `f'(v)` (left derivative at `v = 1`).
    pub fn slope(&self, v: f64) -> f64 {
        match self {
            Perturbation::Parabola => 1.0 - 2.0 * v,
            Perturbation::PiecewiseLinear { knots, values } => {
                let k = knots.partition_point(|&x| x <= v).clamp(1, knots.len() - 1);
                (values[k] - values[k - 1]) / (knots[k] - knots[k - 1])
            }
        }
    }

    fn knots(&self) -> Vec<f64> {
        match self {
            Perturbation::Parabola => vec![0.0, 1.0],
            Perturbation::PiecewiseLinear { knots, .. } => knots.clone(),
        }
    }

    fn max_abs(&self) -> f64 {
        match self {
            Perturbation::Parabola => 0.25,
            Perturbation::PiecewiseLinear { values, .. } => {
                values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
            }
        }
    }

    fn curvature(&self) -> f64 {
        match self {
            Perturbation::Parabola => 2.0,
            Perturbation::PiecewiseLinear { .. } => 0.0,
        }
    }
}

/// Dimension and perturbation of an EFGM-type copula.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfgmSpec {
    pub dim: usize,
    pub f: Perturbation,
}

impl EfgmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(CopulaError::BadDimension(format!("dim {} < 2", self.dim)));
        }
        if let Perturbation::PiecewiseLinear { knots, values } = &self.f {
            if knots.len() != values.len() || knots.len() < 2 {
                return Err(CopulaError::InvalidPerturbation(
                    "knots and values must match".into(),
                ));
            }
            if knots[0] != 0.0 || *knots.last().unwrap() != 1.0 {
                return Err(CopulaError::InvalidPerturbation(
                    "knots must span [0,1]".into(),
                ));
            }
            if knots.windows(2).any(|w| w[1] <= w[0]) {
                return Err(CopulaError::InvalidPerturbation(
                    "knots must increase".into(),
                ));
            }
            if values[0] != 0.0 {
                return Err(CopulaError::InvalidPerturbation("f(0) must be 0".into()));
            }
            for k in 1..knots.len() {
                let s = (values[k] - values[k - 1]) / (knots[k] - knots[k - 1]);
                if s.abs() > 1.0 + 1e-12 {
                    return Err(CopulaError::InvalidPerturbation(format!(
                        "slope {s} exceeds 1"
                    )));
                }
            }
        }
        // With two coordinates f(1) is the perturbation of the u-margin.
        if self.dim == 2 && self.f.value(1.0).abs() > 1e-12 {
            return Err(CopulaError::InvalidPerturbation(
                "f(1) must be 0 in dimension 2".into(),
            ));
        }
        Ok(())
    }
}

struct EfgmConditional {
    f: Perturbation,
}

impl ClosedFormConditional for EfgmConditional {
    fn t_breaks(&self) -> Vec<f64> {
        self.f.knots()
    }

    fn piecewise_constant(&self) -> bool {
        matches!(self.f, Perturbation::PiecewiseLinear { .. })
    }

    fn margin(&self, _j: usize, _t: f64, x: f64) -> f64 {
        x
    }

    fn copula(&self, t: f64, s: [f64; 2]) -> f64 {
        let g = s[0] * (1.0 - s[0]) * s[1] * (1.0 - s[1]);
        s[0] * s[1] + self.f.slope(t) * g
    }
}

/// EFGM-type copula `C(u, v) = v prod u_i + f(v) prod u_i (1 - u_i)`.
pub fn efgm(spec: EfgmSpec) -> Result<AnalyticCopula> {
    spec.validate()?;
    let d = spec.dim;
    let f1 = spec.f.clone();
    let f2 = spec.f.clone();
    let cdf = move |x: &[f64]| {
        let v = x[d - 1];
        let u = &x[..d - 1];
        let p: f64 = u.iter().product();
        let q: f64 = u.iter().map(|a| a * (1.0 - a)).product();
        v * p + f1.value(v) * q
    };
    let kernel = move |v: f64, u: &[f64]| {
        let p: f64 = u.iter().product();
        let q: f64 = u.iter().map(|a| a * (1.0 - a)).product();
        p + f2.slope(v) * q
    };
    let knots = spec.f.knots();
    let mut kb = vec![vec![0.0, 1.0]; d - 1];
    kb.push(knots.clone());
    let quarter = 0.25f64;
    let mut curvature = vec![2.0 * spec.f.max_abs() * quarter.powi(d as i32 - 2); d - 1];
    curvature.push(spec.f.curvature() * quarter.powi(d as i32 - 1));
    let name = match spec.f {
        Perturbation::Parabola => format!("efgm{d}"),
        _ => format!("efgm-pl{d}"),
    };
    let mut c = AnalyticCopula::new(name, d, cdf)
        .with_kernel(kernel, kb.clone())
        .with_regularity(Regularity::Smooth {
            breaks: kb,
            curvature,
        });
    if d == 3 {
        c = c.with_conditional(Arc::new(EfgmConditional { f: spec.f }));
    }
    Ok(c)
}

/// The trivariate EFGM copula with `f(v) = v (1 - v)`.
pub fn efgm3() -> AnalyticCopula {
    efgm(EfgmSpec {
        dim: 3,
        f: Perturbation::Parabola,
    })
    .expect("parabola perturbation is valid")
}

/// Member `n = 2^m + k - 2` of the EFGM sequence with `f_n(v) = lambda([0,v] cap J_{m,k})`.
pub fn efgm_sequence_member(m: u32, k: u64, d: usize) -> Result<AnalyticCopula> {
    if m > 52 || k < 1 || k > 1u64 << m {
        return Err(CopulaError::BadIndex(format!(
            "need 1 <= k <= 2^m, got m={m}, k={k}"
        )));
    }
    if d < 3 {
        return Err(CopulaError::BadDimension(format!(
            "the sequence needs d >= 3, got {d}"
        )));
    }
    let h = 0.5f64.powi(m as i32);
    efgm(EfgmSpec {
        dim: d,
        f: Perturbation::ramp((k - 1) as f64 * h, k as f64 * h),
    })
}

/// Checkerboard `B*` on `(u_1, t)` with resolutions `[2, 4]`.
pub fn bstar() -> GridCopula {
    // Rows: u_1 halves; columns: t quarters. Mass = density / 8.
    let m = [
        [1.0 / 16.0, 1.0 / 8.0, 1.0 / 8.0, 3.0 / 16.0],
        [3.0 / 16.0, 1.0 / 8.0, 1.0 / 8.0, 1.0 / 16.0],
    ];
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    GridCopula::new_grid(2, &[2, 4], &flat).expect("B* masses are valid")
}

/// Checkerboard `B**` on `(u_2, t)` with resolutions `[2, 4]`.
pub fn bstarstar() -> GridCopula {
    let m = [
        [1.0 / 8.0, 1.0 / 16.0, 3.0 / 16.0, 1.0 / 8.0],
        [1.0 / 8.0, 3.0 / 16.0, 1.0 / 16.0, 1.0 / 8.0],
    ];
    let flat: Vec<f64> = m.iter().flatten().copied().collect();
    GridCopula::new_grid(2, &[2, 4], &flat).expect("B** masses are valid")
}

/// Conditional distribution function of a `[2, 4]` checkerboard given `t` in quarter `i`.
fn quarter_margin(b: &GridCopula, i: usize, x: f64) -> f64 {
    let lo = b.mass_at(&[0, i]) * 4.0;
    if x <= 0.5 {
        lo * 2.0 * x
    } else {
        lo + (1.0 - lo) * 2.0 * (x - 0.5)
    }
}

struct Example54 {
    shuffles: [ShuffleSpec; 4],
    bs: GridCopula,
    bss: GridCopula,
}

impl Example54 {
    fn quarter(t: f64) -> usize {
        ((t * 4.0).floor() as usize).min(3)
    }

    fn margins(&self, i: usize, u1: f64, u2: f64) -> (f64, f64) {
        (
            quarter_margin(&self.bs, i, u1),
            quarter_margin(&self.bss, i, u2),
        )
    }
}

impl ClosedFormConditional for Example54 {
    fn t_breaks(&self) -> Vec<f64> {
        vec![0.0, 0.25, 0.5, 0.75, 1.0]
    }

    fn piecewise_constant(&self) -> bool {
        true
    }

    fn margin(&self, j: usize, t: f64, x: f64) -> f64 {
        let b = if j == 0 { &self.bs } else { &self.bss };
        quarter_margin(b, Self::quarter(t), x)
    }

    fn copula(&self, t: f64, s: [f64; 2]) -> f64 {
        self.shuffles[Self::quarter(t)].cdf(s[0], s[1])
    }
}

/// The non-simplified copula whose conditional copulas are the shuffles `D^1..D^4`
/// on the four quarters of the conditioning axis, with conditional margins from `B*`, `B**`.
pub fn example54_copula() -> AnalyticCopula {
    let ex = Arc::new(Example54 {
        shuffles: [
            ShuffleSpec::d1(),
            ShuffleSpec::d2(),
            ShuffleSpec::d3(),
            ShuffleSpec::d4(),
        ],
        bs: bstar(),
        bss: bstarstar(),
    });
    let e1 = ex.clone();
    let e2 = ex.clone();
    let cdf = move |x: &[f64]| {
        let v = x[2];
        let mut acc = 0.0;
        for i in 0..4 {
            let lo = i as f64 * 0.25;
            let len = (v.min(lo + 0.25) - lo).max(0.0);
            if len > 0.0 {
                let (a, b) = e1.margins(i, x[0], x[1]);
                acc += len * e1.shuffles[i].cdf(a, b);
            }
        }
        acc
    };
    let kernel = move |v: f64, u: &[f64]| {
        let i = Example54::quarter(v);
        let (a, b) = e2.margins(i, u[0], u[1]);
        e2.shuffles[i].cdf(a, b)
    };
    let q = vec![0.0, 0.25, 0.5, 0.75, 1.0];
    AnalyticCopula::new("example54", 3, cdf)
        .with_kernel(kernel, vec![vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0], q])
        .with_conditional(ex)
}

/// Checkerboard approximation agreeing with `c` at every node of the uniform grid.
pub fn discretize(c: &dyn Copula, resolutions: &[usize]) -> Result<GridCopula> {
    let d = c.dim();
    if resolutions.len() != d {
        return Err(CopulaError::DimensionMismatch {
            expected: d,
            got: resolutions.len(),
        });
    }
    if resolutions.contains(&0) {
        return Err(CopulaError::ShapeMismatch("resolution 0".into()));
    }
    let axes: Vec<Axis> = resolutions.iter().map(|&n| Axis::uniform(n)).collect();
    discretize_on(c, &axes)
}

/// Checkerboard approximation on arbitrary axes, exact at the nodes.
pub fn discretize_on(c: &dyn Copula, axes: &[Axis]) -> Result<GridCopula> {
    let d = c.dim();
    let nodes: Vec<Vec<f64>> = axes.iter().map(|a| a.breaks().to_vec()).collect();
    let mut t = c.eval_tensor(&nodes);
    let mut shape: Vec<usize> = nodes.iter().map(|n| n.len()).collect();
    for j in 0..d {
        let inner: usize = shape[j + 1..].iter().product();
        let outer: usize = shape[..j].iter().product();
        let n = shape[j];
        let mut out = vec![0.0; outer * (n - 1) * inner];
        for o in 0..outer {
            for k in 0..n - 1 {
                for r in 0..inner {
                    out[(o * (n - 1) + k) * inner + r] =
                        t[(o * n + k + 1) * inner + r] - t[(o * n + k) * inner + r];
                }
            }
        }
        t = out;
        shape[j] = n - 1;
    }
    let mut cells = Vec::new();
    for (i, &m) in t.iter().enumerate() {
        if m < -1e-9 {
            return Err(CopulaError::NonCopulaInput(m));
        }
        if m > 0.0 {
            cells.push((i as u64, m));
        }
    }
    GridCopula::from_cells(axes.to_vec(), cells, 1e-8)
}
