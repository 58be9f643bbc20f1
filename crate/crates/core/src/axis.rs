//! One-dimensional partitions of the unit interval.

use crate::error::{CopulaError, Result};

/// Breaks closer than this are treated as the same point.
pub const BREAK_TOL: f64 = 1e-12;

/// A partition `0 = b_0 < b_1 < ... < b_n = 1` of the unit interval.
#[derive(Clone, Debug)]
pub struct Axis {
    breaks: Vec<f64>,
    uniform: Option<usize>,
}

impl PartialEq for Axis {
    fn eq(&self, other: &Self) -> bool {
        self.breaks == other.breaks
    }
}

impl Axis {
    /// Uniform partition with `n` cells.
    pub fn uniform(n: usize) -> Self {
        assert!(n >= 1, "an axis needs at least one cell");
        let breaks = (0..=n).map(|i| i as f64 / n as f64).collect();
        Axis {
            breaks,
            uniform: Some(n),
        }
    }

    /// Partition from explicit breaks; detects uniform spacing.
    pub fn from_breaks(breaks: Vec<f64>) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(CopulaError::Format("axis needs at least two breaks".into()));
        }
        if breaks[0] != 0.0 || *breaks.last().unwrap() != 1.0 {
            return Err(CopulaError::Format(
                "axis breaks must start at 0 and end at 1".into(),
            ));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(CopulaError::NonFinite);
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CopulaError::Format(
                "axis breaks must increase strictly".into(),
            ));
        }
        let n = breaks.len() - 1;
        let is_uniform = breaks
            .iter()
            .enumerate()
            .all(|(i, &b)| b == i as f64 / n as f64);
        Ok(Axis {
            breaks,
            uniform: is_uniform.then_some(n),
        })
    }

    pub fn cells(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn uniform_cells(&self) -> Option<usize> {
        self.uniform
    }

    pub fn lo(&self, i: usize) -> f64 {
        self.breaks[i]
    }

    pub fn hi(&self, i: usize) -> f64 {
        self.breaks[i + 1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.breaks[i + 1] - self.breaks[i]
    }

    /// Cell index and relative position of `x` inside that cell.
    ///
    /// `x = 1` maps to the last cell with fraction 1.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.cells();
        let x = x.clamp(0.0, 1.0);
        let i = match self.uniform {
            Some(n) => ((x * n as f64).floor() as usize).min(n - 1),
            None => {
                let k = self.breaks.partition_point(|&b| b <= x);
                k.saturating_sub(1).min(n - 1)
            }
        };
        let (lo, hi) = (self.breaks[i], self.breaks[i + 1]);
        let frac = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        (i, frac)
    }

    /// Index of the cell containing `x`, cells taken half-open on the right.
    pub fn cell_of(&self, x: f64) -> usize {
        self.locate(x).0
    }

    /// Index of the break equal to `x` within `BREAK_TOL`, if any.
    pub fn find_break(&self, x: f64) -> Option<usize> {
        let k = self.breaks.partition_point(|&b| b < x - BREAK_TOL);
        (k < self.breaks.len() && (self.breaks[k] - x).abs() <= BREAK_TOL).then_some(k)
    }

    /// True when every break of `self` is also a break of `finer`.
    pub fn is_refined_by(&self, finer: &Axis) -> bool {
        self.breaks.iter().all(|&b| finer.find_break(b).is_some())
    }

    /// For each cell of `self`, the cells of `finer` covering it with their width fractions.
    pub fn split_onto(&self, finer: &Axis) -> Result<Vec<Vec<(usize, f64)>>> {
        let mut out = Vec::with_capacity(self.cells());
        for i in 0..self.cells() {
            let a = finer
                .find_break(self.lo(i))
                .ok_or_else(|| CopulaError::Format("target axis does not refine source".into()))?;
            let b = finer
                .find_break(self.hi(i))
                .ok_or_else(|| CopulaError::Format("target axis does not refine source".into()))?;
            let w = self.width(i);
            out.push((a..b).map(|k| (k, finer.width(k) / w)).collect());
        }
        Ok(out)
    }

    /// Reflected partition `x -> 1 - x`.
    pub fn reflected(&self) -> Axis {
        if let Some(n) = self.uniform {
            return Axis::uniform(n);
        }
        let mut b: Vec<f64> = self.breaks.iter().rev().map(|x| 1.0 - x).collect();
        b[0] = 0.0;
        *b.last_mut().unwrap() = 1.0;
        Axis {
            breaks: b,
            uniform: None,
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Merge sorted break lists, collapsing points within `BREAK_TOL`.
pub fn merge_breaks(lists: &[&[f64]]) -> Vec<f64> {
    let mut all: Vec<f64> = lists.iter().flat_map(|l| l.iter().copied()).collect();
    all.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(all.len());
    for x in all {
        match out.last() {
            Some(&last) if x - last <= BREAK_TOL => {}
            _ => out.push(x),
        }
    }
    if let Some(first) = out.first_mut() {
        *first = 0.0;
    }
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Coarsest common refinement of several axes (lcm for uniform axes).
pub fn union_axes(axes: &[&Axis]) -> Axis {
    if axes.iter().all(|a| a.uniform.is_some()) {
        let n = axes
            .iter()
            .map(|a| a.uniform.unwrap())
            .fold(1usize, |acc, k| acc / gcd(acc, k) * k);
        return Axis::uniform(n);
    }
    let lists: Vec<&[f64]> = axes.iter().map(|a| a.breaks()).collect();
    Axis::from_breaks(merge_breaks(&lists)).expect("merged breaks form a partition")
}

/// Axis from arbitrary candidate break values in [0,1].
pub fn axis_from_points(points: &[f64]) -> Axis {
    let mut pts: Vec<f64> = points
        .iter()
        .copied()
        .filter(|x| (0.0..=1.0).contains(x))
        .collect();
    pts.push(0.0);
    pts.push(1.0);
    pts.sort_by(|a, b| a.total_cmp(b));
    Axis::from_breaks(merge_breaks(&[&pts])).expect("merged breaks form a partition")
}
