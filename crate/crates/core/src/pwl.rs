//! Continuous piecewise linear distribution functions on the unit interval.

use serde::{Deserialize, Serialize};

use crate::error::{CopulaError, Result};

/// Distribution function given by breakpoints and values, linear in between.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearCdf {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinearCdf {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.len() < 2 {
            return Err(CopulaError::Format(
                "breakpoints and values must match".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(CopulaError::Format("breakpoints must span [0,1]".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CopulaError::Format("breakpoints must increase".into()));
        }
        if values[0] != 0.0 || *values.last().unwrap() != 1.0 {
            return Err(CopulaError::Format("values must run from 0 to 1".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(CopulaError::Format("values must be nondecreasing".into()));
        }
        Ok(PiecewiseLinearCdf {
            breakpoints,
            values,
        })
    }

    /// The identity distribution function.
    pub fn identity() -> Self {
        PiecewiseLinearCdf {
            breakpoints: vec![0.0, 1.0],
            values: vec![0.0, 1.0],
        }
    }

    /// Distribution with positive masses on the listed cells of `axis`, renormalised.
    ///
    /// Only the ends of runs of charged cells become breakpoints.
    pub(crate) fn from_sparse_masses(axis: &crate::axis::Axis, masses: &[(usize, f64)]) -> Self {
        let total: f64 = masses.iter().map(|m| m.1).sum();
        let mut breakpoints = vec![0.0];
        let mut values = vec![0.0];
        let mut acc = 0.0;
        for &(i, m) in masses {
            let lo = axis.lo(i);
            if lo > *breakpoints.last().unwrap() {
                breakpoints.push(lo);
                values.push(acc / total);
            }
            acc += m;
            breakpoints.push(axis.hi(i));
            values.push(acc / total);
        }
        if *breakpoints.last().unwrap() < 1.0 {
            breakpoints.push(1.0);
            values.push(1.0);
        }
        *values.last_mut().unwrap() = 1.0;
        for v in values.iter_mut().rev().skip(1) {
            if *v > 1.0 {
                *v = 1.0;
            }
        }
        PiecewiseLinearCdf {
            breakpoints,
            values,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        let k = self.breakpoints.partition_point(|&b| b <= x);
        if k >= self.breakpoints.len() {
            return 1.0;
        }
        let i = k - 1;
        let (x0, x1) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Quasi-inverse `inf{x : F(x) >= p}`; on a flat piece the left end is returned.
    pub fn quasi_inverse(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let k = self.values.partition_point(|&y| y < p);
        if k >= self.values.len() {
            return 1.0;
        }
        if k == 0 {
            return 0.0;
        }
        let (y0, y1) = (self.values[k - 1], self.values[k]);
        let (x0, x1) = (self.breakpoints[k - 1], self.breakpoints[k]);
        if p >= y1 {
            return x1;
        }
        x0 + (p - y0) / (y1 - y0) * (x1 - x0)
    }

    /// Images of the breakpoints, i.e. the values.
    pub fn image_breaks(&self) -> &[f64] {
        &self.values
    }

    /// True when the function equals the identity within `tol` at its breakpoints.
    pub fn is_identity(&self, tol: f64) -> bool {
        self.breakpoints
            .iter()
            .zip(&self.values)
            .all(|(x, y)| (x - y).abs() <= tol)
    }
}
