//! File formats.
//!
//! Grid copulas are stored as JSON:
//!
//! ```json
//! {"dim": 3, "resolutions": [2, 2, 2], "order": "row-major-last-fastest",
//!  "masses": [0.25, 0, 0, 0.25, 0, 0.25, 0.25, 0]}
//! ```
//!
//! Nonuniform grids add `"breaks"` (one list per axis, from 0 to 1). Large
//! sparse grids may replace `"masses"` by `"cells"`, a list of
//! `[[i_1, ..., i_d], mass]` pairs with 0-based indices. Samples are CSV with
//! header `x1,...,xd` and one point per row. Floats are written in shortest
//! round-trip form, so both formats reload bit-exactly.

use serde::{Deserialize, Serialize};

use crate::axis::Axis;
use crate::error::{CopulaError, Result};
use crate::grid::{GridCopula, VALIDATION_TOL};

/// The only supported cell order.
pub const ROW_MAJOR: &str = "row-major-last-fastest";

/// Dense output is used up to this many cells.
const DENSE_LIMIT: u128 = 1 << 20;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridFile {
    pub dim: usize,
    pub resolutions: Vec<usize>,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaks: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<Vec<(Vec<usize>, f64)>>,
}

impl GridFile {
    pub fn from_grid(g: &GridCopula) -> Self {
        let breaks = if g.is_uniform() {
            None
        } else {
            Some(g.axes().iter().map(|a| a.breaks().to_vec()).collect())
        };
        let (masses, cells) = if g.total_cells() <= DENSE_LIMIT {
            (Some(g.dense_masses().expect("size checked")), None)
        } else {
            let mut idx = vec![0usize; g.dim()];
            let list = g
                .cells()
                .iter()
                .map(|&(i, m)| {
                    g.decode(i, &mut idx);
                    (idx.clone(), m)
                })
                .collect();
            (None, Some(list))
        };
        GridFile {
            dim: g.dim(),
            resolutions: g.resolutions(),
            order: ROW_MAJOR.to_string(),
            breaks,
            masses,
            cells,
        }
    }

    pub fn to_grid(&self) -> Result<GridCopula> {
        if self.order != ROW_MAJOR {
            return Err(CopulaError::Format(format!(
                "unsupported order {:?}",
                self.order
            )));
        }
        if self.resolutions.len() != self.dim {
            return Err(CopulaError::DimensionMismatch {
                expected: self.dim,
                got: self.resolutions.len(),
            });
        }
        if self.dim < 2 {
            return Err(CopulaError::BadDimension(format!("dim {} < 2", self.dim)));
        }
        let axes: Vec<Axis> = match &self.breaks {
            None => self.resolutions.iter().map(|&n| Axis::uniform(n)).collect(),
            Some(b) => {
                if b.len() != self.dim {
                    return Err(CopulaError::ShapeMismatch("one break list per axis".into()));
                }
                let axes: Vec<Axis> = b
                    .iter()
                    .map(|x| Axis::from_breaks(x.clone()))
                    .collect::<Result<_>>()?;
                for (a, &n) in axes.iter().zip(&self.resolutions) {
                    if a.cells() != n {
                        return Err(CopulaError::ShapeMismatch(
                            "breaks do not match resolutions".into(),
                        ));
                    }
                }
                axes
            }
        };
        match (&self.masses, &self.cells) {
            (Some(m), None) => GridCopula::from_dense(axes, m),
            (None, Some(list)) => {
                let probe = GridCopula::from_cells_unchecked(axes.clone(), Vec::new());
                let mut cells = Vec::with_capacity(list.len());
                for (idx, m) in list {
                    if idx.len() != self.dim {
                        return Err(CopulaError::ShapeMismatch(format!("cell index {idx:?}")));
                    }
                    if idx.iter().zip(&self.resolutions).any(|(&i, &n)| i >= n) {
                        return Err(CopulaError::BadIndex(format!("{idx:?}")));
                    }
                    cells.push((probe.encode(idx), *m));
                }
                GridCopula::from_cells(axes, cells, VALIDATION_TOL)
            }
            _ => Err(CopulaError::Format(
                "exactly one of \"masses\" and \"cells\" is required".into(),
            )),
        }
    }
}

pub fn grid_to_json(g: &GridCopula) -> String {
    serde_json::to_string(&GridFile::from_grid(g)).expect("grid file serializes")
}

pub fn grid_from_json(s: &str) -> Result<GridCopula> {
    let f: GridFile = serde_json::from_str(s).map_err(|e| CopulaError::Format(e.to_string()))?;
    f.to_grid()
}

/// Samples as CSV text with header `x1,...,xd`.
pub fn samples_to_csv(points: &[Vec<f64>]) -> Result<String> {
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        if p.len() != d {
            return Err(CopulaError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        w.write_record(p.iter().map(|x| x.to_string()))
            .map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CopulaError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is ascii"))
}

/// Parse CSV samples; every coordinate must lie strictly inside `(0, 1)`.
pub fn samples_from_csv(s: &str) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_reader(s.as_bytes());
    let d = r.headers().map_err(csv_err)?.len();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let p: Vec<f64> = rec
            .iter()
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|e| CopulaError::Format(e.to_string()))
            })
            .collect::<Result<_>>()?;
        if p.len() != d {
            return Err(CopulaError::DimensionMismatch {
                expected: d,
                got: p.len(),
            });
        }
        if p.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(CopulaError::InvalidSample(format!(
                "point {p:?} leaves (0, 1)"
            )));
        }
        out.push(p);
    }
    Ok(out)
}

fn csv_err(e: csv::Error) -> CopulaError {
    CopulaError::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::cube_copula;

    #[test]
    fn grid_round_trip() {
        let c = cube_copula();
        let back = grid_from_json(&grid_to_json(&c)).unwrap();
        assert_eq!(back.cells(), c.cells());
        assert_eq!(back.axes(), c.axes());
        let bad = r#"{"dim":2,"resolutions":[2,2],"order":"row-major-last-fastest","masses":[0.6,0,0,0.4]}"#;
        assert!(matches!(
            grid_from_json(bad),
            Err(CopulaError::MarginViolation { .. })
        ));
    }

    #[test]
    fn samples_round_trip() {
        let pts: Vec<Vec<f64>> = vec![vec![0.1, 1.0 / 3.0], vec![0.7, 0.123_456_789_012_345_68]];
        let text = samples_to_csv(&pts).unwrap();
        assert!(text.starts_with("x1,x2\n"));
        assert_eq!(samples_from_csv(&text).unwrap(), pts);
    }
}
