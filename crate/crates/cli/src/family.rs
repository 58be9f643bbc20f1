//! Named copula families and how they are referenced on the command line.
//!
//! An operand is either a path to a JSON file (a grid file or a family
//! descriptor) or an inline spec `name[:key=value,...]`, for example
//! `efgm-seq:m=3,k=1,dim=3` or `pi:dim=3,res=4.4.4`. Resolution lists use `.`
//! as separator so they fit inside the comma separated parameter list.

use std::path::Path;

use pvcopula::families::{
    bstar, bstarstar, comonotone, countermonotone, cube_copula, discretize, efgm3,
    efgm_sequence_member, example54_copula, independence, pi_analytic, rcube_copula, shuffle_of_w,
    ShuffleSpec,
};
use pvcopula::io::{grid_from_json, grid_to_json};
use pvcopula::{AnalyticCopula, Copula, GridCopula};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Names accepted by `make` and inline specs.
pub const FAMILIES: &[&str] = &[
    "pi",
    "pi-analytic",
    "cube",
    "rcube",
    "efgm",
    "efgm-seq",
    "shuffle-d1",
    "shuffle-d2",
    "shuffle-d3",
    "shuffle-d4",
    "comonotone",
    "countermonotone",
    "bstar",
    "bstarstar",
    "example54",
    "product-extend",
];

/// Serializable recipe for a copula.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilyDescriptor {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Discretize onto uniform axes with these resolutions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub res: Option<Vec<usize>>,
    /// Operand extended by `product-extend`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
}

/// A built operand.
#[derive(Clone, Debug)]
pub enum Loaded {
    Grid(GridCopula),
    Analytic(AnalyticCopula),
}

impl Loaded {
    pub fn as_copula(&self) -> &dyn Copula {
        match self {
            Loaded::Grid(g) => g,
            Loaded::Analytic(a) => a,
        }
    }

    /// The grid, or a usage error naming the command that needs one.
    pub fn grid(&self, what: &str) -> Result<&GridCopula, CliError> {
        match self {
            Loaded::Grid(g) => Ok(g),
            Loaded::Analytic(a) => Err(CliError::Usage(format!(
                "{what} needs a grid copula, got analytic {} (add res=... to discretize)",
                a.name()
            ))),
        }
    }

    /// Grid JSON for grids, `None` for analytic operands.
    pub fn grid_json(&self) -> Option<String> {
        match self {
            Loaded::Grid(g) => Some(grid_to_json(g)),
            Loaded::Analytic(_) => None,
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, sep: char) -> Result<Vec<T>, CliError> {
    s.split(sep)
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("cannot parse '{x}' in '{s}'")))
        })
        .collect()
}

impl FamilyDescriptor {
    pub fn new(family: &str) -> Self {
        FamilyDescriptor {
            family: family.to_string(),
            ..Default::default()
        }
    }

    /// Parse `name[:key=value,...]`.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let (name, params) = match spec.split_once(':') {
            Some((n, p)) => (n, p),
            None => (spec, ""),
        };
        let mut d = FamilyDescriptor::new(name.trim());
        for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected key=value, got '{kv}'")))?;
            let bad = || CliError::Usage(format!("bad value '{v}' for '{k}'"));
            match k.trim() {
                "dim" => d.dim = Some(v.trim().parse().map_err(|_| bad())?),
                "m" => d.m = Some(v.trim().parse().map_err(|_| bad())?),
                "k" => d.k = Some(v.trim().parse().map_err(|_| bad())?),
                "res" => d.res = Some(parse_list(v, '.')?),
                "base" => d.base = Some(v.trim().to_string()),
                other => return Err(CliError::Usage(format!("unknown parameter '{other}'"))),
            }
        }
        Ok(d)
    }

    pub fn build(&self) -> Result<Loaded, CliError> {
        let dim = self.dim;
        let want_dim = |fixed: usize| -> Result<(), CliError> {
            match dim {
                Some(d) if d != fixed => Err(CliError::Usage(format!(
                    "{} has dimension {fixed}, not {d}",
                    self.family
                ))),
                _ => Ok(()),
            }
        };
        let loaded = match self.family.as_str() {
            "pi" => {
                let d = dim.or(self.res.as_ref().map(|r| r.len())).unwrap_or(3);
                return Ok(Loaded::Grid(independence(d, self.res.as_deref())?));
            }
            "pi-analytic" => Loaded::Analytic(pi_analytic(dim.unwrap_or(3))),
            "cube" => {
                want_dim(3)?;
                Loaded::Grid(cube_copula())
            }
            "rcube" => {
                want_dim(3)?;
                Loaded::Grid(rcube_copula())
            }
            "efgm" => {
                want_dim(3)?;
                Loaded::Analytic(efgm3())
            }
            "efgm-seq" => {
                let m = self
                    .m
                    .ok_or_else(|| CliError::Usage("efgm-seq needs m".into()))?;
                Loaded::Analytic(efgm_sequence_member(
                    m,
                    self.k.unwrap_or(1),
                    dim.unwrap_or(3),
                )?)
            }
            s if s.starts_with("shuffle-d") => {
                want_dim(2)?;
                let i: usize = s["shuffle-d".len()..]
                    .parse()
                    .map_err(|_| CliError::Usage(format!("unknown family '{s}'")))?;
                let spec = ShuffleSpec::builtin(i)
                    .ok_or_else(|| CliError::Usage(format!("unknown family '{s}'")))?;
                Loaded::Analytic(shuffle_of_w(spec)?)
            }
            "comonotone" => Loaded::Analytic(comonotone(dim.unwrap_or(2))),
            "countermonotone" => {
                want_dim(2)?;
                Loaded::Analytic(countermonotone())
            }
            "bstar" => {
                want_dim(2)?;
                Loaded::Grid(bstar())
            }
            "bstarstar" => {
                want_dim(2)?;
                Loaded::Grid(bstarstar())
            }
            "example54" => {
                want_dim(3)?;
                Loaded::Analytic(example54_copula())
            }
            "product-extend" => {
                let base = self
                    .base
                    .as_deref()
                    .ok_or_else(|| CliError::Usage("product-extend needs base".into()))?;
                let d = dim.ok_or_else(|| CliError::Usage("product-extend needs dim".into()))?;
                let b = load(base)?;
                Loaded::Grid(b.grid("product-extend")?.product_extend(d)?)
            }
            other => return Err(CliError::Usage(format!("unknown family '{other}'"))),
        };
        match &self.res {
            Some(r) => Ok(Loaded::Grid(discretize(loaded.as_copula(), r)?)),
            None => Ok(loaded),
        }
    }
}

/// Build an operand from a file path or an inline spec.
pub fn load(spec: &str) -> Result<Loaded, CliError> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("family").is_some() {
            let d: FamilyDescriptor = serde_json::from_value(value)?;
            return d.build();
        }
        return Ok(Loaded::Grid(grid_from_json(&text)?));
    }
    FamilyDescriptor::parse(spec)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_specs() {
        let d = FamilyDescriptor::parse("efgm-seq:m=3,k=2,dim=4").unwrap();
        assert_eq!(
            (d.family.as_str(), d.m, d.k, d.dim),
            ("efgm-seq", Some(3), Some(2), Some(4))
        );
        let d = FamilyDescriptor::parse("pi:res=2.3.4").unwrap();
        assert_eq!(d.res, Some(vec![2, 3, 4]));
        assert!(matches!(
            FamilyDescriptor::parse("pi:res"),
            Err(CliError::Usage(_))
        ));
        assert!(matches!(
            FamilyDescriptor::parse("pi:colour=red"),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn builds_every_family() {
        for name in FAMILIES {
            let spec = match *name {
                "efgm-seq" => "efgm-seq:m=2".to_string(),
                "product-extend" => "product-extend:base=bstar,dim=3".to_string(),
                other => other.to_string(),
            };
            let c = load(&spec).unwrap_or_else(|e| panic!("{spec}: {e}"));
            assert!(c.as_copula().dim() >= 2);
        }
        assert!(matches!(load("shuffle-d9"), Err(CliError::Usage(_))));
        assert!(matches!(load("cube:dim=4"), Err(CliError::Usage(_))));
    }

    #[test]
    fn resolutions_discretize_analytic_families() {
        let c = load("example54:res=4.4.4").unwrap();
        let g = c.grid("test").unwrap();
        assert_eq!(g.resolutions(), vec![4, 4, 4]);
        assert_eq!(g.eval(&[0.5, 0.5, 1.0]), 0.375);
        assert!(load("example54").unwrap().grid("test").is_err());
    }
}
