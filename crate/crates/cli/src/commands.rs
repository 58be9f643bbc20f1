//! Single-shot subcommands. Indices given on the command line are 1-based.

use std::path::Path;

use pvcopula::disintegration::{
    conditional_copula, j_functional, kernel_cdf, partial_copula, simplifiedness_delta,
};
use pvcopula::families::discretize;
use pvcopula::io::{grid_to_json, samples_from_csv, samples_to_csv};
use pvcopula::metrics::{
    d_inf, kernel_metric, kl, metric_chain_check, tv, DinfOptions, KernelMetric,
};
use pvcopula::pvc::{
    pvc3, pvc3_analytic, pvc_distance_report, pvc_distance_report_analytic, pvc_dvine,
    pvc_dvine_with_order,
};
use pvcopula::{empirical_copula, Copula};
use serde_json::{json, Value};

use crate::family::{load, FamilyDescriptor, Loaded};
use crate::report::Format;
use crate::{rng, CliError};

/// What a command produces.
#[derive(Clone, Debug)]
pub enum Body {
    /// Text written as is (grid files, descriptors, samples).
    Raw(String),
    /// A report rendered as JSON or CSV.
    Report(Value),
}

#[derive(Clone, Debug)]
pub struct Output {
    pub body: Body,
    pub default_format: Format,
    /// False when a verification inside the command failed.
    pub ok: bool,
}

impl Output {
    pub fn raw(s: String) -> Self {
        Output {
            body: Body::Raw(s),
            default_format: Format::Json,
            ok: true,
        }
    }

    pub fn report<T: serde::Serialize>(r: &T) -> Result<Self, CliError> {
        Ok(Output {
            body: Body::Report(serde_json::to_value(r)?),
            default_format: Format::Json,
            ok: true,
        })
    }

    pub fn table<T: serde::Serialize>(r: &T) -> Result<Self, CliError> {
        let mut o = Self::report(r)?;
        o.default_format = Format::Csv;
        Ok(o)
    }

    pub fn with_ok(mut self, ok: bool) -> Self {
        self.ok = ok;
        self
    }
}

fn zero_based(i: usize, what: &str) -> Result<usize, CliError> {
    i.checked_sub(1)
        .ok_or_else(|| CliError::Usage(format!("{what} indices are 1-based")))
}

/// Grid file for grid families, descriptor for analytic ones.
pub fn make(desc: &FamilyDescriptor) -> Result<Output, CliError> {
    let loaded = desc.build()?;
    Ok(Output::raw(match loaded.grid_json() {
        Some(s) => s,
        None => serde_json::to_string_pretty(desc)? + "\n",
    }))
}

pub fn metric(
    name: &str,
    a: &str,
    b: &str,
    axis: Option<usize>,
    opts: &DinfOptions,
) -> Result<Output, CliError> {
    let a = load(a)?;
    let b = load(b)?;
    let axis = axis.map(|i| zero_based(i, "axis")).transpose()?;
    let kernel = |which| kernel_metric(a.as_copula(), b.as_copula(), which, axis);
    let report = match name {
        "dinf" => serde_json::to_value(d_inf(a.as_copula(), b.as_copula(), opts)?)?,
        "d1" => serde_json::to_value(kernel(KernelMetric::D1)?)?,
        "d2" => serde_json::to_value(kernel(KernelMetric::D2)?)?,
        "dinfk" => serde_json::to_value(kernel(KernelMetric::DInf)?)?,
        "tv" => serde_json::to_value(tv(a.grid("tv")?, b.grid("tv")?)?)?,
        "kl" => serde_json::to_value(kl(a.grid("kl")?, b.grid("kl")?)?)?,
        "chain" => serde_json::to_value(metric_chain_check(a.grid("chain")?, b.grid("chain")?)?)?,
        other => return Err(CliError::Usage(format!("unknown metric '{other}'"))),
    };
    Ok(Output {
        body: Body::Report(report),
        default_format: Format::Json,
        ok: true,
    })
}

/// `K(t, [0,u])` given the conditioning axes (default: the last one).
pub fn kernel(c: &str, t: &[f64], u: &[f64], cond: Option<&[usize]>) -> Result<Output, CliError> {
    let c = load(c)?;
    let value = match &c {
        Loaded::Grid(g) => {
            let cond: Vec<usize> = match cond {
                Some(list) => list
                    .iter()
                    .map(|&i| zero_based(i, "axis"))
                    .collect::<Result<_, _>>()?,
                None => vec![g.dim() - 1],
            };
            kernel_cdf(g, t, u, &cond)?
        }
        Loaded::Analytic(a) => {
            if cond.is_some_and(|x| x != [a.dim()]) {
                return Err(CliError::Usage(
                    "analytic kernels condition on the last axis only".into(),
                ));
            }
            if t.len() != 1 {
                return Err(CliError::Usage("expected one conditioning value".into()));
            }
            a.kernel(t[0], u)
                .ok_or_else(|| pvcopula::CopulaError::KernelUnavailable(a.name()))?
        }
    };
    Output::report(&json!({ "t": t, "u": u, "value": value }))
}

/// Conditional copula on a slab of the last axis, chosen by 1-based index or by a value in it.
pub fn conditional(c: &str, slab: Option<usize>, t: Option<f64>) -> Result<Output, CliError> {
    let c = load(c)?;
    let g = c.grid("conditional")?;
    let i = match (slab, t) {
        (Some(i), None) => zero_based(i, "slab")?,
        (None, Some(t)) => g.axis(g.dim() - 1).cell_of(t),
        _ => return Err(CliError::Usage("give exactly one of --slab and --t".into())),
    };
    Ok(Output::raw(grid_to_json(&conditional_copula(g, i)?)))
}

/// Partial copula; analytic inputs with closed-form conditionals are discretized at `res`.
pub fn partial(c: &str, res: Option<&[usize]>) -> Result<Output, CliError> {
    let g = match load(c)? {
        Loaded::Grid(g) => partial_copula(&g)?,
        Loaded::Analytic(a) => {
            let res =
                res.ok_or_else(|| CliError::Usage("analytic partial copulas need --res".into()))?;
            discretize(&pvc3_analytic(&a)?.partial, res)?
        }
    };
    Ok(Output::raw(grid_to_json(&g)))
}

pub fn simplified(c: &str, tol: f64) -> Result<Output, CliError> {
    let c = load(c)?;
    let (delta, error) = simplifiedness_delta(c.grid("simplified")?)?;
    Output::report(&json!({
        "delta": delta,
        "error": error,
        "tolerance": tol,
        "simplified": delta <= tol + error,
    }))
}

pub fn jfun(a: &str, b: &str) -> Result<Output, CliError> {
    let a = load(a)?;
    let b = load(b)?;
    let (j, error) = j_functional(a.grid("jfun")?, b.grid("jfun")?)?;
    Output::report(&json!({ "j": j, "error": error }))
}

/// Options of the `pvc` command.
#[derive(Clone, Debug, Default)]
pub struct PvcArgs {
    pub dvine: bool,
    /// 1-based variable order of the D-vine path.
    pub order: Option<Vec<usize>>,
    pub report: bool,
    /// Evaluate `psi(C)` at these points instead of writing it out.
    pub at: Vec<Vec<f64>>,
    /// Discretize the result onto uniform axes.
    pub res: Option<Vec<usize>>,
}

pub fn pvc(c: &str, args: &PvcArgs, opts: &DinfOptions) -> Result<Output, CliError> {
    let c = load(c)?;
    match c {
        Loaded::Grid(g) => {
            if args.report {
                return Output::report(&pvc_distance_report(&g, args.dvine)?);
            }
            let r = match &args.order {
                Some(o) => {
                    let o: Vec<usize> = o
                        .iter()
                        .map(|&i| zero_based(i, "order"))
                        .collect::<Result<_, _>>()?;
                    pvc_dvine_with_order(&g, &o)?
                }
                None if args.dvine || g.dim() > 3 => pvc_dvine(&g)?,
                None => pvc3(&g)?,
            };
            let psi = match &args.res {
                Some(res) => r.discretize(res)?,
                None => r.psi,
            };
            if !args.at.is_empty() {
                let values: Vec<f64> = args.at.iter().map(|p| psi.eval(p)).collect();
                return Output::report(
                    &json!({ "fingerprint": r.fingerprint, "at": args.at, "values": values }),
                );
            }
            Ok(Output::raw(grid_to_json(&psi)))
        }
        Loaded::Analytic(a) => {
            if args.report {
                return Output::report(&pvc_distance_report_analytic(&a, opts)?);
            }
            let r = pvc3_analytic(&a)?;
            if !args.at.is_empty() {
                let values: Vec<f64> = args.at.iter().map(|p| r.psi.eval(p)).collect();
                return Output::report(
                    &json!({ "copula": a.name(), "at": args.at, "values": values }),
                );
            }
            let res = args
                .res
                .as_deref()
                .ok_or_else(|| CliError::Usage("analytic inputs need --at or --res".into()))?;
            Ok(Output::raw(grid_to_json(&discretize(&r.psi, res)?)))
        }
    }
}

/// `n` draws as CSV.
pub fn sample(c: &str, n: usize, seed: u64) -> Result<Output, CliError> {
    let c = load(c)?;
    let pts = c.grid("sample")?.sample(n, &mut rng(seed));
    Ok(Output::raw(samples_to_csv(&pts)?))
}

/// Empirical copula of a CSV sample.
pub fn empirical(input: &Path) -> Result<Output, CliError> {
    let text = std::fs::read_to_string(input)?;
    let pts = samples_from_csv(&text)?;
    Ok(Output::raw(grid_to_json(&empirical_copula(&pts)?)))
}
