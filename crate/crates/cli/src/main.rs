use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pvcopula::metrics::DinfOptions;
use pvcopula_cli::commands::{self, Body, Output, PvcArgs};
use pvcopula_cli::family::FamilyDescriptor;
use pvcopula_cli::report::{emit, render, Format};
use pvcopula_cli::{experiments, verify, CliError, EXIT_FAIL, EXIT_USAGE};

#[derive(Parser)]
#[command(
    name = "pvcopula",
    version,
    about = "Partial vine copulas, copula metrics and verification cases"
)]
struct Cli {
    /// Base seed of the ChaCha20 generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Target certificate width of sup-norm searches.
    #[arg(long, global = true, default_value_t = 1e-8)]
    eps: f64,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args)]
struct MakeArgs {
    /// Family name, e.g. cube, efgm-seq, shuffle-d2, example54.
    family: String,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    k: Option<u64>,
    /// Uniform resolutions, comma separated.
    #[arg(long, value_delimiter = ',')]
    res: Option<Vec<usize>>,
    /// Operand of product-extend.
    #[arg(long)]
    base: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a family and write its grid file or descriptor.
    Make(MakeArgs),
    /// Distance between two copulas.
    Metric {
        /// dinf, d1, d2, dinfk, tv, kl or chain.
        #[arg(long)]
        name: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        /// Conditioning axis of kernel metrics (1-based).
        #[arg(long)]
        axis: Option<usize>,
    },
    /// Markov kernel K(t, [0,u]).
    Kernel {
        #[arg(long)]
        c: String,
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        u: Vec<f64>,
        /// Conditioning axes (1-based), default the last one.
        #[arg(long, value_delimiter = ',')]
        cond: Option<Vec<usize>>,
    },
    /// Conditional copula on one slab of the last axis.
    Conditional {
        #[arg(long)]
        c: String,
        /// 1-based slab index.
        #[arg(long)]
        slab: Option<usize>,
        /// A value of the last coordinate inside the slab.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Partial copula.
    Partial {
        #[arg(long)]
        c: String,
        #[arg(long, value_delimiter = ',')]
        res: Option<Vec<usize>>,
    },
    /// Simplifiedness index Delta.
    Simplified {
        #[arg(long)]
        c: String,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Integrated distance J between conditional copula fields.
    Jfun {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Partial vine copula.
    Pvc {
        #[arg(long)]
        c: String,
        /// Use the D-vine construction.
        #[arg(long)]
        dvine: bool,
        /// 1-based D-vine variable order, comma separated.
        #[arg(long, value_delimiter = ',')]
        order: Option<Vec<usize>>,
        /// Report d_inf, D_1 and Delta instead of writing psi.
        #[arg(long)]
        report: bool,
        /// Evaluate psi at a point (comma separated, repeatable).
        #[arg(long)]
        at: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        res: Option<Vec<usize>>,
    },
    /// Draw a sample from a grid copula as CSV.
    Sample {
        #[arg(long)]
        c: String,
        #[arg(long)]
        n: usize,
    },
    /// Empirical copula of a CSV sample.
    Empirical {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run a verification case, or `all`.
    Verify {
        /// Case id or `all`.
        case: Option<String>,
        /// List the case ids and exit.
        #[arg(long)]
        list: bool,
    },
    /// Distances of empirical cube copulas before and after psi.
    Discontinuity {
        #[arg(long, value_delimiter = ',', default_value = "10,100,1000,10000")]
        n: Vec<usize>,
    },
    /// Simplified copulas closer to the cube copula than its psi.
    Nonopt {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Delta(Cube) and J(D, Cube) over simplified D.
    Nowheredense,
    /// Convergence sequences: efgm-seq or d1-continuity.
    ConvergenceLab {
        #[arg(long)]
        mode: String,
        /// Largest m (efgm-seq) or n (d1-continuity).
        #[arg(long)]
        max: Option<usize>,
    },
}

fn parse_point(s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad coordinate '{x}'")))
        })
        .collect()
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let opts = DinfOptions {
        eps: cli.eps,
        ..DinfOptions::default()
    };
    match &cli.command {
        Command::Make(a) => commands::make(&FamilyDescriptor {
            family: a.family.clone(),
            dim: a.dim,
            m: a.m,
            k: a.k,
            res: a.res.clone(),
            base: a.base.clone(),
        }),
        Command::Metric { name, a, b, axis } => commands::metric(name, a, b, *axis, &opts),
        Command::Kernel { c, t, u, cond } => commands::kernel(c, t, u, cond.as_deref()),
        Command::Conditional { c, slab, t } => commands::conditional(c, *slab, *t),
        Command::Partial { c, res } => commands::partial(c, res.as_deref()),
        Command::Simplified { c, tol } => commands::simplified(c, *tol),
        Command::Jfun { a, b } => commands::jfun(a, b),
        Command::Pvc {
            c,
            dvine,
            order,
            report,
            at,
            res,
        } => {
            let args = PvcArgs {
                dvine: *dvine,
                order: order.clone(),
                report: *report,
                at: at
                    .iter()
                    .map(|s| parse_point(s))
                    .collect::<Result<_, _>>()?,
                res: res.clone(),
            };
            commands::pvc(c, &args, &opts)
        }
        Command::Sample { c, n } => commands::sample(c, *n, cli.seed),
        Command::Empirical { input } => commands::empirical(input),
        Command::Verify { case, list } => {
            let case = match case {
                Some(c) if !*list => c,
                _ => return Output::report(&verify::case_ids()),
            };
            let cases = verify::run(case, cli.seed, &opts)?;
            let ok = cases.iter().all(|c| c.pass);
            if case == "all" {
                Ok(Output::report(&cases)?.with_ok(ok))
            } else {
                Ok(Output::report(&cases[0])?.with_ok(ok))
            }
        }
        Command::Discontinuity { n } => {
            Output::table(&experiments::discontinuity(n, cli.seed, &opts)?)
        }
        Command::Nonopt { n } => {
            let r = experiments::nonopt(*n, cli.seed, &opts)?;
            Ok(Output::report(&r)?.with_ok(r.pass))
        }
        Command::Nowheredense => {
            let r = experiments::nowheredense(cli.seed)?;
            Ok(Output::report(&r)?.with_ok(r.pass))
        }
        Command::ConvergenceLab { mode, max } => match mode.as_str() {
            "efgm-seq" => Output::table(&experiments::efgm_seq(max.unwrap_or(6) as u32)?),
            "d1-continuity" => Output::table(&experiments::d1_continuity(max.unwrap_or(64))?),
            other => Err(CliError::BadMode(other.to_string())),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let result = run(&cli).and_then(|out| {
        let format = match cli.format {
            Some(FormatArg::Json) => Format::Json,
            Some(FormatArg::Csv) => Format::Csv,
            None => out.default_format,
        };
        let text = match &out.body {
            Body::Raw(s) => s.clone(),
            Body::Report(v) => render(v, format)?,
        };
        emit(&text, cli.out.as_deref())?;
        Ok(out.ok)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
