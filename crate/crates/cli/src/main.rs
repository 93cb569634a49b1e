use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use privacy_funnel::lpapprox::{LpOptions, Problem, DEFAULT_CAP};
use privacy_funnel::mechanisms::DEFAULT_MAX_INDEX;
use privacy_funnel::oracle::Criterion;
use privacy_funnel::LogBase;
use privacy_funnel_cli::commands::{self, MechanismArgs, MechanismKind, OracleArgs};
use privacy_funnel_cli::instance::{Family, Instance};
use privacy_funnel_cli::sweep::{self, parse_series, Range, SweepSpec, SweepVar};
use privacy_funnel_cli::{validation, CliError, Output, Result};

/// Privacy-utility trade-offs for finite alphabets.
#[derive(Parser)]
#[command(name = "pfunnel", version)]
struct Cli {
    /// Unit of reported information quantities [default: instance base, else bits].
    #[arg(long, global = true)]
    base: Option<LogBase>,

    /// Also write `<command>.json` and `<command>.csv` into this directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SourceArgs {
    /// Instance file (.json or .csv).
    #[arg(long, conflicts_with = "family")]
    instance: Option<PathBuf>,

    /// Built-in family instead of a file.
    #[arg(long)]
    family: Option<Family>,

    /// Family parameter.
    #[arg(long)]
    theta: Option<f64>,
}

impl SourceArgs {
    fn load(&self) -> Result<Instance> {
        match (&self.instance, self.family) {
            (Some(p), None) => Instance::load(p),
            (None, Some(f)) => {
                let theta = self.theta.ok_or_else(|| validation("--family needs --theta"))?;
                Instance::family(f, theta)
            }
            _ => Err(validation("give either --instance FILE or --family with --theta")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Entropies, labels and leakage-matrix geometry.
    Info {
        #[command(flatten)]
        source: SourceArgs,
        /// Write the instance back out (.json or .csv).
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Closed-form bounds at one budget.
    Bounds {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
    /// Build a functional-representation mechanism.
    Mechanism {
        kind: MechanismKind,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Required for sfrl and esfrl.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2000)]
        draws: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_INDEX)]
        max_index: usize,
    },
    /// Linear-program approximation: g0, gwl or gl.
    Lp {
        problem: Option<LpProblem>,
        #[command(flatten)]
        source: SourceArgs,
        /// Alternative to the positional problem: perfect, wl or l.
        #[arg(long)]
        criterion: Option<Criterion>,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Largest number of combinations enumerated before the greedy fallback.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Exhaustive grid search on a small instance.
    Oracle {
        #[command(flatten)]
        source: SourceArgs,
        /// Privacy criterion: perfect, mi, wl or l.
        #[arg(long, default_value = "perfect")]
        criterion: Criterion,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Lattice resolution; 1 / grid must be an integer.
        #[arg(long)]
        grid: f64,
        /// Largest |U| searched [default: |Y|].
        #[arg(long)]
        card: Option<usize>,
        /// Let U depend on (X, Y) instead of Y alone.
        #[arg(long)]
        joint_access: bool,
        /// Refuse searches costing more objective evaluations than this.
        #[arg(long)]
        max_evaluations: Option<u64>,
    },
    /// Sweep eps or theta and emit long-format CSV.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        /// Swept variable: eps or theta.
        #[arg(long)]
        var: SweepVar,
        /// lo:hi:steps
        #[arg(long)]
        range: Range,
        /// Comma-separated series names.
        #[arg(long)]
        series: String,
        /// Budget held fixed while sweeping theta.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Largest number of combinations enumerated before the greedy fallback.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: usize,
    },
    /// Info, bounds, LP results and the FRL mechanism in one document.
    Report {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
    },
}

#[derive(Clone, Copy)]
struct LpProblem(Problem);

impl std::str::FromStr for LpProblem {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g0" => Ok(LpProblem(Problem::G0)),
            "gwl" => Ok(LpProblem(Problem::Wl)),
            "gl" => Ok(LpProblem(Problem::L)),
            _ => Err(validation(format!("unknown LP '{s}', expected g0, gwl or gl"))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.display().to_string(), source: e }
}

fn emit(out: &Output, dir: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&out.json)?;
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        let json_path = dir.join(format!("{}.json", out.name));
        std::fs::write(&json_path, &text).map_err(io_err(&json_path))?;
        if let Some(t) = &out.table {
            let csv_path = dir.join(format!("{}.csv", out.name));
            t.write_csv(File::create(&csv_path).map_err(io_err(&csv_path))?)?;
        }
    }
    let mut stdout = io::stdout().lock();
    writeln!(stdout, "{text}").map_err(io_err(Path::new("stdout")))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let resolve = |inst: &Instance| cli.base.or(inst.base).unwrap_or_default();
    let dir = cli.out.as_deref();
    match cli.command {
        Command::Info { source, export } => {
            let inst = source.load()?;
            if let Some(p) = export {
                inst.export(&p)?;
            }
            emit(&commands::info(&inst, resolve(&inst))?, dir)
        }
        Command::Bounds { source, eps } => {
            let inst = source.load()?;
            emit(&commands::bounds(&inst, eps, resolve(&inst))?, dir)
        }
        Command::Mechanism { kind, source, eps, seed, draws, max_index } => {
            let inst = source.load()?;
            let args = MechanismArgs { kind, eps, seed, draws, max_index };
            emit(&commands::mechanism(&inst, &args, resolve(&inst))?, dir)
        }
        Command::Lp { problem, source, criterion, eps, cap } => {
            let problem = match (problem, criterion) {
                (Some(p), None) => p.0,
                (None, Some(Criterion::Perfect)) => Problem::G0,
                (None, Some(Criterion::Wl)) => Problem::Wl,
                (None, Some(Criterion::L)) => Problem::L,
                (None, Some(Criterion::Mi)) => return Err(validation("no LP for the mutual-information criterion")),
                (None, None) => return Err(validation("name the LP (g0, gwl, gl) or pass --criterion")),
                (Some(_), Some(_)) => return Err(validation("give the LP either positionally or via --criterion")),
            };
            let inst = source.load()?;
            let opts = LpOptions { cap, ..LpOptions::default() };
            emit(&commands::lp(&inst, problem, eps, resolve(&inst), &opts)?, dir)
        }
        Command::Oracle { source, criterion, eps, grid, card, joint_access, max_evaluations } => {
            let inst = source.load()?;
            let args = OracleArgs { criterion, eps, resolution: grid, card, joint_access, max_evaluations };
            emit(&commands::oracle(&inst, &args, resolve(&inst))?, dir)
        }
        Command::Sweep { source, var, range, series, eps, cap } => {
            let series = parse_series(&series)?;
            let (src, base) = match (&source.instance, source.family) {
                (Some(p), None) => {
                    let inst = Instance::load(p)?;
                    let b = resolve(&inst);
                    (sweep::Source::Fixed(inst), b)
                }
                (None, Some(f)) => (sweep::Source::Family(f), cli.base.unwrap_or_default()),
                _ => return Err(validation("give either --instance FILE or --family")),
            };
            let spec = SweepSpec { var, range, series, eps, theta: source.theta };
            let opts = LpOptions { cap, ..LpOptions::default() };
            match dir {
                Some(d) => {
                    std::fs::create_dir_all(d).map_err(io_err(d))?;
                    let csv_path = d.join("sweep.csv");
                    let f = File::create(&csv_path).map_err(io_err(&csv_path))?;
                    let rows = sweep::run(&src, &spec, base, &opts, BufWriter::new(f))?;
                    let doc = serde_json::json!({
                        "var": spec.var,
                        "range": spec.range,
                        "series": spec.series,
                        "eps": spec.eps,
                        "theta": spec.theta,
                        "base": base,
                        "rows": rows,
                    });
                    let json_path = d.join("sweep.json");
                    std::fs::write(&json_path, serde_json::to_string_pretty(&doc)?).map_err(io_err(&json_path))
                }
                None => sweep::run(&src, &spec, base, &opts, io::stdout().lock()).map(|_| ()),
            }
        }
        Command::Report { source, eps } => {
            let inst = source.load()?;
            emit(&commands::report(&inst, eps, resolve(&inst), &LpOptions::default())?, dir)
        }
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
