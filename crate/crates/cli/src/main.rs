use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hopcast::overlay::Pair;
use hopcast::ratecast;
use hopcast::sim::{self, ReportFormat, Scenario};

#[derive(Parser)]
#[command(
    name = "hopcast",
    version,
    about = "Broadcast-rate solver and topology-hopping simulator"
)]
struct Cli {
    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the scenario's `output`. Without either,
    /// results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one configuration with the primal-dual solver and the LP oracle.
    Rate {
        scenario: PathBuf,
        /// Pairs in use besides the pinned ones, e.g. `0-1,1-2`; defaults
        /// to the scenario's initial configuration.
        #[arg(long)]
        pairs: Option<String>,
        /// Also write the solver trace (`trace.csv`), one row per this many
        /// iterations. Needs an output directory.
        #[arg(long)]
        trace_every: Option<usize>,
    },
    /// Topology hopping over converged rates.
    Hop {
        #[command(flatten)]
        run: RunArgs,
        /// Appends every hop as a JSON line.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Random neighbor swapping with an even capacity split.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Target and noisy stationary distributions with their bounds.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Also hop for the scenario's horizon and report the occupancy.
        #[arg(long)]
        empirical: bool,
    },
    /// List every degree-feasible configuration with its exact rate.
    Enumerate { scenario: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    hops: Option<usize>,
}

fn load(path: &Path, cli: &Cli) -> anyhow::Result<(Scenario, PathBuf)> {
    let (mut s, dir) =
        Scenario::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    Ok((s, dir))
}

fn load_run(a: &RunArgs, cli: &Cli) -> anyhow::Result<(Scenario, PathBuf)> {
    let (mut s, dir) = load(&a.scenario, cli)?;
    if let Some(beta) = a.beta {
        s.hopper.beta = beta;
    }
    if let Some(hops) = a.hops {
        s.hops = hops;
        s.burn_in = s.burn_in.min(hops);
    }
    Ok((s, dir))
}

fn parse_pairs(text: &str) -> anyhow::Result<Vec<Pair>> {
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let Some((a, b)) = t.trim().split_once('-') else {
                bail!("bad pair {t:?}, expected a-b")
            };
            Ok(Pair::new(a.trim().parse()?, b.trim().parse()?))
        })
        .collect()
}

fn out_dir(cli: &Cli, s: &Scenario, dir: &Path) -> Option<PathBuf> {
    cli.out.clone().or_else(|| {
        s.output.as_ref().map(|p| {
            if p.is_relative() {
                dir.join(p)
            } else {
                p.clone()
            }
        })
    })
}

fn write_files(dir: &Path, files: &[(&str, String)]) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        say(&format!("{}\n", path.display()))?;
    }
    Ok(())
}

/// Writes to stdout; a closed pipe ends output quietly.
fn say(text: &str) -> anyhow::Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn json<T: serde::Serialize>(v: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let fmt = match cli.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    match &cli.cmd {
        Cmd::Rate {
            scenario,
            pairs,
            trace_every,
        } => {
            let (mut s, dir) = load(scenario, cli)?;
            let out = out_dir(cli, &s, &dir);
            if trace_every.is_some() {
                if out.is_none() {
                    bail!("--trace-every needs --out or an output key");
                }
                s.solver.trace_every = *trace_every;
            }
            let pairs = pairs.as_deref().map(parse_pairs).transpose()?;
            let mut r = sim::rate_scenario(&s, Some(&dir), pairs.as_deref())?;
            let trace = std::mem::take(&mut r.trace);
            let body = match cli.format {
                Format::Json => ("rate.json", json(&r)?),
                Format::Csv => (
                    "rate.csv",
                    format!(
                        "configuration,rate,converged,iterations,exact_rate,fullmesh_rate\n\"{}\",{},{},{},{},{}\n",
                        r.configuration, r.rate, r.converged, r.iterations, r.exact_rate, r.fullmesh_rate
                    ),
                ),
            };
            match out {
                Some(out) if trace_every.is_some() => {
                    write_files(&out, &[body, ("trace.csv", ratecast::trace_csv(&trace))])?
                }
                Some(out) => write_files(&out, &[body])?,
                None => say(&body.1)?,
            }
        }
        Cmd::Hop { run, log } => {
            let (s, dir) = load_run(run, cli)?;
            let report = match log {
                Some(path) => {
                    let mut w = BufWriter::new(File::create(path)?);
                    let r = sim::run_scenario(&s, Some(&dir), Some(&mut w))?;
                    w.flush()?;
                    r
                }
                None => sim::run_scenario(&s, Some(&dir), None)?,
            };
            emit(cli, &s, &dir, &report, fmt)?;
        }
        Cmd::Baseline { run } => {
            let (s, dir) = load_run(run, cli)?;
            let report = sim::run_baseline(&s, Some(&dir))?;
            emit(cli, &s, &dir, &report, fmt)?;
        }
        Cmd::Analyze { run, empirical } => {
            let (s, dir) = load_run(run, cli)?;
            let a = sim::analyze_scenario(&s, Some(&dir), *empirical)?;
            match (out_dir(cli, &s, &dir), cli.format) {
                (Some(out), _) => write_files(
                    &out,
                    &[
                        ("distribution.csv", a.distribution_csv()?),
                        ("analysis.json", json(&a)?),
                    ],
                )?,
                (None, Format::Json) => say(&json(&a)?)?,
                (None, Format::Csv) => say(&a.distribution_csv()?)?,
            }
        }
        Cmd::Enumerate { scenario } => {
            let (s, dir) = load(scenario, cli)?;
            let rows = sim::enumerate_scenario(&s, Some(&dir))?;
            let body = match cli.format {
                Format::Json => ("configurations.json", json(&rows)?),
                Format::Csv => ("configurations.csv", sim::configurations_csv(&rows)),
            };
            match out_dir(cli, &s, &dir) {
                Some(out) => write_files(&out, &[body])?,
                None => say(&body.1)?,
            }
        }
    }
    Ok(())
}

fn emit(
    cli: &Cli,
    s: &Scenario,
    dir: &Path,
    r: &sim::RunReport,
    fmt: ReportFormat,
) -> anyhow::Result<()> {
    match out_dir(cli, s, dir) {
        Some(out) => {
            for path in sim::emit_report(r, fmt, &out)? {
                say(&format!("{}\n", path.display()))?;
            }
        }
        None => match fmt {
            ReportFormat::Json => say(&json(r)?)?,
            ReportFormat::Csv => say(&r.timeseries_csv())?,
        },
    }
    Ok(())
}

fn fail(kind: &str, message: String) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim_end().to_owned()),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail("run", format!("{e:#}")),
    }
}
