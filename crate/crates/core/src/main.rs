use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use irs_parafac::analysis::{crb_closed_form, DesignReport};
use irs_parafac::harness::{
    emit_report, plan_experiment, repro_spec, run_experiment_with, ExperimentSpec, ReportFormat,
    RunOptions, FIGURE_IDS,
};
use irs_parafac::Error;

#[derive(Parser)]
#[command(name = "irs-parafac", version, about = "Tensor channel estimation for IRS-assisted MIMO links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML spec file.
    Run {
        spec: PathBuf,
        #[command(flatten)]
        opts: RunArgs,
    },
    /// Print the design conditions for every sweep point of a spec.
    Check {
        spec: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Print the closed-form bound for orthogonal designs.
    Crb {
        m: usize,
        l: usize,
        n: usize,
        k: usize,
        t: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma2: f64,
    },
    /// Run a built-in preset.
    Repro {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(FIGURE_IDS))]
        figure: String,
        #[command(flatten)]
        opts: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Monte Carlo runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to IRS_PARAFAC_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run cells whose design conditions fail.
    #[arg(long)]
    force: bool,
    #[arg(long, default_value = "csv", value_parser = ["csv", "toml"])]
    format: String,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InfeasibleDesign(_) | Error::RankDeficientDesign => 1,
        Error::Io(_) | Error::Parse(_) => 2,
        _ => 64,
    }
}

fn load_spec(path: &PathBuf) -> irs_parafac::Result<ExperimentSpec> {
    ExperimentSpec::from_toml(&std::fs::read_to_string(path)?)
}

fn execute(mut spec: ExperimentSpec, args: RunArgs) -> irs_parafac::Result<()> {
    if let Some(r) = args.runs {
        spec.runs = r;
    }
    if let Some(s) = args.seed {
        spec.master_seed = s;
    }
    let out = args.out.or_else(|| spec.output_path.clone());
    let report = run_experiment_with(
        &spec,
        &RunOptions {
            threads: args.threads,
            force: args.force,
        },
    )?;
    for s in &report.skipped {
        eprintln!("skipped {s}");
    }
    let written = emit_report(&report, out.as_deref(), args.format.parse::<ReportFormat>()?)?;
    for f in written {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn print_design(key: &str, d: &DesignReport) {
    println!("[{key}] M={} L={} N={} K={} T={} rank_h={} rank_g={}", d.dims.m, d.dims.l, d.dims.n, d.dims.k, d.dims.t, d.rank_h, d.rank_g);
    for c in &d.conditions {
        let mark = if c.satisfied { "ok" } else { "FAIL" };
        println!("  {:<22} {:>6} >= {:<6} {:<4} margin {}", c.name, c.lhs, c.rhs, mark, c.margin());
    }
}

fn check(spec: &ExperimentSpec, force: bool) -> irs_parafac::Result<bool> {
    let lenient = ExperimentSpec {
        skip_infeasible: true,
        ..spec.clone()
    };
    let mut feasible = true;
    for p in plan_experiment(&lenient, false)? {
        print_design(&p.sweep_key, &p.design);
        let runnable: Vec<&str> = p.estimators.iter().map(|k| k.name()).collect();
        println!("  runnable: {}", runnable.join(" "));
        for (kind, why) in &p.skipped {
            println!("  infeasible: {kind}: {why}");
            feasible = false;
        }
    }
    Ok(feasible || force || spec.skip_infeasible)
}

fn dispatch(cli: Cli) -> irs_parafac::Result<u8> {
    match cli.command {
        Command::Run { spec, opts } => execute(load_spec(&spec)?, opts).map(|_| 0),
        Command::Repro { figure, opts } => execute(repro_spec(&figure, None)?, opts).map(|_| 0),
        Command::Check { spec, force } => Ok(if check(&load_spec(&spec)?, force)? { 0 } else { 1 }),
        Command::Crb { m, l, n, k, t, sigma2 } => {
            if m * l * n * k * t == 0 || !(sigma2 > 0.0) {
                return Err(Error::InvalidConfig("dimensions must be positive and sigma2 > 0".into()));
            }
            let r = crb_closed_form(sigma2, m, l, n, k, t);
            println!("sigma2,m,l,n,k,t,trace_bound,real_trace,imag_trace");
            println!(
                "{:.16e},{m},{l},{n},{k},{t},{:.16e},{:.16e},{:.16e}",
                sigma2, r.trace_bound, r.real_trace, r.imag_trace
            );
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
