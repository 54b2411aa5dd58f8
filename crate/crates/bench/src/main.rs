use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sparse_varpro_bench::{
    emit_csv, format_float, lq_phase_experiment, merge_settings, parse_config_file, run_benchmark,
    write_csv, BenchConfig, BenchError, BenchReport, PhaseConfig,
};

#[derive(Parser)]
#[command(name = "sparse-bench", version, about = "Sparse regression solver races and recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Race solvers on one problem and write per-iteration traces as CSV.
    Bench(RaceArgs),
    /// Run solvers on one problem and report final objectives and coefficients.
    Solve(RaceArgs),
    /// Count ℓq basis-pursuit recoveries over a range of sample sizes.
    LqPhase(PhaseArgs),
}

#[derive(Args)]
struct RaceArgs {
    /// Flat key=value file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// libsvm:<path>[,standardize] | synth:m=..,n=..,s=..[,noise=..] |
    /// graph:edges=<path>,source=..,sink=.. | random-graph:nodes=..,edges=.. |
    /// multitask:tasks=..,n=..,m=..
    #[arg(long)]
    problem: Option<String>,
    /// l1 | group[:size] | trace | lq:<q>
    #[arg(long)]
    reg: Option<String>,
    /// Use λ = λ_max / r.
    #[arg(long, value_name = "R", conflicts_with = "lambda")]
    lambda_frac: Option<String>,
    /// Absolute λ; 0 selects the constrained problem.
    #[arg(long)]
    lambda: Option<String>,
    /// Comma list of name[:key=value...]: noncvx-pro, ista, fista, cd, irls,
    /// altmin, quadvar, dr, cp.
    #[arg(long)]
    solvers: Option<String>,
    /// Wall-clock budget per solver in seconds.
    #[arg(long)]
    budget_s: Option<String>,
    /// Iteration cap per solver.
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output CSV path (standard output when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run solvers concurrently; timings then depend on machine load.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct PhaseArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Sparsity of the ground truth.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Comma list of sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "16,20,24,28,32,36,40,44,48")]
    m: Vec<usize>,
    /// Comma list of exponents in (2/3, 1].
    #[arg(long, value_delimiter = ',', default_value = "0.8,1")]
    q: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RaceArgs {
    fn settings(&self) -> Result<BTreeMap<String, String>, BenchError> {
        let base = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut cli = BTreeMap::new();
        let flags = [
            ("problem", &self.problem),
            ("reg", &self.reg),
            ("lambda-frac", &self.lambda_frac),
            ("lambda", &self.lambda),
            ("solvers", &self.solvers),
            ("budget-s", &self.budget_s),
            ("max-iters", &self.max_iters),
            ("seed", &self.seed),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cli.insert(key.to_string(), v.clone());
            }
        }
        if let Some(out) = &self.out {
            cli.insert("out".into(), out.display().to_string());
        }
        if self.parallel {
            cli.insert("parallel".into(), "true".into());
        }
        Ok(merge_settings(base, cli))
    }

    fn config(&self) -> Result<BenchConfig, BenchError> {
        BenchConfig::from_settings(&self.settings()?)
    }
}

fn summarize(report: &BenchReport) {
    eprintln!("lambda = {}", format_float(report.lambda));
    eprintln!("f* = {}", format_float(report.f_star));
    if let Some(f) = report.feasible_f_star {
        eprintln!("best feasible final objective = {}", format_float(f));
    }
    if let Some(d) = &report.disagreement {
        eprintln!(
            "warning: solvers disagree on the final objective ({} vs {}, relative gap {:.3e})",
            d.best, d.worst, d.relative_gap
        );
    }
    for (label, err) in &report.failures {
        eprintln!("warning: {label} failed: {err}");
    }
}

fn race(args: &RaceArgs) -> Result<BenchReport, BenchError> {
    let config = args.config()?;
    if config.parallel {
        eprintln!("warning: solvers run concurrently; timings depend on machine load");
    }
    run_benchmark(&config)
}

fn bench(args: &RaceArgs) -> Result<(), BenchError> {
    let report = race(args)?;
    summarize(&report);
    match &args.config()?.out {
        Some(path) => emit_csv(&report, path),
        None => write_csv(&report, std::io::stdout().lock()),
    }
}

fn solve(args: &RaceArgs) -> Result<(), BenchError> {
    let report = race(args)?;
    summarize(&report);
    let mut stdout = std::io::stdout().lock();
    for t in &report.traces {
        writeln!(
            stdout,
            "{}\tobjective={}\titerations={}",
            t.solver,
            format_float(t.final_objective()),
            t.iterations()
        )?;
    }
    if let Some(path) = &args.config()?.out {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["solver", "index", "value"])?;
        for t in &report.traces {
            for (i, b) in t.beta.iter().enumerate() {
                w.write_record([t.solver.clone(), i.to_string(), format_float(*b)])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn lq_phase(args: &PhaseArgs) -> Result<(), BenchError> {
    let mut config = PhaseConfig::new(args.n, args.k, args.m.clone(), args.q.clone());
    config.trials = args.trials;
    config.restarts = args.restarts;
    config.seed = args.seed;
    let table = lq_phase_experiment(&config)?;
    match &args.out {
        Some(path) => table.write_csv(std::fs::File::create(path)?),
        None => table.write_csv(std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Solve(a) => solve(a),
        Command::LqPhase(a) => lq_phase(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
