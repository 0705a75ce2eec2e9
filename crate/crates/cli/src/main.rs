use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarm_cli::report::{round_numbers, ErrorReport};
use swarm_cli::run::{run, CliError, Command, Options};
use swarm_cli::spec::load_spec;

/// Consensus and clustering analysis of linear multi-agent systems.
#[derive(Parser)]
#[command(name = "swarm", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Laplacian spectrum, shifted pencils, spanning tree and independent groups
    Analyze(Common),
    /// Motion class and the facts that decide it
    Classify(Common),
    /// Predicted agreeing neighbour pairs and clusters (needs a spanning tree)
    Cluster(Common),
    /// Integrate the system; writes CSV and reports the empirical clusters
    Simulate(Common),
    /// Compare the theoretical verdicts with a simulation
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// System spec (JSON)
    spec: PathBuf,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step
    #[arg(long)]
    dt: Option<f64>,
    /// Integration horizon
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Seed for the initial state when the spec gives none
    #[arg(long)]
    seed: Option<u64>,
    /// Also write an SVG phase plot (d = 2), next to the CSV
    #[arg(long)]
    svg: bool,
    /// Trajectory CSV path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Round numbers in the report to this many decimals
    #[arg(long)]
    round: Option<u32>,
    /// Relative tolerance of the cluster prediction test
    #[arg(long)]
    tol: Option<f64>,
}

fn fail(err: &CliError) -> ExitCode {
    let path = match err {
        CliError::Spec(e) => e.path().map(str::to_string),
        _ => None,
    };
    let report = ErrorReport {
        kind: err.kind().to_string(),
        message: err.to_string(),
        path,
    };
    let body = serde_json::json!({ "error": report });
    eprintln!("{body}");
    ExitCode::from(err.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("SWARM_LOG"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Analyze(a) => (Command::Analyze, a),
        Cmd::Classify(a) => (Command::Classify, a),
        Cmd::Cluster(a) => (Command::Cluster, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    let spec = match load_spec(&args.spec) {
        Ok(s) => s,
        Err(e) => return fail(&e.into()),
    };
    let opts = Options {
        dt: args.dt,
        t_end: args.t_end,
        seed: args.seed,
        svg: args.svg,
        csv: args.csv,
        tol: args.tol,
    };
    let mut report = match run(command, &spec, &args.spec, &opts) {
        Ok(v) => v,
        Err(e) => return fail(&e),
    };
    if let Some(digits) = args.round {
        round_numbers(&mut report, digits);
    }
    let text = serde_json::to_string_pretty(&report).expect("JSON values serialize") + "\n";
    let written = match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    };
    match written {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
