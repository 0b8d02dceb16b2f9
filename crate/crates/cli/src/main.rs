use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use singlab_cli::config::{parse_config, Task};
use singlab_cli::run::run_to;

#[derive(Parser)]
#[command(name = "singlab", version, about = "Finite-element laboratory for boundary-singular Schrödinger operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// run configuration file (key = value lines)
    config: PathBuf,
    /// output directory (overrides `out_dir` from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, name = "T")]
    t_final: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// CG tolerance for the control solves
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    quad_order: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    grading: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// generic override, repeatable: --set key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Hardy-constant and weighted-inequality eigenvalue studies
    Hardy(CommonArgs),
    /// Dirichlet solves: Pohozaev identity, trace ratio, λ-continuation
    Elliptic(CommonArgs),
    /// Conservative wave integration and the multiplier identity
    Wave(CommonArgs),
    /// Crank–Nicolson Schrödinger integration and the Smult identity
    Schrodinger(CommonArgs),
    /// HUM boundary controls and observability scans
    Hum(CommonArgs),
    /// Semilinear ground states and the Pohozaev defect
    Semilinear(CommonArgs),
    /// Re-run a check across an h-list and emit one convergence CSV
    Study(CommonArgs),
}

impl Command {
    fn unpack(&self) -> (Task, &CommonArgs) {
        match self {
            Command::Hardy(a) => (Task::Hardy, a),
            Command::Elliptic(a) => (Task::Elliptic, a),
            Command::Wave(a) => (Task::Wave, a),
            Command::Schrodinger(a) => (Task::Schrodinger, a),
            Command::Hum(a) => (Task::Hum, a),
            Command::Semilinear(a) => (Task::Semilinear, a),
            Command::Study(a) => (Task::Study, a),
        }
    }
}

/// Replace (or append) `key = value` lines in the config text.
fn apply_overrides(text: &str, overrides: &[(String, String)]) -> String {
    let mut lines: Vec<String> = text.lines().map(|l| l.to_string()).collect();
    for (key, value) in overrides {
        let mut replaced = false;
        for line in lines.iter_mut() {
            let body = line.split('#').next().unwrap_or("");
            if let Some(eq) = body.find('=') {
                if body[..eq].trim() == key {
                    *line = format!("{key} = {value}");
                    replaced = true;
                    break;
                }
            }
        }
        if !replaced {
            lines.push(format!("{key} = {value}"));
        }
    }
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (task, args) = cli.command.unpack();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let mut overrides: Vec<(String, String)> = Vec::new();
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            overrides.push((k.to_string(), v));
        }
    };
    push("lambda", args.lambda.map(|v| v.to_string()));
    push("T", args.t_final.map(|v| v.to_string()));
    push("dt", args.dt.map(|v| v.to_string()));
    push("rho", args.rho.map(|v| v.to_string()));
    push("cg_tol", args.tol.map(|v| v.to_string()));
    push("quad_order", args.quad_order.map(|v| v.to_string()));
    push("delta", args.delta.map(|v| v.to_string()));
    push("grading", args.grading.map(|v| v.to_string()));
    push("seed", args.seed.map(|v| v.to_string()));
    for kv in &args.set {
        match kv.split_once('=') {
            Some((k, v)) => overrides.push((k.trim().to_string(), v.trim().to_string())),
            None => {
                eprintln!("error: --set expects KEY=VALUE, got `{kv}`");
                return ExitCode::from(2);
            }
        }
    }
    let text = apply_overrides(&text, &overrides);
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("invalid config ({} problem(s)):", errors.len());
            for e in errors {
                eprintln!("  - {e}");
            }
            return ExitCode::from(2);
        }
    };
    if cfg.task != task {
        eprintln!(
            "error: subcommand `{}` but config declares task `{}`",
            task.name(),
            cfg.task.name()
        );
        return ExitCode::from(2);
    }
    let out_dir = args.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    match run_to(&cfg, &out_dir) {
        Ok(artifacts) => {
            let all_pass = artifacts.summary["all_pass"].as_bool().unwrap_or(false);
            println!("{}", serde_json::to_string_pretty(&artifacts.summary).unwrap());
            if all_pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("one or more checks failed; see summary above");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("run failed: {e}");
            ExitCode::from(1)
        }
    }
}
