use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinscale::fss::{two_level_master, Extremum, ScalingVariable};
use spinscale::pipeline::{self, CollapseRequest, ConfigFile};
use spinscale::Error;

/// Spin-chain sweeps, finite-size-scaling collapses and oracle checks.
#[derive(Parser)]
#[command(name = "spinscale", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every sweep of a configuration file and write CSV + metadata.
    Sweep {
        config: PathBuf,
        /// Run only the sweep with this name.
        #[arg(long)]
        only: Option<String>,
    },
    /// Collapse series from one or more sweep CSVs and print the cost Q.
    Collapse {
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        #[arg(long, value_parser = parse_var)]
        x: ScalingVariable,
        #[arg(long)]
        y: String,
        #[arg(long, value_parser = parse_extremum)]
        normalize: Option<Extremum>,
        #[arg(long)]
        derivative: bool,
        /// Column locating the pseudo-critical point for kappa2 (default: y).
        #[arg(long)]
        order_column: Option<String>,
        /// Rescaled CSV (default: `<first csv>.<x>.<column>.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit 1 when Q is not below this value.
        #[arg(long)]
        max_q: Option<f64>,
    },
    /// Print the pseudo-critical field and gap of every series in a CSV.
    Locate {
        csv: PathBuf,
        #[arg(long)]
        column: String,
    },
    /// Run the built-in oracle checks.
    Validate,
    /// Print the two-level master curves f_M and f_Delta.
    Master {
        /// `start:stop:count`
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        kappa_range: (f64, f64, usize),
    },
}

fn parse_var(s: &str) -> Result<ScalingVariable, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_extremum(s: &str) -> Result<Extremum, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected start:stop:count, got `{s}`"));
    };
    let a: f64 = a.parse().map_err(|_| format!("bad start `{a}`"))?;
    let b: f64 = b.parse().map_err(|_| format!("bad stop `{b}`"))?;
    let n: usize = n.parse().map_err(|_| format!("bad count `{n}`"))?;
    if n < 2 || !(b > a) || !a.is_finite() || !b.is_finite() {
        return Err(format!("need count >= 2 and start < stop, got `{s}`"));
    }
    Ok((a, b, n))
}

enum Failure {
    Validation(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoConvergence { .. } | Error::OrthogonalityLoss { .. } | Error::SweepAborted { .. } => 3,
        _ => 2,
    }
}

fn sweep(config: &Path, only: Option<&str>) -> Result<(), Failure> {
    let file = ConfigFile::load(config)?;
    let selected: Vec<_> = file.sweep.iter().filter(|s| only.is_none_or(|n| s.name == n)).collect();
    if selected.is_empty() {
        return Err(Error::Config(format!("no sweep named `{}`", only.unwrap_or_default())).into());
    }
    for cfg in selected {
        let series = pipeline::run_sweep(cfg)?;
        let path = cfg.csv_path();
        pipeline::write_series(&path, &series)?;
        let failed = series.iter().flat_map(|s| s.flags()).filter(|f| f.contains("failed")).count();
        let rows: usize = series.iter().map(|s| s.len()).sum();
        println!("{}: {rows} rows ({failed} failed) -> {}", cfg.name, path.display());
        for req in &cfg.collapse {
            let c = pipeline::run_collapse(&series, req)?;
            let out = scaled_path(&path, req.x, &c.column);
            pipeline::write_scaled_file(&out, &c)?;
            println!("  Q({} vs {}) = {:.6e} -> {}", c.column, req.x.as_str(), c.result.q, out.display());
        }
    }
    Ok(())
}

fn scaled_path(csv: &Path, x: ScalingVariable, column: &str) -> PathBuf {
    let stem = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    csv.with_file_name(format!("{stem}.{}.{column}.csv", x.as_str()))
}

#[allow(clippy::too_many_arguments)]
fn collapse(
    csv: &[PathBuf],
    x: ScalingVariable,
    y: String,
    normalize: Option<Extremum>,
    derivative: bool,
    order_column: Option<String>,
    out: Option<PathBuf>,
    max_q: Option<f64>,
) -> Result<(), Failure> {
    let mut series = Vec::new();
    for p in csv {
        series.extend(pipeline::read_series(p)?);
    }
    let req = CollapseRequest {
        x,
        y,
        derivative,
        normalize,
        order_column,
    };
    let c = pipeline::run_collapse(&series, &req)?;
    let out = out.unwrap_or_else(|| scaled_path(&csv[0], x, &c.column));
    pipeline::write_scaled_file(&out, &c)?;
    for s in &c.result.per_series {
        println!("{}: {} points, mean square residual {:.6e}", s.label, s.included, s.mean_square);
    }
    println!("Q = {:.10e}", c.result.q);
    match max_q {
        Some(m) if !(c.result.q < m) => Err(Failure::Validation(format!("Q = {:e} is not below {m:e}", c.result.q))),
        _ => Ok(()),
    }
}

fn locate(csv: &Path, column: &str) -> Result<(), Failure> {
    let series = pipeline::read_series(csv)?;
    println!("L,coupling_name,coupling_value,field,gap");
    for (s, pc) in series.iter().zip(pipeline::locate(&series, column)?) {
        println!(
            "{},{},{:e},{:.12e},{:.12e}",
            s.tag.length, s.tag.coupling_name, s.tag.coupling_value, pc.field, pc.gap
        );
    }
    Ok(())
}

fn validate() -> Result<(), Failure> {
    let checks = pipeline::run_checks();
    for c in &checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Validation(format!("{failed} of {} checks failed", checks.len())));
    }
    Ok(())
}

fn master((a, b, n): (f64, f64, usize)) {
    println!("kappa,f_M,f_Delta");
    for i in 0..n {
        let k = a + (b - a) * i as f64 / (n - 1) as f64;
        let (m, g) = two_level_master(k);
        println!("{k:.12e},{m:.12e},{g:.12e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Sweep { config, only } => sweep(&config, only.as_deref()),
        Command::Collapse {
            csv,
            x,
            y,
            normalize,
            derivative,
            order_column,
            out,
            max_q,
        } => collapse(&csv, x, y, normalize, derivative, order_column, out, max_q),
        Command::Locate { csv, column } => locate(&csv, &column),
        Command::Validate => validate(),
        Command::Master { kappa_range } => {
            master(kappa_range);
            Ok(())
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
