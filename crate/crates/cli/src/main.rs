use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use shapelab::grid::Grid;
use shapelab::io::{field_header, read_config, read_field, render_heatmap};
use shapelab::run::{self, OracleCase, PointSelection};
use shapelab::{Error, Result};

#[derive(Parser)]
#[command(name = "shapelab", version, about = "Penalized spectral shape optimization and free-boundary diagnostics")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lowest eigenpairs on the whole box.
    Eigen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full optimization run.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Boundary-point diagnostics of a finished run.
    Diagnose {
        #[arg(long)]
        run: PathBuf,
        /// Number of boundary points, spread along the boundary.
        #[arg(long, conflicts_with = "point")]
        points: Option<usize>,
        /// Boundary point nearest to X,Y.
        #[arg(long, value_parser = parse_point)]
        point: Option<[f64; 2]>,
    },
    /// Quasi-minimality and perimeter audits of a finished run.
    Audit {
        #[arg(long)]
        run: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Closed-form reference values.
    Oracle {
        #[arg(long, value_enum)]
        case: Case,
        #[arg(long, default_value_t = 500.0)]
        lambda: f64,
    },
    /// Grayscale PGM of one component of a field file.
    Render {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        component: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Case {
    Square,
    Rect,
    Disk,
}

fn parse_point(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.as_slice() {
        [x, y] => Ok([
            x.trim().parse().map_err(|e| format!("bad x: {e}"))?,
            y.trim().parse().map_err(|e| format!("bad y: {e}"))?,
        ]),
        _ => Err(format!("expected X,Y, got `{s}`")),
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Eigen { config, out } => {
            let cfg = read_config(&config)?;
            let report = run::eigen_run(&cfg, &out)?;
            if let Some(l) = report.get("basis").and_then(|b| b.get("lambdas")) {
                println!("lambdas: {}", l.render_plain().trim());
            }
        }
        Command::Optimize { config, out } => {
            let cfg = read_config(&config)?;
            let (report, _) = run::optimize_run(&cfg, &out)?;
            let num = |k: &str| report.get(k).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
            println!("objective {:.6} volume {:.6}", num("objective"), num("volume"));
            eprintln!("wrote {}", out.display());
        }
        Command::Diagnose { run: dir, points, point } => {
            let sel = match (points, point) {
                (_, Some(p)) => PointSelection::Nearest(p),
                (Some(n), None) => PointSelection::Spread(n),
                (None, None) => PointSelection::Default,
            };
            let report = run::diagnose_run(&dir, sel)?;
            if let Some(s) = report.get("summary") {
                println!("{}", s.render_plain().trim());
            }
        }
        Command::Audit { run: dir, trials } => {
            let report = run::audit_run(&dir, trials)?;
            if let Some(q) = report.get("quasimin").and_then(|q| q.get("min_margin")) {
                println!("min margin: {}", q.render_plain().trim());
            }
        }
        Command::Oracle { case, lambda } => {
            let case = match case {
                Case::Square => OracleCase::Square,
                Case::Rect => OracleCase::Rect,
                Case::Disk => OracleCase::Disk,
            };
            print!("{}", run::oracle_report(case, lambda)?.render_plain());
        }
        Command::Render { field, out, component } => {
            let (nx, ny, _) = field_header(&field)?;
            if nx < 5 || ny < 2 {
                return Err(Error::BadParams(format!("field of {nx}×{ny} nodes is too small")));
            }
            let grid = Grid::new([0.0, 0.0], [(nx - 1) as f64, (ny - 1) as f64], nx - 1)?;
            let f = read_field(&field, &grid)?;
            render_heatmap(&f, component, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
