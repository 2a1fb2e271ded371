use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use terrace_cli::commands::DEFAULT_PROBE_SAMPLES;
use terrace_cli::problem::{build_transform, TransformSpec};
use terrace_cli::{
    cmd_classify, cmd_landscape, cmd_lambda, cmd_solve, cmd_verify, read_point, CliError, CliResult,
    Grid, LoadedProblem, Overrides,
};
use terrace_core::verify::ClaimTag;
use terrace_core::LambdaRule;

#[derive(Parser)]
#[command(name = "terrace", version, about = "Exact l0-regularized minimization by support enumeration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    #[arg(long)]
    problem: PathBuf,
    /// Overrides the problem's lambda.
    #[arg(long)]
    lambda: Option<f64>,
    /// Overrides the problem's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the enumeration pattern budget.
    #[arg(long)]
    budget_max_patterns: Option<u64>,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Global minimizer of f = g + lambda ||Mx||_0.
    Solve(Common),
    /// Interval of lambda for a selection rule.
    Lambda {
        #[command(flatten)]
        common: Common,
        /// max-sparsity, level, level-one, preserve, coupled-max, coupled-level
        #[arg(long)]
        rule: String,
        #[arg(long)]
        level: Option<usize>,
    },
    /// Sparsity level, support and radii of a point.
    Classify {
        /// Comma-separated values, or a file holding them.
        #[arg(long)]
        point: String,
        /// Takes the transform from this problem file.
        #[arg(long, conflicts_with = "transform")]
        problem: Option<PathBuf>,
        /// CSV file with M (default: identity).
        #[arg(long)]
        transform: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an optimality claim at a point.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        claim: String,
        /// `x1,x2,...`, or `x...;y...` for coupled models, or a file.
        #[arg(long)]
        point: String,
        #[arg(long, default_value_t = DEFAULT_PROBE_SAMPLES)]
        samples: usize,
    },
    /// CSV grid `x1,x2,g,f,level` of a planar problem.
    Landscape {
        #[command(flatten)]
        common: Common,
        /// xmin,xmax,ymin,ymax,steps
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
    },
}

fn load(common: &Common, level: Option<usize>) -> CliResult<LoadedProblem> {
    let mut p = LoadedProblem::from_path(&common.problem)?;
    p.apply(&Overrides {
        lambda: common.lambda,
        level,
        seed: common.seed,
        max_patterns: common.budget_max_patterns,
    })?;
    Ok(p)
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve(common) => {
            let p = load(&common, None)?;
            emit(common.out.as_deref(), &cmd_solve(&p)?.to_json())
        }
        Command::Lambda { common, rule, level } => {
            let rule: LambdaRule = rule.parse().map_err(usage)?;
            let p = load(&common, level)?;
            emit(common.out.as_deref(), &cmd_lambda(&p, rule)?.to_json())
        }
        Command::Classify {
            point,
            problem,
            transform,
            out,
        } => {
            let x = read_point(&point)?;
            if x.y.is_some() {
                return Err(CliError::Usage("classify takes x only".into()));
            }
            let m = x.x.len();
            let loaded = problem.as_deref().map(LoadedProblem::from_path).transpose()?;
            let t = match (&loaded, transform) {
                (Some(p), _) => p.transform.clone(),
                (None, Some(csv)) => build_transform(
                    &TransformSpec::Matrix(terrace_cli::problem::MatrixSpec::Csv { csv }),
                    m,
                    Path::new(""),
                )?,
                (None, None) => build_transform(&TransformSpec::default(), m, Path::new(""))?,
            };
            emit(out.as_deref(), &cmd_classify(x.x.as_slice(), &t, loaded.as_ref())?.to_json())
        }
        Command::Verify {
            common,
            claim,
            point,
            samples,
        } => {
            let claim: ClaimTag = claim.parse().map_err(usage)?;
            let p = load(&common, None)?;
            let x = read_point(&point)?;
            emit(common.out.as_deref(), &cmd_verify(&p, claim, &x, samples)?.to_json())
        }
        Command::Landscape { common, grid } => {
            let grid: Grid = grid.parse()?;
            let p = load(&common, None)?;
            emit(common.out.as_deref(), &cmd_landscape(&p, &grid)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("terrace: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
