//! `hvz`: batch front end for essential-spectrum and Fredholm computations.
//!
//! Exit codes: 0 all tasks pass, 1 a task failed, 2 the input could not be
//! read or parsed, 3 numerics were inconclusive, 4 internal error.

mod run;
mod tasks;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hvz_core::algebra::Verdict;
use hvz_core::lattice::generate_semilattice;
use hvz_core::model::{AngularProfile, AsymptoticFunction};
use hvz_core::problem::{IntRow, ProbeExpectation, ProbeFunction, ProblemFile, TaskSpec};
use hvz_core::report;

use crate::tasks::{Outcome, Status};

#[derive(Parser)]
#[command(name = "hvz", version, about = "Essential spectra and Fredholm checks via limit operators")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Output format for tables written to stdout or the output directory.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Seed for the randomized parts of the eigensolvers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task of a problem file and write reports.
    Run {
        problem: PathBuf,
        /// Output directory.
        #[arg(long, env = "HVZ_OUT_DIR", default_value = "hvz-out")]
        out: PathBuf,
        /// Override `n` of lattice-check tasks.
        #[arg(long)]
        n: Option<usize>,
        /// Override `d` of lattice-check tasks.
        #[arg(long)]
        d: Option<usize>,
    },
    /// Semilattice generation and checks.
    Lattice {
        #[command(subcommand)]
        command: LatticeCommand,
    },
    /// Strata of directions at infinity for the family of a problem.
    Strata { problem: PathBuf },
    /// Limit operator along a direction.
    Tau {
        problem: PathBuf,
        /// Comma-separated integer direction, e.g. `1,0`.
        #[arg(long, allow_hyphen_values = true)]
        direction: String,
    },
    /// Lowest Dirichlet eigenvalues of the full Hamiltonian.
    Spectrum {
        problem: PathBuf,
        /// Grid spacing.
        #[arg(long)]
        h: f64,
        #[arg(long)]
        half_width: f64,
        #[arg(long, default_value_t = 6)]
        count: usize,
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<f64>,
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Threshold from limit operators against box stability.
    HvzVerify {
        problem: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        expect: Option<f64>,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Fredholm evidence for the algebra elements of a problem.
    FredholmCheck {
        problem: PathBuf,
        /// Element name; all elements when omitted.
        #[arg(long)]
        element: Option<String>,
        #[arg(long, value_parser = parse_verdict)]
        expect: Option<Verdict>,
    },
    /// Norms of `[m_f, c_φ]` compressed outside growing radii.
    CommutatorProbe {
        #[arg(long, value_enum, default_value_t = ProbeKind::Arctan)]
        function: ProbeKind,
        #[arg(long, default_value_t = 32.0)]
        half_width: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [256, 512, 1024])]
        points: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 4.0, 8.0, 16.0, 24.0])]
        radii: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        bump_radius: f64,
    },
    /// Re-read a run report and check its artifacts.
    Report { run: PathBuf },
}

#[derive(Subcommand)]
enum LatticeCommand {
    /// Intersection closure of a problem's family, or of the `{x_i = 0}`,
    /// `{x_i = x_j}` family when `--n` and `--d` are given.
    Gen {
        #[arg(long, conflicts_with_all = ["n", "d"])]
        problem: Option<PathBuf>,
        #[arg(long, requires = "d")]
        n: Option<usize>,
        #[arg(long, requires = "n")]
        d: Option<usize>,
    },
    /// Symmetric-action, projection and difference checks.
    CheckMsc {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        expect_size: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProbeKind {
    /// `(π/2)·x|x|/(1 + x²)`, a function with radial limits `±π/2`.
    Arctan,
    /// `sin(x)`, which has no radial limit.
    Sin,
}

fn parse_verdict(s: &str) -> Result<Verdict, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Failure to obtain a valid problem; maps to exit code 2.
struct InputError(String);

fn load_problem(path: &Path, seed: Option<u64>) -> Result<ProblemFile, InputError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let mut p = ProblemFile::from_json(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    if let Some(s) = seed {
        p.config.threshold.eigen.seed = s;
        p.config.stability.eigen.seed = s;
    }
    Ok(p)
}

pub fn exit_code(statuses: impl IntoIterator<Item = Status>) -> u8 {
    match statuses.into_iter().max() {
        None | Some(Status::Pass) => 0,
        Some(Status::Fail) => 1,
        Some(Status::Inconclusive) => 3,
        Some(Status::Error) => 4,
    }
}

fn emit(outcomes: &[Outcome], format: Option<Format>) -> ExitCode {
    for o in outcomes {
        match format.unwrap_or(Format::Csv) {
            Format::Csv => print!("{}", o.csv),
            Format::Json => println!(
                "{}",
                serde_json::to_string_pretty(&o.detail).expect("details serialize")
            ),
        }
        eprintln!("{}: {}", o.status, o.summary);
    }
    ExitCode::from(exit_code(outcomes.iter().map(|o| o.status)))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.global.jobs {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    match dispatch(cli) {
        Ok(code) => code,
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, InputError> {
    let g = cli.global;
    let single = |p: &ProblemFile, t: TaskSpec| vec![tasks::execute(p, &t)];
    Ok(match cli.command {
        Command::Run { problem, out, n, d } => {
            let mut p = load_problem(&problem, g.seed)?;
            if n.is_some() || d.is_some() {
                let mut found = false;
                for t in &mut p.tasks {
                    if let TaskSpec::LatticeCheck { n: tn, d: td, .. } = t {
                        *tn = n.unwrap_or(*tn);
                        *td = d.unwrap_or(*td);
                        found = true;
                    }
                }
                if !found {
                    p.tasks.push(TaskSpec::LatticeCheck {
                        n: n.unwrap_or(2),
                        d: d.unwrap_or(1),
                        expect_size: None,
                    });
                }
            }
            match run::run(&p, &problem, &out, g.format, g.seed) {
                Ok(r) => ExitCode::from(r.exit_code),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(4)
                }
            }
        }
        Command::Lattice { command } => match command {
            LatticeCommand::Gen { problem, n, d } => {
                let s = match (problem, n, d) {
                    (Some(path), _, _) => {
                        let p = load_problem(&path, g.seed)?;
                        let family = p.family().map_err(|e| InputError(e.to_string()))?;
                        generate_semilattice(&family, p.dimension)
                    }
                    (None, Some(n), Some(d)) if n > 0 && d > 0 => {
                        generate_semilattice(&hvz_core::lattice::msc_generators(n, d), n * d)
                    }
                    _ => return Err(InputError("give --problem, or positive --n and --d".into())),
                };
                let o = match s {
                    Ok(s) => Outcome {
                        status: Status::Pass,
                        summary: format!("{} elements", s.len()),
                        csv: report::semilattice_csv(&s),
                        detail: serde_json::to_value(&s).expect("semilattices serialize"),
                    },
                    Err(e) => Outcome::error(e),
                };
                emit(&[o], g.format)
            }
            LatticeCommand::CheckMsc { n, d, expect_size } => {
                let o = tasks::lattice_check(n, d, expect_size).unwrap_or_else(Outcome::error);
                emit(&[o], g.format)
            }
        },
        Command::Strata { problem } => {
            let p = load_problem(&problem, g.seed)?;
            emit(&single(&p, TaskSpec::Strata { expect_count: None }), g.format)
        }
        Command::Tau { problem, direction } => {
            let p = load_problem(&problem, g.seed)?;
            let alpha = hvz_core::problem::parse_direction(&direction)
                .map_err(|e| InputError(format!("--direction: {e}")))?;
            let t = TaskSpec::Tau {
                direction: IntRow(alpha.vector().to_vec()),
            };
            emit(&single(&p, t), g.format)
        }
        Command::Spectrum {
            problem,
            h,
            half_width,
            count,
            expect,
            tolerance,
        } => {
            let p = load_problem(&problem, g.seed)?;
            let t = TaskSpec::Spectrum {
                spacing: h,
                half_width,
                count,
                expect_lowest: expect,
                tolerance,
            };
            emit(&single(&p, t), g.format)
        }
        Command::HvzVerify {
            problem,
            expect,
            tolerance,
        } => {
            let p = load_problem(&problem, g.seed)?;
            let t = TaskSpec::Hvz {
                expect_sigma_ess: expect,
                tolerance,
            };
            emit(&single(&p, t), g.format)
        }
        Command::FredholmCheck {
            problem,
            element,
            expect,
        } => {
            let p = load_problem(&problem, g.seed)?;
            let names: Vec<String> = match element {
                Some(e) => vec![e],
                None => p.elements.iter().map(|e| e.name.clone()).collect(),
            };
            let outcomes: Vec<Outcome> = names
                .into_iter()
                .map(|element| tasks::execute(&p, &TaskSpec::Fredholm { element, expect }))
                .collect();
            emit(&outcomes, g.format)
        }
        Command::CommutatorProbe {
            function,
            half_width,
            points,
            radii,
            bump_radius,
        } => {
            let (function, expect) = match function {
                ProbeKind::Arctan => (
                    ProbeFunction::Asymptotic(AsymptoticFunction::AngularHomogeneous {
                        profile: AngularProfile::Affine {
                            offset: 0.0,
                            coefficients: vec![std::f64::consts::FRAC_PI_2],
                        },
                    }),
                    ProbeExpectation::Decay,
                ),
                ProbeKind::Sin => (ProbeFunction::Sin, ProbeExpectation::Plateau),
            };
            let p = ProblemFile {
                version: hvz_core::problem::PROBLEM_VERSION.into(),
                dimension: 1,
                subspaces: Vec::new(),
                terms: Vec::new(),
                elements: Vec::new(),
                tasks: Vec::new(),
                config: Default::default(),
            };
            let t = TaskSpec::CommutatorProbe {
                function,
                half_width,
                points,
                radii,
                bump_radius,
                expect,
            };
            emit(&single(&p, t), g.format)
        }
        Command::Report { run } => run::report(&run, g.format).map_err(InputError)?,
    })
}
