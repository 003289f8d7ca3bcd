//! `twistor`: runs the verification suites and prints a JSON (or CSV) report.
//!
//! Exit status is 0 when every check passes, 1 when some check fails (the
//! failing names go to stderr) and 2 on a usage error.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use twistor_core::chart::{FdOrder, SamplePlan, Stencil};
use twistor_core::report::SuiteReport;
use twistor_core::suites::{self, SuiteConfig, SuiteError};

#[derive(Debug, Parser)]
#[command(
    name = "twistor",
    version,
    about = "Runs the numerical verification suites and reports residuals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Write the report to FILE instead of stdout.
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Emit one CSV row per check instead of JSON.
    #[arg(long, global = true)]
    csv: bool,
    /// Number of chart sample points.
    #[arg(long, global = true, default_value_t = SamplePlan::DEFAULT_SAMPLES)]
    samples: usize,
    /// Finite-difference step.
    #[arg(long, global = true, default_value_t = Stencil::DEFAULT_STEP)]
    h: f64,
    /// Finite-difference order (2 or 4).
    #[arg(long, global = true, default_value_t = 4)]
    order: u8,
    /// Sampling seed.
    #[arg(long, global = true, env = "TWISTOR_SEED", default_value_t = SamplePlan::DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact exterior and Kähler algebra, plus the jet equivalence sweep.
    Algebra,
    /// Kähler commutator relations on chart test fields.
    Commutators {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Curvature operator, q(R) and Weitzenböck checks.
    Curvature {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Eigenfunction, twistor form and structure-form checks on CP^m.
    Cpn {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        degree: Option<usize>,
    },
    /// Conformal rescaling of twistor forms.
    Conformal {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Middle-degree characterization on CP^2.
    Middim {
        #[arg(long)]
        m: Option<usize>,
    },
    /// Every suite with default parameters.
    All,
}

fn config(
    common: &Common,
    m: Option<usize>,
    degree: Option<usize>,
) -> Result<SuiteConfig, SuiteError> {
    let order = FdOrder::from_u8(common.order)?;
    let stencil = Stencil::new(common.h, order)?;
    Ok(SuiteConfig {
        m,
        degree,
        samples: common.samples,
        seed: common.seed,
        stencil,
    })
}

fn run(cli: &Cli) -> Result<SuiteReport, SuiteError> {
    let c = &cli.common;
    match cli.command {
        Command::Algebra => suites::algebra(&config(c, None, None)?),
        Command::Commutators { m } => suites::commutators(&config(c, m, None)?),
        Command::Curvature { m } => suites::curvature(&config(c, m, None)?),
        Command::Cpn { m, degree } => suites::cpn(&config(c, m, degree)?),
        Command::Conformal { m } => suites::conformal(&config(c, m, None)?),
        Command::Middim { m } => suites::middim(&config(c, m, None)?),
        Command::All => suites::all(&config(c, None, None)?),
    }
}

fn is_usage(e: &SuiteError) -> bool {
    use twistor_core::chart::ChartError;
    matches!(
        e,
        SuiteError::Usage(_)
            | SuiteError::Chart(ChartError::Order(_) | ChartError::StepOutOfRange(_))
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) if is_usage(&e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let text = if cli.common.csv {
        report.to_csv()
    } else {
        let mut s = report.to_json();
        s.push('\n');
        s
    };
    match &cli.common.out {
        Some(path) => {
            if let Err(e) = fs::write(path, &text) {
                eprintln!("error: cannot write {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    let failing = report.failing();
    if failing.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("{} failing check(s):", failing.len());
        for c in failing {
            eprintln!(
                "  {}: residual {:.5e} > tolerance {:.5e}",
                c.name, c.max_residual, c.tolerance
            );
        }
        ExitCode::from(1)
    }
}
