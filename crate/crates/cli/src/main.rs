use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use phlab::geometry::IntMatrix;
use phlab::lab::{
    self, resolve, ConfigOverrides, ExperimentConfig, LabError, ModelKind, RunOutcome,
};

#[derive(Parser)]
#[command(
    name = "phlab",
    version,
    about = "Partially hyperbolic torus endomorphism lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the linearisation class of an integer matrix as JSON.
    Classify {
        #[arg(short = 'm', num_args = 4, value_names = ["A", "B", "C", "D"], allow_negative_numbers = true, required = true)]
        matrix: Vec<i64>,
    },
    /// Check the default unstable cone family on a grid.
    VerifyCone(Common),
    /// Cohomology, bundles, branching certificate and the branching-foliation figure.
    IncoherentReport(Common),
    /// Seed foliation through leaf conjugacy for a hyperbolic model.
    CoherentSuite(Common),
    /// Figures only.
    Render(Common),
}

#[derive(Args)]
struct Common {
    #[arg(short = 'm', num_args = 4, value_names = ["A", "B", "C", "D"], allow_negative_numbers = true)]
    matrix: Option<Vec<i64>>,
    #[arg(long, value_parser = parse_kind)]
    model: Option<ModelKind>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long = "depth-K")]
    depth_k: Option<usize>,
    #[arg(long = "depth-N")]
    depth_n: Option<usize>,
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    svg_only: bool,
    /// `key = value` configuration file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

impl Common {
    fn resolve(&self, kind: Option<ModelKind>) -> anyhow::Result<ExperimentConfig> {
        let file = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("cannot read {}", p.display()))?;
                Some(ConfigOverrides::parse(&text)?)
            }
            None => None,
        };
        let flags = ConfigOverrides {
            model: self.model.or(kind),
            matrix: self.matrix.as_ref().map(|m| [m[0], m[1], m[2], m[3]]),
            eps: self.eps,
            c: self.c,
            depth_k: self.depth_k,
            depth_n: self.depth_n,
            grid_n: self.grid,
            window: self.window,
            samples: self.samples,
            out: self.out.clone(),
            seed: self.seed,
            svg_only: self.svg_only.then_some(true),
            ..Default::default()
        };
        Ok(resolve(file.as_ref(), &flags)?)
    }
}

fn summarise(outcome: &RunOutcome) {
    let r = &outcome.report;
    for c in &r.checks {
        println!(
            "{} {:<36} value={:e} tol={:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance
        );
    }
    if let Some(s) = &r.stopped_at {
        println!("stopped at stage `{s}`");
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let outcome = match cli.command {
        Command::Classify { matrix } => {
            let m = IntMatrix::new(matrix[0], matrix[1], matrix[2], matrix[3]);
            let c = lab::classify(m)?;
            println!("{}", serde_json::to_string(&c)?);
            return Ok(0);
        }
        Command::VerifyCone(c) => lab::run_verify_cone(&c.resolve(None)?)?,
        Command::IncoherentReport(c) => {
            lab::run_incoherent_report(&c.resolve(Some(ModelKind::Incoherent))?)?
        }
        Command::CoherentSuite(c) => lab::run_coherent_suite(&c.resolve(None)?)?,
        Command::Render(c) => lab::run_render(&c.resolve(None)?)?,
    };
    summarise(&outcome);
    Ok(outcome.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<LabError>().map_or(2, LabError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
