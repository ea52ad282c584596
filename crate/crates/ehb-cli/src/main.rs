use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use holo_ehb::experiments::{
    compare, run, AngleSpec, ExperimentKind, ExperimentSpec, GeometrySpec, PatternSteering, ResultTable, Tolerances,
};
use holo_ehb::radiation::ElementPattern;

/// Desk-scale hybrid beamforming experiments.
///
/// Exit status: 0 success, 1 comparison outside tolerance, 2 error.
#[derive(Parser)]
#[command(name = "ehb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec. Output goes to --out, else to the spec's
    /// output_path (relative to the spec file), else to stdout.
    Run {
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare two result CSVs column by column.
    Compare {
        baseline: PathBuf,
        candidate: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Azimuth cut of maximum-directivity currents steered to one azimuth.
    Pattern {
        /// Element spacing in wavelengths.
        #[arg(long)]
        spacing: f64,
        #[arg(long, default_value_t = 1)]
        layers: usize,
        /// Steering azimuth in degrees.
        #[arg(long, default_value_t = 0.0)]
        direction: f64,
        /// Elements per layer; the 1.5λ aperture is kept fixed if omitted.
        #[arg(long)]
        per_layer: Option<usize>,
        #[arg(long, value_enum, default_value_t = PatternArg::Dipole)]
        pattern: PatternArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Isotropic,
    Dipole,
}

fn emit(table: &ResultTable, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            table.write(path).with_context(|| format!("writing {}", path.display()))?;
            eprintln!(
                "wrote {} rows to {} ({} failed evaluations, {:.2} s)",
                table.rows(),
                path.display(),
                table.metadata.failures,
                table.metadata.runtime_s
            );
        }
        None => print!("{}", table.to_csv()),
    }
    Ok(())
}

fn run_spec(spec_path: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let spec = ExperimentSpec::from_json(&text).with_context(|| format!("loading {}", spec_path.display()))?;
    let out = out.or_else(|| {
        (!spec.output_path.is_empty()).then(|| spec_path.parent().unwrap_or(Path::new(".")).join(&spec.output_path))
    });
    let table = run(&spec)?;
    for note in &table.metadata.notes {
        log::warn!("{note}");
    }
    emit(&table, out.as_deref())
}

fn compare_files(a: &Path, b: &Path, tol: f64) -> Result<bool> {
    let ta = ResultTable::read_csv(a).with_context(|| format!("reading {}", a.display()))?;
    let tb = ResultTable::read_csv(b).with_context(|| format!("reading {}", b.display()))?;
    let report = compare(&ta, &tb, &Tolerances::uniform(tol))?;
    println!("{report}");
    Ok(report.pass)
}

fn pattern(spacing: f64, layers: usize, direction: f64, per_layer: Option<usize>, pattern: PatternArg, out: Option<PathBuf>) -> Result<()> {
    let spec = ExperimentSpec {
        kind: ExperimentKind::PatternCut,
        physical: Default::default(),
        geometry: GeometrySpec {
            spacing_lambda: vec![spacing],
            layers,
            per_layer,
            lattice: Default::default(),
            pattern: match pattern {
                PatternArg::Isotropic => ElementPattern::Isotropic,
                PatternArg::Dipole => ElementPattern::DipoleSinTheta,
            },
        },
        channel: Default::default(),
        optimizer: Default::default(),
        snr_db: Vec::new(),
        direction: AngleSpec {
            theta_deg: 90.0,
            phi_deg: direction,
        },
        azimuth: Default::default(),
        steering: PatternSteering::Fixed,
        output_path: String::new(),
    };
    emit(&run(&spec)?, out.as_deref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { spec, out } => run_spec(&spec, out).map(|_| true),
        Command::Compare { baseline, candidate, tol } => compare_files(&baseline, &candidate, tol),
        Command::Pattern {
            spacing,
            layers,
            direction,
            per_layer,
            pattern: p,
            out,
        } => pattern(spacing, layers, direction, per_layer, p, out).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
