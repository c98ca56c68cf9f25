use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use partsim::association::{association_matrix, CramersVariant, Measure, Observations};
use partsim::config::{Config, Scenario};
use partsim::generator::{write_allocation, write_data_csv};
use partsim::moments::moment_matrices;
use partsim::report::{
    compare_matrices, group_summary, run_pipeline, sample_covariance_matrix, write_group_summary,
    PipelineOptions,
};
use partsim::{generate, Error, GenerateOptions, VariableKind};

#[derive(Parser)]
#[command(name = "partsim", version, about = "Synthetic categorical data with a known clustering")]
struct Cli {
    /// Worker threads; output does not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a dataset and its cluster allocation.
    Generate(RunArgs),
    /// Theoretical covariance and correlation matrices.
    Moments(ConfigArgs),
    /// Solve H/L profiles for the configured group targets.
    Calibrate(ConfigArgs),
    /// Pairwise association matrix of a data file.
    Associate(AssociateArgs),
    /// Generate, then compare sample and theoretical structure.
    Report(RunArgs),
    /// Every artifact plus a manifest.
    Pipeline(RunArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Shuffle subject order instead of cluster blocks.
    #[arg(long)]
    shuffle: bool,
    #[arg(long, value_enum, default_value_t = VariantArg::Paper)]
    variant: VariantArg,
}

#[derive(Args)]
struct AssociateArgs {
    /// Headered integer CSV.
    #[arg(long)]
    data: PathBuf,
    /// Scenario whose variable domains describe the data; levels are
    /// inferred from the data otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    measure: MeasureArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Paper)]
    variant: VariantArg,
    /// Average V_cc over both directions.
    #[arg(long)]
    symmetrize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeasureArg {
    V,
    Vcc,
    Tauc,
    Pearson,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Paper,
    Standard,
}

impl From<VariantArg> for CramersVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Paper => CramersVariant::Paper,
            VariantArg::Standard => CramersVariant::Standard,
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_infeasible() {
        return 3;
    }
    match e.root() {
        Error::Spec(_)
        | Error::Dimension(_)
        | Error::Kind { .. }
        | Error::Domain(_)
        | Error::Precondition(_)
        | Error::TooLarge(..)
        | Error::Json(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn resolve(path: &Path, seed: Option<u64>) -> partsim::Result<Scenario> {
    let mut config = Config::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let scenario = config.resolve()?;
    for w in &scenario.warnings {
        eprintln!("warning: {w}");
    }
    Ok(scenario)
}

/// Writes to `dir/name`, or standard output without a directory.
fn emit(
    dir: Option<&Path>,
    name: &str,
    f: impl FnOnce(&mut dyn Write) -> partsim::Result<()>,
) -> partsim::Result<()> {
    match dir {
        Some(d) => {
            std::fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
            let path = d.join(name);
            let file = File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w)?;
            w.flush().map_err(|e| io_err(&path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)
        }
    }
}

fn io_err(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn run(command: Command) -> partsim::Result<()> {
    match command {
        Command::Generate(a) => {
            let sc = resolve(&a.config, a.seed)?;
            let ds = generate(&sc.spec, GenerateOptions { shuffle: a.shuffle })?;
            let out = a.out.unwrap_or_else(|| PathBuf::from("."));
            emit(Some(&out), "data.csv", |w| write_data_csv(&ds, w))?;
            emit(Some(&out), "allocation.txt", |w| write_allocation(&ds, w))?;
            eprintln!(
                "{} subjects × {} variables in {} clusters → {}",
                ds.num_subjects(),
                ds.num_variables(),
                ds.clusters().num_clusters(),
                out.display()
            );
            Ok(())
        }
        Command::Moments(a) => {
            let sc = resolve(&a.config, None)?;
            let m = moment_matrices(&sc.spec.profile, &sc.spec.clusters)?;
            match a.out.as_deref() {
                Some(dir) => {
                    emit(Some(dir), "covariance.csv", |w| m.covariance.write_csv(w))?;
                    emit(Some(dir), "correlation.csv", |w| m.correlation.write_csv(w))?;
                    emit(Some(dir), "correlation_long.csv", |w| m.correlation.write_long_csv(w))
                }
                None => emit(None, "", |w| m.correlation.write_csv(w)),
            }
        }
        Command::Calibrate(a) => {
            let sc = resolve(&a.config, None)?;
            let cal = sc.calibration.ok_or_else(|| {
                Error::Spec("the configuration has no group targets to calibrate".into())
            })?;
            emit(a.out.as_deref(), "calibration.csv", |w| cal.write_csv(w))
        }
        Command::Associate(a) => {
            let vars = match &a.config {
                Some(c) => Some(resolve(c, None)?.spec.profile.variables().to_vec()),
                None => None,
            };
            let file = File::open(&a.data).map_err(|e| io_err(&a.data, e))?;
            let obs = Observations::from_csv(file, vars.as_deref(), VariableKind::Interval)?;
            let measure = match a.measure {
                MeasureArg::V => Measure::CramersV(a.variant.into()),
                MeasureArg::Vcc => Measure::Vcc,
                MeasureArg::Tauc => Measure::TauC,
                MeasureArg::Pearson => Measure::Pearson,
            };
            let mut m = association_matrix(&obs, measure)?;
            if a.symmetrize {
                m = m.symmetrized();
            }
            let tag = measure.tag();
            match a.out.as_deref() {
                Some(dir) => {
                    emit(Some(dir), &format!("{tag}.csv"), |w| m.values.write_csv(w))?;
                    emit(Some(dir), &format!("{tag}_long.csv"), |w| m.write_long_csv(w))
                }
                None => emit(None, "", |w| m.values.write_csv(w)),
            }
        }
        Command::Report(a) => {
            let sc = resolve(&a.config, a.seed)?;
            let ds = generate(&sc.spec, GenerateOptions { shuffle: a.shuffle })?;
            let theory = moment_matrices(&sc.spec.profile, &sc.spec.clusters)?;
            let obs = Observations::from_dataset(&ds);
            let pearson = association_matrix(&obs, Measure::Pearson)?;
            let cmp = compare_matrices(&theory.correlation, &pearson.values)?;
            let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:.4}"));
            eprintln!(
                "theory vs sample correlation: max |gap| {}, mean |gap| {}, sign agreement {}",
                fmt(cmp.max_abs_gap),
                fmt(cmp.mean_abs_gap),
                fmt(cmp.sign_agreement)
            );
            let rows = match &sc.spec.groups {
                Some(g) => group_summary(g, &theory, &sample_covariance_matrix(&obs), &pearson.values)?,
                None => Vec::new(),
            };
            emit(a.out.as_deref(), "group_summary.csv", |w| write_group_summary(&rows, w))
        }
        Command::Pipeline(a) => {
            let out = a.out.unwrap_or_else(|| PathBuf::from("."));
            let res = run_pipeline(
                &a.config,
                &out,
                PipelineOptions {
                    seed: a.seed,
                    shuffle: a.shuffle,
                    threads: None,
                    variant: a.variant.into(),
                },
            )?;
            for w in &res.manifest.warnings {
                eprintln!("warning: {w}");
            }
            for f in &res.files {
                println!("{}", f.display());
            }
            Ok(())
        }
    }
}
