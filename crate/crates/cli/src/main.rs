use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use sdmm::codec::{GaspParams, MatDotParams, SchemeParams};
use sdmm::experiment::{self, CsvRow, ExperimentConfig};
use sdmm::linalg::{cmat, EvaluationPoints};
use sdmm::runtime::{self, Cluster, StragglerModel};
use sdmm::security::{self, Dims, InputDistribution, NoiseSpec, SearchStrategy};

#[derive(Parser)]
#[command(name = "sdmm", version, about = "Analog secure distributed matrix multiplication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Multiply two CMAT files through N (simulated or remote) workers.
    Multiply(MultiplyArgs),
    /// Serve multiplication tasks on a TCP endpoint.
    Worker {
        #[arg(long)]
        listen: String,
    },
    /// Calibrate the mask variance for a leakage budget; prints JSON.
    Calibrate(CalibrateArgs),
    /// Run a leakage/accuracy sweep described by a JSON config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the config's master seed.
        #[arg(long, env = "SDMM_SEED")]
        seed: Option<u64>,
    },
    /// Turn sweep results into plot-ready CSV and a gnuplot script.
    Figures {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        figure: u8,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Matdot,
    Gasp,
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Exhaustive,
    Consecutive,
    Auto,
}

impl From<Strategy> for SearchStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Exhaustive => SearchStrategy::Exhaustive,
            Strategy::Consecutive => SearchStrategy::Consecutive,
            Strategy::Auto => SearchStrategy::Auto,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Input {
    Real,
    Complex,
}

impl From<Input> for InputDistribution {
    fn from(i: Input) -> Self {
        match i {
            Input::Real => InputDistribution::RealGaussian,
            Input::Complex => InputDistribution::ComplexGaussian,
        }
    }
}

#[derive(Args)]
struct SchemeArgs {
    #[arg(long, value_enum)]
    scheme: Scheme,
    /// MatDot split of the inner dimension.
    #[arg(long)]
    p: Option<usize>,
    /// GASP row split of A.
    #[arg(long)]
    m: Option<usize>,
    /// GASP column split of B.
    #[arg(long = "n-split")]
    n_split: Option<usize>,
    /// Number of colluding servers tolerated.
    #[arg(long)]
    x: usize,
    /// Number of servers; defaults to the recovery threshold.
    #[arg(long)]
    n: Option<usize>,
}

impl SchemeArgs {
    fn params(&self) -> Result<SchemeParams> {
        let minimal: SchemeParams = match self.scheme {
            Scheme::Matdot => MatDotParams::minimal(self.p.context("--p is required for matdot")?, self.x)?.into(),
            Scheme::Gasp => GaspParams::minimal(
                self.m.context("--m is required for gasp")?,
                self.n_split.context("--n-split is required for gasp")?,
                self.x,
            )?
            .into(),
        };
        let n = self.n.unwrap_or_else(|| minimal.recovery_threshold());
        Ok(minimal.with_servers(n)?)
    }
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Budget {
    /// Leakage budget in bits.
    #[arg(long)]
    delta_bits: Option<f64>,
    /// Leakage budget as a fraction of the input entropy.
    #[arg(long)]
    delta_rel: Option<f64>,
}

#[derive(Args)]
struct InputModel {
    /// Input distribution assumed for relative budgets.
    #[arg(long, value_enum, default_value = "real")]
    input: Input,
    /// Per-entry input variance assumed by the bound.
    #[arg(long, default_value_t = 1.0)]
    input_variance: f64,
}

impl Budget {
    fn bits(&self, input: &InputModel, dims: Dims) -> Result<f64> {
        match (self.delta_bits, self.delta_rel) {
            (Some(bits), _) => Ok(bits),
            (_, Some(rel)) => {
                let dist: InputDistribution = input.input.into();
                Ok(rel * dist.input_entropy_bits(dims, input.input_variance, input.input_variance))
            }
            _ => bail!("one of --delta-bits / --delta-rel is required"),
        }
    }
}

#[derive(Args)]
struct MultiplyArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    budget: Budget,
    #[command(flatten)]
    input: InputModel,
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated worker endpoints.
    #[arg(long, value_delimiter = ',', conflicts_with = "simulate")]
    workers: Vec<SocketAddr>,
    /// Run all workers in-process (the default without --workers).
    #[arg(long)]
    simulate: bool,
    #[arg(long, env = "SDMM_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of servers that never answer.
    #[arg(long, default_value_t = 0)]
    stragglers: usize,
    #[arg(long, value_enum, default_value = "auto")]
    strategy: Strategy,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[command(flatten)]
    budget: Budget,
    #[command(flatten)]
    input: InputModel,
    #[arg(long, default_value_t = 36)]
    t: usize,
    #[arg(long, default_value_t = 36)]
    s: usize,
    #[arg(long, default_value_t = 36)]
    r: usize,
    #[arg(long, value_enum, default_value = "auto")]
    strategy: Strategy,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("SDMM_THREADS") {
        let n: usize = threads.parse().context("SDMM_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match Cli::parse().command {
        Command::Multiply(args) => multiply(args),
        Command::Worker { listen } => Ok(runtime::worker_serve(listen.as_str())?),
        Command::Calibrate(args) => calibrate(args),
        Command::Sweep { config, out_dir, seed } => sweep(&config, &out_dir, seed),
        Command::Figures { results, figure } => figures(&results, figure),
    }
}

fn multiply(args: MultiplyArgs) -> Result<()> {
    let params = args.scheme.params()?;
    let a = cmat::load(&args.a)?;
    let b = cmat::load(&args.b)?;
    let dims = Dims::new(a.rows(), a.cols(), b.cols());
    let delta = args.budget.bits(&args.input, dims)?;
    let points = EvaluationPoints::canonical(params.n_servers());
    let report = security::calibrate(
        delta,
        dims,
        &params,
        &points,
        args.input.input_variance,
        args.input.input_variance,
        args.strategy.into(),
    )?;
    let noise = NoiseSpec::new(report.sigma2, args.input.input_variance, args.input.input_variance)?;
    let cluster = if args.workers.is_empty() {
        Cluster::simulated()
    } else {
        Cluster::networked(args.workers.clone())
    };
    let outcome = runtime::run_job(
        &a,
        &b,
        &params,
        &noise,
        &StragglerModel::uniform(args.stragglers),
        args.seed,
        &cluster,
    )?;
    cmat::save(&args.out, &outcome.product)?;
    println!("{}", serde_json::to_string_pretty(&outcome.record)?);
    Ok(())
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let params = args.scheme.params()?;
    let dims = Dims::new(args.t, args.s, args.r);
    let delta = args.budget.bits(&args.input, dims)?;
    let report = security::calibrate(
        delta,
        dims,
        &params,
        &EvaluationPoints::canonical(params.n_servers()),
        args.input.input_variance,
        args.input.input_variance,
        args.strategy.into(),
    )?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn sweep(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let table = experiment::run_sweep(&config)?;
    let out = &config.output;
    experiment::emit_csv(&table, out_dir.join(&out.summary_csv))?;
    experiment::emit_json(&table, out_dir.join(&out.summary_json))?;
    if let Some(trials) = &out.trials_csv {
        experiment::emit_trials_csv(&table, out_dir.join(trials))?;
    }
    fs::write(out_dir.join("config.json"), serde_json::to_string_pretty(&config)? + "\n")?;
    eprintln!("{} cells written to {}", table.cells.len(), out_dir.display());
    Ok(())
}

fn summary_path(results: &Path) -> Result<PathBuf> {
    let config = results.join("config.json");
    let name = if config.exists() {
        ExperimentConfig::load(&config)?.output.summary_csv
    } else {
        "summary.csv".into()
    };
    Ok(results.join(name))
}

/// Figure 1: error against relative leakage, one curve per code at zero
/// stragglers (or the fewest swept). Figure 2: error against straggler
/// count, one curve per code and budget.
fn figures(results: &Path, figure: u8) -> Result<()> {
    let rows = experiment::read_csv(summary_path(results)?)?;
    if rows.is_empty() {
        bail!("no cells in {}", results.display());
    }
    let mut curves: BTreeMap<String, Vec<&CsvRow>> = BTreeMap::new();
    let (xcol, xlabel, logx) = if figure == 1 {
        let fewest = rows.iter().map(|r| r.stragglers).min().unwrap_or(0);
        for r in rows.iter().filter(|r| r.stragglers == fewest) {
            let key = format!("{} p/mn={} X={} N={}", r.scheme, r.p_or_mn, r.x, r.n);
            curves.entry(key).or_default().push(r);
        }
        ("delta_relative", "relative information leakage", true)
    } else {
        for r in &rows {
            let key = format!("{} p/mn={} X={} delta_rel={:.3e}", r.scheme, r.p_or_mn, r.x, r.delta_relative);
            curves.entry(key).or_default().push(r);
        }
        ("stragglers", "number of straggling servers", false)
    };

    let mut csv = String::from("series,x,mean_err,sem,trials,mean_cond\n");
    let mut plots = Vec::new();
    for (i, (label, mut pts)) in curves.into_iter().enumerate() {
        if figure == 1 {
            pts.sort_by(|a, b| a.delta_relative.total_cmp(&b.delta_relative));
        } else {
            pts.sort_by_key(|r| r.stragglers);
        }
        for r in pts {
            let x = if figure == 1 {
                format!("{:.16e}", r.delta_relative)
            } else {
                r.stragglers.to_string()
            };
            let sem = r.std_err / (r.trials as f64).sqrt();
            writeln!(csv, "{i},{x},{:.16e},{:.16e},{},{:.16e}", r.mean_err, sem, r.trials, r.mean_cond)?;
        }
        plots.push(format!(
            "'figure{figure}.csv' using 2:($1=={i}?$3:1/0):4 with yerrorlines title \"{label}\""
        ));
    }

    let csv_path = results.join(format!("figure{figure}.csv"));
    fs::write(&csv_path, csv)?;
    let script = format!(
        "# {xcol} on x; run from {dir}\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set terminal pngcairo size 900,600\n\
         set output 'figure{figure}.png'\n\
         {logx}set logscale y\n\
         set xlabel '{xlabel}'\n\
         set ylabel 'mean Frobenius error'\n\
         plot {plots}\n",
        dir = results.display(),
        logx = if logx { "set logscale x\n" } else { "" },
        plots = plots.join(", \\\n     "),
    );
    let gp_path = results.join(format!("figure{figure}.gp"));
    fs::write(&gp_path, script)?;
    eprintln!("wrote {} and {}", csv_path.display(), gp_path.display());
    Ok(())
}
