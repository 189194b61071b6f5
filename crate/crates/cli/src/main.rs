use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{error::ErrorKind as ClapKind, Args, Parser, Subcommand};
use gwcca::pipeline::{self, export, io, summary, Config};
use gwcca::synth::NoiseStructure;
use gwcca::{generate_dataset1, generate_dataset2, GwccaError, KernelFamily, Result};

/// Geographically weighted canonical correlation analysis.
#[derive(Parser, Debug)]
#[command(name = "gwcca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit local CCA at every location and write results under --out.
    Fit(RunArgs),
    /// Run only the bandwidth scan and write its diagnostics.
    Scan(RunArgs),
    /// Generate a synthetic dataset and its true correlation fields.
    Synth(SynthArgs),
    /// Score fitted correlations against true fields.
    Eval(EvalArgs),
    /// Quantile tables from a per-location results file.
    Summarize(SummarizeArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file; flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long, value_name = "PATH")]
    data: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// gaussian, exponential, boxcar, bisquare or tricube.
    #[arg(long, value_name = "NAME")]
    kernel: Option<KernelFamily>,
    /// Fixed adaptive bandwidth (neighbour count).
    #[arg(long, value_name = "N", conflicts_with = "bandwidth")]
    k: Option<usize>,
    /// Fixed distance bandwidth.
    #[arg(long, value_name = "R")]
    bandwidth: Option<f64>,
    /// Worker threads (0: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// 1 (linear trend plus bump) or 2 (random-field grid).
    #[arg(long, value_name = "1|2")]
    dataset: Option<u8>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
    /// Number of locations (dataset 1).
    #[arg(long)]
    n: Option<usize>,
    /// Grid side length (dataset 2).
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    /// Plant a third, spatially unstructured canonical structure (dataset 1).
    #[arg(long)]
    noise_structure: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// File with `id` and `rho_<j>` columns, such as PREFIX_rho.csv.
    #[arg(long, value_name = "FILE")]
    fit: PathBuf,
    /// Truth file written by `synth`.
    #[arg(long, value_name = "FILE")]
    truth: PathBuf,
    /// Global correlations, such as PREFIX_global.csv.
    #[arg(long, value_name = "FILE")]
    baseline: PathBuf,
    /// Output CSV; standard output when absent.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Value of the `dataset` column.
    #[arg(long, default_value = "synthetic")]
    label: String,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Per-location results file, such as PREFIX_local.csv.
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    /// Output prefix; tables go to standard output when absent.
    #[arg(long, value_name = "PREFIX")]
    out: Option<String>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn resolve(args: &RunArgs) -> Result<Config> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(d) = &args.data {
        cfg.data.path = Some(d.clone());
    }
    if let Some(s) = args.seed {
        cfg.run.seed = s;
    }
    if let Some(k) = args.kernel {
        cfg.kernel.family = k;
    }
    if let Some(k) = args.k {
        cfg.kernel.k = Some(k);
        cfg.kernel.bandwidth = None;
    }
    if let Some(r) = args.bandwidth {
        cfg.kernel.bandwidth = Some(r);
        cfg.kernel.k = None;
    }
    if let Some(t) = args.threads {
        cfg.run.threads = t;
    }
    if let Some(o) = &args.out {
        cfg.run.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn required_out(cfg: &Config) -> Result<String> {
    cfg.run
        .out
        .clone()
        .ok_or_else(|| GwccaError::Configuration("no output prefix; pass --out or set run.out".into()))
}

fn load_data(cfg: &Config) -> Result<io::Loaded<f64>> {
    let path = cfg
        .data
        .path
        .as_ref()
        .ok_or_else(|| GwccaError::Configuration("no input data; pass --data or set data.path".into()))?;
    io::load_csv(path, &cfg.data)
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run_fit(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let out = required_out(&cfg)?;
    let loaded = load_data(&cfg)?;
    let mut fit = pipeline::with_threads(cfg.run.threads, || pipeline::fit(&loaded.dataset, &cfg))??;
    fit.preprocess.dropped_rows = loaded.dropped_rows;
    let table = pipeline::summarize(&fit)?;
    let written = export::export(&fit, &table, &cfg, &out)?;
    match fit.chosen_k {
        Some(k) => println!("bandwidth: k = {k}"),
        None => println!("bandwidth: fixed distance"),
    }
    println!("reported variates: {:?}", fit.reported());
    print_paths(&written);
    Ok(())
}

fn run_scan(args: &RunArgs) -> Result<()> {
    let cfg = resolve(args)?;
    let out = required_out(&cfg)?;
    let loaded = load_data(&cfg)?;
    let (outcome, _) = pipeline::with_threads(cfg.run.threads, || pipeline::scan(&loaded.dataset, &cfg))??;
    let psi = outcome.records.first().map_or(0, |r| r.rgof_by_c.len());
    let path = export::write_scan(&out, &outcome, psi)?;
    println!("chosen k = {} ({})", outcome.chosen_k, outcome.stop_reason);
    print_paths(&[path]);
    Ok(())
}

fn run_synth(args: &SynthArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(d) = args.dataset {
        cfg.synth.dataset = d;
    }
    if let Some(o) = &args.out {
        cfg.run.out = Some(o.clone());
    }
    cfg.validate()?;
    let out = required_out(&cfg)?;
    let as_config = |e: GwccaError| match e {
        GwccaError::Parameter(m) => GwccaError::Configuration(m),
        e => e,
    };
    let (dataset, truth) = match cfg.synth.dataset {
        1 => {
            let mut p = cfg.synth.dataset1.clone();
            p.seed = args.seed.unwrap_or(p.seed);
            p.n = args.n.unwrap_or(p.n);
            p.p = args.p.unwrap_or(p.p);
            p.q = args.q.unwrap_or(p.q);
            if args.noise_structure && p.noise_structure.is_none() {
                p.noise_structure = Some(NoiseStructure::default());
            }
            p.validate().map_err(as_config)?;
            generate_dataset1::<f64>(&p)?
        }
        _ => {
            let mut p = cfg.synth.dataset2.clone();
            p.seed = args.seed.unwrap_or(p.seed);
            p.grid_size = args.grid_size.unwrap_or(p.grid_size);
            p.p = args.p.unwrap_or(p.p);
            p.q = args.q.unwrap_or(p.q);
            p.validate().map_err(as_config)?;
            generate_dataset2::<f64>(&p)?
        }
    };
    let data = export::prefixed(&out, "data.csv");
    let truth_path = export::prefixed(&out, "truth.csv");
    io::write_dataset_csv(&data, &dataset)?;
    io::write_truth_csv(&truth_path, &dataset, &truth)?;
    print_paths(&[data, truth_path]);
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let report = pipeline::evaluate_files(&args.fit, &args.truth, &args.baseline)?;
    match &args.out {
        Some(path) => {
            pipeline::write_eval(path, &report, &args.label)?;
            print_paths(std::slice::from_ref(path));
        }
        None => {
            println!("{}", gwcca::eval::TABLE_HEADER.join(","));
            for row in gwcca::eval::table_rows(&report, &args.label) {
                println!("{}", row.join(","));
            }
        }
    }
    Ok(())
}

fn run_summarize(args: &SummarizeArgs) -> Result<()> {
    let table = pipeline::summarize_results_file(&args.results)?;
    let n = io::read_id_table(&args.results, io::rho_column)?.ids.len();
    match &args.out {
        Some(prefix) => print_paths(&export::write_summary(prefix, &table, n)?),
        None => {
            let mut so = std::io::stdout().lock();
            let mut emit = |header: &[&str], rows: Vec<Vec<String>>| {
                let _ = writeln!(so, "{}", header.join(","));
                for r in rows {
                    let _ = writeln!(so, "{}", r.join(","));
                }
                let _ = writeln!(so);
            };
            emit(&summary::RHO_HEADER, table.rho_rows(n, |v| format!("{v:.6}")));
            emit(
                &summary::LOADING_HEADER,
                table.loading_rows(|v| format!("{v:.6}")),
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(4),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match &cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Scan(a) => run_scan(a),
        Command::Synth(a) => run_synth(a),
        Command::Eval(a) => run_eval(a),
        Command::Summarize(a) => run_summarize(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
