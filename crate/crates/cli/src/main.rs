use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jdr_cli::config::{parse_jdr, JdrSpec};
use jdr_cli::kv::KeyValues;
use jdr_cli::{run_to_dir, CliError, ExperimentConfig, Result};
use jdr_core::csbm::{sample_csbm, CsbmParams};
use jdr_core::eval::{spectral_cluster, ClusterOptions, SpectralMatrix};
use jdr_core::graph::{load_dataset, save_dataset};
use jdr_core::jdr::{apply_to_dataset, jdr_run};

#[derive(Parser)]
#[command(name = "jdr", version, about = "Joint denoising and rewiring experiments")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "JDR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; writes results.csv and summary.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override n_seeds.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Sample a cSBM dataset into a directory.
    GenCsbm {
        #[arg(long, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        f: usize,
        #[arg(long, default_value_t = 5.0)]
        d: f64,
        #[arg(long, default_value_t = 3.25)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply JDR (jdr.* keys of a config file) to a dataset directory.
    Rewire {
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral clustering accuracy of a labeled dataset.
    EvalSc {
        dataset: PathBuf,
        #[arg(long)]
        k: usize,
        /// Drop the leading eigenvector.
        #[arg(long)]
        skip_first: bool,
        /// Cluster on the Laplacian instead of the adjacency.
        #[arg(long)]
        laplacian: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(config: &Path, out: Option<PathBuf>, seeds: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(n) = seeds {
        if n == 0 {
            return Err(CliError::config("--seeds", "must be at least 1"));
        }
        cfg.n_seeds = n;
    }
    let dir = out
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
    let outcome = run_to_dir(&cfg, &dir)?;
    println!("{} rows written to {}", outcome.records.len(), dir.display());
    Ok(())
}

fn gen_csbm(phi: f64, n: usize, f: usize, d: f64, epsilon: f64, seed: u64, out: &Path) -> Result<()> {
    let p = CsbmParams::from_phi(n, f, d, phi, epsilon, seed)?;
    let mut data = sample_csbm(&p)?;
    data.name = format!("csbm_phi{phi}");
    save_dataset(&data, out)?;
    println!(
        "{} nodes, {} edges, lambda {:.4}, mu^2 {:.4} -> {}",
        n,
        data.graph.n_undirected_edges(),
        p.lambda,
        p.mu * p.mu,
        out.display()
    );
    Ok(())
}

fn rewire(dataset: &Path, config: &Path, out: &Path) -> Result<()> {
    let kv = KeyValues::load(config)?;
    let cfg = match parse_jdr(&kv, false)? {
        JdrSpec::Fixed(c) => c,
        _ => return Err(CliError::config("jdr.eta_A", "no JDR configuration in the file")),
    };
    if let Some(k) = kv.unused().first() {
        return Err(CliError::config(k.clone(), "unknown key"));
    }
    let mut d = load_dataset(dataset)?;
    d.graph = d.graph.to_undirected();
    let res = jdr_run(&d, &cfg)?;
    save_dataset(&apply_to_dataset(&d, &res)?, out)?;
    let t = &res.alignment_trace;
    println!(
        "alignment {:.4} -> {:.4}; {} edges -> {} edges; written to {}",
        t[0],
        t[t.len() - 1],
        d.graph.n_undirected_edges(),
        res.rewired_graph.n_undirected_edges(),
        out.display()
    );
    Ok(())
}

fn eval_sc(dataset: &Path, k: usize, skip_first: bool, laplacian: bool, seed: u64) -> Result<()> {
    let d = load_dataset(dataset)?;
    let labels = d
        .labels
        .as_ref()
        .ok_or_else(|| CliError::config("labels.tsv", "dataset has no labels"))?;
    let mut opts = ClusterOptions::new(k, skip_first, seed);
    if laplacian {
        opts.matrix = SpectralMatrix::NegLaplacian;
    }
    let r = spectral_cluster(&d.graph.to_undirected(), labels, &opts)?;
    let json = serde_json::json!({
        "accuracy": r.accuracy,
        "kmeans_inertia": r.kmeans_inertia,
        "n_components": r.n_components,
        "warning": r.warning,
        "skip_first": skip_first,
        "matrix": if laplacian { "neg_laplacian" } else { "adjacency" },
    });
    println!("{json}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Run { config, out, seeds } => run(&config, out, seeds),
        Command::GenCsbm {
            phi,
            n,
            f,
            d,
            epsilon,
            seed,
            out,
        } => gen_csbm(phi, n, f, d, epsilon, seed, &out),
        Command::Rewire { dataset, config, out } => rewire(&dataset, &config, &out),
        Command::EvalSc {
            dataset,
            k,
            skip_first,
            laplacian,
            seed,
        } => eval_sc(&dataset, k, skip_first, laplacian, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
