use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use structsparse::cli::{run_classify, run_eval, run_sweep, run_synth, run_toy_pattern, RunConfig};
use structsparse::io::SceneSpec;
use structsparse::Result;

#[derive(Parser)]
#[command(name = "structsparse", version, about = "Structured-sparsity classification of hyperspectral images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split, classify the test pixels and write map, metrics and manifest.
    Classify(RunArgs),
    /// Sparsity patterns of the six structured priors on a two-class block.
    Toy(RunArgs),
    /// Pick lambda on a validation split, then classify the test set.
    Sweep(RunArgs),
    /// Write a synthetic scene (cube, header and labels).
    Synth {
        /// Scene description, e.g. `blocks:K=3,P=50,d=3,w=30,h=30,snr=20`.
        spec: SceneSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a predicted label file against ground truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        predicted: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// `row col` lines; defaults to every labeled truth pixel.
        #[arg(long)]
        pixels: Option<PathBuf>,
    },
}

/// Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// `key = value` config file (a previous run's manifest works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Synthetic scene instead of files.
    #[arg(long)]
    synth: Option<String>,
    /// Cube header file.
    #[arg(long)]
    cube: Option<PathBuf>,
    /// Raw cube file (defaults to the header path with a .raw extension).
    #[arg(long)]
    raw: Option<PathBuf>,
    /// Ground-truth labels (u16, row-major).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// l1, js, laplacian, group, sgs, lr or lrg.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// admm, sparsa or fss.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    n_train: Option<usize>,
    /// Comma-separated per-class training counts.
    #[arg(long)]
    train_counts: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $STRUCTSPARSE_OUT, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    kernel_sigma: Option<f64>,
    /// Comma-separated lambda values for `sweep`.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    lambda2_grid: Option<String>,
    /// Additional `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        let path = |p: Option<PathBuf>| p.map(|p| p.display().to_string());
        put("synth", self.synth);
        put("cube", path(self.cube));
        put("raw", path(self.raw));
        put("labels", path(self.labels));
        put("prior", self.prior);
        put("lambda", self.lambda.map(|v| v.to_string()));
        put("lambda2", self.lambda2.map(|v| v.to_string()));
        put("solver", self.solver);
        put("window", self.window.map(|v| v.to_string()));
        put("n_train", self.n_train.map(|v| v.to_string()));
        put("train_counts", self.train_counts);
        put("seed", self.seed.map(|v| v.to_string()));
        put("out", path(self.out));
        put("workers", self.workers.map(|v| v.to_string()));
        put("max_iters", self.max_iters.map(|v| v.to_string()));
        put("rho", self.rho.map(|v| v.to_string()));
        put("kernel_sigma", self.kernel_sigma.map(|v| v.to_string()));
        put("lambda_grid", self.lambda_grid);
        put("lambda2_grid", self.lambda2_grid);
        for item in self.set {
            match item.split_once('=') {
                Some((k, v)) => o.push((k.trim().to_string(), v.trim().to_string())),
                None => {
                    return Err(structsparse::Error::Config(format!("--set expects KEY=VALUE, got '{item}'")))
                }
            }
        }
        RunConfig::load(self.config.as_deref(), &o)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Classify(args) => {
            let config = args.into_config()?;
            let out = run_classify(&config)?;
            let m = &out.metrics;
            println!(
                "OA {:.2}%  AA {:.2}%  kappa {:.4}  ({} train, {} test, {} failed) -> {}",
                m.overall_accuracy,
                m.average_accuracy,
                m.kappa,
                out.n_train,
                out.n_test,
                out.failures,
                config.out_dir.display()
            );
        }
        Command::Toy(args) => {
            let config = args.into_config()?;
            let out = run_toy_pattern(&config)?;
            println!("prior\tnonzero_rows\tactive_groups\tgroup_ranks");
            for r in &out.results {
                println!(
                    "{}\t{}\t{}\t{:?}",
                    r.prior.short_name(),
                    r.stats.nonzero_rows,
                    r.stats.active_groups,
                    r.stats.group_ranks
                );
            }
            println!("patterns written to {}", config.out_dir.display());
        }
        Command::Sweep(args) => {
            let config = args.into_config()?;
            let out = run_sweep(&config)?;
            for p in &out.points {
                match &p.result {
                    Ok(oa) => println!("lambda {} lambda2 {:?}: validation OA {oa:.2}%", p.lambda, p.lambda2),
                    Err(e) => println!("lambda {} lambda2 {:?}: failed ({e})", p.lambda, p.lambda2),
                }
            }
            let m = &out.test.metrics;
            println!(
                "selected lambda {} lambda2 {:?}: test OA {:.2}%  AA {:.2}%  kappa {:.4}",
                out.selected.0, out.selected.1, m.overall_accuracy, m.average_accuracy, m.kappa
            );
        }
        Command::Synth { spec, seed, out } => {
            let out = out.unwrap_or_else(|| {
                std::env::var_os(structsparse::cli::OUT_DIR_ENV)
                    .map(PathBuf::from)
                    .unwrap_or_else(|| PathBuf::from("out"))
            });
            run_synth(&spec, seed, &out)?;
            println!("scene written to {}", out.display());
        }
        Command::Eval { truth, predicted, width, height, pixels } => {
            let (cm, m) = run_eval(&truth, &predicted, width, height, pixels.as_deref())?;
            print!("{}", cm.to_text());
            print!("{}", m.to_table("predicted"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
