use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use leadrank_core::pipeline::ScoreReport;
use leadrank_core::rank::read_groups_csv;
use leadrank_core::stats::{regress_all, write_regressions_csv};
use leadrank_core::{
    compute_log_returns, generate_synthetic, layer_averages, load_firm_csv, pairwise_matrix,
    run_pipeline, stratify, Error, ErrorKind, LagMode, LeadGraph, LeadStrengthMatrix, LogBase,
    PipelineConfig, PipelineInputs, PricePanel, ReturnPanel, Scheme, ScoreVector, SynthSpec,
};

/// Lead-lag networks, leader rankings and layer stratification for return panels.
#[derive(Debug, Parser)]
#[command(name = "leadrank", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Log returns from a long-form price file.
    Returns {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Pairwise lead-strength matrix.
    Matrix {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Thresholded graph and damped scores from a matrix.
    Rank {
        /// `matrix.json` as written by `matrix`.
        #[arg(long)]
        matrix: PathBuf,
        /// Solve the linear system instead of iterating.
        #[arg(long)]
        closed: bool,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Layered stratification by repeated leader extraction.
    Layers {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Regress scores on log firm covariates, optionally summarising layers.
    Regress {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        firms: PathBuf,
        /// `layers.csv` (`ticker,layer`).
        #[arg(long)]
        layers: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Synthetic panel with planted leaders and lagged followers.
    Synth {
        #[arg(long, default_value_t = 1)]
        leaders: usize,
        #[arg(long, default_value_t = 3)]
        followers: usize,
        /// Lag of each follower slot, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        lags: Vec<usize>,
        #[arg(long, default_value_t = 0.02)]
        leader_sigma: f64,
        #[arg(long, default_value_t = 0.006)]
        noise_sigma: f64,
        #[arg(long, default_value_t = 500)]
        length: usize,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Every stage end to end, with a manifest.
    Pipeline {
        #[arg(long)]
        prices: PathBuf,
        #[arg(long)]
        firms: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    #[arg(long)]
    prices: Option<PathBuf>,
    /// Long-form `period,ticker,log_return` file.
    #[arg(long)]
    returns: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_lag: Option<usize>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    t0_mode: Option<LagMode>,
    #[arg(long)]
    log_base: Option<LogBase>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::from_file(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.lambda {
            cfg.lambda = v;
        }
        if let Some(v) = self.max_lag {
            cfg.max_lag = v;
        }
        if let Some(v) = self.scheme {
            cfg.scheme = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.t0_mode {
            cfg.t0_mode = v;
        }
        if let Some(v) = self.log_base {
            cfg.log_base = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Source {
    fn load(&self) -> Result<ReturnPanel, Error> {
        match (&self.prices, &self.returns) {
            (Some(p), _) => Ok(compute_log_returns(&PricePanel::load_csv(p)?)?),
            (None, Some(r)) => Ok(ReturnPanel::load_csv(r)?),
            (None, None) => unreachable!("clap enforces one source"),
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
        })
    }

    fn text(&self, name: &str, mut text: String) -> Result<(), Error> {
        if !text.ends_with('\n') {
            text.push('\n');
        }
        let path = self.dir.join(name);
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    fn json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<(), Error> {
        self.text(
            name,
            serde_json::to_string_pretty(value).expect("serializable"),
        )
    }

    fn with(
        &self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), Error> {
        let path = self.dir.join(name);
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| io_err(&path, e))?;
        fs::write(&path, buf).map_err(|e| io_err(&path, e))
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Returns { prices, out_dir } => {
            let returns = compute_log_returns(&PricePanel::load_csv(&prices)?)?;
            let out = Out::new(&out_dir)?;
            out.with("returns.csv", |w| {
                returns.write_csv(w).map_err(std::io::Error::other)
            })?;
            eprintln!(
                "{} series, {} periods",
                returns.len(),
                returns.periods().len()
            );
        }
        Command::Matrix {
            source,
            config,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let matrix = pairwise_matrix(&source.load()?, &cfg.leadlag())?;
            let out = Out::new(&out_dir)?;
            out.with("matrix.csv", |w| matrix.write_csv(w))?;
            out.text("matrix.json", matrix.to_json())?;
        }
        Command::Rank {
            matrix,
            closed,
            config,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let text = fs::read_to_string(&matrix).map_err(|e| io_err(&matrix, e))?;
            let matrix = LeadStrengthMatrix::from_json(&text)?;
            let graph = LeadGraph::build(&matrix, cfg.lambda)?;
            let scores = if closed {
                ScoreVector::closed(&graph, cfg.alpha)?
            } else {
                ScoreVector::iterative(&graph, &cfg.pagerank())?
            };
            let out = Out::new(&out_dir)?;
            out.text("graph.json", graph.to_json())?;
            out.with("edges.csv", |w| graph.write_edges_csv(w))?;
            out.with("scores.csv", |w| scores.write_csv(w))?;
            out.json("scores.json", &ScoreReport::new(&scores, &graph, &cfg))?;
        }
        Command::Layers {
            source,
            config,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let params = cfg.stratify();
            let layers = stratify(&source.load()?, &params)?;
            let out = Out::new(&out_dir)?;
            out.text("layers.json", layers.to_json(&params))?;
            out.with("layers.csv", |w| layers.write_csv(w))?;
            for (k, group) in layers.groups().iter().enumerate() {
                println!("layer {}: {}", k + 1, group.join(" "));
            }
        }
        Command::Regress {
            scores,
            firms,
            layers,
            config,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let bytes = fs::read(&scores).map_err(|e| io_err(&scores, e))?;
            let scores = ScoreVector::read_csv(bytes.as_slice())?;
            let firms = load_firm_csv(&firms)?;
            let reports = regress_all(&scores, &firms, cfg.log_base)?;
            let out = Out::new(&out_dir)?;
            out.with("regression.csv", |w| write_regressions_csv(&reports, w))?;
            out.json("regression.json", &reports)?;
            if let Some(path) = layers {
                let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
                let groups = read_groups_csv(bytes.as_slice())?;
                let summary = layer_averages(&groups, &firms)?;
                out.with("layer_summary.csv", |w| summary.write_csv(w))?;
                out.json("layer_summary.json", &summary)?;
            }
            for r in &reports {
                println!(
                    "{:<13} beta={:.4} t={:.3} p={:.4} r2={:.3}",
                    r.covariate, r.beta_hat, r.t_stat, r.p_value, r.r_squared
                );
            }
        }
        Command::Synth {
            leaders,
            followers,
            lags,
            leader_sigma,
            noise_sigma,
            length,
            config,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let panel = generate_synthetic(&SynthSpec {
                n_leaders: leaders,
                followers_per_leader: followers,
                lags,
                leader_sigma,
                noise_sigma,
                length,
                seed: cfg.seed,
            })?;
            let out = Out::new(&out_dir)?;
            out.with("prices.csv", |w| {
                panel.prices.write_csv(w).map_err(std::io::Error::other)
            })?;
            out.json("truth.json", &panel.truth)?;
        }
        Command::Pipeline {
            prices,
            firms,
            config,
            out_dir,
        } => {
            let cfg = config.resolve()?;
            let output = run_pipeline(&PipelineInputs { prices, firms }, &cfg, &out_dir)?;
            for (k, group) in output.layers.groups().iter().enumerate() {
                println!("layer {}: {}", k + 1, group.join(" "));
            }
        }
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 1,
        ErrorKind::NonConvergence => 2,
        ErrorKind::Io => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
