//! End-to-end run: ingest, lead analysis, graph, ranking, statistics.
//!
//! Every stage writes its interchange files into the output directory and a
//! `manifest.json` records the configuration, SHA-256 digests of inputs and
//! outputs, and per-stage wall-clock timings. Apart from the timings, output is
//! a pure function of the inputs and the configuration.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::graph::LeadGraph;
use crate::ingest::{compute_log_returns, read_firm_csv, FirmRecord, PricePanel, ReturnPanel};
use crate::leadlag::{pairwise_matrix, LeadStrengthMatrix};
use crate::rank::{stratify, LayerAssignment, ScoreMethod, ScoreVector};
use crate::stats::{
    layer_averages, regress_all, write_regressions_csv, LayerSummary, RegressionReport,
};
use crate::Error;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineInputs {
    pub prices: PathBuf,
    /// Firm covariates; the stats stage is skipped when absent.
    pub firms: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FileDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StageRecord {
    pub name: &'static str,
    pub status: &'static str,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: PipelineConfig,
    pub inputs: Vec<FileDigest>,
    pub stages: Vec<StageRecord>,
    pub outputs: Vec<FileDigest>,
}

/// JSON companion of `scores.csv`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScoreReport {
    pub alpha: f64,
    pub lambda: f64,
    pub max_lag: usize,
    pub scheme: String,
    pub t0_mode: String,
    pub iterations: usize,
    pub residual: f64,
    pub edges: usize,
    pub scores: Vec<TickerScore>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TickerScore {
    pub ticker: String,
    pub score: f64,
}

impl ScoreReport {
    pub fn new(scores: &ScoreVector, graph: &LeadGraph, config: &PipelineConfig) -> Self {
        let (iterations, residual) = match scores.method {
            ScoreMethod::Iterative {
                iterations,
                residual,
            } => (iterations, residual),
            ScoreMethod::Closed => (0, 0.0),
        };
        Self {
            alpha: scores.alpha,
            lambda: graph.lambda(),
            max_lag: config.max_lag,
            scheme: config.scheme.to_string(),
            t0_mode: config.t0_mode.to_string(),
            iterations,
            residual,
            edges: graph.edge_count(),
            scores: scores
                .labels
                .iter()
                .zip(&scores.scores)
                .map(|(t, s)| TickerScore {
                    ticker: t.clone(),
                    score: *s,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub returns: ReturnPanel,
    pub matrix: LeadStrengthMatrix,
    pub graph: LeadGraph,
    pub scores: ScoreVector,
    pub layers: LayerAssignment,
    pub regressions: Option<Vec<RegressionReport>>,
    pub layer_summary: Option<LayerSummary>,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

struct OutDir<'a> {
    dir: &'a Path,
    written: Vec<FileDigest>,
}

impl OutDir<'_> {
    fn write(&mut self, name: &str, bytes: Vec<u8>) -> Result<(), Error> {
        let path = self.dir.join(name);
        fs::write(&path, &bytes).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.written.push(FileDigest {
            role: "output".into(),
            path: name.into(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> Result<(), Error> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|source| Error::Io {
            path: self.dir.join(name).display().to_string(),
            source,
        })?;
        self.write(name, buf)
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    text.into_bytes()
}

struct Stages {
    records: Vec<StageRecord>,
}

impl Stages {
    fn run<T>(
        &mut self,
        name: &'static str,
        f: impl FnOnce() -> Result<T, Error>,
    ) -> Result<T, Error> {
        let start = Instant::now();
        let out = f().map_err(|e| Error::Stage {
            stage: name,
            source: Box::new(e),
        })?;
        self.records.push(StageRecord {
            name,
            status: "ok",
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(out)
    }
}

/// Runs every stage and writes all outputs plus `manifest.json` into `out_dir`.
pub fn run_pipeline(
    inputs: &PipelineInputs,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<PipelineOutput, Error> {
    config.validate()?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut out = OutDir {
        dir: out_dir,
        written: Vec::new(),
    };
    let mut stages = Stages {
        records: Vec::new(),
    };
    let mut input_digests = Vec::new();

    let returns = stages.run("ingest", || {
        let bytes = read_bytes(&inputs.prices)?;
        input_digests.push(FileDigest {
            role: "prices".into(),
            path: inputs.prices.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        let prices = PricePanel::read_csv(bytes.as_slice())?;
        let returns = compute_log_returns(&prices)?;
        out.write_with("returns.csv", |w| {
            returns.write_csv(w).map_err(std::io::Error::other)
        })?;
        Ok(returns)
    })?;

    let matrix = stages.run("leadlag", || {
        let matrix = pairwise_matrix(&returns, &config.leadlag())?;
        out.write_with("matrix.csv", |w| matrix.write_csv(w))?;
        out.write(
            "matrix.json",
            format!("{}\n", matrix.to_json()).into_bytes(),
        )?;
        Ok(matrix)
    })?;

    let graph = stages.run("graph", || {
        let graph = LeadGraph::build(&matrix, config.lambda)?;
        out.write("graph.json", format!("{}\n", graph.to_json()).into_bytes())?;
        out.write_with("edges.csv", |w| graph.write_edges_csv(w))?;
        Ok(graph)
    })?;

    let (scores, layers) = stages.run("rank", || {
        let scores = ScoreVector::iterative(&graph, &config.pagerank())?;
        out.write_with("scores.csv", |w| scores.write_csv(w))?;
        out.write(
            "scores.json",
            to_json(&ScoreReport::new(&scores, &graph, config)),
        )?;
        let params = config.stratify();
        let layers = stratify(&returns, &params)?;
        out.write(
            "layers.json",
            format!("{}\n", layers.to_json(&params)).into_bytes(),
        )?;
        out.write_with("layers.csv", |w| layers.write_csv(w))?;
        Ok((scores, layers))
    })?;

    let (regressions, layer_summary) = match &inputs.firms {
        Some(path) => {
            let (r, s) = stages.run("stats", || {
                let bytes = read_bytes(path)?;
                input_digests.push(FileDigest {
                    role: "firms".into(),
                    path: path.display().to_string(),
                    sha256: sha256_hex(&bytes),
                });
                let firms: Vec<FirmRecord> = read_firm_csv(bytes.as_slice())?;
                let regressions = regress_all(&scores, &firms, config.log_base)?;
                out.write_with("regression.csv", |w| write_regressions_csv(&regressions, w))?;
                out.write("regression.json", to_json(&regressions))?;
                let summary = layer_averages(&layers.groups(), &firms)?;
                out.write_with("layer_summary.csv", |w| summary.write_csv(w))?;
                out.write("layer_summary.json", to_json(&summary))?;
                Ok((regressions, summary))
            })?;
            (Some(r), Some(s))
        }
        None => {
            stages.records.push(StageRecord {
                name: "stats",
                status: "skipped",
                elapsed_ms: 0.0,
            });
            (None, None)
        }
    };

    let manifest = Manifest {
        tool: "leadrank",
        version: env!("CARGO_PKG_VERSION"),
        config: *config,
        inputs: input_digests,
        stages: stages.records,
        outputs: out.written.clone(),
    };
    out.write(MANIFEST_FILE, to_json(&manifest))?;

    Ok(PipelineOutput {
        returns,
        matrix,
        graph,
        scores,
        layers,
        regressions,
        layer_summary,
        manifest,
    })
}
