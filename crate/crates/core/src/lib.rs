//! Lead-lag structure discovery for panels of time series.
//!
//! The pipeline turns a panel of prices into log returns ([`ingest`]),
//! measures how strongly each series leads every other one
//! ([`leadlag`]), keeps the strong relations as a weighted directed graph
//! ([`graph`]), scores the nodes with damped PageRank and peels the graph
//! into leader layers ([`rank`]), and relates scores and layers to firm-level
//! covariates ([`stats`]).

use thiserror::Error;

pub mod config;
pub mod fixtures;
pub mod graph;
pub mod ingest;
pub mod leadlag;
mod matrix;
pub mod pipeline;
pub mod rank;
pub mod stats;
pub mod synth;

pub use config::PipelineConfig;
pub use graph::{column_normalize, threshold, GraphError, LeadGraph};
pub use ingest::{
    compute_log_returns, load_firm_csv, Covariate, FirmRecord, IngestError, PricePanel, ReturnPanel,
};
pub use leadlag::{
    best_lag, lead_strength_uniform, lead_strength_weighted, pairwise_matrix, timediff_corr,
    LagMode, LagProfile, LeadLagError, LeadLagParams, LeadStrengthMatrix, Scheme,
};
pub use pipeline::{run_pipeline, Manifest, PipelineInputs, PipelineOutput};
pub use rank::{
    extract_leaders, pagerank_closed, pagerank_iterative, stratify, LayerAssignment,
    PageRankParams, RankError, ScoreVector, StratifyParams,
};
pub use stats::{
    layer_averages, ols_simple, score_vs_firm, LayerSummary, LogBase, RegressionReport, StatsError,
};
pub use synth::{generate_synthetic, GroundTruth, SynthSpec, SyntheticPanel};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    LeadLag(#[from] LeadLagError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rank(#[from] RankError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("layer {layer}: {source}")]
    Layer {
        layer: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    NonConvergence,
    Io,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. } | Error::Ingest(IngestError::Io { .. }) => ErrorKind::Io,
            Error::Rank(RankError::NonConvergence { .. }) => ErrorKind::NonConvergence,
            Error::Layer { source, .. } | Error::Stage { source, .. } => source.kind(),
            _ => ErrorKind::Validation,
        }
    }
}
