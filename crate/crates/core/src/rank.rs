//! Damped PageRank scoring, leader extraction and layer-by-layer stratification.
//!
//! Scores solve `s = (1 - alpha)·1 + alpha·H·s`, where `H` is the
//! column-normalized lead graph. With `H[n][m]` the share of `m`'s in-weight
//! coming from `n`, a node collects score from the nodes it leads, so strong
//! leaders end up with high scores. Columns of `H` sum to at most 1, hence the
//! spectral radius of `alpha·H` is below 1 for `alpha < 1` and both the power
//! iteration and the direct solve are well defined.
//!
//! Leader extraction visits nodes from highest to lowest score and deletes a
//! node when the score-weighted inflow from the nodes still present reaches its
//! own score. Deletions take effect immediately, which can make a downstream
//! node a leader once the only node pointing at it has been deleted (a chain
//! `1 -> 2 -> 3` yields leaders `{1, 3}`).

use std::cmp::Ordering;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::LeadGraph;
use crate::ingest::ReturnPanel;
use crate::leadlag::{pairwise_matrix, LeadLagParams};
use crate::Error as PipelineError;

/// Column sums of `H` may exceed 1 by at most this much (rounding slack).
const COLUMN_SUM_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RankError {
    #[error("damping factor must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("max_iter must be at least 1")]
    InvalidMaxIter,
    #[error("transition matrix is {rows}x{cols}; expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("transition matrix column {column} sums to {sum}, above 1")]
    ColumnSum { column: usize, sum: f64 },
    #[error("transition matrix has a negative or non-finite entry at ({row}, {column})")]
    BadEntry { row: usize, column: usize },
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },
    #[error("linear system (I - alpha H) s = (1 - alpha) 1 could not be solved")]
    Singular,
    #[error("scores are for labels {scores:?} but the graph has {graph:?}")]
    LabelMismatch {
        scores: Vec<String>,
        graph: Vec<String>,
    },
    #[error("malformed score document: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankParams {
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankParams {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), RankError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(RankError::InvalidAlpha(alpha))
    }
}

fn check_transition(h: &DMatrix<f64>) -> Result<(), RankError> {
    if h.nrows() != h.ncols() {
        return Err(RankError::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    for (column, col) in h.column_iter().enumerate() {
        if let Some(row) = col.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(RankError::BadEntry { row, column });
        }
        let sum: f64 = col.iter().sum();
        if sum > 1.0 + COLUMN_SUM_SLACK {
            return Err(RankError::ColumnSum { column, sum });
        }
    }
    Ok(())
}

/// Fixed point reached by power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeSolution {
    pub scores: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of the last step.
    pub residual: f64,
}

/// Iterates `s <- (1 - alpha)·1 + alpha·H·s` from the all-ones vector until
/// the max-norm step drops below `tol`.
pub fn pagerank_iterative(
    h: &DMatrix<f64>,
    params: &PageRankParams,
) -> Result<IterativeSolution, RankError> {
    check_alpha(params.alpha)?;
    if params.tol.is_nan() || params.tol <= 0.0 {
        return Err(RankError::InvalidTolerance(params.tol));
    }
    if params.max_iter == 0 {
        return Err(RankError::InvalidMaxIter);
    }
    check_transition(h)?;
    let n = h.nrows();
    let teleport = 1.0 - params.alpha;
    let mut scores = DVector::from_element(n, 1.0);
    let mut residual = f64::INFINITY;
    for iteration in 1..=params.max_iter {
        let mut next = h * &scores;
        next.iter_mut()
            .for_each(|v| *v = teleport + params.alpha * *v);
        residual = (&next - &scores).amax();
        scores = next;
        if residual < params.tol {
            return Ok(IterativeSolution {
                scores: scores.iter().copied().collect(),
                iterations: iteration,
                residual,
            });
        }
    }
    Err(RankError::NonConvergence {
        iterations: params.max_iter,
        residual,
        last: scores.iter().copied().collect(),
    })
}

/// Solves `(I - alpha·H)·s = (1 - alpha)·1` by LU decomposition.
pub fn pagerank_closed(h: &DMatrix<f64>, alpha: f64) -> Result<Vec<f64>, RankError> {
    check_alpha(alpha)?;
    check_transition(h)?;
    let n = h.nrows();
    let system = DMatrix::identity(n, n) - h * alpha;
    let rhs = DVector::from_element(n, 1.0 - alpha);
    let solution = system.lu().solve(&rhs).ok_or(RankError::Singular)?;
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(RankError::Singular);
    }
    Ok(solution.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ScoreMethod {
    Iterative { iterations: usize, residual: f64 },
    Closed,
}

/// PageRank scores of a labelled node set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
    pub alpha: f64,
    pub method: ScoreMethod,
}

impl ScoreVector {
    pub fn iterative(graph: &LeadGraph, params: &PageRankParams) -> Result<Self, RankError> {
        let sol = pagerank_iterative(graph.transition(), params)?;
        Ok(Self {
            labels: graph.labels().to_vec(),
            scores: sol.scores,
            alpha: params.alpha,
            method: ScoreMethod::Iterative {
                iterations: sol.iterations,
                residual: sol.residual,
            },
        })
    }

    pub fn closed(graph: &LeadGraph, alpha: f64) -> Result<Self, RankError> {
        Ok(Self {
            labels: graph.labels().to_vec(),
            scores: pagerank_closed(graph.transition(), alpha)?,
            alpha,
            method: ScoreMethod::Closed,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.scores[i])
    }

    /// `ticker,score` at full precision.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["ticker", "score"])?;
        for (label, score) in self.labels.iter().zip(&self.scores) {
            w.write_record([label.as_str(), &score.to_string()])?;
        }
        w.flush()
    }

    /// Reads `ticker,score`. The damping factor is unknown from the file and
    /// recorded as NaN.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, RankError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| RankError::Format(e.to_string()))?;
        if headers.iter().collect::<Vec<_>>() != ["ticker", "score"] {
            return Err(RankError::Format("expected header `ticker,score`".into()));
        }
        let mut labels = Vec::new();
        let mut scores = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| RankError::Format(e.to_string()))?;
            labels.push(rec[0].trim().to_string());
            scores.push(
                rec[1]
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| RankError::Format(format!("bad score `{}`", &rec[1])))?,
            );
        }
        Ok(Self {
            labels,
            scores,
            alpha: f64::NAN,
            method: ScoreMethod::Closed,
        })
    }
}

/// Indices sorted by descending score; equal scores keep input order.
pub fn visit_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    order
}

/// Survivors of the sequential deletion pass, in input order.
pub fn extract_leaders(graph: &LeadGraph, scores: &ScoreVector) -> Result<Vec<usize>, RankError> {
    if scores.labels != graph.labels() {
        return Err(RankError::LabelMismatch {
            scores: scores.labels.clone(),
            graph: graph.labels().to_vec(),
        });
    }
    let h = graph.transition();
    let n = graph.len();
    let row_sums: Vec<f64> = h.row_iter().map(|r| r.sum()).collect();
    let mut alive = vec![true; n];
    for i in visit_order(&scores.scores) {
        let inflow: f64 = (0..n)
            .filter(|&u| alive[u] && row_sums[u] > 0.0)
            .map(|u| scores.scores[u] * h[(u, i)] / row_sums[u])
            .sum();
        if inflow >= scores.scores[i] {
            alive[i] = false;
        }
    }
    Ok((0..n).filter(|&i| alive[i]).collect())
}

/// Everything the stratification loop needs to rebuild a layer from returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StratifyParams {
    #[serde(flatten)]
    pub leadlag: LeadLagParams,
    pub lambda: f64,
    #[serde(flatten)]
    pub pagerank: PageRankParams,
}

impl Default for StratifyParams {
    fn default() -> Self {
        Self {
            leadlag: LeadLagParams::default(),
            lambda: 0.1,
            pagerank: PageRankParams::default(),
        }
    }
}

/// One extracted leader set together with the scores of the subset it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub members: Vec<String>,
    pub scores: ScoreVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerAssignment {
    pub layers: Vec<Layer>,
}

#[derive(Serialize, Deserialize)]
struct LayersDoc {
    layers: Vec<Vec<String>>,
    params: StratifyParams,
}

impl LayerAssignment {
    pub fn groups(&self) -> Vec<Vec<String>> {
        self.layers.iter().map(|l| l.members.clone()).collect()
    }

    /// 1-based layer index of a ticker.
    pub fn layer_of(&self, ticker: &str) -> Option<usize> {
        self.layers
            .iter()
            .position(|l| l.members.iter().any(|m| m == ticker))
            .map(|i| i + 1)
    }

    pub fn to_json(&self, params: &StratifyParams) -> String {
        serde_json::to_string_pretty(&LayersDoc {
            layers: self.groups(),
            params: *params,
        })
        .expect("layer document serializes")
    }

    /// `ticker,layer` in layer order.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        write_groups_csv(&self.groups(), writer)
    }
}

pub fn write_groups_csv<W: Write>(groups: &[Vec<String>], writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ticker", "layer"])?;
    for (k, group) in groups.iter().enumerate() {
        for t in group {
            w.write_record([t.as_str(), &(k + 1).to_string()])?;
        }
    }
    w.flush()
}

/// Reads `ticker,layer` back into layer groups.
pub fn read_groups_csv<R: Read>(reader: R) -> Result<Vec<Vec<String>>, RankError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut groups: Vec<Vec<String>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| RankError::Format(e.to_string()))?;
        let layer: usize = rec[1]
            .trim()
            .parse()
            .ok()
            .filter(|l| *l >= 1)
            .ok_or_else(|| RankError::Format(format!("bad layer `{}`", &rec[1])))?;
        if groups.len() < layer {
            groups.resize(layer, Vec::new());
        }
        groups[layer - 1].push(rec[0].trim().to_string());
    }
    if groups.iter().any(Vec::is_empty) {
        return Err(RankError::Format("layer numbering has gaps".into()));
    }
    Ok(groups)
}

/// Score the current subset, peel off its leaders as the next layer, repeat on
/// what is left until nothing remains.
pub fn stratify(
    panel: &ReturnPanel,
    params: &StratifyParams,
) -> Result<LayerAssignment, PipelineError> {
    let mut remaining: Vec<usize> = (0..panel.len()).collect();
    let mut layers = Vec::new();
    while !remaining.is_empty() {
        let layer = layers.len() + 1;
        let annotate = |e: PipelineError| PipelineError::Layer {
            layer,
            source: Box::new(e),
        };
        let subset = panel.select(&remaining);
        let strengths =
            pairwise_matrix(&subset, &params.leadlag).map_err(|e| annotate(e.into()))?;
        let graph = LeadGraph::build(&strengths, params.lambda).map_err(|e| annotate(e.into()))?;
        let scores =
            ScoreVector::iterative(&graph, &params.pagerank).map_err(|e| annotate(e.into()))?;
        let leaders = extract_leaders(&graph, &scores).map_err(|e| annotate(e.into()))?;
        debug_assert!(!leaders.is_empty());
        let members: Vec<String> = leaders
            .iter()
            .map(|&i| subset.tickers()[i].clone())
            .collect();
        remaining = remaining
            .iter()
            .enumerate()
            .filter(|(k, _)| !leaders.contains(k))
            .map(|(_, &i)| i)
            .collect();
        layers.push(Layer { members, scores });
    }
    Ok(LayerAssignment { layers })
}
