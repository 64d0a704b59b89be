//! Thresholded lead-graph and its column-normalized transition matrix.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::leadlag::LeadStrengthMatrix;
use crate::matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("threshold must be a finite non-negative number, got {0}")]
    InvalidThreshold(f64),
    #[error("malformed graph document: {0}")]
    Format(String),
}

/// Keeps `|strength|` where it strictly exceeds `lambda`; everything else,
/// including the diagonal, becomes 0. Edges in both directions are allowed.
pub fn threshold(strengths: &LeadStrengthMatrix, lambda: f64) -> Result<DMatrix<f64>, GraphError> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(GraphError::InvalidThreshold(lambda));
    }
    let values = strengths.values();
    Ok(DMatrix::from_fn(values.nrows(), values.ncols(), |i, j| {
        let w = values[(i, j)].abs();
        if i != j && w > lambda {
            w
        } else {
            0.0
        }
    }))
}

/// Divides each column by its sum. All-zero (dangling) columns stay zero.
pub fn column_normalize(weights: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = weights.clone();
    for mut col in out.column_iter_mut() {
        let total: f64 = col.iter().sum();
        if total > 0.0 {
            col /= total;
        }
    }
    out
}

/// Weighted directed graph `n -> m` meaning "n leads m".
#[derive(Debug, Clone, PartialEq)]
pub struct LeadGraph {
    labels: Vec<String>,
    lambda: f64,
    weights: DMatrix<f64>,
    transition: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    labels: Vec<String>,
    lambda: f64,
    #[serde(rename = "W")]
    weights: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    transition: Vec<Vec<f64>>,
}

impl LeadGraph {
    pub fn build(strengths: &LeadStrengthMatrix, lambda: f64) -> Result<Self, GraphError> {
        let weights = threshold(strengths, lambda)?;
        let transition = column_normalize(&weights);
        Ok(Self {
            labels: strengths.labels().to_vec(),
            lambda,
            weights,
            transition,
        })
    }

    /// Graph over `labels` with an explicit weight grid; H is derived.
    pub fn from_weights(
        labels: Vec<String>,
        weights: DMatrix<f64>,
        lambda: f64,
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        if weights.nrows() != n || weights.ncols() != n {
            return Err(GraphError::Format(format!(
                "{n} labels but a {}x{} weight grid",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(GraphError::InvalidThreshold(lambda));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(GraphError::Format(
                "weights must be finite and non-negative".into(),
            ));
        }
        if (0..n).any(|i| weights[(i, i)] != 0.0) {
            return Err(GraphError::Format(
                "weight grid has a non-zero diagonal".into(),
            ));
        }
        let transition = column_normalize(&weights);
        Ok(Self {
            labels,
            lambda,
            weights,
            transition,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphDoc {
            labels: self.labels.clone(),
            lambda: self.lambda,
            weights: matrix::to_rows(&self.weights),
            transition: matrix::to_rows(&self.transition),
        })
        .expect("graph document serializes")
    }

    /// Reads a graph document. `H` is recomputed from `W` and must match.
    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let doc: GraphDoc =
            serde_json::from_str(text).map_err(|e| GraphError::Format(e.to_string()))?;
        let weights = matrix::from_rows(&doc.weights).map_err(GraphError::Format)?;
        let stored = matrix::from_rows(&doc.transition).map_err(GraphError::Format)?;
        let graph = Self::from_weights(doc.labels, weights, doc.lambda)?;
        if stored != graph.transition {
            return Err(GraphError::Format(
                "H is not the column normalization of W".into(),
            ));
        }
        Ok(graph)
    }

    /// `from,to,weight` for every positive edge, row-major.
    pub fn write_edges_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["from", "to", "weight"])?;
        for i in 0..self.len() {
            for j in 0..self.len() {
                let weight = self.weights[(i, j)];
                if weight > 0.0 {
                    w.write_record([
                        self.labels[i].as_str(),
                        self.labels[j].as_str(),
                        &weight.to_string(),
                    ])?;
                }
            }
        }
        w.flush()
    }
}
