//! Time-difference correlation and lead-strength aggregation.
//!
//! For two series `x` and `y` of length `N` and a lag `h > 0`, the
//! time-difference correlation `r(h)` is the Pearson correlation between
//! `x[0..N-h]` and `y[h..N]`, each window centred on its own mean. A large
//! `r(h)` says that `x` moves `h` periods before `y`.
//!
//! Per-lag correlations over `h = 1..=H` are folded into one lead strength,
//! either as a plain mean ([`Scheme::Uniform`]) or as a mean weighted by
//! `d_h = 1 / (1 + |h - t0|)` around the best lag `t0` ([`Scheme::Weighted`]).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ReturnPanel;
use crate::matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LeadLagError {
    #[error("series lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("lag must be at least 1")]
    ZeroLag,
    #[error("lag {lag} leaves fewer than 2 overlapping points in a series of length {len}")]
    InsufficientOverlap { len: usize, lag: usize },
    #[error("zero variance in the overlap window at lag {lag}")]
    DegenerateVariance { lag: usize },
    #[error("no lag in 1..={max_lag} has a non-degenerate overlap")]
    NoValidLag { max_lag: usize },
    #[error(
        "pair ({leader}, {follower}) shares {overlap} periods; at least {required} are required"
    )]
    PairOverlap {
        leader: String,
        follower: String,
        overlap: usize,
        required: usize,
    },
    #[error("pair ({leader}, {follower}): {source}")]
    Pair {
        leader: String,
        follower: String,
        #[source]
        source: Box<LeadLagError>,
    },
    #[error("malformed matrix document: {0}")]
    Format(String),
}

/// How per-lag correlations are folded into one lead strength.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Uniform,
    #[default]
    Weighted,
}

/// Criterion for picking the best lag: largest `r(h)` or largest `|r(h)|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LagMode {
    #[default]
    Signed,
    Abs,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Uniform => "uniform",
            Scheme::Weighted => "weighted",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(Scheme::Uniform),
            "weighted" => Ok(Scheme::Weighted),
            _ => Err(format!("unknown scheme `{s}` (expected uniform|weighted)")),
        }
    }
}

impl fmt::Display for LagMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LagMode::Signed => "signed",
            LagMode::Abs => "abs",
        })
    }
}

impl FromStr for LagMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "signed" => Ok(LagMode::Signed),
            "abs" => Ok(LagMode::Abs),
            _ => Err(format!("unknown lag mode `{s}` (expected signed|abs)")),
        }
    }
}

fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|v| *v == xs[0])
}

/// Correlation of `x` leading `y` by `lag` periods.
pub fn timediff_corr(x: &[f64], y: &[f64], lag: usize) -> Result<f64, LeadLagError> {
    if x.len() != y.len() {
        return Err(LeadLagError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if lag == 0 {
        return Err(LeadLagError::ZeroLag);
    }
    let len = x.len();
    if lag + 2 > len {
        return Err(LeadLagError::InsufficientOverlap { len, lag });
    }
    let xs = &x[..len - lag];
    let ys = &y[lag..];
    if is_constant(xs) || is_constant(ys) {
        return Err(LeadLagError::DegenerateVariance { lag });
    }
    let count = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / count;
    let y_mean = ys.iter().sum::<f64>() / count;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in xs.iter().zip(ys) {
        let dx = a - x_mean;
        let dy = b - y_mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(LeadLagError::DegenerateVariance { lag });
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Correlations `r(1..=max_lag)`; any degenerate lag is an error.
pub fn correlation_profile(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<f64>, LeadLagError> {
    if max_lag == 0 {
        return Err(LeadLagError::ZeroLag);
    }
    (1..=max_lag).map(|h| timediff_corr(x, y, h)).collect()
}

/// Index (1-based lag) of the best entry of a profile. Ties go to the smallest lag.
fn argmax_lag(correlations: &[f64], mode: LagMode) -> Option<usize> {
    let key = |r: f64| match mode {
        LagMode::Signed => r,
        LagMode::Abs => r.abs(),
    };
    let mut best: Option<(usize, f64)> = None;
    for (i, &r) in correlations.iter().enumerate() {
        if r.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if key(r) <= b => {}
            _ => best = Some((i + 1, key(r))),
        }
    }
    best.map(|(lag, _)| lag)
}

/// The lag in `1..=max_lag` with the largest correlation (or largest
/// magnitude in [`LagMode::Abs`]). Lags whose windows are degenerate are
/// skipped; if every lag is degenerate the call fails.
pub fn best_lag(
    x: &[f64],
    y: &[f64],
    max_lag: usize,
    mode: LagMode,
) -> Result<usize, LeadLagError> {
    if max_lag == 0 {
        return Err(LeadLagError::ZeroLag);
    }
    let mut profile = Vec::with_capacity(max_lag);
    for h in 1..=max_lag {
        match timediff_corr(x, y, h) {
            Ok(r) => profile.push(r),
            Err(LeadLagError::DegenerateVariance { .. }) => profile.push(f64::NAN),
            Err(e) => return Err(e),
        }
    }
    argmax_lag(&profile, mode).ok_or(LeadLagError::NoValidLag { max_lag })
}

/// Plain mean of a correlation profile.
pub fn aggregate_uniform(correlations: &[f64]) -> f64 {
    correlations.iter().sum::<f64>() / correlations.len() as f64
}

/// Distance weights `d_h = 1 / (1 + |h - t0|)` for `h = 1..=max_lag`.
pub fn distance_weights(max_lag: usize, t0: usize) -> Vec<f64> {
    (1..=max_lag)
        .map(|h| 1.0 / (1.0 + h.abs_diff(t0) as f64))
        .collect()
}

/// Weighted mean of a profile around its best lag; returns `(strength, t0)`.
pub fn aggregate_weighted(correlations: &[f64], mode: LagMode) -> (f64, usize) {
    let t0 = argmax_lag(correlations, mode).unwrap_or(1);
    let weights = distance_weights(correlations.len(), t0);
    let total: f64 = weights.iter().sum();
    let strength = correlations
        .iter()
        .zip(&weights)
        .map(|(r, d)| r * d)
        .sum::<f64>()
        / total;
    (strength, t0)
}

/// Mean of `r(h)` over `h = 1..=max_lag`.
pub fn lead_strength_uniform(x: &[f64], y: &[f64], max_lag: usize) -> Result<f64, LeadLagError> {
    Ok(aggregate_uniform(&correlation_profile(x, y, max_lag)?))
}

/// `Σ r(h)·d_h / Σ d_h` with `d_h` centred on the best lag chosen by `mode`.
pub fn lead_strength_weighted(
    x: &[f64],
    y: &[f64],
    max_lag: usize,
    mode: LagMode,
) -> Result<f64, LeadLagError> {
    Ok(aggregate_weighted(&correlation_profile(x, y, max_lag)?, mode).0)
}

/// Parameters of the pairwise lead analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadLagParams {
    pub max_lag: usize,
    pub scheme: Scheme,
    pub t0_mode: LagMode,
}

impl Default for LeadLagParams {
    fn default() -> Self {
        Self {
            max_lag: 5,
            scheme: Scheme::Weighted,
            t0_mode: LagMode::Signed,
        }
    }
}

/// Full lag analysis of one ordered pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagProfile {
    pub leader_idx: usize,
    pub follower_idx: usize,
    /// `correlations[h - 1] = r(h)`.
    pub correlations: Vec<f64>,
    pub best_lag: usize,
    pub strength: f64,
}

/// Lag analysis of `x` (index 0) leading `y` (index 1).
pub fn lag_profile(
    x: &[f64],
    y: &[f64],
    params: &LeadLagParams,
) -> Result<LagProfile, LeadLagError> {
    let correlations = correlation_profile(x, y, params.max_lag)?;
    let (strength, best_lag) = match params.scheme {
        Scheme::Uniform => (
            aggregate_uniform(&correlations),
            argmax_lag(&correlations, params.t0_mode).unwrap_or(1),
        ),
        Scheme::Weighted => aggregate_weighted(&correlations, params.t0_mode),
    };
    Ok(LagProfile {
        leader_idx: 0,
        follower_idx: 1,
        correlations,
        best_lag,
        strength,
    })
}

/// Lag analysis of one ordered pair of panel series over their joint periods.
pub fn panel_profile(
    panel: &ReturnPanel,
    leader: usize,
    follower: usize,
    params: &LeadLagParams,
) -> Result<LagProfile, LeadLagError> {
    let (x, y) = panel.joint(leader, follower);
    let mut profile = lag_profile(&x, &y, params)?;
    profile.leader_idx = leader;
    profile.follower_idx = follower;
    Ok(profile)
}

/// Square matrix of lead strengths; `values[(n, m)]` is the strength of `n` over `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LeadStrengthMatrix {
    labels: Vec<String>,
    values: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    labels: Vec<String>,
    values: Vec<Vec<f64>>,
}

impl LeadStrengthMatrix {
    pub fn new(labels: Vec<String>, values: DMatrix<f64>) -> Result<Self, LeadLagError> {
        let n = labels.len();
        if values.nrows() != n || values.ncols() != n {
            return Err(LeadLagError::Format(format!(
                "{n} labels but a {}x{} matrix",
                values.nrows(),
                values.ncols()
            )));
        }
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(LeadLagError::Format(format!("non-zero diagonal at {i}")));
            }
        }
        if values.iter().any(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(LeadLagError::Format(
                "entries must be finite and in [-1, 1]".into(),
            ));
        }
        Ok(Self { labels, values })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, leader: usize, follower: usize) -> f64 {
        self.values[(leader, follower)]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MatrixDoc {
            labels: self.labels.clone(),
            values: matrix::to_rows(&self.values),
        })
        .expect("matrix document serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LeadLagError> {
        let doc: MatrixDoc =
            serde_json::from_str(text).map_err(|e| LeadLagError::Format(e.to_string()))?;
        let values = matrix::from_rows(&doc.values).map_err(LeadLagError::Format)?;
        Self::new(doc.labels, values)
    }

    /// `leader,follower,strength` for every off-diagonal entry, row-major.
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["leader", "follower", "strength"])?;
        for (i, a) in self.labels.iter().enumerate() {
            for (j, b) in self.labels.iter().enumerate() {
                if i != j {
                    w.write_record([a.as_str(), b.as_str(), &self.values[(i, j)].to_string()])?;
                }
            }
        }
        w.flush()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, LeadLagError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut labels: Vec<String> = Vec::new();
        let mut entries = Vec::new();
        let index = |labels: &mut Vec<String>, name: &str| {
            labels.iter().position(|l| l == name).unwrap_or_else(|| {
                labels.push(name.to_string());
                labels.len() - 1
            })
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| LeadLagError::Format(e.to_string()))?;
            if rec.len() != 3 {
                return Err(LeadLagError::Format(format!(
                    "expected 3 fields, got {}",
                    rec.len()
                )));
            }
            let i = index(&mut labels, &rec[0]);
            let j = index(&mut labels, &rec[1]);
            let v: f64 = rec[2]
                .parse()
                .map_err(|_| LeadLagError::Format(format!("bad strength `{}`", &rec[2])))?;
            entries.push((i, j, v));
        }
        let mut values = DMatrix::zeros(labels.len(), labels.len());
        for (i, j, v) in entries {
            values[(i, j)] = v;
        }
        Self::new(labels, values)
    }
}

/// Lead strength of every ordered pair of the panel.
///
/// Each pair is evaluated on the periods where both series have a return.
/// Pairs are independent and computed in parallel; the result does not depend
/// on scheduling.
pub fn pairwise_matrix(
    panel: &ReturnPanel,
    params: &LeadLagParams,
) -> Result<LeadStrengthMatrix, LeadLagError> {
    let n = panel.len();
    let required = params.max_lag + 2;
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();

    let results: Vec<Result<(f64, f64), LeadLagError>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (xi, xj) = panel.joint(i, j);
            let name =
                |a: usize, b: usize| (panel.tickers()[a].clone(), panel.tickers()[b].clone());
            if xi.len() < required {
                let (leader, follower) = name(i, j);
                return Err(LeadLagError::PairOverlap {
                    leader,
                    follower,
                    overlap: xi.len(),
                    required,
                });
            }
            let wrap = |a: usize, b: usize| {
                move |e: LeadLagError| {
                    let (leader, follower) = name(a, b);
                    LeadLagError::Pair {
                        leader,
                        follower,
                        source: Box::new(e),
                    }
                }
            };
            let forward = lag_profile(&xi, &xj, params).map_err(wrap(i, j))?.strength;
            let backward = lag_profile(&xj, &xi, params).map_err(wrap(j, i))?.strength;
            Ok((forward, backward))
        })
        .collect();

    let mut values = DMatrix::zeros(n, n);
    for (&(i, j), res) in pairs.iter().zip(results) {
        let (forward, backward) = res?;
        values[(i, j)] = forward;
        values[(j, i)] = backward;
    }
    LeadStrengthMatrix::new(panel.tickers().to_vec(), values)
}
