//! Simple OLS of scores on log firm covariates, and per-layer covariate means.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use thiserror::Error;

use crate::ingest::{Covariate, FirmRecord};
use crate::rank::ScoreVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("x has {x} values but y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("regression needs at least 3 observations, got {0}")]
    TooFewObservations(usize),
    #[error("regressor has zero variance")]
    DegenerateRegressor,
    #[error("non-finite value in regression input")]
    NonFinite,
    #[error("tickers do not match between scores and firms: {0:?}")]
    JoinMismatch(Vec<String>),
    #[error("no firm record for layered tickers {0:?}")]
    MissingFirm(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum LogBase {
    #[default]
    #[serde(rename = "e")]
    E,
    #[serde(rename = "10")]
    Ten,
}

impl LogBase {
    pub fn log(self, v: f64) -> f64 {
        match self {
            LogBase::E => v.ln(),
            LogBase::Ten => v.log10(),
        }
    }
}

impl fmt::Display for LogBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogBase::E => "e",
            LogBase::Ten => "10",
        })
    }
}

impl FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" | "ln" => Ok(LogBase::E),
            "10" => Ok(LogBase::Ten),
            _ => Err(format!("unknown log base `{s}` (expected e|10)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub covariate: String,
    pub n_obs: usize,
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub se_beta: f64,
    pub t_stat: f64,
    /// Two-sided, Student-t with `n - 2` degrees of freedom.
    pub p_value: f64,
    pub r_squared: f64,
    pub x_mean: f64,
    pub y_mean: f64,
}

impl RegressionReport {
    /// Fitted value at `x`; equals `y_mean` exactly at `x_mean`.
    pub fn predict(&self, x: f64) -> f64 {
        self.y_mean + self.beta_hat * (x - self.x_mean)
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.iter().all(|v| *v == values[0]) {
        return values[0];
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-sided p-value of a t statistic with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Regresses `y` on `x` with an intercept.
pub fn ols_simple(x: &[f64], y: &[f64]) -> Result<RegressionReport, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            x: x.len(),
            y: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFewObservations(n));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let x_mean = mean(x);
    let y_mean = mean(y);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let dx = a - x_mean;
        let dy = b - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateRegressor);
    }
    let beta_hat = sxy / sxx;
    let alpha_hat = y_mean - beta_hat * x_mean;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = (b - y_mean) - beta_hat * (a - x_mean);
            e * e
        })
        .sum();
    let df = (n - 2) as f64;
    let se_beta = (ssr / df / sxx).sqrt();
    let r_squared = if syy > 0.0 {
        (1.0 - ssr / syy).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let t_stat = if se_beta > 0.0 {
        beta_hat / se_beta
    } else if beta_hat == 0.0 {
        0.0
    } else {
        beta_hat.signum() * f64::INFINITY
    };
    Ok(RegressionReport {
        covariate: String::new(),
        n_obs: n,
        alpha_hat,
        beta_hat,
        se_beta,
        t_stat,
        p_value: student_t_two_sided(t_stat, df),
        r_squared,
        x_mean,
        y_mean,
    })
}

/// Regresses scores on `log(covariate)`, joining scores and firms by ticker.
pub fn score_vs_firm(
    scores: &ScoreVector,
    firms: &[FirmRecord],
    covariate: Covariate,
    base: LogBase,
) -> Result<RegressionReport, StatsError> {
    let by_ticker: HashMap<&str, &FirmRecord> =
        firms.iter().map(|f| (f.ticker.as_str(), f)).collect();
    let score_set: BTreeSet<&str> = scores.labels.iter().map(String::as_str).collect();
    let firm_set: BTreeSet<&str> = by_ticker.keys().copied().collect();
    if score_set != firm_set || score_set.len() != scores.len() || firm_set.len() != firms.len() {
        let mut diff: Vec<String> = score_set
            .symmetric_difference(&firm_set)
            .map(|s| s.to_string())
            .collect();
        if diff.is_empty() {
            diff.push("<duplicate tickers>".into());
        }
        return Err(StatsError::JoinMismatch(diff));
    }
    let x: Vec<f64> = scores
        .labels
        .iter()
        .map(|t| base.log(by_ticker[t.as_str()].get(covariate)))
        .collect();
    let mut report = ols_simple(&x, &scores.scores)?;
    report.covariate = covariate.name().to_string();
    Ok(report)
}

/// Regressions on all four covariates, in their canonical order.
pub fn regress_all(
    scores: &ScoreVector,
    firms: &[FirmRecord],
    base: LogBase,
) -> Result<Vec<RegressionReport>, StatsError> {
    Covariate::ALL
        .into_iter()
        .map(|c| score_vs_firm(scores, firms, c, base))
        .collect()
}

/// `covariate,beta,se,t,p,r2`.
pub fn write_regressions_csv<W: Write>(
    reports: &[RegressionReport],
    writer: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["covariate", "beta", "se", "t", "p", "r2"])?;
    for r in reports {
        w.write_record([
            r.covariate.clone(),
            r.beta_hat.to_string(),
            r.se_beta.to_string(),
            r.t_stat.to_string(),
            r.p_value.to_string(),
            r.r_squared.to_string(),
        ])?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMeans {
    pub layer: usize,
    pub members: usize,
    pub total_assets: f64,
    pub revenue: f64,
    pub net_profit: f64,
    pub total_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layers: Vec<LayerMeans>,
}

impl LayerSummary {
    pub fn write_csv<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "layer",
            "members",
            "total_assets",
            "revenue",
            "net_profit",
            "total_profit",
        ])?;
        for l in &self.layers {
            w.write_record([
                l.layer.to_string(),
                l.members.to_string(),
                l.total_assets.to_string(),
                l.revenue.to_string(),
                l.net_profit.to_string(),
                l.total_profit.to_string(),
            ])?;
        }
        w.flush()
    }
}

/// Arithmetic mean of each covariate within each layer.
pub fn layer_averages(
    layers: &[Vec<String>],
    firms: &[FirmRecord],
) -> Result<LayerSummary, StatsError> {
    let by_ticker: HashMap<&str, &FirmRecord> =
        firms.iter().map(|f| (f.ticker.as_str(), f)).collect();
    let missing: Vec<String> = layers
        .iter()
        .flatten()
        .filter(|t| !by_ticker.contains_key(t.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(StatsError::MissingFirm(missing));
    }
    let rows = layers
        .iter()
        .enumerate()
        .map(|(k, members)| {
            let avg = |c: Covariate| {
                members
                    .iter()
                    .map(|t| by_ticker[t.as_str()].get(c))
                    .sum::<f64>()
                    / members.len() as f64
            };
            LayerMeans {
                layer: k + 1,
                members: members.len(),
                total_assets: avg(Covariate::TotalAssets),
                revenue: avg(Covariate::Revenue),
                net_profit: avg(Covariate::NetProfit),
                total_profit: avg(Covariate::TotalProfit),
            }
        })
        .collect();
    Ok(LayerSummary { layers: rows })
}
