//! Pipeline configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! max_lag = 5
//! scheme = weighted
//! lambda = 0.1
//! alpha = 0.85
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::leadlag::{LagMode, LeadLagParams, Scheme};
use crate::rank::{PageRankParams, StratifyParams};
use crate::stats::LogBase;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub max_lag: usize,
    pub scheme: Scheme,
    pub lambda: f64,
    pub alpha: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub t0_mode: LagMode,
    pub log_base: LogBase,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_lag: 5,
            scheme: Scheme::Weighted,
            lambda: 0.1,
            alpha: 0.85,
            tol: 1e-10,
            max_iter: 10_000,
            t0_mode: LagMode::Signed,
            log_base: LogBase::E,
            seed: 0,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, Error> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must be in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        if self.max_lag < 1 {
            return Err(Error::Config("max_lag must be >= 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::Config("max_iter must be >= 1".into()));
        }
        Ok(())
    }

    /// Sets one field by its name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        match key {
            "max_lag" => self.max_lag = parse(key, value)?,
            "scheme" => self.scheme = value.parse().map_err(Error::Config)?,
            "lambda" => self.lambda = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "tol" => self.tol = parse(key, value)?,
            "max_iter" => self.max_iter = parse(key, value)?,
            "t0_mode" => self.t0_mode = value.parse().map_err(Error::Config)?,
            "log_base" => self.log_base = value.parse().map_err(Error::Config)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` document on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<(), Error> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, Error> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.merge_text(&text)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        format!(
            "max_lag = {}\nscheme = {}\nlambda = {}\nalpha = {}\ntol = {:e}\nmax_iter = {}\n\
             t0_mode = {}\nlog_base = {}\nseed = {}\n",
            self.max_lag,
            self.scheme,
            self.lambda,
            self.alpha,
            self.tol,
            self.max_iter,
            self.t0_mode,
            self.log_base,
            self.seed
        )
    }

    pub fn leadlag(&self) -> LeadLagParams {
        LeadLagParams {
            max_lag: self.max_lag,
            scheme: self.scheme,
            t0_mode: self.t0_mode,
        }
    }

    pub fn pagerank(&self) -> PageRankParams {
        PageRankParams {
            alpha: self.alpha,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn stratify(&self) -> StratifyParams {
        StratifyParams {
            leadlag: self.leadlag(),
            lambda: self.lambda,
            pagerank: self.pagerank(),
        }
    }
}
