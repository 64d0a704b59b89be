//! Loading and validation of price panels and firm covariates.
//!
//! Prices arrive as long-form CSV (`date,ticker,vwap`), one row per observed
//! (date, ticker) pair. The panel's date axis is the sorted union of observed
//! dates and any pair absent from the file becomes a missing cell, which is how
//! trading halts show up.
//!
//! Log returns are taken between *consecutive present* prices of each ticker,
//! so a halted day shrinks that ticker's series instead of punching a hole into
//! a return pair.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("duplicate observation for ticker {ticker} on {date} (line {line})")]
    DuplicateKey {
        date: String,
        ticker: String,
        line: u64,
    },
    #[error("ticker {ticker} has {present} present prices; at least 2 are required")]
    DegenerateSeries { ticker: String, present: usize },
    #[error("firm {ticker}: {field} must be strictly positive, got {value}")]
    NonPositiveCovariate {
        ticker: String,
        field: &'static str,
        value: f64,
    },
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
}

fn csv_error(err: csv::Error) -> IngestError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => IngestError::Io {
            path: "<stream>".into(),
            source,
        },
        kind => IngestError::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_header(headers: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let got: Vec<&str> = headers.iter().map(str::trim).collect();
    if got != expected {
        return Err(IngestError::Parse {
            line: 1,
            message: format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                got.join(",")
            ),
        });
    }
    Ok(())
}

/// Validates an ISO-8601 calendar date (`YYYY-MM-DD`).
pub fn validate_date(label: &str) -> bool {
    label.len() == 10 && NaiveDate::parse_from_str(label, "%Y-%m-%d").is_ok()
}

/// Aligned per-ticker VWAP series over trading days.
///
/// `prices[i][t]` is the price of `tickers[i]` on `dates[t]`, `None` when the
/// ticker did not trade that day.
#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    tickers: Vec<String>,
    dates: Vec<String>,
    prices: Vec<Vec<Option<f64>>>,
}

impl PricePanel {
    pub fn new(
        tickers: Vec<String>,
        dates: Vec<String>,
        prices: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, IngestError> {
        if prices.len() != tickers.len() {
            return Err(IngestError::InvalidPanel(format!(
                "{} tickers but {} price rows",
                tickers.len(),
                prices.len()
            )));
        }
        let mut seen = BTreeSet::new();
        for t in &tickers {
            if !seen.insert(t.as_str()) {
                return Err(IngestError::InvalidPanel(format!("duplicate ticker {t}")));
            }
        }
        for d in &dates {
            if !validate_date(d) {
                return Err(IngestError::InvalidPanel(format!(
                    "date `{d}` is not YYYY-MM-DD"
                )));
            }
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(IngestError::InvalidPanel(
                "dates must be strictly increasing".into(),
            ));
        }
        for (ticker, row) in tickers.iter().zip(&prices) {
            if row.len() != dates.len() {
                return Err(IngestError::InvalidPanel(format!(
                    "ticker {ticker} has {} cells for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            if let Some(p) = row.iter().flatten().find(|p| !(p.is_finite() && **p > 0.0)) {
                return Err(IngestError::InvalidPanel(format!(
                    "ticker {ticker} has non-positive or non-finite price {p}"
                )));
            }
            let present = row.iter().flatten().count();
            if present < 2 {
                return Err(IngestError::DegenerateSeries {
                    ticker: ticker.clone(),
                    present,
                });
            }
        }
        Ok(Self {
            tickers,
            dates,
            prices,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn dates(&self) -> &[String] {
        &self.dates
    }

    /// Price row of ticker `idx`, aligned with [`dates`](Self::dates).
    pub fn series(&self, idx: usize) -> &[Option<f64>] {
        &self.prices[idx]
    }

    pub fn filled_cells(&self) -> usize {
        self.prices.iter().map(|r| r.iter().flatten().count()).sum()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        check_header(
            rdr.headers().map_err(csv_error)?,
            &["date", "ticker", "vwap"],
        )?;

        // Tickers keep first-appearance order; dates are sorted afterwards.
        let mut tickers: Vec<String> = Vec::new();
        let mut ticker_idx: HashMap<String, usize> = HashMap::new();
        let mut obs: HashMap<(String, usize), f64> = HashMap::new();
        let mut dates = BTreeSet::new();

        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != 3 {
                return Err(IngestError::Parse {
                    line,
                    message: format!("expected 3 fields, found {}", rec.len()),
                });
            }
            let date = rec[0].trim();
            let ticker = rec[1].trim();
            if !validate_date(date) {
                return Err(IngestError::Parse {
                    line,
                    message: format!("date `{date}` is not YYYY-MM-DD"),
                });
            }
            if ticker.is_empty() {
                return Err(IngestError::Parse {
                    line,
                    message: "empty ticker".into(),
                });
            }
            let vwap: f64 = rec[2].trim().parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("vwap `{}` is not a number", &rec[2]),
            })?;
            if !(vwap.is_finite() && vwap > 0.0) {
                return Err(IngestError::Parse {
                    line,
                    message: format!("vwap must be positive and finite, got {vwap}"),
                });
            }
            let idx = *ticker_idx.entry(ticker.to_string()).or_insert_with(|| {
                tickers.push(ticker.to_string());
                tickers.len() - 1
            });
            if obs.insert((date.to_string(), idx), vwap).is_some() {
                return Err(IngestError::DuplicateKey {
                    date: date.into(),
                    ticker: ticker.into(),
                    line,
                });
            }
            dates.insert(date.to_string());
        }

        let dates: Vec<String> = dates.into_iter().collect();
        let prices = (0..tickers.len())
            .map(|i| {
                dates
                    .iter()
                    .map(|d| obs.get(&(d.clone(), i)).copied())
                    .collect()
            })
            .collect();
        Self::new(tickers, dates, prices)
    }

    /// Loads a `date,ticker,vwap` CSV file.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::read_csv(open(path.as_ref())?)
    }

    /// Writes ticker-major long-form CSV; reloading it reproduces the panel.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "ticker", "vwap"])
            .map_err(csv_error)?;
        for (ticker, row) in self.tickers.iter().zip(&self.prices) {
            for (date, price) in self.dates.iter().zip(row) {
                if let Some(p) = price {
                    w.write_record([date.as_str(), ticker.as_str(), &p.to_string()])
                        .map_err(csv_error)?;
                }
            }
        }
        w.flush().map_err(|source| IngestError::Io {
            path: "<stream>".into(),
            source,
        })
    }

    /// Returns the sub-panel restricted to `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            tickers: indices.iter().map(|&i| self.tickers[i].clone()).collect(),
            dates: self.dates.clone(),
            prices: indices.iter().map(|&i| self.prices[i].clone()).collect(),
        }
    }

    /// Multiplies every present price by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, IngestError> {
        let prices = self
            .prices
            .iter()
            .map(|row| row.iter().map(|p| p.map(|v| v * factor)).collect())
            .collect();
        Self::new(self.tickers.clone(), self.dates.clone(), prices)
    }
}

/// Per-ticker log-return series; the indicator set the lead-lag analysis runs on.
///
/// Period `t` is labelled by the date of its closing price, i.e. `periods` is the
/// panel's date axis without its first date. A cell is present iff the ticker has
/// a price on that date and some earlier date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    tickers: Vec<String>,
    periods: Vec<String>,
    returns: Vec<Vec<Option<f64>>>,
}

impl ReturnPanel {
    pub fn new(
        tickers: Vec<String>,
        periods: Vec<String>,
        returns: Vec<Vec<Option<f64>>>,
    ) -> Result<Self, IngestError> {
        if returns.len() != tickers.len() {
            return Err(IngestError::InvalidPanel(format!(
                "{} tickers but {} return rows",
                tickers.len(),
                returns.len()
            )));
        }
        for (ticker, row) in tickers.iter().zip(&returns) {
            if row.len() != periods.len() {
                return Err(IngestError::InvalidPanel(format!(
                    "ticker {ticker} has {} cells for {} periods",
                    row.len(),
                    periods.len()
                )));
            }
            if row.iter().flatten().any(|r| !r.is_finite()) {
                return Err(IngestError::InvalidPanel(format!(
                    "ticker {ticker} has a non-finite return"
                )));
            }
        }
        Ok(Self {
            tickers,
            periods,
            returns,
        })
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.tickers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tickers.is_empty()
    }

    pub fn series(&self, idx: usize) -> &[Option<f64>] {
        &self.returns[idx]
    }

    /// Present returns of one ticker, in period order.
    pub fn present(&self, idx: usize) -> Vec<f64> {
        self.returns[idx].iter().flatten().copied().collect()
    }

    /// The two series restricted to periods where both are present.
    pub fn joint(&self, a: usize, b: usize) -> (Vec<f64>, Vec<f64>) {
        self.returns[a]
            .iter()
            .zip(&self.returns[b])
            .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
            .unzip()
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            tickers: indices.iter().map(|&i| self.tickers[i].clone()).collect(),
            periods: self.periods.clone(),
            returns: indices.iter().map(|&i| self.returns[i].clone()).collect(),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::Reader::from_reader(reader);
        check_header(
            rdr.headers().map_err(csv_error)?,
            &["period", "ticker", "log_return"],
        )?;
        let mut tickers: Vec<String> = Vec::new();
        let mut ticker_idx: HashMap<String, usize> = HashMap::new();
        let mut obs: HashMap<(String, usize), f64> = HashMap::new();
        let mut periods = BTreeSet::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let period = rec[0].trim();
            let ticker = rec[1].trim();
            if !validate_date(period) {
                return Err(IngestError::Parse {
                    line,
                    message: format!("period `{period}` is not YYYY-MM-DD"),
                });
            }
            let value: f64 = rec[2].trim().parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("log_return `{}` is not a number", &rec[2]),
            })?;
            let idx = *ticker_idx.entry(ticker.to_string()).or_insert_with(|| {
                tickers.push(ticker.to_string());
                tickers.len() - 1
            });
            if obs.insert((period.to_string(), idx), value).is_some() {
                return Err(IngestError::DuplicateKey {
                    date: period.into(),
                    ticker: ticker.into(),
                    line,
                });
            }
            periods.insert(period.to_string());
        }
        let periods: Vec<String> = periods.into_iter().collect();
        let returns = (0..tickers.len())
            .map(|i| {
                periods
                    .iter()
                    .map(|p| obs.get(&(p.clone(), i)).copied())
                    .collect()
            })
            .collect();
        Self::new(tickers, periods, returns)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::read_csv(open(path.as_ref())?)
    }

    /// Writes `period,ticker,log_return`, ticker-major, present cells only.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["period", "ticker", "log_return"])
            .map_err(csv_error)?;
        for (ticker, row) in self.tickers.iter().zip(&self.returns) {
            for (period, r) in self.periods.iter().zip(row) {
                if let Some(r) = r {
                    w.write_record([period.as_str(), ticker.as_str(), &r.to_string()])
                        .map_err(csv_error)?;
                }
            }
        }
        w.flush().map_err(|source| IngestError::Io {
            path: "<stream>".into(),
            source,
        })
    }
}

/// Log returns over each ticker's consecutive present prices.
pub fn compute_log_returns(panel: &PricePanel) -> Result<ReturnPanel, IngestError> {
    let periods: Vec<String> = panel.dates.iter().skip(1).cloned().collect();
    let mut returns = Vec::with_capacity(panel.tickers.len());
    for (ticker, row) in panel.tickers.iter().zip(&panel.prices) {
        let present = row.iter().flatten().count();
        if present < 2 {
            return Err(IngestError::DegenerateSeries {
                ticker: ticker.clone(),
                present,
            });
        }
        let mut out = vec![None; periods.len()];
        let mut prev: Option<f64> = None;
        for (t, price) in row.iter().enumerate() {
            if let Some(p) = price {
                if let Some(q) = prev {
                    out[t - 1] = Some(p.ln() - q.ln());
                }
                prev = Some(*p);
            }
        }
        returns.push(out);
    }
    ReturnPanel::new(panel.tickers.clone(), periods, returns)
}

/// One of the four firm-level covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Covariate {
    TotalAssets,
    Revenue,
    NetProfit,
    TotalProfit,
}

impl Covariate {
    pub const ALL: [Covariate; 4] = [
        Covariate::TotalAssets,
        Covariate::Revenue,
        Covariate::NetProfit,
        Covariate::TotalProfit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Covariate::TotalAssets => "total_assets",
            Covariate::Revenue => "revenue",
            Covariate::NetProfit => "net_profit",
            Covariate::TotalProfit => "total_profit",
        }
    }
}

impl std::str::FromStr for Covariate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Covariate::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown covariate `{s}`"))
    }
}

/// Operating figures of one firm, in units of 10^4 CNY.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmRecord {
    pub ticker: String,
    pub total_assets: f64,
    pub revenue: f64,
    pub net_profit: f64,
    pub total_profit: f64,
}

impl FirmRecord {
    pub fn get(&self, covariate: Covariate) -> f64 {
        match covariate {
            Covariate::TotalAssets => self.total_assets,
            Covariate::Revenue => self.revenue,
            Covariate::NetProfit => self.net_profit,
            Covariate::TotalProfit => self.total_profit,
        }
    }

    fn validate(&self) -> Result<(), IngestError> {
        for c in Covariate::ALL {
            let value = self.get(c);
            if !(value.is_finite() && value > 0.0) {
                return Err(IngestError::NonPositiveCovariate {
                    ticker: self.ticker.clone(),
                    field: c.name(),
                    value,
                });
            }
        }
        Ok(())
    }
}

pub fn read_firm_csv<R: Read>(reader: R) -> Result<Vec<FirmRecord>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(
        rdr.headers().map_err(csv_error)?,
        &[
            "ticker",
            "total_assets",
            "revenue",
            "net_profit",
            "total_profit",
        ],
    )?;
    let mut firms = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize| -> Result<f64, IngestError> {
            rec[i].trim().parse().map_err(|_| IngestError::Parse {
                line,
                message: format!("`{}` is not a number", &rec[i]),
            })
        };
        let firm = FirmRecord {
            ticker: rec[0].trim().to_string(),
            total_assets: num(1)?,
            revenue: num(2)?,
            net_profit: num(3)?,
            total_profit: num(4)?,
        };
        firm.validate()?;
        firms.push(firm);
    }
    Ok(firms)
}

/// Loads `ticker,total_assets,revenue,net_profit,total_profit`, preserving row order.
pub fn load_firm_csv(path: impl AsRef<Path>) -> Result<Vec<FirmRecord>, IngestError> {
    read_firm_csv(open(path.as_ref())?)
}
