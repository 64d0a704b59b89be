//! Synthetic leader/follower price panels with known lead structure.
//!
//! Every leader is a Gaussian log-price random walk. A follower at lag `k`
//! copies its leader's return from `k` periods earlier and adds independent
//! Gaussian noise. Each series draws from its own ChaCha stream of the single
//! seed, so output depends only on the `SynthSpec`.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ingest::PricePanel;
use crate::Error;

const START_PRICE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_leaders: usize,
    pub followers_per_leader: usize,
    /// Lag of each follower behind its leader, one entry per follower slot.
    pub lags: Vec<usize>,
    /// Standard deviation of leader log returns.
    pub leader_sigma: f64,
    /// Standard deviation of the noise added to follower returns.
    pub noise_sigma: f64,
    /// Number of returns per series (prices have one more point).
    pub length: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_leaders: 1,
            followers_per_leader: 3,
            lags: vec![1, 2, 3],
            leader_sigma: 0.02,
            noise_sigma: 0.006,
            length: 500,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_leaders == 0 {
            return bad("n_leaders must be at least 1".into());
        }
        if self.lags.len() != self.followers_per_leader {
            return bad(format!(
                "{} lags given for {} followers per leader",
                self.lags.len(),
                self.followers_per_leader
            ));
        }
        if self.lags.contains(&0) {
            return bad("follower lags must be >= 1".into());
        }
        let max_lag = self.lags.iter().copied().max().unwrap_or(0);
        if self.length <= max_lag + 10 {
            return bad(format!("length {} must exceed max lag + 10", self.length));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            ));
        }
        if !(self.leader_sigma.is_finite() && self.leader_sigma > 0.0) {
            return bad(format!(
                "leader_sigma must be > 0, got {}",
                self.leader_sigma
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerTruth {
    pub ticker: String,
    pub leader: String,
    pub lag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub leaders: Vec<String>,
    pub followers: Vec<FollowerTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPanel {
    pub prices: PricePanel,
    pub truth: GroundTruth,
}

/// `count` consecutive weekdays starting at the first weekday on or after 2011-01-03.
pub fn trading_days(count: usize) -> Vec<String> {
    let mut day = NaiveDate::from_ymd_opt(2011, 1, 3).expect("valid start date");
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day.format("%Y-%m-%d").to_string());
        }
        day += Duration::days(1);
    }
    out
}

fn normals(seed: u64, stream: u64, count: usize, sigma: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn prices_from_returns(returns: &[f64]) -> Vec<Option<f64>> {
    let mut log_price = START_PRICE.ln();
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(Some(START_PRICE));
    for r in returns {
        log_price += r;
        out.push(Some(log_price.exp()));
    }
    out
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SyntheticPanel, Error> {
    spec.validate()?;
    let t = spec.length;
    let burn_in = spec.lags.iter().copied().max().unwrap_or(0);
    let mut tickers = Vec::new();
    let mut rows = Vec::new();
    let mut truth = GroundTruth {
        leaders: Vec::new(),
        followers: Vec::new(),
    };
    let mut stream = 0u64;
    for l in 1..=spec.n_leaders {
        // increments[burn_in + t] is the leader's return in period t
        let increments = normals(spec.seed, stream, t + burn_in, spec.leader_sigma);
        stream += 1;
        let leader = format!("L{l}");
        rows.push(prices_from_returns(&increments[burn_in..]));
        tickers.push(leader.clone());
        truth.leaders.push(leader.clone());

        for (f, &lag) in spec.lags.iter().enumerate() {
            let noise = normals(spec.seed, stream, t, spec.noise_sigma);
            stream += 1;
            let returns: Vec<f64> = (0..t)
                .map(|p| increments[burn_in + p - lag] + noise[p])
                .collect();
            let ticker = format!("L{l}F{}", f + 1);
            rows.push(prices_from_returns(&returns));
            tickers.push(ticker.clone());
            truth.followers.push(FollowerTruth {
                ticker,
                leader: leader.clone(),
                lag,
            });
        }
    }
    let prices = PricePanel::new(tickers, trading_days(t + 1), rows)?;
    Ok(SyntheticPanel { prices, truth })
}
