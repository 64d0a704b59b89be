//! Published 2011 coal-sector figures: firm covariates, PageRank scores, the
//! layer structure and the score-on-log-covariate regression table.
//!
//! Firm names follow the score table's spelling so the two join 1:1. Numeric
//! values are reproduced as printed, including apparent misprints (the revenue
//! of 西山煤电, total profit below net profit for 恒源煤电, and the very small
//! figures of 大有能源).

use crate::ingest::{read_firm_csv, FirmRecord};
use crate::rank::ScoreVector;

pub const FIRMS_CSV: &str = include_str!("../fixtures/firms_2011.csv");
pub const SCORES_CSV: &str = include_str!("../fixtures/scores_2011.csv");

/// Published layers, top layer first.
pub const LAYERS: [&[&str]; 4] = [
    &["中国神华", "中煤能源", "兖州煤业", "冀中能源"],
    &[
        "平煤股份",
        "神火股份",
        "国投新集",
        "西山煤电",
        "大同煤业",
        "开滦股份",
        "山煤国际",
        "潞安环能",
        "露天煤业",
        "昊华能源",
    ],
    &["阳泉煤业", "兰花科创", "恒源煤电", "平庄能源"],
    &["大有能源", "盘江股份", "安源股份"],
];

/// One row of the published regression table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRegression {
    pub covariate: crate::ingest::Covariate,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
    pub r2: f64,
}

pub const REGRESSIONS: [PublishedRegression; 4] = {
    use crate::ingest::Covariate::*;
    [
        PublishedRegression {
            covariate: TotalAssets,
            beta: 0.25,
            se: 0.06,
            t: 4.17,
            p: 0.00,
            r2: 0.48,
        },
        PublishedRegression {
            covariate: Revenue,
            beta: 0.20,
            se: 0.07,
            t: 2.74,
            p: 0.01,
            r2: 0.28,
        },
        PublishedRegression {
            covariate: NetProfit,
            beta: 0.17,
            se: 0.05,
            t: 3.34,
            p: 0.00,
            r2: 0.37,
        },
        PublishedRegression {
            covariate: TotalProfit,
            beta: 0.20,
            se: 0.05,
            t: 3.86,
            p: 0.00,
            r2: 0.44,
        },
    ]
};

pub fn firms() -> Vec<FirmRecord> {
    read_firm_csv(FIRMS_CSV.as_bytes()).expect("embedded firm table is valid")
}

pub fn scores() -> ScoreVector {
    let mut s =
        ScoreVector::read_csv(SCORES_CSV.as_bytes()).expect("embedded score table is valid");
    s.alpha = 0.85;
    s
}
