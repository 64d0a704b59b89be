//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Time-difference correlation written index-by-index from its definition,
/// with 1-based `n` running over `h+1..=N`.
pub fn corr_by_formula(x: &[f64], y: &[f64], h: usize) -> f64 {
    let big_n = x.len();
    let m = (big_n - h) as f64;
    let mut x_bar = 0.0;
    let mut y_bar = 0.0;
    for n in (h + 1)..=big_n {
        x_bar += x[n - h - 1];
        y_bar += y[n - 1];
    }
    x_bar /= m;
    y_bar /= m;
    let mut num = 0.0;
    let mut den_x = 0.0;
    let mut den_y = 0.0;
    for n in (h + 1)..=big_n {
        let a = x[n - h - 1] - x_bar;
        let b = y[n - 1] - y_bar;
        num += a * b;
        den_x += a * a;
        den_y += b * b;
    }
    num / (den_x * den_y).sqrt()
}

/// Exact-rational simple OLS. Returns (beta, alpha, se_beta, t, r2).
pub fn ols_exact(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let q = |v: f64| BigRational::from_f64(v).expect("finite input");
    let n = BigRational::from_integer(BigInt::from(x.len()));
    let xs: Vec<BigRational> = x.iter().map(|v| q(*v)).collect();
    let ys: Vec<BigRational> = y.iter().map(|v| q(*v)).collect();
    let sum = |v: &[BigRational]| v.iter().fold(BigRational::zero(), |a, b| a + b);
    let x_bar = sum(&xs) / &n;
    let y_bar = sum(&ys) / &n;
    let mut sxx = BigRational::zero();
    let mut sxy = BigRational::zero();
    let mut syy = BigRational::zero();
    for (a, b) in xs.iter().zip(&ys) {
        let dx = a - &x_bar;
        let dy = b - &y_bar;
        sxx += &dx * &dx;
        sxy += &dx * &dy;
        syy += &dy * &dy;
    }
    let beta = &sxy / &sxx;
    let alpha = &y_bar - &beta * &x_bar;
    let ssr = &syy - &sxy * &sxy / &sxx;
    let df = BigRational::from_integer(BigInt::from(x.len() - 2));
    let se2 = ssr / df / &sxx;
    let r2 = &sxy * &sxy / (&sxx * &syy);
    let se = se2.to_f64().unwrap().sqrt();
    let beta_f = beta.to_f64().unwrap();
    (
        beta_f,
        alpha.to_f64().unwrap(),
        se,
        beta_f / se,
        r2.to_f64().unwrap(),
    )
}

/// Random column-substochastic transition matrix of size `n` with some dangling
/// columns and zero diagonal.
pub fn random_transition(rng: &mut ChaCha8Rng, n: usize, density: f64) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random::<f64>() < density {
                w[(i, j)] = rng.random_range(0.1..1.0);
            }
        }
    }
    leadrank_core::column_normalize(&w)
}

/// Random strictly column-stochastic matrix: every column gets at least one edge.
pub fn random_stochastic(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(n, n);
    for j in 0..n {
        let forced = (j + 1 + rng.random_range(0..n - 1)) % n;
        w[(forced, j)] = rng.random_range(0.1..1.0);
        for i in 0..n {
            if i != j && rng.random::<f64>() < 0.3 {
                w[(i, j)] = rng.random_range(0.1..1.0);
            }
        }
    }
    leadrank_core::column_normalize(&w)
}

pub fn normal_series(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len)
        .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal))
        .collect()
}
