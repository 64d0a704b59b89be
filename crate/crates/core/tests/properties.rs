mod common;

use leadrank_core::graph::{column_normalize, threshold};
use leadrank_core::leadlag::{correlation_profile, pairwise_matrix, panel_profile};
use leadrank_core::rank::extract_leaders;
use leadrank_core::stats::score_vs_firm;
use leadrank_core::{
    compute_log_returns, lead_strength_uniform, lead_strength_weighted, pagerank_closed,
    pagerank_iterative, stratify, timediff_corr, Covariate, FirmRecord, LagMode, LeadGraph,
    LeadLagParams, LeadStrengthMatrix, LogBase, PageRankParams, PricePanel, ReturnPanel, Scheme,
    ScoreVector, StratifyParams,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dates(n: usize) -> Vec<String> {
    leadrank_core::synth::trading_days(n)
}

prop_compose! {
    fn price_panel()(n_tickers in 1usize..5, n_days in 3usize..25)
        (cells in prop::collection::vec(
            prop::collection::vec(prop::option::weighted(0.8, 0.5f64..500.0), n_days),
            n_tickers),
         n_days in Just(n_days))
        -> Option<PricePanel>
    {
        let tickers = (0..cells.len()).map(|i| format!("T{i}")).collect();
        PricePanel::new(tickers, dates(n_days), cells).ok()
    }
}

fn series(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<f64>> {
    len.prop_flat_map(|n| prop::collection::vec(-5.0f64..5.0, n))
}

fn strength_matrix(n: usize) -> impl Strategy<Value = LeadStrengthMatrix> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
        let mut m = DMatrix::from_row_slice(n, n, &v);
        m.fill_diagonal(0.0);
        LeadStrengthMatrix::new((0..n).map(|i| format!("s{i}")).collect(), m).unwrap()
    })
}

fn weight_grid(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.01f64..1.0], n * n).prop_map(move |v| {
        let mut m = DMatrix::from_row_slice(n, n, &v);
        m.fill_diagonal(0.0);
        m
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn price_csv_round_trip(panel in price_panel()) {
        // a date on which nothing trades has no row to be written
        let panel = panel.filter(|p| {
            (0..p.dates().len()).all(|t| (0..p.tickers().len()).any(|i| p.series(i)[t].is_some()))
        });
        if let Some(panel) = panel {
            let mut buf = Vec::new();
            panel.write_csv(&mut buf).unwrap();
            prop_assert_eq!(PricePanel::read_csv(buf.as_slice()).unwrap(), panel);
        }
    }

    #[test]
    fn returns_ignore_price_scale(panel in price_panel(), c in 0.01f64..100.0) {
        if let Some(panel) = panel {
            let a = compute_log_returns(&panel).unwrap();
            let b = compute_log_returns(&panel.scaled(c).unwrap()).unwrap();
            prop_assert_eq!(a.tickers(), b.tickers());
            for i in 0..a.len() {
                for (x, y) in a.series(i).iter().zip(b.series(i)) {
                    match (x, y) {
                        (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-12),
                        (None, None) => {}
                        _ => prop_assert!(false, "missing pattern differs"),
                    }
                }
            }
        }
    }

    #[test]
    fn returns_telescope(panel in price_panel()) {
        if let Some(panel) = panel {
            let r = compute_log_returns(&panel).unwrap();
            for i in 0..r.len() {
                let present: Vec<f64> = panel.series(i).iter().flatten().copied().collect();
                let expected = present.last().unwrap().ln() - present[0].ln();
                prop_assert!((r.present(i).iter().sum::<f64>() - expected).abs() < 1e-9);
                prop_assert_eq!(r.present(i).len(), present.len() - 1);
            }
        }
    }

    #[test]
    fn corr_affine_invariance(
        x in series(8..40),
        seed in any::<u64>(),
        a in 0.1f64..10.0, b in -5.0f64..5.0, c in 0.1f64..10.0, d in -5.0f64..5.0,
        lag in 1usize..4,
    ) {
        let mut rng = common::rng(seed);
        let y = common::normal_series(&mut rng, x.len());
        let Ok(base) = timediff_corr(&x, &y, lag) else { return Ok(()) };
        let xa: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yc: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        let yn: Vec<f64> = y.iter().map(|v| -c * v + d).collect();
        prop_assert!((timediff_corr(&xa, &yc, lag).unwrap() - base).abs() < 1e-9);
        prop_assert!((timediff_corr(&xa, &yn, lag).unwrap() + base).abs() < 1e-9);
    }

    #[test]
    fn exact_shift_found_in_both_modes(x in series(15..60), h0 in 1usize..5) {
        let y: Vec<f64> = (0..x.len()).map(|n| if n >= h0 { x[n - h0] } else { 0.0 }).collect();
        let Ok(r) = timediff_corr(&x, &y, h0) else { return Ok(()) };
        prop_assert!((r - 1.0).abs() < 1e-9);
        prop_assert_eq!(leadrank_core::best_lag(&x, &y, 5, LagMode::Signed).unwrap(), h0);
        prop_assert_eq!(leadrank_core::best_lag(&x, &y, 5, LagMode::Abs).unwrap(), h0);
    }

    #[test]
    fn strengths_within_profile_range(seed in any::<u64>(), len in 12usize..80) {
        let mut rng = common::rng(seed);
        let x = common::normal_series(&mut rng, len);
        let y = common::normal_series(&mut rng, len);
        let profile = correlation_profile(&x, &y, 5).unwrap();
        let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let max_abs = profile.iter().map(|r| r.abs()).fold(0.0, f64::max);
        for s in [
            lead_strength_uniform(&x, &y, 5).unwrap(),
            lead_strength_weighted(&x, &y, 5, LagMode::Signed).unwrap(),
            lead_strength_weighted(&x, &y, 5, LagMode::Abs).unwrap(),
        ] {
            prop_assert!(s >= lo - 1e-15 && s <= hi + 1e-15);
            prop_assert!(s.abs() <= max_abs + 1e-15);
        }
    }

    #[test]
    fn threshold_is_monotone(m in strength_matrix(5), l1 in 0.0f64..0.6, dl in 0.0f64..0.4) {
        let loose = threshold(&m, l1).unwrap();
        let tight = threshold(&m, l1 + dl).unwrap();
        for (a, b) in loose.iter().zip(tight.iter()) {
            prop_assert!(*b == 0.0 || *a > 0.0);
            prop_assert!(*b == 0.0 || *b > l1 + dl);
        }
    }

    #[test]
    fn normalization_properties(w in weight_grid(6), c in 0.01f64..100.0) {
        let h = column_normalize(&w);
        for (wc, hc) in w.column_iter().zip(h.column_iter()) {
            let sum: f64 = hc.iter().sum();
            if wc.iter().any(|v| *v > 0.0) {
                prop_assert!((sum - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(sum, 0.0);
            }
            for (a, b) in wc.iter().zip(hc.iter()) {
                prop_assert_eq!(*a > 0.0, *b > 0.0);
            }
        }
        let again = column_normalize(&h);
        prop_assert!((again - &h).amax() < 1e-15);
        prop_assert!((column_normalize(&(&w * c)) - &h).amax() < 1e-15);
    }

    #[test]
    fn pagerank_methods_agree_and_respect_floor(w in weight_grid(8), alpha in 0.05f64..0.95) {
        let h = column_normalize(&w);
        let params = PageRankParams { alpha, tol: 1e-11, max_iter: 100_000 };
        let it = pagerank_iterative(&h, &params).unwrap();
        let closed = pagerank_closed(&h, alpha).unwrap();
        for (a, b) in it.scores.iter().zip(&closed) {
            prop_assert!((a - b).abs() <= 10.0 * params.tol);
            prop_assert!(*b >= 1.0 - alpha - 1e-12);
        }
    }

    #[test]
    fn tiny_damping_gives_uniform_scores(w in weight_grid(7)) {
        let h = column_normalize(&w);
        let s = pagerank_closed(&h, 1e-9).unwrap();
        for v in s {
            prop_assert!((v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn leaders_never_empty(w in weight_grid(7)) {
        let labels: Vec<String> = (0..7).map(|i| i.to_string()).collect();
        let g = LeadGraph::from_weights(labels, w, 0.0).unwrap();
        let s = ScoreVector::closed(&g, 0.85).unwrap();
        let leaders = extract_leaders(&g, &s).unwrap();
        prop_assert!(!leaders.is_empty());
        // the top-scoring node is visited first and only a node with in-edges can be deleted
        let top = leadrank_core::rank::visit_order(&s.scores)[0];
        if g.weights().column(top).iter().all(|v| *v == 0.0) {
            prop_assert!(leaders.contains(&top));
        }
    }

    #[test]
    fn log_base_switch(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let n = 12;
        let firms: Vec<FirmRecord> = (0..n)
            .map(|i| FirmRecord {
                ticker: format!("F{i}"),
                total_assets: rng.random_range(1.0..1e7),
                revenue: rng.random_range(1.0..1e7),
                net_profit: rng.random_range(1.0..1e7),
                total_profit: rng.random_range(1.0..1e7),
            })
            .collect();
        let scores = ScoreVector {
            labels: firms.iter().map(|f| f.ticker.clone()).collect(),
            scores: (0..n).map(|_| rng.random_range(0.15..3.0)).collect(),
            alpha: 0.85,
            method: leadrank_core::rank::ScoreMethod::Closed,
        };
        for c in Covariate::ALL {
            let e = score_vs_firm(&scores, &firms, c, LogBase::E).unwrap();
            let ten = score_vs_firm(&scores, &firms, c, LogBase::Ten).unwrap();
            prop_assert!((e.r_squared - ten.r_squared).abs() < 1e-10);
            prop_assert!((e.t_stat - ten.t_stat).abs() < 1e-10 * e.t_stat.abs().max(1.0));
            prop_assert!((e.p_value - ten.p_value).abs() < 1e-10);
            let scaled = e.beta_hat * std::f64::consts::LN_10;
            prop_assert!((ten.beta_hat - scaled).abs() < 1e-10 * scaled.abs().max(1.0));
        }
    }
}

fn noise_panel(seed: u64, n: usize, len: usize) -> ReturnPanel {
    let mut rng = common::rng(seed);
    let returns = (0..n)
        .map(|_| {
            common::normal_series(&mut rng, len)
                .into_iter()
                .map(Some)
                .collect()
        })
        .collect();
    ReturnPanel::new(
        (0..n).map(|i| format!("N{i}")).collect(),
        dates(len),
        returns,
    )
    .unwrap()
}

#[test]
fn pairwise_matrix_matches_scalar_pipeline() {
    let mut panel = noise_panel(21, 6, 80);
    // knock out a few cells so the joint-period logic is exercised
    let mut rows: Vec<Vec<Option<f64>>> = (0..6).map(|i| panel.series(i).to_vec()).collect();
    rows[2][10] = None;
    rows[4][30] = None;
    rows[4][31] = None;
    panel = ReturnPanel::new(panel.tickers().to_vec(), panel.periods().to_vec(), rows).unwrap();

    for scheme in [Scheme::Uniform, Scheme::Weighted] {
        let params = LeadLagParams {
            max_lag: 4,
            scheme,
            t0_mode: LagMode::Signed,
        };
        let m = pairwise_matrix(&panel, &params).unwrap();
        for i in 0..6 {
            assert_eq!(m.get(i, i), 0.0);
            for j in 0..6 {
                if i != j {
                    let p = panel_profile(&panel, i, j, &params).unwrap();
                    assert_eq!((p.leader_idx, p.follower_idx), (i, j));
                    assert_eq!(m.get(i, j), p.strength);
                }
            }
        }
    }
}

#[test]
fn stratify_terminates_with_partition() {
    for seed in 0..10 {
        let panel = noise_panel(seed, 7, 60);
        let params = StratifyParams {
            lambda: 0.02,
            ..StratifyParams::default()
        };
        let layers = stratify(&panel, &params).unwrap();
        let mut all: Vec<String> = layers.groups().concat();
        assert!(layers.layers.iter().all(|l| !l.members.is_empty()));
        assert!(layers.layers.len() <= 7);
        all.sort();
        let mut expected = panel.tickers().to_vec();
        expected.sort();
        assert_eq!(all, expected);
    }
}
