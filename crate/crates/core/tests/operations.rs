mod common;

use std::fs;

use leadrank_core::fixtures;
use leadrank_core::leadlag::{correlation_profile, pairwise_matrix};
use leadrank_core::rank::{extract_leaders, ScoreVector};
use leadrank_core::stats::layer_averages;
use leadrank_core::{
    best_lag, compute_log_returns, generate_synthetic, lead_strength_uniform,
    lead_strength_weighted, load_firm_csv, run_pipeline, score_vs_firm, stratify, timediff_corr,
    Covariate, Error, ErrorKind, LagMode, LeadGraph, LeadLagParams, LogBase, PipelineConfig,
    PipelineInputs, ReturnPanel, StratifyParams, SynthSpec,
};

#[test]
fn corr_matches_formula_on_small_example() {
    let x = [1.0, 3.0, 2.0, 5.0, 4.0, 6.0];
    let y = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0];
    let oracle = common::corr_by_formula(&x, &y, 1);
    // by hand: sxy = 12, sxx = 10, syy = 14.8 over the 5-point overlap
    assert!((oracle - 12.0 / 148.0f64.sqrt()).abs() < 1e-15, "{oracle}");
    assert!((timediff_corr(&x, &y, 1).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn best_lag_matches_exhaustive_search() {
    let mut rng = common::rng(50);
    for _ in 0..20 {
        let x = common::normal_series(&mut rng, 50);
        let y = common::normal_series(&mut rng, 50);
        let rs: Vec<f64> = (1..=5)
            .map(|h| common::corr_by_formula(&x, &y, h))
            .collect();
        let signed = (0..5).fold(0, |b, i| if rs[i] > rs[b] { i } else { b }) + 1;
        let abs = (0..5).fold(0, |b, i| if rs[i].abs() > rs[b].abs() { i } else { b }) + 1;
        assert_eq!(best_lag(&x, &y, 5, LagMode::Signed).unwrap(), signed);
        assert_eq!(best_lag(&x, &y, 5, LagMode::Abs).unwrap(), abs);

        let uniform = rs.iter().sum::<f64>() / 5.0;
        assert!((lead_strength_uniform(&x, &y, 5).unwrap() - uniform).abs() < 1e-12);
    }
}

#[test]
fn constant_profile_ties_to_lag_one() {
    // x alternates so every lagged overlap has |r| = 1: r(h) = (-1)^h
    let x: Vec<f64> = (0..12)
        .map(|n| if n % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let y: Vec<f64> = x.iter().map(|v| -v).collect();
    let profile = correlation_profile(&x, &y, 4).unwrap();
    assert!(profile.iter().all(|r| (r.abs() - 1.0).abs() < 1e-12));
    assert_eq!(best_lag(&x, &y, 4, LagMode::Abs).unwrap(), 1);

    let flat = [0.37; 5];
    assert_eq!(
        leadrank_core::leadlag::aggregate_weighted(&flat, LagMode::Signed).1,
        1
    );
}

#[test]
fn weighted_beats_uniform_on_perfect_shift() {
    let mut rng = common::rng(77);
    let x = common::normal_series(&mut rng, 200);
    let y: Vec<f64> = (0..200)
        .map(|n| if n >= 2 { x[n - 2] } else { 0.0 })
        .collect();
    let profile = correlation_profile(&x, &y, 5).unwrap();
    assert!((profile[1] - 1.0).abs() < 1e-12);
    let weighted = lead_strength_weighted(&x, &y, 5, LagMode::Signed).unwrap();
    let uniform = lead_strength_uniform(&x, &y, 5).unwrap();
    assert!(weighted > uniform, "{weighted} vs {uniform}");
}

#[test]
fn identical_series_give_symmetric_matrix() {
    let mut rng = common::rng(1);
    let noise: Vec<Option<f64>> = common::normal_series(&mut rng, 100)
        .into_iter()
        .map(Some)
        .collect();
    let panel = ReturnPanel::new(
        vec!["a".into(), "b".into(), "c".into()],
        leadrank_core::synth::trading_days(100),
        vec![noise.clone(), noise.clone(), noise],
    )
    .unwrap();
    let m = pairwise_matrix(&panel, &LeadLagParams::default()).unwrap();
    let v = m.get(0, 1);
    for i in 0..3 {
        assert_eq!(m.get(i, i), 0.0);
        for j in 0..3 {
            if i != j {
                assert_eq!(m.get(i, j), v);
            }
        }
    }
}

fn chain_panel(seed: u64) -> ReturnPanel {
    // s2 lags s1 by one period, s3 lags s2 by one period
    let mut rng = common::rng(seed);
    let base = common::normal_series(&mut rng, 302);
    let eps = |rng: &mut _| common::normal_series(rng, 300);
    let (e2, e3) = (eps(&mut rng), eps(&mut rng));
    let s1: Vec<f64> = base[2..].to_vec();
    let s2: Vec<f64> = (0..300).map(|t| base[t + 1] + 0.1 * e2[t]).collect();
    let s3: Vec<f64> = (0..300).map(|t| base[t] + 0.1 * e3[t]).collect();
    ReturnPanel::new(
        vec!["s1".into(), "s2".into(), "s3".into()],
        leadrank_core::synth::trading_days(300),
        [s1, s2, s3]
            .into_iter()
            .map(|s| s.into_iter().map(Some).collect())
            .collect(),
    )
    .unwrap()
}

#[test]
fn chain_edges_dominate_matrix() {
    let panel = chain_panel(3);
    let m = pairwise_matrix(&panel, &LeadLagParams::default()).unwrap();
    let mut entries: Vec<(f64, usize, usize)> = (0..3)
        .flat_map(|i| (0..3).filter(move |j| *j != i).map(move |j| (i, j)))
        .map(|(i, j)| (m.get(i, j), i, j))
        .collect();
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let top: Vec<(usize, usize)> = entries[..2].iter().map(|e| (e.1, e.2)).collect();
    assert!(
        top.contains(&(0, 1)) && top.contains(&(1, 2)),
        "{entries:?}"
    );
}

/// The stratification loop spelled out step by step with the closed-form solver.
fn scripted_layers(panel: &ReturnPanel, params: &StratifyParams) -> Vec<Vec<String>> {
    let mut names: Vec<String> = panel.tickers().to_vec();
    let mut layers = Vec::new();
    while !names.is_empty() {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| panel.tickers().iter().position(|t| t == n).unwrap())
            .collect();
        let sub = panel.select(&idx);
        let m = pairwise_matrix(&sub, &params.leadlag).unwrap();
        let g = LeadGraph::build(&m, params.lambda).unwrap();
        let s = ScoreVector::closed(&g, params.pagerank.alpha).unwrap();
        let keep = extract_leaders(&g, &s).unwrap();
        let layer: Vec<String> = keep.iter().map(|&i| names[i].clone()).collect();
        names.retain(|n| !layer.contains(n));
        layers.push(layer);
    }
    layers
}

#[test]
fn stratify_matches_scripted_trace_on_chain() {
    let params = StratifyParams::default();
    for seed in 0..5 {
        let panel = chain_panel(seed);
        let layers = stratify(&panel, &params).unwrap();
        assert_eq!(layers.groups(), scripted_layers(&panel, &params));
        assert_eq!(layers.layer_of("s1"), Some(1));
    }
}

#[test]
fn uncorrelated_noise_is_one_layer() {
    let mut rng = common::rng(8);
    let rows = (0..5)
        .map(|_| {
            common::normal_series(&mut rng, 400)
                .into_iter()
                .map(Some)
                .collect()
        })
        .collect();
    let panel = ReturnPanel::new(
        (0..5).map(|i| format!("n{i}")).collect(),
        leadrank_core::synth::trading_days(400),
        rows,
    )
    .unwrap();
    let params = StratifyParams {
        lambda: 0.3,
        ..StratifyParams::default()
    };
    let layers = stratify(&panel, &params).unwrap();
    assert_eq!(layers.layers.len(), 1);
    assert_eq!(layers.layers[0].members.len(), 5);
}

#[test]
fn stratify_error_names_layer() {
    // the pair shares 3 periods, below the overlap floor of max_lag + 2 = 7
    let panel = ReturnPanel::new(
        vec!["a".into(), "b".into()],
        leadrank_core::synth::trading_days(6),
        vec![
            vec![
                Some(0.1),
                Some(-0.2),
                Some(0.3),
                Some(0.0),
                Some(0.2),
                Some(-0.1),
            ],
            vec![None, None, Some(0.3), Some(0.1), None, Some(0.2)],
        ],
    )
    .unwrap();
    let err = stratify(&panel, &StratifyParams::default()).unwrap_err();
    assert!(matches!(err, Error::Layer { layer: 1, .. }), "{err}");
    assert!(err.to_string().contains("(a, b)"), "{err}");
    assert_eq!(err.kind(), ErrorKind::Validation);
}

#[test]
fn fixture_file_regressions() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let firms = load_firm_csv(format!("{dir}/fixtures/firms_2011.csv")).unwrap();
    assert_eq!(firms.len(), 21);
    assert_eq!(firms[20].ticker, "大有能源");
    let scores = fixtures::scores();
    let assets = score_vs_firm(&scores, &firms, Covariate::TotalAssets, LogBase::E).unwrap();
    assert!((assets.beta_hat - 0.25).abs() < 0.005);
    assert!((assets.se_beta - 0.06).abs() < 0.005);
    assert!((assets.t_stat - 4.17).abs() < 0.01);
    let revenue = score_vs_firm(&scores, &firms, Covariate::Revenue, LogBase::E).unwrap();
    assert!((revenue.beta_hat - 0.20).abs() < 0.005);
    assert!((revenue.p_value - 0.01).abs() < 0.005);

    let summary = layer_averages(&[vec!["中国神华".into(), "中煤能源".into()]], &firms).unwrap();
    assert_eq!(summary.layers[0].total_assets, 23004154.0);

    let equal = ScoreVector {
        scores: vec![1.0; 21],
        ..scores
    };
    let flat = score_vs_firm(&equal, &firms, Covariate::NetProfit, LogBase::E).unwrap();
    assert_eq!((flat.beta_hat, flat.r_squared), (0.0, 0.0));
}

fn synth_inputs(dir: &std::path::Path) -> PipelineInputs {
    let synth = generate_synthetic(&SynthSpec {
        length: 120,
        seed: 5,
        ..SynthSpec::default()
    })
    .unwrap();
    let prices = dir.join("prices.csv");
    synth
        .prices
        .write_csv(fs::File::create(&prices).unwrap())
        .unwrap();
    PipelineInputs {
        prices,
        firms: None,
    }
}

#[test]
fn pipeline_writes_all_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(tmp.path());
    let out_dir = tmp.path().join("out");
    let out = run_pipeline(&inputs, &PipelineConfig::default(), &out_dir).unwrap();
    let stages: Vec<_> = out.manifest.stages.iter().map(|s| s.name).collect();
    assert_eq!(stages, ["ingest", "leadlag", "graph", "rank", "stats"]);
    assert_eq!(out.manifest.stages[4].status, "skipped");

    let returns =
        compute_log_returns(&leadrank_core::PricePanel::load_csv(&inputs.prices).unwrap()).unwrap();
    let layers = stratify(&returns, &PipelineConfig::default().stratify()).unwrap();
    let mut csv = Vec::new();
    layers.write_csv(&mut csv).unwrap();
    assert_eq!(fs::read(out_dir.join("layers.csv")).unwrap(), csv);
    let graph =
        LeadGraph::from_json(&fs::read_to_string(out_dir.join("graph.json")).unwrap()).unwrap();
    assert_eq!(graph, out.graph);
    let matrix = leadrank_core::LeadStrengthMatrix::from_json(
        &fs::read_to_string(out_dir.join("matrix.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(matrix, out.matrix);
}

#[test]
fn manifest_digest_tracks_input() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = synth_inputs(tmp.path());
    let cfg = PipelineConfig::default();
    let a = run_pipeline(&inputs, &cfg, &tmp.path().join("a"))
        .unwrap()
        .manifest;
    let b = run_pipeline(&inputs, &cfg, &tmp.path().join("b"))
        .unwrap()
        .manifest;
    assert_eq!(a.inputs, b.inputs);
    let mut text = fs::read_to_string(&inputs.prices).unwrap();
    text = text.replacen("L1,100\n", "L1,100.5\n", 1);
    fs::write(&inputs.prices, text).unwrap();
    let c = run_pipeline(&inputs, &cfg, &tmp.path().join("c"))
        .unwrap()
        .manifest;
    assert_ne!(a.inputs[0].sha256, c.inputs[0].sha256);
}

#[test]
fn missing_firms_fails_in_stats_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let mut inputs = synth_inputs(tmp.path());
    inputs.firms = Some(tmp.path().join("nope.csv"));
    let err =
        run_pipeline(&inputs, &PipelineConfig::default(), &tmp.path().join("out")).unwrap_err();
    assert!(matches!(err, Error::Stage { stage: "stats", .. }), "{err}");
    assert!(err.to_string().contains("nope.csv"));
    assert_eq!(err.kind(), ErrorKind::Io);
}
