//! Offline → file → online pipeline through the public API.

use hymac::fom::{solve_stokes, PicardOptions};
use hymac::greedy::{train, TrainingConfig};
use hymac::io::{decode_model, encode_model, error_curve_csv, read_error_curve_csv};
use hymac::rom::OnlineOptions;
use hymac::validate::{curve, evaluate, references, truncation_study};
use hymac::{GridSpec, Parameter, Problem};

fn p(re: f64, nu: f64) -> Parameter {
    Parameter::new(re, nu).unwrap()
}

fn grid_params(res: &[f64], nus: &[f64]) -> Vec<Parameter> {
    res.iter().flat_map(|&re| nus.iter().map(move |&nu| p(re, nu))).collect()
}

#[test]
fn stokes_model_survives_persistence_and_converges() {
    let g = GridSpec::new(16, 16).unwrap();
    let xi = grid_params(&[10.0, 400.0, 800.0, 1200.0, 1600.0, 2000.0], &[0.0, 1.0, 2.0, 3.0, 4.0]);
    let mut cfg = TrainingConfig::new(g, Problem::Stokes, xi);
    cfg.n_max = 14;
    let (model, log) = train(&cfg).unwrap();
    assert_eq!(model.n(), 14);
    assert_eq!(model.m(), 27);

    let bytes = encode_model(&model, &log);
    let (loaded, _) = decode_model(&bytes).unwrap();
    assert_eq!(encode_model(&loaded, &log), bytes);

    let test = grid_params(&[205.0, 1005.0, 1795.0], &[0.5, 2.5]);
    let refs = references(&g, Problem::Stokes, &test, None, PicardOptions::default()).unwrap();
    let study = truncation_study(&loaded, &test, &refs, OnlineOptions::default()).unwrap();
    let c = curve(&study);
    assert_eq!(c.len(), 14);
    // the estimator and the error both fall by orders of magnitude
    assert!(c[13].e < 1e-3 * c[0].e, "{c:?}");
    assert!(c[13].delta < 1e-2 * c[0].delta, "{c:?}");
    assert_eq!(read_error_curve_csv(&error_curve_csv(&c)).unwrap(), c);

    // the in-memory and reloaded models agree exactly
    let a = evaluate(&model, &test, &refs, OnlineOptions::default()).unwrap();
    let b = evaluate(&loaded, &test, &refs, OnlineOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trained_snapshot_is_reproduced_after_reload() {
    let g = GridSpec::new(12, 12).unwrap();
    let xi = grid_params(&[10.0, 700.0, 1400.0], &[0.5, 3.5]);
    let mut cfg = TrainingConfig::new(g, Problem::Stokes, xi);
    cfg.n_max = 4;
    let (model, log) = train(&cfg).unwrap();
    let (loaded, _) = decode_model(&encode_model(&model, &log)).unwrap();
    for pair in &loaded.pairs {
        let truth = solve_stokes(&g, pair.param).unwrap().values;
        let sol = loaded.online_solve_steady(pair.param, OnlineOptions::default()).unwrap();
        let rec = loaded.reconstruct(sol.final_coefficients()).unwrap();
        let scale = truth.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let err = rec.iter().zip(&truth).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale;
        assert!(err < 1e-10, "{err:e}");
    }
}
