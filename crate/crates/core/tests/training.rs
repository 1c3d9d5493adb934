use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sramnet::codec::WeightCode;
use sramnet::config::OutputActivation;
use sramnet::harness::experiment::run_training;
use sramnet::harness::load_dataset;
use sramnet::harness::oracle::{GradientRule, OracleMlp};
use sramnet::network::{Grid, Stage};
use sramnet::{Network, NetworkTopology, Sample, SimConfig};

fn iris() -> Vec<sramnet::harness::DatasetRecord> {
    load_dataset(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/iris.csv")).unwrap()
}

fn trajectory(output: OutputActivation) {
    let cfg = SimConfig {
        ideal: true,
        eta: 0.1,
        output_activation: output,
        ..SimConfig::default()
    };
    let oracle = OracleMlp {
        layers: cfg.layers.clone(),
        bias: cfg.bias,
        output,
        softmax_gain: cfg.softmax_gain,
    };
    let mut net = Network::from_config(&cfg).unwrap();
    let mut w: Grid<f64> = net.weights();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let mut t = vec![0.0; 3];
        t[rng.gen_range(0..3)] = 1.0;
        let y = net.forward_pass(&x).unwrap();
        net.evaluate_error(&t).unwrap();
        net.backward_pass(&t).unwrap();
        net.weight_update_phase().unwrap();
        let yo = oracle
            .sgd_step(&mut w, &x, &t, cfg.eta, GradientRule::Diagonal, Some(cfg.v_ref))
            .unwrap();
        for (a, b) in y.iter().zip(&yo) {
            worst = worst.max((a - b).abs());
        }
        for (la, lb) in net.weights().iter().zip(&w) {
            for (ra, rb) in la.iter().zip(lb) {
                for (a, b) in ra.iter().zip(rb) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    assert!(worst <= 1e-5, "trajectory drift {worst:e}");
}

#[test]
fn ideal_trajectory_matches_oracle_softmax() {
    trajectory(OutputActivation::Softmax);
}

#[test]
fn ideal_trajectory_matches_oracle_linear() {
    trajectory(OutputActivation::Linear);
}

#[test]
fn early_stop_on_zero_gradient() {
    let cfg = SimConfig {
        layers: vec![2, 3, 2],
        output_activation: OutputActivation::Linear,
        patience: 7,
        ..SimConfig::default()
    };
    let topo = NetworkTopology::from_config(&cfg).unwrap();
    let codes: Grid<WeightCode> = topo
        .maps()
        .iter()
        .map(|m| vec![vec![WeightCode::zero(cfg.b_w); m.cols]; m.banks])
        .collect();
    let mut net = Network::build_with_codes(&cfg, topo, &codes).unwrap();
    let data = vec![
        Sample {
            x: vec![0.3, 0.7],
            t: vec![0.0, 0.0],
            label: 0,
        };
        4
    ];
    let r = net.train(&data, &data, 100).unwrap();
    assert_eq!(r.epochs_run, cfg.patience + 1);
    assert!(r.stopped_early);
    assert!(r.history.iter().all(|h| h.mean_abs_ve == 0.0));
    assert_eq!(net.stage(), Stage::Ready);
}

#[test]
fn full_run_is_deterministic_and_seed_sensitive() {
    let recs = iris();
    let cfg = SimConfig::default();
    let a = run_training(&cfg, "iris", &recs, 30).unwrap();
    let b = run_training(&cfg, "iris", &recs, 30).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.network.codes().unwrap(), b.network.codes().unwrap());
    let c = run_training(&SimConfig { rng_seed: 1, ..cfg }, "iris", &recs, 30).unwrap();
    assert_ne!(a.report.training.history, c.report.training.history);
}

#[test]
fn larger_reduction_factor_does_not_hurt() {
    let recs = iris();
    let acc = |a: f64| {
        let cfg = SimConfig {
            reduction_factor: a,
            ..SimConfig::default()
        };
        run_training(&cfg, "iris", &recs, 500).unwrap().report.training.test_accuracy
    };
    let (lo, hi) = (acc(5.0), acc(100.0));
    assert!(hi >= lo - 0.05, "A=100: {hi}, A=5: {lo}");
}

#[test]
fn report_json_round_trip() {
    let run = run_training(&SimConfig::default(), "iris", &iris(), 5).unwrap();
    let text = run.report.to_json().unwrap();
    let back = sramnet::harness::RunReport::from_json(&text).unwrap();
    assert_eq!(back, run.report);
    assert_eq!(back.to_json().unwrap(), text);
    assert_eq!(run.report.train_samples, 120);
    assert_eq!(run.report.test_samples, 30);
    assert_eq!(run.report.ledger.unmodeled.len(), 3);
}
