use snapid_core::doe::{encode, table1_factor_specs, table1_runs, CodedRun, FACTOR_NAMES};
use snapid_core::eval::mae;
use snapid_core::oracle::{batch_simulate, ForceProfile, OracleParams};
use snapid_core::pspline::{fit, fit_response, log_grid, predict_profile, select_lambda};
use snapid_core::seqnet::{init, split_indices, train, TrainConfig};

fn simulate(noise: f64, seed: u64) -> Vec<ForceProfile> {
    let oracle = OracleParams {
        noise_sigma_rel: noise,
        seed,
        ..OracleParams::default()
    };
    batch_simulate(&table1_runs(), 500, &oracle).unwrap()
}

fn coded() -> Vec<CodedRun> {
    let specs = table1_factor_specs();
    table1_runs().iter().map(|r| encode(r, &specs).unwrap()).collect()
}

fn mean_peak(profiles: &[ForceProfile]) -> f64 {
    profiles.iter().map(|p| p.peak()).sum::<f64>() / profiles.len() as f64
}

#[test]
fn gcv_smoothing_removes_noise() {
    let noisy = simulate(0.01, 42);
    let clean = simulate(0.0, 42);
    let grid = log_grid(1e-4, 1e4, 17);
    for (y, truth) in noisy.iter().zip(&clean) {
        let lambda = select_lambda(y, 40, &grid).unwrap();
        let smooth = fit(y, 40, lambda).unwrap().sample(&y.run_id, 500).unwrap();
        let fit_err = mae(&smooth, truth).unwrap();
        let data_err = mae(y, truth).unwrap();
        assert!(fit_err < data_err, "{}: fit {fit_err} vs data {data_err}", y.run_id);
    }
}

#[test]
fn unpenalized_fit_reconstructs_clean_profiles() {
    let clean = simulate(0.0, 0);
    for p in &clean {
        let rec = fit(p, 40, 0.0).unwrap().sample(&p.run_id, 500).unwrap();
        let err = mae(&rec, p).unwrap();
        assert!(err <= 1e-6 * p.peak(), "{}: {err}", p.run_id);
    }
}

#[test]
fn response_model_predicts_held_out_runs() {
    let clean = simulate(0.0, 0);
    let runs = coded();
    let (train_idx, test_idx) = split_indices(17, 0.8, 42).unwrap();
    let models: Vec<_> = train_idx.iter().map(|&i| fit(&clean[i], 40, 1e-3).unwrap()).collect();
    let train_runs: Vec<_> = train_idx.iter().map(|&i| runs[i].clone()).collect();
    let names: Vec<String> = FACTOR_NAMES.iter().map(|s| s.to_string()).collect();
    let crm = fit_response(&train_runs, &models, &names).unwrap();
    let scale = mean_peak(&clean);
    let held_out: f64 = test_idx
        .iter()
        .map(|&i| mae(&predict_profile(&crm, &runs[i], 500).unwrap(), &clean[i]).unwrap())
        .sum::<f64>()
        / test_idx.len() as f64;
    assert!(held_out <= 0.1 * scale, "held-out MAE {held_out} vs mean peak {scale}");
    let all: f64 = (0..17)
        .map(|i| mae(&predict_profile(&crm, &runs[i], 500).unwrap(), &clean[i]).unwrap())
        .sum::<f64>()
        / 17.0;
    assert!(all <= 0.1 * scale, "all-run MAE {all} vs mean peak {scale}");
}

fn capacity_data() -> Vec<(CodedRun, ForceProfile)> {
    // five runs with an 80/20 split leave four for training
    coded().into_iter().zip(simulate(0.0, 0)).take(5).collect()
}

#[test]
fn small_network_overfits_four_profiles() {
    let cfg = TrainConfig {
        max_epochs: 20_000,
        seed: 0,
        ..TrainConfig::default()
    };
    let (_, report) = train(&init(1, 32, 0).unwrap(), &capacity_data(), &cfg).unwrap();
    assert_eq!(report.n_train, 4);
    assert!(report.final_train_loss <= 1e-4, "loss {}", report.final_train_loss);
    assert_eq!(report.stopped_early, report.final_train_loss <= 1e-6);
}

#[test]
fn training_is_bit_reproducible() {
    let cfg = TrainConfig {
        max_epochs: 40,
        learning_rate: 1e-3,
        seed: 5,
        ..TrainConfig::default()
    };
    let data: Vec<_> = coded().into_iter().zip(simulate(0.01, 1)).collect();
    let (m1, r1) = train(&init(2, 16, 4).unwrap(), &data, &cfg).unwrap();
    let (m2, r2) = train(&init(2, 16, 4).unwrap(), &data, &cfg).unwrap();
    assert_eq!(m1.to_json().unwrap(), m2.to_json().unwrap());
    assert_eq!(r1, r2);
    assert_eq!((r1.n_train, r1.n_test), (13, 4));
}
