use consgrunet::data::{make_synthetic, make_windows, split_windows, SplitMode, SynthConfig, TransitionPolicy, Window};
use consgrunet::layers::{adam_step, AdamConfig, AdamState};
use consgrunet::metrics::{CiUnit, Confidence};
use consgrunet::model::ConvBlockConfig;
use consgrunet::runtime::*;
use consgrunet::{build_model, Error, Model, ModelConfig, Tensor};

fn windows(classes: usize, per_class: usize) -> Vec<Window> {
    let cfg = SynthConfig {
        num_classes: classes,
        channels: 4,
        window_len: 8,
        windows_per_class: per_class,
        noise_sd: 0.1,
        seed: 5,
    };
    make_synthetic(&cfg)
        .unwrap()
        .iter()
        .flat_map(|s| make_windows(s, 8, 8, TransitionPolicy::Majority).unwrap().windows)
        .collect()
}

fn small_model(classes: usize, seed: u64) -> Model {
    build_model(&ModelConfig {
        input_channels: 4,
        window_len: 8,
        conv_blocks: vec![ConvBlockConfig::new(8, 3, 1, 1)],
        gru_hidden: 8,
        dense_hidden: 8,
        num_classes: classes,
        seed,
    })
    .unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        adam: AdamConfig { lr: 1e-2, ..Default::default() },
        seed: 1,
    }
}

#[test]
fn training_is_deterministic() {
    let w = windows(3, 20);
    let split = split_windows(&w, SplitMode::default(), 9).unwrap();
    let (a, la) = train(small_model(3, 2), &w, &split, quick(3)).unwrap();
    let (b, lb) = train(small_model(3, 2), &w, &split, quick(3)).unwrap();
    assert_eq!(a.params, b.params);
    assert_eq!(la.len(), 3);
    assert!(la.iter().zip(&lb).all(|(x, y)| x.same_trajectory(y)));
    let (c, _) = train(small_model(3, 2), &w, &split, TrainConfig { seed: 2, ..quick(3) }).unwrap();
    assert_ne!(a.params, c.params);
}

#[test]
fn training_learns_the_synthetic_classes() {
    let w = windows(3, 30);
    let split = split_windows(&w, SplitMode::default(), 9).unwrap();
    let (m, logs) = train(small_model(3, 2), &w, &split, quick(15)).unwrap();
    assert!(logs.last().unwrap().train_loss < logs[0].train_loss);
    let r = evaluate(&m, &w, &split.test, CiUnit::Window, Confidence::P95).unwrap();
    assert!(r.accuracy > 0.9, "{}", r.summary_line());
    for l in &logs {
        assert!(l.train_loss >= 0.0 && l.val_loss >= 0.0);
        assert!((0.0..=1.0).contains(&l.train_acc) && (0.0..=1.0).contains(&l.val_acc));
    }
}

#[test]
fn zero_learning_rate_is_rejected_and_a_zero_step_changes_nothing() {
    let w = windows(2, 10);
    let split = split_windows(&w, SplitMode::default(), 1).unwrap();
    let cfg = TrainConfig { adam: AdamConfig { lr: 0.0, ..Default::default() }, ..quick(1) };
    assert!(matches!(train(small_model(2, 1), &w, &split, cfg), Err(Error::Config(_))));

    // the optimizer itself treats lr = 0 as a no-op on real gradients
    let mut m = small_model(2, 1);
    let before = m.params.clone();
    let (logits, cache) = m.forward_window(&w[0].model_input()).unwrap();
    let grads = m.backward_window(&cache, &logits).unwrap();
    let mut state = AdamState::new(AdamConfig { lr: 0.0, ..Default::default() }, m.params.tensors()).unwrap();
    adam_step(&mut m.params.tensors_mut(), &grads.tensors(), &mut state).unwrap();
    assert_eq!(m.params, before);
}

#[test]
fn empty_partitions_are_configuration_errors() {
    let w = windows(2, 10);
    let split = split_windows(&w, SplitMode::Random { train: 1.0, val: 0.0, test: 0.0 }, 1).unwrap();
    assert!(matches!(train(small_model(2, 1), &w, &split, quick(1)), Err(Error::Config(_))));
}

#[test]
fn non_finite_loss_reports_divergence() {
    let w = windows(2, 10);
    let split = split_windows(&w, SplitMode::default(), 1).unwrap();
    let mut m = small_model(2, 1);
    m.params.head.bias = Tensor::from_vec(vec![f32::NAN, 0.0]).unwrap();
    let err = train(m, &w, &split, quick(2)).unwrap_err();
    assert!(matches!(err, Error::Divergence { epoch: 0, batch: 0 }), "{err}");
}

#[test]
fn zero_head_predicts_class_zero_everywhere() {
    let w = windows(4, 10);
    let mut m = small_model(4, 3);
    m.params.head.weights = m.params.head.weights.map(|_| 0.0);
    m.params.head.bias = m.params.head.bias.map(|_| 0.0);
    let all: Vec<usize> = (0..w.len()).collect();
    let r = evaluate(&m, &w, &all, CiUnit::default(), Confidence::P95).unwrap();
    let class0 = w.iter().filter(|w| w.label == 0).count() as f64 / w.len() as f64;
    assert_eq!(r.accuracy, class0);
    assert!(predict_windows(&m, &w).unwrap().iter().all(|p| p.class == 0 && (p.confidence - 0.25).abs() < 1e-6));
}

#[test]
fn predictions_do_not_depend_on_order() {
    let w = windows(3, 8);
    let m = small_model(3, 4);
    let forward = predict_windows(&m, &w).unwrap();
    let mut reversed = w.clone();
    reversed.reverse();
    let mut back = predict_windows(&m, &reversed).unwrap();
    back.reverse();
    assert_eq!(forward, back);
    let idx: Vec<usize> = (0..w.len()).collect();
    let rev: Vec<usize> = idx.iter().rev().copied().collect();
    let a = evaluate(&m, &w, &idx, CiUnit::Window, Confidence::P95).unwrap();
    let b = evaluate(&m, &w, &rev, CiUnit::Window, Confidence::P95).unwrap();
    assert_eq!((a.confusion, a.kappa, a.macro_mcc), (b.confusion, b.kappa, b.macro_mcc));
}

#[test]
fn evaluate_rejects_mismatched_windows() {
    let w = windows(2, 4);
    let m = build_model::<f32>(&ModelConfig {
        input_channels: 5,
        window_len: 8,
        conv_blocks: vec![ConvBlockConfig::new(4, 3, 1, 1)],
        gru_hidden: 3,
        dense_hidden: 3,
        num_classes: 2,
        seed: 1,
    })
    .unwrap();
    let err = evaluate(&m, &w, &[0], CiUnit::Window, Confidence::P95).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)), "{err}");
    assert!(evaluate(&m, &w, &[], CiUnit::Window, Confidence::P95).is_err());
}

#[test]
fn bench_statistics_are_ordered() {
    let m = small_model(3, 1);
    let x = windows(3, 1)[0].model_input();
    for pre in [false, true] {
        let s = bench_latency(&m, &x, 40, 5, pre).unwrap();
        assert_eq!((s.iterations, s.timed, s.warmup), (40, 40, 5));
        assert!(s.min_ms <= s.p50_ms && s.p50_ms <= s.p95_ms && s.p95_ms <= s.max_ms);
        assert!(s.min_ms <= s.mean_ms && s.mean_ms <= s.max_ms);
    }
    let one = bench_latency(&m, &x, 1, 0, false).unwrap();
    assert!(one.mean_ms == one.p50_ms && one.min_ms == one.max_ms && one.mean_ms == one.max_ms);
    assert!(bench_latency(&m, &x, 0, 0, false).is_err());
}

#[test]
fn epoch_log_csv_layout() {
    let logs = vec![EpochLog {
        epoch: 0,
        train_loss: 1.5,
        train_acc: 0.25,
        val_loss: 1.25,
        val_acc: 0.5,
        seconds: 0.125,
    }];
    assert_eq!(
        epoch_log_csv(&logs),
        "epoch,train_loss,train_acc,val_loss,val_acc,seconds\n0,1.500000,0.250000,1.250000,0.500000,0.125\n"
    );
}
