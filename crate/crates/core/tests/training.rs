mod common;

use common::*;
use relnet::babi::{encode_sample, preprocess_context, EncodedSample, Vocabulary};
use relnet::graph::Graph;
use relnet::train::*;
use relnet::{Error, ParameterStore, Tensor};

fn encode_all(samples: &[relnet::babi::Sample], context_len: usize) -> (Vocabulary, Vec<EncodedSample>) {
    let vocab = Vocabulary::build(samples);
    let encoded = samples
        .iter()
        .map(|s| encode_sample(&preprocess_context(s, context_len), &vocab).unwrap())
        .collect();
    (vocab, encoded)
}

fn micro_setup(layers: usize) -> (Model, ParameterStore, Vec<EncodedSample>) {
    let cfg = ModelConfig::micro(layers);
    let (vocab, data) = encode_all(&overfit_suite(), cfg.context_len);
    let model = Model::new(&cfg, vocab.word_count(), vocab.answer_count()).unwrap();
    let store = model.init(5).unwrap();
    (model, store, data)
}

/// Relation and output weight matrices, identified by name alone.
fn is_penalized(name: &str) -> bool {
    let parts: Vec<&str> = name.split('.').collect();
    let head = parts[0];
    let relation_or_output = head == "g" || head == "f" || (head.starts_with('h') && head[1..].parse::<usize>().is_ok());
    relation_or_output && parts.len() == 3 && parts[1].parse::<usize>().is_ok() && parts[2] == "weight"
}

#[test]
fn penalty_covers_exactly_relation_and_output_weights() {
    for layers in 0..=2 {
        let (model, store, data) = micro_setup(layers);
        let batch: Vec<&EncodedSample> = data.iter().take(4).collect();
        let offsets = [0, 1, 2, 3];
        let mut expected = 0.0;
        for (name, p) in store.iter() {
            assert_eq!(p.regularize, is_penalized(name), "{name}");
            if is_penalized(name) {
                expected += p.value.data().iter().map(|v| v * v).sum::<f64>();
            }
        }
        let penalty = 3e-3;
        let loss = |p: f64| {
            let mut g = Graph::new();
            let nodes = compute_loss(&mut g, &store, &model, &batch, &offsets, p).unwrap();
            g.value(nodes.loss).data()[0]
        };
        let diff = loss(penalty) - loss(0.0);
        assert!((diff - penalty * expected).abs() < 1e-12 * expected.max(1.0), "m={layers}");
    }
}

#[test]
fn penalty_defaults_follow_depth() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.learning_rate, 5e-5);
    assert_eq!(cfg.batch_size, 32);
    assert_eq!(cfg.penalty(0), 2e-5);
    assert_eq!(cfg.penalty(1), 1e-4);
    assert_eq!(cfg.penalty(3), 1e-4);
}

#[test]
fn cross_entropy_limits() {
    let classes = 5;
    let mut g = Graph::new();
    let uniform = g.constant(Tensor::new(vec![3, classes], vec![0.7; 3 * classes]).unwrap());
    let ce = g.softmax_cross_entropy(uniform, &[0, 2, 4]).unwrap();
    assert!((g.value(ce).data()[0] - (classes as f64).ln()).abs() < 1e-12);

    let mut confident = vec![-50.0; 2 * classes];
    confident[1] = 50.0;
    confident[classes + 3] = 50.0;
    let logits = g.constant(Tensor::new(vec![2, classes], confident).unwrap());
    let ce = g.softmax_cross_entropy(logits, &[1, 3]).unwrap();
    assert!(g.value(ce).data()[0] < 1e-30);
}

#[test]
fn labels_outside_the_answer_set_are_rejected() {
    let (model, store, data) = micro_setup(0);
    let mut bad = data[0].clone();
    bad.label = model.classes();
    let mut g = Graph::new();
    let err = compute_loss(&mut g, &store, &model, &[&bad], &[0], 0.0).unwrap_err();
    assert!(matches!(err, Error::Data(_)), "{err}");
}

#[test]
fn full_batch_loss_decreases_on_the_overfit_suite() {
    let (model, mut store, data) = micro_setup(1);
    let batch: Vec<&EncodedSample> = data.iter().collect();
    let offsets = vec![0; batch.len()];
    // Default optimizer settings; learning rate 5e-5.
    let adam = AdamConfig::default();
    let mut losses = Vec::new();
    for t in 1..=50 {
        let mut g = Graph::new();
        let nodes = compute_loss(&mut g, &store, &model, &batch, &offsets, 1e-4).unwrap();
        losses.push(g.value(nodes.loss).data()[0]);
        store.zero_grad();
        g.backward_into(nodes.loss, &mut store).unwrap();
        adam_step(&mut store, &adam, t).unwrap();
    }
    let rises = losses[5..].windows(2).filter(|w| w[1] >= w[0]).count();
    assert!(rises <= 1, "{losses:?}");
    assert!(losses[49] < losses[0]);
}

#[test]
fn zero_gradient_leaves_parameters_alone() {
    let (_, mut store, _) = micro_setup(1);
    let before = store.clone();
    store.zero_grad();
    adam_step(&mut store, &AdamConfig::default(), 1).unwrap();
    for (name, p) in before.iter() {
        assert_eq!(p.value, *store.value(name).unwrap(), "{name}");
    }
}

#[test]
fn first_adam_step_moves_by_learning_rate() {
    let mut store = ParameterStore::new();
    store.insert("w", Tensor::vector(vec![1.0, -2.0, 0.5]).unwrap(), true).unwrap();
    store.accumulate_grad("w", &[0.3, -4.0, 1e-3]).unwrap();
    let cfg = AdamConfig::default();
    adam_step(&mut store, &cfg, 1).unwrap();
    let w = store.value("w").unwrap().data();
    let lr = cfg.learning_rate;
    for (after, (before, sign)) in w.iter().zip([(1.0, 1.0), (-2.0, -1.0), (0.5, 1.0)]) {
        assert!((before - after - lr * sign).abs() < lr * 1e-4);
    }
}

#[test]
fn non_finite_gradient_names_the_parameter() {
    let (_, mut store, _) = micro_setup(0);
    store.zero_grad();
    let n = store.value("g.1.bias").unwrap().len();
    let mut bad = vec![0.0; n];
    bad[0] = f64::NAN;
    store.accumulate_grad("g.1.bias", &bad).unwrap();
    let before = store.clone();
    match adam_step(&mut store, &AdamConfig::default(), 1) {
        Err(Error::NonFiniteGradient(name)) => assert_eq!(name, "g.1.bias"),
        other => panic!("{other:?}"),
    }
    for (name, p) in before.iter() {
        assert_eq!(p.value, *store.value(name).unwrap());
    }
}

#[test]
fn checkpoint_round_trip_keeps_values_and_optimizer_state() {
    let (model, mut store, data) = micro_setup(1);
    let batch: Vec<&EncodedSample> = data.iter().take(8).collect();
    let mut g = Graph::new();
    let nodes = compute_loss(&mut g, &store, &model, &batch, &[0; 8], 1e-4).unwrap();
    store.zero_grad();
    g.backward_into(nodes.loss, &mut store).unwrap();
    adam_step(&mut store, &AdamConfig::default(), 1).unwrap();

    let mut bytes = Vec::new();
    store.write_to(&mut bytes, "{\"note\":1}").unwrap();
    let (back, meta) = ParameterStore::read_from(&mut bytes.as_slice()).unwrap();
    assert_eq!(meta, "{\"note\":1}");
    let mut again = Vec::new();
    back.write_to(&mut again, &meta).unwrap();
    assert_eq!(bytes, again);
    for (name, p) in store.iter() {
        let q = back.get(name).unwrap();
        assert_eq!(p.value, q.value);
        assert_eq!(p.slots, q.slots);
        assert_eq!(p.regularize, q.regularize);
    }
    assert_eq!(model.predict(&store, &data).unwrap(), model.predict(&back, &data).unwrap());
}

#[test]
fn training_is_deterministic_per_seed() {
    let (model, store, data) = micro_setup(1);
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        max_steps: 40,
        eval_interval: 10,
        seed: 3,
        ..TrainConfig::default()
    };
    let csv = |seed: u64| {
        let cfg = TrainConfig { seed, ..cfg.clone() };
        let r = train(&model, &cfg, store.clone(), &data, &data[..20]).unwrap();
        let mut out = Vec::new();
        write_metrics_csv(&r.metrics, &mut out).unwrap();
        (out, r.step_losses)
    };
    let (a, la) = csv(3);
    let (b, lb) = csv(3);
    let (c, lc) = csv(4);
    assert_eq!(a, b);
    assert_eq!(la, lb);
    assert_ne!(la, lc);
    assert!(!c.is_empty());
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap();
    let mut expected = vec!["step".to_string(), "loss".into(), "acc_overall".into()];
    expected.extend((1..=20).map(|t| format!("acc_task{t}")));
    assert_eq!(header, expected.join(","));
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn mean_error_arithmetic() {
    let sample = |task: u8, label: usize| EncodedSample {
        id: String::new(),
        task,
        context: vec![vec![1]],
        question: vec![1],
        label,
        supporting: vec![],
    };
    let mut samples = Vec::new();
    let mut predictions = Vec::new();
    for task in 1..=20u8 {
        for i in 0..1000 {
            samples.push(sample(task, 0));
            predictions.push(usize::from(task == 20 && i < 2));
        }
    }
    let report = EvalReport::from_predictions("test", &samples, &predictions).unwrap();
    assert!((report.mean_error() - 0.01).abs() < 1e-9);
    assert_eq!(report.succeeded(), 20);
    assert_eq!(report.accuracy_of(1), Some(1.0));
    let text = report.render_text();
    assert_eq!(text.lines().count(), 2 + 20 + 2);
    assert!(text.contains("tasks succeeded (>95%): 20/20"));
    assert!(text.contains("mean error (%): 0.010"));

    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(json["tasks"].as_array().unwrap().len(), 20);
    assert_eq!(json["succeeded"], 20);
}

#[test]
fn ninety_five_percent_is_not_success() {
    let sample = EncodedSample {
        id: String::new(),
        task: 4,
        context: vec![vec![1]],
        question: vec![1],
        label: 0,
        supporting: vec![],
    };
    let samples = vec![sample; 20];
    let mut predictions = vec![0; 20];
    predictions[0] = 1;
    let report = EvalReport::from_predictions("valid", &samples, &predictions).unwrap();
    assert_eq!(report.accuracy_of(4), Some(0.95));
    assert_eq!(report.succeeded(), 0);
}
